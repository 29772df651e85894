//! Restricted isometry analysis of small matrices by subset enumeration.
//!
//! For every column subset `S` with `#S = s` the Gram matrix `A_Sᵀ A_S` is
//! diagonalized. Its extreme eigenvalues give the frame bounds
//! `α_s² = min_S λ_min`, `β_s² = max_S λ_max`, and the restricted isometry
//! constant is the largest deviation `|λ − 1|` seen on any subset.
//!
//! When `C(n, s)` exceeds the budget, subsets are sampled uniformly instead.
//! Sampled reports are NOT certificates: the `δ` they carry is only a lower
//! bound on the true constant, and `certified` is false.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{binomial, Combinations, DenseMatrix};

/// Default enumeration budget (number of subsets).
pub const DEFAULT_BUDGET: u128 = 1_000_000;
/// Relative singular-value cutoff for full-rank decisions.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RipOptions {
    pub budget: u128,
    pub seed: u64,
    pub rank_tolerance: f64,
}

impl Default for RipOptions {
    fn default() -> Self {
        RipOptions { budget: DEFAULT_BUDGET, seed: 0, rank_tolerance: RANK_TOLERANCE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipReport {
    pub order: usize,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub certified: bool,
    pub subsets_examined: u128,
}

#[derive(Debug, Clone, Copy)]
struct Spectrum {
    lambda_min: f64,
    lambda_max: f64,
    deviation: f64,
}

impl Spectrum {
    fn identity() -> Self {
        Spectrum { lambda_min: f64::INFINITY, lambda_max: f64::NEG_INFINITY, deviation: 0.0 }
    }

    fn merge(self, other: Spectrum) -> Spectrum {
        Spectrum {
            lambda_min: self.lambda_min.min(other.lambda_min),
            lambda_max: self.lambda_max.max(other.lambda_max),
            deviation: self.deviation.max(other.deviation),
        }
    }
}

fn gram(a: &DenseMatrix, cols: &[usize]) -> DMatrix<f64> {
    let sub = a.select_columns(cols);
    sub.transpose() * sub
}

fn subset_spectrum(a: &DenseMatrix, cols: &[usize]) -> Spectrum {
    let eig = gram(a, cols).symmetric_eigenvalues();
    let lambda_min = eig.min();
    let lambda_max = eig.max();
    Spectrum {
        lambda_min,
        lambda_max,
        deviation: (1.0 - lambda_min).abs().max((lambda_max - 1.0).abs()),
    }
}

fn check_order(a: &DenseMatrix, s: usize) -> Result<()> {
    if s == 0 || s > a.cols() {
        return Err(Error::Domain(format!(
            "order {s} must satisfy 1 <= s <= n = {}",
            a.cols()
        )));
    }
    Ok(())
}

fn sampled_subsets(n: usize, s: usize, count: u128, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut idx = sample(&mut rng, n, s).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect()
}

/// Extreme Gram spectra over all (or sampled) `s`-column subsets.
fn scan(a: &DenseMatrix, s: usize, opts: &RipOptions) -> Result<(Spectrum, bool, u128)> {
    check_order(a, s)?;
    let total = binomial(a.cols(), s);
    if total <= opts.budget {
        let spectrum = Combinations::new(a.cols(), s)
            .par_bridge()
            .map(|cols| subset_spectrum(a, &cols))
            .reduce(Spectrum::identity, Spectrum::merge);
        Ok((spectrum, true, total))
    } else {
        let subsets = sampled_subsets(a.cols(), s, opts.budget, opts.seed);
        let spectrum = subsets
            .par_iter()
            .map(|cols| subset_spectrum(a, cols))
            .reduce(Spectrum::identity, Spectrum::merge);
        Ok((spectrum, false, opts.budget))
    }
}

/// `(α_s, β_s)` with `α_s ‖x‖₂ ≤ ‖Ax‖₂ ≤ β_s ‖x‖₂` on `s`-sparse `x`.
pub fn frame_bounds(a: &DenseMatrix, s: usize, opts: &RipOptions) -> Result<(f64, f64)> {
    let report = rip_constant(a, s, opts)?;
    Ok((report.alpha, report.beta))
}

/// Restricted isometry constant `δ_s(A)` with its frame bounds.
pub fn rip_constant(a: &DenseMatrix, s: usize, opts: &RipOptions) -> Result<RipReport> {
    let (spectrum, certified, subsets_examined) = scan(a, s, opts)?;
    Ok(RipReport {
        order: s,
        alpha: spectrum.lambda_min.max(0.0).sqrt(),
        beta: spectrum.lambda_max.max(0.0).sqrt(),
        delta: spectrum.deviation,
        certified,
        subsets_examined,
    })
}

/// Rescaled matrix `B = √(2/(α² + β²)) A` and its constant `(β² − α²)/(α² + β²)`.
pub fn rescale_to_rip(a: &DenseMatrix, s: usize, opts: &RipOptions) -> Result<(DenseMatrix, f64)> {
    let report = rip_constant(a, s, opts)?;
    let (a2, b2) = (report.alpha.powi(2), report.beta.powi(2));
    if report.alpha <= opts.rank_tolerance * report.beta {
        return Err(Error::NotUniquelyDetermined(format!(
            "lower frame bound vanishes at order {s}"
        )));
    }
    let scale = (2.0 / (a2 + b2)).sqrt();
    Ok((a.scaled(scale), (b2 - a2) / (a2 + b2)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniqueDetermination {
    pub determined: bool,
    /// Every `2s`-column submatrix has full column rank.
    pub rank_path: bool,
    /// `α_{2s} > 0` within the rank tolerance.
    pub frame_path: bool,
    pub explanation: Option<String>,
}

/// Whether `Ax` determines every `s`-sparse `x`, i.e. no nonzero `2s`-sparse kernel vector.
pub fn unique_determination(a: &DenseMatrix, s: usize, opts: &RipOptions) -> Result<UniqueDetermination> {
    if s == 0 {
        return Err(Error::Domain("sparsity must be positive".into()));
    }
    let order = 2 * s;
    if order > a.rows() || order > a.cols() {
        return Ok(UniqueDetermination {
            determined: false,
            rank_path: false,
            frame_path: false,
            explanation: Some(format!(
                "2s = {order} columns cannot be independent with {} rows and {} columns",
                a.rows(),
                a.cols()
            )),
        });
    }
    let total = binomial(a.cols(), order);
    if total > opts.budget {
        return Err(Error::Budget { needed: total, budget: opts.budget });
    }
    let tol = opts.rank_tolerance;
    let rank_path = Combinations::new(a.cols(), order).par_bridge().all(|cols| {
        let sv = a.select_columns(&cols).singular_values();
        let smax = sv.max();
        smax > 0.0 && sv.iter().filter(|&&v| v > tol * smax).count() == order
    });
    let report = rip_constant(a, order, opts)?;
    let frame_path = report.alpha > tol * report.beta;
    let explanation = match (rank_path, frame_path) {
        (true, true) => None,
        (false, false) => Some(format!("some {order}-column submatrix is rank deficient")),
        _ => Some(format!(
            "rank test ({rank_path}) and frame-bound test ({frame_path}) disagree near the tolerance"
        )),
    };
    Ok(UniqueDetermination { determined: rank_path && frame_path, rank_path, frame_path, explanation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub trials: usize,
    pub max_ratio: f64,
    pub delta2s: f64,
    pub delta2s_certified: bool,
    pub within_bound: bool,
}

/// Largest `|⟨Au, Av⟩| / (‖u‖₂‖v‖₂)` over random disjointly supported `s`-sparse pairs,
/// compared against `δ_{2s}(A)`.
pub fn disjoint_correlation_check(
    a: &DenseMatrix,
    s: usize,
    trials: usize,
    seed: u64,
    opts: &RipOptions,
) -> Result<CorrelationReport> {
    if s == 0 || 2 * s > a.cols() {
        return Err(Error::Domain(format!(
            "need 1 <= s and 2s <= n, got s = {s}, n = {}",
            a.cols()
        )));
    }
    let rip = rip_constant(a, 2 * s, opts)?;
    let dense = a.to_nalgebra();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio = 0.0_f64;
    for _ in 0..trials {
        let idx = sample(&mut rng, a.cols(), 2 * s).into_vec();
        let mut u = DVector::zeros(a.cols());
        let mut v = DVector::zeros(a.cols());
        for &i in &idx[..s] {
            u[i] = StandardNormal.sample(&mut rng);
        }
        for &i in &idx[s..] {
            v[i] = StandardNormal.sample(&mut rng);
        }
        let (nu, nv) = (u.norm(), v.norm());
        if nu == 0.0 || nv == 0.0 {
            continue;
        }
        let ratio = (&dense * &u).dot(&(&dense * &v)).abs() / (nu * nv);
        max_ratio = max_ratio.max(ratio);
    }
    Ok(CorrelationReport {
        trials,
        max_ratio,
        delta2s: rip.delta,
        delta2s_certified: rip.certified,
        within_bound: max_ratio <= rip.delta + 1e-10,
    })
}
