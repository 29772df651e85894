//! Null space analysis: kernel bases, the `ℓq` null space constant and a
//! grid estimate of the largest exponent with strict null space property.
//!
//! The constant is
//!
//! ```text
//! γ = sup { ‖h_S‖_q / ‖h_{Sᶜ}‖_q : Ah = 0, h ≠ 0, #S ≤ s }.
//! ```
//!
//! For a fixed `h` the best `S` is the top-`s` magnitude support: it makes the
//! numerator as large and the denominator as small as possible at once. With
//! a one-dimensional kernel this settles `γ` exactly. For larger kernels the
//! supremum over the coefficient sphere is nonconvex, and we only report the
//! best value found by a seeded multi-start pattern search (a lower bound),
//! started from sparse kernel vectors, projected axes and random points.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::nsp_constant_bound;
use crate::error::{Error, Result};
use crate::matrix::{binomial, Combinations, DenseMatrix};
use crate::rip::{rescale_to_rip, RipOptions};
use crate::roots::bisect_predicate;
use crate::vector::{top_s_support, ZERO_TOLERANCE};

/// Relative singular-value cutoff defining the numerical kernel.
pub const KERNEL_TOLERANCE: f64 = 1e-10;
/// Margin used when deciding `γ < 1`.
pub const STRICT_MARGIN: f64 = 1e-9;
pub const DEFAULT_STARTS: usize = 64;
pub const Q_ESTIMATE_GRID: usize = 256;
pub const Q_ESTIMATE_TOLERANCE: f64 = 1e-6;

const PATTERN_MIN_STEP: f64 = 1e-9;
const PATTERN_MAX_SWEEPS: usize = 4000;
/// Largest number of zero patterns enumerated for sparse kernel starts.
pub const VERTEX_BUDGET: u128 = 20_000;

/// Orthonormal basis of `{h : Ah = 0}` as the columns of an `n × d` matrix.
///
/// `A` is padded with zero rows to a square matrix so that the SVD returns
/// the full right singular basis.
pub fn kernel_basis(a: &DenseMatrix) -> DMatrix<f64> {
    let n = a.cols();
    let mut padded = DMatrix::zeros(a.rows().max(n), n);
    padded.view_mut((0, 0), (a.rows(), n)).copy_from(&a.to_nalgebra());
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.max();
    let kernel_rows: Vec<usize> = (0..n)
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= KERNEL_TOLERANCE * smax)
        .collect();
    let mut basis = DMatrix::zeros(n, kernel_rows.len());
    for (k, &i) in kernel_rows.iter().enumerate() {
        basis.set_column(k, &v_t.row(i).transpose());
    }
    basis
}

/// Kernel basis as CSV, one basis vector per column.
pub fn kernel_basis_csv(basis: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..basis.nrows() {
        let row: Vec<String> = basis.row(i).iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `‖h_S‖_q / ‖h_{Sᶜ}‖_q` for the top-`s` support of `h`.
///
/// Entries below `ZERO_TOLERANCE · ‖h‖∞` are treated as zero so that round-off
/// in a computed kernel vector does not masquerade as a tiny tail. A vanishing
/// tail gives `+∞`.
pub fn support_ratio(h: &[f64], s: usize, q: f64) -> f64 {
    let hmax = h.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if hmax == 0.0 {
        return 0.0;
    }
    let cut = ZERO_TOLERANCE * hmax;
    let support = top_s_support(h, s.min(h.len()));
    let mut in_s = vec![false; h.len()];
    for &i in &support {
        in_s[i] = true;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (i, v) in h.iter().enumerate() {
        let v = v.abs();
        if v <= cut {
            continue;
        }
        let t = (v / hmax).powf(q);
        if in_s[i] {
            num += t;
        } else {
            den += t;
        }
    }
    if den == 0.0 {
        f64::INFINITY
    } else {
        (num / den).powf(1.0 / q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NspOptions {
    pub starts: usize,
    pub seed: u64,
    /// Attach the restricted-isometry upper bound when `δ_{2s}` is certified.
    pub with_rip_bound: bool,
    pub rip: RipOptions,
}

impl Default for NspOptions {
    fn default() -> Self {
        NspOptions { starts: DEFAULT_STARTS, seed: 0, with_rip_bound: true, rip: RipOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NspReport {
    pub s: usize,
    pub q: f64,
    pub kernel_dimension: usize,
    pub gamma_lower: f64,
    pub gamma_estimate: f64,
    pub certified: bool,
    pub rip_bound: Option<f64>,
    /// Kernel vector attaining `gamma_estimate`.
    pub witness: Option<Vec<f64>>,
}

impl NspReport {
    /// Strict null space property, decided with `STRICT_MARGIN`.
    pub fn strict(&self) -> bool {
        self.gamma_estimate < 1.0 - STRICT_MARGIN
    }
}

fn start_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Compass search on the unit sphere of kernel coefficients.
fn pattern_search(basis: &DMatrix<f64>, start: DVector<f64>, s: usize, q: f64) -> (f64, DVector<f64>) {
    let d = basis.ncols();
    let eval = |c: &DVector<f64>| support_ratio((basis * c).as_slice(), s, q);
    let mut c = start.normalize();
    let mut best = eval(&c);
    let mut step = 0.5;
    let mut sweeps = 0;
    while step > PATTERN_MIN_STEP && sweeps < PATTERN_MAX_SWEEPS && best.is_finite() {
        sweeps += 1;
        let mut improved = false;
        for j in 0..d {
            for sign in [1.0, -1.0] {
                let mut trial = c.clone();
                trial[j] += sign * step;
                let norm = trial.norm();
                if norm == 0.0 {
                    continue;
                }
                trial /= norm;
                let v = eval(&trial);
                if v > best {
                    best = v;
                    c = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, c)
}

/// Kernel vectors vanishing on `d − 1` chosen coordinates, as basis coefficients.
///
/// For small `q` the ratio peaks at such sparse kernel vectors, which random
/// starts almost never reach.
fn vertex_starts(basis: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let (n, d) = basis.shape();
    if binomial(n, d - 1) > VERTEX_BUDGET {
        return Vec::new();
    }
    Combinations::new(n, d - 1)
        .filter_map(|zeros| {
            let mut m = DMatrix::zeros(d, d);
            for (r, &i) in zeros.iter().enumerate() {
                m.set_row(r, &basis.row(i));
            }
            let svd = m.svd(false, true);
            let v_t = svd.v_t?;
            let (k, _) = svd
                .singular_values
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))?;
            // a second null direction means the pattern does not pin down a vertex
            let second = svd
                .singular_values
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, v)| *v)
                .fold(f64::INFINITY, f64::min);
            (second > KERNEL_TOLERANCE * svd.singular_values.max())
                .then(|| v_t.row(k).transpose())
        })
        .collect()
}

/// The null space constant of order `s` for exponent `q`.
pub fn nsp_gamma(a: &DenseMatrix, s: usize, q: f64, opts: &NspOptions) -> Result<NspReport> {
    if s == 0 || s > a.cols() {
        return Err(Error::Domain(format!("order {s} outside 1..={}", a.cols())));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("exponent {q} outside (0, 1]")));
    }
    let basis = kernel_basis(a);
    let rip_bound = if opts.with_rip_bound { rip_upper_bound(a, s, q, &opts.rip) } else { None };
    gamma_from_basis(&basis, s, q, opts, rip_bound)
}

fn rip_upper_bound(a: &DenseMatrix, s: usize, q: f64, rip: &RipOptions) -> Option<f64> {
    if 2 * s > a.cols() {
        return None;
    }
    let report = crate::rip::rip_constant(a, 2 * s, rip).ok()?;
    if !report.certified {
        return None;
    }
    let (_, delta) = rescale_to_rip(a, 2 * s, rip).ok()?;
    nsp_constant_bound(q, delta).ok()
}

fn gamma_from_basis(
    basis: &DMatrix<f64>,
    s: usize,
    q: f64,
    opts: &NspOptions,
    rip_bound: Option<f64>,
) -> Result<NspReport> {
    let d = basis.ncols();
    let report = |gamma: f64, certified: bool, witness: Option<Vec<f64>>| NspReport {
        s,
        q,
        kernel_dimension: d,
        gamma_lower: gamma,
        gamma_estimate: gamma,
        certified,
        rip_bound,
        witness,
    };
    match d {
        0 => Ok(report(0.0, true, None)),
        1 => {
            let h: Vec<f64> = basis.column(0).iter().cloned().collect();
            Ok(report(support_ratio(&h, s, q), true, Some(h)))
        }
        _ => {
            let n = basis.nrows();
            let mut starts: Vec<DVector<f64>> = Vec::new();
            for j in 0..d {
                let mut e = DVector::zeros(d);
                e[j] = 1.0;
                starts.push(e);
            }
            // projections of the coordinate axes onto the kernel
            for i in 0..n {
                let row = basis.row(i).transpose();
                if row.norm() > ZERO_TOLERANCE {
                    starts.push(row);
                }
            }
            starts.extend(vertex_starts(basis));
            for k in 0..opts.starts {
                let mut rng = ChaCha8Rng::seed_from_u64(start_seed(opts.seed, k));
                let c = DVector::from_fn(d, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z
                });
                if c.norm() > 0.0 {
                    starts.push(c);
                }
            }
            let (gamma, c) = starts
                .into_par_iter()
                .map(|c0| pattern_search(basis, c0, s, q))
                .reduce(
                    || (f64::NEG_INFINITY, DVector::zeros(d)),
                    |x, y| if y.0 > x.0 { y } else { x },
                );
            let h: Vec<f64> = (basis * c).iter().cloned().collect();
            Ok(report(gamma.max(0.0), false, Some(h)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QsEstimate {
    pub q: f64,
    /// Every `γ` evaluation was exact (kernel dimension at most one).
    pub certified: bool,
    /// A grid point with `γ ≥ 1` was seen below one with `γ < 1`.
    pub non_monotone: bool,
    pub diagnostic: Option<String>,
}

/// Largest `q` with strict null space property of order `s`: scanned on a
/// uniform grid of `(0, 1]` and refined by bisection.
pub fn q_s_estimate(a: &DenseMatrix, s: usize, opts: &NspOptions) -> Result<QsEstimate> {
    if s == 0 || s > a.cols() {
        return Err(Error::Domain(format!("order {s} outside 1..={}", a.cols())));
    }
    let basis = kernel_basis(a);
    let inner = NspOptions { with_rip_bound: false, ..*opts };
    let gamma_at = |q: f64| gamma_from_basis(&basis, s, q, &inner, None);
    let certified = basis.ncols() <= 1;
    let grid: Vec<f64> = (1..=Q_ESTIMATE_GRID).map(|k| k as f64 / Q_ESTIMATE_GRID as f64).collect();
    let strict: Vec<bool> = grid
        .par_iter()
        .map(|&q| gamma_at(q).map(|r| r.strict()))
        .collect::<Result<_>>()?;
    let Some(last) = strict.iter().rposition(|&b| b) else {
        return Ok(QsEstimate {
            q: 0.0,
            certified,
            non_monotone: false,
            diagnostic: Some(format!(
                "gamma >= 1 already at the grid floor q = {}",
                grid[0]
            )),
        });
    };
    let non_monotone = strict[..last].iter().any(|&b| !b);
    let q = if last + 1 == grid.len() {
        1.0
    } else {
        bisect_predicate(
            |q| gamma_at(q).map(|r| r.strict()).unwrap_or(false),
            grid[last],
            grid[last + 1],
            Q_ESTIMATE_TOLERANCE,
        )
    };
    let diagnostic = non_monotone.then(|| "strict property not monotone on the q grid".to_string());
    Ok(QsEstimate { q, certified, non_monotone, diagnostic })
}

/// An `s`-sparse signal that `ℓq` minimization cannot recover when the kernel
/// vector `h` has ratio above one: `x = h_S` shares measurements with
/// `−h_{Sᶜ}`, which has smaller quasinorm. Returns `(x, competitor)`.
pub fn failing_signal(h: &[f64], s: usize, q: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    if support_ratio(h, s, q) <= 1.0 {
        return None;
    }
    let support = top_s_support(h, s.min(h.len()));
    let mut x = vec![0.0; h.len()];
    let mut competitor: Vec<f64> = h.iter().map(|v| -v).collect();
    for &i in &support {
        x[i] = h[i];
        competitor[i] = 0.0;
    }
    Some((x, competitor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::nsp_constant_bound;
    use crate::matrix::Combinations;
    use crate::rip::rip_constant;
    use crate::vector::q_power_sum;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gaussian(m: usize, n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..m * n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z / (m as f64).sqrt()
            })
            .collect();
        DenseMatrix::new(m, n, data).unwrap()
    }

    /// Kernel spanned by (2, 1, 1).
    fn two_one_one() -> DenseMatrix {
        DenseMatrix::from_rows(vec![vec![1.0, -2.0, 0.0], vec![1.0, 0.0, -2.0]]).unwrap()
    }

    fn brute_ratio(h: &[f64], s: usize, q: f64) -> f64 {
        let mut best = 0.0_f64;
        for k in 1..=s {
            for sub in Combinations::new(h.len(), k) {
                let hs: Vec<f64> = (0..h.len()).map(|i| if sub.contains(&i) { h[i] } else { 0.0 }).collect();
                let hc: Vec<f64> = (0..h.len()).map(|i| if sub.contains(&i) { 0.0 } else { h[i] }).collect();
                let den = q_power_sum(&hc, q);
                let r = if den == 0.0 { f64::INFINITY } else { (q_power_sum(&hs, q) / den).powf(1.0 / q) };
                best = best.max(r);
            }
        }
        best
    }

    #[test]
    fn kernel_of_row_of_ones() {
        let a = DenseMatrix::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        let k = kernel_basis(&a);
        assert_eq!(k.ncols(), 1);
        assert_relative_eq!((k[(0, 0)] + k[(1, 0)]).abs(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(k[(0, 0)].abs(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(kernel_basis(&DenseMatrix::identity(4)).ncols(), 0);
    }

    #[test]
    fn kernel_residual_oracle() {
        let a = gaussian(6, 9, 31);
        let k = kernel_basis(&a);
        assert_eq!(k.ncols(), 3);
        let na = a.to_nalgebra();
        let scale = a.frobenius_norm();
        for j in 0..3 {
            assert!((&na * k.column(j)).norm() <= 1e-10 * scale);
        }
        assert!((k.transpose() * &k - DMatrix::identity(3, 3)).norm() < 1e-12);
        let csv = kernel_basis_csv(&k);
        assert_eq!(csv.lines().count(), 9);
    }

    #[test]
    fn gamma_examples() {
        let ones = DenseMatrix::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        let r = nsp_gamma(&ones, 1, 1.0, &NspOptions::default()).unwrap();
        assert!(r.certified);
        assert_relative_eq!(r.gamma_estimate, 1.0, epsilon = 1e-12);
        let r = nsp_gamma(&two_one_one(), 1, 0.5, &NspOptions::default()).unwrap();
        assert!(r.certified);
        assert_relative_eq!(r.gamma_estimate, 0.5, epsilon = 1e-12);
        let id = nsp_gamma(&DenseMatrix::identity(3), 1, 0.5, &NspOptions::default()).unwrap();
        assert_eq!((id.gamma_estimate, id.certified, id.kernel_dimension), (0.0, true, 0));
        assert!(r.gamma_lower <= r.gamma_estimate);
    }

    #[test]
    fn q_s_examples() {
        let ones = DenseMatrix::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        let e = q_s_estimate(&ones, 1, &NspOptions::default()).unwrap();
        assert_eq!(e.q, 0.0);
        assert!(e.diagnostic.is_some());
        let e = q_s_estimate(&two_one_one(), 1, &NspOptions::default()).unwrap();
        assert!(e.certified && !e.non_monotone);
        assert!(e.q > 1.0 - 2e-6 && e.q < 1.0, "{}", e.q);
    }

    #[test]
    fn q_s_drops_when_a_column_is_duplicated() {
        // kernel (3, 1, 1, 1): γ(q) = 3 / 3^{1/q} < 1 for q < 1
        let base = DenseMatrix::from_rows(vec![
            vec![1.0, -3.0, 0.0, 0.0],
            vec![1.0, 0.0, -3.0, 0.0],
            vec![1.0, 0.0, 0.0, -3.0],
        ])
        .unwrap();
        // replacing the last column with a copy of the third gives kernel (0, 0, 1, -1)
        let dup = DenseMatrix::from_rows(vec![
            vec![1.0, -3.0, 0.0, 0.0],
            vec![1.0, 0.0, -3.0, -3.0],
            vec![1.0, 0.0, 0.0, 0.0],
        ])
        .unwrap();
        let opts = NspOptions::default();
        let qb = q_s_estimate(&base, 1, &opts).unwrap().q;
        let qd = q_s_estimate(&dup, 1, &opts).unwrap().q;
        assert!(qb > 0.99 && qd == 0.0);
    }

    #[test]
    fn duplicated_column_found_in_larger_kernel() {
        // e₀ − e₁ lies in a three-dimensional kernel and gives ratio exactly 1
        let mut a = gaussian(5, 8, 11);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| {
                let mut r = a.row(i).to_vec();
                r[1] = r[0];
                r
            })
            .collect();
        a = DenseMatrix::from_rows(rows).unwrap();
        for q in [1.0, 0.5, 0.1, 0.02] {
            let r = nsp_gamma(&a, 1, q, &NspOptions::default()).unwrap();
            assert_eq!(r.kernel_dimension, 3);
            assert!(r.gamma_estimate >= 1.0 - 1e-9, "q {q}: {}", r.gamma_estimate);
            assert!(!r.strict());
        }
    }

    #[test]
    fn rip_bound_dominates_exact_gamma() {
        let mut checked = 0;
        for seed in 0..40 {
            let a = gaussian(4, 5, seed);
            let opts = NspOptions::default();
            for q in [0.1, 0.3, 0.5, 0.8, 1.0] {
                let r = nsp_gamma(&a, 1, q, &opts).unwrap();
                assert!(r.certified);
                let bound = r.rip_bound.expect("certified order-2 constant");
                assert!(r.gamma_estimate <= bound + 1e-6, "seed {seed} q {q}: {} > {bound}", r.gamma_estimate);
                checked += 1;
            }
        }
        assert_eq!(checked, 200);
        // the bound is the closed form evaluated at the rescaled constant
        let a = gaussian(4, 5, 3);
        let (_, delta) = rescale_to_rip(&a, 2, &RipOptions::default()).unwrap();
        assert!(rip_constant(&a, 2, &RipOptions::default()).unwrap().certified);
        let r = nsp_gamma(&a, 1, 0.5, &NspOptions::default()).unwrap();
        assert_eq!(r.rip_bound.unwrap(), nsp_constant_bound(0.5, delta).unwrap());
    }

    #[test]
    fn multi_start_is_lower_bound_and_deterministic() {
        let a = gaussian(6, 8, 12);
        let opts = NspOptions { starts: 16, seed: 4, ..Default::default() };
        let r1 = nsp_gamma(&a, 2, 0.5, &opts).unwrap();
        let r2 = nsp_gamma(&a, 2, 0.5, &opts).unwrap();
        assert_eq!(r1, r2);
        assert!(!r1.certified);
        // the witness lies in the kernel and attains the reported value
        let h = r1.witness.clone().unwrap();
        assert_relative_eq!(support_ratio(&h, 2, 0.5), r1.gamma_estimate, max_relative = 1e-12);
        // random kernel directions never beat the search
        let basis = kernel_basis(&a);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..2000 {
            let c = DVector::from_fn(basis.ncols(), |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            });
            let h = &basis * c;
            assert!(support_ratio(h.as_slice(), 2, 0.5) <= r1.gamma_estimate + 1e-12);
        }
    }

    #[test]
    fn failing_signal_when_gamma_exceeds_one() {
        // kernel (1, 1, 1, -3), s = 2 at q = 1: ratio 4/2 > 1
        let h = [1.0, 1.0, 1.0, -3.0];
        let (x, y) = failing_signal(&h, 2, 1.0).unwrap();
        // ties among the unit entries go to the lowest index
        assert_eq!(x, vec![1.0, 0.0, 0.0, -3.0]);
        // x − y = h lies in the kernel and y is strictly smaller in ℓq
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        assert_eq!(diff, h.to_vec());
        assert!(q_power_sum(&y, 1.0) < q_power_sum(&x, 1.0));
        assert!(failing_signal(&[2.0, 1.0, 1.0], 1, 0.5).is_none());
    }

    proptest! {
        #[test]
        fn top_s_ratio_equals_brute_force(
            h in prop::collection::vec(-5.0f64..5.0, 2..8),
            s in 1usize..4,
            q in 0.05f64..=1.0,
        ) {
            prop_assume!(h.iter().any(|v| v.abs() > 1e-3));
            let s = s.min(h.len() - 1);
            let fast = support_ratio(&h, s, q);
            let slow = brute_ratio(&h, s, q);
            if slow.is_infinite() {
                prop_assert!(fast.is_infinite());
            } else {
                prop_assert!((fast - slow).abs() <= 1e-10 * slow.max(1.0));
            }
        }
    }
}
