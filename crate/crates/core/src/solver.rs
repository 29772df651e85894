//! `ℓq` minimization: iteratively reweighted least squares for the equality
//! and noise-constrained programs, and an exhaustive support oracle.
//!
//! IRLS minimizes the smoothed objective `J(x, ε) = Σ (x_i² + ε²)^{q/2}`. Each
//! step solves a weighted minimum-norm problem with weights
//! `w_i = (x_i² + ε²)^{q/2 − 1}`; concavity of `t ↦ (t + ε²)^{q/2}` makes
//! `J` nonincreasing along the iterates. The result is a local minimizer only,
//! so [`irls_equality`] runs several starts in parallel (minimum-norm, seeded
//! kernel perturbations, a greedy orthogonal-matching start, and for `q < 1` a
//! continuation from the `q = 1` solution), refits each on its leading
//! supports by least squares and keeps the smallest feasible objective.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{binomial, min_norm_lstsq, Combinations, DenseMatrix, SupportSet};
use crate::nsp::kernel_basis;
use crate::vector::{q_power_sum, SignalVector};

/// Relative residual accepted as "in the range of `A`".
pub const RANGE_TOLERANCE: f64 = 1e-8;
/// Support enumeration budget of the exhaustive oracle.
pub const ORACLE_BUDGET: u128 = 100_000;
/// Relative objective gap under which two oracle candidates tie.
pub const TIE_TOLERANCE: f64 = 1e-9;
const MAX_PENALTY_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub q: f64,
    pub max_iterations: usize,
    pub epsilon_floor: f64,
    pub convergence_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Sparsity used by the smoothing schedule; `m / 2` when absent.
    pub sparsity_hint: Option<usize>,
}

impl SolverOptions {
    pub fn new(q: f64) -> Result<Self> {
        let opts = SolverOptions {
            q,
            max_iterations: 200,
            epsilon_floor: 1e-10,
            convergence_tol: 1e-9,
            restarts: 5,
            seed: 0,
            sparsity_hint: None,
        };
        opts.validate()?;
        Ok(opts)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::Domain(format!("exponent {} outside (0, 1]", self.q)));
        }
        if self.max_iterations == 0 || self.restarts == 0 {
            return Err(Error::Domain("iteration and restart counts must be positive".into()));
        }
        if !(self.epsilon_floor > 0.0 && self.convergence_tol > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOutcome {
    pub x_hat: SignalVector,
    /// `‖x_hat‖_q^q`.
    pub objective: f64,
    pub feasibility_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn check_shapes(a: &DenseMatrix, z: &SignalVector) -> Result<()> {
    if z.len() != a.rows() {
        return Err(Error::Shape(format!(
            "measurement length {} for {} rows",
            z.len(),
            a.rows()
        )));
    }
    Ok(())
}

fn residual(a: &DMatrix<f64>, x: &DVector<f64>, z: &DVector<f64>) -> f64 {
    (a * x - z).norm()
}

/// `(s+1)`-th largest magnitude of `x` (zero when `x` is `s`-sparse).
fn magnitude_rank(x: &DVector<f64>, s: usize) -> f64 {
    if s >= x.len() {
        return 0.0;
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags[s]
}

fn smoothed_objective(x: &DVector<f64>, eps: f64, q: f64) -> f64 {
    x.iter().map(|v| (v * v + eps * eps).powf(0.5 * q)).sum()
}

fn outcome(a: &DMatrix<f64>, z: &DVector<f64>, x: DVector<f64>, q: f64, iterations: usize, converged: bool) -> Result<RecoveryOutcome> {
    let feasibility_residual = residual(a, &x, z);
    let x_hat = SignalVector::new(x.iter().cloned().collect())?;
    Ok(RecoveryOutcome {
        objective: q_power_sum(x_hat.as_slice(), q),
        x_hat,
        feasibility_residual,
        iterations,
        converged,
    })
}

/// Least-squares refits of `x` on its top-`k` supports, `k = 1, …, min(m, nnz)`.
///
/// Any refit that stays feasible and lowers `‖·‖_q^q` replaces `x`. The
/// numerical support itself is the last candidate, so a converged IRLS
/// iterate is at worst cleaned of round-off.
fn polish(a: &DMatrix<f64>, z: &DVector<f64>, x: DVector<f64>, q: f64, tol: f64) -> DVector<f64> {
    let xmax = x.amax();
    if xmax == 0.0 {
        return x;
    }
    let nnz = x.iter().filter(|v| v.abs() > 1e-9 * xmax).count();
    let mut ranked: Vec<usize> = (0..x.len()).collect();
    ranked.sort_by(|&i, &j| x[j].abs().total_cmp(&x[i].abs()).then(i.cmp(&j)));
    let mut best_obj = q_power_sum(x.as_slice(), q);
    let mut best = x;
    for k in 1..=nnz.min(a.nrows()) {
        let mut support = ranked[..k].to_vec();
        support.sort_unstable();
        let sub = a.select_columns(&support);
        let u = min_norm_lstsq(&sub, z);
        if (&sub * &u - z).norm() > tol {
            continue;
        }
        let mut y = DVector::zeros(best.len());
        for (c, &i) in support.iter().enumerate() {
            y[i] = u[c];
        }
        let obj = q_power_sum(y.as_slice(), q);
        if obj <= best_obj * (1.0 + 1e-12) {
            best_obj = obj;
            best = y;
        }
    }
    best
}

/// Orthogonal matching pursuit until the measurements are fit within `tol`
/// (at most `m` columns). Used as one of the IRLS starting points.
fn greedy_start(a: &DMatrix<f64>, z: &DVector<f64>, tol: f64) -> DVector<f64> {
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let mut support: Vec<usize> = Vec::new();
    let mut x = DVector::zeros(a.ncols());
    let mut r = z.clone();
    while r.norm() > tol && support.len() < a.nrows() {
        let corr = a.tr_mul(&r);
        let pick = (0..a.ncols())
            .filter(|j| !support.contains(j) && norms[*j] > 0.0)
            .max_by(|&i, &j| (corr[i].abs() / norms[i]).total_cmp(&(corr[j].abs() / norms[j])).then(j.cmp(&i)));
        let Some(j) = pick else { break };
        support.push(j);
        let sub = a.select_columns(&support);
        let u = min_norm_lstsq(&sub, z);
        r = z - &sub * &u;
        x.fill(0.0);
        for (k, &i) in support.iter().enumerate() {
            x[i] = u[k];
        }
    }
    x
}

#[derive(Clone, Copy)]
enum Start {
    Cold,
    Warm,
    /// Solve at `q = 1` first, then warm start at the target exponent.
    Continuation,
}

struct Trace {
    x: DVector<f64>,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

/// IRLS from `x0`. A cold start smooths at `max|x0|`; a warm start begins at
/// the schedule value `σ_{s+1}(x0)/n` so that it keeps the structure of `x0`.
fn irls_from(a: &DMatrix<f64>, z: &DVector<f64>, x0: DVector<f64>, opts: &SolverOptions, s: usize, warm: bool) -> Trace {
    let n = a.ncols();
    let q = opts.q;
    let mut x = x0;
    let eps0 = if warm { magnitude_rank(&x, s) / n as f64 } else { x.amax() };
    let mut eps = eps0.max(opts.epsilon_floor);
    let mut history = vec![smoothed_objective(&x, eps, q)];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..opts.max_iterations {
        iterations += 1;
        let root_d = x.map(|v| (v * v + eps * eps).powf(0.5 * (1.0 - 0.5 * q)));
        let mut scaled = a.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= root_d[j];
        }
        let next = min_norm_lstsq(&scaled, z).component_mul(&root_d);
        let change = (&next - &x).norm();
        let scale = next.norm().max(1.0);
        x = next;
        eps = eps.min(magnitude_rank(&x, s) / n as f64).max(opts.epsilon_floor);
        history.push(smoothed_objective(&x, eps, q));
        if change <= opts.convergence_tol * scale {
            converged = true;
            break;
        }
    }
    Trace { x, iterations, converged, history }
}

fn range_check(a: &DMatrix<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
    let x0 = min_norm_lstsq(a, z);
    let r = residual(a, &x0, z);
    if r > RANGE_TOLERANCE * z.norm().max(1.0) {
        return Err(Error::Infeasible {
            reason: format!("measurements are not in the range of the matrix (residual {r:e})"),
            attainable: Some(r),
        });
    }
    Ok(x0)
}

fn starting_points(a: &DMatrix<f64>, dense: &DenseMatrix, x0: &DVector<f64>, opts: &SolverOptions) -> Vec<DVector<f64>> {
    let mut starts = vec![x0.clone()];
    if opts.restarts > 1 {
        let basis = kernel_basis(dense);
        let d = basis.ncols();
        if d > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let scale = x0.norm().max(1.0) / (d as f64).sqrt();
            for _ in 1..opts.restarts {
                let c = DVector::from_fn(d, |_, _| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    scale * g
                });
                starts.push(x0 + &basis * c);
            }
        }
    }
    debug_assert!(starts.iter().all(|s| s.len() == a.ncols()));
    starts
}

/// Single-start IRLS from the minimum-norm point, returning the smoothed
/// objective after every iteration.
pub fn irls_equality_traced(a: &DenseMatrix, z: &SignalVector, opts: &SolverOptions) -> Result<(RecoveryOutcome, Vec<f64>)> {
    opts.validate()?;
    check_shapes(a, z)?;
    let am = a.to_nalgebra();
    let zv = DVector::from_column_slice(z.as_slice());
    let x0 = range_check(&am, &zv)?;
    let s = opts.sparsity_hint.unwrap_or(a.rows() / 2);
    let trace = irls_from(&am, &zv, x0, opts, s, false);
    let out = outcome(&am, &zv, trace.x, opts.q, trace.iterations, trace.converged)?;
    Ok((out, trace.history))
}

/// Local minimizer of `‖x‖_q` subject to `Ax = z`, best of the restarts.
pub fn irls_equality(a: &DenseMatrix, z: &SignalVector, opts: &SolverOptions) -> Result<RecoveryOutcome> {
    opts.validate()?;
    check_shapes(a, z)?;
    let am = a.to_nalgebra();
    let zv = DVector::from_column_slice(z.as_slice());
    let x0 = range_check(&am, &zv)?;
    if zv.norm() == 0.0 {
        return outcome(&am, &zv, DVector::zeros(a.cols()), opts.q, 0, true);
    }
    let s = opts.sparsity_hint.unwrap_or(a.rows() / 2);
    let tol = RANGE_TOLERANCE * zv.norm().max(1.0);
    // the last start continues from the q = 1 solution
    let mut starts: Vec<(DVector<f64>, Start)> =
        starting_points(&am, a, &x0, opts).into_iter().map(|x| (x, Start::Cold)).collect();
    if opts.q < 1.0 {
        starts.push((x0.clone(), Start::Continuation));
    }
    starts.push((greedy_start(&am, &zv, tol), Start::Warm));
    let runs: Vec<(f64, DVector<f64>, usize, bool)> = starts
        .into_par_iter()
        .map(|(start, kind)| {
            let t = match kind {
                Start::Cold => irls_from(&am, &zv, start, opts, s, false),
                Start::Warm => irls_from(&am, &zv, start, opts, s, true),
                Start::Continuation => {
                    let convex = SolverOptions { q: 1.0, ..*opts };
                    let first = irls_from(&am, &zv, start, &convex, s, false);
                    let warm = polish(&am, &zv, first.x, opts.q, tol);
                    let mut t = irls_from(&am, &zv, warm, opts, s, true);
                    t.iterations += first.iterations;
                    t
                }
            };
            let x = polish(&am, &zv, t.x, opts.q, tol);
            (q_power_sum(x.as_slice(), opts.q), x, t.iterations, t.converged)
        })
        .collect();
    let (_, x, iterations, converged) = runs
        .into_iter()
        .reduce(|best, next| if next.0 < best.0 { next } else { best })
        .expect("at least one start");
    outcome(&am, &zv, x, opts.q, iterations, converged)
}

/// Penalized reweighted solve `min λ·Σ w_i x_i² + ‖Ax − y‖₂²` for fixed `λ`,
/// started from the ridge solution or from `warm` with its own smoothing level.
fn penalized(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    opts: &SolverOptions,
    s: usize,
    warm: Option<&DVector<f64>>,
) -> DVector<f64> {
    let m = a.nrows();
    let n = a.ncols();
    let q = opts.q;
    let solve = |d: &DVector<f64>| -> DVector<f64> {
        // x = D Aᵀ (A D Aᵀ + λI)⁻¹ y with D the inverse weights
        let mut ad = a.clone();
        for (j, mut col) in ad.column_iter_mut().enumerate() {
            col *= d[j];
        }
        let g = &ad * a.transpose() + DMatrix::identity(m, m) * lambda;
        let u = g.clone().cholesky().map(|c| c.solve(y)).unwrap_or_else(|| min_norm_lstsq(&g, y));
        ad.transpose() * u
    };
    let (mut x, mut eps) = match warm {
        Some(w) => (w.clone(), (magnitude_rank(w, s) / n as f64).max(opts.epsilon_floor)),
        None => {
            let x = solve(&DVector::from_element(n, 1.0));
            let eps = x.amax().max(opts.epsilon_floor);
            (x, eps)
        }
    };
    for _ in 0..opts.max_iterations {
        let d = x.map(|v| (v * v + eps * eps).powf(1.0 - 0.5 * q));
        let next = solve(&d);
        let change = (&next - &x).norm();
        let scale = next.norm().max(1.0);
        x = next;
        eps = eps.min(magnitude_rank(&x, s) / n as f64).max(opts.epsilon_floor);
        if change <= opts.convergence_tol * scale {
            break;
        }
    }
    x
}

/// Smallest `t ∈ [0, 1]` with `‖t·Au − y‖₂ ≤ ε`, given `‖Au − y‖₂ ≤ ε`.
fn shrink_factor(au: &DVector<f64>, y: &DVector<f64>, epsilon: f64) -> f64 {
    // ‖Au‖² t² − 2⟨Au, y⟩ t + ‖y‖² − ε² ≤ 0
    let (a2, b, c) = (au.norm_squared(), au.dot(y), y.norm_squared() - epsilon * epsilon);
    if c <= 0.0 {
        return 0.0;
    }
    if a2 == 0.0 {
        return 1.0;
    }
    let disc = (b * b - a2 * c).max(0.0);
    // c / (b + √disc) is the smaller root, computed without cancellation
    (c / (b + disc.sqrt())).clamp(0.0, 1.0)
}

/// Feasible refinements of `x` for the noise-constrained program:
/// least-squares refits on the top-`k` supports, each pulled toward zero until
/// the residual reaches `ε`. Moving along such a ray lowers `‖·‖_q^q`.
fn noisy_refits(a: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>, epsilon: f64) -> Vec<DVector<f64>> {
    let xmax = x.amax();
    if xmax == 0.0 {
        return vec![];
    }
    let nnz = x.iter().filter(|v| v.abs() > 1e-9 * xmax).count();
    let mut ranked: Vec<usize> = (0..x.len()).collect();
    ranked.sort_by(|&i, &j| x[j].abs().total_cmp(&x[i].abs()).then(i.cmp(&j)));
    let mut out = Vec::new();
    let shrink = |u: DVector<f64>| {
        let au = a * &u;
        if (&au - y).norm() > epsilon {
            return None;
        }
        Some(u * shrink_factor(&au, y, epsilon))
    };
    if let Some(v) = shrink(x.clone()) {
        out.push(v);
    }
    for k in 1..=nnz.min(a.nrows()) {
        let mut support = ranked[..k].to_vec();
        support.sort_unstable();
        let sub = a.select_columns(&support);
        let coef = min_norm_lstsq(&sub, y);
        let mut u = DVector::zeros(x.len());
        for (c, &i) in support.iter().enumerate() {
            u[i] = coef[c];
        }
        if let Some(v) = shrink(u) {
            out.push(v);
        }
    }
    out
}

/// Local minimizer of `‖x‖_q` subject to `‖Ax − y‖₂ ≤ ε`.
///
/// The penalty `λ` is bisected in log scale until the residual lands in
/// `[0.99ε, ε]`. The returned point is always feasible; `converged` records
/// whether the residual window was hit.
pub fn irls_noisy(a: &DenseMatrix, y: &SignalVector, epsilon: f64, opts: &SolverOptions) -> Result<RecoveryOutcome> {
    opts.validate()?;
    check_shapes(a, y)?;
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(Error::Domain(format!("noise level {epsilon} must be finite and nonnegative")));
    }
    if epsilon == 0.0 {
        return irls_equality(a, y, opts);
    }
    let am = a.to_nalgebra();
    let yv = DVector::from_column_slice(y.as_slice());
    let ynorm = yv.norm();
    if epsilon >= ynorm {
        return outcome(&am, &yv, DVector::zeros(a.cols()), opts.q, 0, true);
    }
    let x_ls = min_norm_lstsq(&am, &yv);
    let attainable = residual(&am, &x_ls, &yv);
    if epsilon < attainable {
        return Err(Error::Infeasible {
            reason: format!("noise level {epsilon:e} is below the attainable residual {attainable:e}"),
            attainable: Some(attainable),
        });
    }
    let s = opts.sparsity_hint.unwrap_or(a.rows() / 2);
    let projected = SignalVector::new((&am * &x_ls).iter().cloned().collect())?;
    let warm = DVector::from_column_slice(irls_equality(a, &projected, opts)?.x_hat.as_slice());
    // greedy fit stopped as soon as it enters the constraint set
    let greedy = greedy_start(&am, &yv, epsilon);
    let target = epsilon * (1.0 + 1e-6);
    let mut best: Option<(f64, DVector<f64>)> = None;
    let consider = |x: DVector<f64>, best: &mut Option<(f64, DVector<f64>)>| {
        for cand in std::iter::once(x.clone()).chain(noisy_refits(&am, &yv, &x, epsilon)) {
            if residual(&am, &cand, &yv) <= target {
                let obj = q_power_sum(cand.as_slice(), opts.q);
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    *best = Some((obj, cand));
                }
            }
        }
    };
    // λ carries units of (residual²)/(objective); bracket around the natural scale
    let unit = ynorm * ynorm / q_power_sum(x_ls.as_slice(), opts.q).max(f64::MIN_POSITIVE);
    let (mut lo, mut hi) = ((unit * 1e-16).ln(), (unit * 1e8).ln());
    let mut landed = false;
    let mut steps = 0;
    for _ in 0..MAX_PENALTY_STEPS {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        let lambda = mid.exp();
        let lagrangian = |x: &DVector<f64>| lambda * q_power_sum(x.as_slice(), opts.q) + residual(&am, x, &yv).powi(2);
        let cold = penalized(&am, &yv, lambda, opts, s, None);
        let mut candidates = vec![
            cold,
            penalized(&am, &yv, lambda, opts, s, Some(&warm)),
            penalized(&am, &yv, lambda, opts, s, Some(&greedy)),
        ];
        if let Some((_, b)) = &best {
            candidates.push(penalized(&am, &yv, lambda, opts, s, Some(b)));
        }
        let pick = (0..candidates.len())
            .min_by(|&i, &j| lagrangian(&candidates[i]).total_cmp(&lagrangian(&candidates[j])))
            .expect("nonempty");
        let r = residual(&am, &candidates[pick], &yv);
        for x in candidates {
            consider(x, &mut best);
        }
        if r > epsilon {
            hi = mid;
        } else if r < 0.99 * epsilon {
            lo = mid;
        } else {
            landed = true;
            break;
        }
    }
    // the equality solution on the projected measurements is always feasible
    consider(warm, &mut best);
    consider(greedy, &mut best);
    let (_, x) = best.ok_or_else(|| Error::Infeasible {
        reason: "no feasible point found".into(),
        attainable: Some(attainable),
    })?;
    outcome(&am, &yv, x, opts.q, steps, landed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub outcome: RecoveryOutcome,
    pub support: Vec<usize>,
    /// Distinct minimizers whose objectives tie within `TIE_TOLERANCE`.
    pub ties: Vec<SignalVector>,
    /// Supports were capped below `rank(A)`, so the minimum is over the
    /// restricted family only.
    pub restricted_oracle: bool,
    pub supports_examined: u128,
}

impl OracleOutcome {
    pub fn is_tied(&self) -> bool {
        self.ties.len() > 1
    }
}

fn matrix_rank(a: &DMatrix<f64>) -> usize {
    let sv = a.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&v| v > 1e-10 * smax).count()
}

/// Exhaustive `ℓq` minimization over all supports of size at most `s_max`.
///
/// For `q ≤ 1` the objective is concave on every orthant, so some global
/// minimizer has linearly independent columns on its support. Once
/// `s_max ≥ rank(A)` the oracle is therefore global.
pub fn brute_force_lq_min(a: &DenseMatrix, z: &SignalVector, q: f64, s_max: usize) -> Result<OracleOutcome> {
    brute_force_lq_min_with_budget(a, z, q, s_max, ORACLE_BUDGET)
}

pub fn brute_force_lq_min_with_budget(
    a: &DenseMatrix,
    z: &SignalVector,
    q: f64,
    s_max: usize,
    budget: u128,
) -> Result<OracleOutcome> {
    check_shapes(a, z)?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("exponent {q} outside (0, 1]")));
    }
    if s_max == 0 {
        return Err(Error::Domain("support cap must be positive".into()));
    }
    let s_max = s_max.min(a.cols());
    let needed = binomial(a.cols(), s_max);
    if needed > budget {
        return Err(Error::Budget { needed, budget });
    }
    let am = a.to_nalgebra();
    let zv = DVector::from_column_slice(z.as_slice());
    let restricted_oracle = s_max < matrix_rank(&am);
    let tol = RANGE_TOLERANCE * zv.norm().max(1.0);
    if zv.norm() == 0.0 {
        return Ok(OracleOutcome {
            outcome: outcome(&am, &zv, DVector::zeros(a.cols()), q, 0, true)?,
            support: vec![],
            ties: vec![SignalVector::zeros(a.cols())],
            restricted_oracle: false,
            supports_examined: 0,
        });
    }
    let supports: Vec<Vec<usize>> = (1..=s_max.min(a.rows())).flat_map(|k| Combinations::new(a.cols(), k)).collect();
    let examined = supports.len() as u128;
    let fits: Vec<(f64, Option<(f64, Vec<f64>)>)> = supports
        .par_iter()
        .map(|sup| {
            let sub = am.select_columns(sup);
            let u = min_norm_lstsq(&sub, &zv);
            let r = (&sub * &u - &zv).norm();
            if r > tol {
                return (r, None);
            }
            let mut x = vec![0.0; a.cols()];
            for (k, &i) in sup.iter().enumerate() {
                x[i] = u[k];
            }
            (r, Some((q_power_sum(&x, q), x)))
        })
        .collect();
    let best_residual = fits.iter().map(|f| f.0).fold(f64::INFINITY, f64::min);
    let feasible: Vec<(usize, f64, Vec<f64>)> = fits
        .into_iter()
        .enumerate()
        .filter_map(|(k, (_, fit))| fit.map(|(obj, x)| (k, obj, x)))
        .collect();
    let Some(min_obj) = feasible.iter().map(|f| f.1).reduce(f64::min) else {
        return Err(Error::Infeasible {
            reason: format!("no support of size <= {s_max} reproduces the measurements"),
            attainable: Some(best_residual),
        });
    };
    let mut ties: Vec<(usize, Vec<f64>)> = Vec::new();
    for (k, obj, x) in feasible {
        if obj > min_obj + TIE_TOLERANCE * min_obj.max(1.0) {
            continue;
        }
        let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        let duplicate = ties.iter().any(|(_, y)| {
            x.iter().zip(y).all(|(p, r)| (p - r).abs() <= TIE_TOLERANCE * scale)
        });
        if !duplicate {
            ties.push((k, x));
        }
    }
    let (first, x) = ties[0].clone();
    let support = SupportSet::new(supports[first].clone(), a.cols())?.indices().to_vec();
    Ok(OracleOutcome {
        outcome: outcome(&am, &zv, DVector::from_vec(x), q, 1, true)?,
        support,
        ties: ties.into_iter().map(|(_, x)| SignalVector::new(x)).collect::<Result<_>>()?,
        restricted_oracle,
        supports_examined: examined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nsp::{nsp_gamma, NspOptions};
    use rand::Rng;

    fn gaussian(m: usize, n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..m * n)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g / (m as f64).sqrt()
            })
            .collect();
        DenseMatrix::new(m, n, data).unwrap()
    }

    fn planted(n: usize, s: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for i in rand::seq::index::sample(rng, n, s) {
            let g: f64 = StandardNormal.sample(rng);
            x[i] = g + g.signum() * 0.1;
        }
        x
    }

    fn measure(a: &DenseMatrix, x: &[f64]) -> SignalVector {
        SignalVector::new(a.mul_vec(x).unwrap()).unwrap()
    }

    fn rel_err(x: &[f64], y: &[f64]) -> f64 {
        let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        num / den.max(f64::MIN_POSITIVE)
    }

    #[test]
    fn identity_returns_measurements() {
        let z = SignalVector::new(vec![0.3, -1.0, 0.0, 2.0]).unwrap();
        let out = irls_equality(&DenseMatrix::identity(4), &z, &SolverOptions::new(0.5).unwrap()).unwrap();
        for (a, b) in out.x_hat.as_slice().iter().zip(z.as_slice()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
        assert!(out.feasibility_residual < 1e-14);
    }

    #[test]
    fn rejects_measurements_outside_range() {
        let a = DenseMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let z = SignalVector::new(vec![1.0, 0.0]).unwrap();
        let err = irls_equality(&a, &z, &SolverOptions::new(0.5).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Infeasible { attainable: Some(r), .. } if (r - 0.5f64.sqrt()).abs() < 1e-12));
    }

    #[test]
    fn recovers_one_sparse_on_certified_fixture() {
        let a = DenseMatrix::from_rows(vec![vec![1.0, -2.0, 0.0], vec![1.0, 0.0, -2.0]]).unwrap();
        let report = nsp_gamma(&a, 1, 0.5, &NspOptions::default()).unwrap();
        assert!(report.certified && report.strict());
        for (i, v) in [(0, 1.5), (1, -0.7), (2, 3.0)] {
            let mut x = vec![0.0; 3];
            x[i] = v;
            let out = irls_equality(&a, &measure(&a, &x), &SolverOptions::new(0.5).unwrap()).unwrap();
            assert!(rel_err(out.x_hat.as_slice(), &x) < 1e-6, "{:?}", out.x_hat);
        }
    }

    #[test]
    fn smoothed_objective_descends() {
        let a = gaussian(6, 10, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for q in [0.3, 0.6, 1.0] {
            for _ in 0..5 {
                let x = planted(10, 2, &mut rng);
                let opts = SolverOptions { sparsity_hint: Some(2), ..SolverOptions::new(q).unwrap() };
                let (_, hist) = irls_equality_traced(&a, &measure(&a, &x), &opts).unwrap();
                for w in hist.windows(2) {
                    assert!(w[1] <= w[0] + 1e-12 * hist[0], "q {q}: {} > {}", w[1], w[0]);
                }
            }
        }
    }

    #[test]
    fn scaling_equivariance() {
        let a = gaussian(5, 9, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = planted(9, 2, &mut rng);
        let z = measure(&a, &x);
        let opts = SolverOptions::new(0.5).unwrap();
        let base = irls_equality(&a, &z, &opts).unwrap();
        for c in [0.01, 3.0, 250.0] {
            let cz = SignalVector::new(z.as_slice().iter().map(|v| c * v).collect()).unwrap();
            let out = irls_equality(&a.scaled(c), &cz, &opts).unwrap();
            assert!(rel_err(out.x_hat.as_slice(), base.x_hat.as_slice()) < 1e-9);
        }
    }

    #[test]
    fn oracle_dominates_irls() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..20 {
            let a = gaussian(4, 7, 100 + seed);
            let x: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z = measure(&a, &x);
            for q in [0.4, 0.8] {
                let oracle = brute_force_lq_min(&a, &z, q, 4).unwrap();
                assert!(!oracle.restricted_oracle);
                let irls = irls_equality(&a, &z, &SolverOptions::new(q).unwrap()).unwrap();
                assert!(irls.objective >= oracle.outcome.objective - 1e-8);
                assert!(irls.feasibility_residual <= 1e-8 * z.norm2().max(1.0));
            }
        }
    }

    #[test]
    fn oracle_examples() {
        let ones = DenseMatrix::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        let z = SignalVector::new(vec![1.0]).unwrap();
        let o = brute_force_lq_min(&ones, &z, 0.5, 1).unwrap();
        assert!(o.is_tied());
        assert_eq!(o.ties.len(), 2);
        assert_eq!(o.ties[0].as_slice(), &[1.0, 0.0]);
        assert_eq!(o.ties[1].as_slice(), &[0.0, 1.0]);

        let a = gaussian(6, 10, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = planted(10, 2, &mut rng);
        let o = brute_force_lq_min(&a, &measure(&a, &x), 0.7, 2).unwrap();
        assert!(o.restricted_oracle && !o.is_tied());
        assert!(rel_err(o.outcome.x_hat.as_slice(), &x) < 1e-10);

        let tall = DenseMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let bad = SignalVector::new(vec![0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(brute_force_lq_min(&tall, &bad, 0.5, 2), Err(Error::Infeasible { .. })));
        assert!(matches!(
            brute_force_lq_min_with_budget(&a, &measure(&a, &x), 0.5, 5, 10),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn irls_agrees_with_oracle_on_planted_sparse() {
        let a = gaussian(6, 10, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..10 {
            let x = planted(10, 1, &mut rng);
            let z = measure(&a, &x);
            let q = 0.3;
            let irls = irls_equality(&a, &z, &SolverOptions::new(q).unwrap()).unwrap();
            let oracle = brute_force_lq_min(&a, &z, q, 6).unwrap();
            assert!(rel_err(irls.x_hat.as_slice(), oracle.outcome.x_hat.as_slice()) < 1e-6);
        }
    }

    #[test]
    fn success_persists_as_q_halves() {
        let a = gaussian(6, 10, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let x = planted(10, 2, &mut rng);
            let z = measure(&a, &x);
            for q in [1.0, 0.8, 0.5] {
                let hit = |q: f64| {
                    let out = irls_equality(&a, &z, &SolverOptions::new(q).unwrap()).unwrap();
                    rel_err(out.x_hat.as_slice(), &x) < 1e-6
                };
                if hit(q) {
                    assert!(hit(q / 2.0), "q {q}");
                }
            }
        }
    }

    #[test]
    fn irls_never_worse_than_sparse_oracle() {
        let qs = [1.0, 0.5, 0.1];
        for seed in 0..30 {
            let a = gaussian(8, 12, 500 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..5 {
                let x = planted(12, 2, &mut rng);
                let z = measure(&a, &x);
                for &q in &qs {
                    let oracle = brute_force_lq_min(&a, &z, q, 2).unwrap();
                    let out = irls_equality(&a, &z, &SolverOptions::new(q).unwrap()).unwrap();
                    assert!(
                        out.objective <= oracle.outcome.objective * (1.0 + 1e-9),
                        "seed {seed} q {q}: {} > {}",
                        out.objective,
                        oracle.outcome.objective
                    );
                }
            }
        }
    }

    #[test]
    fn noisy_edge_cases() {
        let a = gaussian(5, 8, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = planted(8, 2, &mut rng);
        let y = measure(&a, &x);
        let opts = SolverOptions::new(0.5).unwrap();
        let zero = irls_noisy(&a, &y, y.norm2() * 1.01, &opts).unwrap();
        assert_eq!(zero.objective, 0.0);
        let eq = irls_equality(&a, &y, &opts).unwrap();
        let delegated = irls_noisy(&a, &y, 0.0, &opts).unwrap();
        assert!(rel_err(delegated.x_hat.as_slice(), eq.x_hat.as_slice()) < 1e-8);
        assert!(matches!(irls_noisy(&a, &y, -1.0, &opts), Err(Error::Domain(_))));

        let tall = DenseMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let off = SignalVector::new(vec![1.0, 1.0, 0.5]).unwrap();
        let err = irls_noisy(&tall, &off, 0.1, &opts).unwrap_err();
        assert!(matches!(err, Error::Infeasible { attainable: Some(r), .. } if (r - 0.5).abs() < 1e-12));
    }

    #[test]
    fn noisy_solutions_are_feasible() {
        let a = gaussian(6, 12, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let x = planted(12, 2, &mut rng);
            let mut y = a.mul_vec(&x).unwrap();
            let eps = 0.05 * y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let noise: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
            let nn = noise.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
            for (yi, ni) in y.iter_mut().zip(&noise) {
                *yi += 0.5 * eps * ni / nn;
            }
            let y = SignalVector::new(y).unwrap();
            let out = irls_noisy(&a, &y, eps, &SolverOptions::new(0.5).unwrap()).unwrap();
            assert!(out.feasibility_residual <= eps * (1.0 + 1e-6));
            assert!(out.objective <= q_power_sum(&x, 0.5) + 1e-9);
        }
    }
}
