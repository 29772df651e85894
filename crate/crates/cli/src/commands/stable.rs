use lqsense::bounds::{self, BoundTerms, C0Variant, RecoveryConstants};
use lqsense::rip;
use lqsense::solver::{self, SolverOptions};
use lqsense::vector::{best_s_term, quasi_norm};
use lqsense::{DenseMatrix, Error, SignalVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::certify::DEFAULT_R_GRID;
use super::recover::planted_signal;
use super::{trial_rng, Context, MatrixInfo};
use crate::config::SignalModel;
use crate::failure::{Failure, Outcome};
use crate::output::{fmt_num, to_json, write_file};

/// Error tolerated when both bound terms vanish.
pub const EXACT_TOLERANCE: f64 = 1e-6;
/// Exponent used when no q list is given, as a fraction of `q_succ(δ_{2s})`.
pub const DEFAULT_Q_FRACTION: f64 = 0.5;
pub const CSV_HEADER: &str = "trial,q,sigma,l2_error,l2_bound,lq_error,lq_bound";

/// `x` with magnitudes `k^{−exponent}` placed on a random permutation, with random signs.
pub fn compressible_signal(rng: &mut impl Rng, n: usize, exponent: f64) -> Vec<f64> {
    let order = index::sample(rng, n, n).into_vec();
    let mut x = vec![0.0; n];
    for (k, &i) in order.iter().enumerate() {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        x[i] = sign * ((k + 1) as f64).powf(-exponent);
    }
    x
}

/// Noise of norm `ε u` with `u ~ U(0, 1]` in a uniformly random direction.
pub fn noise(rng: &mut impl Rng, m: usize, epsilon: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..m)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z
        })
        .collect();
    let u = 1.0 - rng.random::<f64>();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    dir.iter().map(|v| epsilon * u * v / norm).collect()
}

fn ratio(lhs: f64, rhs: f64, scale: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs <= EXACT_TOLERANCE * scale.max(1.0) {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Serialize)]
struct TrialResult {
    trial: usize,
    q: f64,
    sigma: f64,
    l2_error: f64,
    l2_bound: BoundTerms,
    lq_error: f64,
    lq_bound: BoundTerms,
    l2_ratio: f64,
    lq_ratio: f64,
    /// `‖x*‖_q^q` of the solver output.
    objective: f64,
    /// `‖x‖_q^q` of the planted signal, itself feasible.
    planted_objective: f64,
}

impl TrialResult {
    fn violated(&self) -> bool {
        !(self.l2_ratio <= 1.0 && self.lq_ratio <= 1.0)
    }
}

struct Instance {
    x: Vec<f64>,
    z: Vec<f64>,
    y: SignalVector,
    x_hat: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct QSummary {
    q: f64,
    constants: RecoveryConstants,
    worst_l2_ratio: Option<f64>,
    worst_l2_trial: Option<usize>,
    worst_lq_ratio: Option<f64>,
    worst_lq_trial: Option<usize>,
    /// Trials where the solver objective exceeded that of the planted signal.
    solver_above_planted: usize,
}

#[derive(Debug, Serialize)]
struct Summary {
    matrix: MatrixInfo,
    s: usize,
    trials: usize,
    noise_epsilon: f64,
    signal: SignalModel,
    exponent: f64,
    delta2s: f64,
    q_succ: f64,
    per_q: Vec<QSummary>,
    warnings: Vec<String>,
    all_hold: bool,
}

fn run_trial(
    b: &DenseMatrix,
    t: usize,
    ctx: &Context,
    constants: &[RecoveryConstants],
) -> Outcome<Vec<(TrialResult, Instance)>> {
    let cfg = &ctx.config;
    let (m, n, s, eps) = (b.rows(), b.cols(), cfg.s, cfg.noise_epsilon);
    let mut rng = trial_rng(cfg.seed, t);
    let x = match cfg.signal {
        SignalModel::Compressible => compressible_signal(&mut rng, n, cfg.exponent),
        SignalModel::Sparse => planted_signal(&mut rng, n, s),
    };
    let z = noise(&mut rng, m, eps);
    let bx = b.mul_vec(&x)?;
    let y = SignalVector::new(bx.iter().zip(&z).map(|(u, v)| u + v).collect())?;
    let xv = SignalVector::new(x.clone())?;
    let x_norm = xv.norm2();
    let mut out = Vec::with_capacity(constants.len());
    for rc in constants {
        let q = rc.q;
        let opts = SolverOptions { seed: cfg.seed, sparsity_hint: Some(s), ..SolverOptions::new(q)? };
        let sol = solver::irls_noisy(b, &y, eps, &opts)?;
        let h = sol.x_hat.sub(&xv)?;
        let sigma = xv.sub(&best_s_term(&xv, s, q)?)?.quasi_norm(q)?;
        let l2_error = h.norm2();
        let lq_error = quasi_norm(h.as_slice(), q)?;
        let l2_bound = rc.l2_bound(sigma, eps);
        let lq_bound = rc.lq_bound(sigma, eps);
        let result = TrialResult {
            trial: t,
            q,
            sigma,
            l2_error,
            l2_bound,
            lq_error,
            lq_bound,
            l2_ratio: ratio(l2_error, l2_bound.total(), x_norm),
            lq_ratio: ratio(lq_error, lq_bound.total(), x_norm),
            objective: sol.objective,
            planted_objective: xv.q_power_sum(q),
        };
        let x_hat = sol.x_hat.into_inner();
        out.push((result, Instance { x: x.clone(), z: z.clone(), y: y.clone(), x_hat }));
    }
    Ok(out)
}

fn worst(results: &[&TrialResult], key: impl Fn(&TrialResult) -> f64) -> (Option<f64>, Option<usize>) {
    let mut best: Option<(f64, usize)> = None;
    for r in results {
        let v = key(r);
        if best.is_none_or(|(w, _)| v > w) {
            best = Some((v, r.trial));
        }
    }
    (best.map(|b| b.0), best.map(|b| b.1))
}

pub fn run(mut ctx: Context) -> Outcome<()> {
    let a = ctx.config.matrix()?;
    let cfg = ctx.config.clone();
    let s = cfg.s;
    let ropts = ctx.rip_options();
    let report = rip::rip_constant(&a, 2 * s, &ropts)?;
    if !report.certified {
        return Err(Failure::budget(format!(
            "delta_{} cannot be certified: C({}, {}) exceeds the budget {}",
            2 * s,
            a.cols(),
            2 * s,
            ctx.budget
        )));
    }
    let (b, delta) = rip::rescale_to_rip(&a, 2 * s, &ropts)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Failure::budget(format!(
            "rescaled delta_{} = {} outside (0, 1)",
            2 * s,
            fmt_num(delta)
        )));
    }
    let q_succ = bounds::q_succ(delta)?.q;
    let q_list = if cfg.q_list.is_empty() { vec![DEFAULT_Q_FRACTION * q_succ] } else { cfg.q_list.clone() };
    let r_grid = ctx.grid.unwrap_or(DEFAULT_R_GRID);
    let constants = q_list
        .iter()
        .map(|&q| {
            let rc = bounds::recovery_constants_with_grid(q, delta, s, C0Variant::Squared, r_grid)?;
            if rc.feasible {
                Ok(rc)
            } else {
                Err(Failure::budget(format!(
                    "no feasible recovery constants at q = {}: a(q, delta1) >= delta1 for delta_{} = {}",
                    fmt_num(q),
                    2 * s,
                    fmt_num(delta)
                )))
            }
        })
        .collect::<Outcome<Vec<_>>>()?;
    let mut warnings = Vec::new();
    for rc in &constants {
        if ![rc.c0, rc.c1, rc.c2, rc.c3].iter().all(|c| c.is_finite()) {
            warnings.push(format!(
                "constants overflow at q = {}: the affected bounds are infinite",
                fmt_num(rc.q)
            ));
        }
    }

    let trials: Vec<Vec<(TrialResult, Instance)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(&b, t, &ctx, &constants))
        .collect::<Outcome<_>>()?;

    let mut csv = format!("{CSV_HEADER}\n");
    for (r, _) in trials.iter().flatten() {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.trial,
            fmt_num(r.q),
            fmt_num(r.sigma),
            fmt_num(r.l2_error),
            fmt_num(r.l2_bound.total()),
            fmt_num(r.lq_error),
            fmt_num(r.lq_bound.total())
        ));
    }
    let per_q: Vec<QSummary> = constants
        .iter()
        .enumerate()
        .map(|(k, rc)| {
            let rows: Vec<&TrialResult> = trials.iter().map(|t| &t[k].0).collect();
            let (worst_l2_ratio, worst_l2_trial) = worst(&rows, |r| r.l2_ratio);
            let (worst_lq_ratio, worst_lq_trial) = worst(&rows, |r| r.lq_ratio);
            QSummary {
                q: rc.q,
                constants: rc.clone(),
                worst_l2_ratio,
                worst_l2_trial,
                worst_lq_ratio,
                worst_lq_trial,
                solver_above_planted: rows.iter().filter(|r| r.objective > r.planted_objective).count(),
            }
        })
        .collect();
    let failures: Vec<_> = trials.iter().flatten().filter(|(r, _)| r.violated()).collect();
    let summary = Summary {
        matrix: MatrixInfo::new(&a, &cfg),
        s,
        trials: cfg.trials,
        noise_epsilon: cfg.noise_epsilon,
        signal: cfg.signal,
        exponent: cfg.exponent,
        delta2s: delta,
        q_succ,
        per_q,
        warnings,
        all_hold: failures.is_empty(),
    };
    let text = to_json(&summary)?;
    write_file(&ctx.out_dir, "stable_trials.csv", &csv)?;
    write_file(&ctx.out_dir, "stable_summary.json", &text)?;
    print!("{text}");
    if failures.is_empty() {
        return Ok(());
    }

    let dump: Vec<_> = failures
        .iter()
        .map(|(r, inst)| {
            // An exact solution of By = y is feasible for the noisy problem, so a smaller
            // oracle objective exposes a solver that stopped short of the minimum.
            let oracle = match solver::brute_force_lq_min_with_budget(&b, &inst.y, r.q, b.rows(), ctx.budget) {
                Ok(o) => json!({ "oracle_objective": o.outcome.objective, "solver_objective": r.objective }),
                Err(Error::Budget { .. }) => json!(null),
                Err(e) => json!({ "error": e.to_string() }),
            };
            json!({
                "result": r,
                "x": inst.x,
                "z": inst.z,
                "y": inst.y,
                "x_hat": inst.x_hat,
                "oracle_triage": oracle,
            })
        })
        .collect();
    let dump = json!({ "matrix": b, "delta2s": delta, "failures": dump });
    write_file(&ctx.out_dir, "stable_failures.json", &to_json(&dump)?)?;
    Err(Failure::violation(format!(
        "{} trial(s) violate a stable-recovery inequality; see stable_failures.json",
        failures.len()
    )))
}
