use lqsense::matrix::binomial;
use lqsense::solver::{self, SolverOptions};
use lqsense::{Error, SignalVector};
use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{relative_error, trial_rng, Context, MatrixInfo, DEFAULT_Q_LIST};
use crate::failure::{Failure, Outcome};
use crate::output::{fmt_num, to_json, write_file};

/// Relative error counted as exact recovery.
pub const SUCCESS_TOLERANCE: f64 = 1e-6;
pub const CSV_HEADER: &str = "trial,q,irls_rel_error,irls_success,oracle_rel_error,oracle_success,oracle_tied";

#[derive(Debug, Clone)]
struct Row {
    q: f64,
    irls_rel_error: f64,
    /// Relative error and tie flag of the exhaustive oracle.
    oracle: Option<(f64, bool)>,
}

#[derive(Debug, Serialize)]
struct QSummary {
    q: f64,
    irls_success_rate: Option<f64>,
    oracle_success_rate: Option<f64>,
    oracle_ties: usize,
}

#[derive(Debug, Serialize)]
struct Summary {
    matrix: MatrixInfo,
    s: usize,
    trials: usize,
    /// Largest support size the exhaustive oracle enumerates; absent when out of budget.
    oracle_support_cap: Option<usize>,
    /// The cap is below the row count, so the oracle minimum may not be global.
    oracle_restricted: bool,
    per_q: Vec<QSummary>,
    /// Success rate never drops as q decreases.
    irls_monotone_in_q: bool,
}

/// `k / points` for `k = points, …, 1`.
pub fn q_grid(points: usize) -> Vec<f64> {
    (1..=points).rev().map(|k| k as f64 / points as f64).collect()
}

/// Planted `s`-sparse signal: uniform support, unit-normal values.
pub fn planted_signal(rng: &mut impl rand::Rng, n: usize, s: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    let mut support = index::sample(rng, n, s).into_vec();
    support.sort_unstable();
    for i in support {
        x[i] = StandardNormal.sample(rng);
    }
    x
}

fn rate(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

pub fn run(mut ctx: Context) -> Outcome<()> {
    let a = ctx.config.matrix()?;
    let cfg = &ctx.config;
    let (m, n, s) = (a.rows(), a.cols(), cfg.s);
    let q_list = match (cfg.q_list.is_empty(), ctx.grid) {
        (false, _) => cfg.q_list.clone(),
        (true, Some(0)) => return Err(Failure::config("grid must have at least one point")),
        (true, Some(points)) => q_grid(points),
        (true, None) => DEFAULT_Q_LIST.to_vec(),
    };
    let cap = (s..=m).rev().find(|&k| binomial(n, k) <= ctx.budget);

    let trials: Vec<Vec<Row>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Outcome<Vec<Row>> {
            let mut rng = trial_rng(cfg.seed, t);
            let x = planted_signal(&mut rng, n, s);
            let y = SignalVector::new(a.mul_vec(&x)?)?;
            let mut rows = Vec::with_capacity(q_list.len());
            for &q in &q_list {
                let opts = SolverOptions { seed: cfg.seed, sparsity_hint: Some(s), ..SolverOptions::new(q)? };
                let irls = solver::irls_equality(&a, &y, &opts)?;
                let irls_rel_error = relative_error(irls.x_hat.as_slice(), &x);
                let oracle = match cap {
                    Some(k) => match solver::brute_force_lq_min_with_budget(&a, &y, q, k, ctx.budget) {
                        Ok(o) => Some((relative_error(o.outcome.x_hat.as_slice(), &x), o.is_tied())),
                        Err(Error::Budget { .. }) => None,
                        Err(e) => return Err(e.into()),
                    },
                    None => None,
                };
                rows.push(Row { q, irls_rel_error, oracle });
            }
            Ok(rows)
        })
        .collect::<Outcome<_>>()?;

    let mut csv = format!("{CSV_HEADER}\n");
    for (t, rows) in trials.iter().enumerate() {
        for row in rows {
            let oracle = match row.oracle {
                Some((err, tied)) => format!("{},{},{}", fmt_num(err), err < SUCCESS_TOLERANCE, tied),
                None => ",,".into(),
            };
            csv.push_str(&format!(
                "{t},{},{},{},{oracle}\n",
                fmt_num(row.q),
                fmt_num(row.irls_rel_error),
                row.irls_rel_error < SUCCESS_TOLERANCE
            ));
        }
    }

    let per_q: Vec<QSummary> = q_list
        .iter()
        .enumerate()
        .map(|(k, &q)| {
            let rows = trials.iter().map(|r| &r[k]);
            let irls_hits = rows.clone().filter(|r| r.irls_rel_error < SUCCESS_TOLERANCE).count();
            let oracle_rows: Vec<_> = rows.filter_map(|r| r.oracle).collect();
            let oracle_hits = oracle_rows.iter().filter(|(e, _)| *e < SUCCESS_TOLERANCE).count();
            QSummary {
                q,
                irls_success_rate: rate(irls_hits, trials.len()),
                oracle_success_rate: rate(oracle_hits, oracle_rows.len()),
                oracle_ties: oracle_rows.iter().filter(|(_, tied)| *tied).count(),
            }
        })
        .collect();
    let mut by_q: Vec<_> = per_q.iter().filter_map(|p| p.irls_success_rate.map(|r| (p.q, r))).collect();
    by_q.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = by_q.windows(2).all(|w| w[0].1 >= w[1].1);

    let summary = Summary {
        matrix: MatrixInfo::new(&a, cfg),
        s,
        trials: cfg.trials,
        oracle_support_cap: cap,
        oracle_restricted: cap.is_some_and(|k| k < m),
        per_q,
        irls_monotone_in_q: monotone,
    };
    let text = to_json(&summary)?;
    write_file(&ctx.out_dir, "recover_trials.csv", &csv)?;
    write_file(&ctx.out_dir, "recover_summary.json", &text)?;
    print!("{text}");
    Ok(())
}
