use lqsense::bounds::{self, BoundsQuery, C0Variant, RecoveryConstants};
use lqsense::nsp::{self, NspOptions, NspReport};
use lqsense::rip::{self, RipReport, UniqueDetermination};
use lqsense::Error;
use serde::Serialize;

use super::{Context, MatrixInfo, DEFAULT_Q_LIST};
use crate::failure::Outcome;
use crate::output::{to_json, write_file};

/// Below this rescaled `δ_{2s}` every pair of columns is treated as orthonormal.
pub const ZERO_DELTA: f64 = 1e-12;
pub const DEFAULT_R_GRID: usize = 241;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// `δ_{2s}` exhaustively certified and `a(q, δ₁) < δ₁`.
    CertifiedRecoverable,
    /// Exact null space constant below one.
    NspRecoverable,
    Uncertified,
}

#[derive(Debug, Serialize)]
pub struct QVerdict {
    pub q: f64,
    pub a_value: Option<f64>,
    /// `a(q, δ₁)/δ₁`, the bound on the null space constant.
    pub nsp_constant_bound: Option<f64>,
    pub condition_holds: bool,
    pub nsp: NspReport,
    pub recovery_constants: Option<RecoveryConstants>,
    pub verdict: Verdict,
    pub recoverable: bool,
}

#[derive(Debug, Serialize)]
pub struct CertifyReport {
    pub matrix: MatrixInfo,
    pub s: usize,
    pub budget: u128,
    pub rip: RipReport,
    /// `δ_{2s}` of the rescaled matrix; absent when the lower frame bound vanishes.
    pub rescaled_delta2s: Option<f64>,
    pub delta1: Option<f64>,
    pub unique_determination: Option<UniqueDetermination>,
    pub warnings: Vec<String>,
    pub per_q: Vec<QVerdict>,
}

pub fn run(mut ctx: Context) -> Outcome<()> {
    let a = ctx.config.matrix()?;
    let cfg = &ctx.config;
    let s = cfg.s;
    let ropts = ctx.rip_options();
    let mut warnings = Vec::new();

    let rip = rip::rip_constant(&a, 2 * s, &ropts)?;
    if !rip.certified {
        warnings.push(format!(
            "C({}, {}) exceeds the budget {}: restricted isometry constants are sampled lower bounds",
            a.cols(),
            2 * s,
            ctx.budget
        ));
    }
    let rescaled = match rip::rescale_to_rip(&a, 2 * s, &ropts) {
        Ok((_, d)) => Some(d),
        Err(Error::NotUniquelyDetermined(msg)) => {
            warnings.push(format!("rescaling impossible: {msg}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let delta1 = rescaled.filter(|d| *d > 0.0).map(bounds::delta1).transpose()?;
    let unique = match rip::unique_determination(&a, s, &ropts) {
        Ok(u) => {
            if let Some(e) = &u.explanation {
                warnings.push(format!("unique determination fails: {e}"));
            }
            Some(u)
        }
        Err(Error::Budget { needed, budget }) => {
            warnings.push(format!("unique determination skipped: {needed} subsets exceed the budget {budget}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let certified_delta = rescaled.filter(|_| rip.certified);
    if certified_delta.is_some_and(|d| d <= ZERO_DELTA) {
        warnings.push(
            "rescaled delta_2s vanishes: all columns are orthonormal, so the kernel is trivial".into(),
        );
    }

    let q_list = if cfg.q_list.is_empty() { DEFAULT_Q_LIST.to_vec() } else { cfg.q_list.clone() };
    let nopts = NspOptions { seed: cfg.seed, rip: ropts, ..Default::default() };
    let r_grid = ctx.grid.unwrap_or(DEFAULT_R_GRID);
    let mut per_q = Vec::with_capacity(q_list.len());
    for &q in &q_list {
        let nsp = nsp::nsp_gamma(&a, s, q, &nopts)?;
        let (a_value, bound, holds, constants) = match (certified_delta, delta1) {
            (Some(d), Some(d1)) if d > ZERO_DELTA => {
                let av = bounds::a_value(BoundsQuery::new(q, d1)?).value;
                let rc = bounds::recovery_constants_with_grid(q, d, s, C0Variant::Squared, r_grid)?;
                (Some(av), Some(av / d1), av < d1, Some(rc))
            }
            (Some(_), _) => (None, None, true, None),
            _ => (None, None, false, None),
        };
        let verdict = if holds {
            Verdict::CertifiedRecoverable
        } else if nsp.certified && nsp.strict() {
            Verdict::NspRecoverable
        } else {
            Verdict::Uncertified
        };
        per_q.push(QVerdict {
            q,
            a_value,
            nsp_constant_bound: bound,
            condition_holds: holds,
            nsp,
            recovery_constants: constants,
            verdict,
            recoverable: verdict != Verdict::Uncertified,
        });
    }

    let report = CertifyReport {
        matrix: MatrixInfo::new(&a, cfg),
        s,
        budget: ctx.budget,
        rip,
        rescaled_delta2s: rescaled,
        delta1,
        unique_determination: unique,
        warnings,
        per_q,
    };
    let text = to_json(&report)?;
    write_file(&ctx.out_dir, "certify.json", &text)?;
    print!("{text}");
    Ok(())
}
