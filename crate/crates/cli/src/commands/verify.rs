use clap::{Args, ValueEnum};
use lqsense::bounds;
use lqsense::lemmas::{self, HarnessReport};
use serde::Serialize;

use super::Context;
use crate::failure::{Failure, Outcome};
use crate::output::{to_json, write_file};

pub const LEMMA21_INSTANCES: usize = 100;
pub const LEMMA21_GRID: usize = 64;
pub const LEMMA21_MAX_TERMS: usize = 4;
pub const LEMMA22_INSTANCES: usize = 100;
pub const LEMMA22_GRID: usize = 16;
pub const LEMMA22_MAX_TERMS: usize = 3;
pub const LEMMA23_INSTANCES: usize = 1000;

/// Published value of `1/(2x₀ − 1)`.
pub const X0_COMPANION: f64 = 3.5911;
pub const X0_TOLERANCE: f64 = 2e-3;
pub const ASYMPTOTIC_RELATIVE_TOLERANCE: f64 = 0.1;
pub const Q_FAIL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Suite {
    Lemma21,
    Lemma22,
    Lemma23,
    BoundsAsymptotics,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    /// Instance count for the randomized suites; defaults to 100, 100 and 1000.
    #[arg(long)]
    pub instances: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn check(name: &str, value: f64, target: f64, tolerance: f64, relative: bool) -> Check {
    let scale = if relative { target.abs() } else { 1.0 };
    Check {
        name: name.into(),
        value,
        target,
        tolerance,
        passed: (value - target).abs() <= tolerance * scale,
    }
}

/// Numeric anchors of the threshold asymptotics.
pub fn asymptotic_checks() -> Outcome<Vec<Check>> {
    let e = std::f64::consts::E;
    let mut checks = Vec::new();
    let x0 = bounds::x0_const();
    checks.push(check("x0_companion", x0.companion, X0_COMPANION, X0_TOLERANCE, false));

    let d1s = [0.05, 0.02, 0.01];
    let mut gaps = Vec::new();
    let mut last = 0.0;
    for d1 in d1s {
        last = bounds::q_tilde_max(d1)?.q / (d1 * d1);
        gaps.push((last - e / 2.0).abs());
    }
    checks.push(check("q_tilde_over_delta1_squared_at_0.01", last, e / 2.0, ASYMPTOTIC_RELATIVE_TOLERANCE, true));
    checks.push(Check {
        name: "q_tilde_ratio_gap_shrinks_over_0.05_0.02_0.01".into(),
        value: gaps[2],
        target: 0.0,
        tolerance: gaps[1],
        passed: gaps[0] >= gaps[1] && gaps[1] >= gaps[2],
    });

    let delta = 0.999;
    let ratio = bounds::q_succ(delta)?.q / (1.0 - delta);
    checks.push(check("q_succ_over_one_minus_delta_at_0.999", ratio, e / 4.0, ASYMPTOTIC_RELATIVE_TOLERANCE, true));

    let qf = bounds::q_fail(std::f64::consts::FRAC_1_SQRT_2)?;
    checks.push(check("q_fail_at_inverse_sqrt2", qf.q, 1.0, Q_FAIL_TOLERANCE, false));
    Ok(checks)
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum Detail {
    Harness(HarnessReport),
    Checks(Vec<Check>),
}

#[derive(Debug, Serialize)]
struct SuiteResult {
    suite: Suite,
    passed: bool,
    detail: Detail,
}

#[derive(Debug, Serialize)]
struct Report {
    seed: u64,
    passed: bool,
    suites: Vec<SuiteResult>,
}

fn run_suite(suite: Suite, ctx: &Context, args: &VerifyArgs) -> Outcome<SuiteResult> {
    let seed = ctx.config.seed;
    let count = |default: usize| args.instances.unwrap_or(default);
    let harness = |r: HarnessReport| SuiteResult { suite, passed: r.ok(), detail: Detail::Harness(r) };
    Ok(match suite {
        Suite::Lemma21 => harness(lemmas::run_lemma21_suite(
            count(LEMMA21_INSTANCES),
            ctx.grid.unwrap_or(LEMMA21_GRID),
            LEMMA21_MAX_TERMS,
            seed,
        )?),
        Suite::Lemma22 => harness(lemmas::run_lemma22_suite(
            count(LEMMA22_INSTANCES),
            ctx.grid.unwrap_or(LEMMA22_GRID),
            LEMMA22_MAX_TERMS,
            seed,
        )?),
        Suite::Lemma23 => harness(lemmas::run_lemma23_suite(count(LEMMA23_INSTANCES), seed)?),
        Suite::BoundsAsymptotics => {
            let checks = asymptotic_checks()?;
            SuiteResult { suite, passed: checks.iter().all(|c| c.passed), detail: Detail::Checks(checks) }
        }
        Suite::All => unreachable!("expanded by the caller"),
    })
}

pub fn run(ctx: &Context, args: &VerifyArgs) -> Outcome<()> {
    let suites = match args.suite {
        Suite::All => vec![Suite::Lemma21, Suite::Lemma22, Suite::Lemma23, Suite::BoundsAsymptotics],
        one => vec![one],
    };
    let results = suites.into_iter().map(|s| run_suite(s, ctx, args)).collect::<Outcome<Vec<_>>>()?;
    let passed = results.iter().all(|r| r.passed);
    let report = Report { seed: ctx.config.seed, passed, suites: results };
    let text = to_json(&report)?;
    write_file(&ctx.out_dir, "verify_report.json", &text)?;
    print!("{text}");
    if passed {
        Ok(())
    } else {
        let failed: Vec<_> = report
            .suites
            .iter()
            .filter(|r| !r.passed)
            .map(|r| format!("{:?}", r.suite).to_lowercase())
            .collect();
        Err(Failure::violation(format!("failing suites: {}", failed.join(", "))))
    }
}
