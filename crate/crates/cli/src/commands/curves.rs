use clap::Args;
use lqsense::bounds::threshold_curve;
use serde::Serialize;

use super::Context;
use crate::failure::{Failure, Outcome};
use crate::output::{curve_svg, fmt_num, to_json, write_file};

pub const DEFAULT_POINTS: usize = 99;
/// Slack for the ordering assertions; the thresholds are bisected to about `1e-12`.
pub const ORDER_TOLERANCE: f64 = 1e-10;
pub const CSV_HEADER: &str = "delta,q_succ,q_fail";

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Explicit comma-separated delta values; replaces the `--grid` points.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    /// Also write curves.svg.
    #[arg(long)]
    pub svg: bool,
}

/// `points` evenly spaced values `k / (points + 1)`.
pub fn delta_grid(points: usize) -> Vec<f64> {
    (1..=points).map(|k| k as f64 / (points + 1) as f64).collect()
}

#[derive(Serialize)]
struct Summary {
    rows: usize,
    files: Vec<&'static str>,
}

pub fn run(ctx: &Context, args: &CurvesArgs) -> Outcome<()> {
    let deltas = match &args.deltas {
        Some(d) => d.clone(),
        None => {
            let points = ctx.grid.unwrap_or(DEFAULT_POINTS);
            if points == 0 {
                return Err(Failure::config("grid must have at least one point"));
            }
            delta_grid(points)
        }
    };
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
        return Err(Failure::config(format!("delta = {d} outside (0, 1)")));
    }
    let points = threshold_curve(&deltas)?;

    for p in &points {
        if p.q_succ > p.q_fail + ORDER_TOLERANCE {
            return Err(Failure::violation(format!(
                "q_succ = {} exceeds q_fail = {} at delta = {}",
                fmt_num(p.q_succ),
                fmt_num(p.q_fail),
                fmt_num(p.delta)
            )));
        }
    }
    let mut sorted = points.clone();
    sorted.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    for w in sorted.windows(2) {
        if w[1].q_succ > w[0].q_succ + ORDER_TOLERANCE {
            return Err(Failure::violation(format!(
                "q_succ increases from {} at delta = {} to {} at delta = {}",
                fmt_num(w[0].q_succ),
                fmt_num(w[0].delta),
                fmt_num(w[1].q_succ),
                fmt_num(w[1].delta)
            )));
        }
    }

    let mut csv = format!("{CSV_HEADER}\n");
    for p in &points {
        csv.push_str(&format!("{},{},{}\n", fmt_num(p.delta), fmt_num(p.q_succ), fmt_num(p.q_fail)));
    }
    write_file(&ctx.out_dir, "curves.csv", &csv)?;
    let mut files = vec!["curves.csv"];
    if args.svg {
        let succ: Vec<_> = sorted.iter().map(|p| (p.delta, p.q_succ)).collect();
        let fail: Vec<_> = sorted.iter().map(|p| (p.delta, p.q_fail)).collect();
        write_file(&ctx.out_dir, "curves.svg", &curve_svg(&succ, &fail, "delta", "q"))?;
        files.push("curves.svg");
    }
    print!("{}", to_json(&Summary { rows: points.len(), files })?);
    Ok(())
}
