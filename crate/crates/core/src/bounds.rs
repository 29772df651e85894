//! The bound function `a(q, δ)` and the scalar thresholds derived from it.
//!
//! For `0 < q ≤ 1` and `0 < δ < 1`,
//!
//! ```text
//! a(q, δ) = inf_{0<r0<1} max{ T1, T2, T3, T4 }
//! T1 = (1 + r0 δ) / (1 + r0^q δ^q)^{1/q}
//! T2 = sup_{L ≤ y ≤ 1} 2y / (1 + 2^{-q/2} y^{2+q})^{1/q}
//! T3 = sup_{L ≤ y ≤ 1} 3y / (1 + y)^{1/q}
//! T4 = sup_{y ≥ 1}     2y / (1 + y)^{1/q}
//! ```
//!
//! with `L = √2 (1 − r0) δ / 2`. Every inner supremum is unimodal in `y`, so
//! it is evaluated at the stationary point clamped to its interval:
//! `y* = (q 2^{q/2−1})^{1/(2+q)}` for `T2` and `y* = q / (1 − q)` for `T3`
//! and `T4`. At `q = 1` the `T4` supremum is the unattained limit 2, and `T3`
//! is increasing so its supremum sits at `y = 1`.
//!
//! `T1` decreases in `r0` while `T2` and `T3` can only grow with it (their
//! interval widens), so the outer infimum is found by a coarse scan followed
//! by golden-section refinement. Terms are evaluated in log space because
//! `(1 + ·)^{1/q}` overflows quickly for small `q`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{self, bisect, bisect_predicate, golden_section_min, Root};

const R0_SCAN_POINTS: usize = 256;
const R0_MIN: f64 = 1e-12;
const R0_MAX: f64 = 1.0 - 1e-12;

/// Default number of log-spaced points for the `q̃_max` scan.
pub const Q_GRID_POINTS: usize = 512;
/// Smallest `q` examined by the `q̃_max` scan.
pub const Q_GRID_FLOOR: f64 = 1e-8;
const Q_FAIL_SCAN_POINTS: usize = 1024;
const R_GRID_POINTS: usize = 241;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsQuery {
    pub q: f64,
    pub delta: f64,
}

impl BoundsQuery {
    pub fn new(q: f64, delta: f64) -> Result<Self> {
        check_q(q)?;
        check_open_unit("delta", delta)?;
        Ok(BoundsQuery { q, delta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActiveTerm {
    T1,
    T2,
    T3,
    T4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AValueResult {
    pub value: f64,
    pub r0_star: f64,
    pub active_term: ActiveTerm,
    /// The four terms at `r0_star`.
    pub terms: [f64; 4],
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("q must lie in (0, 1], got {q}")))
    }
}

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// `δ₁ = √((1 − δ_{2s}) / (1 + δ_{2s}))`.
pub fn delta1(delta2s: f64) -> Result<f64> {
    check_open_unit("delta2s", delta2s)?;
    Ok(((1.0 - delta2s) / (1.0 + delta2s)).sqrt())
}

/// Lower end `√2 (1 − r0) δ / 2` of the `T2`/`T3` interval.
pub fn interval_floor(delta: f64, r0: f64) -> f64 {
    std::f64::consts::SQRT_2 * (1.0 - r0) * delta / 2.0
}

fn t2_integrand(q: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let c = 2f64.powf(-q / 2.0);
    (std::f64::consts::LN_2 + y.ln() - (c * y.powf(2.0 + q)).ln_1p() / q).exp()
}

fn t34_integrand(q: f64, y: f64, scale: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    (scale.ln() + y.ln() - y.ln_1p() / q).exp()
}

/// Stationary point of `2y (1 + 2^{-q/2} y^{2+q})^{-1/q}`.
pub fn t2_critical_point(q: f64) -> f64 {
    (q * 2f64.powf(q / 2.0 - 1.0)).powf(1.0 / (2.0 + q))
}

pub fn t1(q: f64, delta: f64, r0: f64) -> f64 {
    let t = r0 * delta;
    (t.ln_1p() - t.powf(q).ln_1p() / q).exp()
}

pub fn t2(q: f64, delta: f64, r0: f64) -> f64 {
    let y = t2_critical_point(q).clamp(interval_floor(delta, r0), 1.0);
    t2_integrand(q, y)
}

pub fn t3(q: f64, delta: f64, r0: f64) -> f64 {
    let lo = interval_floor(delta, r0);
    let y = if q < 1.0 { (q / (1.0 - q)).clamp(lo, 1.0) } else { 1.0 };
    t34_integrand(q, y, 3.0)
}

pub fn t4(q: f64) -> f64 {
    if q >= 1.0 {
        return 2.0;
    }
    let y = (q / (1.0 - q)).max(1.0);
    t34_integrand(q, y, 2.0)
}

/// `[T1, T2, T3, T4]` at a given `r0`.
pub fn a_terms(q: f64, delta: f64, r0: f64) -> [f64; 4] {
    [t1(q, delta, r0), t2(q, delta, r0), t3(q, delta, r0), t4(q)]
}

fn max_term(terms: &[f64; 4]) -> (f64, ActiveTerm) {
    let kinds = [ActiveTerm::T1, ActiveTerm::T2, ActiveTerm::T3, ActiveTerm::T4];
    let mut best = (terms[0], kinds[0]);
    for (v, k) in terms.iter().zip(kinds).skip(1) {
        if *v > best.0 {
            best = (*v, k);
        }
    }
    best
}

/// Evaluates `a(q, δ)`.
pub fn a_value(query: BoundsQuery) -> AValueResult {
    let BoundsQuery { q, delta } = query;
    let objective = |r0: f64| max_term(&a_terms(q, delta, r0)).0;

    let node = |i: usize| -> f64 {
        match i {
            0 => R0_MIN,
            i if i > R0_SCAN_POINTS => R0_MAX,
            i => i as f64 / (R0_SCAN_POINTS + 1) as f64,
        }
    };
    let mut best_i = 1;
    let mut best_v = f64::INFINITY;
    for i in 0..=R0_SCAN_POINTS + 1 {
        let v = objective(node(i));
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let lo = node(best_i.saturating_sub(1));
    let hi = node((best_i + 1).min(R0_SCAN_POINTS + 1));
    let (mut r0, mut value) = golden_section_min(objective, lo, hi, roots::ABS_TOLERANCE);
    if best_v < value {
        r0 = node(best_i);
        value = best_v;
    }
    let terms = a_terms(q, delta, r0);
    let (value_at, active_term) = max_term(&terms);
    debug_assert_eq!(value, value_at);
    AValueResult { value: value_at, r0_star: r0, active_term, terms }
}

/// Grid evaluation of `a(q, δ)` together with a discretization padding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridEstimate {
    pub value: f64,
    /// Largest change of the sampled functions between neighbouring nodes,
    /// summed over the inner (`y`) and outer (`r0`) axes.
    pub padding: f64,
}

/// Brute-force grid oracle for `a(q, δ)` that never uses the stationary points.
///
/// `y` runs over a uniform grid of `[0, 1]` (plus the moving endpoint `L`),
/// and `T4` is sampled through `y = 1/u`, `u ∈ [0, 1]`, so the unbounded
/// half-line becomes a compact grid whose `u = 0` node carries the limit.
pub fn a_value_grid(query: BoundsQuery, grid_size: usize) -> Result<GridEstimate> {
    if grid_size < 100 {
        return Err(Error::Domain(format!("grid size must be >= 100, got {grid_size}")));
    }
    let BoundsQuery { q, delta } = query;
    let n = grid_size;
    let ys: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
    let g2: Vec<f64> = ys.iter().map(|&y| t2_integrand(q, y)).collect();
    let g3: Vec<f64> = ys.iter().map(|&y| t34_integrand(q, y, 3.0)).collect();
    let g4: Vec<f64> = ys
        .iter()
        .map(|&u| {
            if u == 0.0 {
                if q >= 1.0 { 2.0 } else { 0.0 }
            } else {
                // 2y/(1+y)^{1/q} with y = 1/u
                (2f64.ln() + (1.0 / q - 1.0) * u.ln() - (1.0 + u).ln() / q).exp()
            }
        })
        .collect();
    let suffix_max = |g: &[f64]| -> Vec<f64> {
        let mut out = g.to_vec();
        for j in (0..out.len() - 1).rev() {
            out[j] = out[j].max(out[j + 1]);
        }
        out
    };
    let s2 = suffix_max(&g2);
    let s3 = suffix_max(&g3);
    let t4_grid = g4.iter().cloned().fold(0.0_f64, f64::max);
    let step_change = |g: &[f64]| g.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let y_padding = step_change(&g2).max(step_change(&g3)).max(step_change(&g4));

    let mut outer = Vec::with_capacity(n - 1);
    for i in 1..n {
        let r0 = i as f64 / n as f64;
        let lo = interval_floor(delta, r0);
        let first = ((lo * n as f64).ceil() as usize).min(n);
        let t2v = t2_integrand(q, lo).max(s2[first]);
        let t3v = t34_integrand(q, lo, 3.0).max(s3[first]);
        outer.push(t1(q, delta, r0).max(t2v).max(t3v).max(t4_grid));
    }
    let value = outer.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_padding = step_change(&outer);
    Ok(GridEstimate { value, padding: y_padding + r_padding })
}

/// Result of the `q̃_max` search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTildeMax {
    pub q: f64,
    /// False when some grid point below the returned `q` fails `a(q, δ₁) < δ₁`.
    pub interval: bool,
    pub diagnostic: Option<String>,
}

/// `q̃_max(δ₁) = sup{q ∈ (0, 1] : a(q, δ₁) < δ₁}` on the default grid.
pub fn q_tilde_max(delta1: f64) -> Result<QTildeMax> {
    q_tilde_max_with_grid(delta1, Q_GRID_POINTS)
}

pub fn log_q_grid(points: usize) -> Vec<f64> {
    let lf = Q_GRID_FLOOR.ln();
    (0..points)
        .map(|i| {
            if i + 1 == points {
                1.0
            } else {
                (lf * (1.0 - i as f64 / (points - 1) as f64)).exp()
            }
        })
        .collect()
}

pub fn q_tilde_max_with_grid(delta1: f64, points: usize) -> Result<QTildeMax> {
    check_open_unit("delta1", delta1)?;
    if points < 2 {
        return Err(Error::Domain("q grid needs at least two points".into()));
    }
    let satisfies = |q: f64| a_value(BoundsQuery { q, delta: delta1 }).value < delta1;
    let grid = log_q_grid(points);
    let ok: Vec<bool> = grid.iter().map(|&q| satisfies(q)).collect();
    let Some(k) = ok.iter().rposition(|&b| b) else {
        return Ok(QTildeMax {
            q: 0.0,
            interval: true,
            diagnostic: Some(format!(
                "a(q, {delta1}) >= {delta1} at every grid point down to q = {Q_GRID_FLOOR}"
            )),
        });
    };
    let interval = ok[..k].iter().all(|&b| b);
    let diagnostic = (!interval).then(|| {
        let holes = ok[..k].iter().filter(|b| !**b).count();
        format!("satisfying set is not an interval: {holes} failing grid points below the supremum")
    });
    if k + 1 == points {
        return Ok(QTildeMax { q: 1.0, interval, diagnostic });
    }
    let q = bisect_predicate(satisfies, grid[k], grid[k + 1], roots::ABS_TOLERANCE);
    Ok(QTildeMax { q, interval, diagnostic })
}

/// `q_succ(δ) = q̃_max(√((1 − δ)/(1 + δ)))`.
pub fn q_succ(delta: f64) -> Result<QTildeMax> {
    q_tilde_max(delta1(delta)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFail {
    pub q: f64,
    pub root_found: bool,
    /// More than one sign change was seen; the smallest root is returned.
    pub ambiguous: bool,
    pub residual: f64,
}

/// Residual of `((2−q)δ/(1+δ))^{2/q} + 1 = (2 − 2δ + 2qδ)/(q + qδ)`.
pub fn q_fail_equation(q: f64, delta: f64) -> f64 {
    let base = (2.0 - q) * delta / (1.0 + delta);
    base.powf(2.0 / q) + 1.0 - (2.0 - 2.0 * delta + 2.0 * q * delta) / (q + q * delta)
}

/// Failure threshold: the root of [`q_fail_equation`] in `(0, 1]`, or 1 when none exists.
pub fn q_fail(delta: f64) -> Result<QFail> {
    check_open_unit("delta", delta)?;
    let g = |q: f64| q_fail_equation(q, delta);
    let nodes: Vec<f64> = (1..=Q_FAIL_SCAN_POINTS)
        .map(|k| k as f64 / Q_FAIL_SCAN_POINTS as f64)
        .collect();
    let values: Vec<f64> = nodes.iter().map(|&q| g(q)).collect();

    let mut roots: Vec<Root> = Vec::new();
    for k in 0..nodes.len() {
        if values[k].abs() <= 1e-12 {
            roots.push(Root { x: nodes[k], residual: values[k].abs(), iterations: 0 });
            continue;
        }
        if k + 1 < nodes.len()
            && values[k + 1].abs() > 1e-12
            && values[k].signum() != values[k + 1].signum()
        {
            roots.push(bisect(g, nodes[k], nodes[k + 1], roots::ABS_TOLERANCE)?);
        }
    }
    Ok(match roots.first() {
        None => QFail { q: 1.0, root_found: false, ambiguous: false, residual: 0.0 },
        Some(r) => QFail {
            q: r.x,
            root_found: true,
            ambiguous: roots.len() > 1,
            residual: r.residual,
        },
    })
}

/// `η_q`: the root in `(0, 1)` of `η^{2/q} + 1 = 2(1 − η)/q`.
pub fn eta_q(q: f64) -> Result<Root> {
    check_q(q)?;
    bisect(
        |eta| eta.powf(2.0 / q) + 1.0 - 2.0 * (1.0 - eta) / q,
        0.0,
        1.0,
        1e-15,
    )
}

/// `q (2 − q − η_q) / (2 − q − 2η_q)`, whose `q → 0` limit is `1/(2x₀ − 1)`.
pub fn eta_limit_ratio(q: f64) -> Result<f64> {
    let eta = eta_q(q)?.x;
    Ok(q * (2.0 - q - eta) / (2.0 - q - 2.0 * eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct X0Const {
    pub x0: f64,
    /// `1 / (2x₀ − 1)`.
    pub companion: f64,
    pub residual: f64,
}

/// `x₀`: the positive root of `e^{−2x} = 2x − 1`.
pub fn x0_const() -> X0Const {
    let root = bisect(|x| (-2.0 * x).exp() - (2.0 * x - 1.0), 0.5, 1.5, 1e-15)
        .expect("sign change on [0.5, 1.5] holds analytically");
    X0Const { x0: root.x, companion: 1.0 / (2.0 * root.x - 1.0), residual: root.residual }
}

/// Upper bound `a(q, δ₁)/δ₁` on the null space constant.
pub fn nsp_constant_bound(q: f64, delta2s: f64) -> Result<f64> {
    let d1 = delta1(delta2s)?;
    Ok(a_value(BoundsQuery::new(q, d1)?).value / d1)
}

/// Which power of `a(q, δ₁/(1+r))` enters `C₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C0Variant {
    /// Squared, as the closed form is usually quoted.
    #[default]
    Squared,
    /// First power, for comparison.
    FirstPower,
}

/// Constants of the stable-recovery error bounds
/// `‖x* − x‖₂ ≤ C₀ s^{1/2−1/q} σ + C₁ ε` and `‖x* − x‖_q ≤ C₂ σ + C₃ s^{1/q−1/2} ε`,
/// where `σ = ‖x − x_s‖_q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConstants {
    pub r: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
    pub q: f64,
    pub delta2s: f64,
    pub s: usize,
    pub feasible: bool,
    pub c0_variant: C0Variant,
    /// Selected `r` is the first or last node of the search grid.
    pub r_at_boundary: bool,
}

/// Split of a bound into its approximation and noise contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    pub sparse_term: f64,
    pub noise_term: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.sparse_term + self.noise_term
    }
}

impl RecoveryConstants {
    fn infeasible(q: f64, delta2s: f64, s: usize, c0_variant: C0Variant) -> Self {
        RecoveryConstants {
            r: f64::NAN,
            c0: f64::NAN,
            c1: f64::NAN,
            c2: f64::NAN,
            c3: f64::NAN,
            q,
            delta2s,
            s,
            feasible: false,
            c0_variant,
            r_at_boundary: false,
        }
    }

    /// `C₀ s^{1/2−1/q} σ + C₁ ε`.
    pub fn l2_bound(&self, sigma: f64, epsilon: f64) -> BoundTerms {
        let s = self.s as f64;
        BoundTerms {
            sparse_term: scaled(self.c0, s.powf(0.5 - 1.0 / self.q) * sigma),
            noise_term: scaled(self.c1, epsilon),
        }
    }

    /// `C₂ σ + C₃ s^{1/q−1/2} ε`.
    pub fn lq_bound(&self, sigma: f64, epsilon: f64) -> BoundTerms {
        let s = self.s as f64;
        BoundTerms {
            sparse_term: scaled(self.c2, sigma),
            noise_term: scaled(self.c3, s.powf(1.0 / self.q - 0.5) * epsilon),
        }
    }
}

// Keeps `∞ · 0 = 0` for infinite constants against vanishing factors.
fn scaled(c: f64, factor: f64) -> f64 {
    if factor == 0.0 {
        0.0
    } else {
        c * factor
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Constants for the stable-recovery bounds, with `r` picked on a log grid
/// of `(10⁻³, 10³)` among values satisfying `a(q, δ₁/(1+r)) < δ₁/(1+r)`,
/// minimizing `C₀ + C₂`.
///
/// Both cases of the error analysis are folded in: the noise-dominated case
/// gives `C₁` and a `q`-th power bound `‖h‖_q^q ≤ K s^{1−q/2} ε^q + 2σ^q`,
/// which is turned into `C₂, C₃` with the quasi-triangle factor `2^{1/q−1}`.
pub fn recovery_constants(
    q: f64,
    delta2s: f64,
    s: usize,
    c0_variant: C0Variant,
) -> Result<RecoveryConstants> {
    recovery_constants_with_grid(q, delta2s, s, c0_variant, R_GRID_POINTS)
}

/// [`recovery_constants`] with `points` log-spaced values of `r`.
pub fn recovery_constants_with_grid(
    q: f64,
    delta2s: f64,
    s: usize,
    c0_variant: C0Variant,
    points: usize,
) -> Result<RecoveryConstants> {
    check_q(q)?;
    if points < 2 {
        return Err(Error::Domain("r grid needs at least two points".into()));
    }
    if s == 0 {
        return Err(Error::Domain("sparsity must be positive".into()));
    }
    let d1 = delta1(delta2s)?;
    if a_value(BoundsQuery { q, delta: d1 }).value >= d1 {
        return Ok(RecoveryConstants::infeasible(q, delta2s, s, c0_variant));
    }
    let inv_q = 1.0 / q;
    let ln2 = std::f64::consts::LN_2;
    let mut best: Option<(f64, RecoveryConstants)> = None;
    for i in 0..points {
        let r = 10f64.powf(-3.0 + 6.0 * i as f64 / (points - 1) as f64);
        let d = d1 / (1.0 + r);
        let a = a_value(BoundsQuery { q, delta: d }).value;
        if a >= d {
            continue;
        }
        let gap = d.powf(q) - a.powf(q);
        if gap <= 0.0 {
            continue;
        }
        let a_power = match c0_variant {
            C0Variant::Squared => 2.0 * a.ln(),
            C0Variant::FirstPower => a.ln(),
        };
        let ln_c0 = inv_q * ln2 + (1.0 + r + d1).ln() + a_power - d1.ln() - inv_q * gap.ln();
        let c1 = 2.0 * ((1.0 + r) / (r * (1.0 - delta2s).sqrt()) + 1.0 / (r * (1.0 + delta2s).sqrt()));
        let ln_c2_main = inv_q * ((2.0 * d.powf(q) + 2.0 * a.powf(q)).ln() - gap.ln());
        let ln_quasi = (inv_q - 1.0) * ln2;
        let ln_c2 = ln_c2_main.max(ln_quasi + inv_q * ln2);
        let ln_c3 = ln_quasi + inv_q * (1.0 + q) * ln2 + (1.0 + r).ln() - r.ln() - 0.5 * (1.0 - delta2s).ln();
        let score = log_add_exp(ln_c0, ln_c2);
        let candidate = RecoveryConstants {
            r,
            c0: ln_c0.exp(),
            c1,
            c2: ln_c2.exp(),
            c3: ln_c3.exp(),
            q,
            delta2s,
            s,
            feasible: true,
            c0_variant,
            r_at_boundary: i == 0 || i + 1 == points,
        };
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, candidate));
        }
    }
    Ok(match best {
        Some((_, c)) => c,
        None => RecoveryConstants::infeasible(q, delta2s, s, c0_variant),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurvePoint {
    pub delta: f64,
    pub q_succ: f64,
    pub q_fail: f64,
}

/// `δ ∈ {0.01, 0.02, …, 0.99}`.
pub fn default_curve_grid() -> Vec<f64> {
    (1..=99).map(|k| k as f64 / 100.0).collect()
}

/// `(q_succ, q_fail)` at each `δ`, evaluated in parallel, returned in input order.
pub fn threshold_curve(deltas: &[f64]) -> Result<Vec<ThresholdCurvePoint>> {
    deltas
        .par_iter()
        .map(|&delta| {
            Ok(ThresholdCurvePoint {
                delta,
                q_succ: q_succ(delta)?.q,
                q_fail: q_fail(delta)?.q,
            })
        })
        .collect()
}
