//! Real signal vectors and the quasinorm machinery built on them.
//!
//! Best s-term approximation keeps the `s` entries of largest magnitude. This
//! is optimal for every `q > 0`: the error `‖x - x'‖_q^q` of any `x'` with
//! support `S` is at least `Σ_{i∉S} |x_i|^q`, and that sum over the `n - s`
//! complementary indices is smallest when the complement holds the smallest
//! magnitudes. Ties can be broken arbitrarily without changing the error, so
//! the lowest index wins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries of magnitude at most `ZERO_TOLERANCE * ‖x‖_∞` count as zero for `q = 0`.
pub const ZERO_TOLERANCE: f64 = 1e-12;

/// A finite real vector of length at least one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SignalVector(Vec<f64>);

impl TryFrom<Vec<f64>> for SignalVector {
    type Error = Error;

    fn try_from(entries: Vec<f64>) -> Result<Self> {
        SignalVector::new(entries)
    }
}

impl From<SignalVector> for Vec<f64> {
    fn from(v: SignalVector) -> Self {
        v.0
    }
}

impl SignalVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Shape("signal vector must have length >= 1".into()));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(SignalVector(entries))
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "signal vector must have length >= 1");
        SignalVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖x‖_q` with the default zero tolerance for `q = 0`.
    pub fn quasi_norm(&self, q: f64) -> Result<f64> {
        quasi_norm(self.as_slice(), q)
    }

    /// `Σ |x_i|^q` for `q > 0`.
    pub fn q_power_sum(&self, q: f64) -> f64 {
        q_power_sum(&self.0, q)
    }

    pub fn sub(&self, other: &SignalVector) -> Result<SignalVector> {
        if self.len() != other.len() {
            return Err(Error::Shape(format!(
                "length {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(SignalVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Reads one value per line, or a single comma-separated row.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            for field in line.split(',') {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Parse(format!("line {}: bad number {:?}", line_no + 1, field))
                })?;
                values.push(v);
            }
        }
        SignalVector::new(values)
    }

    /// One value per line.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for v in &self.0 {
            out.push_str(&format!("{v:e}\n"));
        }
        out
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let values: Vec<f64> = serde_json::from_str(text)?;
        SignalVector::new(values)
    }
}

impl std::ops::Index<usize> for SignalVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Sum of `|x_i|^q`; zero entries contribute nothing.
pub fn q_power_sum(x: &[f64], q: f64) -> f64 {
    x.iter()
        .filter(|v| **v != 0.0)
        .map(|v| v.abs().powf(q))
        .sum()
}

/// `‖x‖_q` for `q ∈ {0} ∪ (0, ∞) ∪ {∞}`.
///
/// `q = 0` counts entries above `ZERO_TOLERANCE · ‖x‖_∞`.
pub fn quasi_norm(x: &[f64], q: f64) -> Result<f64> {
    quasi_norm_with_tolerance(x, q, ZERO_TOLERANCE)
}

pub fn quasi_norm_with_tolerance(x: &[f64], q: f64, zero_tol: f64) -> Result<f64> {
    if q.is_nan() || q < 0.0 {
        return Err(Error::Domain(format!("quasinorm exponent must be >= 0, got {q}")));
    }
    let max = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if q == 0.0 {
        let threshold = zero_tol * max;
        return Ok(x.iter().filter(|v| v.abs() > threshold).count() as f64);
    }
    if q.is_infinite() {
        return Ok(max);
    }
    if max == 0.0 {
        return Ok(0.0);
    }
    // Scale by the max entry so the power sum neither overflows nor underflows.
    let sum: f64 = x
        .iter()
        .filter(|v| **v != 0.0)
        .map(|v| (v.abs() / max).powf(q))
        .sum();
    Ok(max * sum.powf(1.0 / q))
}

/// Indices of the `s` largest magnitudes, ties to the lowest index, returned sorted.
pub fn top_s_support(x: &[f64], s: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| {
        x[j].abs()
            .partial_cmp(&x[i].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut keep: Vec<usize> = order.into_iter().take(s).collect();
    keep.sort_unstable();
    keep
}

/// Best s-term approximation: keep the `s` largest magnitudes, zero the rest.
///
/// `q` only enters through the optimality claim in the module docs, but it
/// is range-checked so callers cannot ask for a meaningless exponent.
pub fn best_s_term(x: &SignalVector, s: usize, q: f64) -> Result<SignalVector> {
    if s == 0 || s > x.len() {
        return Err(Error::Domain(format!(
            "sparsity {s} must satisfy 1 <= s <= {}",
            x.len()
        )));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("q must lie in (0, 1], got {q}")));
    }
    let mut out = vec![0.0; x.len()];
    for i in top_s_support(x.as_slice(), s) {
        out[i] = x[i];
    }
    Ok(SignalVector(out))
}

/// `Σ_{k≥1} (Σ_{i=1}^{s} a_{ks+i}²)^{1/2}`: block ℓ² norms past the first block.
///
/// `a` must be nonincreasing and nonnegative; missing entries count as zero.
pub fn block_l2_tail(a: &[f64], s: usize) -> Result<f64> {
    check_nonincreasing(a)?;
    if s == 0 {
        return Err(Error::Domain("block size must be positive".into()));
    }
    Ok(a.chunks(s)
        .skip(1)
        .map(|block| block.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum())
}

pub(crate) fn check_nonincreasing(a: &[f64]) -> Result<()> {
    if let Some(i) = a.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    if let Some(v) = a.iter().find(|v| **v < 0.0) {
        return Err(Error::Domain(format!("sequence has negative entry {v}")));
    }
    if let Some(i) = a.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::Domain(format!(
            "sequence increases at position {}",
            i + 1
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> SignalVector {
        SignalVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn quasi_norm_examples() {
        let x = [3.0, -4.0, 0.0];
        assert_relative_eq!(quasi_norm(&x, 2.0).unwrap(), 5.0, epsilon = 1e-12);
        assert_eq!(quasi_norm(&x, 0.0).unwrap(), 2.0);
        assert_relative_eq!(quasi_norm(&[1.0, 1.0, 1.0], 0.5).unwrap(), 9.0, epsilon = 1e-12);
        assert_eq!(quasi_norm(&x, f64::INFINITY).unwrap(), 4.0);
    }

    #[test]
    fn quasi_norm_rejects_negative_exponent() {
        assert!(matches!(quasi_norm(&[1.0], -0.5), Err(Error::Domain(_))));
        assert!(quasi_norm(&[1.0], f64::NAN).is_err());
    }

    #[test]
    fn zero_count_uses_relative_threshold() {
        assert_eq!(quasi_norm(&[1.0, 1e-13, 0.0], 0.0).unwrap(), 1.0);
        assert_eq!(quasi_norm(&[1e-20, 1e-21], 0.0).unwrap(), 2.0);
        assert_eq!(quasi_norm_with_tolerance(&[1.0, 1e-13], 0.0, 0.0).unwrap(), 2.0);
    }

    #[test]
    fn best_s_term_examples() {
        assert_eq!(best_s_term(&sv(&[3.0, -2.0, 1.0]), 2, 0.5).unwrap(), sv(&[3.0, -2.0, 0.0]));
        assert_eq!(best_s_term(&sv(&[0.0, 0.0, 0.0]), 1, 1.0).unwrap(), sv(&[0.0, 0.0, 0.0]));
        assert_eq!(best_s_term(&sv(&[1.0, 1.0, 2.0]), 1, 0.3).unwrap(), sv(&[0.0, 0.0, 2.0]));
        // tie goes to the lowest index
        assert_eq!(best_s_term(&sv(&[1.0, -1.0, 1.0]), 1, 1.0).unwrap(), sv(&[1.0, 0.0, 0.0]));
        assert!(best_s_term(&sv(&[1.0]), 2, 1.0).is_err());
        assert!(best_s_term(&sv(&[1.0]), 0, 1.0).is_err());
    }

    #[test]
    fn block_tail_examples() {
        assert_eq!(block_l2_tail(&[1.0, 1.0, 0.0, 0.0], 2).unwrap(), 0.0);
        assert_relative_eq!(
            block_l2_tail(&[4.0, 3.0, 2.0, 2.0, 1.0, 1.0], 2).unwrap(),
            8f64.sqrt() + 2f64.sqrt(),
            epsilon = 1e-12
        );
        for s in 1..6 {
            let ones = vec![1.0; 3 * s];
            assert_relative_eq!(
                block_l2_tail(&ones, s).unwrap(),
                2.0 * (s as f64).sqrt(),
                epsilon = 1e-12
            );
        }
        // short final block is padded with zeros
        assert_relative_eq!(block_l2_tail(&[2.0, 2.0, 1.0], 2).unwrap(), 1.0);
        assert!(block_l2_tail(&[1.0, 2.0], 1).is_err());
        assert!(block_l2_tail(&[1.0, -1.0], 1).is_err());
    }

    #[test]
    fn csv_and_json_loading() {
        assert_eq!(SignalVector::from_csv_str("1\n2.5\n\n-3\n").unwrap(), sv(&[1.0, 2.5, -3.0]));
        assert_eq!(SignalVector::from_csv_str("1, 2,3").unwrap(), sv(&[1.0, 2.0, 3.0]));
        assert!(SignalVector::from_csv_str("1\nNaN\n").is_err());
        assert!(SignalVector::from_csv_str("1\ninf\n").is_err());
        assert!(SignalVector::from_csv_str("").is_err());
        assert_eq!(SignalVector::from_json_str("[1, 2]").unwrap(), sv(&[1.0, 2.0]));
        let round = SignalVector::from_csv_str(&sv(&[0.1, -7.25e-9]).to_csv_string()).unwrap();
        assert_eq!(round, sv(&[0.1, -7.25e-9]));
    }

    /// Exhaustive best-support search, independent of the sorting route.
    fn brute_best_error(x: &[f64], s: usize, q: f64) -> f64 {
        let n = x.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != s {
                continue;
            }
            let err: f64 = (0..n)
                .filter(|i| mask & (1 << i) == 0)
                .map(|i| x[i].abs().powf(q))
                .sum();
            best = best.min(err);
        }
        best
    }

    fn finite_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, len)
    }

    proptest! {
        #[test]
        fn q_power_subadditive(pair in (1usize..12).prop_flat_map(|n| (prop::collection::vec(-5.0f64..5.0, n), prop::collection::vec(-5.0f64..5.0, n))), q in 0.01f64..=1.0) {
            let (x, y) = pair;
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let lhs = q_power_sum(&sum, q);
            let rhs = q_power_sum(&x, q) + q_power_sum(&y, q);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn lq_nesting(x in finite_vec(1..12), q1 in 0.05f64..2.0, dq in 0.0f64..2.0) {
            let q2 = q1 + dq;
            let n1 = quasi_norm(&x, q1).unwrap();
            let n2 = quasi_norm(&x, q2).unwrap();
            prop_assert!(n1 >= n2 * (1.0 - 1e-12));
        }

        #[test]
        fn best_s_term_is_optimal(x in finite_vec(1..9), s_frac in 0.0f64..1.0, qi in 0usize..3) {
            let q = [0.3, 0.5, 1.0][qi];
            let s = 1 + ((x.len() - 1) as f64 * s_frac) as usize;
            let v = SignalVector::new(x.clone()).unwrap();
            let approx = best_s_term(&v, s, q).unwrap();
            let err = q_power_sum(v.sub(&approx).unwrap().as_slice(), q);
            let brute = brute_best_error(&x, s, q);
            prop_assert!((err - brute).abs() <= 1e-10 * (1.0 + brute));
        }

        #[test]
        fn block_tail_below_leading_entry_bound(mut a in prop::collection::vec(0.0f64..5.0, 1..30), s in 1usize..6) {
            a.sort_by(|x, y| y.partial_cmp(x).unwrap());
            let tail = block_l2_tail(&a, s).unwrap();
            let leading: f64 = a.iter().skip(s).step_by(s).sum();
            prop_assert!(tail <= (s as f64).sqrt() * leading * (1.0 + 1e-12) + 1e-12);
        }
    }
}
