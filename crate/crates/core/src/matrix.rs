//! Dense measurement matrices, support sets and support-restricted least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::SignalVector;

/// Relative singular-value cutoff for rank decisions in least squares.
pub const LSQ_RANK_TOLERANCE: f64 = 1e-12;

/// An `m × n` real matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for DenseMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        DenseMatrix::from_rows(rows)
    }
}

impl From<DenseMatrix> for Vec<Vec<f64>> {
    fn from(m: DenseMatrix) -> Self {
        m.data.chunks(m.cols).map(|r| r.to_vec()).collect()
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape("matrix dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("ragged rows".into()));
        }
        DenseMatrix::new(m, n, rows.into_iter().flatten().collect())
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        DenseMatrix { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j).powi(2)).sum::<f64>().sqrt())
            .collect()
    }

    /// Indices of all-zero columns; flagged for sensing use, not rejected.
    pub fn zero_columns(&self) -> Vec<usize> {
        (0..self.cols)
            .filter(|&j| (0..self.rows).all(|i| self.get(i, j) == 0.0))
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Shape(format!(
                "vector of length {} against {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok(self
            .data
            .chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Result<Self> {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
            .collect();
        DenseMatrix::new(m.nrows(), m.ncols(), data)
    }

    /// The `m × #S` submatrix of the listed columns.
    pub fn select_columns(&self, cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, cols.len(), |i, k| self.get(i, cols[k]))
    }

    /// One row per line, comma separated, no header.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|_| {
                        Error::Parse(format!("line {}: bad number {:?}", line_no + 1, f))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("empty matrix file".into()));
        }
        DenseMatrix::from_rows(rows)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for row in self.data.chunks(self.cols) {
            let fields: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = serde_json::from_str(text)?;
        DenseMatrix::from_rows(rows)
    }
}

/// A strictly increasing set of zero-based column indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("support indices must be strictly increasing".into()));
        }
        if let Some(&i) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Domain(format!("support index {i} out of range for n = {n}")));
        }
        Ok(SupportSet(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Coefficients on a support together with the attained residual `‖A_S u − z‖₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSolution {
    pub coefficients: Vec<f64>,
    pub residual: f64,
}

/// Minimum-norm least squares `min ‖M u − b‖₂` through an SVD, with singular
/// values below `LSQ_RANK_TOLERANCE · σ_max` discarded.
pub fn min_norm_lstsq(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if m.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return DVector::zeros(m.ncols());
    }
    svd.solve(b, LSQ_RANK_TOLERANCE * smax)
        .expect("both singular factors were computed")
}

/// Least squares restricted to the columns in `support`.
pub fn least_squares_on_support(
    a: &DenseMatrix,
    z: &SignalVector,
    support: &SupportSet,
) -> Result<SupportSolution> {
    if z.len() != a.rows() {
        return Err(Error::Shape(format!(
            "measurement length {} for {} rows",
            z.len(),
            a.rows()
        )));
    }
    if let Some(&last) = support.indices().last() {
        if last >= a.cols() {
            return Err(Error::Shape(format!("support index {last} >= {}", a.cols())));
        }
    }
    if support.len() > a.rows() {
        return Err(Error::Shape(format!(
            "support size {} exceeds {} rows",
            support.len(),
            a.rows()
        )));
    }
    let zv = DVector::from_column_slice(z.as_slice());
    if support.is_empty() {
        return Ok(SupportSolution { coefficients: vec![], residual: zv.norm() });
    }
    let sub = a.select_columns(support.indices());
    let u = min_norm_lstsq(&sub, &zv);
    let residual = (&sub * &u - &zv).norm();
    Ok(SupportSolution { coefficients: u.iter().cloned().collect(), residual })
}

/// Exact binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Iterator over all `k`-subsets of `0..n` in lexicographic order.
pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        let current = if k <= n { Some((0..k).collect()) } else { None };
        Combinations { n, current }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn least_squares_identity() {
        let a = DenseMatrix::identity(3);
        let z = SignalVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let sol = least_squares_on_support(&a, &z, &SupportSet::new(vec![0, 1], 3).unwrap()).unwrap();
        assert_relative_eq!(sol.coefficients[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(sol.coefficients[1], 2.0, epsilon = 1e-14);
        assert_relative_eq!(sol.residual, 3.0, epsilon = 1e-14);

        let zero = SignalVector::zeros(3);
        let sol = least_squares_on_support(&a, &zero, &SupportSet::new(vec![2], 3).unwrap()).unwrap();
        assert_eq!(sol.coefficients, vec![0.0]);
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data: Vec<f64> = (0..24).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = DenseMatrix::new(4, 6, data).unwrap();
        let z = SignalVector::new((0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let support = SupportSet::new(vec![0, 2, 5], 6).unwrap();
        let sol = least_squares_on_support(&a, &z, &support).unwrap();

        // normal equations (AᵀA) u = Aᵀz solved by Gaussian elimination
        let sub = a.select_columns(support.indices());
        let k = support.len();
        let mut aug = vec![vec![0.0; k + 1]; k];
        for r in 0..k {
            for c in 0..k {
                aug[r][c] = (0..4).map(|i| sub[(i, r)] * sub[(i, c)]).sum();
            }
            aug[r][k] = (0..4).map(|i| sub[(i, r)] * z[i]).sum();
        }
        for p in 0..k {
            let piv = (p..k).max_by(|&x, &y| aug[x][p].abs().partial_cmp(&aug[y][p].abs()).unwrap()).unwrap();
            aug.swap(p, piv);
            for r in 0..k {
                if r != p {
                    let f = aug[r][p] / aug[p][p];
                    for c in p..=k {
                        aug[r][c] -= f * aug[p][c];
                    }
                }
            }
        }
        for r in 0..k {
            assert_relative_eq!(sol.coefficients[r], aug[r][k] / aug[r][r], epsilon = 1e-10);
        }
    }

    #[test]
    fn least_squares_rank_deficient_is_min_norm() {
        // two identical columns: min-norm solution splits evenly
        let a = DenseMatrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let z = SignalVector::new(vec![2.0, 0.0]).unwrap();
        let sol = least_squares_on_support(&a, &z, &SupportSet::new(vec![0, 1], 2).unwrap()).unwrap();
        assert_relative_eq!(sol.coefficients[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.coefficients[1], 1.0, epsilon = 1e-12);
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let a = DenseMatrix::identity(2);
        let z = SignalVector::zeros(3);
        assert!(least_squares_on_support(&a, &z, &SupportSet::new(vec![0], 2).unwrap()).is_err());
        assert!(SupportSet::new(vec![1, 1], 3).is_err());
        assert!(SupportSet::new(vec![3], 3).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn csv_json_loaders_reject_nonfinite() {
        let m = DenseMatrix::from_csv_str("1,2,3\n4,5,6\n").unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 3));
        assert_eq!(m.get(1, 2), 6.0);
        assert!(DenseMatrix::from_csv_str("1,nan\n").is_err());
        assert!(DenseMatrix::from_csv_str("1,2\n3\n").is_err());
        assert_eq!(DenseMatrix::from_csv_str(&m.to_csv_string()).unwrap(), m);
        let j = DenseMatrix::from_json_str("[[1,0],[0,1]]").unwrap();
        assert_eq!(j, DenseMatrix::identity(2));
        assert!(DenseMatrix::from_json_str("[[1e999]]").is_err());
        assert_eq!(serde_json::to_string(&j).unwrap(), "[[1.0,0.0],[0.0,1.0]]");
    }

    #[test]
    fn zero_columns_flagged() {
        let m = DenseMatrix::from_rows(vec![vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(m.zero_columns(), vec![1]);
    }

    #[test]
    fn combinations_enumerate_binomial_count() {
        assert_eq!(Combinations::new(5, 2).count() as u128, binomial(5, 2));
        assert_eq!(Combinations::new(12, 4).count(), 495);
        assert_eq!(Combinations::new(3, 0).collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
        assert_eq!(Combinations::new(2, 3).count(), 0);
        let all: Vec<_> = Combinations::new(4, 2).collect();
        assert_eq!(all[0], vec![0, 1]);
        assert_eq!(all[5], vec![2, 3]);
        assert_eq!(binomial(100, 50), 100891344545564193334812497256);
    }
}
