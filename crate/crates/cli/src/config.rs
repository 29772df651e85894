use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use lqsense::DenseMatrix;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::failure::{Failure, Outcome};

/// Environment variable consulted for the output directory.
pub const OUT_DIR_ENV: &str = "LQSENSE_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Ensemble {
    /// i.i.d. normal entries scaled by `1/√m`.
    #[default]
    Gaussian,
    /// Rows of the orthonormal factor of a seeded Gaussian matrix.
    OrthonormalRows,
    /// Matrix read from `matrix_csv`.
    UserCsv,
}

/// Signal family used by `stable`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SignalModel {
    /// Power-law magnitudes on a random permutation with random signs.
    #[default]
    Compressible,
    /// Exactly `s`-sparse with unit-normal nonzeros.
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub q_list: Vec<f64>,
    pub ensemble: Ensemble,
    pub trials: usize,
    pub noise_epsilon: f64,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub matrix_csv: Option<PathBuf>,
    /// Decay exponent of compressible signals.
    pub exponent: f64,
    pub signal: SignalModel,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            m: 8,
            n: 12,
            s: 2,
            q_list: Vec::new(),
            ensemble: Ensemble::Gaussian,
            trials: 100,
            noise_epsilon: 0.0,
            seed: 0,
            output_dir: None,
            matrix_csv: None,
            exponent: 1.5,
            signal: SignalModel::Compressible,
        }
    }
}

/// Per-field overrides of the experiment configuration.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    /// Comma-separated exponents in (0, 1].
    #[arg(long, value_delimiter = ',')]
    pub q_list: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub ensemble: Option<Ensemble>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub noise_epsilon: Option<f64>,
    /// Matrix CSV; implies `--ensemble user_csv`.
    #[arg(long)]
    pub matrix_csv: Option<PathBuf>,
    #[arg(long)]
    pub exponent: Option<f64>,
    #[arg(long, value_enum)]
    pub signal: Option<SignalModel>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Outcome<Self> {
        match path {
            None => Ok(ExperimentConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Failure::config(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Failure::config(format!("bad config {}: {e}", p.display())))
            }
        }
    }

    pub fn apply(&mut self, args: &ExperimentArgs) {
        if let Some(v) = args.m {
            self.m = v;
        }
        if let Some(v) = args.n {
            self.n = v;
        }
        if let Some(v) = args.s {
            self.s = v;
        }
        if let Some(v) = &args.q_list {
            self.q_list = v.clone();
        }
        if let Some(v) = args.ensemble {
            self.ensemble = v;
        }
        if let Some(v) = args.trials {
            self.trials = v;
        }
        if let Some(v) = args.noise_epsilon {
            self.noise_epsilon = v;
        }
        if let Some(v) = &args.matrix_csv {
            self.matrix_csv = Some(v.clone());
            if args.ensemble.is_none() {
                self.ensemble = Ensemble::UserCsv;
            }
        }
        if let Some(v) = args.exponent {
            self.exponent = v;
        }
        if let Some(v) = args.signal {
            self.signal = v;
        }
    }

    /// Checks everything except the matrix shape, which is known only after loading.
    pub fn validate(&self) -> Outcome<()> {
        if self.s == 0 {
            return Err(Failure::config("s must be positive"));
        }
        if let Some(q) = self.q_list.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
            return Err(Failure::config(format!("q = {q} outside (0, 1]")));
        }
        if !(self.noise_epsilon >= 0.0 && self.noise_epsilon.is_finite()) {
            return Err(Failure::config("noise_epsilon must be a nonnegative real"));
        }
        if !(self.exponent > 0.0 && self.exponent.is_finite()) {
            return Err(Failure::config("exponent must be positive"));
        }
        if self.ensemble == Ensemble::UserCsv && self.matrix_csv.is_none() {
            return Err(Failure::config("ensemble user_csv needs matrix_csv"));
        }
        Ok(())
    }

    fn check_shape(&self) -> Outcome<()> {
        if !(2 * self.s <= self.m && self.m <= self.n) {
            return Err(Failure::config(format!(
                "need 2s <= m <= n, got s = {}, m = {}, n = {}",
                self.s, self.m, self.n
            )));
        }
        Ok(())
    }

    /// Builds or loads the measurement matrix and fixes `m`, `n` to its shape.
    pub fn matrix(&mut self) -> Outcome<DenseMatrix> {
        self.validate()?;
        let a = match self.ensemble {
            Ensemble::UserCsv => {
                let path = self.matrix_csv.as_ref().expect("validated");
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::config(format!("cannot read matrix {}: {e}", path.display())))?;
                let a = DenseMatrix::from_csv_str(&text)?;
                self.m = a.rows();
                self.n = a.cols();
                a
            }
            Ensemble::Gaussian => {
                self.check_shape()?;
                gaussian(self.m, self.n, self.seed)
            }
            Ensemble::OrthonormalRows => {
                self.check_shape()?;
                orthonormal_rows(self.m, self.n, self.seed)?
            }
        };
        self.check_shape()?;
        Ok(a)
    }
}

/// `rows × cols` matrix of unit normals from stream 0 of `seed`.
fn normal_matrix(rows: usize, cols: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        })
        .collect()
}

pub fn gaussian(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let scale = 1.0 / (m as f64).sqrt();
    let data = normal_matrix(m, n, seed).into_iter().map(|z| z * scale).collect();
    DenseMatrix::new(m, n, data).expect("finite entries of the right count")
}

pub fn orthonormal_rows(m: usize, n: usize, seed: u64) -> Outcome<DenseMatrix> {
    let g = DMatrix::from_row_slice(n, m, &normal_matrix(n, m, seed));
    let q = g.qr().q();
    Ok(DenseMatrix::from_nalgebra(&q.transpose())?)
}

/// Output directory: flag, then config, then the environment, then `.`.
pub fn output_dir(flag: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_win_over_file_values() {
        let mut cfg: ExperimentConfig = serde_json::from_str(r#"{"m": 10, "n": 20, "trials": 3}"#).unwrap();
        cfg.apply(&ExperimentArgs { n: Some(30), q_list: Some(vec![0.5]), ..Default::default() });
        assert_eq!((cfg.m, cfg.n, cfg.s, cfg.trials), (10, 30, 2, 3));
        assert_eq!(cfg.q_list, vec![0.5]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"mm": 1}"#).is_err());
    }

    #[test]
    fn shape_invariant_is_enforced() {
        let mut cfg = ExperimentConfig { m: 3, n: 12, s: 2, ..Default::default() };
        assert!(cfg.matrix().is_err());
        let mut cfg = ExperimentConfig { m: 8, n: 6, ..Default::default() };
        assert!(cfg.matrix().is_err());
    }

    #[test]
    fn orthonormal_rows_are_orthonormal() {
        let a = orthonormal_rows(4, 7, 3).unwrap().to_nalgebra();
        let g = &a * a.transpose();
        assert!((g - DMatrix::<f64>::identity(4, 4)).abs().max() < 1e-12);
    }

    #[test]
    fn gaussian_is_seeded() {
        assert_eq!(gaussian(3, 5, 9), gaussian(3, 5, 9));
        assert_ne!(gaussian(3, 5, 9), gaussian(3, 5, 10));
    }
}
