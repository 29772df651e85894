pub mod certify;
pub mod curves;
pub mod recover;
pub mod stable;
pub mod verify;

use std::path::PathBuf;

use lqsense::DenseMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Ensemble, ExperimentConfig};

/// Exponents used when neither a q list nor `--grid` is given.
pub const DEFAULT_Q_LIST: [f64; 5] = [1.0, 0.75, 0.5, 0.25, 0.1];

pub struct Context {
    pub config: ExperimentConfig,
    pub grid: Option<usize>,
    pub budget: u128,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn rip_options(&self) -> lqsense::rip::RipOptions {
        lqsense::rip::RipOptions { budget: self.budget, seed: self.config.seed, ..Default::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixInfo {
    pub rows: usize,
    pub cols: usize,
    pub ensemble: Ensemble,
    pub seed: u64,
}

impl MatrixInfo {
    pub fn new(a: &DenseMatrix, config: &ExperimentConfig) -> Self {
        MatrixInfo { rows: a.rows(), cols: a.cols(), ensemble: config.ensemble, seed: config.seed }
    }
}

/// Generator for trial `index`; stream 0 is reserved for the matrix.
pub fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

pub fn relative_error(x_hat: &[f64], x: &[f64]) -> f64 {
    let num: f64 = x_hat.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
