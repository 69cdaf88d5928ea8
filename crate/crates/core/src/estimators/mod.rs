//! Black-box Bayes-risk estimators.
//!
//! Four universally consistent rules are provided: the frequentist plug-in
//! rule, the nearest-neighbor rule, and k-NN with `k = ⌊ln n⌋` or
//! `k = ⌊log10 n⌋`. Each can be trained one example at a time while its
//! error on a fixed evaluation set is kept up to date, see [`forward_trace`].
//!
//! Ties among secrets with equal vote counts always go to the smallest id.

mod evaluation;
mod index;
mod kdtree;
mod metric;
mod neighbors;
mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use evaluation::{
    estimator, exact_estimate, forward_estimate, forward_trace, forward_trace_at, Estimator, EvalSet,
    FrequentistEstimator, KnnEstimator,
};
pub use index::NeighborIndex;
pub use metric::Metric;
pub use trace::{delta_convergence, select_estimate, smoothed_final, smoothing_window, ConvergenceMode, EstimateTrace};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "frequentist")]
    Frequentist,
    #[serde(rename = "nn")]
    Nn,
    #[serde(rename = "knn-ln")]
    KnnLn,
    #[serde(rename = "knn-log10")]
    KnnLog10,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Frequentist,
        EstimatorKind::Nn,
        EstimatorKind::KnnLn,
        EstimatorKind::KnnLog10,
    ];

    /// Name used for trace files and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Frequentist => "frequentist",
            EstimatorKind::Nn => "nn",
            EstimatorKind::KnnLn => "knn-ln",
            EstimatorKind::KnnLog10 => "knn-log10",
        }
    }

    /// Number of neighbors used after `n` training examples. The
    /// frequentist rule reports 1.
    pub fn k(self, n: usize) -> usize {
        match self {
            EstimatorKind::Frequentist | EstimatorKind::Nn => 1,
            EstimatorKind::KnnLn => kn_schedule(n, Schedule::Ln).unwrap_or(1),
            EstimatorKind::KnnLog10 => kn_schedule(n, Schedule::Log10).unwrap_or(1),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator {s:?}")))
    }
}

/// Growth schedule of `k` for the k_n-NN rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    Ln,
    Log10,
}

/// `max(1, ⌊log n⌋)` in the chosen base.
pub fn kn_schedule(n: usize, schedule: Schedule) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidArgument("k_n needs n >= 1".into()));
    }
    let k = match schedule {
        Schedule::Ln => (n as f64).ln().floor() as usize,
        Schedule::Log10 => n.ilog10() as usize,
    };
    Ok(k.max(1))
}
