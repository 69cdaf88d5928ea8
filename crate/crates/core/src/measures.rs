//! Exact leakage quantities of a known system, and measures derived from
//! risk values.
//!
//! All risks are computed in `f64` with pairwise summation over observations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::sum::pairwise_sum;
use crate::system::{Prior, System};

/// Minimum expected 0-1 error over all classifiers:
/// `1 − Σ_o max_s π(s)·C[s][o]`.
pub fn bayes_risk<T: Real>(system: &System<T>) -> Result<f64> {
    system.check()?;
    let best = column_maxima(system);
    Ok(clamp01(1.0 - pairwise_sum(&best)))
}

/// `max_s π(s)·C[s][o]` for every column.
pub(crate) fn column_maxima<T: Real>(system: &System<T>) -> Vec<f64> {
    let ch = system.channel();
    let mut best = vec![0.0f64; ch.n_objects()];
    for s in 0..ch.n_secrets() {
        let p = system.prior().get(s).to_f64_lossless();
        for (b, &c) in best.iter_mut().zip(ch.row(s)) {
            let j = p * c.to_f64_lossless();
            if j > *b {
                *b = j;
            }
        }
    }
    best
}

/// Bayes-optimal classifier; ties go to the smallest secret id.
pub fn bayes_classifier<T: Real>(system: &System<T>) -> Vec<usize> {
    let ch = system.channel();
    let mut best = vec![f64::NEG_INFINITY; ch.n_objects()];
    let mut arg = vec![0usize; ch.n_objects()];
    for s in 0..ch.n_secrets() {
        let p = system.prior().get(s).to_f64_lossless();
        for o in 0..ch.n_objects() {
            let j = p * ch.get(s, o).to_f64_lossless();
            if j > best[o] {
                best[o] = j;
                arg[o] = s;
            }
        }
    }
    arg
}

/// Error of the prior-only adversary, `1 − max_s π(s)`.
pub fn random_guessing_error<T: Real>(prior: &Prior<T>) -> f64 {
    let max = prior.probs().iter().map(|p| p.to_f64_lossless()).fold(0.0, f64::max);
    clamp01(1.0 - max)
}

/// Expected 0-1 error of `classifier` on `system`:
/// `1 − Σ_o π(f(o))·C[f(o)][o]`.
///
/// `classifier(o)` returns `None` where it is undefined, which is an error.
pub fn expected_error<T: Real>(system: &System<T>, classifier: impl Fn(usize) -> Option<usize>) -> Result<f64> {
    system.check()?;
    let m = system.n_objects();
    let mut gains = Vec::with_capacity(m);
    for o in 0..m {
        let s = classifier(o).ok_or(Error::UndefinedPrediction(o))?;
        if s >= system.n_secrets() {
            return Err(Error::SecretOutOfRange {
                secret: s,
                n_secrets: system.n_secrets(),
            });
        }
        gains.push(system.joint(s, o).to_f64_lossless());
    }
    Ok(clamp01(1.0 - pairwise_sum(&gains)))
}

fn check_risk(name: &str, r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {r} is not in [0, 1]")))
    }
}

/// Min-entropy leakage in bits: `log2((1 − R*) / (1 − R^π))`.
pub fn min_entropy_leakage(random_guessing: f64, bayes_risk: f64) -> Result<f64> {
    check_risk("random guessing error", random_guessing)?;
    check_risk("Bayes risk", bayes_risk)?;
    if bayes_risk >= 1.0 || random_guessing >= 1.0 {
        return Err(Error::Undefined("min-entropy leakage"));
    }
    Ok(-(1.0 - random_guessing).log2() + (1.0 - bayes_risk).log2())
}

/// `(multiplicative, additive)` leakage: the ratio and the difference of the
/// posterior and prior vulnerabilities, `(1 − R*)/(1 − R^π)` and `R^π − R*`.
///
/// These are the standard quantitative-information-flow definitions.
pub fn derived_leakages(random_guessing: f64, bayes_risk: f64) -> Result<(f64, f64)> {
    check_risk("random guessing error", random_guessing)?;
    check_risk("Bayes risk", bayes_risk)?;
    if random_guessing >= 1.0 {
        return Err(Error::Undefined("multiplicative leakage"));
    }
    Ok((
        (1.0 - bayes_risk) / (1.0 - random_guessing),
        random_guessing - bayes_risk,
    ))
}

/// Lower bound on the Bayes risk from the nearest-neighbor error `R^NN`:
/// `((|S|−1)/|S|)·(1 − sqrt(1 − |S|/(|S|−1)·R^NN))`.
pub fn nn_lower_bound(nn_error: f64, n_secrets: usize) -> Result<f64> {
    if n_secrets < 2 {
        return Err(Error::InvalidArgument("the bound needs at least 2 secrets".into()));
    }
    check_risk("NN error", nn_error)?;
    let l = n_secrets as f64;
    let ratio = (l - 1.0) / l;
    let mut radicand = 1.0 - nn_error / ratio;
    if radicand < 0.0 {
        if radicand < -1e-12 {
            return Err(Error::InvalidArgument(format!(
                "NN error {nn_error} exceeds (|S|-1)/|S| = {ratio}"
            )));
        }
        radicand = 0.0;
    }
    Ok(ratio * (1.0 - radicand.sqrt()))
}

/// Risks and derived leakage measures of one system or estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub bayes_risk: f64,
    pub random_guessing: f64,
    pub min_entropy_leakage_bits: f64,
    pub multiplicative_leakage: f64,
    pub additive_leakage: f64,
}

impl LeakageReport {
    pub fn from_risks(random_guessing: f64, bayes_risk: f64) -> Result<Self> {
        let me = min_entropy_leakage(random_guessing, bayes_risk)?;
        let (mult, add) = derived_leakages(random_guessing, bayes_risk)?;
        Ok(LeakageReport {
            bayes_risk,
            random_guessing,
            min_entropy_leakage_bits: me,
            multiplicative_leakage: mult,
            additive_leakage: add,
        })
    }

    /// Exact report for a known system.
    pub fn exact<T: Real>(system: &System<T>) -> Result<Self> {
        let r_star = bayes_risk(system)?;
        LeakageReport::from_risks(random_guessing_error(system.prior()), r_star)
    }
}

#[inline]
pub(crate) fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}
