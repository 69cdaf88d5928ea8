//! Synthetic systems with known channels, and closed-form error curves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::Metric;
use crate::num::Real;
use crate::sum::pairwise_sum;
use crate::system::{ChannelMatrix, ObjectValues, Prior, System};

/// Size and noise of a geometric system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricSpec {
    pub n_secrets: usize,
    pub n_objects: usize,
    pub nu: f64,
}

impl GeometricSpec {
    pub fn new(n_secrets: usize, n_objects: usize, nu: f64) -> Self {
        GeometricSpec {
            n_secrets,
            n_objects,
            nu,
        }
    }

    fn check(&self) -> Result<()> {
        if self.n_secrets == 0 || self.n_objects == 0 {
            return Err(Error::InvalidArgument(
                "geometric system needs at least one secret and object".into(),
            ));
        }
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "nu must be finite and nonnegative, got {}",
                self.nu
            )));
        }
        Ok(())
    }

    /// Position of secret `t` on the object axis. Secrets beyond the
    /// object count wrap when the channel is repeated; otherwise positions
    /// extend linearly past the last object.
    fn position(&self, t: usize) -> f64 {
        let (w, wp) = (self.n_secrets, self.n_objects);
        if w > wp {
            ((t % wp) + 1) as f64
        } else {
            (t + 1) as f64 * wp as f64 / w as f64
        }
    }

    /// Unnormalized truncated geometric row centred at `g`; columns are
    /// the objects `1..=n_objects`.
    fn raw_row(&self, g: f64) -> Vec<f64> {
        let wp = self.n_objects;
        let e = self.nu.exp();
        let interior = (e - 1.0) / (e + 1.0);
        let boundary = e / (e + 1.0);
        (1..=wp)
            .map(|o| {
                let lambda = if o == 1 || o == wp { boundary } else { interior };
                lambda * (-self.nu * (g - o as f64).abs()).exp()
            })
            .collect()
    }
}

fn normalize(row: &mut [f64]) -> f64 {
    let sum = pairwise_sum(row);
    for v in row.iter_mut() {
        *v /= sum;
    }
    sum
}

fn assemble<T: Real>(rows: Vec<Vec<f64>>, objects: ObjectValues<T>) -> Result<System<T>> {
    let n = rows.len();
    let m = rows[0].len();
    let data: Vec<T> = rows.into_iter().flatten().map(T::of).collect();
    let channel = ChannelMatrix::new(n, m, data)?;
    System::with_objects(Prior::uniform(n)?, channel, objects)
}

fn object_axis<T: Real>(n_objects: usize) -> ObjectValues<T> {
    ObjectValues::from_1d((1..=n_objects).map(|o| T::of(o as f64)).collect()).expect("finite coordinates")
}

/// Largest deviation from 1 of any geometric row sum before normalization.
pub fn geometric_residual(spec: &GeometricSpec) -> Result<f64> {
    spec.check()?;
    Ok((0..spec.n_secrets)
        .map(|s| (pairwise_sum(&spec.raw_row(spec.position(s))) - 1.0).abs())
        .fold(0.0, f64::max))
}

/// Geometric system: secret `s` is mapped to `g(s)` on the object axis
/// `1..=w′` and blurred by `C[s][o] = λ·exp(−ν·|g(s) − o|)`, where the
/// boundary columns absorb the truncated tails. Rows are renormalized.
///
/// With more secrets than objects the square channel repeats, so secrets
/// `s` and `s + w′` share a row. Observations are the object positions.
pub fn geometric_system<T: Real>(spec: &GeometricSpec) -> Result<System<T>> {
    spec.check()?;
    let rows = (0..spec.n_secrets)
        .map(|s| {
            let mut row = spec.raw_row(spec.position(s));
            normalize(&mut row);
            row
        })
        .collect();
    assemble(rows, object_axis(spec.n_objects))
}

/// Mixture of two geometric modes: `w1·C[s] + w2·C[s + 2σ]`.
///
/// For the last `2σ` secrets the second mode is centred past the end of the
/// object axis and only its tail falls on the objects; every row is
/// renormalized after mixing.
pub fn multimodal_system<T: Real>(spec: &GeometricSpec, sigma: usize, weights: (f64, f64)) -> Result<System<T>> {
    spec.check()?;
    let (w1, w2) = weights;
    if !(w1 >= 0.0 && w2 >= 0.0) || (w1 + w2 - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "mixture weights must be nonnegative and sum to 1, got ({w1}, {w2})"
        )));
    }
    let rows = (0..spec.n_secrets)
        .map(|s| {
            let a = spec.raw_row(spec.position(s));
            let b = spec.raw_row(spec.position(s + 2 * sigma));
            let mut row: Vec<f64> = a.iter().zip(&b).map(|(x, y)| w1 * x + w2 * y).collect();
            normalize(&mut row);
            row
        })
        .collect();
    assemble(rows, object_axis(spec.n_objects))
}

/// Spiky system size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpikySpec {
    pub q: usize,
}

impl SpikySpec {
    pub fn new(q: usize) -> Result<Self> {
        if q < 2 || !q.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "spiky q must be even and >= 2, got {q}"
            )));
        }
        Ok(SpikySpec { q })
    }

    /// Ring distance over the `q` observations.
    pub fn metric(&self) -> Metric {
        Metric::Ring { period: self.q as f64 }
    }
}

/// Two secrets over `q` observations on a ring: secret 0 is uniform on the
/// even observations, secret 1 on the odd ones. Observations are `0..q`.
pub fn spiky_system<T: Real>(spec: &SpikySpec) -> Result<System<T>> {
    let q = SpikySpec::new(spec.q)?.q;
    let p = 2.0 / q as f64;
    let rows = (0..2)
        .map(|s| (0..q).map(|o| if o % 2 == s { p } else { 0.0 }).collect())
        .collect();
    let objects = ObjectValues::from_1d((0..q).map(|o| T::of(o as f64)).collect())?;
    assemble(rows, objects)
}

/// Channel entries drawn uniformly from `[0, 1)` then rows normalized;
/// uniform prior.
pub fn random_system<T: Real>(n_secrets: usize, n_objects: usize, seed: u64) -> Result<System<T>> {
    if n_secrets == 0 || n_objects == 0 {
        return Err(Error::InvalidArgument(
            "random system needs at least one secret and object".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n_secrets)
        .map(|_| {
            let mut row: Vec<f64> = (0..n_objects).map(|_| rng.random::<f64>()).collect();
            if row.iter().all(|&v| v == 0.0) {
                row.fill(1.0);
            }
            normalize(&mut row);
            row
        })
        .collect();
    assemble(rows, ObjectValues::indices(n_objects))
}

/// Every `(secret, object)` pair equally likely.
pub fn uniform_system<T: Real>(n_secrets: usize, n_objects: usize) -> Result<System<T>> {
    if n_secrets == 0 || n_objects == 0 {
        return Err(Error::InvalidArgument(
            "uniform system needs at least one secret and object".into(),
        ));
    }
    let rows = vec![vec![1.0 / n_objects as f64; n_objects]; n_secrets];
    assemble(rows, ObjectValues::indices(n_objects))
}

/// Expected NN error on the spiky system after `n = x·q` examples.
///
/// An observation stays unseen with probability `a = e^{−x}`, and the NN
/// rule errs exactly when the nearest seen observation is at odd ring
/// distance, giving `a·(1 − a^q) / (1 + a²)`.
pub fn spiky_nn_error(x: f64, q: usize) -> f64 {
    let a = (-x).exp();
    a * (1.0 - a.powf(q as f64)) / (1.0 + a * a)
}

/// Expected frequentist error on the spiky system, `e^{−x} / 2`: unseen
/// observations fall back to one secret and are wrong half the time.
pub fn spiky_freq_error(x: f64) -> f64 {
    0.5 * (-x).exp()
}

/// Rough frequentist error after `n` examples: an observation is unseen
/// with probability `(1 − 1/|O|)^n`, in which case the rule guesses.
pub fn frequentist_approximation(r_star: f64, r_pi: f64, n_objects: usize, n: u64) -> f64 {
    let unseen = (1.0 - 1.0 / n_objects as f64).powf(n as f64);
    r_star * (1.0 - unseen) + r_pi * unseen
}

/// Smallest `n` at which the approximation weighs the Bayes risk at least
/// as much as random guessing, `−ln 2 / ln(1 − 1/|O|)`.
pub fn frequentist_crossover(n_objects: usize) -> f64 {
    -std::f64::consts::LN_2 / (1.0 - 1.0 / n_objects as f64).ln()
}
