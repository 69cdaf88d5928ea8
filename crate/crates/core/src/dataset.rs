//! Examples, datasets, seeded sampling from a system, and hold-out splits.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::system::System;

/// One `(secret, observation)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Example<T> {
    pub secret: usize,
    pub observation: Vec<T>,
}

/// Borrowed view of one example in a [`Dataset`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExampleRef<'a, T> {
    pub secret: usize,
    pub observation: &'a [T],
}

/// Where a dataset came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata {
    pub source: String,
    pub seed: Option<u64>,
}

/// Ordered multiset of examples sharing one observation dimension.
///
/// Observations are stored contiguously, `dim` values per example.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    dim: usize,
    secrets: Vec<usize>,
    coords: Vec<T>,
    pub metadata: Metadata,
}

impl<T: Real> Dataset<T> {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("observation dimension must be >= 1".into()));
        }
        Ok(Dataset {
            dim,
            secrets: Vec::new(),
            coords: Vec::new(),
            metadata: Metadata::default(),
        })
    }

    pub fn with_capacity(dim: usize, n: usize) -> Result<Self> {
        let mut d = Dataset::new(dim)?;
        d.secrets.reserve(n);
        d.coords.reserve(n * dim);
        Ok(d)
    }

    pub fn from_examples(dim: usize, examples: impl IntoIterator<Item = Example<T>>) -> Result<Self> {
        let mut d = Dataset::new(dim)?;
        for ex in examples {
            d.push(ex.secret, &ex.observation)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, secret: usize, observation: &[T]) -> Result<()> {
        if observation.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: observation.len(),
            });
        }
        self.secrets.push(secret);
        self.coords.extend_from_slice(observation);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.secrets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.secrets.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> ExampleRef<'_, T> {
        ExampleRef {
            secret: self.secrets[i],
            observation: &self.coords[i * self.dim..(i + 1) * self.dim],
        }
    }

    pub fn secrets(&self) -> &[usize] {
        &self.secrets
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = ExampleRef<'_, T>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Copies of the examples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut out = Dataset {
            dim: self.dim,
            secrets: Vec::with_capacity(indices.len()),
            coords: Vec::with_capacity(indices.len() * self.dim),
            metadata: self.metadata.clone(),
        };
        for &i in indices {
            let ex = self.get(i);
            out.secrets.push(ex.secret);
            out.coords.extend_from_slice(ex.observation);
        }
        out
    }

    /// First `n` examples.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Dataset {
            dim: self.dim,
            secrets: self.secrets[..n].to_vec(),
            coords: self.coords[..n * self.dim].to_vec(),
            metadata: self.metadata.clone(),
        }
    }

    /// Largest secret id plus one; zero when empty.
    pub fn secret_bound(&self) -> usize {
        self.secrets.iter().max().map_or(0, |m| m + 1)
    }

    /// Checks every secret id is below `n_secrets`.
    pub fn check_secrets(&self, n_secrets: usize) -> Result<()> {
        match self.secrets.iter().find(|&&s| s >= n_secrets) {
            Some(&secret) => Err(Error::SecretOutOfRange { secret, n_secrets }),
            None => Ok(()),
        }
    }

    /// Observations widened to `f64`, flattened.
    pub fn coords_f64(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.to_f64_lossless()).collect()
    }
}

/// Inverse-CDF sampler over a system's prior and channel rows.
///
/// Cumulative sums are kept in `f64` regardless of the scalar type.
pub struct Sampler<'a, T> {
    system: &'a System<T>,
    prior_cdf: Vec<f64>,
    row_cdfs: Vec<f64>,
}

impl<'a, T: Real> Sampler<'a, T> {
    pub fn new(system: &'a System<T>) -> Result<Self> {
        system.check()?;
        let prior_cdf = cumulative(system.prior().probs().iter().map(|p| p.to_f64_lossless()));
        let channel = system.channel();
        let mut row_cdfs = Vec::with_capacity(channel.n_secrets() * channel.n_objects());
        for s in 0..channel.n_secrets() {
            row_cdfs.extend(cumulative(channel.row(s).iter().map(|c| c.to_f64_lossless())));
        }
        Ok(Sampler {
            system,
            prior_cdf,
            row_cdfs,
        })
    }

    pub fn system(&self) -> &'a System<T> {
        self.system
    }

    pub fn draw_secret<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        draw(&self.prior_cdf, rng)
    }

    /// Column index of an observation for `secret`.
    pub fn draw_object<R: Rng + ?Sized>(&self, secret: usize, rng: &mut R) -> usize {
        let m = self.system.n_objects();
        draw(&self.row_cdfs[secret * m..(secret + 1) * m], rng)
    }

    /// `(secret, column)` drawn from the joint distribution.
    pub fn draw_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let s = self.draw_secret(rng);
        (s, self.draw_object(s, rng))
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, out: &mut Dataset<T>) -> Result<()> {
        for _ in 0..n {
            let (s, o) = self.draw_pair(rng);
            out.push(s, self.system.objects().get(o))?;
        }
        Ok(())
    }
}

fn cumulative(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

fn draw<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let total = *cdf.last().expect("nonempty cdf");
    let u = rng.random::<f64>() * total;
    // First index whose cumulative mass exceeds u; zero-mass entries are skipped.
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Draws `n` examples from `system` with a generator seeded by `seed`.
pub fn sample<T: Real>(system: &System<T>, n: usize, seed: u64) -> Result<Dataset<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = sample_with(system, n, &mut rng)?;
    out.metadata.seed = Some(seed);
    Ok(out)
}

/// Like [`sample`], drawing from a caller-supplied generator.
pub fn sample_with<T: Real, R: Rng + ?Sized>(system: &System<T>, n: usize, rng: &mut R) -> Result<Dataset<T>> {
    let sampler = Sampler::new(system)?;
    let mut out = Dataset::with_capacity(system.objects().dim(), n)?;
    sampler.sample_into(n, rng, &mut out)?;
    out.metadata.source = "sampled system".into();
    Ok(out)
}

/// Number of training examples for a split of `n` at `train_fraction`.
///
/// Rounds to nearest and keeps both parts nonempty when `n >= 2`.
pub fn train_size(n: usize, train_fraction: f64) -> usize {
    let k = (train_fraction * n as f64).round() as usize;
    if n >= 2 {
        k.clamp(1, n - 1)
    } else {
        n
    }
}

/// Random partition into `(train, holdout)`, both in shuffled order.
pub fn split<T: Real>(dataset: &Dataset<T>, train_fraction: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    split_with(dataset, train_fraction, &mut rng)
}

pub fn split_with<T: Real, R: Rng + ?Sized>(
    dataset: &Dataset<T>,
    train_fraction: f64,
    rng: &mut R,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(rng);
    let k = train_size(dataset.len(), train_fraction);
    Ok((dataset.select(&order[..k]), dataset.select(&order[k..])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{ChannelMatrix, Prior};

    fn identity(n: usize) -> System<f64> {
        System::new(Prior::uniform(n).unwrap(), ChannelMatrix::identity(n).unwrap()).unwrap()
    }

    #[test]
    fn zero_samples() {
        assert!(sample(&identity(3), 0, 1).unwrap().is_empty());
    }

    #[test]
    fn identity_channel_reveals_secret() {
        let d = sample(&identity(3), 500, 7).unwrap();
        for ex in d.iter() {
            assert_eq!(ex.observation, &[ex.secret as f64]);
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let a = sample(&identity(5), 100, 3).unwrap();
        let b = sample(&identity(5), 100, 3).unwrap();
        let c = sample(&identity(5), 100, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_mass_entries_never_drawn() {
        let ch = ChannelMatrix::from_rows(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let sys = System::new(Prior::new(vec![0.0, 1.0]).unwrap(), ch).unwrap();
        let d = sample(&sys, 1000, 11).unwrap();
        assert!(d.iter().all(|e| e.secret == 1 && e.observation == [2.0]));
    }

    #[test]
    fn split_sizes() {
        let d = sample(&identity(4), 100, 0).unwrap();
        let (a, b) = split(&d, 0.75, 1).unwrap();
        assert_eq!((a.len(), b.len()), (75, 25));
        let two = d.prefix(2);
        let (a, b) = split(&two, 0.5, 1).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
    }

    #[test]
    fn split_rejects_bad_input() {
        let d = Dataset::<f64>::new(1).unwrap();
        assert!(matches!(split(&d, 0.5, 0), Err(Error::Empty(_))));
        let d = sample(&identity(2), 10, 0).unwrap();
        assert!(split(&d, 1.0, 0).is_err());
        assert!(split(&d, 0.0, 0).is_err());
    }

    #[test]
    fn dimension_is_enforced() {
        let mut d = Dataset::<f64>::new(2).unwrap();
        assert!(matches!(
            d.push(0, &[1.0]),
            Err(Error::Dimension { expected: 2, actual: 1 })
        ));
    }
}
