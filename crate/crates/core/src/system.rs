//! Systems: a prior over secrets plus a row-stochastic channel matrix.
//!
//! A system `(π, C)` induces the joint distribution `μ(s, o) = π(s)·C[s][o]`
//! on the example space. Observations are carried as real coordinate vectors
//! even for discrete systems, so the same estimators serve discrete channels
//! and continuous mechanisms.

use std::fmt;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::sum::pairwise_sum;

/// Prior probability of each secret id.
#[derive(Clone, Debug, PartialEq)]
pub struct Prior<T> {
    probs: Vec<T>,
}

impl<T: Real> Prior<T> {
    /// Builds a prior, rejecting negative entries and sums off 1.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        let prior = Prior { probs };
        let v = prior.violations();
        if v.is_empty() {
            Ok(prior)
        } else {
            Err(Error::InvalidSystem(v))
        }
    }

    /// Builds a prior without checking it. Use [`validate`] to inspect it.
    pub fn new_unchecked(probs: Vec<T>) -> Self {
        Prior { probs }
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("prior"));
        }
        Ok(Prior {
            probs: vec![T::one() / T::of(n as f64); n],
        })
    }

    /// Normalizes nonnegative weights into a prior.
    pub fn from_weights(weights: &[T]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("prior"));
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= T::zero())) {
            return Err(Error::InvalidArgument(format!(
                "weight {i} is negative or not a number"
            )));
        }
        let total = pairwise_sum(weights);
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::InvalidArgument("weights sum to zero".into()));
        }
        Prior::new(weights.iter().map(|&w| w / total).collect())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    #[inline]
    pub fn get(&self, secret: usize) -> T {
        self.probs[secret]
    }

    /// Secret with the largest prior; ties go to the smallest id.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (s, &p) in self.probs.iter().enumerate() {
            match best {
                Some(b) if self.probs[b] >= p => {}
                _ => best = Some(s),
            }
        }
        best
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.probs.is_empty() {
            out.push(Violation::EmptyPrior);
            return out;
        }
        for (s, &p) in self.probs.iter().enumerate() {
            if !p.is_finite() {
                out.push(Violation::PriorNotFinite { secret: s });
            } else if p < T::zero() {
                out.push(Violation::PriorNegative {
                    secret: s,
                    value: p.to_f64_lossless(),
                });
            }
        }
        let sum = pairwise_sum(&self.probs).to_f64_lossless();
        if (sum - 1.0).abs() > T::STOCHASTIC_TOL {
            out.push(Violation::PriorSum { sum });
        }
        out
    }
}

/// `|S| × |O|` matrix of conditional probabilities `P(o | s)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> ChannelMatrix<T> {
    /// Builds a channel from row-major data and checks every row is stochastic.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        let c = ChannelMatrix::new_unchecked(rows, cols, data)?;
        let v = c.violations();
        if v.is_empty() {
            Ok(c)
        } else {
            Err(Error::InvalidSystem(v))
        }
    }

    /// Checks only the shape.
    pub fn new_unchecked(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("channel matrix"));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} channel",
                data.len()
            )));
        }
        Ok(ChannelMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::Shape(format!(
                "row {bad} has {} columns, expected {m}",
                rows[bad].len()
            )));
        }
        ChannelMatrix::new(n, m, rows.into_iter().flatten().collect())
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = T::one();
        }
        ChannelMatrix::new(n, n, data)
    }

    pub fn n_secrets(&self) -> usize {
        self.rows
    }

    pub fn n_objects(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[T] {
        &self.data[s * self.cols..(s + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, s: usize, o: usize) -> T {
        self.data[s * self.cols + o]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for s in 0..self.rows {
            let row = self.row(s);
            let mut finite = true;
            for (o, &c) in row.iter().enumerate() {
                if !c.is_finite() {
                    finite = false;
                    out.push(Violation::EntryNotFinite { row: s, column: o });
                } else if c < T::zero() {
                    out.push(Violation::EntryNegative {
                        row: s,
                        column: o,
                        value: c.to_f64_lossless(),
                    });
                }
            }
            if finite {
                let sum = pairwise_sum(row).to_f64_lossless();
                if (sum - 1.0).abs() > T::STOCHASTIC_TOL {
                    out.push(Violation::RowSum { row: s, sum });
                }
            }
        }
        out
    }
}

/// Coordinates of every channel column, `dim` values per column.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectValues<T> {
    dim: usize,
    coords: Vec<T>,
}

impl<T: Real> ObjectValues<T> {
    pub fn new(dim: usize, coords: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("object dimension must be >= 1".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} coordinates is not a multiple of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("object coordinates must be finite".into()));
        }
        Ok(ObjectValues { dim, coords })
    }

    /// Column `o` sits at the 1-d coordinate `o`.
    pub fn indices(n: usize) -> Self {
        ObjectValues {
            dim: 1,
            coords: (0..n).map(|o| T::of(o as f64)).collect(),
        }
    }

    pub fn from_1d(values: Vec<T>) -> Result<Self> {
        ObjectValues::new(1, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn get(&self, o: usize) -> &[T] {
        &self.coords[o * self.dim..(o + 1) * self.dim]
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }
}

/// A prior and channel, with coordinates for each observation.
#[derive(Clone, Debug, PartialEq)]
pub struct System<T> {
    prior: Prior<T>,
    channel: ChannelMatrix<T>,
    objects: ObjectValues<T>,
}

impl<T: Real> System<T> {
    /// Observation coordinates default to the column index.
    pub fn new(prior: Prior<T>, channel: ChannelMatrix<T>) -> Result<Self> {
        let objects = ObjectValues::indices(channel.n_objects());
        System::with_objects(prior, channel, objects)
    }

    /// Checks shapes only; stochasticity is reported by [`validate`].
    pub fn with_objects(prior: Prior<T>, channel: ChannelMatrix<T>, objects: ObjectValues<T>) -> Result<Self> {
        if prior.len() != channel.n_secrets() {
            return Err(Error::Shape(format!(
                "prior has {} entries but channel has {} rows",
                prior.len(),
                channel.n_secrets()
            )));
        }
        if objects.len() != channel.n_objects() {
            return Err(Error::Shape(format!(
                "{} object values for {} channel columns",
                objects.len(),
                channel.n_objects()
            )));
        }
        Ok(System {
            prior,
            channel,
            objects,
        })
    }

    pub fn prior(&self) -> &Prior<T> {
        &self.prior
    }

    pub fn channel(&self) -> &ChannelMatrix<T> {
        &self.channel
    }

    pub fn objects(&self) -> &ObjectValues<T> {
        &self.objects
    }

    pub fn n_secrets(&self) -> usize {
        self.prior.len()
    }

    pub fn n_objects(&self) -> usize {
        self.channel.n_objects()
    }

    /// Joint probability `μ(s, o) = π(s)·C[s][o]`.
    #[inline]
    pub fn joint(&self, s: usize, o: usize) -> T {
        self.prior.get(s) * self.channel.get(s, o)
    }

    /// Replaces the prior, keeping channel and coordinates.
    pub fn with_prior(self, prior: Prior<T>) -> Result<Self> {
        System::with_objects(prior, self.channel, self.objects)
    }

    /// Fails with every violation when the system is not well formed.
    pub fn check(&self) -> Result<()> {
        let v = validate(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSystem(v))
        }
    }

    pub fn into_parts(self) -> (Prior<T>, ChannelMatrix<T>, ObjectValues<T>) {
        (self.prior, self.channel, self.objects)
    }
}

/// One broken invariant, with the offending location and magnitude.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    EmptyPrior,
    PriorNegative { secret: usize, value: f64 },
    PriorNotFinite { secret: usize },
    PriorSum { sum: f64 },
    EntryNegative { row: usize, column: usize, value: f64 },
    EntryNotFinite { row: usize, column: usize },
    RowSum { row: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyPrior => write!(f, "prior is empty"),
            Violation::PriorNegative { secret, value } => {
                write!(f, "prior[{secret}] = {value} is negative")
            }
            Violation::PriorNotFinite { secret } => write!(f, "prior[{secret}] is not finite"),
            Violation::PriorSum { sum } => write!(f, "prior sums to {sum}"),
            Violation::EntryNegative { row, column, value } => {
                write!(f, "channel[{row}][{column}] = {value} is negative")
            }
            Violation::EntryNotFinite { row, column } => {
                write!(f, "channel[{row}][{column}] is not finite")
            }
            Violation::RowSum { row, sum } => write!(f, "channel row {row} sums to {sum}"),
        }
    }
}

/// Lists every violated invariant of `system`; empty when it is well formed.
pub fn validate<T: Real>(system: &System<T>) -> Vec<Violation> {
    let mut out = system.prior.violations();
    out.extend(system.channel.violations());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity3() -> System<f64> {
        System::new(Prior::uniform(3).unwrap(), ChannelMatrix::identity(3).unwrap()).unwrap()
    }

    #[test]
    fn valid_system_has_no_violations() {
        assert!(validate(&identity3()).is_empty());
    }

    #[test]
    fn scaled_row_is_one_violation() {
        let mut data = ChannelMatrix::<f64>::identity(3).unwrap().data().to_vec();
        data[4] *= 2.0;
        let channel = ChannelMatrix::new_unchecked(3, 3, data).unwrap();
        let sys = System::new(Prior::uniform(3).unwrap(), channel).unwrap();
        let v = validate(&sys);
        assert_eq!(v, vec![Violation::RowSum { row: 1, sum: 2.0 }]);
    }

    #[test]
    fn negative_prior_is_one_violation() {
        let prior = Prior::new_unchecked(vec![0.5, 0.7, -0.2]);
        let sys = System::new(prior, ChannelMatrix::identity(3).unwrap()).unwrap();
        let v = validate(&sys);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::PriorNegative { secret: 2, .. }));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let r = System::new(Prior::<f64>::uniform(2).unwrap(), ChannelMatrix::identity(3).unwrap());
        assert!(matches!(r, Err(Error::Shape(_))));
        let r = System::with_objects(
            Prior::<f64>::uniform(3).unwrap(),
            ChannelMatrix::identity(3).unwrap(),
            ObjectValues::indices(4),
        );
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn tolerance_admits_accumulation_error() {
        let p = Prior::new(vec![0.3, 0.3, 0.4 + 5e-10]);
        assert!(p.is_ok());
        let p = Prior::new(vec![0.3, 0.3, 0.4 + 5e-9]);
        assert!(p.is_err());
    }

    #[test]
    fn argmax_prefers_smallest_id() {
        let p = Prior::new(vec![0.25, 0.375, 0.375]).unwrap();
        assert_eq!(p.argmax(), Some(1));
    }

    #[test]
    fn f32_systems_validate() {
        let sys: System<f32> = System::new(Prior::uniform(7).unwrap(), ChannelMatrix::identity(7).unwrap()).unwrap();
        assert!(validate(&sys).is_empty());
    }
}
