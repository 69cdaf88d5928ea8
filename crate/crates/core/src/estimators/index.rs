use std::collections::HashMap;
use std::sync::OnceLock;

use smallvec::SmallVec;

use super::kdtree::{KdTree, Visitor};
use super::metric::Metric;
use super::neighbors::{add_count, argmax_counts, vote, Counts, NeighborList};
use super::EstimatorKind;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::num::Real;

pub(crate) type Key = SmallVec<[u64; 2]>;

/// Exact lookup key of an observation; `-0.0` and `0.0` coincide.
pub(crate) fn key_of(obs: &[f64]) -> Key {
    obs.iter().map(|x| x.key_bits()).collect()
}

pub(crate) fn check_observation(obs: &[f64], dim: usize) -> Result<()> {
    if obs.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            actual: obs.len(),
        });
    }
    if obs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("observation coordinates must be finite".into()));
    }
    Ok(())
}

pub(crate) fn secret_id(secret: usize) -> Result<u32> {
    u32::try_from(secret)
        .ok()
        .filter(|&s| s != u32::MAX)
        .ok_or(Error::InvalidArgument(format!("secret id {secret} is too large")))
}

/// Training examples bucketed by exact observation, with per-secret counts.
///
/// Observations are widened to `f64`. Nearest-neighbor queries use a k-d
/// tree over the buckets, built on first use after the last insertion.
#[derive(Debug)]
pub struct NeighborIndex {
    dim: usize,
    metric: Metric,
    keys: HashMap<Key, u32>,
    coords: Vec<f64>,
    counts: Vec<Counts>,
    secret_counts: Vec<u64>,
    prior_argmax: Option<u32>,
    n: usize,
    tree: OnceLock<KdTree>,
}

impl NeighborIndex {
    pub fn new(dim: usize, metric: Metric) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("observation dimension must be >= 1".into()));
        }
        Ok(NeighborIndex {
            dim,
            metric,
            keys: HashMap::new(),
            coords: Vec::new(),
            counts: Vec::new(),
            secret_counts: Vec::new(),
            prior_argmax: None,
            n: 0,
            tree: OnceLock::new(),
        })
    }

    pub fn from_dataset<T: Real>(data: &Dataset<T>, metric: Metric) -> Result<Self> {
        let mut index = NeighborIndex::new(data.dim(), metric)?;
        let mut obs = vec![0.0; data.dim()];
        for ex in data.iter() {
            for (o, x) in obs.iter_mut().zip(ex.observation) {
                *o = x.to_f64_lossless();
            }
            index.add(ex.secret, &obs)?;
        }
        Ok(index)
    }

    pub fn add(&mut self, secret: usize, obs: &[f64]) -> Result<()> {
        check_observation(obs, self.dim)?;
        let s = secret_id(secret)?;
        let key = key_of(obs);
        let b = match self.keys.get(&key) {
            Some(&b) => b as usize,
            None => {
                let b = self.counts.len();
                self.keys.insert(key, b as u32);
                self.coords.extend_from_slice(obs);
                self.counts.push(Counts::new());
                self.tree = OnceLock::new();
                b
            }
        };
        add_count(&mut self.counts[b], s, 1);
        if self.secret_counts.len() <= secret {
            self.secret_counts.resize(secret + 1, 0);
        }
        self.secret_counts[secret] += 1;
        let c = self.secret_counts[secret];
        self.prior_argmax = match self.prior_argmax {
            Some(b) if self.secret_counts[b as usize] > c || (self.secret_counts[b as usize] == c && b < s) => Some(b),
            _ => Some(s),
        };
        self.n += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Number of distinct observations.
    pub fn n_distinct(&self) -> usize {
        self.counts.len()
    }

    /// Training count of each secret id.
    pub fn secret_counts(&self) -> &[u64] {
        &self.secret_counts
    }

    /// `(secret, count)` pairs of the examples observed exactly at `obs`.
    pub fn counts_at(&self, obs: &[f64]) -> Option<Vec<(usize, u64)>> {
        let b = *self.keys.get(&key_of(obs))?;
        Some(
            self.counts[b as usize]
                .iter()
                .map(|&(s, c)| (s as usize, c as u64))
                .collect(),
        )
    }

    /// Most frequent training secret, smallest id on ties.
    pub fn prior_argmax(&self) -> Option<usize> {
        self.prior_argmax.map(|s| s as usize)
    }

    fn ready(&self, obs: &[f64]) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Empty("training set"));
        }
        check_observation(obs, self.dim)
    }

    /// Joint-count argmax at a seen observation, else the empirical prior
    /// argmax.
    pub fn frequentist_predict(&self, obs: &[f64]) -> Result<usize> {
        self.ready(obs)?;
        let s = match self.keys.get(&key_of(obs)) {
            Some(&b) => argmax_counts(self.counts[b as usize].iter().copied()),
            None => self.prior_argmax,
        };
        Ok(s.expect("nonempty index") as usize)
    }

    /// Majority over all training examples at minimal distance.
    pub fn nn_predict(&self, obs: &[f64]) -> Result<usize> {
        self.knn_predict(obs, 1)
    }

    /// k-NN with tie blocks straddling position `k` filled by their mode.
    pub fn knn_predict(&self, obs: &[f64], k: usize) -> Result<usize> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        self.ready(obs)?;
        let list = self.neighbors(obs, k as u64);
        Ok(vote(&list.groups, k as u64).expect("nonempty index") as usize)
    }

    /// Prediction of `kind` trained on everything in the index.
    pub fn predict(&self, kind: EstimatorKind, obs: &[f64]) -> Result<usize> {
        match kind {
            EstimatorKind::Frequentist => self.frequentist_predict(obs),
            _ => self.knn_predict(obs, kind.k(self.n.max(1))),
        }
    }

    pub(crate) fn neighbors(&self, obs: &[f64], capacity: u64) -> NeighborList {
        struct Collect<'a> {
            index: &'a NeighborIndex,
            list: NeighborList,
            capacity: u64,
        }
        impl Visitor for Collect<'_> {
            fn radius2(&self) -> f64 {
                self.list.radius2(self.capacity)
            }
            fn visit(&mut self, id: usize, d2: f64) {
                self.list.insert(d2, &self.index.counts[id], self.capacity);
            }
        }
        let tree = self.tree.get_or_init(|| KdTree::build(self.dim, &self.coords));
        let mut c = Collect {
            index: self,
            list: NeighborList::default(),
            capacity,
        };
        tree.search(obs, &self.metric, &mut c);
        c.list
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index(items: &[(usize, f64)]) -> NeighborIndex {
        let mut ix = NeighborIndex::new(1, Metric::Euclidean).unwrap();
        for &(s, x) in items {
            ix.add(s, &[x]).unwrap();
        }
        ix
    }

    #[test]
    fn frequentist_majority_and_fallback() {
        let ix = index(&[(1, 3.0), (1, 3.0), (0, 3.0)]);
        assert_eq!(ix.frequentist_predict(&[3.0]).unwrap(), 1);
        let ix = index(&[
            (0, 1.0),
            (0, 2.0),
            (0, 3.0),
            (0, 4.0),
            (0, 5.0),
            (0, 6.0),
            (0, 7.0),
            (1, 8.0),
            (1, 9.0),
            (1, 10.0),
        ]);
        assert_eq!(ix.frequentist_predict(&[100.0]).unwrap(), 0);
    }

    #[test]
    fn nn_examples() {
        let ix = index(&[(0, 0.0), (1, 10.0)]);
        assert_eq!(ix.nn_predict(&[1.0]).unwrap(), 0);
        let ix = index(&[(0, 1.0), (1, 3.0), (1, 3.0), (1, 1.0)]);
        assert_eq!(ix.nn_predict(&[2.0]).unwrap(), 1);
        let ix = index(&[(2, 4.0), (2, 4.0), (2, 4.0), (1, 4.0), (0, 4.0), (0, 4.5)]);
        assert_eq!(ix.nn_predict(&[4.0]).unwrap(), 2);
        assert_eq!(ix.frequentist_predict(&[4.0]).unwrap(), 2);
    }

    #[test]
    fn empty_and_bad_queries() {
        let ix = NeighborIndex::new(2, Metric::Euclidean).unwrap();
        assert!(matches!(ix.nn_predict(&[0.0, 0.0]), Err(Error::Empty(_))));
        let ix = index(&[(0, 0.0)]);
        assert!(matches!(ix.nn_predict(&[0.0, 1.0]), Err(Error::Dimension { .. })));
        assert!(ix.knn_predict(&[0.0], 0).is_err());
    }

    #[test]
    fn signed_zero_shares_bucket() {
        let ix = index(&[(0, 0.0), (1, -0.0), (1, -0.0)]);
        assert_eq!(ix.n_distinct(), 1);
        assert_eq!(ix.frequentist_predict(&[0.0]).unwrap(), 1);
    }

    #[test]
    fn knn_on_tie_example() {
        // Distances from 0: 1, 2, 2, 2, 5 with secrets 0, 1, 1, 2, 3.
        let ix = index(&[(0, 1.0), (1, 2.0), (1, -2.0), (2, 2.0), (3, 5.0)]);
        assert_eq!(ix.knn_predict(&[0.0], 2).unwrap(), 0);
        assert_eq!(ix.knn_predict(&[0.0], 3).unwrap(), 1);
        assert_eq!(ix.knn_predict(&[0.0], 5).unwrap(), 1);
    }
}
