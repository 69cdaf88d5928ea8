//! Incremental estimators evaluated on a fixed query set.
//!
//! An [`EvalSet`] is a list of distinct query observations, each carrying a
//! weight per secret. A prediction `s` at a query earns that query's weight
//! for `s`; the error is `1 − total gain / normalizer`. Hold-out sets use
//! example counts (normalizer `m`), exact sets use the joint probabilities of
//! a known system (normalizer 1).
//!
//! Gains live in a [`PairwiseTree`], so the error after any sequence of
//! incremental updates is bit-identical to recomputing every prediction from
//! scratch on the same training prefix.

use std::collections::HashMap;

use smallvec::SmallVec;

use super::index::{check_observation, key_of, secret_id, Key, NeighborIndex};
use super::kdtree::{KdTree, NONE};
use super::metric::Metric;
use super::neighbors::{add_count, argmax_counts, vote, Counts, NeighborList};
use super::trace::EstimateTrace;
use super::EstimatorKind;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::measures::clamp01;
use crate::num::Real;
use crate::sum::PairwiseTree;
use crate::system::System;

type Weights = SmallVec<[(u32, f64); 2]>;

/// Distinct query observations with per-secret weights.
#[derive(Clone, Debug)]
pub struct EvalSet {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<Weights>,
    normalizer: f64,
}

impl EvalSet {
    fn build(dim: usize, normalizer: f64, items: impl Iterator<Item = (Vec<f64>, u32, f64)>) -> Self {
        let mut keys: HashMap<Key, usize> = HashMap::new();
        let mut coords = Vec::new();
        let mut weights: Vec<Weights> = Vec::new();
        for (obs, s, w) in items {
            let q = *keys.entry(key_of(&obs)).or_insert_with(|| {
                coords.extend_from_slice(&obs);
                weights.push(Weights::new());
                weights.len() - 1
            });
            match weights[q].iter_mut().find(|(t, _)| *t == s) {
                Some((_, v)) => *v += w,
                None => weights[q].push((s, w)),
            }
        }
        for w in &mut weights {
            w.sort_by_key(|&(s, _)| s);
        }
        EvalSet {
            dim,
            coords,
            weights,
            normalizer,
        }
    }

    /// Hold-out evaluation: each example weighs 1 for its own secret.
    pub fn holdout<T: Real>(data: &Dataset<T>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("hold-out set"));
        }
        let mut items = Vec::with_capacity(data.len());
        for ex in data.iter() {
            let obs: Vec<f64> = ex.observation.iter().map(|x| x.to_f64_lossless()).collect();
            check_observation(&obs, data.dim())?;
            items.push((obs, secret_id(ex.secret)?, 1.0));
        }
        Ok(EvalSet::build(data.dim(), data.len() as f64, items.into_iter()))
    }

    /// Exact evaluation over every observation of a known system, weighted
    /// by the joint distribution.
    pub fn exact<T: Real>(system: &System<T>) -> Result<Self> {
        system.check()?;
        let objects = system.objects();
        let mut items = Vec::new();
        for o in 0..system.n_objects() {
            let obs: Vec<f64> = objects.get(o).iter().map(|x| x.to_f64_lossless()).collect();
            for s in 0..system.n_secrets() {
                let w = system.joint(s, o).to_f64_lossless();
                if w > 0.0 {
                    items.push((obs.clone(), s as u32, w));
                }
            }
        }
        Ok(EvalSet::build(objects.dim(), 1.0, items.into_iter()))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    #[inline]
    pub fn query(&self, q: usize) -> &[f64] {
        &self.coords[q * self.dim..(q + 1) * self.dim]
    }

    /// Weight earned by predicting `secret` at query `q`.
    #[inline]
    pub fn gain(&self, q: usize, secret: usize) -> f64 {
        let w = &self.weights[q];
        match w.binary_search_by_key(&(secret as u32), |&(s, _)| s) {
            Ok(i) => w[i].1,
            Err(_) => 0.0,
        }
    }

    fn error_from(&self, gains: &PairwiseTree) -> f64 {
        clamp01(1.0 - gains.total() / self.normalizer)
    }

    /// Error of an arbitrary classifier over this set.
    pub fn error_of(&self, mut predict: impl FnMut(&[f64]) -> Result<usize>) -> Result<f64> {
        let mut gains = Vec::with_capacity(self.len());
        for q in 0..self.len() {
            gains.push(self.gain(q, predict(self.query(q))?));
        }
        Ok(self.error_from(&PairwiseTree::from_leaves(&gains)))
    }

    /// Error of rule `kind` trained on everything in `index`, computed from
    /// scratch.
    pub fn batch_error(&self, index: &NeighborIndex, kind: EstimatorKind) -> Result<f64> {
        if index.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: index.dim(),
            });
        }
        self.error_of(|o| index.predict(kind, o))
    }
}

/// An incremental learner evaluated on a fixed [`EvalSet`].
pub trait Estimator {
    fn kind(&self) -> EstimatorKind;

    /// Trains on one more example and updates the affected predictions.
    fn add_example(&mut self, secret: usize, observation: &[f64]) -> Result<()>;

    /// Number of training examples so far.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Current error on the evaluation set; 1 before any training.
    fn error(&self) -> f64;

    /// Current prediction at query `q`.
    fn prediction(&self, q: usize) -> Option<usize>;
}

/// Builds the incremental estimator for `kind`. `expected_n` sizes the
/// neighbor lists of the k-NN rules; exceeding it only costs a rebuild.
pub fn estimator<'a>(
    kind: EstimatorKind,
    eval: &'a EvalSet,
    metric: Metric,
    expected_n: usize,
) -> Box<dyn Estimator + Send + 'a> {
    match kind {
        EstimatorKind::Frequentist => Box::new(FrequentistEstimator::new(eval)),
        _ => Box::new(KnnEstimator::new(kind, eval, metric, expected_n)),
    }
}

const UNSET: u32 = u32::MAX;

/// Frequentist rule: joint-count argmax at seen observations, empirical
/// prior argmax elsewhere.
pub struct FrequentistEstimator<'a> {
    eval: &'a EvalSet,
    queries: HashMap<Key, u32>,
    counts: Vec<Counts>,
    unseen: Vec<u32>,
    unseen_pos: Vec<u32>,
    secret_counts: Vec<u64>,
    prior_argmax: u32,
    preds: Vec<u32>,
    gains: PairwiseTree,
    n: usize,
}

impl<'a> FrequentistEstimator<'a> {
    pub fn new(eval: &'a EvalSet) -> Self {
        let q = eval.len();
        FrequentistEstimator {
            eval,
            queries: (0..q).map(|i| (key_of(eval.query(i)), i as u32)).collect(),
            counts: vec![Counts::new(); q],
            unseen: (0..q as u32).collect(),
            unseen_pos: (0..q as u32).collect(),
            secret_counts: Vec::new(),
            prior_argmax: UNSET,
            preds: vec![UNSET; q],
            gains: PairwiseTree::new(q),
            n: 0,
        }
    }

    fn set_pred(&mut self, q: usize, s: u32) {
        if self.preds[q] != s {
            self.preds[q] = s;
            self.gains.set(q, self.eval.gain(q, s as usize));
        }
    }
}

impl Estimator for FrequentistEstimator<'_> {
    fn kind(&self) -> EstimatorKind {
        EstimatorKind::Frequentist
    }

    fn add_example(&mut self, secret: usize, obs: &[f64]) -> Result<()> {
        check_observation(obs, self.eval.dim())?;
        let s = secret_id(secret)?;
        self.n += 1;

        if self.secret_counts.len() <= secret {
            self.secret_counts.resize(secret + 1, 0);
        }
        self.secret_counts[secret] += 1;
        let old = self.prior_argmax;
        let keep = old != UNSET && {
            let (bc, c) = (self.secret_counts[old as usize], self.secret_counts[secret]);
            bc > c || (bc == c && old < s)
        };
        if !keep {
            self.prior_argmax = s;
        }

        if let Some(&q) = self.queries.get(&key_of(obs)) {
            let q = q as usize;
            add_count(&mut self.counts[q], s, 1);
            let pos = self.unseen_pos[q];
            if pos != UNSET {
                let last = *self.unseen.last().unwrap();
                self.unseen.swap_remove(pos as usize);
                if last as usize != q {
                    self.unseen_pos[last as usize] = pos;
                }
                self.unseen_pos[q] = UNSET;
            }
            let p = argmax_counts(self.counts[q].iter().copied()).unwrap();
            self.set_pred(q, p);
        }
        if self.prior_argmax != old {
            let p = self.prior_argmax;
            for i in 0..self.unseen.len() {
                let q = self.unseen[i] as usize;
                self.set_pred(q, p);
            }
        }
        Ok(())
    }

    fn len(&self) -> usize {
        self.n
    }

    fn error(&self) -> f64 {
        self.eval.error_from(&self.gains)
    }

    fn prediction(&self, q: usize) -> Option<usize> {
        (self.preds[q] != UNSET).then_some(self.preds[q] as usize)
    }
}

/// NN and k_n-NN rules.
///
/// Every query keeps its nearest training groups up to a capacity of at
/// least the largest `k` in use. A new training point can only change the
/// queries whose current neighbor radius reaches it; those are found through
/// a k-d tree over the queries whose nodes carry the largest radius below
/// them.
pub struct KnnEstimator<'a> {
    kind: EstimatorKind,
    eval: &'a EvalSet,
    metric: Metric,
    tree: KdTree,
    /// Largest neighbor radius of the queries below each node.
    node_max: Vec<f64>,
    lists: Vec<NeighborList>,
    capacity: u64,
    k: u64,
    train: NeighborIndex,
    preds: Vec<u32>,
    gains: PairwiseTree,
    touched: Vec<u32>,
    stack: Vec<u32>,
}

impl<'a> KnnEstimator<'a> {
    pub fn new(kind: EstimatorKind, eval: &'a EvalSet, metric: Metric, expected_n: usize) -> Self {
        assert!(kind != EstimatorKind::Frequentist, "frequentist is not a neighbor rule");
        let q = eval.len();
        let tree = KdTree::build(eval.dim(), &eval.coords);
        KnnEstimator {
            kind,
            eval,
            metric,
            node_max: vec![f64::INFINITY; tree.nodes.len()],
            tree,
            lists: vec![NeighborList::default(); q],
            capacity: kind.k(expected_n.max(1)) as u64,
            k: 1,
            train: NeighborIndex::new(eval.dim(), metric).expect("positive dimension"),
            preds: vec![UNSET; q],
            gains: PairwiseTree::new(q),
            touched: Vec::new(),
            stack: Vec::new(),
        }
    }

    fn update_pred(&mut self, q: usize) {
        let s = vote(&self.lists[q].groups, self.k).unwrap_or(UNSET);
        if self.preds[q] != s {
            self.preds[q] = s;
            self.gains.set(q, self.eval.gain(q, s as usize));
        }
    }

    fn leaf_max(&self, node: usize) -> f64 {
        let n = &self.tree.nodes[node];
        (n.start..n.end)
            .map(|pos| self.lists[self.tree.ids[pos as usize] as usize].radius2(self.capacity))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Recomputes node radii from a leaf up, stopping once nothing changes.
    fn refresh_up(&mut self, leaf: usize) {
        let mut node = leaf;
        let mut value = self.leaf_max(leaf);
        loop {
            if self.node_max[node] == value {
                return;
            }
            self.node_max[node] = value;
            let parent = self.tree.nodes[node].parent;
            if parent == NONE {
                return;
            }
            node = parent as usize;
            let n = &self.tree.nodes[node];
            value = self.node_max[n.left as usize].max(self.node_max[n.right as usize]);
        }
    }

    fn refresh_all(&mut self) {
        for node in (0..self.tree.nodes.len()).rev() {
            let n = &self.tree.nodes[node];
            self.node_max[node] = if n.is_leaf() {
                self.leaf_max(node)
            } else {
                self.node_max[n.left as usize].max(self.node_max[n.right as usize])
            };
        }
    }

    /// Rebuilds every neighbor list at a larger capacity from the stored
    /// training set.
    fn grow(&mut self, capacity: u64) {
        self.capacity = capacity;
        for q in 0..self.lists.len() {
            self.lists[q] = self.train.neighbors(self.eval.query(q), capacity);
        }
        self.refresh_all();
    }
}

impl Estimator for KnnEstimator<'_> {
    fn kind(&self) -> EstimatorKind {
        self.kind
    }

    fn add_example(&mut self, secret: usize, obs: &[f64]) -> Result<()> {
        self.train.add(secret, obs)?;
        let s = secret as u32;
        let new_k = self.kind.k(self.train.len()) as u64;

        if new_k > self.capacity {
            self.grow(new_k.max(2 * self.capacity));
            self.k = new_k;
            for q in 0..self.lists.len() {
                self.update_pred(q);
            }
            return Ok(());
        }

        let recompute_all = new_k != self.k;
        self.k = new_k;
        self.touched.clear();
        self.stack.clear();
        if !self.tree.nodes.is_empty() {
            self.stack.push(0);
        }
        while let Some(node) = self.stack.pop() {
            let node = node as usize;
            if self.tree.box_dist2(node, obs, &self.metric) > self.node_max[node] {
                continue;
            }
            let n = &self.tree.nodes[node];
            let (start, end) = (n.start as usize, n.end as usize);
            if !n.is_leaf() {
                let (l, r) = (n.left, n.right);
                self.stack.push(l);
                self.stack.push(r);
                continue;
            }
            let mut hit = false;
            for pos in start..end {
                let q = self.tree.ids[pos] as usize;
                let d2 = self.metric.dist2(self.eval.query(q), obs);
                if d2 <= self.lists[q].radius2(self.capacity) {
                    self.lists[q].insert(d2, &[(s, 1)], self.capacity);
                    hit = true;
                    if !recompute_all {
                        self.update_pred(q);
                    }
                }
            }
            if hit {
                self.touched.push(node as u32);
            }
        }
        for i in 0..self.touched.len() {
            let leaf = self.touched[i] as usize;
            self.refresh_up(leaf);
        }
        if recompute_all {
            for q in 0..self.lists.len() {
                self.update_pred(q);
            }
        }
        Ok(())
    }

    fn len(&self) -> usize {
        self.train.len()
    }

    fn error(&self) -> f64 {
        self.eval.error_from(&self.gains)
    }

    fn prediction(&self, q: usize) -> Option<usize> {
        (self.preds[q] != UNSET).then_some(self.preds[q] as usize)
    }
}

/// Trains `kind` on `train` one example at a time, recording the error on
/// `eval` after every example.
pub fn forward_trace<T: Real>(
    train: &Dataset<T>,
    eval: &EvalSet,
    kind: EstimatorKind,
    metric: Metric,
) -> Result<EstimateTrace> {
    forward_trace_at(train, eval, kind, metric, |_| true)
}

/// Like [`forward_trace`], recording only the `n` for which `record(n)` holds.
pub fn forward_trace_at<T: Real>(
    train: &Dataset<T>,
    eval: &EvalSet,
    kind: EstimatorKind,
    metric: Metric,
    mut record: impl FnMut(usize) -> bool,
) -> Result<EstimateTrace> {
    if train.dim() != eval.dim() {
        return Err(Error::Dimension {
            expected: eval.dim(),
            actual: train.dim(),
        });
    }
    let mut est = estimator(kind, eval, metric, train.len());
    let mut trace = EstimateTrace::new(kind);
    let mut obs = vec![0.0; train.dim()];
    for (i, ex) in train.iter().enumerate() {
        for (o, x) in obs.iter_mut().zip(ex.observation) {
            *o = x.to_f64_lossless();
        }
        est.add_example(ex.secret, &obs)?;
        if record(i + 1) {
            trace.push(i + 1, est.error())?;
        }
    }
    Ok(trace)
}

/// Hold-out trace: error on `holdout` after each of the first `n` training
/// examples, `n = 1..=|train|`.
pub fn forward_estimate<T: Real>(
    train: &Dataset<T>,
    holdout: &Dataset<T>,
    kind: EstimatorKind,
    metric: Metric,
) -> Result<EstimateTrace> {
    forward_trace(train, &EvalSet::holdout(holdout)?, kind, metric)
}

/// Expected error of rule `kind` trained on `index`, evaluated exactly over
/// every observation of `system`.
pub fn exact_estimate<T: Real>(index: &NeighborIndex, system: &System<T>, kind: EstimatorKind) -> Result<f64> {
    EvalSet::exact(system)?.batch_error(index, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::sample;
    use crate::synth;

    fn check_equal_to_batch(train: &Dataset<f64>, eval: &EvalSet, metric: Metric) {
        for kind in EstimatorKind::ALL {
            let mut est = estimator(kind, eval, metric, train.len());
            let mut index = NeighborIndex::new(train.dim(), metric).unwrap();
            for (i, ex) in train.iter().enumerate() {
                est.add_example(ex.secret, ex.observation).unwrap();
                index.add(ex.secret, ex.observation).unwrap();
                let n = i + 1;
                if n <= 12 || n % 37 == 0 || n == train.len() {
                    let batch = eval.batch_error(&index, kind).unwrap();
                    assert_eq!(est.error().to_bits(), batch.to_bits(), "{kind:?} at n={n}");
                }
            }
        }
    }

    #[test]
    fn incremental_equals_batch_on_discrete_system() {
        let sys = synth::random_system::<f64>(6, 15, 3).unwrap();
        let train = sample(&sys, 400, 4).unwrap();
        check_equal_to_batch(&train, &EvalSet::exact(&sys).unwrap(), Metric::Euclidean);
        let holdout = sample(&sys, 50, 5).unwrap();
        check_equal_to_batch(&train, &EvalSet::holdout(&holdout).unwrap(), Metric::Euclidean);
    }

    #[test]
    fn incremental_equals_batch_on_ring() {
        let sys = synth::spiky_system::<f64>(&synth::SpikySpec::new(40).unwrap()).unwrap();
        let train = sample(&sys, 300, 9).unwrap();
        check_equal_to_batch(&train, &EvalSet::exact(&sys).unwrap(), Metric::ring(40.0).unwrap());
    }

    #[test]
    fn incremental_equals_batch_when_capacity_grows() {
        let sys = synth::random_system::<f64>(4, 30, 8).unwrap();
        let train = sample(&sys, 600, 1).unwrap();
        let eval = EvalSet::exact(&sys).unwrap();
        let mut est = KnnEstimator::new(EstimatorKind::KnnLn, &eval, Metric::Euclidean, 1);
        let mut index = NeighborIndex::new(1, Metric::Euclidean).unwrap();
        for ex in train.iter() {
            est.add_example(ex.secret, ex.observation).unwrap();
            index.add(ex.secret, ex.observation).unwrap();
        }
        assert!(est.capacity >= 6);
        let batch = eval.batch_error(&index, EstimatorKind::KnnLn).unwrap();
        assert_eq!(est.error().to_bits(), batch.to_bits());
    }

    #[test]
    fn continuous_holdout_in_two_dimensions() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut train = Dataset::<f64>::new(2).unwrap();
        let mut hold = Dataset::<f64>::new(2).unwrap();
        for i in 0..700 {
            let s = rng.random_range(0..3usize);
            let p = [s as f64 + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if i < 500 { &mut train } else { &mut hold }.push(s, &p).unwrap();
        }
        check_equal_to_batch(&train, &EvalSet::holdout(&hold).unwrap(), Metric::Euclidean);
    }

    #[test]
    fn error_is_one_before_training() {
        let sys = synth::uniform_system::<f64>(3, 3).unwrap();
        let eval = EvalSet::exact(&sys).unwrap();
        for kind in EstimatorKind::ALL {
            assert_eq!(estimator(kind, &eval, Metric::Euclidean, 10).error(), 1.0);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let sys = synth::uniform_system::<f64>(3, 3).unwrap();
        let eval = EvalSet::exact(&sys).unwrap();
        let train = Dataset::<f64>::from_examples(
            2,
            [crate::dataset::Example {
                secret: 0,
                observation: vec![0.0, 1.0],
            }],
        )
        .unwrap();
        assert!(matches!(
            forward_trace(&train, &eval, EstimatorKind::Nn, Metric::Euclidean),
            Err(Error::Dimension { .. })
        ));
    }
}
