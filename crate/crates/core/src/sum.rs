//! Pairwise summation helpers.

use num_traits::Float;

const BLOCK: usize = 32;

/// Sums `values` by recursive halving; error grows with `log n` instead of `n`.
pub fn pairwise_sum<T: Float>(values: &[T]) -> T {
    if values.len() <= BLOCK {
        return values.iter().fold(T::zero(), |acc, &x| acc + x);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of a mapped sequence without materializing the full mapping.
pub fn pairwise_sum_by<T: Float>(n: usize, f: impl Fn(usize) -> T) -> T {
    fn go<T: Float>(lo: usize, hi: usize, f: &impl Fn(usize) -> T) -> T {
        if hi - lo <= BLOCK {
            return (lo..hi).fold(T::zero(), |acc, i| acc + f(i));
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, n, &f)
}

/// Complete binary tree of partial sums over a fixed number of leaves.
///
/// Every internal node is `left + right`, so after any sequence of leaf
/// updates the root is bit-identical to a tree freshly built from the same
/// leaves.
#[derive(Clone, Debug)]
pub struct PairwiseTree {
    width: usize,
    nodes: Vec<f64>,
}

impl PairwiseTree {
    pub fn new(leaves: usize) -> Self {
        let width = leaves.max(1).next_power_of_two();
        PairwiseTree {
            width,
            nodes: vec![0.0; 2 * width],
        }
    }

    pub fn from_leaves(leaves: &[f64]) -> Self {
        let mut tree = PairwiseTree::new(leaves.len());
        tree.nodes[tree.width..tree.width + leaves.len()].copy_from_slice(leaves);
        for i in (1..tree.width).rev() {
            tree.nodes[i] = tree.nodes[2 * i] + tree.nodes[2 * i + 1];
        }
        tree
    }

    #[inline]
    pub fn leaf(&self, i: usize) -> f64 {
        self.nodes[self.width + i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        let mut at = self.width + i;
        if self.nodes[at] == value {
            return;
        }
        self.nodes[at] = value;
        while at > 1 {
            at /= 2;
            self.nodes[at] = self.nodes[2 * at] + self.nodes[2 * at + 1];
        }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }
}
