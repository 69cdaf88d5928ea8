//! Neighbor groups and the voting rule shared by every nearest-neighbor
//! predictor.

use smallvec::SmallVec;

/// `(secret, count)` pairs, at most one entry per secret.
pub(crate) type Counts = SmallVec<[(u32, u32); 2]>;

pub(crate) fn add_count(counts: &mut Counts, secret: u32, n: u32) {
    match counts.iter_mut().find(|(s, _)| *s == secret) {
        Some((_, c)) => *c += n,
        None => counts.push((secret, n)),
    }
}

/// Secret with the largest count; ties go to the smallest id.
pub(crate) fn argmax_counts<C: Copy + Ord>(counts: impl IntoIterator<Item = (u32, C)>) -> Option<u32> {
    let mut best: Option<(u32, C)> = None;
    for (s, c) in counts {
        best = match best {
            Some((bs, bc)) if bc > c || (bc == c && bs < s) => Some((bs, bc)),
            _ => Some((s, c)),
        };
    }
    best.map(|(s, _)| s)
}

/// All training examples at one exact distance from a query.
#[derive(Clone, Debug)]
pub(crate) struct Group {
    pub d2: f64,
    pub total: u64,
    pub counts: Counts,
}

/// The nearest groups of one query: the shortest distance-ordered prefix of
/// groups holding at least `capacity` examples. Groups are never split, so
/// a tie block straddling the capacity is kept whole.
#[derive(Clone, Debug, Default)]
pub(crate) struct NeighborList {
    pub groups: Vec<Group>,
    pub total: u64,
}

impl NeighborList {
    /// Squared distance beyond which an insertion cannot change the list.
    #[inline]
    pub fn radius2(&self, capacity: u64) -> f64 {
        if self.total >= capacity {
            self.groups.last().map_or(f64::INFINITY, |g| g.d2)
        } else {
            f64::INFINITY
        }
    }

    pub fn insert(&mut self, d2: f64, counts: &[(u32, u32)], capacity: u64) {
        let pos = self.groups.partition_point(|g| g.d2 < d2);
        let added: u64 = counts.iter().map(|&(_, c)| c as u64).sum();
        if pos < self.groups.len() && self.groups[pos].d2 == d2 {
            let g = &mut self.groups[pos];
            for &(s, c) in counts {
                add_count(&mut g.counts, s, c);
            }
            g.total += added;
        } else {
            self.groups.insert(
                pos,
                Group {
                    d2,
                    total: added,
                    counts: counts.iter().copied().collect(),
                },
            );
        }
        self.total += added;
        self.trim(capacity);
    }

    fn trim(&mut self, capacity: u64) {
        while let Some(last) = self.groups.last() {
            if self.groups.len() > 1 && self.total - last.total >= capacity {
                self.total -= last.total;
                self.groups.pop();
            } else {
                break;
            }
        }
    }
}

/// k-NN vote over distance-ordered groups.
///
/// Groups entirely within the first `k` positions vote with all their
/// members. If a group of equal distances straddles position `k`, its most
/// frequent secret fills the remaining positions. The prediction is the
/// secret with most votes, smallest id on ties. With `k = 1` this is the
/// majority over the nearest group.
pub(crate) fn vote(groups: &[Group], k: u64) -> Option<u32> {
    let mut votes: SmallVec<[(u32, u64); 8]> = SmallVec::new();
    let add = |votes: &mut SmallVec<[(u32, u64); 8]>, s: u32, n: u64| match votes.iter_mut().find(|(v, _)| *v == s) {
        Some((_, c)) => *c += n,
        None => votes.push((s, n)),
    };
    let mut before = 0u64;
    for g in groups {
        if before + g.total <= k {
            for &(s, c) in &g.counts {
                add(&mut votes, s, c as u64);
            }
            before += g.total;
            if before == k {
                break;
            }
        } else {
            let s_hat = argmax_counts(g.counts.iter().copied()).expect("nonempty group");
            add(&mut votes, s_hat, k - before);
            break;
        }
    }
    argmax_counts(votes)
}
