//! Static k-d tree with bounding boxes, used both to search training points
//! and to find the queries an inserted training point can affect.

use super::metric::Metric;

pub(crate) const NONE: u32 = u32::MAX;
const LEAF_SIZE: usize = 8;
/// Above this dimension every search is a linear scan.
const MAX_SPLIT_DIM: usize = 3;

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub start: u32,
    pub end: u32,
    pub left: u32,
    pub right: u32,
    pub parent: u32,
}

impl Node {
    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.left == NONE
    }
}

#[derive(Clone, Debug)]
pub(crate) struct KdTree {
    pub dim: usize,
    /// Points in tree order, `dim` values each.
    pub points: Vec<f64>,
    /// Original index of each point in tree order.
    pub ids: Vec<u32>,
    pub nodes: Vec<Node>,
    /// Per node: `dim` lower bounds then `dim` upper bounds.
    bounds: Vec<f64>,
}

pub(crate) trait Visitor {
    /// Current search radius; points farther than this are not visited.
    fn radius2(&self) -> f64;
    fn visit(&mut self, id: usize, d2: f64);
}

impl KdTree {
    pub fn build(dim: usize, coords: &[f64]) -> Self {
        let n = coords.len() / dim;
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut tree = KdTree {
            dim,
            points: Vec::new(),
            ids: Vec::new(),
            nodes: Vec::new(),
            bounds: Vec::new(),
        };
        if n > 0 {
            tree.split(coords, &mut order, 0, NONE);
        }
        tree.points = Vec::with_capacity(coords.len());
        for &i in &order {
            let i = i as usize;
            tree.points.extend_from_slice(&coords[i * dim..(i + 1) * dim]);
        }
        tree.ids = order;
        tree
    }

    fn split(&mut self, coords: &[f64], order: &mut [u32], offset: usize, parent: u32) -> u32 {
        let dim = self.dim;
        let id = self.nodes.len() as u32;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in order.iter() {
            let p = &coords[i as usize * dim..(i as usize + 1) * dim];
            for d in 0..dim {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        self.bounds.extend_from_slice(&lo);
        self.bounds.extend_from_slice(&hi);
        self.nodes.push(Node {
            start: offset as u32,
            end: (offset + order.len()) as u32,
            left: NONE,
            right: NONE,
            parent,
        });
        if order.len() <= LEAF_SIZE || dim > MAX_SPLIT_DIM {
            return id;
        }
        let axis = (0..dim)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] <= lo[axis] {
            // All points coincide.
            return id;
        }
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            coords[a as usize * dim + axis].total_cmp(&coords[b as usize * dim + axis])
        });
        let (left, right) = order.split_at_mut(mid);
        let l = self.split(coords, left, offset, id);
        let r = self.split(coords, right, offset + mid, id);
        self.nodes[id as usize].left = l;
        self.nodes[id as usize].right = r;
        id
    }

    #[inline]
    pub fn point(&self, pos: usize) -> &[f64] {
        &self.points[pos * self.dim..(pos + 1) * self.dim]
    }

    #[inline]
    pub fn box_dist2(&self, node: usize, q: &[f64], metric: &Metric) -> f64 {
        let b = &self.bounds[node * 2 * self.dim..(node + 1) * 2 * self.dim];
        metric.box_dist2(q, &b[..self.dim], &b[self.dim..])
    }

    /// Visits every point within the visitor's shrinking radius, nearer
    /// subtrees first.
    pub fn search<V: Visitor>(&self, q: &[f64], metric: &Metric, v: &mut V) {
        if !self.nodes.is_empty() {
            self.search_node(0, q, metric, v);
        }
    }

    fn search_node<V: Visitor>(&self, node: usize, q: &[f64], metric: &Metric, v: &mut V) {
        let n = &self.nodes[node];
        if n.is_leaf() {
            for pos in n.start as usize..n.end as usize {
                let d2 = metric.dist2(q, self.point(pos));
                if d2 <= v.radius2() {
                    v.visit(self.ids[pos] as usize, d2);
                }
            }
            return;
        }
        let (l, r) = (n.left as usize, n.right as usize);
        let dl = self.box_dist2(l, q, metric);
        let dr = self.box_dist2(r, q, metric);
        let (first, d_first, second, d_second) = if dl <= dr { (l, dl, r, dr) } else { (r, dr, l, dl) };
        if d_first <= v.radius2() {
            self.search_node(first, q, metric, v);
        }
        if d_second <= v.radius2() {
            self.search_node(second, q, metric, v);
        }
    }
}
