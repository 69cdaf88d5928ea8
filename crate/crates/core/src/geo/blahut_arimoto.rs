use super::grid::Grid;
use super::mechanisms::Distances;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::sum::{pairwise_sum, pairwise_sum_by};
use crate::system::{ChannelMatrix, ObjectValues, Prior, System};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlahutArimotoOptions {
    pub max_iters: usize,
    /// Stop once no output probability moves by more than this.
    pub tol: f64,
}

impl Default for BlahutArimotoOptions {
    fn default() -> Self {
        BlahutArimotoOptions {
            max_iters: 10_000,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlahutArimotoResult<T> {
    pub system: System<T>,
    /// Output marginal `p(o)` of the last iterate.
    pub output_prior: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `−Σ_s π(s)·ln Σ_o p(o)·exp(−β·d(s, o))` before each update; the
    /// rate-distortion Lagrangian at the optimal channel for that `p`.
    pub objectives: Vec<f64>,
}

/// Dot product with independent partial sums, which lets the compiler
/// vectorize.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    pairwise_sum(&acc) + tail
}

/// Kernel `exp(−β·d(s, o))` in the two shapes the iteration needs.
trait Kernel {
    fn secrets(&self) -> usize;
    fn outputs(&self) -> usize;
    /// `z[s] = Σ_o K(s, o)·p(o)`.
    fn partition(&self, p: &[f64], z: &mut [f64]);
    /// `c[o] += Σ_s w[s]·K(s, o)`; entries where `p` is zero may be left
    /// untouched.
    fn scatter(&self, w: &[f64], p: &[f64], c: &mut [f64]);
    /// `out[o] = K(s, o)`.
    fn row(&self, s: usize, out: &mut [f64]);
}

struct DenseKernel {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl DenseKernel {
    fn new(distances: &Distances, beta: f64) -> Self {
        let (n, m) = (distances.rows(), distances.cols());
        let data = (0..n)
            .flat_map(|s| distances.row(s).iter().map(move |&d| (-beta * d).exp()))
            .collect();
        DenseKernel { n, m, data }
    }

    fn krow(&self, s: usize) -> &[f64] {
        &self.data[s * self.m..(s + 1) * self.m]
    }
}

impl Kernel for DenseKernel {
    fn secrets(&self) -> usize {
        self.n
    }

    fn outputs(&self) -> usize {
        self.m
    }

    fn partition(&self, p: &[f64], z: &mut [f64]) {
        for (s, zs) in z.iter_mut().enumerate() {
            *zs = pairwise_sum_by(self.m, |o| self.krow(s)[o] * p[o]);
        }
    }

    fn scatter(&self, w: &[f64], _p: &[f64], c: &mut [f64]) {
        for (s, &ws) in w.iter().enumerate() {
            if ws != 0.0 {
                for (c, &k) in c.iter_mut().zip(self.krow(s)) {
                    *c += ws * k;
                }
            }
        }
    }

    fn row(&self, s: usize, out: &mut [f64]) {
        out.copy_from_slice(self.krow(s));
    }
}

/// Kernel between two grids whose cell centers lie on a common lattice:
/// the distance only depends on the lattice offset, so one table of
/// `exp(−β·d)` per offset replaces the dense matrix.
struct LatticeKernel {
    n_in: usize,
    n_out: usize,
    ratio: usize,
    /// Side of the square offset table.
    side: usize,
    table: Vec<f64>,
}

impl LatticeKernel {
    /// `None` unless the input cell size is an integer multiple of the
    /// output cell size.
    fn new(input: &Grid, output: &Grid, beta: f64) -> Option<Self> {
        let r = input.cell_size / output.cell_size;
        let ratio = r.round();
        if ratio < 1.0 || (r - ratio).abs() > 1e-9 {
            return None;
        }
        let ratio = ratio as usize;
        let (n_in, n_out) = (input.n_cells, output.n_cells);
        let c = output.cell_size;
        // (x_in(i) − x_out(j)) / c = ratio·i − j + a, per axis.
        let shift = |off_in: f64, off_out: f64| {
            (off_in - off_out) / c + (n_out as f64 - 1.0) / 2.0 - ratio as f64 * (n_in as f64 - 1.0) / 2.0
        };
        let (ax, ay) = (
            shift(input.offset.0, output.offset.0),
            shift(input.offset.1, output.offset.1),
        );
        let side = ratio * (n_in - 1) + n_out;
        let top = (ratio * (n_in - 1)) as f64;
        // Table entry (u, v) holds lattice offset (top − v + ax, top − u + ay),
        // so a row of output cells reads a contiguous increasing slice.
        let mut table = Vec::with_capacity(side * side);
        for u in 0..side {
            let dy = top - u as f64 + ay;
            for v in 0..side {
                let dx = top - v as f64 + ax;
                table.push((-beta * c * dx.hypot(dy)).exp());
            }
        }
        Some(LatticeKernel {
            n_in,
            n_out,
            ratio,
            side,
            table,
        })
    }

    /// Table slice for secret `s` and output row `jy`, indexed by `jx`.
    #[inline]
    fn slice(&self, s: usize, jy: usize) -> &[f64] {
        let top = self.ratio * (self.n_in - 1);
        let (ix, iy) = (s % self.n_in, s / self.n_in);
        let u = top - self.ratio * iy + jy;
        let v = top - self.ratio * ix;
        let start = u * self.side + v;
        &self.table[start..start + self.n_out]
    }
}

impl Kernel for LatticeKernel {
    fn secrets(&self) -> usize {
        self.n_in * self.n_in
    }

    fn outputs(&self) -> usize {
        self.n_out * self.n_out
    }

    // Output rows are the outer loop so each row stays in cache, and rows
    // the iteration has already emptied are skipped.
    fn partition(&self, p: &[f64], z: &mut [f64]) {
        z.fill(0.0);
        for (jy, prow) in p.chunks_exact(self.n_out).enumerate() {
            if prow.iter().all(|&v| v == 0.0) {
                continue;
            }
            for (s, zs) in z.iter_mut().enumerate() {
                *zs += dot(self.slice(s, jy), prow);
            }
        }
    }

    fn scatter(&self, w: &[f64], p: &[f64], c: &mut [f64]) {
        for (jy, (crow, prow)) in c
            .chunks_exact_mut(self.n_out)
            .zip(p.chunks_exact(self.n_out))
            .enumerate()
        {
            if prow.iter().all(|&v| v == 0.0) {
                continue;
            }
            for (s, &ws) in w.iter().enumerate() {
                if ws != 0.0 {
                    for (c, &k) in crow.iter_mut().zip(self.slice(s, jy)) {
                        *c += ws * k;
                    }
                }
            }
        }
    }

    fn row(&self, s: usize, out: &mut [f64]) {
        for (jy, orow) in out.chunks_exact_mut(self.n_out).enumerate() {
            orow.copy_from_slice(self.slice(s, jy));
        }
    }
}

/// Rate-distortion optimal channel for distortion `distances` at inverse
/// temperature `beta`, by alternating
/// `q(o|s) ∝ p(o)·exp(−β·d(s, o))` and `p(o) = Σ_s π(s)·q(o|s)`
/// from a uniform `p`.
///
/// Hitting `max_iters` is not an error: the last iterate is returned with
/// `converged = false` and a warning is logged.
pub fn blahut_arimoto<T: Real>(
    prior: &Prior<T>,
    distances: &Distances,
    beta: f64,
    objects: ObjectValues<T>,
    options: BlahutArimotoOptions,
) -> Result<BlahutArimotoResult<T>> {
    check_beta(beta)?;
    iterate(prior, &DenseKernel::new(distances, beta), objects, options)
}

/// [`blahut_arimoto`] with Euclidean distortion between the cell centers
/// of two grids. When the input cell size is a multiple of the output cell
/// size the kernel is tabulated per lattice offset, which is much faster
/// than the dense form; otherwise the dense form is used.
pub fn blahut_arimoto_grid<T: Real>(
    prior: &Prior<T>,
    input: &Grid,
    output: &Grid,
    beta: f64,
    options: BlahutArimotoOptions,
) -> Result<BlahutArimotoResult<T>> {
    check_beta(beta)?;
    let objects = ObjectValues::new(2, output.centers().into_iter().map(T::of).collect())?;
    match LatticeKernel::new(input, output, beta) {
        Some(k) => iterate(prior, &k, objects, options),
        None => iterate(
            prior,
            &DenseKernel::new(&Distances::from_grids(input, output), beta),
            objects,
            options,
        ),
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

const FLUSH: f64 = 1e-280;

fn iterate<T: Real, K: Kernel>(
    prior: &Prior<T>,
    kernel: &K,
    objects: ObjectValues<T>,
    options: BlahutArimotoOptions,
) -> Result<BlahutArimotoResult<T>> {
    let (n, m) = (kernel.secrets(), kernel.outputs());
    if prior.len() != n {
        return Err(Error::Shape(format!(
            "prior has {} entries for {n} secrets",
            prior.len()
        )));
    }
    if objects.len() != m {
        return Err(Error::Shape(format!("{} objects for {m} outputs", objects.len())));
    }
    if let Some(v) = prior.violations().first() {
        return Err(Error::InvalidSystem(vec![v.clone()]));
    }
    let pi: Vec<f64> = prior.probs().iter().map(|p| p.to_f64_lossless()).collect();

    let mut p = vec![1.0 / m as f64; m];
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut next = vec![0.0; m];
    let mut objectives = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let partition = |p: &[f64], z: &mut [f64]| -> Result<()> {
        kernel.partition(p, z);
        match z.iter().position(|&v| !(v > 0.0)) {
            Some(s) => Err(Error::InvalidArgument(format!(
                "every output is unreachable from secret {s}; lower beta"
            ))),
            None => Ok(()),
        }
    };

    while iterations < options.max_iters {
        partition(&p, &mut z)?;
        objectives.push(
            -(0..n)
                .map(|s| if pi[s] > 0.0 { pi[s] * z[s].ln() } else { 0.0 })
                .sum::<f64>(),
        );
        for s in 0..n {
            w[s] = pi[s] / z[s];
        }
        next.fill(0.0);
        kernel.scatter(&w, &p, &mut next);
        for (c, &q) in next.iter_mut().zip(&p) {
            *c *= q;
        }
        let total = pairwise_sum(&next);
        let mut change = 0.0f64;
        for (c, &q) in next.iter_mut().zip(&p) {
            *c /= total;
            // Off-support mass decays geometrically; flushing it before it
            // turns subnormal keeps the arithmetic fast.
            if *c < FLUSH {
                *c = 0.0;
            }
            change = change.max((*c - q).abs());
        }
        std::mem::swap(&mut p, &mut next);
        iterations += 1;
        if change < options.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("Blahut-Arimoto stopped after {iterations} iterations without converging");
    }

    partition(&p, &mut z)?;
    let mut data = Vec::with_capacity(n * m);
    let mut row = vec![0.0; m];
    for (s, &zs) in z.iter().enumerate() {
        kernel.row(s, &mut row);
        data.extend(row.iter().zip(&p).map(|(&k, &q)| T::of(k * q / zs)));
    }
    let channel = ChannelMatrix::new(n, m, data)?;
    Ok(BlahutArimotoResult {
        system: System::with_objects(prior.clone(), channel, objects)?,
        output_prior: p,
        iterations,
        converged,
        objectives,
    })
}

/// Number of observations some secret reports with probability above
/// `threshold`.
pub fn effective_support<T: Real>(system: &System<T>, threshold: f64) -> usize {
    let ch = system.channel();
    (0..ch.n_objects())
        .filter(|&o| (0..ch.n_secrets()).any(|s| ch.get(s, o).to_f64_lossless() > threshold))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Grid;

    fn setup() -> (Prior<f64>, Distances, ObjectValues<f64>) {
        let c = (37.755, -122.44);
        let input = Grid::new(c, 150.0, 3).unwrap();
        let output = Grid::new(c, 50.0, 12).unwrap();
        let prior = Prior::from_weights(&[1.0, 2.0, 3.0, 4.0, 5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        let objects = ObjectValues::new(2, output.centers()).unwrap();
        (prior, Distances::from_grids(&input, &output), objects)
    }

    #[test]
    fn objective_never_increases_and_p_is_a_distribution() {
        let (prior, d, objects) = setup();
        let opts = BlahutArimotoOptions {
            max_iters: 300,
            tol: 1e-12,
        };
        let r = blahut_arimoto(&prior, &d, 0.01, objects, opts).unwrap();
        for w in r.objectives.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} > {}", w[1], w[0]);
        }
        assert!((r.output_prior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(r.output_prior.iter().all(|&v| v >= 0.0));
        assert!(crate::system::validate(&r.system).is_empty());
    }

    #[test]
    fn cold_limit_reports_nearest_output() {
        let (prior, d, objects) = setup();
        let r = blahut_arimoto(&prior, &d, 0.5, objects, BlahutArimotoOptions::default()).unwrap();
        for s in 0..prior.len() {
            let row = r.system.channel().row(s);
            let nearest = (0..d.cols())
                .min_by(|&a, &b| d.row(s)[a].total_cmp(&d.row(s)[b]))
                .unwrap();
            let dmin = d.row(s)[nearest];
            let mass: f64 = (0..d.cols())
                .filter(|&o| d.row(s)[o] <= dmin + 1e-9)
                .map(|o| row[o])
                .sum();
            assert!(mass > 0.99, "secret {s}: {mass}");
        }
    }

    #[test]
    fn lattice_kernel_matches_dense() {
        let c = (37.755, -122.44);
        let mut input = Grid::new(c, 150.0, 3).unwrap();
        input.offset = (30.0, -45.0);
        let output = Grid::new(c, 50.0, 13).unwrap();
        let prior = Prior::from_weights(&[1.0, 2.0, 3.0, 4.0, 5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        let opts = BlahutArimotoOptions {
            max_iters: 50,
            tol: 0.0,
        };
        assert!(LatticeKernel::new(&input, &output, 0.01).is_some());
        let fast = blahut_arimoto_grid::<f64>(&prior, &input, &output, 0.01, opts).unwrap();
        let objects = ObjectValues::new(2, output.centers()).unwrap();
        let dense = blahut_arimoto(&prior, &Distances::from_grids(&input, &output), 0.01, objects, opts).unwrap();
        for (a, b) in fast.system.channel().data().iter().zip(dense.system.channel().data()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let skew = Grid::new(c, 35.0, 13).unwrap();
        assert!(LatticeKernel::new(&input, &skew, 0.01).is_none());
        assert!(blahut_arimoto_grid::<f64>(&prior, &input, &skew, 0.01, opts).is_ok());
    }

    #[test]
    fn rejects_bad_beta() {
        let (prior, d, objects) = setup();
        assert!(blahut_arimoto(&prior, &d, 0.0, objects, BlahutArimotoOptions::default()).is_err());
    }
}
