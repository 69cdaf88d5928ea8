use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use super::grid::Grid;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::sum::{pairwise_sum, pairwise_sum_by};
use crate::system::{ChannelMatrix, ObjectValues, Prior, System};

/// Noise rate per meter for privacy parameter `nu`: `ln ν / 100`, so the
/// density drops by a factor `ν` every 100 m.
pub fn epsilon_per_meter(nu: f64) -> Result<f64> {
    if !(nu > 1.0 && nu.is_finite()) {
        return Err(Error::InvalidArgument(format!("nu must be finite and > 1, got {nu}")));
    }
    Ok(nu.ln() / 100.0)
}

/// Dense matrix of Euclidean distances in meters, secrets by observations.
#[derive(Clone, Debug)]
pub struct Distances {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Distances {
    /// Distances between two sets of planar points (flattened `x, y`).
    pub fn between(from: &[f64], to: &[f64]) -> Self {
        let rows = from.len() / 2;
        let cols = to.len() / 2;
        let mut data = Vec::with_capacity(rows * cols);
        for s in 0..rows {
            let (x, y) = (from[2 * s], from[2 * s + 1]);
            data.extend(to.chunks_exact(2).map(|p| (p[0] - x).hypot(p[1] - y)));
        }
        Distances { rows, cols, data }
    }

    pub fn from_grids(input: &Grid, output: &Grid) -> Self {
        Distances::between(&input.centers(), &output.centers())
    }

    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} distances for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidArgument(
                "distances must be finite and nonnegative".into(),
            ));
        }
        Ok(Distances { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.cols..(s + 1) * self.cols]
    }
}

fn grid_objects<T: Real>(output: &Grid) -> Result<ObjectValues<T>> {
    ObjectValues::new(2, output.centers().into_iter().map(T::of).collect())
}

/// Planar geometric mechanism: each input cell's location is reported as an
/// output cell drawn with probability `∝ exp(−ε·d)`, `ε = ln ν / 100`, where
/// `d` is the distance between the cell centers. Observations are the
/// planar output-cell centers.
pub fn planar_geometric<T: Real>(prior: Prior<T>, nu: f64, input: &Grid, output: &Grid) -> Result<System<T>> {
    let eps = epsilon_per_meter(nu)?;
    if prior.len() != input.len() {
        return Err(Error::Shape(format!(
            "prior has {} entries for {} input cells",
            prior.len(),
            input.len()
        )));
    }
    let out = output.centers();
    let m = output.len();
    let mut data = Vec::with_capacity(input.len() * m);
    let mut row = vec![0.0f64; m];
    for s in 0..input.len() {
        let (x, y) = input.cell_center(s);
        for (r, p) in row.iter_mut().zip(out.chunks_exact(2)) {
            *r = (-eps * (p[0] - x).hypot(p[1] - y)).exp();
        }
        let z = pairwise_sum(&row);
        data.extend(row.iter().map(|&r| T::of(r / z)));
    }
    let channel = ChannelMatrix::new(input.len(), m, data)?;
    System::with_objects(prior, channel, grid_objects(output)?)
}

/// Expected distance in meters between a secret's location and the
/// reported observation, `Σ_s π(s) Σ_o C[s][o]·d(s, o)`.
///
/// `secret_locations` holds one point per secret in the observation
/// dimension.
pub fn utility<T: Real>(system: &System<T>, secret_locations: &[f64]) -> Result<f64> {
    system.check()?;
    let objects = system.objects();
    let dim = objects.dim();
    if secret_locations.len() != system.n_secrets() * dim {
        return Err(Error::Shape(format!(
            "{} location coordinates for {} secrets of dimension {dim}",
            secret_locations.len(),
            system.n_secrets()
        )));
    }
    let obj: Vec<f64> = objects.coords().iter().map(|c| c.to_f64_lossless()).collect();
    let per_secret: Vec<f64> = (0..system.n_secrets())
        .map(|s| {
            let loc = &secret_locations[s * dim..(s + 1) * dim];
            let row = system.channel().row(s);
            let expected = pairwise_sum_by(row.len(), |o| {
                let p = &obj[o * dim..(o + 1) * dim];
                let d2: f64 = loc.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
                row[o].to_f64_lossless() * d2.sqrt()
            });
            system.prior().get(s).to_f64_lossless() * expected
        })
        .collect();
    Ok(pairwise_sum(&per_secret))
}

/// Planar Laplacian mechanism with continuous output, truncated to the
/// output square.
#[derive(Clone, Copy, Debug)]
pub struct PlanarLaplacian {
    input: Grid,
    output: Grid,
    radius: Gamma<f64>,
}

impl PlanarLaplacian {
    pub fn new(nu: f64, input: &Grid, output: &Grid) -> Result<Self> {
        let eps = epsilon_per_meter(nu)?;
        // The distance from the true location is Gamma(2, 1/ε) in the plane.
        let radius = Gamma::new(2.0, 1.0 / eps).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(PlanarLaplacian {
            input: *input,
            output: *output,
            radius,
        })
    }

    /// Noisy planar location for input cell `s`, redrawn until it lands in
    /// the output square.
    pub fn sample_cell<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> (f64, f64) {
        let (cx, cy) = self.input.cell_center(s);
        let (x0, x1, y0, y1) = self.output.bounds();
        loop {
            let r = self.radius.sample(rng);
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let (x, y) = (cx + r * theta.cos(), cy + r * theta.sin());
            if (x0..=x1).contains(&x) && (y0..=y1).contains(&y) {
                return (x, y);
            }
        }
    }

    /// `n` examples: cells drawn from `prior`, continuous noisy locations.
    pub fn sample_dataset<T: Real, R: Rng + ?Sized>(
        &self,
        prior: &Prior<T>,
        n: usize,
        rng: &mut R,
    ) -> Result<Dataset<T>> {
        if prior.len() != self.input.len() {
            return Err(Error::Shape(format!(
                "prior has {} entries for {} input cells",
                prior.len(),
                self.input.len()
            )));
        }
        let cells = WeightedIndex::new(prior.probs().iter().map(|p| p.to_f64_lossless()))
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut out = Dataset::with_capacity(2, n)?;
        for _ in 0..n {
            let s = cells.sample(rng);
            let (x, y) = self.sample_cell(s, rng);
            out.push(s, &[T::of(x), T::of(y)])?;
        }
        out.metadata.source = "planar laplacian".into();
        Ok(out)
    }
}

/// One noisy location for cell `s`, seeded.
pub fn planar_laplacian_sample(s: usize, nu: f64, input: &Grid, output: &Grid, seed: u64) -> Result<(f64, f64)> {
    if s >= input.len() {
        return Err(Error::SecretOutOfRange {
            secret: s,
            n_secrets: input.len(),
        });
    }
    let mech = PlanarLaplacian::new(nu, input, output)?;
    Ok(mech.sample_cell(s, &mut ChaCha8Rng::seed_from_u64(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::make_gowalla_grids;
    use crate::system::validate;

    fn small_grids() -> (Grid, Grid) {
        let c = (37.755, -122.44);
        (Grid::new(c, 150.0, 4).unwrap(), Grid::new(c, 50.0, 18).unwrap())
    }

    #[test]
    fn geometric_rows_stochastic_and_nu_checked() {
        let (i, o) = small_grids();
        let sys: System<f64> = planar_geometric(Prior::uniform(16).unwrap(), 2.0, &i, &o).unwrap();
        assert!(validate(&sys).is_empty());
        assert!(planar_geometric::<f64>(Prior::uniform(16).unwrap(), 1.0, &i, &o).is_err());
        assert!(planar_geometric::<f64>(Prior::uniform(15).unwrap(), 2.0, &i, &o).is_err());
    }

    #[test]
    fn identity_has_zero_utility() {
        let sys: System<f64> = System::new(Prior::uniform(3).unwrap(), ChannelMatrix::identity(3).unwrap()).unwrap();
        assert_eq!(utility(&sys, &[0.0, 1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn laplacian_stays_inside_and_shrinks_with_nu() {
        let (input, output) = make_gowalla_grids();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (x0, x1, y0, y1) = output.bounds();
        let mean_dist = |nu: f64, rng: &mut ChaCha8Rng| {
            let m = PlanarLaplacian::new(nu, &input, &output).unwrap();
            let mut total = 0.0;
            for i in 0..20_000 {
                let s = i % 400;
                let (x, y) = m.sample_cell(s, rng);
                assert!(x >= x0 && x <= x1 && y >= y0 && y <= y1);
                let (cx, cy) = input.cell_center(s);
                total += (x - cx).hypot(y - cy);
            }
            total / 20_000.0
        };
        let d2 = mean_dist(2.0, &mut rng);
        let d8 = mean_dist(8.0, &mut rng);
        assert!(d8 < d2, "{d8} vs {d2}");
        assert!(planar_laplacian_sample(0, 0.5, &input, &output, 1).is_err());
        assert_eq!(
            planar_laplacian_sample(7, 2.0, &input, &output, 1).unwrap(),
            planar_laplacian_sample(7, 2.0, &input, &output, 1).unwrap()
        );
    }
}
