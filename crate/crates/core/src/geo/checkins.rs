use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::grid::Grid;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::system::Prior;

/// Reads `lat,lon` records in decimal degrees. A first line that does not
/// parse as numbers is taken as a header.
pub fn read_checkins<R: Read>(input: R) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed = (record.len() >= 2)
            .then(|| Some((record[0].parse::<f64>().ok()?, record[1].parse::<f64>().ok()?)))
            .flatten();
        match parsed {
            Some((lat, lon)) if lat.is_finite() && lon.is_finite() => out.push((lat, lon)),
            None if i == 0 => continue,
            _ => {
                return Err(Error::Parse {
                    line,
                    message: "expected `lat,lon`".into(),
                })
            }
        }
    }
    Ok(out)
}

/// Prior over grid cells proportional to the checkins falling in each.
#[derive(Clone, Debug)]
pub struct CheckinPrior<T> {
    pub prior: Prior<T>,
    pub counts: Vec<u64>,
    /// Checkins outside the grid, ignored.
    pub discarded: usize,
}

pub fn prior_from_checkins<T: Real>(checkins: &[(f64, f64)], grid: &Grid) -> Result<CheckinPrior<T>> {
    let mut counts = vec![0u64; grid.len()];
    let mut discarded = 0;
    for &(lat, lon) in checkins {
        let (x, y) = grid.to_planar(lat, lon);
        match grid.cell_of(x, y) {
            Some(c) => counts[c] += 1,
            None => discarded += 1,
        }
    }
    let inside: u64 = counts.iter().sum();
    if inside == 0 {
        return Err(Error::Empty("set of checkins inside the grid"));
    }
    if discarded > 0 {
        log::info!("discarded {discarded} checkins outside the grid");
    }
    let weights: Vec<T> = counts.iter().map(|&c| T::of(c as f64)).collect();
    Ok(CheckinPrior {
        prior: Prior::from_weights(&weights)?,
        counts,
        discarded,
    })
}

/// A Gaussian cluster of checkins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hotspot {
    pub lat: f64,
    pub lon: f64,
    pub weight: f64,
    /// Standard deviation in meters, per axis.
    pub sigma: f64,
}

/// Share of checkins spread uniformly over the grid in [`sf_checkins`].
pub const SF_BACKGROUND_WEIGHT: f64 = 0.03;

const SF_VENUES: usize = 52;
const SF_VENUE_SEED: u64 = 899;
const SF_ZIPF_EXPONENT: f64 = 0.645;
const SF_VENUE_SIGMA: f64 = 44.0;

/// Venue-like hotspots standing in for real San Francisco checkin data:
/// 52 tight clusters scattered within 1400 m of the grid center, with
/// Zipf-distributed popularity. Calibrated so that the planar geometric
/// mechanism on [`make_gowalla_grids`](super::make_gowalla_grids) has
/// roughly the reference risks for real check-ins. Weights sum to
/// `1 − SF_BACKGROUND_WEIGHT`.
pub fn sf_hotspots(grid: &Grid) -> Vec<Hotspot> {
    let mut rng = ChaCha8Rng::seed_from_u64(SF_VENUE_SEED);
    let raw: Vec<f64> = (1..=SF_VENUES).map(|i| (i as f64).powf(-SF_ZIPF_EXPONENT)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter()
        .map(|w| {
            let x = rng.random_range(-1400.0..1400.0);
            let y = rng.random_range(-1400.0..1400.0);
            let (lat, lon) = grid.to_geographic(x, y);
            Hotspot {
                lat,
                lon,
                weight: w / total * (1.0 - SF_BACKGROUND_WEIGHT),
                sigma: SF_VENUE_SIGMA,
            }
        })
        .collect()
}

/// `n` synthetic checkins over `grid` from [`sf_hotspots`] plus the
/// uniform background.
pub fn sf_checkins(grid: &Grid, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthetic_checkins(grid, &sf_hotspots(grid), SF_BACKGROUND_WEIGHT, n, &mut rng)
}

/// Synthetic checkins: a mixture of Gaussian hotspots and a uniform
/// background over `grid`. Weights need not be normalized.
pub fn synthetic_checkins<R: Rng + ?Sized>(
    grid: &Grid,
    hotspots: &[Hotspot],
    background_weight: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    let total: f64 = hotspots.iter().map(|h| h.weight).sum::<f64>() + background_weight;
    if !(total > 0.0) || hotspots.iter().any(|h| !(h.weight >= 0.0 && h.sigma > 0.0)) || background_weight < 0.0 {
        return Err(Error::InvalidArgument(
            "hotspot weights must be nonnegative with positive spread".into(),
        ));
    }
    let (x0, x1, y0, y1) = grid.bounds();
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut u = rng.random::<f64>() * total;
        let mut chosen = None;
        for h in hotspots {
            if u < h.weight {
                chosen = Some(h);
                break;
            }
            u -= h.weight;
        }
        let (x, y) = match chosen {
            Some(h) => {
                let (cx, cy) = grid.to_planar(h.lat, h.lon);
                (cx + h.sigma * std.sample(rng), cy + h.sigma * std.sample(rng))
            }
            None => (rng.random_range(x0..x1), rng.random_range(y0..y1)),
        };
        out.push(grid.to_geographic(x, y));
    }
    Ok(out)
}
