use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Square grid of `n_cells × n_cells` cells on a local plane around a
/// geographic center.
///
/// Planar coordinates are meters east (`x`) and north (`y`) of the center,
/// using an equirectangular projection. Cell `i` covers column `i % n` and
/// row `i / n`, counted from the south-west corner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    /// `(lat, lon)` in degrees.
    pub center: (f64, f64),
    pub cell_size: f64,
    pub n_cells: usize,
    /// Planar position of the grid's middle relative to `center`.
    pub offset: (f64, f64),
}

impl Grid {
    pub fn new(center: (f64, f64), cell_size: f64, n_cells: usize) -> Result<Self> {
        if n_cells == 0 {
            return Err(Error::InvalidArgument("grid needs at least one cell per side".into()));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        Ok(Grid {
            center,
            cell_size,
            n_cells,
            offset: (0.0, 0.0),
        })
    }

    pub fn len(&self) -> usize {
        self.n_cells * self.n_cells
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Half the side length in meters.
    pub fn half_extent(&self) -> f64 {
        self.n_cells as f64 * self.cell_size / 2.0
    }

    /// Planar bounds `(x_min, x_max, y_min, y_max)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let h = self.half_extent();
        (
            self.offset.0 - h,
            self.offset.0 + h,
            self.offset.1 - h,
            self.offset.1 + h,
        )
    }

    fn axis_center(&self, i: usize) -> f64 {
        (i as f64 - (self.n_cells as f64 - 1.0) / 2.0) * self.cell_size
    }

    /// Planar center of cell `i`.
    pub fn cell_center(&self, i: usize) -> (f64, f64) {
        let (col, row) = (i % self.n_cells, i / self.n_cells);
        (
            self.offset.0 + self.axis_center(col),
            self.offset.1 + self.axis_center(row),
        )
    }

    /// Centers of all cells, flattened `x, y` pairs in cell order.
    pub fn centers(&self) -> Vec<f64> {
        (0..self.len())
            .flat_map(|i| {
                let (x, y) = self.cell_center(i);
                [x, y]
            })
            .collect()
    }

    /// Cell containing a planar point; the upper edges belong to the last
    /// cell. `None` outside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<usize> {
        let h = self.half_extent();
        let axis = |v: f64, off: f64| -> Option<usize> {
            let t = (v - off + h) / self.cell_size;
            if !(t >= 0.0) || t > self.n_cells as f64 {
                return None;
            }
            Some((t.floor() as usize).min(self.n_cells - 1))
        };
        Some(axis(y, self.offset.1)? * self.n_cells + axis(x, self.offset.0)?)
    }

    /// Projects `(lat, lon)` degrees to planar meters around the center.
    pub fn to_planar(&self, lat: f64, lon: f64) -> (f64, f64) {
        let (lat0, lon0) = self.center;
        let x = EARTH_RADIUS_M * (lon - lon0).to_radians() * lat0.to_radians().cos();
        let y = EARTH_RADIUS_M * (lat - lat0).to_radians();
        (x, y)
    }

    /// Inverse of [`Grid::to_planar`].
    pub fn to_geographic(&self, x: f64, y: f64) -> (f64, f64) {
        let (lat0, lon0) = self.center;
        let lat = lat0 + (y / EARTH_RADIUS_M).to_degrees();
        let lon = lon0 + (x / (EARTH_RADIUS_M * lat0.to_radians().cos())).to_degrees();
        (lat, lon)
    }
}

/// Center of the San Francisco area used for the location experiments.
pub const GOWALLA_CENTER: (f64, f64) = (37.755, -122.440);

/// Secret grid of 20×20 cells of 150 m, and observation grid of 340×340
/// cells of 15 m extending 1050 m beyond it on every side.
pub fn make_gowalla_grids() -> (Grid, Grid) {
    (
        Grid::new(GOWALLA_CENTER, 150.0, 20).unwrap(),
        Grid::new(GOWALLA_CENTER, 15.0, 340).unwrap(),
    )
}
