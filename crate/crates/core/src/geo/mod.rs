//! Location-privacy mechanisms over a planar grid.
//!
//! Secrets are the cells of an input grid; the geometric and Blahut-Arimoto
//! mechanisms report a cell of a finer, larger output grid, while the
//! Laplacian mechanism reports a continuous point. Distances are in meters.

mod blahut_arimoto;
mod checkins;
mod grid;
mod mechanisms;

pub use blahut_arimoto::{
    blahut_arimoto, blahut_arimoto_grid, effective_support, BlahutArimotoOptions, BlahutArimotoResult,
};
pub use checkins::{
    prior_from_checkins, read_checkins, sf_checkins, sf_hotspots, synthetic_checkins, CheckinPrior, Hotspot,
    SF_BACKGROUND_WEIGHT,
};
pub use grid::{make_gowalla_grids, Grid, EARTH_RADIUS_M, GOWALLA_CENTER};
pub use mechanisms::{
    epsilon_per_meter, planar_geometric, planar_laplacian_sample, utility, Distances, PlanarLaplacian,
};
