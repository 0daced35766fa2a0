//! Numerical substrate for the direct product method: evenly spaced grids,
//! gridded densities, piecewise Lagrange interpolation, composite closed
//! Newton-Cotes quadrature and inverse-CDF sampling.
//!
//! Everything here is a pure function of its inputs. Quadrature sums run
//! panel by panel from left to right, so results are reproducible bit for bit.

mod density;
mod grid;
mod interp;
mod quadrature;
mod sampling;

pub use density::GriddedDensity;
pub use grid::{build_grid, Grid};
pub use interp::{lagrange_interpolate, PiecewisePolynomial};
pub use quadrature::{newton_cotes_integrate, newton_cotes_sum, newton_cotes_weights, panel_masses};
pub use sampling::{inverse_cdf_sample, Cdf};

/// Mass below this threshold is treated as zero when normalizing.
pub const ZERO_MASS_THRESHOLD: f64 = 1e-300;

/// Divide a density by its Newton-Cotes integral.
///
/// Fails with [`Error::ZeroMass`](crate::Error::ZeroMass) when the integral is at
/// or below [`ZERO_MASS_THRESHOLD`], which is what a product of non-overlapping
/// shard densities looks like.
pub fn normalize_density(density: GriddedDensity) -> crate::Result<GriddedDensity> {
    density.normalize()
}
