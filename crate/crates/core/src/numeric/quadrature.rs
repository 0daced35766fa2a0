use super::{Grid, GriddedDensity};
use crate::error::{Error, Result};

const TRAPEZOID: [f64; 2] = [1.0, 1.0];
const SIMPSON: [f64; 3] = [1.0, 4.0, 1.0];
const SIMPSON_38: [f64; 4] = [1.0, 3.0, 3.0, 1.0];
const BOOLE: [f64; 5] = [7.0, 32.0, 12.0, 32.0, 7.0];

/// Closed Newton-Cotes weights for one panel of order `k`, as integer-valued
/// weights plus a common factor (multiply by the node spacing as well).
pub fn newton_cotes_weights(k: usize) -> Result<(&'static [f64], f64)> {
    match k {
        1 => Ok((&TRAPEZOID, 0.5)),
        2 => Ok((&SIMPSON, 1.0 / 3.0)),
        3 => Ok((&SIMPSON_38, 3.0 / 8.0)),
        4 => Ok((&BOOLE, 2.0 / 45.0)),
        other => Err(Error::UnsupportedOrder(other)),
    }
}

/// Integral of each panel `[x_{rk}, x_{(r+1)k}]`.
///
/// Each entry is also the exact integral of the degree-`k` Lagrange
/// interpolant through that panel's nodes.
pub fn panel_masses(grid: &Grid, values: &[f64]) -> Result<Vec<f64>> {
    check_len(grid, values)?;
    let k = grid.order();
    let (weights, factor) = newton_cotes_weights(k)?;
    let scale = factor * grid.spacing();
    Ok((0..grid.panels())
        .map(|r| {
            let nodes = &values[r * k..=(r + 1) * k];
            let s: f64 = nodes.iter().zip(weights).map(|(v, w)| v * w).sum();
            s * scale
        })
        .collect())
}

/// Composite closed Newton-Cotes integral of node values on `grid`.
///
/// Panels are accumulated left to right.
pub fn newton_cotes_sum(grid: &Grid, values: &[f64]) -> Result<f64> {
    check_len(grid, values)?;
    let k = grid.order();
    let (weights, factor) = newton_cotes_weights(k)?;
    let mut total = 0.0;
    for r in 0..grid.panels() {
        let nodes = &values[r * k..=(r + 1) * k];
        let s: f64 = nodes.iter().zip(weights).map(|(v, w)| v * w).sum();
        total += s;
    }
    Ok(total * factor * grid.spacing())
}

/// Composite Newton-Cotes integral of a gridded density over `[a, b]`.
pub fn newton_cotes_integrate(density: &GriddedDensity) -> Result<f64> {
    newton_cotes_sum(density.grid(), density.values())
}

fn check_len(grid: &Grid, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} values for a grid of {} nodes",
            values.len(),
            grid.len()
        )));
    }
    Ok(())
}
