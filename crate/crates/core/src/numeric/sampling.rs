use rand::Rng;

use super::{newton_cotes_weights, Grid, GriddedDensity};
use crate::error::{Error, Result};

/// Cumulative distribution of a normalized gridded density.
///
/// Panel totals come from the Newton-Cotes rule; inside a panel the mass is
/// spread over the subintervals in proportion to their trapezoid areas, and `F`
/// is linear between nodes.
#[derive(Debug, Clone)]
pub struct Cdf {
    grid: Grid,
    cumulative: Vec<f64>,
}

impl Cdf {
    pub fn new(density: &GriddedDensity) -> Result<Cdf> {
        if !density.is_normalized() {
            return Err(Error::NotNormalized);
        }
        let grid = density.grid().clone();
        let values = density.values();
        let k = grid.order();
        let dx = grid.spacing();
        let (weights, factor) = newton_cotes_weights(k)?;

        let mut cumulative = Vec::with_capacity(grid.len());
        cumulative.push(0.0);
        let mut acc = 0.0;
        for r in 0..grid.panels() {
            let nodes = &values[r * k..=(r + 1) * k];
            let panel: f64 = nodes.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() * factor * dx;
            let trapezoid: f64 = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dx).sum();
            let scale = if trapezoid > 0.0 { panel / trapezoid } else { 0.0 };
            for w in nodes.windows(2) {
                acc += 0.5 * (w[0] + w[1]) * dx * scale;
                cumulative.push(acc);
            }
        }
        if !(acc > 0.0) {
            return Err(Error::ZeroMass { mass: acc });
        }
        for c in &mut cumulative {
            *c /= acc;
        }
        Ok(Cdf { grid, cumulative })
    }

    /// `F(x_i)` at every node; starts at 0 and ends at exactly 1.
    pub fn values(&self) -> &[f64] {
        &self.cumulative
    }

    /// `F^{-1}(u)`, monotone in `u`, with `u <= 0` mapped to `a` and `u >= 1` to `b`.
    pub fn quantile(&self, u: f64) -> f64 {
        if !(u > 0.0) {
            return self.grid.lower();
        }
        if u >= 1.0 {
            return self.grid.upper();
        }
        // First node with F >= u; F(x_0) = 0 < u so idx >= 1.
        let idx = self.cumulative.partition_point(|&f| f < u);
        let i = idx - 1;
        let (lo, hi) = (self.cumulative[i], self.cumulative[idx]);
        let (x0, x1) = (self.grid.point(i), self.grid.point(idx));
        let t = (u - lo) / (hi - lo);
        (x0 + t * (x1 - x0)).clamp(x0, x1)
    }
}

/// Draw `count` values from a normalized gridded density by inverting its CDF.
pub fn inverse_cdf_sample<R: Rng + ?Sized>(
    density: &GriddedDensity,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let cdf = Cdf::new(density)?;
    Ok((0..count).map(|_| cdf.quantile(rng.random::<f64>())).collect())
}
