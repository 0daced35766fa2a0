use super::{Grid, GriddedDensity};
use crate::error::Result;

/// Piecewise degree-`k` Lagrange interpolant over the panels of a grid.
///
/// Each panel `[x_{rk}, x_{(r+1)k}]` stores its `k + 1` node values, i.e. the
/// polynomial's coefficients in the Lagrange basis of that panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolynomial {
    grid: Grid,
    coefficients: Vec<f64>,
    // 1 / prod_{i != j} (j - i), for the equally spaced local nodes 0..=k.
    denominators: Vec<f64>,
}

/// Interpolate the node values of `density` panel by panel.
pub fn lagrange_interpolate(density: &GriddedDensity) -> PiecewisePolynomial {
    PiecewisePolynomial::new(density.grid().clone(), density.values().to_vec())
}

impl PiecewisePolynomial {
    /// `values` are the `n + 1` node values of `grid`.
    pub fn new(grid: Grid, values: Vec<f64>) -> PiecewisePolynomial {
        assert_eq!(values.len(), grid.len(), "one value per grid node");
        let k = grid.order();
        let mut coefficients = Vec::with_capacity(grid.panels() * (k + 1));
        for r in 0..grid.panels() {
            coefficients.extend_from_slice(&values[r * k..=(r + 1) * k]);
        }
        let denominators = (0..=k)
            .map(|j| {
                let prod: f64 = (0..=k).filter(|&i| i != j).map(|i| j as f64 - i as f64).product();
                1.0 / prod
            })
            .collect();
        PiecewisePolynomial {
            grid,
            coefficients,
            denominators,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Coefficients of panel `r` (its node values).
    pub fn panel(&self, r: usize) -> &[f64] {
        let k = self.grid.order();
        &self.coefficients[r * (k + 1)..(r + 1) * (k + 1)]
    }

    /// Evaluate at `x`; zero outside `[a, b]`.
    pub fn eval(&self, x: f64) -> f64 {
        if !self.grid.contains(x) {
            return 0.0;
        }
        let k = self.grid.order();
        let dx = self.grid.spacing();
        let offset = (x - self.grid.lower()) / dx;
        let r = ((offset / k as f64).floor() as usize).min(self.grid.panels() - 1);
        let s = offset - (r * k) as f64;
        let coef = self.panel(r);

        let nearest = s.round();
        if (s - nearest).abs() <= 1e-12 && nearest >= 0.0 && nearest <= k as f64 {
            return coef[nearest as usize];
        }
        let mut total = 0.0;
        for (j, (&c, &denom)) in coef.iter().zip(&self.denominators).enumerate() {
            let basis: f64 = (0..=k)
                .filter(|&i| i != j)
                .map(|i| s - i as f64)
                .product::<f64>()
                * denom;
            total += c * basis;
        }
        total
    }

    /// Exact integral of the interpolant over `[a, b]`, which is the composite
    /// closed Newton-Cotes rule of the same order.
    pub fn integrate(&self) -> Result<f64> {
        let values: Vec<f64> = (0..self.grid.len())
            .map(|i| {
                let k = self.grid.order();
                if i == self.grid.intervals() {
                    self.panel(self.grid.panels() - 1)[k]
                } else {
                    self.panel(i / k)[i % k]
                }
            })
            .collect();
        super::newton_cotes_sum(&self.grid, &values)
    }
}
