use std::io::{BufRead, Write};

use super::quadrature::newton_cotes_sum;
use super::{Grid, ZERO_MASS_THRESHOLD};
use crate::error::{Error, Result};

/// A one-dimensional density tabulated at the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedDensity {
    grid: Grid,
    values: Vec<f64>,
    normalized: bool,
}

impl GriddedDensity {
    /// Wrap node values. Values must be finite and non-negative.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<GriddedDensity> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidSamples(format!("density value {v} at node {i}")));
        }
        Ok(GriddedDensity {
            grid,
            values,
            normalized: false,
        })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<GriddedDensity> {
        let values = grid.points().map(f).collect();
        GriddedDensity::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn integrate(&self) -> Result<f64> {
        newton_cotes_sum(&self.grid, &self.values)
    }

    pub fn normalize(self) -> Result<GriddedDensity> {
        let mass = self.integrate()?;
        if !(mass > ZERO_MASS_THRESHOLD) || !mass.is_finite() {
            return Err(Error::ZeroMass { mass });
        }
        let values = self.values.into_iter().map(|v| v / mass).collect();
        Ok(GriddedDensity {
            grid: self.grid,
            values,
            normalized: true,
        })
    }

    /// Newton-Cotes estimate of `E[g(X)]`; the density must be normalized.
    pub fn expectation(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        if !self.normalized {
            return Err(Error::NotNormalized);
        }
        let integrand: Vec<f64> = self
            .grid
            .points()
            .zip(&self.values)
            .map(|(x, v)| g(x) * v)
            .collect();
        newton_cotes_sum(&self.grid, &integrand)
    }

    pub fn mean(&self) -> Result<f64> {
        self.expectation(|x| x)
    }

    pub fn variance(&self) -> Result<f64> {
        let mean = self.mean()?;
        self.expectation(|x| (x - mean).powi(2))
    }

    /// Standardized third central moment.
    pub fn skewness(&self) -> Result<f64> {
        let mean = self.mean()?;
        let var = self.expectation(|x| (x - mean).powi(2))?;
        let third = self.expectation(|x| (x - mean).powi(3))?;
        Ok(third / var.powf(1.5))
    }

    /// Write as CSV with header `x,density`, 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,density")?;
        for (x, v) in self.grid.points().zip(&self.values) {
            writeln!(out, "{x:.16e},{v:.16e}")?;
        }
        Ok(())
    }

    /// Read the `x,density` CSV layout back. The grid is reconstructed from the
    /// first and last `x`; the density is flagged normalized when its integral
    /// is within `1e-8` of one.
    pub fn read_csv<R: BufRead>(input: R, order: usize) -> Result<GriddedDensity> {
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if lineno == 0 {
                if line != "x,density" {
                    return Err(Error::Config(format!("unexpected header {line:?}")));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let (x, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Config(format!("line {}: expected two fields", lineno + 1)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))
            };
            xs.push(parse(x)?);
            values.push(parse(v)?);
        }
        if xs.len() < 2 {
            return Err(Error::Config("density CSV needs at least two rows".into()));
        }
        let grid = Grid::new(xs[0], xs[xs.len() - 1], xs.len() - 1, order)?;
        let tol = 1e-6 * grid.spacing();
        for (i, x) in xs.iter().enumerate() {
            if (x - grid.point(i)).abs() > tol {
                return Err(Error::Config(format!("x values are not evenly spaced at row {}", i + 2)));
            }
        }
        let mut density = GriddedDensity::new(grid, values)?;
        density.normalized = (density.integrate()? - 1.0).abs() <= 1e-8;
        Ok(density)
    }
}
