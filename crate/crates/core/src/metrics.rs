//! Relative L2 distance between the full-data marginal posterior and each
//! method's estimate.

use serde::{Deserialize, Serialize};

use crate::combine::{CombinedSamples, Method};
use crate::error::{Error, Result};
use crate::estimate::{estimate_values, EstimatorSpec};
use crate::numeric::{newton_cotes_sum, Grid, GriddedDensity, PiecewisePolynomial};

fn check_pair(p: &GriddedDensity, q: &GriddedDensity) -> Result<()> {
    if p.grid() != q.grid() {
        return Err(Error::GridMismatch);
    }
    if !p.is_normalized() || !q.is_normalized() {
        return Err(Error::NotNormalized);
    }
    Ok(())
}

/// `sqrt(integral (p - q)^2)` by Newton-Cotes quadrature on the shared grid.
pub fn l2_distance(p: &GriddedDensity, q: &GriddedDensity) -> Result<f64> {
    check_pair(p, q)?;
    let sq: Vec<f64> = p.values().iter().zip(q.values()).map(|(a, b)| (a - b) * (a - b)).collect();
    Ok(newton_cotes_sum(p.grid(), &sq)?.max(0.0).sqrt())
}

/// `sqrt(integral p^2)`.
pub fn l2_norm(p: &GriddedDensity) -> Result<f64> {
    let sq: Vec<f64> = p.values().iter().map(|a| a * a).collect();
    Ok(newton_cotes_sum(p.grid(), &sq)?.max(0.0).sqrt())
}

/// `||full - estimate|| / ||full||`.
pub fn relative_l2(full: &GriddedDensity, estimate: &GriddedDensity) -> Result<f64> {
    check_pair(full, estimate)?;
    let norm = l2_norm(full)?;
    if !(norm > 0.0) {
        return Err(Error::ZeroNorm);
    }
    Ok(l2_distance(full, estimate)? / norm)
}

/// Smooth raw draws onto `grid` with `estimator` and normalize.
pub fn smooth_samples(values: &[f64], estimator: &EstimatorSpec, grid: &Grid) -> Result<GriddedDensity> {
    GriddedDensity::new(grid.clone(), estimate_values(values, estimator, grid)?)?.normalize()
}

/// One parameter of a sample-based method's output, smoothed onto the shared grid.
pub fn method_pipeline_density(
    samples: &CombinedSamples,
    parameter: usize,
    estimator: &EstimatorSpec,
    grid: &Grid,
) -> Result<GriddedDensity> {
    if parameter >= samples.draws.cols() {
        return Err(Error::ShapeMismatch(format!(
            "parameter {} requested from {}-dimensional draws",
            parameter + 1,
            samples.draws.cols()
        )));
    }
    smooth_samples(&samples.draws.column(parameter), estimator, grid)
}

/// Evaluate an interpolated density on another grid, clamp negative
/// interpolation overshoot to zero, and renormalize.
pub fn transfer_density(interpolant: &PiecewisePolynomial, grid: &Grid) -> Result<GriddedDensity> {
    GriddedDensity::from_fn(grid.clone(), |x| interpolant.eval(x).max(0.0))?.normalize()
}

/// Sample skewness `m3 / m2^(3/2)` with population moments.
pub fn sample_skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (m2, m3) = values.iter().fold((0.0, 0.0), |(a, b), x| {
        let c = x - mean;
        (a + c * c, b + c * c * c)
    });
    (m3 / n) / (m2 / n).powf(1.5)
}

/// Per-parameter relative L2 distances for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Report {
    pub model: String,
    pub d: usize,
    pub shards: usize,
    pub method: Method,
    /// 1-based parameter numbers, aligned with `per_parameter`.
    pub parameters: Vec<usize>,
    pub per_parameter: Vec<f64>,
    pub average: f64,
}

impl L2Report {
    pub fn new(model: &str, d: usize, shards: usize, method: Method, parameters: Vec<usize>, per_parameter: Vec<f64>) -> Result<L2Report> {
        if parameters.len() != per_parameter.len() || parameters.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters with {} distances",
                parameters.len(),
                per_parameter.len()
            )));
        }
        if let Some(v) = per_parameter.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidSamples(format!("distance {v} is not a non-negative number")));
        }
        let average = mean(&per_parameter);
        Ok(L2Report {
            model: model.to_string(),
            d,
            shards,
            method,
            parameters,
            per_parameter,
            average,
        })
    }

    pub fn recomputed_average(&self) -> f64 {
        mean(&self.per_parameter)
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
