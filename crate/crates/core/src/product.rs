//! The direct density product: per-parameter shard density estimates on a
//! shared grid, multiplied pointwise, interpolated, and normalized.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combine::common_shape;
use crate::draws::SubposteriorSamples;
use crate::error::{Error, Result};
use crate::estimate::{estimate_log_values, select_range, EstimatorSpec, MarginalSamples};
use crate::numeric::{build_grid, inverse_cdf_sample, lagrange_interpolate, Grid, GriddedDensity, PiecewisePolynomial};

/// How finely to resolve each parameter's range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    /// At least this many intervals across the range.
    Intervals(usize),
    /// Node spacing no wider than this, in parameter units.
    Width(f64),
}

impl Default for Spacing {
    fn default() -> Spacing {
        Spacing::Intervals(10_000)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(flatten)]
    pub spacing: Spacing,
    /// Newton-Cotes / Lagrange order.
    #[serde(default = "default_order")]
    pub order: usize,
    /// Fraction of the pooled sample span added on each side.
    #[serde(default = "default_padding")]
    pub padding: f64,
}

fn default_order() -> usize {
    2
}

fn default_padding() -> f64 {
    0.1
}

impl Default for GridConfig {
    fn default() -> GridConfig {
        GridConfig {
            spacing: Spacing::default(),
            order: default_order(),
            padding: default_padding(),
        }
    }
}

impl GridConfig {
    pub fn grid(&self, a: f64, b: f64) -> Result<Grid> {
        match self.spacing {
            Spacing::Intervals(n) => Grid::with_intervals(a, b, n, self.order),
            Spacing::Width(w) => build_grid(a, b, w, self.order),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.spacing {
            Spacing::Intervals(0) => return Err(Error::Config("grid needs at least one interval".into())),
            Spacing::Width(w) if !(w > 0.0) || !w.is_finite() => {
                return Err(Error::Config(format!("grid width {w} must be positive")))
            }
            _ => {}
        }
        if !(1..=4).contains(&self.order) {
            return Err(Error::UnsupportedOrder(self.order));
        }
        if !(self.padding >= 0.0) {
            return Err(Error::Config(format!("padding {} must be non-negative", self.padding)));
        }
        Ok(())
    }
}

/// One parameter's combined marginal posterior.
#[derive(Debug, Clone)]
pub struct MarginalEstimate {
    pub parameter_index: usize,
    /// Normalized product density at the grid nodes.
    pub density: GriddedDensity,
    /// Piecewise Lagrange interpolant of `density`.
    pub interpolant: PiecewisePolynomial,
    /// Inverse-CDF draws, when requested.
    pub samples: Option<Vec<f64>>,
}

/// Multiply shard densities given as log-values on one grid.
///
/// Logs are summed left to right over shards, the maximum is subtracted, and
/// the result is exponentiated and normalized. A node where any shard is zero
/// (log `-inf`) stays zero.
pub fn product_of_log_densities(grid: &Grid, shard_logs: &[Vec<f64>]) -> Result<GriddedDensity> {
    if shard_logs.is_empty() {
        return Err(Error::InvalidSamples("no shard densities to multiply".into()));
    }
    let mut acc = vec![0.0; grid.len()];
    for logs in shard_logs {
        if logs.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        for (a, l) in acc.iter_mut().zip(logs) {
            *a += l;
        }
    }
    let max = acc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::ZeroMass { mass: 0.0 });
    }
    let values = acc.into_iter().map(|l| (l - max).exp()).collect();
    GriddedDensity::new(grid.clone(), values)?.normalize()
}

/// Run the direct method for each parameter in `parameters` (zero-based).
///
/// Parameters are processed in parallel and independently: when `samples` is
/// set, parameter `j` draws from its own ChaCha8 stream `j` of `seed`.
pub fn direct_density_product(
    subs: &[SubposteriorSamples],
    parameters: &[usize],
    estimator: &EstimatorSpec,
    grid_config: &GridConfig,
    samples: Option<usize>,
    seed: u64,
) -> Result<Vec<MarginalEstimate>> {
    let (_, d) = common_shape(subs)?;
    grid_config.validate()?;
    estimator.validate()?;
    if let Some(&j) = parameters.iter().find(|&&j| j >= d) {
        return Err(Error::ShapeMismatch(format!("parameter {} requested from {d}-dimensional draws", j + 1)));
    }
    parameters
        .par_iter()
        .map(|&j| marginal_product(subs, j, estimator, grid_config, samples, seed))
        .collect()
}

fn marginal_product(
    subs: &[SubposteriorSamples],
    j: usize,
    estimator: &EstimatorSpec,
    grid_config: &GridConfig,
    samples: Option<usize>,
    seed: u64,
) -> Result<MarginalEstimate> {
    let marginals = subs
        .iter()
        .map(|s| MarginalSamples::new(s.draws.column(j), s.shard_id, j))
        .collect::<Result<Vec<_>>>()?;
    let (a, b) = select_range(&marginals, grid_config.padding, estimator.support.as_ref())?;
    let grid = grid_config.grid(a, b)?;
    let logs = marginals
        .iter()
        .map(|m| estimate_log_values(m.values(), estimator, &grid))
        .collect::<Result<Vec<_>>>()?;
    let density = product_of_log_densities(&grid, &logs)?;
    let interpolant = lagrange_interpolate(&density);
    let samples = match samples {
        Some(count) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            Some(inverse_cdf_sample(&density, count, &mut rng)?)
        }
        None => None,
    };
    Ok(MarginalEstimate {
        parameter_index: j,
        density,
        interpolant,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::draws::Draws;
    use crate::estimate::{EstimatorKind, Support};
    use rand_distr::{Distribution, Normal};

    fn shard(id: usize, draws: Draws) -> SubposteriorSamples {
        SubposteriorSamples {
            draws,
            shard_id: id,
            seed: 0,
            burnin: 0,
        }
    }

    fn normal_shards(m: usize, t: usize, seed: u64) -> Vec<SubposteriorSamples> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, 1.0).unwrap();
        (0..m)
            .map(|k| {
                let data: Vec<f64> = (0..2 * t).map(|_| n.sample(&mut rng)).collect();
                shard(k + 1, Draws::new(t, 2, data).unwrap())
            })
            .collect()
    }

    #[test]
    fn grid_config_json() {
        let g: GridConfig = serde_json::from_str(r#"{"width": 1e-5}"#).unwrap();
        assert_eq!(g.spacing, Spacing::Width(1e-5));
        assert_eq!((g.order, g.padding), (2, 0.1));
        let g: GridConfig = serde_json::from_str(r#"{"intervals": 500, "order": 4}"#).unwrap();
        assert_eq!(g.grid(0.0, 1.0).unwrap().intervals(), 500);
        assert!(GridConfig { order: 5, ..GridConfig::default() }.validate().is_err());
    }

    #[test]
    fn single_shard_is_its_own_normalized_estimate() {
        let subs = normal_shards(1, 2000, 1);
        let spec = EstimatorSpec::new(EstimatorKind::GaussianKde);
        let cfg = GridConfig {
            spacing: Spacing::Intervals(400),
            ..GridConfig::default()
        };
        let out = direct_density_product(&subs, &[0], &spec, &cfg, None, 0).unwrap();
        let grid = out[0].density.grid().clone();
        let direct = crate::estimate::estimate_values(&subs[0].draws.column(0), &spec, &grid).unwrap();
        let direct = GriddedDensity::new(grid, direct).unwrap().normalize().unwrap();
        for (x, y) in out[0].density.values().iter().zip(direct.values()) {
            assert!((x - y).abs() <= 1e-12 * y.max(1e-3));
        }
    }

    #[test]
    fn scale_invariance_of_shard_densities() {
        let grid = Grid::new(-3.0, 3.0, 600, 2).unwrap();
        let logs: Vec<Vec<f64>> = (0..4)
            .map(|m| grid.points().map(|x| -0.5 * (x - 0.2 * m as f64).powi(2)).collect())
            .collect();
        let scaled: Vec<Vec<f64>> = logs
            .iter()
            .enumerate()
            .map(|(m, l)| l.iter().map(|v| v + (m as f64 * 37.0 - 50.0)).collect())
            .collect();
        let a = product_of_log_densities(&grid, &logs).unwrap();
        let b = product_of_log_densities(&grid, &scaled).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn shard_permutation_invariance() {
        let subs = normal_shards(5, 1000, 2);
        let mut perm = subs.clone();
        perm.reverse();
        perm.swap(1, 3);
        let spec = EstimatorSpec::new(EstimatorKind::GaussianKde);
        let cfg = GridConfig::default();
        let a = direct_density_product(&subs, &[0], &spec, &cfg, None, 0).unwrap();
        let b = direct_density_product(&perm, &[0], &spec, &cfg, None, 0).unwrap();
        for (x, y) in a[0].density.values().iter().zip(b[0].density.values()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-12));
        }
    }

    #[test]
    fn parameters_are_independent() {
        let subs = normal_shards(3, 500, 3);
        let spec = EstimatorSpec::new(EstimatorKind::GaussianKde);
        let cfg = GridConfig {
            spacing: Spacing::Intervals(200),
            ..GridConfig::default()
        };
        let both = direct_density_product(&subs, &[0, 1], &spec, &cfg, Some(100), 9).unwrap();
        let only = direct_density_product(&subs, &[1], &spec, &cfg, Some(100), 9).unwrap();
        assert_eq!(both[1].density, only[0].density);
        assert_eq!(both[1].samples, only[0].samples);
        assert_ne!(both[0].samples, both[1].samples);
    }

    #[test]
    fn disjoint_shards_have_zero_mass() {
        let grid = Grid::new(0.0, 1.0, 10, 2).unwrap();
        let a: Vec<f64> = grid.points().map(|x| if x < 0.5 { 0.0 } else { f64::NEG_INFINITY }).collect();
        let b: Vec<f64> = grid.points().map(|x| if x < 0.5 { f64::NEG_INFINITY } else { 0.0 }).collect();
        assert!(matches!(product_of_log_densities(&grid, &[a, b]), Err(Error::ZeroMass { .. })));
    }

    #[test]
    fn samples_stay_on_grid() {
        let subs = normal_shards(2, 500, 4);
        let spec = EstimatorSpec::new(EstimatorKind::ReflectedKde).with_support(Support::UNBOUNDED);
        let out = direct_density_product(&subs, &[0], &spec, &GridConfig::default(), Some(5000), 1).unwrap();
        let g = out[0].density.grid();
        assert!(out[0].samples.as_ref().unwrap().iter().all(|&x| g.contains(x)));
        assert!((out[0].density.integrate().unwrap() - 1.0).abs() < 1e-8);
        assert!(out[0].density.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn normalization_constant_converges_at_simpson_rate() {
        // Unnormalized exp(2x) on [0, 1]: the Simpson mass error shrinks by
        // about 2^4 per halving of the spacing.
        let exact = (2.0f64.exp() - 1.0) / 2.0;
        let mass = |n: usize| {
            let grid = Grid::new(0.0, 1.0, n, 2).unwrap();
            GriddedDensity::from_fn(grid, |x| (2.0 * x).exp()).unwrap().integrate().unwrap()
        };
        let e1 = (mass(8) - exact).abs();
        let e2 = (mass(16) - exact).abs();
        let ratio = e1 / e2;
        assert!(ratio > 15.0 && ratio < 17.0, "ratio {ratio}");
    }
}
