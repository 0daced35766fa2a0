//! One-dimensional density estimation of subposterior marginals onto a grid.
//!
//! Estimators sit behind [`EstimatorSpec`]: a plain Gaussian KDE, a KDE with
//! samples mirrored across declared support bounds (the default), and a
//! penalized log-spline fit that models the log-density with a natural cubic
//! spline.

mod bandwidth;
mod kde;
mod logspline;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Grid, GriddedDensity};

pub use bandwidth::{bandwidth, quantile};
pub use logspline::LogsplineFit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    GaussianKde,
    #[default]
    ReflectedKde,
    LogsplineLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `0.9 * min(sd, IQR / 1.34) * T^(-1/5)`
    #[default]
    Silverman,
    /// `1.059 * sd * T^(-1/5)`
    Scott,
    Fixed(f64),
}

/// Parameter support; `None` means unbounded on that side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Support {
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

impl Support {
    pub const UNBOUNDED: Support = Support {
        lower: None,
        upper: None,
    };

    pub fn new(lower: Option<f64>, upper: Option<f64>) -> Support {
        Support { lower, upper }
    }

    pub fn unit_interval() -> Support {
        Support::new(Some(0.0), Some(1.0))
    }

    pub fn positive() -> Support {
        Support::new(Some(0.0), None)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower.is_none_or(|l| x >= l) && self.upper.is_none_or(|u| x <= u)
    }

    /// Mirror a point lying outside the support back inside it.
    pub fn fold(&self, x: f64) -> f64 {
        match (self.lower, self.upper) {
            (Some(l), _) if x < l => 2.0 * l - x,
            (_, Some(u)) if x > u => 2.0 * u - x,
            _ => x,
        }
    }

    fn validate(&self) -> Result<()> {
        if let (Some(l), Some(u)) = (self.lower, self.upper) {
            if !(l < u) {
                return Err(Error::Config(format!("support lower {l} must be below upper {u}")));
            }
        }
        Ok(())
    }
}

/// Which estimator to use and how to tune it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EstimatorSpec {
    #[serde(default)]
    pub kind: EstimatorKind,
    #[serde(default)]
    pub bandwidth: BandwidthRule,
    /// Bounds used for reflection and range clipping. The harness fills this
    /// in from the model when it is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Support>,
    /// Number of spline knots for `logspline_like`; grows with the sample size when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<usize>,
    /// Roughness penalty weight for `logspline_like`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind) -> EstimatorSpec {
        EstimatorSpec {
            kind,
            ..EstimatorSpec::default()
        }
    }

    pub fn with_bandwidth(mut self, rule: BandwidthRule) -> EstimatorSpec {
        self.bandwidth = rule;
        self
    }

    pub fn with_support(mut self, support: Support) -> EstimatorSpec {
        self.support = Some(support);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let BandwidthRule::Fixed(h) = self.bandwidth {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::Config(format!("fixed bandwidth {h} must be positive")));
            }
        }
        if let Some(s) = &self.support {
            s.validate()?;
        }
        if let Some(k) = self.knots {
            if k < 3 {
                return Err(Error::Config(format!("log-spline needs at least 3 knots, got {k}")));
            }
        }
        if let Some(p) = self.penalty {
            if !(p >= 0.0) {
                return Err(Error::Config(format!("penalty {p} must be non-negative")));
            }
        }
        Ok(())
    }

    fn support_or_unbounded(&self) -> Support {
        self.support.unwrap_or(Support::UNBOUNDED)
    }
}

/// One parameter's draws from one shard.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSamples {
    values: Vec<f64>,
    pub shard_id: usize,
    pub parameter_index: usize,
}

impl MarginalSamples {
    pub fn new(values: Vec<f64>, shard_id: usize, parameter_index: usize) -> Result<MarginalSamples> {
        check_samples(&values)?;
        Ok(MarginalSamples {
            values,
            shard_id,
            parameter_index,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn check_samples(values: &[f64]) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::InvalidSamples(format!(
            "need at least 2 samples, got {}",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidSamples(format!("non-finite sample {v}")));
    }
    Ok(())
}

/// Grid range covering every shard's samples, padded by `padding_fraction` of
/// the pooled span on each side and clipped to `support`.
pub fn select_range(
    marginals: &[MarginalSamples],
    padding_fraction: f64,
    support: Option<&Support>,
) -> Result<(f64, f64)> {
    range_of(marginals.iter().map(MarginalSamples::values), padding_fraction, support)
}

/// [`select_range`] over arbitrary sample slices.
pub fn range_of<'a>(
    samples: impl IntoIterator<Item = &'a [f64]>,
    padding_fraction: f64,
    support: Option<&Support>,
) -> Result<(f64, f64)> {
    if !(padding_fraction >= 0.0) {
        return Err(Error::Config(format!("padding {padding_fraction} must be non-negative")));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut seen = false;
    for s in samples {
        for &v in s {
            if !v.is_finite() {
                return Err(Error::InvalidSamples(format!("non-finite sample {v}")));
            }
            lo = lo.min(v);
            hi = hi.max(v);
            seen = true;
        }
    }
    if !seen {
        return Err(Error::InvalidSamples("no samples to take a range over".into()));
    }
    let span = hi - lo;
    if !(span > 0.0) {
        return Err(Error::DegenerateRange);
    }
    let mut a = lo - padding_fraction * span;
    let mut b = hi + padding_fraction * span;
    if let Some(s) = support {
        if let Some(l) = s.lower {
            a = a.max(l);
        }
        if let Some(u) = s.upper {
            b = b.min(u);
        }
    }
    if !(a < b) {
        return Err(Error::DegenerateRange);
    }
    Ok((a, b))
}

/// Estimate a marginal density at every node of `grid`.
///
/// The result is not normalized; the caller decides over which range to
/// normalize.
pub fn estimate_density(samples: &MarginalSamples, spec: &EstimatorSpec, grid: &Grid) -> Result<GriddedDensity> {
    let values = estimate_values(samples.values(), spec, grid)?;
    GriddedDensity::new(grid.clone(), values)
}

/// Density values at the grid nodes for raw samples.
pub fn estimate_values(samples: &[f64], spec: &EstimatorSpec, grid: &Grid) -> Result<Vec<f64>> {
    check_samples(samples)?;
    spec.validate()?;
    match spec.kind {
        EstimatorKind::GaussianKde => {
            let h = bandwidth(samples, spec.bandwidth)?;
            Ok(kde::evaluate(samples, h, grid, None))
        }
        EstimatorKind::ReflectedKde => {
            let h = bandwidth(samples, spec.bandwidth)?;
            Ok(kde::evaluate(samples, h, grid, Some(&spec.support_or_unbounded())))
        }
        EstimatorKind::LogsplineLike => {
            let logs = estimate_log_values(samples, spec, grid)?;
            Ok(logs.into_iter().map(f64::exp).collect())
        }
    }
}

/// Natural log of the density at each grid node; `-inf` where it is zero.
///
/// The log-spline estimator produces log-densities directly, which keeps far
/// tails representable when many shard densities are multiplied.
pub fn estimate_log_values(samples: &[f64], spec: &EstimatorSpec, grid: &Grid) -> Result<Vec<f64>> {
    check_samples(samples)?;
    spec.validate()?;
    match spec.kind {
        EstimatorKind::LogsplineLike => {
            let support = spec.support_or_unbounded();
            let fit = LogsplineFit::fit(
                samples,
                &support,
                (grid.lower(), grid.upper()),
                spec.knots.unwrap_or_else(|| logspline::default_knots(samples.len())),
                spec.penalty.unwrap_or(logspline::DEFAULT_PENALTY),
            )?;
            Ok(grid
                .points()
                .map(|x| if support.contains(x) { fit.log_density(x) } else { f64::NEG_INFINITY })
                .collect())
        }
        _ => Ok(estimate_values(samples, spec, grid)?.into_iter().map(f64::ln).collect()),
    }
}
