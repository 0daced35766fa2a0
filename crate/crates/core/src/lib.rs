//! Combining embarrassingly parallel MCMC output.
//!
//! Data are split into `M` disjoint shards, each shard is sampled independently
//! under a fractionated prior, and the shard draws ("subposteriors") are merged
//! back into an estimate of the full-data posterior. Four combiners are
//! provided:
//!
//! * [`combine::combine_average`]: per-iteration mean of the shard draws.
//! * [`combine::combine_consensus`]: per-iteration precision-weighted mean.
//! * [`combine::combine_dpe`]: Gibbs sampler over the `T^M`-component Gaussian
//!   mixture formed by the product of shard kernel density estimates.
//! * [`product::direct_density_product`]: per-parameter marginal densities
//!   estimated on a grid, multiplied pointwise, interpolated, and normalized by
//!   Newton-Cotes quadrature.
//!
//! The [`models`] module simulates the three reference problems
//! (Binomial-Beta, Multinomial-Dirichlet, and Multivariate Normal with
//! Exponential priors), [`metrics`] scores estimates by relative L2 distance,
//! and [`harness`] wires everything into reproducible experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x < y)` rejects NaN too

pub mod combine;
pub mod draws;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod numeric;
pub mod product;

pub use combine::{CombinedSamples, Method, WeightMatrix};
pub use draws::{Draws, SubposteriorSamples};
pub use error::{Error, Result};
pub use estimate::{BandwidthRule, EstimatorKind, EstimatorSpec, MarginalSamples, Support};
pub use models::{DataShard, FractionatedPrior, FullData, ModelKind, ModelSpec};
pub use numeric::{Grid, GriddedDensity, PiecewisePolynomial};
pub use product::{GridConfig, MarginalEstimate, Spacing};
