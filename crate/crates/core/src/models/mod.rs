//! The three reference models: simulation, partitioning, prior
//! fractionation, and posterior sampling.

mod data;
mod sampler;
mod truncnorm;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::Support;

pub use data::{partition, simulate_data, DataShard, FullData, ShardData};
pub use sampler::{sample_full_posterior, sample_subposterior};
pub use truncnorm::sample_positive_normal;

/// Covariance matrix, either explicit or equicorrelated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Covariance {
    Dense(Vec<Vec<f64>>),
    /// Every diagonal entry is `variance`, every off-diagonal entry `covariance`.
    Equicorrelated { variance: f64, covariance: f64 },
}

impl Covariance {
    pub fn matrix(&self, d: usize) -> Result<DMatrix<f64>> {
        match self {
            Covariance::Dense(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::InvalidModel(format!("covariance must be {d}x{d}")));
                }
                Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
            }
            Covariance::Equicorrelated { variance, covariance } => {
                Ok(DMatrix::from_fn(d, d, |i, j| if i == j { *variance } else { *covariance }))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelKind {
    BinomialBeta {
        p_true: f64,
        alpha: f64,
        beta: f64,
    },
    MultinomialDirichlet {
        p: Vec<f64>,
        alpha: Vec<f64>,
    },
    MvnExponential {
        mu: Vec<f64>,
        sigma: Covariance,
        lambda: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub data_size: usize,
}

impl ModelSpec {
    pub fn binomial(p_true: f64, alpha: f64, beta: f64, data_size: usize) -> ModelSpec {
        ModelSpec {
            kind: ModelKind::BinomialBeta { p_true, alpha, beta },
            data_size,
        }
    }

    pub fn multinomial(p: Vec<f64>, alpha: Vec<f64>, data_size: usize) -> ModelSpec {
        ModelSpec {
            kind: ModelKind::MultinomialDirichlet { p, alpha },
            data_size,
        }
    }

    pub fn mvn(mu: Vec<f64>, sigma: Covariance, lambda: Vec<f64>, data_size: usize) -> ModelSpec {
        ModelSpec {
            kind: ModelKind::MvnExponential { mu, sigma, lambda },
            data_size,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::BinomialBeta { .. } => "binomial_beta",
            ModelKind::MultinomialDirichlet { .. } => "multinomial_dirichlet",
            ModelKind::MvnExponential { .. } => "mvn_exponential",
        }
    }

    /// Number of model parameters.
    pub fn dim(&self) -> usize {
        match &self.kind {
            ModelKind::BinomialBeta { .. } => 1,
            ModelKind::MultinomialDirichlet { p, .. } => p.len(),
            ModelKind::MvnExponential { mu, .. } => mu.len(),
        }
    }

    /// Zero-based indices of the parameters that are combined and scored.
    ///
    /// The last multinomial probability is determined by the others, and the
    /// full simplex covariance is singular, so it is left out.
    pub fn reported_parameters(&self) -> Vec<usize> {
        match &self.kind {
            ModelKind::MultinomialDirichlet { p, .. } => (0..p.len() - 1).collect(),
            _ => (0..self.dim()).collect(),
        }
    }

    /// Support of every parameter.
    pub fn support(&self) -> Support {
        match self.kind {
            ModelKind::BinomialBeta { .. } | ModelKind::MultinomialDirichlet { .. } => Support::unit_interval(),
            ModelKind::MvnExponential { .. } => Support::positive(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.data_size == 0 {
            return bad("data_size must be positive".into());
        }
        match &self.kind {
            ModelKind::BinomialBeta { p_true, alpha, beta } => {
                if !(*p_true > 0.0 && *p_true < 1.0) {
                    return bad(format!("p_true {p_true} must lie in (0, 1)"));
                }
                if !(*alpha > 0.0 && *beta > 0.0) {
                    return bad(format!("alpha {alpha} and beta {beta} must be positive"));
                }
            }
            ModelKind::MultinomialDirichlet { p, alpha } => {
                if p.len() < 2 || p.len() != alpha.len() {
                    return bad(format!(
                        "need at least 2 categories with matching alpha; got {} and {}",
                        p.len(),
                        alpha.len()
                    ));
                }
                if p.iter().any(|v| !(*v > 0.0)) {
                    return bad("category probabilities must be positive".into());
                }
                let total: f64 = p.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("category probabilities sum to {total}, not 1"));
                }
                if alpha.iter().any(|a| !(*a > 0.0)) {
                    return bad("Dirichlet concentrations must be positive".into());
                }
            }
            ModelKind::MvnExponential { mu, sigma, lambda } => {
                let d = mu.len();
                if d == 0 || lambda.len() != d {
                    return bad(format!("mu has {d} entries, lambda {}", lambda.len()));
                }
                if lambda.iter().any(|l| !(*l > 0.0)) {
                    return bad("exponential rates must be positive".into());
                }
                let s = sigma.matrix(d)?;
                if (&s - s.transpose()).amax() > 1e-12 * s.amax() {
                    return bad("covariance is not symmetric".into());
                }
                if s.cholesky().is_none() {
                    return bad("covariance is not positive definite".into());
                }
            }
        }
        Ok(())
    }
}

/// Prior raised to the power `1/M`, expressed in the model's own family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FractionatedPrior {
    Beta { alpha: f64, beta: f64, shards: usize },
    Dirichlet { alpha: Vec<f64>, shards: usize },
    Exponential { lambda: Vec<f64>, shards: usize },
}

impl FractionatedPrior {
    pub fn shards(&self) -> usize {
        match self {
            FractionatedPrior::Beta { shards, .. }
            | FractionatedPrior::Dirichlet { shards, .. }
            | FractionatedPrior::Exponential { shards, .. } => *shards,
        }
    }
}

/// `alpha' = (alpha + M - 1) / M` for Beta and Dirichlet concentrations and
/// `lambda' = lambda / M` for exponential rates.
pub fn fractionate_prior(spec: &ModelSpec, m: usize) -> Result<FractionatedPrior> {
    if m == 0 {
        return Err(Error::Config("number of shards must be at least 1".into()));
    }
    let mf = m as f64;
    let conc = |a: f64| (a + mf - 1.0) / mf;
    Ok(match &spec.kind {
        ModelKind::BinomialBeta { alpha, beta, .. } => FractionatedPrior::Beta {
            alpha: conc(*alpha),
            beta: conc(*beta),
            shards: m,
        },
        ModelKind::MultinomialDirichlet { alpha, .. } => FractionatedPrior::Dirichlet {
            alpha: alpha.iter().map(|&a| conc(a)).collect(),
            shards: m,
        },
        ModelKind::MvnExponential { lambda, .. } => FractionatedPrior::Exponential {
            lambda: lambda.iter().map(|&l| l / mf).collect(),
            shards: m,
        },
    })
}

/// The three models at the sizes used in the reference study.
pub mod presets {
    use super::*;

    pub fn binomial() -> ModelSpec {
        ModelSpec::binomial(0.001, 1.0, 1.0, 100_000)
    }

    pub fn multinomial() -> ModelSpec {
        let mut p = vec![0.001; 19];
        p.push(0.981);
        ModelSpec::multinomial(p, vec![1.0; 20], 100_000)
    }

    pub fn mvn() -> ModelSpec {
        ModelSpec::mvn(
            vec![1000.0; 20],
            Covariance::Equicorrelated {
                variance: 1e8,
                covariance: 2e7,
            },
            vec![1.0; 20],
            100_000,
        )
    }
}
