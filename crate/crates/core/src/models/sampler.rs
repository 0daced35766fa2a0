use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};

use super::data::{FullData, ShardData};
use super::truncnorm::sample_positive_normal;
use super::{fractionate_prior, DataShard, FractionatedPrior, ModelKind, ModelSpec};
use crate::draws::{Draws, SubposteriorSamples};
use crate::error::{Error, Result};

/// Draw `draws` samples from one shard's subposterior under `prior`.
///
/// Conjugate models are sampled exactly; `burnin` draws are still generated
/// and discarded so every model consumes its stream the same way. The MVN
/// model runs a component-wise Gibbs sampler whose full conditionals are
/// normals truncated to `(0, inf)`.
pub fn sample_subposterior(
    spec: &ModelSpec,
    shard: &DataShard,
    prior: &FractionatedPrior,
    draws: usize,
    burnin: usize,
    seed: u64,
) -> Result<SubposteriorSamples> {
    if draws == 0 {
        return Err(Error::Config("number of draws must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = match (&spec.kind, prior, &shard.data) {
        (ModelKind::BinomialBeta { .. }, FractionatedPrior::Beta { alpha, beta, .. }, ShardData::Binomial { trials, successes }) => {
            let s = *successes as f64;
            let f = (*trials - *successes) as f64;
            let dist = Beta::new(alpha + s, beta + f).map_err(|e| Error::InvalidModel(e.to_string()))?;
            exact(draws, burnin, 1, &mut rng, |rng, row| row[0] = dist.sample(rng))
        }
        (ModelKind::MultinomialDirichlet { .. }, FractionatedPrior::Dirichlet { alpha, .. }, ShardData::Multinomial { counts }) => {
            if counts.len() != alpha.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} category counts for {} concentrations",
                    counts.len(),
                    alpha.len()
                )));
            }
            let gammas = alpha
                .iter()
                .zip(counts)
                .map(|(a, &c)| Gamma::new(a + c as f64, 1.0))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidModel(e.to_string()))?;
            exact(draws, burnin, alpha.len(), &mut rng, |rng, row| {
                for (x, g) in row.iter_mut().zip(&gammas) {
                    *x = g.sample(rng);
                }
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= total);
            })
        }
        (ModelKind::MvnExponential { mu, sigma, .. }, FractionatedPrior::Exponential { lambda, .. }, ShardData::Mvn(rows)) => {
            let sigma = sigma.matrix(mu.len())?;
            mvn_gibbs(rows, &sigma, lambda, draws, burnin, shard.shard_id, &mut rng)?
        }
        _ => {
            return Err(Error::InvalidModel(format!(
                "shard data and prior do not match the {} model",
                spec.name()
            )))
        }
    };
    if let Some(t) = (0..out.rows()).find(|&t| out.row(t).iter().any(|x| !x.is_finite())) {
        return Err(Error::ChainDiagnosticFailure {
            shard: shard.shard_id,
            iteration: burnin + t + 1,
        });
    }
    Ok(SubposteriorSamples {
        draws: out,
        shard_id: shard.shard_id,
        seed,
        burnin,
    })
}

/// Reference chain on all the data with the unfractionated prior; its
/// `shard_id` is 0.
pub fn sample_full_posterior(spec: &ModelSpec, data: &FullData, draws: usize, burnin: usize, seed: u64) -> Result<SubposteriorSamples> {
    let prior = fractionate_prior(spec, 1)?;
    let mut shard = data.as_shard();
    shard.shard_id = 0;
    sample_subposterior(spec, &shard, &prior, draws, burnin, seed)
}

fn exact<R: Rng>(draws: usize, burnin: usize, d: usize, rng: &mut R, mut fill: impl FnMut(&mut R, &mut [f64])) -> Draws {
    let mut scratch = vec![0.0; d];
    for _ in 0..burnin {
        fill(rng, &mut scratch);
    }
    let mut out = Draws::zeros(draws, d);
    for t in 0..draws {
        fill(rng, out.row_mut(t));
    }
    out
}

/// Gibbs sampler for `mu | y` with `y_i ~ N(mu, sigma)` and independent
/// `Exponential(lambda_j)` priors.
///
/// With `P = n sigma^{-1}` the full conditional of `mu_j` is normal with
/// precision `P_jj` and mean
/// `ybar_j - (sum_{k != j} P_jk (mu_k - ybar_k) + lambda_j) / P_jj`,
/// truncated to `(0, inf)`.
fn mvn_gibbs<R: Rng>(
    rows: &Draws,
    sigma: &DMatrix<f64>,
    lambda: &[f64],
    draws: usize,
    burnin: usize,
    shard_id: usize,
    rng: &mut R,
) -> Result<Draws> {
    let n = rows.rows();
    let d = rows.cols();
    if n == 0 {
        return Err(Error::InvalidModel(format!("shard {shard_id} has no observations")));
    }
    if sigma.nrows() != d || lambda.len() != d {
        return Err(Error::ShapeMismatch(format!("data have {d} columns")));
    }
    let mut ybar = vec![0.0; d];
    for t in 0..n {
        for (m, y) in ybar.iter_mut().zip(rows.row(t)) {
            *m += y;
        }
    }
    ybar.iter_mut().for_each(|m| *m /= n as f64);
    let inv = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidModel("covariance is not positive definite".into()))?
        .inverse();
    let prec = inv * n as f64;

    let mut mu: Vec<f64> = ybar.iter().map(|&y| if y > 0.0 { y } else { 1.0 }).collect();
    let mut out = Draws::zeros(draws, d);
    for sweep in 0..burnin + draws {
        for j in 0..d {
            let pjj = prec[(j, j)];
            let mut s = 0.0;
            for k in 0..d {
                if k != j {
                    s += prec[(j, k)] * (mu[k] - ybar[k]);
                }
            }
            let mean = ybar[j] - (s + lambda[j]) / pjj;
            mu[j] = sample_positive_normal(mean, pjj.sqrt().recip(), rng);
        }
        if sweep >= burnin {
            out.row_mut(sweep - burnin).copy_from_slice(&mu);
        }
    }
    Ok(out)
}
