use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ModelKind, ModelSpec};
use crate::draws::Draws;
use crate::error::{Error, Result};

/// A simulated data set.
#[derive(Debug, Clone, PartialEq)]
pub enum FullData {
    /// Bernoulli outcomes.
    Binomial(Vec<bool>),
    /// Single-trial multinomial outcomes as zero-based category indices.
    Multinomial { categories: Vec<usize>, k: usize },
    /// One observation per row.
    Mvn(Draws),
}

impl FullData {
    pub fn len(&self) -> usize {
        match self {
            FullData::Binomial(v) => v.len(),
            FullData::Multinomial { categories, .. } => categories.len(),
            FullData::Mvn(rows) => rows.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sufficient statistics of the rows at `indices`.
    fn summarize(&self, indices: &[usize]) -> ShardData {
        match self {
            FullData::Binomial(v) => ShardData::Binomial {
                trials: indices.len(),
                successes: indices.iter().filter(|&&i| v[i]).count(),
            },
            FullData::Multinomial { categories, k } => {
                let mut counts = vec![0usize; *k];
                for &i in indices {
                    counts[categories[i]] += 1;
                }
                ShardData::Multinomial { counts }
            }
            FullData::Mvn(rows) => {
                let mut out = Draws::zeros(indices.len(), rows.cols());
                for (r, &i) in indices.iter().enumerate() {
                    out.row_mut(r).copy_from_slice(rows.row(i));
                }
                ShardData::Mvn(out)
            }
        }
    }

    /// The whole data set as a single shard with id 1.
    pub fn as_shard(&self) -> DataShard {
        let indices: Vec<usize> = (0..self.len()).collect();
        DataShard {
            shard_id: 1,
            data: self.summarize(&indices),
            indices,
        }
    }
}

/// What a shard sampler needs from its data.
#[derive(Debug, Clone, PartialEq)]
pub enum ShardData {
    Binomial { trials: usize, successes: usize },
    Multinomial { counts: Vec<usize> },
    Mvn(Draws),
}

impl ShardData {
    pub fn len(&self) -> usize {
        match self {
            ShardData::Binomial { trials, .. } => *trials,
            ShardData::Multinomial { counts } => counts.iter().sum(),
            ShardData::Mvn(rows) => rows.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One block of the partition.
#[derive(Debug, Clone, PartialEq)]
pub struct DataShard {
    /// 1-based shard number.
    pub shard_id: usize,
    /// Positions of this shard's rows in the full data set.
    pub indices: Vec<usize>,
    pub data: ShardData,
}

/// Draw `spec.data_size` independent observations from the sampling model.
pub fn simulate_data<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<FullData> {
    spec.validate()?;
    let r = spec.data_size;
    Ok(match &spec.kind {
        ModelKind::BinomialBeta { p_true, .. } => FullData::Binomial((0..r).map(|_| rng.random::<f64>() < *p_true).collect()),
        ModelKind::MultinomialDirichlet { p, .. } => {
            let dist = WeightedIndex::new(p).map_err(|e| Error::InvalidModel(e.to_string()))?;
            FullData::Multinomial {
                categories: (0..r).map(|_| dist.sample(rng)).collect(),
                k: p.len(),
            }
        }
        ModelKind::MvnExponential { mu, sigma, .. } => {
            let d = mu.len();
            let chol = sigma
                .matrix(d)?
                .cholesky()
                .ok_or_else(|| Error::InvalidModel("covariance is not positive definite".into()))?;
            let l: DMatrix<f64> = chol.l();
            let mean = DVector::from_column_slice(mu);
            let mut out = Draws::zeros(r, d);
            for i in 0..r {
                let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = &mean + &l * z;
                out.row_mut(i).copy_from_slice(y.as_slice());
            }
            FullData::Mvn(out)
        }
    })
}

/// Shuffle the rows uniformly and cut them into `m` contiguous blocks whose
/// sizes differ by at most one; the first `r mod m` blocks get the extra row.
pub fn partition<R: Rng + ?Sized>(data: &FullData, m: usize, rng: &mut R) -> Result<Vec<DataShard>> {
    let r = data.len();
    if m == 0 || m > r {
        return Err(Error::Config(format!("cannot split {r} observations into {m} shards")));
    }
    let mut order: Vec<usize> = (0..r).collect();
    order.shuffle(rng);
    let (base, extra) = (r / m, r % m);
    let mut start = 0;
    Ok((0..m)
        .map(|s| {
            let size = base + usize::from(s < extra);
            let indices = order[start..start + size].to_vec();
            start += size;
            DataShard {
                shard_id: s + 1,
                data: data.summarize(&indices),
                indices,
            }
        })
        .collect())
}
