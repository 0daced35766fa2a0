use nalgebra::{DMatrix, DVector};

use super::{common_shape, sorted_sum, CombinedSamples, Method};
use crate::draws::{Draws, SubposteriorSamples};
use crate::error::{Error, Result};

/// Covariance matrices with a larger 2-norm condition number count as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Per-shard weights `W_m`, the inverse sample covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    matrices: Vec<DMatrix<f64>>,
}

impl WeightMatrix {
    /// Explicit weights; each must be square with the same size.
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<WeightMatrix> {
        let d = matrices.first().map_or(0, |w| w.nrows());
        if d == 0 || matrices.iter().any(|w| w.nrows() != d || w.ncols() != d) {
            return Err(Error::ShapeMismatch("weight matrices must be square and equal-sized".into()));
        }
        Ok(WeightMatrix { matrices })
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 || !min.is_finite() || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

fn sample_covariance(draws: &Draws) -> DMatrix<f64> {
    let (t, d) = (draws.rows(), draws.cols());
    let mut mean = vec![0.0; d];
    for i in 0..t {
        for (m, x) in mean.iter_mut().zip(draws.row(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= t as f64);
    let mut cov = DMatrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for i in 0..t {
        for ((c, x), m) in centered.iter_mut().zip(draws.row(i)).zip(&mean) {
            *c = x - m;
        }
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            cov[(a, b)] /= (t - 1) as f64;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    cov
}

/// `W_m = (sample covariance of shard m)^{-1}`.
pub fn shard_weights(subs: &[SubposteriorSamples]) -> Result<WeightMatrix> {
    let (t, d) = common_shape(subs)?;
    if t < d + 1 {
        return Err(Error::ShapeMismatch(format!("need at least {} draws per shard for a {d}x{d} covariance", d + 1)));
    }
    let matrices = subs
        .iter()
        .map(|s| {
            let cov = sample_covariance(&s.draws);
            let condition = condition_number(&cov);
            if !(condition <= MAX_CONDITION) {
                return Err(Error::SingularCovariance {
                    shard: Some(s.shard_id),
                    condition,
                });
            }
            cov.cholesky()
                .map(|c| c.inverse())
                .ok_or(Error::SingularCovariance {
                    shard: Some(s.shard_id),
                    condition,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightMatrix { matrices })
}

/// `theta_t = (sum_m W_m)^{-1} sum_m W_m theta_{t,m}`.
pub fn combine_consensus(subs: &[SubposteriorSamples], weights: &WeightMatrix) -> Result<CombinedSamples> {
    let (t, d) = common_shape(subs)?;
    if weights.len() != subs.len() || weights.dim() != d {
        return Err(Error::ShapeMismatch(format!(
            "{} weight matrices of size {} for {} shards of dimension {d}",
            weights.len(),
            weights.dim(),
            subs.len()
        )));
    }
    let m = subs.len();
    let mut buf = vec![0.0; m];
    let total = DMatrix::from_fn(d, d, |a, b| {
        for (x, w) in buf.iter_mut().zip(&weights.matrices) {
            *x = w[(a, b)];
        }
        sorted_sum(&mut buf)
    });
    let condition = condition_number(&total);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularCovariance { shard: None, condition });
    }
    let solver = total.lu();
    let mut out = Draws::zeros(t, d);
    let mut terms = vec![0.0; m * d];
    let mut rhs = DVector::zeros(d);
    for i in 0..t {
        for (k, (s, w)) in subs.iter().zip(&weights.matrices).enumerate() {
            let theta = s.draws.row(i);
            for a in 0..d {
                terms[a * m + k] = (0..d).map(|b| w[(a, b)] * theta[b]).sum();
            }
        }
        for a in 0..d {
            rhs[a] = sorted_sum(&mut terms[a * m..(a + 1) * m]);
        }
        let theta = solver
            .solve(&rhs)
            .ok_or(Error::SingularCovariance { shard: None, condition })?;
        out.row_mut(i).copy_from_slice(theta.as_slice());
    }
    Ok(CombinedSamples {
        draws: out,
        method: Method::Consensus,
    })
}
