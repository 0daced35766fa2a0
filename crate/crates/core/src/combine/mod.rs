//! Sample-space combiners: averaging, consensus Monte Carlo, and the
//! kernel-product mixture sampler.
//!
//! Shard draws are paired by iteration index. Sums over shards are taken in
//! sorted order so results do not depend on the order shards are listed in.

mod consensus;
mod dpe;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::draws::{Draws, SubposteriorSamples};
use crate::error::{Error, Result};

pub use consensus::{combine_consensus, shard_weights, WeightMatrix, MAX_CONDITION};
pub use dpe::{combine_dpe, default_dpe_iterations, dpe_bandwidth, sample_log_weights, DpeChain};

/// The four combination methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Consensus,
    Dpe,
    Average,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Direct, Method::Consensus, Method::Dpe, Method::Average];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Consensus => "consensus",
            Method::Dpe => "dpe",
            Method::Average => "average",
        }
    }

    /// Whether the method produces samples rather than a density.
    pub fn is_sample_based(self) -> bool {
        self != Method::Direct
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Draws produced by a sample-space combiner.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedSamples {
    pub draws: Draws,
    pub method: Method,
}

/// Common `(T, d)` of all shards.
pub(crate) fn common_shape(subs: &[SubposteriorSamples]) -> Result<(usize, usize)> {
    let first = subs
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no subposteriors to combine".into()))?;
    let (t, d) = (first.len(), first.dim());
    if t == 0 || d == 0 {
        return Err(Error::ShapeMismatch("subposteriors are empty".into()));
    }
    for s in subs {
        if s.len() != t || s.dim() != d {
            return Err(Error::ShapeMismatch(format!(
                "shard {} has {}x{} draws, expected {t}x{d}",
                s.shard_id,
                s.len(),
                s.dim()
            )));
        }
    }
    Ok((t, d))
}

/// Sum in ascending order, independent of the input order.
pub(crate) fn sorted_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

/// `theta_t = (1/M) sum_m theta_{t,m}` elementwise.
pub fn combine_average(subs: &[SubposteriorSamples]) -> Result<CombinedSamples> {
    let (t, d) = common_shape(subs)?;
    let m = subs.len() as f64;
    let mut out = Draws::zeros(t, d);
    let mut buf = vec![0.0; subs.len()];
    for i in 0..t {
        for j in 0..d {
            for (b, s) in buf.iter_mut().zip(subs) {
                *b = s.draws.get(i, j);
            }
            out.row_mut(i)[j] = sorted_sum(&mut buf) / m;
        }
    }
    Ok(CombinedSamples {
        draws: out,
        method: Method::Average,
    })
}
