use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{common_shape, CombinedSamples, Method};
use crate::draws::{Draws, SubposteriorSamples};
use crate::error::{Error, Result};
use crate::estimate::{bandwidth, BandwidthRule};

/// Candidates within this log-weight of the best are enumerated exactly;
/// the rest are proposed with the bound `e^-15` and thinned.
const HEAD_LOG_CUT: f64 = 15.0;
/// Uniform-proposal rejection attempts before enumerating every candidate.
const REJECTION_TRIES: usize = 64;

/// Silverman's rule averaged over shards and dimensions.
///
/// The kernels live in `d` dimensions, so the one-dimensional rate `T^(-1/5)`
/// is replaced by the normal-reference rate `T^(-1/(d+4))`; for `d = 1` this
/// is the usual rule.
pub fn dpe_bandwidth(subs: &[SubposteriorSamples]) -> Result<f64> {
    let (t, d) = common_shape(subs)?;
    let mut total = 0.0;
    for s in subs {
        for j in 0..d {
            total += bandwidth(&s.draws.column(j), BandwidthRule::Silverman)?;
        }
    }
    let rate = (t as f64).powf(0.2 - 1.0 / (d as f64 + 4.0));
    Ok(rate * total / (subs.len() * d) as f64)
}

/// Scan count that leaves at least `t` draws after the 10% mixer burn-in.
pub fn default_dpe_iterations(t: usize) -> usize {
    t + t.div_ceil(9)
}

/// Draw an index with probability proportional to `exp(log_weights[i])`.
///
/// The maximum is subtracted before exponentiating, so adding a constant to
/// every entry does not change the distribution.
pub fn sample_log_weights<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Result<usize> {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let mut cumulative = Vec::with_capacity(log_weights.len());
    let mut total = 0.0;
    for w in log_weights {
        total += (w - max).exp();
        cumulative.push(total);
    }
    Ok(pick(&cumulative, rng))
}

// Index of the first running total above a uniform point in [0, total).
fn pick<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let total = cumulative[cumulative.len() - 1];
    let target = rng.random::<f64>() * total;
    cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1)
}

/// Gibbs sampler over the mixture indices `(t_1, ..., t_M)` of the product of
/// Gaussian kernel density estimates.
///
/// Given the other indices, component `c` of shard `m` has weight
/// `exp(-a |theta_c - mu*|^2)` with `a = (M - 1) / (2 M h^2)` and `mu*` the
/// mean of the other selected draws. Draws are centred on their pooled mean
/// before any distance is computed.
///
/// Each update is an exact draw from that conditional. Candidates are first
/// screened with single-precision distances; everything within reach of the
/// best weight (allowing for the screening error) gets its exact weight, and
/// the remaining candidates are proposed at a common upper bound and thinned.
#[derive(Debug, Clone)]
pub struct DpeChain {
    t: usize,
    d: usize,
    // Per shard, row-major centred draws.
    rows: Vec<Vec<f64>>,
    // Per shard, column-major single-precision copy for screening.
    screen: Vec<Vec<f32>>,
    // Per shard, the largest squared row norm.
    max_norm2: Vec<f64>,
    center: Vec<f64>,
    h: f64,
    a: f64,
    indices: Vec<usize>,
    target: Vec<f64>,
    target32: Vec<f32>,
    dist: Vec<f32>,
    cumulative: Vec<f64>,
    kept: Vec<usize>,
    tail: Vec<usize>,
}

/// Candidates screened per block, so the partial sums stay in L1.
const BLOCK: usize = 2048;

impl DpeChain {
    /// Chain with every index at the first draw.
    pub fn new(subs: &[SubposteriorSamples], h: f64) -> Result<DpeChain> {
        let (t, d) = common_shape(subs)?;
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::BandwidthZero(h));
        }
        let m = subs.len();
        let mut center = vec![0.0; d];
        for s in subs {
            for i in 0..t {
                for (c, x) in center.iter_mut().zip(s.draws.row(i)) {
                    *c += x;
                }
            }
        }
        center.iter_mut().for_each(|c| *c /= (m * t) as f64);
        let rows: Vec<Vec<f64>> = subs
            .iter()
            .map(|s| {
                s.draws
                    .as_slice()
                    .chunks_exact(d)
                    .flat_map(|row| row.iter().zip(&center).map(|(x, c)| x - c))
                    .collect()
            })
            .collect();
        let screen = rows
            .iter()
            .map(|r| {
                let mut col = vec![0.0f32; t * d];
                for (i, row) in r.chunks_exact(d).enumerate() {
                    for (j, x) in row.iter().enumerate() {
                        col[j * t + i] = *x as f32;
                    }
                }
                col
            })
            .collect();
        let max_norm2 = rows
            .iter()
            .map(|r| {
                r.chunks_exact(d)
                    .map(|row| row.iter().map(|x| x * x).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .collect();
        Ok(DpeChain {
            t,
            d,
            rows,
            screen,
            max_norm2,
            center,
            h,
            a: (m - 1) as f64 / (2.0 * m as f64 * h * h),
            indices: vec![0; m],
            target: vec![0.0; d],
            target32: vec![0.0; d],
            dist: vec![0.0; t],
            cumulative: Vec::with_capacity(t),
            kept: Vec::with_capacity(t),
            tail: Vec::with_capacity(t),
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    fn row(&self, m: usize, c: usize) -> &[f64] {
        &self.rows[m][c * self.d..(c + 1) * self.d]
    }

    fn distance2(&self, m: usize, c: usize) -> f64 {
        self.row(m, c).iter().zip(&self.target).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    /// Resample every index once, in shard order.
    pub fn scan<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        for m in 0..self.rows.len() {
            self.update(m, rng)?;
        }
        Ok(())
    }

    fn update<R: Rng + ?Sized>(&mut self, m: usize, rng: &mut R) -> Result<()> {
        let count = self.rows.len();
        if count == 1 {
            self.indices[0] = rng.random_range(0..self.t);
            return Ok(());
        }
        for j in 0..self.d {
            let sum: f64 = (0..count)
                .filter(|&k| k != m)
                .map(|k| self.rows[k][self.indices[k] * self.d + j])
                .sum();
            self.target[j] = sum / (count - 1) as f64;
        }

        // Weights are at most 1, so uniform proposals accepted with
        // probability exp(-a d^2) are exact draws from the conditional.
        for _ in 0..REJECTION_TRIES {
            let c = rng.random_range(0..self.t);
            let accept = (-self.a * self.distance2(m, c)).exp();
            if rng.random::<f64>() < accept {
                self.indices[m] = c;
                return Ok(());
            }
        }

        // Screen every candidate in single precision, block by block.
        let (t, d) = (self.t, self.d);
        for (y32, y) in self.target32.iter_mut().zip(&self.target) {
            *y32 = *y as f32;
        }
        let screen = &self.screen[m];
        for start in (0..t).step_by(BLOCK) {
            let len = BLOCK.min(t - start);
            let dist = &mut self.dist[start..start + len];
            dist.iter_mut().for_each(|x| *x = 0.0);
            for (j, &y) in self.target32.iter().enumerate() {
                let col = &screen[j * t + start..j * t + start + len];
                for (s, &x) in dist.iter_mut().zip(col) {
                    let e = x - y;
                    *s += e * e;
                }
            }
        }
        let best32 = self.dist.iter().cloned().fold(f32::INFINITY, f32::min) as f64;
        if !best32.is_finite() {
            return Err(Error::DegenerateWeights);
        }
        // Bound on |single - double| squared distance: a few units of f32
        // roundoff per term, on terms no larger than (|x| + |y|)^2.
        let y2: f64 = self.target.iter().map(|y| y * y).sum();
        let slack = 4.0 * (d as f64 + 8.0) * f32::EPSILON as f64 * 2.0 * (self.max_norm2[m] + y2);
        let screen_limit = best32 + HEAD_LOG_CUT / self.a + 2.0 * slack;

        self.kept.clear();
        self.tail.clear();
        for (c, &s) in self.dist.iter().enumerate() {
            if s as f64 <= screen_limit {
                self.kept.push(c);
            } else {
                self.tail.push(c);
            }
        }
        // Exact weights for the head. Every tail candidate is at least
        // HEAD_LOG_CUT / a beyond the exact best, so its relative weight is
        // below `bound`; it is proposed at `bound` and accepted with
        // probability w / bound.
        self.cumulative.clear();
        let mut best = f64::INFINITY;
        for i in 0..self.kept.len() {
            let s = self.distance2(m, self.kept[i]);
            best = best.min(s);
            self.cumulative.push(s);
        }
        let mut head = 0.0;
        for w in self.cumulative.iter_mut() {
            head += (-self.a * (*w - best)).exp();
            *w = head;
        }
        let bound = (-HEAD_LOG_CUT).exp();
        let total = head + bound * self.tail.len() as f64;
        loop {
            let u = rng.random::<f64>() * total;
            if u < head {
                let i = self.cumulative.partition_point(|&c| c <= u).min(self.kept.len() - 1);
                self.indices[m] = self.kept[i];
                return Ok(());
            }
            let k = (((u - head) / bound) as usize).min(self.tail.len() - 1);
            let c = self.tail[k];
            let accept = (HEAD_LOG_CUT - self.a * (self.distance2(m, c) - best)).exp();
            if rng.random::<f64>() < accept {
                self.indices[m] = c;
                return Ok(());
            }
        }
    }

    /// Draw from the currently selected component,
    /// `N(mean of selected draws, (h^2 / M) I)`.
    pub fn emit<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let count = self.rows.len() as f64;
        let sd = self.h / count.sqrt();
        for (j, o) in out.iter_mut().enumerate() {
            let mean = (0..self.rows.len()).map(|m| self.rows[m][self.indices[m] * self.d + j]).sum::<f64>() / count;
            let z: f64 = StandardNormal.sample(rng);
            *o = self.center[j] + mean + sd * z;
        }
    }
}

/// Run `iterations` Gibbs scans, discard the first 10% and return one draw
/// from each of the final `T` scans.
pub fn combine_dpe<R: Rng + ?Sized>(
    subs: &[SubposteriorSamples],
    bandwidth: f64,
    iterations: usize,
    rng: &mut R,
) -> Result<CombinedSamples> {
    let (t, d) = common_shape(subs)?;
    let burn = iterations / 10;
    if iterations - burn < t {
        return Err(Error::Config(format!(
            "{iterations} DPE scans leave fewer than {t} draws after discarding {burn}"
        )));
    }
    let mut chain = DpeChain::new(subs, bandwidth)?;
    let mut out = Draws::zeros(t, d);
    let first_kept = iterations - t;
    for scan in 0..iterations {
        chain.scan(rng)?;
        if scan >= first_kept {
            chain.emit(rng, out.row_mut(scan - first_kept));
        }
    }
    Ok(CombinedSamples {
        draws: out,
        method: Method::Dpe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combine::tests::shard;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Normal;
    use std::collections::HashMap;

    #[test]
    fn iteration_budget() {
        assert_eq!(default_dpe_iterations(50_000), 55_556);
        for t in [1, 5, 9, 10, 5000, 50_000] {
            let it = default_dpe_iterations(t);
            assert!(it - it / 10 >= t);
        }
        let subs = [shard(1, Draws::from_column(vec![0.0, 1.0]))];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(combine_dpe(&subs, 0.1, 1, &mut rng).is_err());
        assert!(matches!(combine_dpe(&subs, 0.0, 10, &mut rng), Err(Error::BandwidthZero(_))));
    }

    #[test]
    fn log_weight_shift_invariance() {
        let base = [-1.0, 0.5, 2.0, -3.0, 0.0];
        let shifted: Vec<f64> = base.iter().map(|w| w - 1e5).collect();
        let n = 200_000;
        let mut freq = [[0usize; 5]; 2];
        for (k, lw) in [base.as_slice(), shifted.as_slice()].into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..n {
                freq[k][sample_log_weights(lw, &mut rng).unwrap()] += 1;
            }
        }
        let total: f64 = base.iter().map(|w| f64::exp(*w)).sum();
        for i in 0..5 {
            let p = base[i].exp() / total;
            for f in &freq {
                assert!((f[i] as f64 / n as f64 - p).abs() < 0.005);
            }
        }
        assert!(sample_log_weights(&[f64::NEG_INFINITY; 3], &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn single_point_shards_collapse() {
        let (a, b, h) = (1.0, 3.0, 0.4);
        let subs = vec![shard(1, Draws::from_column(vec![a])), shard(2, Draws::from_column(vec![b]))];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let out = combine_dpe(&subs, h, 40_000, &mut rng);
        // T = 1 leaves one draw; run the chain by hand for a long sample.
        assert_eq!(out.unwrap().draws.rows(), 1);
        let mut chain = DpeChain::new(&subs, h).unwrap();
        let mut draws = Vec::new();
        let mut buf = [0.0];
        for _ in 0..40_000 {
            chain.scan(&mut rng).unwrap();
            chain.emit(&mut rng, &mut buf);
            draws.push(buf[0]);
        }
        let n = draws.len() as f64;
        let m = draws.iter().sum::<f64>() / n;
        let v = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        assert!((m - 2.0).abs() < 4.0 * (h * h / 2.0 / n).sqrt());
        assert!((v / (h * h / 2.0) - 1.0).abs() < 0.03);
    }

    #[test]
    fn gibbs_matches_enumerated_component_weights() {
        let s1 = vec![-0.3, 0.1, 0.25, 0.9, 1.4];
        let s2 = vec![0.0, 0.35, 0.6, 0.8, 2.0];
        let h = 0.4;
        let subs = vec![shard(1, Draws::from_column(s1.clone())), shard(2, Draws::from_column(s2.clone()))];
        // w = N(x1 | xbar, h^2) N(x2 | xbar, h^2) with xbar the pair mean.
        let mut exact = HashMap::new();
        let mut total = 0.0;
        for (i, x1) in s1.iter().enumerate() {
            for (j, x2) in s2.iter().enumerate() {
                let xbar = (x1 + x2) / 2.0;
                let w = (-((x1 - xbar).powi(2) + (x2 - xbar).powi(2)) / (2.0 * h * h)).exp();
                exact.insert((i, j), w);
                total += w;
            }
        }
        let mut chain = DpeChain::new(&subs, h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scans = 400_000;
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for _ in 0..scans {
            chain.scan(&mut rng).unwrap();
            *counts.entry((chain.indices()[0], chain.indices()[1])).or_default() += 1;
        }
        let tv: f64 = exact
            .iter()
            .map(|(k, w)| (w / total - *counts.get(k).unwrap_or(&0) as f64 / scans as f64).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "total variation {tv}");
    }

    #[test]
    fn enumeration_path_is_used_for_well_separated_shards() {
        // The rejection step almost never accepts here, exercising the enumeration.
        let s1: Vec<f64> = (0..200).map(|i| i as f64 * 0.02).collect();
        let s2: Vec<f64> = (0..200).map(|i| 5.0 + i as f64 * 0.05).collect();
        let h = 0.02;
        let subs = vec![shard(1, Draws::from_column(s1)), shard(2, Draws::from_column(s2))];
        let mut chain = DpeChain::new(&subs, h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..2000 {
            chain.scan(&mut rng).unwrap();
        }
        // The only components with non-negligible weight pair the closest draws.
        let (i, j) = (chain.indices()[0], chain.indices()[1]);
        assert!(i >= 198 && j <= 1, "({i}, {j})");
    }

    #[test]
    fn gaussian_shards_small_bandwidth_mean() {
        let mus = [-1.0, 0.0, 2.5];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = 4000;
        let subs: Vec<_> = mus
            .iter()
            .enumerate()
            .map(|(k, &mu)| {
                let n = Normal::new(mu, 1.0).unwrap();
                shard(k + 1, Draws::from_column((0..t).map(|_| n.sample(&mut rng)).collect()))
            })
            .collect();
        let out = combine_dpe(&subs, 0.1, default_dpe_iterations(t), &mut rng).unwrap();
        let xs = out.draws.column(0);
        let m = xs.iter().sum::<f64>() / t as f64;
        // Product of N(mu_m, 1) is N(mean of mu_m, 1 / M).
        assert!((m - 0.5).abs() < 0.1, "{m}");
    }

    #[test]
    fn bandwidth_is_averaged() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x * 3.0).collect();
        let ha = bandwidth(&a, BandwidthRule::Silverman).unwrap();
        let h = dpe_bandwidth(&[shard(1, Draws::from_column(a)), shard(2, Draws::from_column(b))]).unwrap();
        assert!((h - 2.0 * ha).abs() < 1e-12);
    }

    #[test]
    fn bandwidth_uses_dimensional_rate() {
        // Two identical columns: the 1-D rule times T^(1/5 - 1/6).
        let col: Vec<f64> = (0..64).map(|i| ((i * 37) % 64) as f64).collect();
        let rows: Vec<Vec<f64>> = col.iter().map(|&x| vec![x, x]).collect();
        let h1 = bandwidth(&col, BandwidthRule::Silverman).unwrap();
        let h = dpe_bandwidth(&[shard(1, Draws::from_rows(&rows).unwrap())]).unwrap();
        let expected = h1 * 64f64.powf(1.0 / 5.0 - 1.0 / 6.0);
        assert!((h - expected).abs() < 1e-12 * expected, "{h} vs {expected}");
    }

    #[test]
    fn screened_update_matches_exact_conditional() {
        // d = 5, tight kernels: the rejection step rarely succeeds, so the
        // screened enumeration does the work.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let t = 40;
        let make = |rng: &mut ChaCha8Rng, shift: f64| {
            let data: Vec<f64> = (0..t * 5).map(|_| shift + normal.sample(rng)).collect();
            Draws::new(t, 5, data).unwrap()
        };
        let subs = vec![shard(1, make(&mut rng, 0.0)), shard(2, make(&mut rng, 0.5))];
        let h = 0.35;
        let mut chain = DpeChain::new(&subs, h).unwrap();
        chain.indices = vec![0, 7];
        let a = 1.0 / (4.0 * h * h);
        let other = subs[1].draws.row(7);
        let logw: Vec<f64> = (0..t)
            .map(|c| {
                let d2: f64 = subs[0].draws.row(c).iter().zip(other).map(|(x, y)| (x - y) * (x - y)).sum();
                -a * d2
            })
            .collect();
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logw.iter().map(|w| (w - max).exp()).sum();
        let n = 200_000;
        let mut counts = vec![0usize; t];
        for _ in 0..n {
            chain.update(0, &mut rng).unwrap();
            counts[chain.indices[0]] += 1;
            chain.indices[1] = 7;
        }
        let tv: f64 = (0..t)
            .map(|c| ((logw[c] - max).exp() / total - counts[c] as f64 / n as f64).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "total variation {tv}");
    }
}
