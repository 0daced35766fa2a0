//! Penalized log-spline density estimation.
//!
//! The log-density is a natural cubic spline (linear beyond the outer knots)
//! parameterized by its values at knots placed on sample quantiles. The
//! penalized log-likelihood
//!
//! ```text
//! l(y) = mean_t s_y(x_t) - log Z(y) - (penalty / 2) * integral s_y''(z)^2 dz
//! ```
//!
//! is concave in the knot values `y`, and is maximized by damped Newton
//! iterations with `Z` computed by quadrature over the fitting domain.

use nalgebra::{DMatrix, DVector};

use super::bandwidth::quantile;
use super::Support;
use crate::error::{Error, Result};

/// Default knot count, `round(2.5 n^(1/5))` kept within `[5, 25]`.
pub(super) fn default_knots(n: usize) -> usize {
    (2.5 * (n as f64).powf(0.2)).round().clamp(5.0, 25.0) as usize
}

pub(super) const DEFAULT_PENALTY: f64 = 1e-6;

/// Knots sit on the sample quantiles at `Phi(z)` for `z` evenly spaced in `[-KNOT_SPREAD, KNOT_SPREAD]`.
const KNOT_SPREAD: f64 = 2.6;
const STEPS_PER_KNOT_INTERVAL: usize = 64;
const STEPS_PER_TAIL: usize = 512;
const MAX_NEWTON: usize = 200;

#[derive(Debug, Clone)]
pub struct LogsplineFit {
    origin: f64,
    scale: f64,
    spline: NaturalSpline,
    values: Vec<f64>,
    log_norm: f64,
}

impl LogsplineFit {
    /// Fit to `samples` on `domain` (widened to cover the samples after they
    /// are folded into `support`).
    pub fn fit(samples: &[f64], support: &Support, domain: (f64, f64), knots: usize, penalty: f64) -> Result<LogsplineFit> {
        let mut xs: Vec<f64> = samples.iter().map(|&x| support.fold(x)).collect();
        xs.sort_by(f64::total_cmp);
        let lo = domain.0.min(xs[0]);
        let hi = domain.1.max(xs[xs.len() - 1]);

        let mut knot_x: Vec<f64> = (0..knots)
            .map(|i| {
                let z = -KNOT_SPREAD + 2.0 * KNOT_SPREAD * i as f64 / (knots - 1) as f64;
                quantile(&xs, standard_normal_cdf(z))
            })
            .collect();
        let span = xs[xs.len() - 1] - xs[0];
        knot_x.dedup_by(|b, a| *b - *a <= 1e-9 * span);
        if knot_x.len() < 3 {
            return Err(Error::Estimator(format!(
                "only {} distinct knots; samples are too concentrated",
                knot_x.len()
            )));
        }

        let origin = knot_x[0];
        let scale = knot_x[knot_x.len() - 1] - origin;
        let to_z = |x: f64| (x - origin) / scale;
        let spline = NaturalSpline::new(knot_x.iter().map(|&x| to_z(x)).collect())?;
        let k = spline.len();

        let mut stat = DVector::zeros(k);
        for &x in &xs {
            stat += spline.basis(to_z(x));
        }
        stat /= xs.len() as f64;

        let quad = Quadrature::new(&spline, to_z(lo), to_z(hi));
        let omega = spline.roughness();

        let zs: Vec<f64> = xs.iter().map(|&x| to_z(x)).collect();
        let mean = zs.iter().sum::<f64>() / zs.len() as f64;
        let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / zs.len() as f64;
        let var = if var > 0.0 { var } else { 1.0 };
        let mut y = DVector::from_iterator(k, spline.knots.iter().map(|z| -(z - mean).powi(2) / (2.0 * var)));

        let objective = |y: &DVector<f64>| -> (f64, f64) {
            let log_z = quad.log_partition(y);
            (stat.dot(y) - log_z - 0.5 * penalty * y.dot(&(&omega * y)), log_z)
        };
        let (mut value, _) = objective(&y);
        let ones = DMatrix::from_element(k, k, 1.0 / k as f64);
        for _ in 0..MAX_NEWTON {
            let (expect, cov) = quad.moments(&y);
            let grad = &stat - expect - penalty * (&omega * &y);
            let hess = cov + penalty * &omega + &ones;
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => {
                    let ridge = 1e-10 * hess.trace().max(1e-300);
                    let shifted = hess + DMatrix::identity(k, k) * ridge;
                    shifted
                        .cholesky()
                        .ok_or_else(|| Error::Estimator("log-spline Hessian is not positive definite".into()))?
                        .solve(&grad)
                }
            };
            let decrement = grad.dot(&step);
            if !decrement.is_finite() {
                return Err(Error::Estimator("log-spline Newton step is not finite".into()));
            }
            if decrement < 1e-14 {
                break;
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial = &y + t * &step;
                let (v, _) = objective(&trial);
                if v.is_finite() && v >= value - 1e-15 * value.abs() {
                    y = trial;
                    value = v;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }

        let (_, log_z) = objective(&y);
        Ok(LogsplineFit {
            origin,
            scale,
            spline,
            values: y.iter().copied().collect(),
            log_norm: log_z + scale.ln(),
        })
    }

    /// Log of the fitted density at `x`, normalized over the fitting domain.
    pub fn log_density(&self, x: f64) -> f64 {
        let z = (x - self.origin) / self.scale;
        self.spline.eval(&self.values, z) - self.log_norm
    }

    pub fn knots(&self) -> Vec<f64> {
        self.spline.knots.iter().map(|z| self.origin + z * self.scale).collect()
    }
}

/// Natural cubic spline with values `y` at `knots` and linear continuation
/// outside them.
#[derive(Debug, Clone)]
struct NaturalSpline {
    knots: Vec<f64>,
    widths: Vec<f64>,
    /// Maps knot values to second derivatives at the knots (first and last rows zero).
    second: DMatrix<f64>,
}

/// `s(z) = a0 y_i + a1 y_{i+1} + c0 M_i + c1 M_{i+1}`.
struct LocalWeights {
    i: usize,
    a0: f64,
    a1: f64,
    c0: f64,
    c1: f64,
}

impl NaturalSpline {
    fn new(knots: Vec<f64>) -> Result<NaturalSpline> {
        let k = knots.len();
        let widths: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let mut second = DMatrix::zeros(k, k);
        if k > 2 {
            let m = k - 2;
            let mut tri = DMatrix::zeros(m, m);
            let mut rhs = DMatrix::zeros(m, k);
            for r in 0..m {
                let i = r + 1;
                let (hl, hr) = (widths[i - 1], widths[i]);
                tri[(r, r)] = 2.0 * (hl + hr);
                if r > 0 {
                    tri[(r, r - 1)] = hl;
                }
                if r + 1 < m {
                    tri[(r, r + 1)] = hr;
                }
                rhs[(r, i + 1)] += 6.0 / hr;
                rhs[(r, i)] -= 6.0 / hr + 6.0 / hl;
                rhs[(r, i - 1)] += 6.0 / hl;
            }
            let interior = tri
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Estimator("singular spline system".into()))?;
            second.view_mut((1, 0), (m, k)).copy_from(&interior);
        }
        Ok(NaturalSpline { knots, widths, second })
    }

    fn len(&self) -> usize {
        self.knots.len()
    }

    fn local(&self, z: f64) -> LocalWeights {
        let k = self.knots.len();
        if z <= self.knots[0] {
            let h = self.widths[0];
            let t = z - self.knots[0];
            return LocalWeights {
                i: 0,
                a0: 1.0 - t / h,
                a1: t / h,
                c0: 0.0,
                c1: -t * h / 6.0,
            };
        }
        if z >= self.knots[k - 1] {
            let h = self.widths[k - 2];
            let t = z - self.knots[k - 1];
            return LocalWeights {
                i: k - 2,
                a0: -t / h,
                a1: 1.0 + t / h,
                c0: t * h / 6.0,
                c1: 0.0,
            };
        }
        let i = (self.knots.partition_point(|&x| x <= z) - 1).min(k - 2);
        let h = self.widths[i];
        let u = self.knots[i + 1] - z;
        let v = z - self.knots[i];
        LocalWeights {
            i,
            a0: u / h,
            a1: v / h,
            c0: (u * u * u / h - h * u) / 6.0,
            c1: (v * v * v / h - h * v) / 6.0,
        }
    }

    /// Basis vector `b(z)` with `s(z) = b(z) . y`.
    fn basis(&self, z: f64) -> DVector<f64> {
        let w = self.local(z);
        let mut b = DVector::zeros(self.len());
        b[w.i] += w.a0;
        b[w.i + 1] += w.a1;
        for j in 0..self.len() {
            b[j] += w.c0 * self.second[(w.i, j)] + w.c1 * self.second[(w.i + 1, j)];
        }
        b
    }

    fn eval(&self, y: &[f64], z: f64) -> f64 {
        let w = self.local(z);
        let second = |row: usize| -> f64 { (0..self.len()).map(|j| self.second[(row, j)] * y[j]).sum() };
        w.a0 * y[w.i] + w.a1 * y[w.i + 1] + w.c0 * second(w.i) + w.c1 * second(w.i + 1)
    }

    /// `Omega` with `integral s''^2 = y' Omega y` over the knot span.
    fn roughness(&self) -> DMatrix<f64> {
        let k = self.len();
        let mut q = DMatrix::zeros(k, k);
        for (i, &h) in self.widths.iter().enumerate() {
            q[(i, i)] += h / 3.0;
            q[(i + 1, i + 1)] += h / 3.0;
            q[(i, i + 1)] += h / 6.0;
            q[(i + 1, i)] += h / 6.0;
        }
        self.second.transpose() * q * &self.second
    }
}

/// Composite Simpson nodes over the fitting domain, with breakpoints at the
/// knots, and the spline basis evaluated at each node.
struct Quadrature {
    weights: Vec<f64>,
    basis: DMatrix<f64>,
}

impl Quadrature {
    fn new(spline: &NaturalSpline, lo: f64, hi: f64) -> Quadrature {
        let first = spline.knots[0];
        let last = spline.knots[spline.len() - 1];
        let mut breaks = vec![lo];
        breaks.extend(spline.knots.iter().copied().filter(|&z| z > lo && z < hi));
        breaks.push(hi);
        let mut nodes: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for seg in breaks.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if b <= a {
                continue;
            }
            let steps = if b <= first || a >= last {
                STEPS_PER_TAIL
            } else {
                STEPS_PER_KNOT_INTERVAL
            };
            let h = (b - a) / steps as f64;
            for i in 0..=steps {
                let w = if i == 0 || i == steps {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                } * h
                    / 3.0;
                if i == 0 && !nodes.is_empty() {
                    *weights.last_mut().unwrap() += w;
                } else {
                    nodes.push(a + (b - a) * i as f64 / steps as f64);
                    weights.push(w);
                }
            }
        }
        let k = spline.len();
        let mut basis = DMatrix::zeros(nodes.len(), k);
        for (r, &z) in nodes.iter().enumerate() {
            basis.row_mut(r).copy_from(&spline.basis(z).transpose());
        }
        Quadrature { weights, basis }
    }

    fn scaled_weights(&self, y: &DVector<f64>) -> (Vec<f64>, f64) {
        let eta = &self.basis * y;
        let max = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = eta.iter().zip(&self.weights).map(|(e, q)| q * (e - max).exp()).collect();
        (w, max)
    }

    fn log_partition(&self, y: &DVector<f64>) -> f64 {
        let (w, max) = self.scaled_weights(y);
        max + w.iter().sum::<f64>().ln()
    }

    /// Mean and covariance of the basis under the fitted density.
    fn moments(&self, y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let (w, _) = self.scaled_weights(y);
        let total: f64 = w.iter().sum();
        let p = DVector::from_iterator(w.len(), w.iter().map(|v| v / total));
        let mean = self.basis.transpose() * &p;
        let mut weighted = self.basis.clone();
        for (r, pr) in p.iter().enumerate() {
            weighted.row_mut(r).scale_mut(*pr);
        }
        let second = self.basis.transpose() * weighted;
        let cov = second - &mean * mean.transpose();
        (mean, cov)
    }
}

/// Standard normal CDF via the complementary error function.
fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

// Chebyshev-fitted erfc (Numerical Recipes `erfcc`), relative error < 1.2e-7;
// only used for placing knots, where that is ample.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807 + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277))))))));
    let r = t * poly.exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}
