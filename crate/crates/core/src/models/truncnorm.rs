use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Draw from `N(mean, sd^2)` truncated to `(0, inf)`.
///
/// Uses plain rejection when the lower bound is below the mean and Robert's
/// translated-exponential proposal otherwise. In the tail branch the result
/// is formed as `sd * (z - alpha)` from the exponential excess directly, so a
/// bound hundreds of standard deviations out loses no precision.
pub fn sample_positive_normal<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    let alpha = -mean / sd;
    loop {
        let x = if alpha < 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            if z <= alpha {
                continue;
            }
            mean + sd * z
        } else {
            let rate = 0.5 * (alpha + (alpha * alpha + 4.0).sqrt());
            let e: f64 = Exp1.sample(rng);
            let excess = e / rate;
            let z: f64 = alpha + excess;
            let accept = (-0.5 * (z - rate) * (z - rate)).exp();
            if rng.random::<f64>() > accept {
                continue;
            }
            sd * excess
        };
        if x > 0.0 {
            return x;
        }
    }
}
