use super::BandwidthRule;
use crate::error::{Error, Result};

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be in ascending order.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn standard_deviation(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Kernel bandwidth for `values` under `rule`.
///
/// Silverman's rule falls back to the standard deviation when the
/// interquartile range is zero but the sample is not constant.
pub fn bandwidth(values: &[f64], rule: BandwidthRule) -> Result<f64> {
    let n = values.len() as f64;
    let h = match rule {
        BandwidthRule::Fixed(h) => h,
        BandwidthRule::Scott => 1.059 * standard_deviation(values) * n.powf(-0.2),
        BandwidthRule::Silverman => {
            let sd = standard_deviation(values);
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
            let spread = sd.min(iqr / 1.34);
            let spread = if spread > 0.0 { spread } else { sd };
            0.9 * spread * n.powf(-0.2)
        }
    };
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::BandwidthZero(h));
    }
    Ok(h)
}
