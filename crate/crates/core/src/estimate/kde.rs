use super::Support;
use crate::numeric::Grid;

/// Kernel contributions beyond this many bandwidths are dropped (e^{-36} relative).
const CUTOFF: f64 = 8.5;
/// Recompute the kernel with `exp` every this many nodes to stop drift in the
/// multiplicative recurrence.
const REANCHOR: usize = 256;

/// Gaussian KDE `(1 / (T h)) sum_t K((x - theta_t) / h)` at every grid node.
///
/// With `reflect`, samples are first folded into the support and their mirror
/// images across each finite bound are added, so mass near a boundary stays
/// inside it; nodes outside the support are zero.
pub(super) fn evaluate(samples: &[f64], h: f64, grid: &Grid, reflect: Option<&Support>) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    for &raw in samples {
        match reflect {
            None => add_kernel(&mut out, grid, raw, h),
            Some(support) => {
                let x = support.fold(raw);
                add_kernel(&mut out, grid, x, h);
                if let Some(l) = support.lower {
                    add_kernel(&mut out, grid, 2.0 * l - x, h);
                }
                if let Some(u) = support.upper {
                    add_kernel(&mut out, grid, 2.0 * u - x, h);
                }
            }
        }
    }
    let scale = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    for (i, v) in out.iter_mut().enumerate() {
        *v *= scale;
        if let Some(support) = reflect {
            if !support.contains(grid.point(i)) {
                *v = 0.0;
            }
        }
    }
    out
}

/// Add `exp(-u^2 / 2)` with `u = (x_i - center) / h` to every node within the cutoff.
///
/// Successive nodes use `g_{i+1} = g_i r_i`, `r_{i+1} = r_i q`, where
/// `r_i = exp(-u_i d - d^2 / 2)` and `q = exp(-d^2)` for `d = dx / h`.
fn add_kernel(out: &mut [f64], grid: &Grid, center: f64, h: f64) {
    let a = grid.lower();
    let dx = grid.spacing();
    let n = grid.intervals();
    let lo = ((center - CUTOFF * h - a) / dx).ceil();
    let hi = ((center + CUTOFF * h - a) / dx).floor();
    if hi < 0.0 || lo > n as f64 {
        return;
    }
    let lo = lo.max(0.0) as usize;
    let hi = (hi as usize).min(n);
    if lo > hi {
        return;
    }
    let d = dx / h;
    let q = (-d * d).exp();
    let mut i = lo;
    while i <= hi {
        let u = (a + i as f64 * dx - center) / h;
        let mut g = (-0.5 * u * u).exp();
        let mut r = (-u * d - 0.5 * d * d).exp();
        let end = (i + REANCHOR).min(hi + 1);
        for slot in &mut out[i..end] {
            *slot += g;
            g *= r;
            r *= q;
        }
        i = end;
    }
}
