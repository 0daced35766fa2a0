use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evenly spaced nodes `a = x_0 < x_1 < ... < x_n = b`, grouped into `n / k`
/// panels of `k` subintervals each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    a: f64,
    b: f64,
    n: usize,
    k: usize,
}

impl Grid {
    /// A grid with exactly `n` subintervals; `n` must be a positive multiple of `k`.
    pub fn new(a: f64, b: f64, n: usize, k: usize) -> Result<Grid> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidGrid(format!("non-finite bounds [{a}, {b}]")));
        }
        if a >= b {
            return Err(Error::InvalidGrid(format!("empty interval [{a}, {b}]")));
        }
        if k == 0 {
            return Err(Error::InvalidGrid("interpolation order must be at least 1".into()));
        }
        if n == 0 || n % k != 0 {
            return Err(Error::InvalidGrid(format!(
                "{n} subintervals is not a positive multiple of the order {k}"
            )));
        }
        Ok(Grid { a, b, n, k })
    }

    /// The smallest multiple of `k` that is at least `min_intervals`.
    pub fn with_intervals(a: f64, b: f64, min_intervals: usize, k: usize) -> Result<Grid> {
        if k == 0 {
            return Err(Error::InvalidGrid("interpolation order must be at least 1".into()));
        }
        let n = min_intervals.max(1).div_ceil(k) * k;
        Grid::new(a, b, n, k)
    }

    pub fn lower(&self) -> f64 {
        self.a
    }

    pub fn upper(&self) -> f64 {
        self.b
    }

    /// Number of subintervals `n`.
    pub fn intervals(&self) -> usize {
        self.n
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Interpolation (and Newton-Cotes) order `k`.
    pub fn order(&self) -> usize {
        self.k
    }

    /// Number of panels `n / k`.
    pub fn panels(&self) -> usize {
        self.n / self.k
    }

    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    /// Node `x_i`. The last node is exactly `b`.
    pub fn point(&self, i: usize) -> f64 {
        debug_assert!(i <= self.n);
        if i == self.n {
            self.b
        } else {
            self.a + (self.b - self.a) * (i as f64 / self.n as f64)
        }
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n + 1).map(move |i| self.point(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }
}

/// Build a grid over `[a, b]` whose spacing is at most `delta`.
///
/// The spacing is shrunk just enough that the subinterval count is a multiple
/// of `k` and the last node lands exactly on `b`.
pub fn build_grid(a: f64, b: f64, delta: f64, k: usize) -> Result<Grid> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidGrid(format!("non-finite bounds [{a}, {b}]")));
    }
    if a >= b {
        return Err(Error::InvalidGrid(format!("empty interval [{a}, {b}]")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidGrid(format!("spacing {delta} must be positive")));
    }
    if delta >= b - a {
        return Err(Error::InvalidGrid(format!(
            "spacing {delta} is not smaller than the interval width {}",
            b - a
        )));
    }
    if k == 0 {
        return Err(Error::InvalidGrid("interpolation order must be at least 1".into()));
    }
    // Panels of width k*delta needed to cover [a, b]. Ratios that are integral up
    // to rounding (0.01 / 2e-5) must not be bumped to the next integer.
    let ratio = (b - a) / (delta * k as f64);
    let nearest = ratio.round();
    let panels = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    let panels = (panels as usize).max(1);
    Grid::new(a, b, panels * k, k)
}
