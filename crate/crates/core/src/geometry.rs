//! Small Euclidean helpers shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A closed Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid(format!("ball radius must be positive, got {radius}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(invalid("ball center must be finite"));
        }
        Ok(Self { center, radius })
    }

    /// Same center, radius multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { center: self.center.clone(), radius: self.radius * factor }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        dist_sq(&self.center, p) <= self.radius * self.radius
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

/// Distance from a point to the closed box `[lo, hi]`.
#[inline]
pub fn point_box_dist(p: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        let g = if p[i] < lo[i] {
            lo[i] - p[i]
        } else if p[i] > hi[i] {
            p[i] - hi[i]
        } else {
            0.0
        };
        s += g * g;
    }
    s.sqrt()
}

/// Largest distance from a point to any point of the closed box `[lo, hi]`.
#[inline]
pub fn point_box_max_dist(p: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        let g = (p[i] - lo[i]).abs().max((hi[i] - p[i]).abs());
        s += g * g;
    }
    s.sqrt()
}

/// Distance between two closed boxes.
#[inline]
pub fn box_box_dist(alo: &[f64], ahi: &[f64], blo: &[f64], bhi: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..alo.len() {
        let g = if ahi[i] < blo[i] {
            blo[i] - ahi[i]
        } else if bhi[i] < alo[i] {
            alo[i] - bhi[i]
        } else {
            0.0
        };
        s += g * g;
    }
    s.sqrt()
}

/// Smallest power of two that is `>= x` (for `x > 0`).
pub fn pow2_at_least(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut e = x.log2().ceil() as i32;
    // guard against log2 rounding on exact powers
    while 2f64.powi(e - 1) >= x {
        e -= 1;
    }
    while 2f64.powi(e) < x {
        e += 1;
    }
    2f64.powi(e)
}

/// `true` when `x` is an exact (positive) power of two.
pub fn is_pow2(x: f64) -> bool {
    x > 0.0 && x.is_finite() && pow2_at_least(x) == x
}

/// Binomial coefficient for small arguments.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}
