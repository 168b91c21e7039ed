//! Deterministic test-set generators.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::dist;
use crate::pointset::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Line,
    Segment,
    Circle,
    LipschitzGraph,
    Cantor4,
    Koch,
    Cross,
    PlanePatch,
    NoisyPlane,
}

impl Shape {
    pub const ALL: [Shape; 9] = [
        Shape::Line,
        Shape::Segment,
        Shape::Circle,
        Shape::LipschitzGraph,
        Shape::Cantor4,
        Shape::Koch,
        Shape::Cross,
        Shape::PlanePatch,
        Shape::NoisyPlane,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Line => "line",
            Shape::Segment => "segment",
            Shape::Circle => "circle",
            Shape::LipschitzGraph => "lipschitz_graph",
            Shape::Cantor4 => "cantor4",
            Shape::Koch => "koch",
            Shape::Cross => "cross",
            Shape::PlanePatch => "plane_patch",
            Shape::NoisyPlane => "noisy_plane",
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL.into_iter().find(|k| k.name() == key).ok_or_else(|| invalid(format!("unknown shape '{s}'")))
    }
}

/// A generator request. Unset parameters take per-shape defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub shape: Shape,
    /// Generation for `cantor4` and `koch`.
    #[serde(default)]
    pub depth: Option<u32>,
    /// Sample count per curve (per axis for the plane shapes).
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub noise: Option<f64>,
    #[serde(default)]
    pub contraction: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl ShapeSpec {
    pub fn new(shape: Shape) -> Self {
        Self { shape, depth: None, points: None, amplitude: None, noise: None, contraction: None, seed: 0 }
    }

    pub fn with_depth(mut self, depth: u32) -> Self {
        self.depth = Some(depth);
        self
    }

    pub fn with_points(mut self, points: usize) -> Self {
        self.points = Some(points);
        self
    }
}

fn count(spec: &ShapeSpec, default: usize, min: usize) -> Result<usize> {
    let k = spec.points.unwrap_or(default);
    if k < min {
        return Err(invalid(format!("{} needs at least {min} points, got {k}", spec.shape.name())));
    }
    Ok(k)
}

fn depth(spec: &ShapeSpec, default: u32, max: u32) -> Result<u32> {
    let g = spec.depth.unwrap_or(default);
    if g > max {
        return Err(invalid(format!("{} depth must be at most {max}, got {g}", spec.shape.name())));
    }
    Ok(g)
}

/// Largest gap between consecutive points of a polyline.
fn polyline_step(pts: &[Vec<f64>]) -> f64 {
    pts.windows(2).map(|w| dist(&w[0], &w[1])).fold(0.0, f64::max)
}

fn segment(a: f64, b: f64, k: usize) -> Vec<Vec<f64>> {
    (0..k).map(|i| vec![a + (b - a) * i as f64 / (k - 1) as f64, 0.0]).collect()
}

pub fn generate(spec: &ShapeSpec) -> Result<PointCloud> {
    match spec.shape {
        Shape::Segment | Shape::Line => {
            let k = count(spec, 1025, 2)?;
            let (a, b) = if spec.shape == Shape::Segment { (0.0, 1.0) } else { (-1.0, 1.0) };
            PointCloud::new(segment(a, b, k), 2, 1, (b - a) / (k - 1) as f64)
        }
        Shape::Circle => {
            let k = count(spec, 1024, 3)?;
            let pts: Vec<Vec<f64>> =
                (0..k).map(|i| 2.0 * PI * i as f64 / k as f64).map(|t| vec![t.cos(), t.sin()]).collect();
            PointCloud::new(pts, 2, 1, 2.0 * (PI / k as f64).sin())
        }
        Shape::LipschitzGraph => {
            let k = count(spec, 1025, 2)?;
            let lambda = spec.amplitude.unwrap_or(0.1);
            if !lambda.is_finite() || lambda < 0.0 {
                return Err(invalid(format!("amplitude must be non-negative, got {lambda}")));
            }
            let pts: Vec<Vec<f64>> = (0..k)
                .map(|i| i as f64 / (k - 1) as f64)
                .map(|t| vec![t, lambda * (2.0 * PI * t).sin()])
                .collect();
            let h = polyline_step(&pts);
            PointCloud::new(pts, 2, 1, h)
        }
        Shape::Cantor4 => {
            let g = depth(spec, 5, 10)?;
            let c = spec.contraction.unwrap_or(0.25);
            if !(c > 0.0 && c < 0.5) {
                return Err(invalid(format!("contraction must lie in (0, 1/2), got {c}")));
            }
            let mut pts = vec![vec![0.0, 0.0]];
            let mut scale = 1.0;
            for _ in 0..g {
                let shift = scale * (1.0 - c);
                pts = pts
                    .iter()
                    .flat_map(|p| {
                        [(0.0, 0.0), (shift, 0.0), (0.0, shift), (shift, shift)].map(|(dx, dy)| vec![p[0] + dx, p[1] + dy])
                    })
                    .collect();
                scale *= c;
            }
            PointCloud::new(pts, 2, 1, if g == 0 { 1.0 } else { scale })
        }
        Shape::Koch => {
            let g = depth(spec, 4, 9)?;
            let mut pts = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
            let (s, c) = (PI / 3.0).sin_cos();
            for _ in 0..g {
                let mut next = Vec::with_capacity(4 * pts.len());
                for w in pts.windows(2) {
                    let (a, b) = (&w[0], &w[1]);
                    let dx = (b[0] - a[0]) / 3.0;
                    let dy = (b[1] - a[1]) / 3.0;
                    let p1 = vec![a[0] + dx, a[1] + dy];
                    let p3 = vec![a[0] + 2.0 * dx, a[1] + 2.0 * dy];
                    let p2 = vec![p1[0] + dx * c - dy * s, p1[1] + dx * s + dy * c];
                    next.push(a.clone());
                    next.extend([p1, p2, p3]);
                }
                next.push(pts.last().unwrap().clone());
                pts = next;
            }
            PointCloud::new(pts, 2, 1, 3f64.powi(-(g as i32)))
        }
        Shape::Cross => {
            let k = count(spec, 513, 3)?;
            let k = if k % 2 == 0 { k + 1 } else { k };
            let mut pts = segment(-0.5, 0.5, k);
            pts.extend(segment(-0.5, 0.5, k).into_iter().map(|p| vec![0.0, p[0]]));
            PointCloud::new(pts, 2, 1, 1.0 / (k - 1) as f64)
        }
        Shape::PlanePatch | Shape::NoisyPlane => {
            let k = count(spec, 33, 2)?;
            let noise = if spec.shape == Shape::NoisyPlane { spec.noise.unwrap_or(0.01) } else { 0.0 };
            if !noise.is_finite() || noise < 0.0 {
                return Err(invalid(format!("noise must be non-negative, got {noise}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let h = 1.0 / (k - 1) as f64;
            let mut pts = Vec::with_capacity(k * k);
            for i in 0..k {
                for j in 0..k {
                    let z = if noise > 0.0 { noise * rng.gen_range(-1.0..1.0) } else { 0.0 };
                    pts.push(vec![i as f64 * h, j as f64 * h, z]);
                }
            }
            PointCloud::new(pts, 3, 2, h)
        }
    }
}
