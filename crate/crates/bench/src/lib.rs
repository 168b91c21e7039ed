//! Shared fixtures for the criterion benches.

use msgeo_core::cubes::{build_christ_cubes, build_dyadic_index, CubeForest, DyadicGrid};
use msgeo_core::frostmann::{run_frostmann, FrostmannResult};
use msgeo_core::{generate, PointCloud, Shape, ShapeSpec};

pub fn segment(points: usize) -> PointCloud {
    generate(&ShapeSpec::new(Shape::Segment).with_points(points)).unwrap()
}

pub fn cantor(generation: u32) -> PointCloud {
    generate(&ShapeSpec::new(Shape::Cantor4).with_depth(generation)).unwrap()
}

pub fn graph() -> PointCloud {
    generate(&ShapeSpec::new(Shape::LipschitzGraph)).unwrap()
}

/// Finest dyadic level with cells no larger than the resolution.
pub fn leaf_level(c: &PointCloud) -> u32 {
    let grid = DyadicGrid::bounding(c);
    (0..30).find(|&m| grid.side_at(m as i32) <= c.resolution()).unwrap_or(30)
}

pub struct Prepared {
    pub cloud: PointCloud,
    pub forest: CubeForest,
    pub frostmann: FrostmannResult,
    pub depth: u32,
}

pub fn prepare(cloud: PointCloud, depth: u32) -> Prepared {
    let forest = build_christ_cubes(&cloud, 0.5, depth, 0).unwrap();
    let m = leaf_level(&cloud);
    let frostmann = run_frostmann(&build_dyadic_index(&cloud, m).unwrap(), cloud.d(), m).unwrap();
    Prepared { cloud, forest, frostmann, depth }
}
