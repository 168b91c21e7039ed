//! Dyadic lattices, skeleton sampling and Christ–David cubes.

mod christ;
mod dyadic;

pub use christ::{build_christ_cubes, cube_ball, ChristCube, CubeForest};
pub use dyadic::{build_dyadic_index, skeleton_of_box, skeleton_points, DyadicCube, DyadicGrid, DyadicIndex};
