//! Multiscale geometric statistics of finite point clouds.

pub mod beta;
pub mod compare;
pub mod corona;
pub mod criteria;
pub mod cubes;
pub mod error;
pub mod frostmann;
pub mod geometry;
pub mod pipeline;
pub mod pointset;
pub mod shapes;
pub mod spatial;

pub use cubes::{build_christ_cubes, build_dyadic_index, cube_ball, skeleton_points, ChristCube, CubeForest, DyadicCube, DyadicGrid, DyadicIndex};
pub use error::{Error, Result};
pub use geometry::Ball;
pub use pointset::{dyadic_content, hausdorff_gap, load_cloud, lower_regularity_scan, PointCloud, RegularityReport};
pub use corona::{build_coronization, prune_by_qp, verify_main_lemma, whitney_family, Coronization, MainLemmaReport, WhitneyFamily, WhitneyParams};
pub use criteria::{classify, CriterionKind, CriterionParams, QPLabeling};
pub use compare::{compare_tst, CompareParams, ComparisonReport};
pub use pipeline::{run_pipeline, Config};
pub use shapes::{generate, Shape, ShapeSpec};
