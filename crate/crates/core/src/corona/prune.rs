use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::whitney::{skeleton_set, whitney_family, SkeletonSet, WhitneyFamily, WhitneyParams};
use super::Coronization;
use crate::criteria::QPLabeling;
use crate::cubes::{CubeForest, DyadicGrid};
use crate::error::Result;
use crate::pointset::PointCloud;

/// One pruned sub-region of a `Tree(R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedRegion {
    pub top: usize,
    pub members: Vec<usize>,
    pub stops: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedTree {
    pub root: usize,
    /// `generations[j]` holds the regions topped by `Next_j(R)`.
    pub generations: Vec<Vec<PrunedRegion>>,
}

impl PrunedTree {
    /// `K_R`, the index of the last generation.
    pub fn k(&self) -> usize {
        self.generations.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrunedCoronization {
    pub criterion: String,
    pub trees: Vec<PrunedTree>,
}

impl PrunedCoronization {
    pub fn regions(&self) -> impl Iterator<Item = (usize, usize, &PrunedRegion)> {
        self.trees
            .iter()
            .flat_map(|t| t.generations.iter().enumerate().flat_map(move |(j, g)| g.iter().map(move |r| (t.root, j, r))))
    }

    /// Whitney family and skeleton `E_{i,j}` for every pruned region, in
    /// region order.
    pub fn skeletons(
        &self,
        forest: &CubeForest,
        cloud: &PointCloud,
        grid: &DyadicGrid,
        params: WhitneyParams,
        d: usize,
        spacing_divisor: usize,
    ) -> Result<Vec<(WhitneyFamily, SkeletonSet)>> {
        let regions: Vec<&PrunedRegion> = self.regions().map(|(_, _, r)| r).collect();
        regions
            .par_iter()
            .map(|r| {
                let fam = whitney_family(forest, cloud, grid, r.top, &r.stops, params)?;
                let sk = skeleton_set(&fam, d, spacing_divisor)?;
                Ok((fam, sk))
            })
            .collect()
    }
}

/// Cuts every `Tree(R)` further at cubes having a child labeled bad.
pub fn prune_by_qp(corona: &Coronization, forest: &CubeForest, labels: &QPLabeling) -> PrunedCoronization {
    let trees = corona
        .trees
        .iter()
        .map(|t| {
            let mut in_tree = std::collections::HashSet::with_capacity(t.members.len());
            in_tree.extend(t.members.iter().copied());
            let is_stop = |q: usize| t.stops.binary_search(&q).is_ok();
            let mut generations = Vec::new();
            let mut next = vec![t.top];
            while !next.is_empty() {
                let mut gen = Vec::new();
                let mut following = Vec::new();
                for &r in &next {
                    let mut members = Vec::new();
                    let mut stops = Vec::new();
                    let mut stack = vec![r];
                    while let Some(q) = stack.pop() {
                        members.push(q);
                        let kids = &forest.cube(q).children;
                        if is_stop(q) || kids.iter().any(|&c| labels.is_bad(c)) {
                            stops.push(q);
                            if !is_stop(q) {
                                following.extend(kids.iter().copied().filter(|c| in_tree.contains(c)));
                            }
                        } else {
                            stack.extend(kids.iter().rev());
                        }
                    }
                    members.sort_unstable();
                    stops.sort_unstable();
                    gen.push(PrunedRegion { top: r, members, stops });
                }
                generations.push(gen);
                following.sort_unstable();
                next = following;
            }
            PrunedTree { root: t.top, generations }
        })
        .collect();
    PrunedCoronization { criterion: labels.params.kind.name().to_string(), trees }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corona::build_coronization;
    use crate::criteria::{CriterionKind, CriterionParams};
    use crate::cubes::{build_christ_cubes, build_dyadic_index};
    use crate::frostmann::run_frostmann;

    fn setup() -> (PointCloud, CubeForest, Coronization) {
        let k = 513;
        let c = PointCloud::new((0..k).map(|i| vec![i as f64 / (k - 1) as f64, 0.0]).collect(), 2, 1, 1.0 / 512.0)
            .unwrap();
        let forest = build_christ_cubes(&c, 0.5, 5, 0).unwrap();
        let idx = build_dyadic_index(&c, 9).unwrap();
        let fr = run_frostmann(&idx, 1, 9).unwrap();
        let cor = build_coronization(&forest, &fr, 8.0, 5).unwrap();
        (c, forest, cor)
    }

    #[test]
    fn all_good_is_identity() {
        let (_, forest, cor) = setup();
        let labels = QPLabeling::uniform(&forest, CriterionParams::new(CriterionKind::Bwgl), true);
        let p = prune_by_qp(&cor, &forest, &labels);
        for (pt, t) in p.trees.iter().zip(&cor.trees) {
            assert_eq!(pt.k(), 0);
            assert_eq!(pt.generations[0], vec![PrunedRegion { top: t.top, members: t.members.clone(), stops: t.stops.clone() }]);
        }
    }

    #[test]
    fn all_bad_cuts_every_level() {
        let (_, forest, cor) = setup();
        let labels = QPLabeling::uniform(&forest, CriterionParams::new(CriterionKind::Bwgl), false);
        let p = prune_by_qp(&cor, &forest, &labels);
        for (pt, t) in p.trees.iter().zip(&cor.trees) {
            let levels: Vec<u32> = t.members.iter().map(|&q| forest.cube(q).level).collect();
            let depth = levels.iter().max().unwrap() - levels.iter().min().unwrap();
            assert_eq!(pt.k(), depth as usize);
            for g in &pt.generations {
                assert!(g.iter().all(|r| r.members == vec![r.top]));
            }
            let total: usize = pt.generations.iter().map(|g| g.len()).sum();
            assert_eq!(total, t.members.len());
        }
    }
}
