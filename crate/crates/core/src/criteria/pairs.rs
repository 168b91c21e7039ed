//! Pair witnesses for local symmetry (`2y - z`) and local convexity
//! (`(y + z) / 2`).

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::pointset::PointCloud;
use crate::spatial::KdTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairRule {
    Reflection,
    Midpoint,
}

impl PairRule {
    pub fn image(self, y: &[f64], z: &[f64]) -> Vec<f64> {
        match self {
            PairRule::Reflection => y.iter().zip(z).map(|(a, b)| 2.0 * a - b).collect(),
            PairRule::Midpoint => y.iter().zip(z).map(|(a, b)| 0.5 * (a + b)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairScan {
    /// Largest `dist(image, E) / r` over the scanned pairs (or the first
    /// violating value when the scan stopped early).
    pub value: f64,
    /// First pair with `dist(image, E) ≥ ε r`.
    pub witness: Option<(usize, usize, f64)>,
    pub pairs_checked: usize,
}

/// Points used for a pair scan: all of `inside` up to `cap`, otherwise a
/// seeded subsample of `cap`.
pub fn scan_set(inside: &[usize], cap: usize, seed: u64) -> Vec<usize> {
    if inside.len() <= cap {
        return inside.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<usize> = sample(&mut rng, inside.len(), cap).into_iter().map(|j| inside[j]).collect();
    v.sort_unstable();
    v
}

#[allow(clippy::too_many_arguments)]
pub fn scan_pairs(
    cloud: &PointCloud,
    tree: &KdTree,
    pts: &[usize],
    r: f64,
    epsilon: f64,
    rule: PairRule,
    early_exit: bool,
) -> PairScan {
    let mut value: f64 = 0.0;
    let mut witness = None;
    let mut checked = 0;
    for (a, &y) in pts.iter().enumerate() {
        let start = if rule == PairRule::Midpoint { a + 1 } else { 0 };
        for &z in &pts[start..] {
            if y == z {
                continue;
            }
            checked += 1;
            let w = rule.image(cloud.point(y), cloud.point(z));
            let dist = tree.nearest(&w).map_or(f64::INFINITY, |(_, v)| v);
            let ratio = dist / r;
            value = value.max(ratio);
            if dist >= epsilon * r && witness.is_none() {
                witness = Some((y, z, dist));
                if early_exit {
                    return PairScan { value, witness, pairs_checked: checked };
                }
            }
        }
    }
    PairScan { value, witness, pairs_checked: checked }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_pair_example() {
        let c = PointCloud::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0], vec![4.0, 0.0]], 2, 1, 0.01).unwrap();
        let tree = c.kdtree();
        // points 1, 2, 4 live at indices 1, 2, 3
        let y2z4 = PairRule::Reflection.image(c.point(2), c.point(3));
        assert_eq!(tree.nearest(&y2z4).unwrap().1, 0.0);
        let scan = scan_pairs(&c, &tree, &[1, 2, 3], 1.0, 2.0, PairRule::Reflection, false);
        // 2*4 - 1 = 7 lies 3 away from the set; 2*4 - 2 = 6 lies 2 away
        assert!((scan.value - 3.0).abs() < 1e-12);
        let (y, z, dist) = scan.witness.unwrap();
        assert!(dist >= 2.0);
        let w = PairRule::Reflection.image(c.point(y), c.point(z));
        assert!((tree.nearest(&w).unwrap().1 - dist).abs() < 1e-12);
    }

    #[test]
    fn arithmetic_progression_interior_is_symmetric() {
        let c = PointCloud::new((0..201).map(|i| vec![i as f64 * 0.01, 0.0]).collect(), 2, 1, 0.01).unwrap();
        let tree = c.kdtree();
        // a window whose reflections stay inside the progression
        let pts: Vec<usize> = (80..=120).collect();
        let scan = scan_pairs(&c, &tree, &pts, 0.2, 0.01, PairRule::Reflection, false);
        assert!(scan.witness.is_none());
        assert!(scan.value < 1e-9);
        let mid = scan_pairs(&c, &tree, &pts, 0.2, 0.01, PairRule::Midpoint, false);
        assert!(mid.value <= 0.005 / 0.2 + 1e-12);
    }

    #[test]
    fn subsample_is_seeded_and_capped() {
        let inside: Vec<usize> = (0..5000).collect();
        let a = scan_set(&inside, 2000, 3);
        assert_eq!(a.len(), 2000);
        assert_eq!(a, scan_set(&inside, 2000, 3));
        assert_eq!(scan_set(&inside[..10], 2000, 3), inside[..10].to_vec());
    }
}
