//! A static k-d tree over points of arbitrary dimension.
//!
//! All queries are deterministic: ties in distance resolve to the lowest
//! point index.

use crate::geometry::{dist, point_box_dist, point_box_max_dist};

const LEAF: usize = 16;

#[derive(Debug, Clone)]
struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    start: usize,
    end: usize,
    kids: Option<(usize, usize)>,
    min_offset: f64,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    offsets: Vec<f64>,
}

impl KdTree {
    /// Builds a tree over `coords`, a flat row-major array of `dim`-vectors.
    pub fn new(coords: &[f64], dim: usize) -> Self {
        Self::with_offsets(coords, dim, None)
    }

    /// Builds a tree where point `i` carries an additive offset; used by
    /// [`KdTree::min_offset_dist`].
    pub fn with_offsets(coords: &[f64], dim: usize, offsets: Option<Vec<f64>>) -> Self {
        assert!(dim > 0 && coords.len() % dim == 0);
        let len = coords.len() / dim;
        let offsets = offsets.unwrap_or_else(|| vec![0.0; len]);
        assert_eq!(offsets.len(), len);
        let mut tree = Self {
            dim,
            coords: coords.to_vec(),
            order: (0..len).collect(),
            nodes: Vec::new(),
            offsets,
        };
        if len > 0 {
            tree.build(0, len);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    #[inline]
    fn pt(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let dim = self.dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let mut min_offset = f64::INFINITY;
        for &i in &self.order[start..end] {
            let p = &self.coords[i * dim..(i + 1) * dim];
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
            min_offset = min_offset.min(self.offsets[i]);
        }
        let id = self.nodes.len();
        self.nodes.push(Node { lo: lo.clone(), hi: hi.clone(), start, end, kids: None, min_offset });
        if end - start > LEAF {
            let axis = (0..dim)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
                .unwrap();
            if hi[axis] > lo[axis] {
                let mid = (start + end) / 2;
                let coords = &self.coords;
                self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                    coords[a * dim + axis].total_cmp(&coords[b * dim + axis]).then(a.cmp(&b))
                });
                let l = self.build(start, mid);
                let r = self.build(mid, end);
                self.nodes[id].kids = Some((l, r));
            }
        }
        id
    }

    /// Generic best-first minimisation. `bound(lo, hi, min_offset)` must be a
    /// lower bound of `eval` over every point of the box.
    fn minimise<B, E>(&self, bound: B, eval: E) -> Option<(usize, f64)>
    where
        B: Fn(&[f64], &[f64], f64) -> f64,
        E: Fn(usize) -> f64,
    {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        let mut stack = vec![(0usize, bound(&self.nodes[0].lo, &self.nodes[0].hi, self.nodes[0].min_offset))];
        while let Some((id, lb)) = stack.pop() {
            if let Some((_, b)) = best {
                if lb > b {
                    continue;
                }
            }
            let node = &self.nodes[id];
            match node.kids {
                None => {
                    for &i in &self.order[node.start..node.end] {
                        let v = eval(i);
                        best = match best {
                            Some((bi, bv)) if bv < v || (bv == v && bi < i) => Some((bi, bv)),
                            _ => Some((i, v)),
                        };
                    }
                }
                Some((l, r)) => {
                    let bl = bound(&self.nodes[l].lo, &self.nodes[l].hi, self.nodes[l].min_offset);
                    let br = bound(&self.nodes[r].lo, &self.nodes[r].hi, self.nodes[r].min_offset);
                    // push the farther child first so the nearer is explored first
                    if bl <= br {
                        stack.push((r, br));
                        stack.push((l, bl));
                    } else {
                        stack.push((l, bl));
                        stack.push((r, br));
                    }
                }
            }
        }
        best
    }

    /// Nearest point to `q` and its distance.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        self.minimise(|lo, hi, _| point_box_dist(q, lo, hi), |i| dist(q, self.pt(i)))
    }

    /// Minimises `offset[i] + dist(q, p_i)` over the points.
    pub fn min_offset_dist(&self, q: &[f64]) -> Option<(usize, f64)> {
        self.minimise(
            |lo, hi, m| m + point_box_dist(q, lo, hi),
            |i| self.offsets[i] + dist(q, self.pt(i)),
        )
    }

    /// Minimises `offset[i] + dist(box, p_i)` over the points, where the query
    /// is the closed box `[qlo, qhi]`.
    pub fn min_offset_box_dist(&self, qlo: &[f64], qhi: &[f64]) -> Option<(usize, f64)> {
        self.minimise(
            |lo, hi, m| m + crate::geometry::box_box_dist(qlo, qhi, lo, hi),
            |i| self.offsets[i] + point_box_dist(self.pt(i), qlo, qhi),
        )
    }

    /// Largest distance from `q` to a point of the tree.
    pub fn farthest_distance(&self, q: &[f64]) -> f64 {
        self.minimise(|lo, hi, _| -point_box_max_dist(q, lo, hi), |i| -dist(q, self.pt(i)))
            .map(|(_, v)| -v)
            .unwrap_or(0.0)
    }

    /// Sorted indices of points within closed distance `r` of `q`.
    pub fn within(&self, q: &[f64], r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let r2 = r * r;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if point_box_dist(q, &node.lo, &node.hi) > r {
                continue;
            }
            if point_box_max_dist(q, &node.lo, &node.hi) <= r {
                out.extend_from_slice(&self.order[node.start..node.end]);
                continue;
            }
            match node.kids {
                None => {
                    for &i in &self.order[node.start..node.end] {
                        if crate::geometry::dist_sq(q, self.pt(i)) <= r2 {
                            out.push(i);
                        }
                    }
                }
                Some((l, rr)) => {
                    stack.push(l);
                    stack.push(rr);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// `true` if some point lies within closed distance `r` of `q`.
    pub fn any_within(&self, q: &[f64], r: f64) -> bool {
        self.nearest(q).is_some_and(|(_, d)| d <= r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn nearest_matches_brute_force() {
        for dim in [1, 2, 3, 5] {
            let pts = random(500, dim, dim as u64);
            let tree = KdTree::new(&pts, dim);
            let qs = random(50, dim, 99);
            for q in qs.chunks(dim) {
                let (bi, bd) = (0..500)
                    .map(|i| (i, dist(q, &pts[i * dim..(i + 1) * dim])))
                    .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
                let (ti, td) = tree.nearest(q).unwrap();
                assert_eq!(ti, bi);
                assert_eq!(td, bd);
            }
        }
    }

    #[test]
    fn ties_pick_lowest_index() {
        let pts = vec![1.0, -1.0, 1.0, -1.0];
        let tree = KdTree::new(&pts, 1);
        assert_eq!(tree.nearest(&[0.0]).unwrap().0, 0);
    }

    #[test]
    fn within_and_farthest_match_brute_force() {
        let pts = random(400, 3, 7);
        let tree = KdTree::new(&pts, 3);
        let q = [0.1, -0.2, 0.3];
        let brute: Vec<usize> = (0..400).filter(|&i| dist(&q, &pts[i * 3..i * 3 + 3]) <= 0.5).collect();
        assert_eq!(tree.within(&q, 0.5), brute);
        let far = (0..400).map(|i| dist(&q, &pts[i * 3..i * 3 + 3])).fold(0.0, f64::max);
        assert_eq!(tree.farthest_distance(&q), far);
    }

    #[test]
    fn offsets_match_brute_force() {
        let pts = random(300, 2, 11);
        let offs: Vec<f64> = random(300, 1, 12).iter().map(|x| x.abs()).collect();
        let tree = KdTree::with_offsets(&pts, 2, Some(offs.clone()));
        let q = [0.3, 0.3];
        let brute = (0..300).map(|i| offs[i] + dist(&q, &pts[i * 2..i * 2 + 2])).fold(f64::INFINITY, f64::min);
        assert_eq!(tree.min_offset_dist(&q).unwrap().1, brute);
        let (lo, hi) = ([0.0, 0.0], [0.2, 0.1]);
        let brute = (0..300)
            .map(|i| offs[i] + point_box_dist(&pts[i * 2..i * 2 + 2], &lo, &hi))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(tree.min_offset_box_dist(&lo, &hi).unwrap().1, brute);
    }
}
