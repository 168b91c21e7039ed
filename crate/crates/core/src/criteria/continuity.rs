use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate_ball, CriterionParams};
use crate::error::{invalid, Error, Result};
use crate::geometry::{dist, Ball};
use crate::pointset::{hausdorff_gap, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub epsilon1: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub trials: usize,
    pub seed: u64,
    /// Radii of the balls on `E1` are log-uniform in
    /// `[r_min_frac, r_max_frac] · diam E1`.
    pub r_min_frac: f64,
    pub r_max_frac: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { epsilon1: 0.01, c1: 8.0, c2: 4.0, trials: 200, seed: 0, r_min_frac: 0.125, r_max_frac: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub ball: Ball,
    pub sub_ball: Ball,
    /// Smallest factor on the criterion parameter making the sub-ball good on `E2`.
    pub relaxation: f64,
    /// The sub-ball is already good at the unrelaxed parameter.
    pub good_unrelaxed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityProbe {
    pub params: CriterionParams,
    pub options: ProbeOptions,
    pub attempts: usize,
    pub outcomes: Vec<ProbeOutcome>,
}

impl ContinuityProbe {
    /// The empirical constant: largest relaxation over all outcomes.
    pub fn max_relaxation(&self) -> Option<f64> {
        self.outcomes.iter().map(|o| o.relaxation).reduce(f64::max)
    }
}

/// Samples balls `B` on `e1` that are good and satisfy `d_{C2 B}(E1, E2) < ε1`,
/// then sub-balls `B'` on `e2` with `C2 B' ⊆ B` and `r_{B'} ≥ r_B / C1`.
pub fn continuity_probe(
    params: &CriterionParams,
    e1: &PointCloud,
    e2: &PointCloud,
    options: &ProbeOptions,
) -> Result<ContinuityProbe> {
    params.validate()?;
    if e1.n() != e2.n() {
        return Err(invalid("clouds must share the ambient dimension"));
    }
    let o = *options;
    if !(o.c2 >= 1.0 && o.c1 >= o.c2) {
        return Err(invalid(format!("need C1 >= C2 >= 1, got C1 = {}, C2 = {}", o.c1, o.c2)));
    }
    if !(o.r_min_frac > 0.0 && o.r_min_frac <= o.r_max_frac) {
        return Err(invalid("radius fractions must satisfy 0 < min <= max"));
    }
    let d = e1.d();
    let t1 = e1.kdtree();
    let t2 = e2.kdtree();
    let diam = e1.diameter_with(&t1);
    let (r_lo, r_hi) = (o.r_min_frac * diam, o.r_max_frac * diam);
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut outcomes = Vec::new();
    for trial in 0..o.trials {
        let x = e1.point(rng.gen_range(0..e1.len())).to_vec();
        let r = if r_hi > r_lo { rng.gen_range(r_lo.ln()..r_hi.ln()).exp() } else { r_lo };
        let r_sub = rng.gen_range(r / o.c1..=r / o.c2);
        let pick: f64 = rng.gen();
        let ball = Ball::new(x, r)?;
        let seed = o.seed.wrapping_add(trial as u64);
        if !evaluate_ball(e1, &t1, &ball, d, params, seed, false).good {
            continue;
        }
        match hausdorff_gap(e1, e2, &ball.scaled(o.c2)) {
            Ok(g) if g < o.epsilon1 => {}
            Ok(_) | Err(Error::GapUndefined) => continue,
            Err(e) => return Err(e),
        }
        let slack = r - o.c2 * r_sub;
        let centres: Vec<usize> = t2
            .within(&ball.center, slack)
            .into_iter()
            .filter(|&i| dist(e2.point(i), &ball.center) + o.c2 * r_sub <= r)
            .collect();
        if centres.is_empty() {
            continue;
        }
        let c = centres[((pick * centres.len() as f64) as usize).min(centres.len() - 1)];
        let sub_ball = Ball::new(e2.point(c).to_vec(), r_sub)?;
        let v = evaluate_ball(e2, &t2, &sub_ball, d, params, seed, true);
        outcomes.push(ProbeOutcome { ball, sub_ball, relaxation: v.relaxation(params), good_unrelaxed: v.good });
    }
    Ok(ContinuityProbe { params: *params, options: o, attempts: o.trials, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::CriterionKind;

    fn line(k: usize, jitter: f64, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(
            (0..k).map(|i| vec![i as f64 / (k - 1) as f64, jitter * rng.gen_range(-1.0..1.0)]).collect(),
            2,
            1,
            1.0 / (k - 1) as f64,
        )
        .unwrap()
    }

    #[test]
    fn identical_lines_need_no_relaxation() {
        let e = line(401, 0.0, 0);
        let p = CriterionParams { epsilon: 0.05, ..CriterionParams::new(CriterionKind::Ls) };
        let probe = continuity_probe(&p, &e, &e, &ProbeOptions { trials: 40, ..ProbeOptions::default() }).unwrap();
        assert!(!probe.outcomes.is_empty());
        for o in &probe.outcomes {
            assert!(o.relaxation <= 1.0 + 1e-12);
            assert!(o.sub_ball.radius >= o.ball.radius / 8.0 - 1e-12);
            assert!(dist(&o.sub_ball.center, &o.ball.center) + 4.0 * o.sub_ball.radius <= o.ball.radius + 1e-12);
        }
    }

    #[test]
    fn jittered_line_bwgl_relaxation_is_bounded() {
        let e1 = line(401, 0.0, 0);
        let e2 = line(401, 0.001, 1);
        let p = CriterionParams { epsilon: 0.01, ..CriterionParams::new(CriterionKind::Bwgl) };
        let probe = continuity_probe(&p, &e1, &e2, &ProbeOptions { trials: 60, ..ProbeOptions::default() }).unwrap();
        let c = probe.max_relaxation().unwrap();
        assert!(c.is_finite() && c <= 16.0, "{c}");
    }
}
