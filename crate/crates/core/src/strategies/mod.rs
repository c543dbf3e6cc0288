//! Alice's constructive strategies, the wrappers around them, and Bob adversaries.

mod bob;
mod greedy;
mod epoch;
mod wrappers;

pub use bob::{BobChase, BobMaximal, BobRandom};
pub use greedy::GreedyAlice;
pub use epoch::{certified_k_max, epoch_constraints, make_slab, EpochConstraint, EpochAlice};
pub use wrappers::{CenteredAlice, IntersectStrategies, StrongWrapper};

use num_traits::{One, Zero};

use crate::engine::StrategyError;
use crate::geometry::{point_clears, schmidt_leq, Ball, SlabConstraint};
use crate::linalg::{norm2, Vector};
use crate::numeric::{ceil, fmt_scalar, int, pow, to_f64, Bound, Scalar};
use crate::supports::{epsilon_for, max_alpha, Candidates, DecayParams, SupportModel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleParams {
    pub alpha: Scalar,
    pub beta: Scalar,
    pub q: Scalar,
    pub epsilon: Scalar,
    pub n: usize,
    pub r: usize,
    pub rho: Scalar,
    pub c: Scalar,
    pub delta: Scalar,
}

impl ScheduleParams {
    pub fn alpha_beta(&self) -> Scalar {
        &self.alpha * &self.beta
    }

    /// Radius of Bob's ball in round i, ρ(αβ)^{i−1}.
    pub fn bob_radius(&self, i: usize) -> Scalar {
        &self.rho * pow(&self.alpha_beta(), i as i64 - 1)
    }

    /// (αβ)^{−rj}, the upper end of the index window of epoch j.
    pub fn window_upper(&self, j: usize) -> Scalar {
        pow(&self.alpha_beta(), -((self.r * j) as i64))
    }

    /// Halfwidth ζ = (αβ)^{r(j+1)−1}ρ of the epoch-j slabs.
    pub fn zeta(&self, j: usize) -> Scalar {
        self.bob_radius(self.r * (j + 1))
    }

    /// Alice rounds needed to finish `epochs` epochs.
    pub fn rounds_for_epochs(&self, epochs: usize) -> usize {
        (self.r * (epochs + 1)).saturating_sub(1).max(1)
    }
}

/// r(N) = ⌊log_{1/(1−ε)} N⌋ + 1, i.e. the least r with (1−ε)^r N < 1.
pub fn r_for(epsilon: &Scalar, n: usize) -> usize {
    let shrink = Scalar::one() - epsilon;
    let mut r = 0;
    let mut p = Scalar::one();
    let n = int(n as i64);
    while &p * &n >= Scalar::one() {
        p *= &shrink;
        r += 1;
    }
    r
}

const MAX_SCAN: usize = 100_000;

pub fn schedule_params(
    alpha: &Scalar,
    beta: &Scalar,
    q: &Scalar,
    decay: &DecayParams,
    delta: &Scalar,
    rho: &Scalar,
) -> Result<ScheduleParams, StrategyError> {
    let inf = |s: String| StrategyError::Infeasible(s);
    if *q <= Scalar::one() {
        return Err(inf("Q must exceed 1".into()));
    }
    if *beta <= Scalar::zero() || *beta >= Scalar::one() {
        return Err(inf("beta must lie in (0, 1)".into()));
    }
    let epsilon = epsilon_for(decay, alpha).map_err(|e| inf(e.to_string()))?;
    let ab = alpha * beta;
    let rho_cap = &ab * delta / int(4);
    let too_big = *rho >= rho_cap || matches!(&decay.rho0, Bound::Finite(r0) if rho >= r0);
    if too_big || *rho <= Scalar::zero() {
        return Err(inf(format!("rho must be below min(alpha*beta*delta/4, rho0) = {}", fmt_scalar(&rho_cap))));
    }
    let (lq, lab) = (to_f64(q).ln(), -to_f64(&ab).ln());
    let mut n = 1;
    let found = loop {
        if n > MAX_SCAN {
            break None;
        }
        let r = r_for(&epsilon, n);
        let (lhs, rhs) = (r as f64 * lab, n as f64 * lq);
        // decide exactly unless the float gap is unambiguous
        if lhs <= rhs * (1.0 + 1e-9) && pow(&ab, -(r as i64)) <= pow(q, n as i64) {
            break Some((n, r));
        }
        n += 1;
    };
    let (n, r) = found.ok_or_else(|| inf(format!("no N below {MAX_SCAN} satisfies the schedule")))?;
    let c = (rho * pow(&ab, 2 * r as i64 - 1)).min(delta / int(4));
    Ok(ScheduleParams { alpha: alpha.clone(), beta: beta.clone(), q: q.clone(), epsilon, n, r, rho: rho.clone(), c, delta: delta.clone() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Avoidance {
    pub center: Vector,
    pub avoided: Vec<usize>,
}

/// Does B(x, αρ) clear the slab by more than αρ?
fn clears(x: &[Scalar], slab: &SlabConstraint, two_ar: &Scalar) -> bool {
    point_clears(x, slab, two_ar)
}

fn avoided_by(x: &[Scalar], slabs: &[SlabConstraint], two_ar: &Scalar) -> Vec<usize> {
    (0..slabs.len()).filter(|&i| clears(x, &slabs[i], two_ar)).collect()
}

/// Float counts of cleared slabs for every grid candidate, in units of ρ.
fn grid_scores(ball: &Ball, origin: &[Scalar], step: &Scalar, offsets: &[Vec<i64>], slabs: &[SlabConstraint], two_ar: &Scalar) -> Vec<u32> {
    struct Row {
        u: f64,
        a: Vec<f64>,
        tau: f64,
    }
    let r = &ball.radius;
    let step_r = to_f64(&(step / r));
    let rows: Vec<Row> = slabs
        .iter()
        .map(|s| {
            let nn = to_f64(&norm2(&s.normal)).sqrt();
            let s0 = crate::linalg::dot(&s.normal, origin) - &s.offset;
            Row {
                u: to_f64(&(s0 / r)) / nn,
                a: s.normal.iter().map(|v| step_r * to_f64(v) / nn).collect(),
                tau: to_f64(&((&s.halfwidth + two_ar) / r)),
            }
        })
        .collect();
    offsets
        .iter()
        .map(|z| {
            rows.iter()
                .filter(|row| {
                    let v = row.u + row.a.iter().zip(z).map(|(a, &zi)| a * zi as f64).sum::<f64>();
                    v.abs() > row.tau * (1.0 - 1e-9)
                })
                .count() as u32
        })
        .collect()
}

/// Exact argmax among candidates, scanning in decreasing float score.
fn best_candidate(cands: &Candidates, scores: Option<&[u32]>, slabs: &[SlabConstraint], two_ar: &Scalar) -> Option<Avoidance> {
    let mut best: Option<Avoidance> = None;
    match scores {
        None => {
            for i in 0..cands.len() {
                let x = cands.point(i);
                let av = avoided_by(&x, slabs, two_ar);
                if best.as_ref().map_or(true, |b| av.len() > b.avoided.len()) {
                    best = Some(Avoidance { center: x, avoided: av });
                }
            }
        }
        Some(sc) => {
            let mut order: Vec<usize> = (0..sc.len()).collect();
            order.sort_by(|&a, &b| sc[b].cmp(&sc[a]).then(a.cmp(&b)));
            for (done, &i) in order.iter().enumerate() {
                if let Some(b) = &best {
                    if (sc[i] as usize) < b.avoided.len() || done >= 512 {
                        break;
                    }
                }
                let x = cands.point(i);
                let av = avoided_by(&x, slabs, two_ar);
                if best.as_ref().map_or(true, |b| av.len() > b.avoided.len()) {
                    best = Some(Avoidance { center: x, avoided: av });
                }
            }
        }
    }
    best
}

/// Finds x₂ ∈ K with B(x₂, αρ) ⊆ ball clearing at least ⌈εN⌉ of the slabs
/// by more than αρ.
pub fn avoidance_move(k: &SupportModel, ball: &Ball, slabs: &[SlabConstraint], alpha: &Scalar) -> Result<Avoidance, StrategyError> {
    let eps = epsilon_for(&k.decay, alpha).map_err(|e| StrategyError::Infeasible(e.to_string()))?;
    avoidance_move_with(k, ball, slabs, alpha, &eps)
}

pub fn avoidance_move_with(
    k: &SupportModel,
    ball: &Ball,
    slabs: &[SlabConstraint],
    alpha: &Scalar,
    eps: &Scalar,
) -> Result<Avoidance, StrategyError> {
    if slabs.is_empty() {
        return Ok(Avoidance { center: ball.center.clone(), avoided: vec![] });
    }
    let needed = ceil(&(eps * int(slabs.len() as i64)));
    let needed: usize = num_traits::ToPrimitive::to_usize(&needed).unwrap_or(usize::MAX);
    let two_ar = int(2) * alpha * &ball.radius;
    let mut base_len = 0;
    let mut best_seen = 0;
    for refine in 0.. {
        if refine > 0 && !k.refinement_allowed(base_len, refine) {
            break;
        }
        let cands = match k.candidate_centers_refined(ball, alpha, refine) {
            Ok(c) => c,
            Err(e) => return Err(StrategyError::NoFeasibleCenter(e.to_string())),
        };
        if refine == 0 {
            base_len = cands.len();
        }
        let scores = match &cands {
            Candidates::Grid { origin, step, offsets } => Some(grid_scores(ball, origin, step, offsets, slabs, &two_ar)),
            Candidates::Points(_) => None,
        };
        if let Some(best) = best_candidate(&cands, scores.as_deref(), slabs, &two_ar) {
            best_seen = best_seen.max(best.avoided.len());
            if best.avoided.len() >= needed {
                let inner = Ball { center: best.center.clone(), radius: alpha * &ball.radius };
                if !schmidt_leq(&inner, ball).unwrap_or(false) || !k.contains(&best.center) {
                    return Err(StrategyError::NoFeasibleCenter("candidate failed exact containment".into()));
                }
                return Ok(best);
            }
        }
    }
    Err(StrategyError::NoFeasibleCenter(format!(
        "best center clears {best_seen} of {} slabs, {needed} required; alpha = {}, max_alpha ~ {:.6}",
        slabs.len(),
        fmt_scalar(alpha),
        to_f64(&max_alpha(&k.decay))
    )))
}

/// Moves B(x₂, αρ) strictly away from one slab (distance > αρ).
pub fn single_escape(k: &SupportModel, ball: &Ball, slab: &SlabConstraint, alpha: &Scalar) -> Result<Vector, StrategyError> {
    let two_ar = int(2) * alpha * &ball.radius;
    if clears(&ball.center, slab, &two_ar) {
        return Ok(ball.center.clone());
    }
    let eps = epsilon_for(&k.decay, alpha).map_err(|e| StrategyError::Infeasible(e.to_string()))?;
    avoidance_move_with(k, ball, std::slice::from_ref(slab), alpha, &eps).map(|a| a.center)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::slab_ball_distance;
    use crate::numeric::ratio;
    use crate::supports::Ifs;

    #[test]
    fn schedule_example() {
        let p = schedule_params(&ratio(1, 4), &ratio(1, 2), &int(3), &DecayParams::lebesgue(1), &int(1), &ratio(1, 40)).unwrap();
        assert_eq!((p.n, p.r), (14, 7));
        assert_eq!(p.epsilon, ratio(1, 3));
        assert_eq!(p.c, ratio(1, 40) * pow(&int(8), -13));
        // independent scan: smallest N with 8^r ≤ 3^N
        let oracle = (1..40u32)
            .find(|&n| {
                let r = (1..).find(|&r| 2f64.powi(r) * (n as f64) < 3f64.powi(r)).unwrap();
                8u128.pow(r as u32) <= 3u128.pow(n)
            })
            .unwrap();
        assert_eq!(oracle as usize, p.n);
    }

    #[test]
    fn schedule_collapse_and_errors() {
        let tiny = DecayParams::new(ratio(1, 1000), int(1), Bound::Infinite).unwrap();
        let p = schedule_params(&ratio(1, 4), &ratio(1, 2), &int(3), &tiny, &int(1), &ratio(1, 40)).unwrap();
        assert_eq!(p.r, 1);
        assert_eq!(p.n, 2);
        let bad = schedule_params(&ratio(1, 3), &ratio(1, 2), &int(3), &DecayParams::lebesgue(1), &int(1), &ratio(1, 40));
        assert!(bad.is_err());
        let big_rho = schedule_params(&ratio(1, 4), &ratio(1, 2), &int(3), &DecayParams::lebesgue(1), &int(1), &ratio(1, 32));
        assert!(big_rho.is_err());
    }

    #[test]
    fn r_matches_log_formula() {
        for n in 1..200 {
            let r = r_for(&ratio(1, 3), n);
            let expect = ((n as f64).ln() / 1.5f64.ln() + 1e-12).floor() as usize + 1;
            assert_eq!(r, expect, "n = {n}");
        }
    }

    #[test]
    fn avoidance_examples() {
        let k = SupportModel::euclidean(1);
        let b = Ball::new(vec![int(0)], int(1)).unwrap();
        let none = avoidance_move(&k, &b, &[], &ratio(1, 5)).unwrap();
        assert_eq!(none.center, vec![int(0)]);
        let pt = SlabConstraint::new(vec![int(1)], int(0), int(0)).unwrap();
        let a = avoidance_move(&k, &b, std::slice::from_ref(&pt), &ratio(1, 5)).unwrap();
        assert_eq!(a.avoided, vec![0]);
        let x = a.center[0].clone();
        let ax = if x < int(0) { -x } else { x };
        assert!(ax > ratio(2, 5) && ax <= ratio(4, 5));
        // four points, ε = 1/2 ⇒ at least two cleared
        let slabs: Vec<SlabConstraint> = [-3, -1, 1, 3]
            .iter()
            .map(|&p| SlabConstraint::new(vec![int(1)], ratio(p, 10), int(0)).unwrap())
            .collect();
        let a = avoidance_move(&k, &b, &slabs, &ratio(1, 5)).unwrap();
        let exact = avoided_by(&a.center, &slabs, &ratio(2, 5));
        assert_eq!(exact, a.avoided);
        assert!(a.avoided.len() >= 2);
    }

    #[test]
    fn escapes() {
        let k = SupportModel::euclidean(2);
        let b = Ball::new(vec![int(0), int(0)], int(1)).unwrap();
        let far = SlabConstraint::new(vec![int(1), int(0)], int(5), int(0)).unwrap();
        assert_eq!(single_escape(&k, &b, &far, &ratio(1, 5)).unwrap(), b.center);
        let through = SlabConstraint::new(vec![int(1), int(1)], int(0), int(0)).unwrap();
        let x = single_escape(&k, &b, &through, &ratio(1, 5)).unwrap();
        let moved = Ball::new(x, ratio(1, 5)).unwrap();
        assert!(slab_ball_distance(&moved, &through).unwrap() > ratio(1, 5));

        let cantor = SupportModel::ifs(Ifs::cantor(), DecayParams::new(int(4), ratio(5, 8), Bound::Finite(int(1))).unwrap(), 1).unwrap();
        let p = ratio(2, 9);
        let cb = Ball::new(vec![p.clone()], ratio(1, 50)).unwrap();
        assert!(cantor.contains(&cb.center));
        let at = SlabConstraint::new(vec![int(1)], p, int(0)).unwrap();
        let x = single_escape(&cantor, &cb, &at, &ratio(1, 40)).unwrap();
        assert!(cantor.contains(&x));
        assert!(point_clears(&x, &at, &(int(2) * ratio(1, 40) * ratio(1, 50))));
    }
}
