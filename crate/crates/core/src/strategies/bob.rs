//! Adversaries for Bob.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{GameConfig, MoveContext, Proposal, Strategy, StrategyError};
use crate::geometry::Ball;
use crate::linalg::{norm2, vadd, vscale, vsub, Vector};
use crate::matseq::MatrixSequence;
use crate::numeric::{big, int, log2_abs, ratio, round_down_dyadic, sqrt_bounds, to_f64, Scalar};
use crate::supports::SupportKind;
use crate::targets::TargetFamily;

fn feasible_shift(ctx: &MoveContext<'_>) -> Scalar {
    (Scalar::one() - &ctx.config.beta) * &ctx.current.radius
}

fn no_center(e: impl ToString) -> StrategyError {
    StrategyError::NoFeasibleCenter(e.to_string())
}

/// Takes the whole of Alice's ball; legal only in the strong game.
#[derive(Debug, Default, Clone)]
pub struct BobMaximal;

impl Strategy for BobMaximal {
    fn name(&self) -> String {
        "maximal".into()
    }

    fn propose(&mut self, ctx: &MoveContext<'_>) -> Result<Proposal, StrategyError> {
        Ok(Proposal::new(ctx.current.clone()))
    }
}

/// A uniformly random legal center, reproducible from the seed.
pub struct BobRandom {
    rng: ChaCha8Rng,
}

impl BobRandom {
    pub fn new(seed: u64) -> Self {
        BobRandom { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

const RES_BITS: u32 = 32;

impl Strategy for BobRandom {
    fn name(&self) -> String {
        "random".into()
    }

    fn start(&mut self, _config: &GameConfig, seed: u64) -> Result<(), StrategyError> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(())
    }

    fn propose(&mut self, ctx: &MoveContext<'_>) -> Result<Proposal, StrategyError> {
        let radius = &ctx.config.beta * &ctx.current.radius;
        let center = match &ctx.config.support.kind {
            SupportKind::Euclidean(n) => {
                let shift = feasible_shift(ctx);
                let den = big(BigInt::one() << RES_BITS);
                let lim = 1i64 << RES_BITS;
                let u = loop {
                    let u: Vector = (0..*n).map(|_| int(self.rng.gen_range(-lim..=lim)) / &den).collect();
                    if norm2(&u) <= Scalar::one() {
                        break u;
                    }
                };
                vadd(&ctx.current.center, &vscale(&u, &shift))
            }
            SupportKind::Ifs(_) => {
                let cands = ctx.config.support.candidate_centers(ctx.current, &ctx.config.beta).map_err(no_center)?;
                cands.point(self.rng.gen_range(0..cands.len()))
            }
        };
        Ok(Proposal::new(Ball { center, radius }))
    }
}

/// Steers toward a target preimage M_k⁻¹(y) among the indices whose
/// preimage spacing is still coarse at the current scale.
pub struct BobChase {
    seq: Arc<MatrixSequence>,
    targets: Arc<TargetFamily>,
    horizon: usize,
}

impl BobChase {
    pub fn new(seq: Arc<MatrixSequence>, targets: Arc<TargetFamily>, horizon: usize) -> Self {
        BobChase { seq, targets, horizon }
    }

    /// A point of M_k⁻¹(Z_k) for the finest coarse index k whose preimage
    /// is within `reach` of `a`, else for the nearest one.
    fn aim(&self, a: &[Scalar], scale: &Scalar, reach: &Scalar) -> Option<(usize, Vector)> {
        let s = to_f64(scale);
        let r2 = reach * reach;
        let mut nearest: Option<(Scalar, usize, Vector)> = None;
        let mut finest = None;
        for k in (1..=self.horizon).take_while(|&k| self.seq.has_index(k)) {
            let data = self.seq.index(k).ok()?;
            if data.norm.mid_f64() * s > 0.125 {
                break;
            }
            let img = data.matrix.mul_vec(a);
            let d = self.targets.dist_to_targets(k, &img).upper();
            let Some(y) = self
                .targets
                .points_near(k, &img, &d)
                .into_iter()
                .min_by(|p, q| norm2(&vsub(p, &img)).cmp(&norm2(&vsub(q, &img))))
            else {
                continue;
            };
            let step = data.matrix.min_norm_lstsq(&vsub(&y, &img));
            let d2 = norm2(&step);
            let goal = vadd(a, &step);
            if d2 <= r2 {
                finest = Some((k, goal.clone()));
            }
            if nearest.as_ref().map_or(true, |(b, _, _)| d2 < *b) {
                nearest = Some((d2, k, goal));
            }
        }
        finest.or(nearest.map(|(_, k, g)| (k, g)))
    }
}

impl Strategy for BobChase {
    fn name(&self) -> String {
        "chase".into()
    }

    fn propose(&mut self, ctx: &MoveContext<'_>) -> Result<Proposal, StrategyError> {
        let a = &ctx.current.center;
        let radius = &ctx.config.beta * &ctx.current.radius;
        let Some((k, goal)) = self.aim(a, &ctx.current.radius, &feasible_shift(ctx)) else {
            return Ok(Proposal::new(Ball { center: a.clone(), radius }));
        };
        let center = match &ctx.config.support.kind {
            SupportKind::Euclidean(_) => {
                let shift = feasible_shift(ctx);
                let d = vsub(&goal, a);
                let dd = norm2(&d);
                if dd <= &shift * &shift {
                    goal
                } else {
                    // shrink by 2⁻²⁰ and round to a dyadic grid 2⁻³⁰ below the
                    // shift, so denominators stay short over many rounds
                    let s = &shift / sqrt_bounds(&dd).1 * (Scalar::one() - ratio(1, 1 << 20));
                    let bits = (0.5 * (a.len() as f64).log2() - log2_abs(&shift)).ceil().max(0.0) as u32 + 31;
                    vadd(a, &vscale(&d, &s)).iter().map(|x| round_down_dyadic(x, bits)).collect()
                }
            }
            SupportKind::Ifs(_) => {
                let cands = ctx.config.support.candidate_centers(ctx.current, &ctx.config.beta).map_err(no_center)?;
                cands
                    .to_vec()
                    .into_iter()
                    .min_by(|p, q| norm2(&vsub(p, &goal)).cmp(&norm2(&vsub(q, &goal))))
                    .unwrap()
            }
        };
        Ok(Proposal::new(Ball { center, radius }).tag("chasing", k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_game, GameError, Player, Variant};
    use crate::linalg::QMatrix;
    use crate::strategies::CenteredAlice;
    use crate::supports::SupportModel;

    fn config(variant: Variant) -> GameConfig {
        GameConfig {
            alpha: ratio(1, 4),
            beta: ratio(1, 2),
            variant,
            support: SupportModel::euclidean(1),
            initial_ball: Ball::new(vec![ratio(1, 10)], ratio(1, 40)).unwrap(),
            max_rounds: 6,
        }
    }

    #[test]
    fn maximal_is_illegal_in_classic() {
        let err = run_game(&config(Variant::Classic), &mut CenteredAlice, &mut BobMaximal, 0).unwrap_err();
        assert!(matches!(err, GameError::InvalidMove { player: Player::Bob, .. }));
    }

    #[test]
    fn random_is_reproducible() {
        let cfg = config(Variant::Classic);
        let a = run_game(&cfg, &mut CenteredAlice, &mut BobRandom::new(0), 11).unwrap();
        let b = run_game(&cfg, &mut CenteredAlice, &mut BobRandom::new(5), 11).unwrap();
        assert_eq!(a.moves, b.moves);
        let c = run_game(&cfg, &mut CenteredAlice, &mut BobRandom::new(0), 12).unwrap();
        assert_ne!(a.moves, c.moves);
    }

    #[test]
    fn chase_drifts_toward_preimage() {
        let cfg = config(Variant::Classic);
        let seq = Arc::new(MatrixSequence::powers(QMatrix::scalar(int(3))).unwrap());
        let z = Arc::new(TargetFamily::constant_lattice(vec![ratio(1, 2)]));
        let mut bob = BobChase::new(seq.clone(), z.clone(), 30);
        let t = run_game(&cfg, &mut CenteredAlice, &mut bob, 0).unwrap();
        let dist = |k: usize, x: &Vector| z.dist_to_targets(k, &seq.matrix(k).unwrap().mul_vec(x)).to_f64();
        let mut chased = 0;
        for w in t.moves.windows(2) {
            if let Some(k) = w[1].tags.get("chasing") {
                let k: usize = k.parse().unwrap();
                assert!(dist(k, &w[1].ball.center) <= dist(k, &w[0].ball.center));
                chased += 1;
            }
        }
        assert!(chased > 0);
    }
}
