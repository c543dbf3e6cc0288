//! Strategy combinators: the strong-game adapter and round-robin intersection.

use std::collections::BTreeMap;

use crate::engine::{
    Certificate, GameConfig, GameTranscript, Move, MoveContext, Player, Proposal, Strategy, StrategyError, Variant,
};
use crate::geometry::Ball;
use crate::numeric::{fmt_scalar, pow, Scalar};

/// Keeps Bob's center and takes the exact classic radius.
#[derive(Debug, Default, Clone)]
pub struct CenteredAlice;

impl Strategy for CenteredAlice {
    fn name(&self) -> String {
        "centered".into()
    }

    fn propose(&mut self, ctx: &MoveContext<'_>) -> Result<Proposal, StrategyError> {
        let f = match ctx.player {
            Player::Alice => &ctx.config.alpha,
            Player::Bob => &ctx.config.beta,
        };
        Ok(Proposal::new(Ball { center: ctx.current.center.clone(), radius: f * &ctx.current.radius }))
    }
}

fn classic_view(config: &GameConfig, beta: Scalar, initial: Ball) -> GameConfig {
    GameConfig { beta, variant: Variant::Classic, initial_ball: initial, ..config.clone() }
}

/// The sub-game one strategy perceives.
struct View {
    config: GameConfig,
    moves: Vec<Move>,
}

impl View {
    fn transcript(&self) -> GameTranscript {
        GameTranscript {
            final_enclosure: self.moves.last().map(|m| m.ball.clone()).unwrap_or_else(|| self.config.initial_ball.clone()),
            moves: self.moves.clone(),
            certificates: Vec::new(),
        }
    }

    /// Records Bob's ball as virtual round `round`, asks `inner`, records the answer.
    fn consult(&mut self, inner: &mut dyn Strategy, round: usize, bob: &Ball) -> Result<Proposal, StrategyError> {
        self.moves.push(Move { round, player: Player::Bob, ball: bob.clone(), tags: BTreeMap::new() });
        let ctx = MoveContext { config: &self.config, round, player: Player::Alice, current: bob, history: &self.moves };
        let prop = inner.propose(&ctx)?;
        self.moves.push(Move { round, player: Player::Alice, ball: prop.ball.clone(), tags: prop.tags.clone() });
        Ok(prop)
    }
}

/// Plays a classic-game strategy in the strong game by inserting centered
/// dummy moves until Bob's radius reaches the next classic value.
pub struct StrongWrapper {
    inner: Box<dyn Strategy>,
    view: Option<View>,
    target: Scalar,
    vround: usize,
    limit: Option<usize>,
}

impl StrongWrapper {
    pub fn new(inner: Box<dyn Strategy>) -> Self {
        StrongWrapper { inner, view: None, target: Scalar::default(), vround: 0, limit: None }
    }

    /// Stops consulting the inner strategy after `virtual_rounds` moves and
    /// plays centered classic moves from then on.
    pub fn with_limit(mut self, virtual_rounds: usize) -> Self {
        self.limit = Some(virtual_rounds);
        self
    }

    pub fn virtual_rounds(&self) -> usize {
        self.vround
    }

    /// The classic game the inner strategy has seen so far.
    pub fn observed(&self) -> Option<(GameConfig, GameTranscript)> {
        self.view.as_ref().map(|v| (v.config.clone(), v.transcript()))
    }

    /// Real rounds a maximal-radius Bob needs for `virtual_rounds` inner moves.
    pub fn rounds_against_maximal(alpha: &Scalar, beta: &Scalar, virtual_rounds: usize) -> usize {
        let mut rounds = 0;
        let mut target = Scalar::from_integer(1.into());
        let mut bob = target.clone();
        let mut consulted = 0;
        while consulted < virtual_rounds {
            rounds += 1;
            let alice = if bob == target {
                consulted += 1;
                target = alpha * beta * &target;
                alpha * &bob
            } else {
                (alpha * &bob).max(target.clone())
            };
            bob = alice;
        }
        rounds
    }
}

impl Strategy for StrongWrapper {
    fn name(&self) -> String {
        format!("strong({})", self.inner.name())
    }

    fn start(&mut self, config: &GameConfig, seed: u64) -> Result<(), StrategyError> {
        let vc = classic_view(config, config.beta.clone(), config.initial_ball.clone());
        self.inner.start(&vc, seed)?;
        self.target = config.initial_ball.radius.clone();
        self.vround = 0;
        self.view = Some(View { config: vc, moves: Vec::new() });
        Ok(())
    }

    fn propose(&mut self, ctx: &MoveContext<'_>) -> Result<Proposal, StrategyError> {
        let view = self.view.as_mut().ok_or_else(|| StrategyError::Desync("wrapper not started".into()))?;
        let rb = &ctx.current.radius;
        if self.limit.is_some_and(|l| self.vround >= l) {
            let ball = Ball { center: ctx.current.center.clone(), radius: &ctx.config.alpha * rb };
            return Ok(Proposal::new(ball).tag("dummy", "true"));
        }
        if *rb == self.target {
            self.vround += 1;
            let prop = view.consult(self.inner.as_mut(), self.vround, ctx.current)?;
            self.target = &ctx.config.beta * &prop.ball.radius;
            return Ok(prop.tag("virtual_round", self.vround));
        }
        if *rb < self.target {
            return Err(StrategyError::Desync(format!(
                "Bob radius {} passed the next classic radius {}",
                fmt_scalar(rb),
                fmt_scalar(&self.target)
            )));
        }
        let radius = (&ctx.config.alpha * rb).max(self.target.clone());
        Ok(Proposal::new(Ball { center: ctx.current.center.clone(), radius }).tag("dummy", "true"))
    }

    fn certificates(&self) -> Vec<Certificate> {
        self.inner.certificates()
    }
}

/// Round-robin over s strategies; strategy i moves on rounds ≡ i+1 (mod s)
/// and sees an (α, β(αβ)^{s−1}) classic game.
pub struct IntersectStrategies {
    subs: Vec<Box<dyn Strategy>>,
    views: Vec<Option<View>>,
    seed: u64,
}

impl IntersectStrategies {
    pub fn new(subs: Vec<Box<dyn Strategy>>) -> Self {
        let views = subs.iter().map(|_| None).collect();
        IntersectStrategies { subs, views, seed: 0 }
    }

    /// β_i = β(αβ)^{s−1}.
    pub fn sub_beta(alpha: &Scalar, beta: &Scalar, s: usize) -> Scalar {
        beta * pow(&(alpha * beta), s as i64 - 1)
    }

    pub fn observed(&self, i: usize) -> Option<(GameConfig, GameTranscript)> {
        self.views.get(i)?.as_ref().map(|v| (v.config.clone(), v.transcript()))
    }
}

impl Strategy for IntersectStrategies {
    fn name(&self) -> String {
        let names: Vec<String> = self.subs.iter().map(|s| s.name()).collect();
        format!("intersect({})", names.join(","))
    }

    fn start(&mut self, _config: &GameConfig, seed: u64) -> Result<(), StrategyError> {
        if self.subs.is_empty() {
            return Err(StrategyError::Infeasible("no strategies to intersect".into()));
        }
        self.seed = seed;
        self.views.iter_mut().for_each(|v| *v = None);
        Ok(())
    }

    fn propose(&mut self, ctx: &MoveContext<'_>) -> Result<Proposal, StrategyError> {
        let s = self.subs.len();
        let i = (ctx.round - 1) % s;
        let vround = (ctx.round - 1) / s + 1;
        if self.views[i].is_none() {
            let beta = Self::sub_beta(&ctx.config.alpha, &ctx.config.beta, s);
            let vc = classic_view(ctx.config, beta, ctx.current.clone());
            self.subs[i].start(&vc, self.seed.wrapping_add(i as u64))?;
            self.views[i] = Some(View { config: vc, moves: Vec::new() });
        }
        let view = self.views[i].as_mut().unwrap();
        let prop = view.consult(self.subs[i].as_mut(), vround, ctx.current)?;
        Ok(prop.tag("sub", i).tag("virtual_round", vround))
    }

    fn certificates(&self) -> Vec<Certificate> {
        self.subs.iter().flat_map(|s| s.certificates()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_game, validate_transcript};
    use crate::numeric::{int, ratio};
    use crate::strategies::BobMaximal;
    use crate::supports::SupportModel;

    fn config(variant: Variant, rounds: usize) -> GameConfig {
        GameConfig {
            alpha: ratio(1, 4),
            beta: ratio(1, 2),
            variant,
            support: SupportModel::euclidean(1),
            initial_ball: Ball::new(vec![int(0)], int(1)).unwrap(),
            max_rounds: rounds,
        }
    }

    #[test]
    fn wrapper_is_transparent_in_classic() {
        let cfg = config(Variant::Classic, 6);
        let mut w = StrongWrapper::new(Box::new(CenteredAlice));
        let t = run_game(&cfg, &mut w, &mut CenteredAlice, 0).unwrap();
        assert!(t.alice_moves().all(|m| !m.tags.contains_key("dummy")));
        let (vc, vt) = w.observed().unwrap();
        assert_eq!(vt.moves.len(), 12);
        assert!(validate_transcript(&vt, &vc));
    }

    #[test]
    fn wrapper_interleaves_dummies_against_maximal_bob() {
        let cfg = config(Variant::Strong, 8);
        let mut w = StrongWrapper::new(Box::new(CenteredAlice));
        let t = run_game(&cfg, &mut w, &mut BobMaximal, 0).unwrap();
        assert!(validate_transcript(&t, &cfg));
        let dummies = t.alice_moves().filter(|m| m.tags.contains_key("dummy")).count();
        assert_eq!(dummies, 4);
        let (vc, vt) = w.observed().unwrap();
        assert!(validate_transcript(&vt, &vc));
        assert_eq!(StrongWrapper::rounds_against_maximal(&cfg.alpha, &cfg.beta, 4), 7);
        // final radius at least ρα^rounds
        assert!(t.final_enclosure.radius >= pow(&cfg.alpha, 8));
    }

    #[test]
    fn single_strategy_intersection_is_identity() {
        let cfg = config(Variant::Classic, 5);
        let plain = run_game(&cfg, &mut CenteredAlice, &mut CenteredAlice, 0).unwrap();
        let mut one = IntersectStrategies::new(vec![Box::new(CenteredAlice)]);
        let t = run_game(&cfg, &mut one, &mut CenteredAlice, 0).unwrap();
        assert_eq!(plain.final_enclosure, t.final_enclosure);
        let mut two = IntersectStrategies::new(vec![Box::new(CenteredAlice), Box::new(CenteredAlice)]);
        run_game(&cfg, &mut two, &mut CenteredAlice, 0).unwrap();
        for i in 0..2 {
            let (vc, vt) = two.observed(i).unwrap();
            assert_eq!(vc.beta, ratio(1, 16));
            assert!(validate_transcript(&vt, &vc));
        }
    }
}
