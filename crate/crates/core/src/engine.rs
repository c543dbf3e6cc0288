//! The game referee: alternating moves, exact rule checks, transcripts.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{schmidt_leq, Ball};
use crate::matseq::MatrixSequence;
use crate::numeric::{Bound, Scalar};
use crate::supports::SupportModel;
use crate::targets::TargetFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Classic,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    Alice,
    Bob,
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::Alice => "alice",
            Player::Bob => "bob",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameConfig {
    pub alpha: Scalar,
    pub beta: Scalar,
    pub variant: Variant,
    pub support: SupportModel,
    pub initial_ball: Ball,
    /// Number of Alice moves; Bob answers each, so the final ball has
    /// radius ρ(αβ)^max_rounds in the classic game.
    pub max_rounds: usize,
}

impl GameConfig {
    pub fn check(&self) -> Result<(), GameError> {
        let unit = |v: &Scalar| v.is_positive() && *v < Scalar::from_integer(1.into());
        if !unit(&self.alpha) || !unit(&self.beta) {
            return Err(GameError::Config("alpha and beta must lie in (0, 1)".into()));
        }
        if self.initial_ball.dim() != self.support.dim() {
            return Err(GameError::Config("initial ball dimension differs from the support".into()));
        }
        if !self.support.contains(&self.initial_ball.center) {
            return Err(GameError::Config("initial ball center is not on the support".into()));
        }
        Ok(())
    }
}

/// One validated ball with free-form annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub round: usize,
    pub player: Player,
    #[serde(flatten)]
    pub ball: Ball,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tags: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub id: String,
    #[serde(with = "crate::numeric::serde_scalar")]
    pub margin: Scalar,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameTranscript {
    pub moves: Vec<Move>,
    pub final_enclosure: Ball,
    pub certificates: Vec<Certificate>,
}

impl GameTranscript {
    pub fn alice_moves(&self) -> impl Iterator<Item = &Move> {
        self.moves.iter().filter(|m| m.player == Player::Alice)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrategyError {
    #[error("no feasible center: {0}")]
    NoFeasibleCenter(String),
    #[error("more than one target point within reach for index {0}")]
    MoreThanOneTarget(usize),
    #[error("certificate failure: {0}")]
    CertificateFailure(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("strategy out of sync: {0}")]
    Desync(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("invalid move by {player} in round {round}: {reason}")]
    InvalidMove { player: Player, round: usize, reason: String },
    #[error("{player} failed in round {round}: {error}")]
    Strategy { player: Player, round: usize, error: StrategyError },
    #[error("configuration error: {0}")]
    Config(String),
}

/// What a strategy sees when asked to move.
pub struct MoveContext<'a> {
    pub config: &'a GameConfig,
    pub round: usize,
    pub player: Player,
    /// The ball to refine (the opponent's last move).
    pub current: &'a Ball,
    pub history: &'a [Move],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub ball: Ball,
    pub tags: BTreeMap<String, String>,
}

impl Proposal {
    pub fn new(ball: Ball) -> Self {
        Proposal { ball, tags: BTreeMap::new() }
    }

    pub fn tag(mut self, k: &str, v: impl ToString) -> Self {
        self.tags.insert(k.to_string(), v.to_string());
        self
    }
}

pub trait Strategy {
    fn name(&self) -> String;

    /// Called once before play with the game configuration and seed.
    fn start(&mut self, _config: &GameConfig, _seed: u64) -> Result<(), StrategyError> {
        Ok(())
    }

    fn propose(&mut self, ctx: &MoveContext<'_>) -> Result<Proposal, StrategyError>;

    /// Margin certificates accumulated during play.
    fn certificates(&self) -> Vec<Certificate> {
        Vec::new()
    }
}

/// Checks one move against the ball it refines; returns the reason on failure.
pub fn check_move(config: &GameConfig, player: Player, prev: &Ball, next: &Ball) -> Result<(), String> {
    if next.dim() != prev.dim() {
        return Err("dimension mismatch".into());
    }
    if !next.radius.is_positive() {
        return Err("radius must be positive".into());
    }
    let factor = match player {
        Player::Alice => &config.alpha,
        Player::Bob => &config.beta,
    };
    let rule = factor * &prev.radius;
    match config.variant {
        Variant::Classic if next.radius != rule => {
            return Err(format!("radius must equal {} times the previous radius", crate::numeric::fmt_scalar(factor)))
        }
        Variant::Strong if next.radius < rule => {
            return Err(format!("radius must be at least {} times the previous radius", crate::numeric::fmt_scalar(factor)))
        }
        _ => {}
    }
    if !schmidt_leq(next, prev).unwrap_or(false) {
        return Err("ball is not nested in the previous ball".into());
    }
    if !config.support.contains(&next.center) {
        return Err("center is not on the support".into());
    }
    Ok(())
}

/// Outcome of a game: the (possibly partial) transcript and the error
/// that stopped it, if any.
#[derive(Debug, Clone)]
pub struct GameOutcome {
    pub transcript: GameTranscript,
    pub error: Option<GameError>,
}

pub fn run_game(
    config: &GameConfig,
    alice: &mut dyn Strategy,
    bob: &mut dyn Strategy,
    seed: u64,
) -> Result<GameTranscript, GameError> {
    let out = run_game_with_sink(config, alice, bob, seed, &mut |_| {});
    match out.error {
        None => Ok(out.transcript),
        Some(e) => Err(e),
    }
}

/// Plays the game, passing each accepted move to `sink` as it happens.
pub fn run_game_with_sink(
    config: &GameConfig,
    alice: &mut dyn Strategy,
    bob: &mut dyn Strategy,
    seed: u64,
    sink: &mut dyn FnMut(&Move),
) -> GameOutcome {
    let fail = |moves: Vec<Move>, e: GameError| {
        let last = moves.last().map(|m| m.ball.clone()).unwrap_or_else(|| config.initial_ball.clone());
        GameOutcome { transcript: GameTranscript { moves, final_enclosure: last, certificates: vec![] }, error: Some(e) }
    };
    if let Err(e) = config.check() {
        return fail(vec![], e);
    }
    if let Err(error) = alice.start(config, seed) {
        return fail(vec![], GameError::Strategy { player: Player::Alice, round: 0, error });
    }
    if let Err(error) = bob.start(config, seed ^ 0x9e37_79b9_7f4a_7c15) {
        return fail(vec![], GameError::Strategy { player: Player::Bob, round: 0, error });
    }
    let first = Move { round: 1, player: Player::Bob, ball: config.initial_ball.clone(), tags: BTreeMap::new() };
    sink(&first);
    let mut moves = vec![first];
    for round in 1..=config.max_rounds {
        for player in [Player::Alice, Player::Bob] {
            let current = moves.last().unwrap().ball.clone();
            let strat: &mut dyn Strategy = match player {
                Player::Alice => &mut *alice,
                Player::Bob => &mut *bob,
            };
            let ctx = MoveContext { config, round, player, current: &current, history: &moves };
            let proposal = match strat.propose(&ctx) {
                Ok(p) => p,
                Err(error) => return fail(moves, GameError::Strategy { player, round, error }),
            };
            if let Err(reason) = check_move(config, player, &current, &proposal.ball) {
                return fail(moves, GameError::InvalidMove { player, round, reason });
            }
            let mv = Move {
                round: if player == Player::Bob { round + 1 } else { round },
                player,
                ball: proposal.ball,
                tags: proposal.tags,
            };
            sink(&mv);
            moves.push(mv);
        }
    }
    let final_enclosure = moves.last().unwrap().ball.clone();
    let mut certificates = alice.certificates();
    certificates.extend(bob.certificates());
    GameOutcome { transcript: GameTranscript { moves, final_enclosure, certificates }, error: None }
}

/// Replays every rule check; Err carries the first bad round and reason.
pub fn validate_transcript_detailed(t: &GameTranscript, config: &GameConfig) -> Result<(), (usize, String)> {
    let first = t.moves.first().ok_or((0, "empty transcript".to_string()))?;
    if first.player != Player::Bob || first.ball != config.initial_ball || first.round != 1 {
        return Err((1, "first move must be the configured initial ball".into()));
    }
    let mut expect = Player::Alice;
    for w in t.moves.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        if next.player != expect {
            return Err((next.round, "players must alternate".into()));
        }
        let round = match next.player {
            Player::Alice => prev.round,
            Player::Bob => prev.round + 1,
        };
        if next.round != round {
            return Err((next.round, "round numbers out of sequence".into()));
        }
        check_move(config, next.player, &prev.ball, &next.ball).map_err(|r| (next.round, r))?;
        expect = match expect {
            Player::Alice => Player::Bob,
            Player::Bob => Player::Alice,
        };
    }
    if t.final_enclosure != t.moves.last().unwrap().ball {
        return Err((t.moves.last().unwrap().round, "final enclosure differs from the last ball".into()));
    }
    Ok(())
}

pub fn validate_transcript(t: &GameTranscript, config: &GameConfig) -> bool {
    validate_transcript_detailed(t, config).is_ok()
}

/// Certified lower bound, over 1 ≤ k ≤ k_max, of d(M_k x, Z_k) valid for
/// every x in `enclosure`: d(M_k·center, Z_k) − t_k·radius, clamped at 0.
pub fn limit_margin_of(enclosure: &Ball, seq: &MatrixSequence, targets: &TargetFamily, k_max: usize) -> Bound {
    let mut best = Bound::Infinite;
    for k in (1..=k_max).take_while(|&k| seq.has_index(k)) {
        let Ok(data) = seq.index(k) else { continue };
        let img = data.matrix.mul_vec(&enclosure.center);
        let d = targets.dist_to_targets(k, &img).lower();
        let mut m = d - &data.norm.hi * &enclosure.radius;
        if m.is_negative() {
            m = Scalar::zero();
        }
        best = best.min(Bound::Finite(m));
    }
    best
}

pub fn limit_margin(t: &GameTranscript, seq: &MatrixSequence, targets: &TargetFamily, k_max: usize) -> Bound {
    limit_margin_of(&t.final_enclosure, seq, targets, k_max)
}
