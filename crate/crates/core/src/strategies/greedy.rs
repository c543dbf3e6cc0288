//! Exploration mode: maximize the realized clearance, no schedule.

use std::sync::Arc;

use crate::engine::{MoveContext, Proposal, Strategy, StrategyError};
use crate::geometry::Ball;
use crate::matseq::MatrixSequence;
use crate::numeric::to_f64;
use crate::targets::TargetFamily;

/// Picks the candidate maximizing min_k d(M_k x, Z_k) over the indices
/// resolvable at the current scale (t_k·αρ ≤ 1). Floating-point scoring;
/// carries no guarantee.
pub struct GreedyAlice {
    seq: Arc<MatrixSequence>,
    targets: Arc<TargetFamily>,
    horizon: usize,
}

impl GreedyAlice {
    pub fn new(seq: Arc<MatrixSequence>, targets: Arc<TargetFamily>, horizon: usize) -> Self {
        GreedyAlice { seq, targets, horizon }
    }
}

const MAX_SCORED: usize = 4096;

impl Strategy for GreedyAlice {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn propose(&mut self, ctx: &MoveContext<'_>) -> Result<Proposal, StrategyError> {
        let alpha = &ctx.config.alpha;
        let radius = alpha * &ctx.current.radius;
        let scale = to_f64(&radius);
        let ks: Vec<_> = (1..=self.horizon)
            .take_while(|&k| self.seq.has_index(k))
            .filter_map(|k| self.seq.index(k).ok().map(|d| (k, d)))
            .take_while(|(_, d)| d.norm.mid_f64() * scale <= 1.0)
            .collect();
        let cands = ctx
            .config
            .support
            .candidate_centers(ctx.current, alpha)
            .map_err(|e| StrategyError::NoFeasibleCenter(e.to_string()))?;
        let stride = cands.len().div_ceil(MAX_SCORED).max(1);
        let mut best: Option<(f64, usize)> = None;
        for i in (0..cands.len()).step_by(stride) {
            let x = cands.point(i);
            let score = ks
                .iter()
                .map(|(k, d)| self.targets.dist_to_targets(*k, &d.matrix.mul_vec(&x)).to_f64() - d.norm.mid_f64() * scale)
                .fold(f64::INFINITY, f64::min);
            if best.map_or(true, |(b, _)| score > b) {
                best = Some((score, i));
            }
        }
        let (score, i) = best.ok_or_else(|| StrategyError::NoFeasibleCenter("no candidates".into()))?;
        Ok(Proposal::new(Ball { center: cands.point(i), radius }).tag("clearance", format!("{score:.3e}")))
    }
}
