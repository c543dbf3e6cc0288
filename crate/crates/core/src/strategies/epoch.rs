//! The epoch schedule: slabs around preimages of targets, escaped r at a time.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::{avoidance_move_with, single_escape, ScheduleParams};
use crate::engine::{Certificate, MoveContext, Proposal, Strategy, StrategyError};
use crate::geometry::{slab_ball_distance, slab_disjoint_certificate, Ball, SlabConstraint};
use crate::linalg::{dot, norm2, vsub, Vector};
use crate::matseq::{IndexData, MatrixSequence};
use crate::numeric::{big, denom_lcm, fmt_scalar, gcd_all, sqrt_bounds, Scalar};
use crate::targets::TargetFamily;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochConstraint {
    pub k: usize,
    pub y: Vector,
    pub slab: SlabConstraint,
}

impl EpochConstraint {
    fn id(&self) -> String {
        let y: Vec<String> = self.y.iter().map(fmt_scalar).collect();
        format!("k={};y=({})", self.k, y.join(","))
    }
}

fn primitive(v: &[Scalar]) -> Vector {
    let l = big(denom_lcm(v.iter()));
    let scaled: Vec<Scalar> = v.iter().map(|x| x * &l).collect();
    let nums: Vec<BigInt> = scaled.iter().map(|x| x.numer().clone()).collect();
    let g = gcd_all(nums.iter());
    if g.is_zero() {
        return scaled;
    }
    let g = big(g);
    scaled.iter().map(|x| x / &g).collect()
}

/// A slab containing M_k⁻¹(B(y, c)), or None when that preimage is empty.
///
/// With g = MᵀMṽ and x* the least-squares preimage of y, every x with
/// ‖M_k x − y‖ ≤ c has |g·(x − x*)| ≤ c‖Mṽ‖, so the halfwidth
/// c‖Mṽ‖/‖g‖ (≈ c/t_k) is exact up to a final square-root rounding.
pub fn make_slab(data: &IndexData, y: &[Scalar], c: &Scalar) -> Option<SlabConstraint> {
    let m = &data.matrix;
    let xs = m.min_norm_lstsq(y);
    let res = norm2(&vsub(&m.mul_vec(&xs), y));
    if res > c * c {
        return None;
    }
    let mv = m.mul_vec(&data.direction);
    let g = m.transpose().mul_vec(&mv);
    let gg = norm2(&g);
    if gg.is_zero() {
        return None;
    }
    let h2 = c * c * norm2(&mv) / gg;
    let h = if h2.is_zero() { Scalar::zero() } else { sqrt_bounds(&h2).1 };
    let normal = primitive(&g);
    let offset = dot(&normal, &xs);
    SlabConstraint::new(normal, offset, h).ok()
}

/// Constraints of one index k that can meet `ball`, within reach c + t_k·ρ.
fn index_constraints(
    data: &IndexData,
    k: usize,
    ball: &Ball,
    targets: &TargetFamily,
    c: &Scalar,
    allow_many: bool,
) -> Result<Vec<EpochConstraint>, StrategyError> {
    let img = data.matrix.mul_vec(&ball.center);
    let reach = c + &data.norm.hi * &ball.radius;
    let ys = targets.points_near(k, &img, &reach);
    if ys.len() > 1 && !allow_many {
        return Err(StrategyError::MoreThanOneTarget(k));
    }
    Ok(ys
        .into_iter()
        .filter_map(|y| make_slab(data, &y, c).map(|slab| EpochConstraint { k, y, slab }))
        .collect())
}

fn seq_err(e: crate::matseq::MatSeqError) -> StrategyError {
    StrategyError::Infeasible(e.to_string())
}

/// Slabs for all k with (αβ)^{−r(j−1)} ≤ t_k < (αβ)^{−rj} whose target
/// preimage can meet the Bob ball at the start of epoch j.
pub fn epoch_constraints(
    ball: &Ball,
    seq: &MatrixSequence,
    targets: &TargetFamily,
    params: &ScheduleParams,
    j: usize,
) -> Result<Vec<EpochConstraint>, StrategyError> {
    let lower = params.window_upper(j - 1);
    let upper = params.window_upper(j);
    let mut out = Vec::new();
    let mut window = 0;
    let mut k = 1;
    while seq.has_index(k) {
        let data = seq.index(k).map_err(seq_err)?;
        if data.norm.lo >= upper {
            break;
        }
        if data.norm.hi >= lower {
            window += 1;
            out.extend(index_constraints(&data, k, ball, targets, &params.c, false)?);
        }
        k += 1;
    }
    if window > params.n {
        return Err(StrategyError::CertificateFailure(format!(
            "epoch {j} window holds {window} indices, more than N = {}",
            params.n
        )));
    }
    Ok(out)
}

/// Largest k with certified t_k < (αβ)^{−r·epochs}.
pub fn certified_k_max(seq: &MatrixSequence, params: &ScheduleParams, epochs: usize) -> usize {
    let upper = params.window_upper(epochs);
    let mut best = 0;
    let mut k = 1;
    while seq.has_index(k) {
        let Ok(t) = seq.norm(k) else { break };
        if t.lo >= upper {
            break;
        }
        if t.hi < upper {
            best = k;
        }
        k += 1;
    }
    best
}

const PRESTAGE_LIMIT: usize = 4096;

struct Epoch {
    j: usize,
    constraints: Vec<EpochConstraint>,
    pending: Vec<usize>,
}

/// Alice following the epoch schedule in certified mode.
pub struct EpochAlice {
    params: ScheduleParams,
    seq: Arc<MatrixSequence>,
    targets: Arc<TargetFamily>,
    prestage: Vec<EpochConstraint>,
    epoch: Option<Epoch>,
    certificates: Vec<Certificate>,
    label: String,
}

impl EpochAlice {
    pub fn new(params: ScheduleParams, seq: Arc<MatrixSequence>, targets: Arc<TargetFamily>) -> Self {
        EpochAlice {
            params,
            seq,
            targets,
            prestage: Vec::new(),
            epoch: None,
            certificates: Vec::new(),
            label: String::new(),
        }
    }

    /// Prefix for certificate ids, to tell instances apart in combinators.
    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    /// Hyperplanes M_k⁻¹(y) with t_k < 1 meeting the initial ball.
    fn compute_prestage(&mut self, ball: &Ball) -> Result<(), StrategyError> {
        let mut k = 1;
        while self.seq.has_index(k) {
            let data = self.seq.index(k).map_err(seq_err)?;
            if data.norm.lo >= Scalar::one() {
                break;
            }
            if k > PRESTAGE_LIMIT {
                return Err(StrategyError::Infeasible("operator norms stay below 1".into()));
            }
            self.prestage.extend(index_constraints(&data, k, ball, &self.targets, &Scalar::zero(), true)?);
            k += 1;
        }
        Ok(())
    }

    fn certify(&mut self, alice: &Ball, tag: &str, list: &[EpochConstraint]) -> Result<(), StrategyError> {
        for c in list {
            if !slab_disjoint_certificate(alice, &c.slab, &Scalar::zero()) {
                return Err(StrategyError::CertificateFailure(format!(
                    "{tag}: ball ({}, {}) meets slab {} (normal {:?}, offset {}, halfwidth {})",
                    alice.center.iter().map(fmt_scalar).collect::<Vec<_>>().join(","),
                    fmt_scalar(&alice.radius),
                    c.id(),
                    c.slab.normal.iter().map(fmt_scalar).collect::<Vec<_>>(),
                    fmt_scalar(&c.slab.offset),
                    fmt_scalar(&c.slab.halfwidth)
                )));
            }
            let margin = slab_ball_distance(alice, &c.slab).unwrap_or_default();
            self.certificates.push(Certificate { id: format!("{}{tag}:{}", self.label, c.id()), margin });
        }
        Ok(())
    }
}

impl Strategy for EpochAlice {
    fn name(&self) -> String {
        "epoch".into()
    }

    fn propose(&mut self, ctx: &MoveContext<'_>) -> Result<Proposal, StrategyError> {
        let p = self.params.clone();
        let p = &p;
        let i = ctx.round;
        if ctx.config.alpha != p.alpha || ctx.config.beta != p.beta {
            return Err(StrategyError::Desync("game parameters differ from the schedule".into()));
        }
        if ctx.current.radius != p.bob_radius(i) {
            return Err(StrategyError::Desync(format!(
                "round {i}: Bob radius {} differs from rho(alpha*beta)^(i-1)",
                fmt_scalar(&ctx.current.radius)
            )));
        }
        let support = &ctx.config.support;
        let alpha = p.alpha.clone();
        let radius = &alpha * &ctx.current.radius;
        let r = p.r;
        if i == 1 {
            self.compute_prestage(ctx.current)?;
        }
        if i < r {
            let mut center = ctx.current.center.clone();
            if let Some(first) = self.prestage.first() {
                center = single_escape(support, ctx.current, &first.slab, &alpha)?;
            }
            let alice = Ball { center, radius };
            let (done, left): (Vec<_>, Vec<_>) = std::mem::take(&mut self.prestage)
                .into_iter()
                .partition(|c| slab_disjoint_certificate(&alice, &c.slab, &Scalar::zero()));
            self.prestage = left;
            self.certify(&alice, "pre", &done)?;
            return Ok(Proposal::new(alice).tag("phase", "prestage").tag("pending", self.prestage.len()));
        }
        let j = i / r;
        if i % r == 0 {
            let mut constraints = epoch_constraints(ctx.current, &self.seq, &self.targets, p, j)?;
            constraints.append(&mut self.prestage);
            let pending = (0..constraints.len()).collect();
            self.epoch = Some(Epoch { j, constraints, pending });
        }
        let ep = self.epoch.as_mut().ok_or_else(|| StrategyError::Desync("epoch not started".into()))?;
        debug_assert_eq!(ep.j, j);
        let slabs: Vec<SlabConstraint> =
            ep.pending.iter().map(|&q| ep.constraints[q].slab.with_halfwidth(Scalar::zero())).collect();
        let eps = p.epsilon.clone();
        let av = avoidance_move_with(support, ctx.current, &slabs, &alpha, &eps)?;
        let alice = Ball { center: av.center, radius };
        let before = ep.pending.len();
        ep.pending.retain(|&q| !slab_disjoint_certificate(&alice, &ep.constraints[q].slab, &Scalar::zero()));
        let mut prop = Proposal::new(alice.clone())
            .tag("phase", "epoch")
            .tag("epoch", j)
            .tag("constraints", ep.constraints.len())
            .tag("avoided", before - ep.pending.len())
            .tag("pending", ep.pending.len());
        if i % r == r - 1 {
            let ep = self.epoch.take().unwrap();
            self.certify(&alice, &format!("e{}", ep.j), &ep.constraints)?;
            prop = prop.tag("certified", ep.constraints.len());
        }
        Ok(prop)
    }

    fn certificates(&self) -> Vec<Certificate> {
        self.certificates.clone()
    }
}
