//! Run configuration: a TOML document per run, exact numbers as "p/q" strings.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::badapprox::{bad_reduction, best_approx_sequence, rational_rank_check, AffineSystem, RealEntry};
use crate::engine::{GameConfig, Variant};
use crate::geometry::Ball;
use crate::linalg::{QMatrix, Vector};
use crate::matseq::{analyze_lacunarity, MatrixSequence};
use crate::numeric::{fmt_scalar, int, parse_scalar, pow, ratio, Bound, Scalar};
use crate::poly::Poly;
use crate::strategies::{schedule_params, IntersectStrategies, ScheduleParams, StrongWrapper};
use crate::supports::{DecayParams, Ifs, Similarity, SupportModel};
use crate::targets::TargetFamily;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Invalid(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
}

fn invalid(e: impl ToString) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Certified,
    Greedy,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BobKind {
    #[default]
    Chase,
    Random,
    Maximal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub alpha: String,
    pub beta: String,
    #[serde(default = "classic")]
    pub variant: Variant,
    pub center: Vec<String>,
    /// Initial radius ρ; chosen as the largest 2⁻ʲ the schedule accepts if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<String>,
    /// Alice moves; derived from the schedule if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
}

fn classic() -> Variant {
    Variant::Classic
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    #[serde(rename = "C")]
    pub c: String,
    pub gamma: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    pub ratio: String,
    pub translation: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportKindSection {
    #[default]
    Euclidean,
    Cantor,
    Sierpinski,
    Ifs,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportSection {
    #[serde(default)]
    pub kind: SupportKindSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub maps: Vec<MapSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecaySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution_depth: Option<u32>,
}

/// A real entry: "p/q", or a polynomial (constant term first) with an
/// interval isolating one root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RealSection {
    Rational(String),
    Algebraic { poly: Vec<String>, interval: [String; 2] },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SequenceSection {
    Powers {
        matrix: Vec<Vec<String>>,
    },
    Explicit {
        matrices: Vec<Vec<Vec<String>>>,
    },
    Rows {
        rows: Vec<Vec<String>>,
    },
    Badapprox {
        a: Vec<Vec<RealSection>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        thin: Option<String>,
        /// q-range of the direct margin check on the final ball.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        margin_q: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TargetSection {
    /// y + ℤᵐ for every k, or y_k + ℤᵐ with the last repeating.
    Lattice {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        base: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        bases: Vec<Vec<String>>,
    },
    Explicit {
        points: Vec<Vec<Vec<String>>>,
        delta: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceSection>,
    pub targets: TargetSection,
}

fn default_horizon() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AliceSection {
    #[serde(default)]
    pub mode: Mode,
    /// Wrap the classic strategy for the strong game.
    #[serde(default)]
    pub strong: bool,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
}

impl Default for AliceSection {
    fn default() -> Self {
        AliceSection { mode: Mode::Certified, strong: false, horizon: default_horizon() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BobSection {
    #[serde(default)]
    pub kind: BobKind,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
}

impl Default for BobSection {
    fn default() -> Self {
        BobSection { kind: BobKind::Chase, horizon: default_horizon() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    pub game: GameSection,
    #[serde(default)]
    pub support: SupportSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<TargetSection>,
    /// Two or more families played round-robin.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub family: Vec<FamilySection>,
    #[serde(default)]
    pub alice: AliceSection,
    #[serde(default)]
    pub bob: BobSection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    pub runs: Vec<RunConfig>,
}

/// A file holds one run, or a batch under `[[runs]]`.
pub fn parse_runs(text: &str) -> Result<Vec<RunConfig>, ConfigError> {
    let value: toml::Table = text.parse().map_err(invalid)?;
    if value.contains_key("runs") {
        let b: BatchConfig = toml::from_str(text).map_err(invalid)?;
        Ok(b.runs)
    } else {
        Ok(vec![toml::from_str(text).map_err(invalid)?])
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(invalid)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn scalar(s: &str) -> Result<Scalar, ConfigError> {
    parse_scalar(s).map_err(|e| invalid(format!("bad number {:?}", e.0)))
}

fn vector(v: &[String]) -> Result<Vector, ConfigError> {
    v.iter().map(|s| scalar(s)).collect()
}

fn matrix(rows: &[Vec<String>]) -> Result<QMatrix, ConfigError> {
    let rows: Vec<Vector> = rows.iter().map(|r| vector(r)).collect::<Result<_, _>>()?;
    let cols = rows.first().map_or(0, |r| r.len());
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(invalid("matrix rows must be nonempty and of equal length"));
    }
    Ok(QMatrix::from_rows(rows))
}

fn real(r: &RealSection) -> Result<RealEntry, ConfigError> {
    match r {
        RealSection::Rational(s) => Ok(RealEntry::rational(scalar(s)?)),
        RealSection::Algebraic { poly, interval } => {
            let p = Poly::new(vector(poly)?);
            RealEntry::algebraic(p, scalar(&interval[0])?, scalar(&interval[1])?).map_err(invalid)
        }
    }
}

pub fn affine_system(a: &[Vec<RealSection>]) -> Result<AffineSystem, ConfigError> {
    let n = a.len();
    let m = a.first().map_or(0, |r| r.len());
    if a.iter().any(|r| r.len() != m) {
        return Err(invalid("A rows must have equal length"));
    }
    let entries = a.iter().flatten().map(real).collect::<Result<Vec<_>, _>>()?;
    AffineSystem::new(n, m, entries).map_err(invalid)
}

/// Thinning ratio for best-approximation sequences.
pub const DEFAULT_THIN: i64 = 3;
const DEFAULT_BEST_COUNT: usize = 12;
pub const DEFAULT_MARGIN_Q: u64 = 10_000;

/// A sequence, plus the affine form it was derived from.
pub fn build_sequence(s: &SequenceSection) -> Result<(MatrixSequence, Option<AffineSystem>), ConfigError> {
    match s {
        SequenceSection::Powers { matrix: m } => Ok((MatrixSequence::powers(matrix(m)?).map_err(invalid)?, None)),
        SequenceSection::Explicit { matrices } => {
            let list = matrices.iter().map(|m| matrix(m)).collect::<Result<Vec<_>, _>>()?;
            Ok((MatrixSequence::explicit(list).map_err(invalid)?, None))
        }
        SequenceSection::Rows { rows } => {
            let rows = rows.iter().map(|r| vector(r)).collect::<Result<Vec<_>, _>>()?;
            Ok((MatrixSequence::row_vectors(rows).map_err(invalid)?, None))
        }
        SequenceSection::Badapprox { a, count, thin, .. } => {
            let a = affine_system(a)?;
            if let Some(u) = rational_rank_check(&a, 1000) {
                return Err(ConfigError::Infeasible(format!(
                    "A has a rational relation u = {u:?}; Bad_A is the complement of {{u·x ∈ ℤ}} and needs no game"
                )));
            }
            let thin = thin.as_deref().map(scalar).transpose()?.unwrap_or_else(|| int(DEFAULT_THIN));
            let seq = best_approx_sequence(&a, count.unwrap_or(DEFAULT_BEST_COUNT), &thin).map_err(invalid)?;
            let (m, _) = bad_reduction(&seq).map_err(invalid)?;
            Ok((m, Some(a)))
        }
    }
}

pub fn build_targets(t: &TargetSection) -> Result<TargetFamily, ConfigError> {
    match t {
        TargetSection::Lattice { base, bases } => {
            let pts = match (base.is_empty(), bases.is_empty()) {
                (false, true) => vec![vector(base)?],
                (true, false) => bases.iter().map(|b| vector(b)).collect::<Result<_, _>>()?,
                _ => return Err(invalid("lattice targets need exactly one of `base` or `bases`")),
            };
            TargetFamily::lattice(pts).map_err(invalid)
        }
        TargetSection::Explicit { points, delta } => {
            let sets = points
                .iter()
                .map(|s| s.iter().map(|p| vector(p)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()?;
            TargetFamily::explicit(sets, scalar(delta)?).map_err(invalid)
        }
    }
}

pub fn build_support(s: &SupportSection, dim: usize) -> Result<SupportModel, ConfigError> {
    let decay = |default_rho0: Option<Scalar>| -> Result<Option<DecayParams>, ConfigError> {
        let Some(d) = &s.decay else { return Ok(None) };
        let rho0 = match (&d.rho0, default_rho0) {
            (Some(r), _) => Bound::Finite(scalar(r)?),
            (None, Some(r)) => Bound::Finite(r),
            (None, None) => Bound::Infinite,
        };
        Ok(Some(DecayParams::new(scalar(&d.c)?, scalar(&d.gamma)?, rho0).map_err(invalid)?))
    };
    let ifs = match s.kind {
        SupportKindSection::Euclidean => {
            let mut k = SupportModel::euclidean(dim);
            if let Some(d) = decay(None)? {
                k.decay = d;
            }
            return Ok(k);
        }
        SupportKindSection::Cantor => Ifs::cantor(),
        SupportKindSection::Sierpinski => Ifs::sierpinski(),
        SupportKindSection::Ifs => {
            let maps = s
                .maps
                .iter()
                .map(|m| Ok(Similarity { ratio: scalar(&m.ratio)?, translation: vector(&m.translation)? }))
                .collect::<Result<Vec<_>, ConfigError>>()?;
            Ifs::new(maps).map_err(invalid)?
        }
    };
    let d = decay(Some(SupportModel::ifs_default_rho0(&ifs)))?
        .ok_or_else(|| invalid("fractal supports need [support.decay] constants (see estimate-decay)"))?;
    SupportModel::ifs(ifs, d, s.resolution_depth.unwrap_or(1)).map_err(invalid)
}

/// One avoidance problem: Alice keeps M_k x away from Z_k.
#[derive(Debug, Clone)]
pub struct Problem {
    pub seq: Arc<MatrixSequence>,
    pub targets: Arc<TargetFamily>,
    pub affine: Option<AffineSystem>,
    /// Schedule of the (sub)game this problem is played in; certified mode only.
    pub params: Option<ScheduleParams>,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub run: RunConfig,
    pub game: GameConfig,
    pub problems: Vec<Problem>,
    pub mode: Mode,
    pub strong: bool,
    pub bob: BobKind,
    pub seed: u64,
    pub epochs: usize,
    /// Inner (virtual) rounds each problem's strategy plays.
    pub virtual_rounds: usize,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub epochs: Option<usize>,
    pub horizon: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, run: &mut RunConfig) {
        if let Some(s) = self.seed {
            run.seed = Some(s);
        }
        if let Some(m) = self.mode {
            run.alice.mode = m;
        }
        if let Some(e) = self.epochs {
            run.epochs = Some(e);
        }
        if let Some(h) = self.horizon {
            run.alice.horizon = h;
            run.bob.horizon = h;
        }
    }
}

const DEFAULT_GREEDY_ROUNDS: usize = 16;
const LACUNARITY_HORIZON: usize = 60;

/// Lacunarity constant Q of a sequence usable by the certified schedule.
fn certified_q(seq: &MatrixSequence) -> Result<Scalar, ConfigError> {
    let rep = analyze_lacunarity(seq, LACUNARITY_HORIZON).map_err(invalid)?;
    match (&rep.q, rep.decomposition) {
        (Some(q), Some((1, 1))) if rep.lacunary() => Ok(q.clone()),
        (Some(_), Some((l, n0))) if rep.lacunary() => Err(ConfigError::Infeasible(format!(
            "sequence is lacunary only along {l} residue classes from index {n0}; pass a lacunary subsequence"
        ))),
        _ => Err(ConfigError::Infeasible("sequence is not certified lacunary".into())),
    }
}

fn sub_schedules(
    alpha: &Scalar,
    beta: &Scalar,
    rho: &Scalar,
    support: &SupportModel,
    problems: &[(MatrixSequence, TargetFamily, Scalar)],
) -> Result<Vec<ScheduleParams>, ConfigError> {
    let s = problems.len();
    let beta_i = IntersectStrategies::sub_beta(alpha, beta, s);
    problems
        .iter()
        .enumerate()
        .map(|(i, (_, t, q))| {
            // sub i first sees Bob's ball of round i + 1
            let rho_i = rho * pow(&(alpha * beta), i as i64);
            schedule_params(alpha, &beta_i, q, &support.decay, t.delta(), &rho_i)
                .map_err(|e| ConfigError::Infeasible(e.to_string()))
        })
        .collect()
}

pub fn prepare(run: &RunConfig, over: &Overrides) -> Result<Prepared, ConfigError> {
    let mut run = run.clone();
    over.apply(&mut run);
    let alpha = scalar(&run.game.alpha)?;
    let beta = scalar(&run.game.beta)?;
    let center = vector(&run.game.center)?;
    let support = build_support(&run.support, center.len())?;
    if support.dim() != center.len() {
        return Err(invalid("center dimension does not match the support"));
    }
    let epochs = run.epochs.unwrap_or(1).max(1);
    let mode = run.alice.mode;
    let strong = run.alice.strong;

    let families: Vec<FamilySection> = if run.family.is_empty() {
        let t = match (&run.targets, &run.sequence) {
            (Some(t), _) => t.clone(),
            (None, Some(SequenceSection::Badapprox { .. })) => TargetSection::Lattice { base: vec!["0".into()], bases: vec![] },
            _ => return Err(invalid("missing [targets]")),
        };
        vec![FamilySection { sequence: None, targets: t }]
    } else {
        run.family.clone()
    };
    if families.len() > 1 && (mode == Mode::Greedy || strong) {
        return Err(invalid("intersection runs support classic certified play only"));
    }
    let mut built = Vec::new();
    for f in &families {
        let s = f.sequence.as_ref().or(run.sequence.as_ref()).ok_or_else(|| invalid("missing [sequence]"))?;
        let (seq, affine) = build_sequence(s)?;
        let targets = build_targets(&f.targets)?;
        if seq.dim_in() != center.len() || seq.dim_out() != targets.dim() {
            return Err(invalid(format!(
                "dimensions: sequence maps ℝ^{} → ℝ^{}, center in ℝ^{}, targets in ℝ^{}",
                seq.dim_in(),
                seq.dim_out(),
                center.len(),
                targets.dim()
            )));
        }
        built.push((seq, targets, affine));
    }

    let mut params = None;
    let rho = match (&run.game.radius, mode) {
        (Some(r), _) => scalar(r)?,
        (None, Mode::Greedy) => ratio(1, 8),
        (None, Mode::Certified) => {
            // largest 2⁻ʲ the schedule accepts
            let qs = built.iter().map(|(s, _, _)| certified_q(s)).collect::<Result<Vec<_>, _>>()?;
            let probs: Vec<_> = built.iter().zip(&qs).map(|((s, t, _), q)| (s.clone(), t.clone(), q.clone())).collect();
            let mut found = None;
            for j in 1..200 {
                let r = pow(&ratio(1, 2), j);
                if let Ok(p) = sub_schedules(&alpha, &beta, &r, &support, &probs) {
                    found = Some((r, p));
                    break;
                }
            }
            let (r, p) = found.ok_or_else(|| ConfigError::Infeasible("no admissible initial radius".into()))?;
            params = Some(p);
            r
        }
    };
    if mode == Mode::Certified && params.is_none() {
        let qs = built.iter().map(|(s, _, _)| certified_q(s)).collect::<Result<Vec<_>, _>>()?;
        let probs: Vec<_> = built.iter().zip(&qs).map(|((s, t, _), q)| (s.clone(), t.clone(), q.clone())).collect();
        params = Some(sub_schedules(&alpha, &beta, &rho, &support, &probs)?);
    }

    let game = GameConfig {
        alpha: alpha.clone(),
        beta: beta.clone(),
        variant: run.game.variant,
        support,
        initial_ball: Ball::new(center, rho).map_err(invalid)?,
        max_rounds: 1,
    };
    game.check().map_err(|e| ConfigError::Infeasible(e.to_string()))?;

    let s = built.len();
    let virtual_rounds = match &params {
        Some(ps) => ps.iter().map(|p| p.rounds_for_epochs(epochs)).max().unwrap_or(1),
        None => run.game.rounds.unwrap_or(DEFAULT_GREEDY_ROUNDS),
    };
    let bob = run.bob.kind;
    let derived = if strong && run.game.variant == Variant::Strong {
        StrongWrapper::rounds_against_maximal(&alpha, &beta, virtual_rounds)
    } else {
        s * virtual_rounds
    };
    let max_rounds = run.game.rounds.unwrap_or(derived);
    let problems = built
        .into_iter()
        .enumerate()
        .map(|(i, (seq, targets, affine))| Problem {
            seq: Arc::new(seq),
            targets: Arc::new(targets),
            affine,
            params: params.as_ref().map(|p| p[i].clone()),
            label: if s > 1 { format!("f{i}.") } else { String::new() },
        })
        .collect();
    let seed = run.seed.unwrap_or(0);
    Ok(Prepared { game: GameConfig { max_rounds, ..game }, problems, mode, strong, bob, seed, epochs, virtual_rounds, run })
}

impl Prepared {
    /// Smallest schedule constant c over the problems (certified mode).
    pub fn c_theory(&self) -> Option<Scalar> {
        self.problems.iter().filter_map(|p| p.params.as_ref().map(|q| q.c.clone())).min()
    }

    pub fn describe(&self) -> String {
        let mut out = Vec::new();
        for (i, p) in self.problems.iter().enumerate() {
            if let Some(s) = &p.params {
                out.push(format!(
                    "family {i}: Q = {}, eps = {}, N = {}, r = {}, rho = {}, c = {}",
                    fmt_scalar(&s.q),
                    fmt_scalar(&s.epsilon),
                    s.n,
                    s.r,
                    fmt_scalar(&s.rho),
                    fmt_scalar(&s.c)
                ));
            }
        }
        out.join("\n")
    }
}
