//! Play spaces: Euclidean space or the attractor of a self-similar IFS,
//! together with the decay constants (C, γ, ρ₀) that drive strategies.

mod estimate;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::geometry::Ball;
use crate::linalg::{norm2, vadd, vscale, vsub, zeros, Vector};
use crate::numeric::{from_f64, int, pow_rational_bounds, ratio, sqrt_bounds, to_f64, Bound, Scalar};

pub use estimate::{estimate_decay, pointwise_dim_lower, DecayEstimate};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SupportError {
    #[error("invalid IFS: {0}")]
    InvalidIfs(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("no candidate centers: ball does not meet the support at the working depth")]
    EmptyCandidates,
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerLaw {
    pub delta: Scalar,
    pub c1: Scalar,
    pub c2: Scalar,
}

/// Absolute decay μ(B ∩ L^(ε)) < C(ε/ρ)^γ μ(B) for ρ < ρ₀, plus optional
/// doubling and power-law data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecayParams {
    pub c: Scalar,
    pub gamma: Scalar,
    pub rho0: Bound,
    pub federer_d: Option<Scalar>,
    pub power_law: Option<PowerLaw>,
}

impl DecayParams {
    pub fn new(c: Scalar, gamma: Scalar, rho0: Bound) -> Result<Self, SupportError> {
        if !c.is_positive() || !gamma.is_positive() {
            return Err(SupportError::Parameter("C and gamma must be positive".into()));
        }
        if let Bound::Finite(r) = &rho0 {
            if !r.is_positive() {
                return Err(SupportError::Parameter("rho0 must be positive".into()));
            }
        }
        Ok(DecayParams { c, gamma, rho0, federer_d: None, power_law: None })
    }

    /// Constants for Lebesgue measure on ℝⁿ: the slab through the center
    /// is worst, giving C = 2V_{n−1}/V_n and γ = 1.
    pub fn lebesgue(n: usize) -> Self {
        let c = match n {
            1 => int(1),
            2 => ratio(9, 7),
            3 => ratio(3, 2),
            _ => {
                let v = |k: f64| std::f64::consts::PI.powf(k / 2.0) / gamma_fn(k / 2.0 + 1.0);
                from_f64(2.0 * v(n as f64 - 1.0) / v(n as f64) * (1.0 + 1e-9))
            }
        };
        DecayParams {
            c,
            gamma: int(1),
            rho0: Bound::Infinite,
            federer_d: Some(int((1i64 << n.min(62)) + 1)),
            power_law: None,
        }
    }

    pub fn with_power_law(mut self, pl: PowerLaw) -> Self {
        self.power_law = Some(pl);
        self
    }

    /// Power-law exponent δ > n − 1 forces γ = δ − n + 1.
    pub fn check_consistency(&self, n: usize) -> Result<(), SupportError> {
        if let Some(pl) = &self.power_law {
            let nm1 = int(n as i64 - 1);
            if pl.delta > nm1 && self.gamma != &pl.delta - &nm1 {
                return Err(SupportError::Parameter(format!(
                    "gamma must equal delta - n + 1 = {}",
                    crate::numeric::fmt_scalar(&(&pl.delta - &nm1))
                )));
            }
        }
        Ok(())
    }
}

fn gamma_fn(x: f64) -> f64 {
    // Lanczos approximation, adequate for the half-integer volumes above
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x))
    } else {
        let x = x - 1.0;
        let t = x + 7.5;
        let s = G[1..].iter().enumerate().fold(G[0], |acc, (i, g)| acc + g / (x + i as f64 + 1.0));
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * s
    }
}

/// Certified lower bound on 1/(2C^{1/γ}+1).
pub fn max_alpha(decay: &DecayParams) -> Scalar {
    let (_, hi) = pow_rational_bounds(&decay.c, &decay.gamma.recip(), 64);
    (int(2) * hi + int(1)).recip()
}

/// Certified lower bound on ε = 1 − C(2α/(1−α))^γ; errors unless ε > 0.
pub fn epsilon_for(decay: &DecayParams, alpha: &Scalar) -> Result<Scalar, SupportError> {
    if !alpha.is_positive() || *alpha >= int(1) {
        return Err(SupportError::Parameter("alpha must lie in (0, 1)".into()));
    }
    let base = int(2) * alpha / (int(1) - alpha);
    let (_, hi) = pow_rational_bounds(&base, &decay.gamma, 64);
    let eps = int(1) - &decay.c * hi;
    if !eps.is_positive() {
        return Err(SupportError::Parameter(format!(
            "alpha must be below 1/(2C^(1/gamma)+1) ~ {:.6}",
            to_f64(&max_alpha(decay))
        )));
    }
    Ok(eps)
}

/// x ↦ ratio·x + translation with 0 < ratio < 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Similarity {
    pub ratio: Scalar,
    pub translation: Vector,
}

impl Similarity {
    pub fn apply(&self, x: &[Scalar]) -> Vector {
        vadd(&vscale(x, &self.ratio), &self.translation)
    }

    pub fn invert(&self, x: &[Scalar]) -> Vector {
        vscale(&vsub(x, &self.translation), &self.ratio.recip())
    }

    pub fn fixed_point(&self) -> Vector {
        let s = (int(1) - &self.ratio).recip();
        vscale(&self.translation, &s)
    }
}

/// A cell f_w(box) of the attractor, stored as x ↦ scale·x + offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub word: Vec<u16>,
    pub scale: Scalar,
    pub offset: Vector,
}

/// Self-similar attractor of homotheties with uniform weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ifs {
    maps: Vec<Similarity>,
    lo: Vector,
    hi: Vector,
    base: Vector,
}

impl Ifs {
    pub fn new(maps: Vec<Similarity>) -> Result<Self, SupportError> {
        if maps.len() < 2 {
            return Err(SupportError::InvalidIfs("need at least two maps (a single map gives an atom)".into()));
        }
        let n = maps[0].translation.len();
        for m in &maps {
            if m.translation.len() != n {
                return Err(SupportError::InvalidIfs("maps of different dimensions".into()));
            }
            if !m.ratio.is_positive() || m.ratio >= int(1) {
                return Err(SupportError::InvalidIfs("ratios must lie in (0, 1)".into()));
            }
        }
        // the hull of the attractor is spanned by the fixed points
        let fixed: Vec<Vector> = maps.iter().map(Similarity::fixed_point).collect();
        let lo: Vector = (0..n).map(|c| fixed.iter().map(|p| p[c].clone()).min().unwrap()).collect();
        let hi: Vector = (0..n).map(|c| fixed.iter().map(|p| p[c].clone()).max().unwrap()).collect();
        if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(SupportError::InvalidIfs("degenerate bounding box (atom or lower-dimensional attractor)".into()));
        }
        let ifs = Ifs { base: fixed[0].clone(), maps, lo, hi };
        ifs.check_open_set_condition()?;
        Ok(ifs)
    }

    pub fn cantor() -> Self {
        Ifs::new(vec![
            Similarity { ratio: ratio(1, 3), translation: vec![int(0)] },
            Similarity { ratio: ratio(1, 3), translation: vec![ratio(2, 3)] },
        ])
        .expect("middle-third Cantor IFS is valid")
    }

    pub fn sierpinski() -> Self {
        let h = ratio(1, 2);
        Ifs::new(vec![
            Similarity { ratio: h.clone(), translation: vec![int(0), int(0)] },
            Similarity { ratio: h.clone(), translation: vec![h.clone(), int(0)] },
            Similarity { ratio: h.clone(), translation: vec![int(0), h] },
        ])
        .expect("Sierpinski IFS is valid")
    }

    fn check_open_set_condition(&self) -> Result<(), SupportError> {
        let boxes: Vec<(Vector, Vector)> = self.maps.iter().map(|m| (m.apply(&self.lo), m.apply(&self.hi))).collect();
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                let (a, b) = (&boxes[i], &boxes[j]);
                let separated = (0..self.dim()).any(|c| a.1[c] <= b.0[c] || b.1[c] <= a.0[c]);
                if !separated {
                    return Err(SupportError::InvalidIfs(format!(
                        "open set condition fails: images of maps {i} and {j} overlap"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn maps(&self) -> &[Similarity] {
        &self.maps
    }

    pub fn bbox(&self) -> (&Vector, &Vector) {
        (&self.lo, &self.hi)
    }

    pub fn base_point(&self) -> &Vector {
        &self.base
    }

    /// Squared diameter of the bounding box.
    pub fn diam2(&self) -> Scalar {
        norm2(&vsub(&self.hi, &self.lo))
    }

    pub fn root(&self) -> Cell {
        Cell { word: vec![], scale: int(1), offset: zeros(self.dim()) }
    }

    pub fn child(&self, cell: &Cell, i: usize) -> Cell {
        let m = &self.maps[i];
        let mut word = cell.word.clone();
        word.push(i as u16);
        Cell {
            word,
            scale: &cell.scale * &m.ratio,
            offset: vadd(&vscale(&m.translation, &cell.scale), &cell.offset),
        }
    }

    pub fn cell_point(&self, cell: &Cell) -> Vector {
        vadd(&vscale(&self.base, &cell.scale), &cell.offset)
    }

    pub fn cell_box(&self, cell: &Cell) -> (Vector, Vector) {
        (
            vadd(&vscale(&self.lo, &cell.scale), &cell.offset),
            vadd(&vscale(&self.hi, &cell.scale), &cell.offset),
        )
    }

    /// f_w(base) for a code word w (applied outermost first).
    pub fn eval_word(&self, word: &[u16]) -> Vector {
        let mut cell = self.root();
        for &i in word {
            cell = self.child(&cell, i as usize);
        }
        self.cell_point(&cell)
    }

    /// Certifies x ∈ K by following inverse branches; a cycle identifies x
    /// as the fixed point of a composition. Returns false when no
    /// certificate is found within `max_depth` steps.
    pub fn contains(&self, x: &[Scalar], max_depth: usize) -> bool {
        let mut on_path: HashMap<Vector, ()> = HashMap::new();
        let mut failed: HashMap<Vector, ()> = HashMap::new();
        self.contains_rec(x.to_vec(), max_depth, &mut on_path, &mut failed)
    }

    fn in_box(&self, x: &[Scalar], lo: &[Scalar], hi: &[Scalar]) -> bool {
        x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| a <= v && v <= b)
    }

    fn contains_rec(
        &self,
        x: Vector,
        depth: usize,
        on_path: &mut HashMap<Vector, ()>,
        failed: &mut HashMap<Vector, ()>,
    ) -> bool {
        if !self.in_box(&x, &self.lo, &self.hi) || failed.contains_key(&x) {
            return false;
        }
        if on_path.contains_key(&x) {
            return true;
        }
        if depth == 0 {
            return false;
        }
        on_path.insert(x.clone(), ());
        for m in &self.maps {
            let (a, b) = (m.apply(&self.lo), m.apply(&self.hi));
            if self.in_box(&x, &a, &b) && self.contains_rec(m.invert(&x), depth - 1, on_path, failed) {
                on_path.remove(&x);
                return true;
            }
        }
        on_path.remove(&x);
        failed.insert(x, ());
        false
    }
}

/// Squared distance from x to the box [lo, hi].
fn box_dist2(x: &[Scalar], lo: &[Scalar], hi: &[Scalar]) -> Scalar {
    x.iter().zip(lo.iter().zip(hi)).fold(Scalar::zero(), |acc, (v, (a, b))| {
        let d = if v < a {
            a - v
        } else if v > b {
            v - b
        } else {
            Scalar::zero()
        };
        acc + &d * &d
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SupportKind {
    Euclidean(usize),
    Ifs(Ifs),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportModel {
    pub kind: SupportKind,
    pub decay: DecayParams,
    pub resolution_depth: u32,
}

/// Finite candidate set; grids are kept implicit so scoring can run on
/// integer offsets.
#[derive(Debug, Clone)]
pub enum Candidates {
    Grid { origin: Vector, step: Scalar, offsets: Vec<Vec<i64>> },
    Points(Vec<Vector>),
}

impl Candidates {
    pub fn len(&self) -> usize {
        match self {
            Candidates::Grid { offsets, .. } => offsets.len(),
            Candidates::Points(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> Vector {
        match self {
            Candidates::Grid { origin, step, offsets } => origin
                .iter()
                .zip(&offsets[i])
                .map(|(o, &z)| o + step * int(z))
                .collect(),
            Candidates::Points(p) => p[i].clone(),
        }
    }

    pub fn to_vec(&self) -> Vec<Vector> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

/// Integer vectors z with ‖z‖² ≤ bound, lexicographically ordered.
fn lattice_ball(n: usize, bound: &Scalar) -> Vec<Vec<i64>> {
    let zmax = crate::numeric::floor(&sqrt_bounds(bound).1);
    let zmax: i64 = num_traits::ToPrimitive::to_i64(&zmax).unwrap_or(i64::MAX);
    let b = crate::numeric::floor(bound);
    let b: i64 = num_traits::ToPrimitive::to_i64(&b).unwrap_or(i64::MAX);
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(n: usize, zmax: i64, left: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for z in -zmax..=zmax {
            if z * z <= left {
                cur.push(z);
                rec(n, zmax, left - z * z, cur, out);
                cur.pop();
            }
        }
    }
    rec(n, zmax, b, &mut cur, &mut out);
    out
}

/// Grid sizes beyond this are not attempted by mesh refinement.
const GRID_BUDGET: usize = 400_000;

impl SupportModel {
    pub fn euclidean(n: usize) -> Self {
        SupportModel { kind: SupportKind::Euclidean(n), decay: DecayParams::lebesgue(n), resolution_depth: 1 }
    }

    pub fn ifs(ifs: Ifs, decay: DecayParams, resolution_depth: u32) -> Result<Self, SupportError> {
        decay.check_consistency(ifs.dim())?;
        Ok(SupportModel { kind: SupportKind::Ifs(ifs), decay, resolution_depth: resolution_depth.max(1) })
    }

    /// ρ₀ defaulting to the bounding-box diameter for IFS supports.
    pub fn ifs_default_rho0(ifs: &Ifs) -> Scalar {
        sqrt_bounds(&ifs.diam2()).0
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SupportKind::Euclidean(n) => *n,
            SupportKind::Ifs(ifs) => ifs.dim(),
        }
    }

    pub fn as_ifs(&self) -> Option<&Ifs> {
        match &self.kind {
            SupportKind::Ifs(i) => Some(i),
            SupportKind::Euclidean(_) => None,
        }
    }

    fn membership_depth(&self) -> usize {
        self.resolution_depth.max(64) as usize + 4096
    }

    pub fn contains(&self, x: &[Scalar]) -> bool {
        match &self.kind {
            SupportKind::Euclidean(n) => x.len() == *n,
            SupportKind::Ifs(ifs) => x.len() == ifs.dim() && ifs.contains(x, self.membership_depth()),
        }
    }

    /// A point of K within d(x, K) + scale·10⁻³ of x.
    pub fn nearest_on_support(&self, x: &[Scalar], scale: &Scalar) -> Vector {
        let ifs = match &self.kind {
            SupportKind::Euclidean(_) => return x.to_vec(),
            SupportKind::Ifs(ifs) => ifs,
        };
        let tol = scale * ratio(1, 1000);
        let tol2 = &tol * &tol;
        let diam2 = ifs.diam2();
        struct Entry(Scalar, Cell);
        impl PartialEq for Entry {
            fn eq(&self, o: &Self) -> bool {
                self.0 == o.0 && self.1.word == o.1.word
            }
        }
        impl Eq for Entry {}
        impl PartialOrd for Entry {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Entry {
            // min-heap on distance, then on code word
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.cmp(&self.0).then_with(|| o.1.word.cmp(&self.1.word))
            }
        }
        let mut heap = BinaryHeap::new();
        let root = ifs.root();
        let (lo, hi) = ifs.cell_box(&root);
        heap.push(Entry(box_dist2(x, &lo, &hi), root));
        let min_depth = self.resolution_depth as usize;
        while let Some(Entry(_, cell)) = heap.pop() {
            // the popped cell is the closest box; once it is fine enough,
            // its point is within the box diameter of optimal
            if &cell.scale * &cell.scale * &diam2 < tol2 && cell.word.len() >= min_depth {
                return ifs.cell_point(&cell);
            }
            for i in 0..ifs.maps().len() {
                let ch = ifs.child(&cell, i);
                let (lo, hi) = ifs.cell_box(&ch);
                heap.push(Entry(box_dist2(x, &lo, &hi), ch));
            }
        }
        unreachable!("the cell heap never empties")
    }

    /// Points of K in B(center, (1−α)ρ) covering it to mesh ≤ αρ/4.
    pub fn candidate_centers(&self, ball: &Ball, alpha: &Scalar) -> Result<Candidates, SupportError> {
        self.candidate_centers_refined(ball, alpha, 0)
    }

    /// As candidate_centers with the mesh divided by 2^refine; None when
    /// the refined grid would exceed the budget.
    pub fn candidate_centers_refined(&self, ball: &Ball, alpha: &Scalar, refine: u32) -> Result<Candidates, SupportError> {
        let n = self.dim();
        let inner = (int(1) - alpha) * &ball.radius;
        match &self.kind {
            SupportKind::Euclidean(_) => {
                let k = int(ceil_sqrt(n) as i64);
                let step = alpha * &ball.radius / (int(4) * k * int(1i64 << refine));
                let q = &inner / &step;
                let offsets = lattice_ball(n, &(&q * &q));
                Ok(Candidates::Grid { origin: ball.center.clone(), step, offsets })
            }
            SupportKind::Ifs(ifs) => {
                let mesh = alpha * &ball.radius / (int(4) * int(1i64 << refine));
                let pts = ifs_candidates(ifs, &ball.center, &inner, &mesh);
                if pts.is_empty() {
                    Err(SupportError::EmptyCandidates)
                } else {
                    Ok(Candidates::Points(pts))
                }
            }
        }
    }

    /// Estimated size of a refined candidate set, used to cap refinement.
    pub fn refinement_allowed(&self, base_len: usize, refine: u32) -> bool {
        match &self.kind {
            SupportKind::Euclidean(n) => base_len.saturating_mul(1usize << (refine as usize * n)) <= GRID_BUDGET,
            SupportKind::Ifs(_) => refine <= 3,
        }
    }
}

fn ceil_sqrt(n: usize) -> usize {
    let mut k = 1;
    while k * k < n {
        k += 1;
    }
    k
}

/// One exact representative per cell of diameter ≤ mesh meeting
/// B(center, radius), each lying inside that ball.
fn ifs_candidates(ifs: &Ifs, center: &[Scalar], radius: &Scalar, mesh: &Scalar) -> Vec<Vector> {
    let r2 = radius * radius;
    let mesh2 = mesh * mesh;
    let diam2 = ifs.diam2();
    let mut out = Vec::new();
    let mut stack = vec![ifs.root()];
    while let Some(cell) = stack.pop() {
        let (lo, hi) = ifs.cell_box(&cell);
        if box_dist2(center, &lo, &hi) > r2 {
            continue;
        }
        if &cell.scale * &cell.scale * &diam2 <= mesh2 {
            if let Some(p) = representative(ifs, &cell, center, &r2, 8) {
                out.push(p);
            }
            continue;
        }
        for i in (0..ifs.maps().len()).rev() {
            stack.push(ifs.child(&cell, i));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// First code-word point of the cell (depth-first, up to `extra` levels
/// deeper) that lies in the ball.
fn representative(ifs: &Ifs, cell: &Cell, center: &[Scalar], r2: &Scalar, extra: usize) -> Option<Vector> {
    let p = ifs.cell_point(cell);
    if norm2(&vsub(&p, center)) <= *r2 {
        return Some(p);
    }
    if extra == 0 {
        return None;
    }
    for i in 0..ifs.maps().len() {
        let ch = ifs.child(cell, i);
        let (lo, hi) = ifs.cell_box(&ch);
        if box_dist2(center, &lo, &hi) <= *r2 {
            if let Some(p) = representative(ifs, &ch, center, r2, extra - 1) {
                return Some(p);
            }
        }
    }
    None
}

impl Default for SupportModel {
    fn default() -> Self {
        SupportModel::euclidean(1)
    }
}
