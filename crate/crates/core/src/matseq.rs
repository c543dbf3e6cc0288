//! Matrix sequences: certified operator norms, lacunarity, and the
//! Jordan/Kronecker structure of matrix powers.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::linalg::{jacobi_eigen, norm2, unit, vscale, QMatrix, Vector};
use crate::numeric::{
    big, dist_to_integer, fmt_scalar, from_f64, gcd_all, int, ln_abs, ratio, round_down_dyadic, round_up_dyadic,
    sqrt_bounds, to_f64, Enclosure, Scalar, SqrtScalar,
};
use crate::poly::{largest_real_root, Poly, SturmChain};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatSeqError {
    #[error("zero matrix has no singular direction")]
    ZeroMatrix,
    #[error("matrix entries must be integers")]
    NonInteger,
    #[error("matrix must be square")]
    NotSquare,
    #[error("M^N is not unipotent")]
    NotUnipotent,
    #[error("matrix is not a single Jordan block")]
    NotJordanBlock,
    #[error("index {0} is outside the sequence")]
    IndexOutOfRange(usize),
    #[error("sequence is empty")]
    Empty,
    #[error("matrices of inconsistent shape")]
    ShapeMismatch,
}

/// t = ‖M‖_op as a certified enclosure and v an (approximately unit)
/// rational top right singular direction, first nonzero coordinate positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorNorm {
    pub t: Enclosure,
    pub v: Vector,
}

fn sign_normalize(mut w: Vector) -> Vector {
    if w.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative()) {
        w = w.into_iter().map(|x| -x).collect();
    }
    w
}

fn normalize(w: Vector) -> Vector {
    let nn = norm2(&w);
    let (lo, hi) = sqrt_bounds(&nn);
    if lo == hi {
        return sign_normalize(vscale(&w, &lo.recip()));
    }
    let inv = lo.recip();
    sign_normalize(w.iter().map(|x| round_down_dyadic(&(x * &inv), 80)).collect())
}

/// Largest eigenvalue of a symmetric PSD rational matrix with an
/// eigenvector; certified through Sturm counts on the characteristic
/// polynomial, with a Jacobi estimate as the initial bracket.
fn top_eigen(g: &QMatrix) -> (Enclosure, Vector) {
    let n = g.rows();
    if g.is_diagonal() {
        let (i, lam) = (0..n)
            .map(|i| (i, g.get(i, i).clone()))
            .fold(None::<(usize, Scalar)>, |acc, (i, v)| match acc {
                Some((_, ref b)) if *b >= v => acc,
                _ => Some((i, v)),
            })
            .unwrap();
        return (Enclosure::exact(lam), unit(n, i));
    }
    // scale into [−n, n] so floating estimates and root bounds stay tame
    let s = g.max_abs_entry();
    let gs = g.scale(&s.recip());
    let gf = gs.to_f64();
    let (vals, vecs) = jacobi_eigen(&gf);
    let imax = (0..n).max_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap()).unwrap();
    let rel = ratio(1, 1_000_000_000_000);
    let root = largest_real_root(&gs.charpoly(), &rel, Some(vals[imax])).expect("symmetric matrix has real eigenvalues");
    let lam = Enclosure::new(&root.enclosure.lo * &s, &root.enclosure.hi * &s);
    let w = match &root.exact {
        Some(l) => {
            let shifted = gs.sub(&QMatrix::identity(n).scale(l));
            shifted.nullspace().into_iter().next().expect("exact eigenvalue has an eigenvector")
        }
        None => (0..n).map(|i| from_f64(vecs[i][imax])).collect(),
    };
    (lam, w)
}

/// ‖M‖_op and a top right singular direction, certified.
pub fn operator_norm(m: &QMatrix) -> Result<OperatorNorm, MatSeqError> {
    if m.is_zero() {
        return Err(MatSeqError::ZeroMatrix);
    }
    let mt = m.transpose();
    let (lam, v) = if m.rows() < m.cols() {
        let (lam, u) = top_eigen(&m.mul(&mt));
        (lam, mt.mul_vec(&u))
    } else {
        top_eigen(&mt.mul(m))
    };
    Ok(OperatorNorm { t: lam.sqrt(), v: normalize(v) })
}

/// Cached per-index data.
#[derive(Debug, Clone)]
pub struct IndexData {
    pub matrix: QMatrix,
    pub norm: Enclosure,
    pub direction: Vector,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeqKind {
    Powers(QMatrix),
    Explicit(Vec<QMatrix>),
    RowVectors(Vec<Vector>),
}

/// A sequence (M_k)_{k≥1} with a populate-once cache of norms and
/// singular directions.
#[derive(Debug)]
pub struct MatrixSequence {
    kind: SeqKind,
    cache: RwLock<BTreeMap<usize, Arc<IndexData>>>,
}

impl Clone for MatrixSequence {
    fn clone(&self) -> Self {
        MatrixSequence { kind: self.kind.clone(), cache: RwLock::new(self.cache.read().unwrap().clone()) }
    }
}

impl MatrixSequence {
    pub fn new(kind: SeqKind) -> Result<Self, MatSeqError> {
        match &kind {
            SeqKind::Powers(m) => {
                if !m.is_square() {
                    return Err(MatSeqError::NotSquare);
                }
                if m.is_zero() {
                    return Err(MatSeqError::ZeroMatrix);
                }
            }
            SeqKind::Explicit(list) => {
                let first = list.first().ok_or(MatSeqError::Empty)?;
                if list.iter().any(|x| x.rows() != first.rows() || x.cols() != first.cols()) {
                    return Err(MatSeqError::ShapeMismatch);
                }
                if list.iter().any(QMatrix::is_zero) {
                    return Err(MatSeqError::ZeroMatrix);
                }
            }
            SeqKind::RowVectors(rows) => {
                let first = rows.first().ok_or(MatSeqError::Empty)?;
                if rows.iter().any(|r| r.len() != first.len()) {
                    return Err(MatSeqError::ShapeMismatch);
                }
                if rows.iter().any(|r| r.iter().all(Zero::is_zero)) {
                    return Err(MatSeqError::ZeroMatrix);
                }
            }
        }
        Ok(MatrixSequence { kind, cache: RwLock::new(BTreeMap::new()) })
    }

    pub fn powers(m: QMatrix) -> Result<Self, MatSeqError> {
        Self::new(SeqKind::Powers(m))
    }

    pub fn explicit(list: Vec<QMatrix>) -> Result<Self, MatSeqError> {
        Self::new(SeqKind::Explicit(list))
    }

    pub fn row_vectors(rows: Vec<Vector>) -> Result<Self, MatSeqError> {
        Self::new(SeqKind::RowVectors(rows))
    }

    pub fn kind(&self) -> &SeqKind {
        &self.kind
    }

    /// Input dimension n.
    pub fn dim_in(&self) -> usize {
        match &self.kind {
            SeqKind::Powers(m) => m.cols(),
            SeqKind::Explicit(l) => l[0].cols(),
            SeqKind::RowVectors(r) => r[0].len(),
        }
    }

    /// Output dimension m.
    pub fn dim_out(&self) -> usize {
        match &self.kind {
            SeqKind::Powers(m) => m.rows(),
            SeqKind::Explicit(l) => l[0].rows(),
            SeqKind::RowVectors(_) => 1,
        }
    }

    /// Number of terms, or None for infinite sequences.
    pub fn len(&self) -> Option<usize> {
        match &self.kind {
            SeqKind::Powers(_) => None,
            SeqKind::Explicit(l) => Some(l.len()),
            SeqKind::RowVectors(r) => Some(r.len()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    pub fn has_index(&self, k: usize) -> bool {
        k >= 1 && self.len().is_none_or(|n| k <= n)
    }

    /// M_k, 1-based.
    pub fn matrix(&self, k: usize) -> Result<QMatrix, MatSeqError> {
        if !self.has_index(k) {
            return Err(MatSeqError::IndexOutOfRange(k));
        }
        Ok(match &self.kind {
            SeqKind::Powers(m) => {
                if let Some(prev) = self.cache.read().unwrap().get(&(k - 1)) {
                    prev.matrix.mul(m)
                } else {
                    m.pow(k as u64)
                }
            }
            SeqKind::Explicit(l) => l[k - 1].clone(),
            SeqKind::RowVectors(r) => QMatrix::new(1, r[k - 1].len(), r[k - 1].clone()),
        })
    }

    pub fn index(&self, k: usize) -> Result<Arc<IndexData>, MatSeqError> {
        if let Some(d) = self.cache.read().unwrap().get(&k) {
            return Ok(d.clone());
        }
        let matrix = self.matrix(k)?;
        let on = operator_norm(&matrix)?;
        let data = Arc::new(IndexData { matrix, norm: on.t, direction: on.v });
        let mut cache = self.cache.write().unwrap();
        Ok(cache.entry(k).or_insert(data).clone())
    }

    pub fn norm(&self, k: usize) -> Result<Enclosure, MatSeqError> {
        Ok(self.index(k)?.norm.clone())
    }

    /// Fills the cache for 1..=upto; independent indices run in parallel.
    pub fn precompute(&self, upto: usize) -> Result<(), MatSeqError> {
        let upto = self.len().map_or(upto, |n| n.min(upto));
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(upto.max(1));
        let errors: Vec<MatSeqError> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    s.spawn(move || {
                        (1..=upto)
                            .filter(|k| k % threads == t)
                            .filter_map(|k| self.index(k).err())
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("norm worker panicked")).collect()
        });
        errors.into_iter().next().map_or(Ok(()), Err)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Lacunary,
    NotLacunary,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LacunarityReport {
    pub verdict: Verdict,
    /// Certified lower bound on the ℓ-step ratios over the analyzed range.
    pub q: Option<Scalar>,
    /// (ℓ, N): every residue class (M_{i+jℓ})_{j≥N} is lacunary.
    pub decomposition: Option<(usize, usize)>,
    pub spectral_radius: Option<Enclosure>,
    pub horizon: usize,
}

impl LacunarityReport {
    pub fn lacunary(&self) -> bool {
        self.verdict == Verdict::Lacunary
    }
}

/// Deflated characteristic polynomial of M ⊗ M; its largest real root is
/// the squared spectral radius of M.
fn squared_spectrum_poly(m: &QMatrix) -> Poly {
    m.kron(m).charpoly().squarefree()
}

/// Enclosure of the spectral radius of a square matrix.
pub fn spectral_radius(m: &QMatrix) -> Result<Enclosure, MatSeqError> {
    if !m.is_square() {
        return Err(MatSeqError::NotSquare);
    }
    let p = squared_spectrum_poly(m);
    match largest_real_root(&p, &ratio(1, 1_000_000_000_000), None) {
        Some(r) if !r.enclosure.hi.is_negative() => {
            let lo = if r.enclosure.lo.is_negative() { Scalar::zero() } else { r.enclosure.lo };
            Ok(Enclosure::new(lo, r.enclosure.hi).sqrt())
        }
        _ => Ok(Enclosure::exact(Scalar::zero())),
    }
}

/// Exactly decides whether some eigenvalue of M has modulus > 1.
pub fn spectral_radius_exceeds_one(m: &QMatrix) -> bool {
    let p = squared_spectrum_poly(m).deflate_root(&int(1));
    if p.degree().unwrap_or(0) == 0 {
        return false;
    }
    SturmChain::new(&p).count_above(&int(1)) > 0
}

fn ratio_lower(num: &Enclosure, den: &Enclosure) -> Scalar {
    &num.lo / &den.hi
}

pub fn analyze_lacunarity(seq: &MatrixSequence, horizon: usize) -> Result<LacunarityReport, MatSeqError> {
    let horizon = horizon.max(2);
    match seq.kind() {
        SeqKind::Powers(m) => {
            let rho = spectral_radius(m)?;
            let mut report =
                LacunarityReport { verdict: Verdict::NotLacunary, q: None, decomposition: None, spectral_radius: Some(rho), horizon };
            if !spectral_radius_exceeds_one(m) {
                return Ok(report);
            }
            report.verdict = Verdict::Undecided;
            seq.precompute(horizon)?;
            let norms: Vec<Enclosure> = (1..=horizon).map(|k| seq.norm(k)).collect::<Result<_, _>>()?;
            let max_ell = (m.rows() * horizon / 4).max(1);
            for ell in 1..=max_ell.min(horizon - 1) {
                let ratios: Vec<Scalar> = (0..horizon - ell).map(|i| ratio_lower(&norms[i + ell], &norms[i])).collect();
                // start after the last index whose ratio fails to exceed 1
                let start = ratios.iter().rposition(|q| *q <= int(1)).map_or(0, |i| i + 1);
                let checked = ratios.len() - start;
                if checked == 0 || checked < (2 * ell).max(horizon / 4) {
                    continue;
                }
                let q = ratios[start..].iter().min().unwrap().clone();
                report.verdict = Verdict::Lacunary;
                report.q = Some(round_down_dyadic(&q, 40).max(int(1) + ratio(1, 1 << 40)).min(q));
                report.decomposition = Some((ell, start + 1));
                return Ok(report);
            }
            Ok(report)
        }
        _ => {
            let len = seq.len().unwrap_or(horizon).min(horizon);
            if len < 2 {
                return Ok(LacunarityReport { verdict: Verdict::Undecided, q: None, decomposition: None, spectral_radius: None, horizon });
            }
            let norms: Vec<Enclosure> = (1..=len).map(|k| seq.norm(k)).collect::<Result<_, _>>()?;
            let q = norms.windows(2).map(|w| ratio_lower(&w[1], &w[0])).min().unwrap();
            let lac = q > int(1);
            Ok(LacunarityReport {
                verdict: if lac { Verdict::Lacunary } else { Verdict::NotLacunary },
                q: Some(q),
                decomposition: lac.then_some((1, 1)),
                spectral_radius: None,
                horizon,
            })
        }
    }
}

fn f64_op_norm(a: &[Vec<f64>]) -> f64 {
    let n = a[0].len();
    let ata: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a.iter().map(|row| row[i] * row[j]).sum()).collect())
        .collect();
    let (vals, _) = jacobi_eigen(&ata);
    vals.into_iter().fold(0.0, f64::max).max(0.0).sqrt()
}

/// log ‖M^k‖_op for k = 1..=horizon by renormalized floating products.
pub fn log_norm_sequence(m: &QMatrix, horizon: usize) -> Vec<f64> {
    let n = m.rows();
    let smax = m.max_abs_entry();
    if smax.is_zero() {
        return vec![f64::NEG_INFINITY; horizon];
    }
    let log_s = ln_abs(&smax);
    let a: Vec<Vec<f64>> = m.scale(&smax.recip()).to_f64();
    let mut p = a.clone();
    let mut acc_log = log_s;
    let mut out = Vec::with_capacity(horizon);
    for k in 1..=horizon {
        if k > 1 {
            p = (0..n).map(|i| (0..n).map(|j| (0..n).map(|l| p[i][l] * a[l][j]).sum()).collect()).collect();
            acc_log += log_s;
        }
        let mx = p.iter().flatten().fold(0.0f64, |x, v| x.max(v.abs()));
        if mx == 0.0 {
            out.extend(std::iter::repeat_n(f64::NEG_INFINITY, horizon - k + 1));
            break;
        }
        for row in p.iter_mut() {
            for v in row.iter_mut() {
                *v /= mx;
            }
        }
        acc_log += mx.ln();
        out.push(acc_log + f64_op_norm(&p).ln());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct JordanReport {
    pub size: usize,
    pub ratio: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

/// For a single Jordan block B(λ) of size m, compares ‖B^k‖ with the corner
/// entry binom(k, m−1)·λ^{k−m+1} at k = horizon.
pub fn jordan_dominance_check(b: &QMatrix, horizon: usize) -> Result<JordanReport, MatSeqError> {
    if !b.is_square() {
        return Err(MatSeqError::NotSquare);
    }
    let m = b.rows();
    let lam = b.get(0, 0).clone();
    for i in 0..m {
        for j in 0..m {
            let expect = if i == j {
                lam.clone()
            } else if j == i + 1 {
                Scalar::one()
            } else {
                Scalar::zero()
            };
            if *b.get(i, j) != expect {
                return Err(MatSeqError::NotJordanBlock);
            }
        }
    }
    if lam.is_zero() {
        return Err(MatSeqError::NotJordanBlock);
    }
    let k = horizon.max(m);
    let log_norm = *log_norm_sequence(b, k).last().unwrap();
    let ln_binom: f64 = (0..m - 1).map(|i| ((k - i) as f64).ln() - ((i + 1) as f64).ln()).sum();
    let log_corner = ln_binom + (k - m + 1) as f64 * ln_abs(&lam);
    let ratio = (log_norm - log_corner).exp();
    let tolerance = 10.0 * (m * m) as f64 / k as f64;
    Ok(JordanReport { size: m, ratio, tolerance, within_tolerance: (ratio - 1.0).abs() <= tolerance })
}

fn euler_phi(mut d: u64) -> u64 {
    let mut result = d;
    let mut p = 2;
    while p * p <= d {
        if d % p == 0 {
            while d % p == 0 {
                d /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if d > 1 {
        result -= result / d;
    }
    result
}

/// lcm of all d with φ(d) ≤ n: every root of unity of degree ≤ n has an
/// order dividing it.
pub fn cyclotomic_bound(n: usize) -> u64 {
    let n = n as u64;
    // φ(d) ≥ √(d/2), so d ≤ 2n² suffices
    (1..=2 * n * n + 2)
        .filter(|&d| euler_phi(d) <= n)
        .fold(1u64, |l, d| num_integer::lcm(l, d))
}

fn is_unipotent(u: &QMatrix) -> bool {
    let n = u.rows();
    u.sub(&QMatrix::identity(n)).pow(n as u64).is_zero()
}

/// Least N with M^N unipotent, for nonsingular integer M whose eigenvalues
/// all have modulus ≤ 1; None when that precondition fails.
pub fn kronecker_order(m: &QMatrix) -> Result<Option<u64>, MatSeqError> {
    if !m.is_square() {
        return Err(MatSeqError::NotSquare);
    }
    if !m.is_integer() {
        return Err(MatSeqError::NonInteger);
    }
    if m.det().is_zero() || spectral_radius_exceeds_one(m) {
        return Ok(None);
    }
    let n = m.rows();
    let mut p = QMatrix::identity(n);
    for big_n in 1..=cyclotomic_bound(n) {
        p = p.mul(m);
        if is_unipotent(&p) {
            return Ok(Some(big_n));
        }
    }
    Ok(None)
}

/// The M^N-invariant rational hyperplane V = w^⊥ through 0, with w a
/// primitive integer vector; V + ℤⁿ is a family of parallel hyperplanes
/// spaced 1/‖w‖ apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperplaneFamily {
    pub normal: Vec<BigInt>,
    pub separation: SqrtScalar,
}

impl HyperplaneFamily {
    pub fn normal_scalar(&self) -> Vector {
        self.normal.iter().map(|v| big(v.clone())).collect()
    }

    /// d(x, V + ℤⁿ) = d(w·x, ℤ)/‖w‖.
    pub fn distance(&self, x: &[Scalar]) -> SqrtScalar {
        let w = self.normal_scalar();
        let d = dist_to_integer(&crate::linalg::dot(&w, x));
        SqrtScalar::from_square(&d * &d / norm2(&w))
    }

    /// The constant c₀ with d(M^{Nk}x, y + ℤⁿ) ≥ c₀·d(x − y, V + ℤⁿ): the
    /// functional w is M^N-invariant, so c₀ = 1.
    pub fn c0(&self) -> Scalar {
        Scalar::one()
    }
}

pub fn invariant_hyperplane_family(m: &QMatrix, big_n: u64) -> Result<HyperplaneFamily, MatSeqError> {
    if !m.is_square() {
        return Err(MatSeqError::NotSquare);
    }
    let n = m.rows();
    let u = m.pow(big_n);
    if !is_unipotent(&u) {
        return Err(MatSeqError::NotUnipotent);
    }
    let a = u.sub(&QMatrix::identity(n));
    // left null vectors: wᵀ(U − I) = 0
    let en = unit(n, n - 1);
    let w = if a.transpose().mul_vec(&en).iter().all(Zero::is_zero) {
        en
    } else {
        a.transpose().nullspace().into_iter().next().expect("unipotent U − I is singular")
    };
    let l = crate::numeric::denom_lcm(&w);
    let ints: Vec<BigInt> = w.iter().map(|x| (x * big(l.clone())).to_integer()).collect();
    let g = gcd_all(&ints);
    let mut normal: Vec<BigInt> = ints.into_iter().map(|x| x / &g).collect();
    if normal.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative()) {
        normal = normal.into_iter().map(|x| -x).collect();
    }
    let nn: BigInt = normal.iter().map(|x| x * x).sum();
    Ok(HyperplaneFamily { normal, separation: SqrtScalar::from_square(Scalar::new(BigInt::one(), nn)) })
}

/// Upper bound, in f64, of the relative width of a norm enclosure.
pub fn rel_width(e: &Enclosure) -> f64 {
    e.rel_width()
}

/// Certified t_k ∈ [lo, hi] as printable strings.
pub fn describe_norm(e: &Enclosure) -> String {
    if e.is_exact() {
        fmt_scalar(&e.lo)
    } else {
        format!("[{:.12e}, {:.12e}]", to_f64(&e.lo), to_f64(&e.hi))
    }
}

/// Rounds an enclosure outward to dyadics with `bits` fractional bits.
pub fn round_enclosure(e: &Enclosure, bits: u32) -> Enclosure {
    Enclosure::new(round_down_dyadic(&e.lo, bits), round_up_dyadic(&e.hi, bits))
}
