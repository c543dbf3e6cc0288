//! Badly approximable affine forms: rational detection, best approximations,
//! the reduction to a target-avoidance game, and direct margin checks.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::linalg::{zeros, Vector};
use crate::matseq::{MatSeqError, MatrixSequence};
use crate::numeric::{big, dist_to_integer, floor, int, pow_rational_bounds, ratio, sqrt_bounds, Enclosure, Scalar};
use crate::poly::{Poly, SturmChain};
use crate::targets::TargetFamily;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BadApproxError {
    #[error("root interval does not isolate exactly one root: {0}")]
    NotIsolating(String),
    #[error("entry is rational; the continued fraction terminates")]
    Rational,
    #[error("matrix shape mismatch")]
    Shape,
    #[error("best-approximation sequence is empty")]
    EmptySequence,
    #[error("enclosure too wide: {0}")]
    Precision(String),
    #[error("{0}")]
    Sequence(#[from] MatSeqError),
}

/// A real number: a rational, or the unique root of `poly` in (lo, hi).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RealEntry {
    Rational(Scalar),
    Algebraic { poly: Poly, lo: Scalar, hi: Scalar },
}

/// Default enclosure width, below the required 10⁻³⁰.
const WIDTH_BITS: u32 = 128;

fn sign_at(p: &Poly, x: &Scalar) -> Ordering {
    p.eval(x).cmp(&Scalar::zero())
}

/// Halves (lo, hi) around the unique simple root of p; exact hits return a point.
fn bisect(p: &Poly, lo: &mut Scalar, hi: &mut Scalar) -> Option<Scalar> {
    let mid = (&*lo + &*hi) / int(2);
    let sm = sign_at(p, &mid);
    if sm == Ordering::Equal {
        return Some(mid);
    }
    if sm == sign_at(p, lo) {
        *lo = mid;
    } else {
        *hi = mid;
    }
    None
}

impl RealEntry {
    pub fn rational(q: Scalar) -> Self {
        RealEntry::Rational(q)
    }

    /// Validates the isolating interval and refines it to width < 2⁻¹²⁸.
    pub fn algebraic(poly: Poly, lo: Scalar, hi: Scalar) -> Result<Self, BadApproxError> {
        let p = poly.squarefree();
        if lo >= hi || p.degree().unwrap_or(0) == 0 {
            return Err(BadApproxError::NotIsolating("empty interval or constant polynomial".into()));
        }
        let count = SturmChain::new(&p).count_in(&lo, &hi);
        let hi_root = p.eval(&hi).is_zero();
        if count != 1 || hi_root || p.eval(&lo).is_zero() {
            return Err(BadApproxError::NotIsolating(format!("{count} roots in (lo, hi]")));
        }
        let (mut lo, mut hi) = (lo, hi);
        let eps = Scalar::new(BigInt::one(), BigInt::one() << WIDTH_BITS);
        while &hi - &lo > eps {
            if let Some(r) = bisect(&p, &mut lo, &mut hi) {
                return Ok(RealEntry::Rational(r));
            }
        }
        // a rational root would have been found by the rational-root test
        if let Some(r) = rational_root_in(&p, &lo, &hi) {
            return Ok(RealEntry::Rational(r));
        }
        Ok(RealEntry::Algebraic { poly: p, lo, hi })
    }

    /// √k for a non-square natural number k (or the exact root otherwise).
    pub fn sqrt(k: u64) -> Self {
        let kk = int(k as i64);
        let (lo, hi) = sqrt_bounds(&kk);
        if lo == hi {
            return RealEntry::Rational(lo);
        }
        RealEntry::algebraic(Poly::new(vec![-kk, int(0), int(1)]), floor(&lo).into(), crate::numeric::ceil(&hi).into())
            .expect("isolating interval for a square root")
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, RealEntry::Rational(_))
    }

    pub fn enclosure(&self) -> Enclosure {
        match self {
            RealEntry::Rational(q) => Enclosure::exact(q.clone()),
            RealEntry::Algebraic { lo, hi, .. } => Enclosure::new(lo.clone(), hi.clone()),
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.enclosure().mid_f64()
    }

    /// Partial quotients of the continued fraction, computed exactly.
    pub fn continued_fraction(&self, count: usize) -> Result<Vec<BigInt>, BadApproxError> {
        let (mut p, mut lo, mut hi) = match self {
            RealEntry::Rational(_) => return Err(BadApproxError::Rational),
            RealEntry::Algebraic { poly, lo, hi } => (poly.clone(), lo.clone(), hi.clone()),
        };
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            // pin down the integer part with the root strictly above it
            loop {
                let a = floor(&lo);
                if floor(&hi) == a && lo > big(a.clone()) {
                    break;
                }
                if bisect(&p, &mut lo, &mut hi).is_some() {
                    return Err(BadApproxError::Rational);
                }
            }
            let a = floor(&lo);
            let af = big(a.clone());
            out.push(a);
            // θ' = 1/(θ − a) is the root of x^d·P(a + 1/x) in the image interval
            p = p.shift(&af).reversed().primitive();
            let (nlo, nhi) = ((&hi - &af).recip(), (&lo - &af).recip());
            lo = nlo;
            hi = nhi;
        }
        Ok(out)
    }
}

fn rational_root_in(p: &Poly, lo: &Scalar, hi: &Scalar) -> Option<Scalar> {
    // convergents of the midpoint with small denominators
    let target = (lo + hi) / int(2);
    let mut x = target.clone();
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    for _ in 0..64 {
        let a = floor(&x);
        let h2 = &a * &h1 + &h0;
        let k2 = &a * &k1 + &k0;
        let c = Scalar::new(h2.clone(), k2.clone());
        if &c > lo && &c < hi && p.eval(&c).is_zero() {
            return Some(c);
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = &x - big(a);
        if frac.is_zero() {
            break;
        }
        x = frac.recip();
    }
    None
}

/// A: an n×m matrix of real entries (row-major), acting on q ∈ ℤᵐ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineSystem {
    pub n: usize,
    pub m: usize,
    pub entries: Vec<RealEntry>,
}

impl AffineSystem {
    pub fn new(n: usize, m: usize, entries: Vec<RealEntry>) -> Result<Self, BadApproxError> {
        if n == 0 || m == 0 || entries.len() != n * m {
            return Err(BadApproxError::Shape);
        }
        Ok(AffineSystem { n, m, entries })
    }

    pub fn scalar(a: RealEntry) -> Self {
        AffineSystem { n: 1, m: 1, entries: vec![a] }
    }

    pub fn entry(&self, i: usize, j: usize) -> &RealEntry {
        &self.entries[i * self.m + j]
    }

    fn row_rational(&self, i: usize) -> bool {
        (0..self.m).all(|j| self.entry(i, j).is_rational())
    }

    /// Aᵀu as exact rationals, when every used row is rational.
    fn at_u_exact(&self, u: &[i64]) -> Option<Vector> {
        let mut out = zeros(self.m);
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                match self.entry(i, j) {
                    RealEntry::Rational(q) => *o += q * int(ui),
                    RealEntry::Algebraic { .. } => return None,
                }
            }
        }
        Some(out)
    }

    /// Enclosure of (Aq)_i for integer q.
    fn aq_enclosure(&self, i: usize, q: &[i64]) -> Enclosure {
        let (mut lo, mut hi) = (Scalar::zero(), Scalar::zero());
        for (j, &qj) in q.iter().enumerate() {
            let e = self.entry(i, j).enclosure();
            let qq = int(qj);
            if qj >= 0 {
                lo += &e.lo * &qq;
                hi += &e.hi * &qq;
            } else {
                lo += &e.hi * &qq;
                hi += &e.lo * &qq;
            }
        }
        Enclosure::new(lo, hi)
    }

    /// Enclosure of (Aᵀy)_j for integer y.
    fn aty_enclosure(&self, j: usize, y: &[i64]) -> Enclosure {
        let (mut lo, mut hi) = (Scalar::zero(), Scalar::zero());
        for (i, &yi) in y.iter().enumerate() {
            let e = self.entry(i, j).enclosure();
            let yy = int(yi);
            if yi >= 0 {
                lo += &e.lo * &yy;
                hi += &e.hi * &yy;
            } else {
                lo += &e.hi * &yy;
                hi += &e.lo * &yy;
            }
        }
        Enclosure::new(lo, hi)
    }
}

/// Lower and upper bounds on d(I, ℤ) for an interval I.
fn dist_interval_to_integer(e: &Enclosure) -> (Scalar, Scalar) {
    let half = ratio(1, 2);
    let fl = floor(&e.lo);
    let lo_frac = &e.lo - big(fl.clone());
    let width = e.width();
    let hi_d = dist_to_integer(&e.lo).max(dist_to_integer(&e.hi));
    // I ⊂ [fl, fl + 1): the distance is min over the endpoints unless I
    // contains an integer or straddles the half point
    if &lo_frac + &width >= Scalar::one() || lo_frac.is_zero() {
        return (Scalar::zero(), hi_d.min(half));
    }
    let hi_frac = &lo_frac + &width;
    let lower = if lo_frac <= half && hi_frac >= half {
        lo_frac.clone().min(Scalar::one() - &hi_frac)
    } else {
        dist_to_integer(&e.lo).min(dist_to_integer(&e.hi))
    };
    let upper = if lo_frac <= half && hi_frac >= half { half } else { hi_d };
    (lower, upper)
}

/// Integer vectors of a given sup-norm shell, first nonzero coordinate positive.
fn shell(n: usize, s: i64, f: &mut impl FnMut(&[i64]) -> bool) -> bool {
    // `need`: no coordinate has reached |z| = s yet
    fn rec(n: usize, s: i64, cur: &mut Vec<i64>, need: bool, lead: bool, f: &mut impl FnMut(&[i64]) -> bool) -> bool {
        if cur.len() == n {
            return need || f(cur);
        }
        let ends = [-s, s];
        let all: Vec<i64>;
        // the last coordinate must reach the shell if no earlier one did
        let zs: &[i64] = if cur.len() + 1 == n && need {
            &ends
        } else {
            all = (-s..=s).collect();
            &all
        };
        for &z in zs {
            if lead && z < 0 {
                continue;
            }
            cur.push(z);
            let go = rec(n, s, cur, need && z.abs() != s, lead && z == 0, f);
            cur.pop();
            if !go {
                return false;
            }
        }
        true
    }
    rec(n, s, &mut Vec::with_capacity(n), true, true, f)
}

/// The smallest 0 ≠ u (sup norm, then lexicographic) with Aᵀu ∈ ℤᵐ, using
/// only rows whose entries are exact rationals.
pub fn rational_rank_check(a: &AffineSystem, bound: u64) -> Option<Vec<i64>> {
    let rows: Vec<usize> = (0..a.n).filter(|&i| a.row_rational(i)).collect();
    if rows.is_empty() {
        return None;
    }
    let bound = bound.min(i64::MAX as u64) as i64;
    let mut found = None;
    for s in 1..=bound {
        let done = !shell(rows.len(), s, &mut |v| {
            let mut u = vec![0i64; a.n];
            for (&i, &x) in rows.iter().zip(v) {
                u[i] = x;
            }
            let img = a.at_u_exact(&u).expect("rational rows");
            if img.iter().all(|x| x.is_integer()) {
                found = Some(u);
                return false;
            }
            true
        });
        if done {
            break;
        }
        if (2 * s + 1).pow(rows.len() as u32) > 50_000_000 {
            break;
        }
    }
    found
}

/// {x : u·x ∈ ℤ}, the hyperplanes excluded from Bad_A when Aᵀu ∈ ℤᵐ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExcludedFamily {
    pub u: Vec<i64>,
}

impl ExcludedFamily {
    pub fn separation(&self) -> Enclosure {
        let nn: Scalar = self.u.iter().map(|&x| int(x * x)).sum();
        let (lo, hi) = sqrt_bounds(&nn);
        Enclosure::new(hi.recip(), lo.recip())
    }

    pub fn excludes(&self, x: &[Scalar]) -> bool {
        let v: Scalar = self.u.iter().zip(x).map(|(&u, xi)| int(u) * xi).sum();
        v.is_integer()
    }

    /// Lower bound d(u·x, ℤ)/‖u‖₁ on d(Aq − x, ℤⁿ) for every q.
    pub fn margin_floor(&self, x: &[Scalar]) -> Scalar {
        let v: Scalar = self.u.iter().zip(x).map(|(&u, xi)| int(u) * xi).sum();
        let l1: i64 = self.u.iter().map(|u| u.abs()).sum();
        dist_to_integer(&v) / int(l1)
    }
}

pub fn rational_case_set(_a: &AffineSystem, u: Vec<i64>) -> ExcludedFamily {
    ExcludedFamily { u }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BestApproxSequence {
    /// Every best approximation found, before thinning.
    pub all: Vec<Vec<i64>>,
    /// The thinned, lacunary subsequence y_k.
    pub vectors: Vec<Vec<i64>>,
    /// Enclosures of η_k = ‖d(Aᵀy_k, ℤᵐ)‖.
    pub errors: Vec<Enclosure>,
    /// Certified min ‖y_{k+1}‖/‖y_k‖ over the thinned sequence.
    pub ratio: Option<Scalar>,
}

fn norm2_i(v: &[i64]) -> Scalar {
    v.iter().map(|&x| int(x) * int(x)).sum()
}

/// Greedy subsequence with ‖y_{k+1}‖ ≥ ratio·‖y_k‖.
pub fn thin(all: &[Vec<i64>], ratio_min: &Scalar) -> Vec<Vec<i64>> {
    let r2 = ratio_min * ratio_min;
    let mut out: Vec<Vec<i64>> = Vec::new();
    for y in all {
        if out.last().map_or(true, |l| norm2_i(y) >= &r2 * norm2_i(l)) {
            out.push(y.clone());
        }
    }
    out
}

fn eta(a: &AffineSystem, y: &[i64]) -> Enclosure {
    let (mut lo, mut hi) = (Scalar::zero(), Scalar::zero());
    for j in 0..a.m {
        let (l, h) = dist_interval_to_integer(&a.aty_enclosure(j, y));
        lo += &l * &l;
        hi += &h * &h;
    }
    let (l, _) = sqrt_bounds(&lo);
    let (_, h) = sqrt_bounds(&hi);
    Enclosure::new(l, h)
}

const SEARCH_BUDGET: u64 = 20_000_000;

/// Best approximations of A, thinned to ratio ≥ `ratio_min`. For n = m = 1
/// these are continued-fraction denominators; otherwise an exhaustive
/// sup-norm shell search up to `bound`.
pub fn best_approx_sequence(a: &AffineSystem, count: usize, ratio_min: &Scalar) -> Result<BestApproxSequence, BadApproxError> {
    let all: Vec<Vec<i64>> = if a.n == 1 && a.m == 1 {
        let cf = a.entry(0, 0).continued_fraction(count.saturating_mul(4).max(8))?;
        let (mut k0, mut k1) = (BigInt::zero(), BigInt::one());
        let mut dens: Vec<i64> = Vec::new();
        for (i, ai) in cf.iter().enumerate() {
            let k2 = if i == 0 { BigInt::one() } else { ai * &k1 + &k0 };
            if i > 0 {
                (k0, k1) = (k1, k2.clone());
            } else {
                (k0, k1) = (BigInt::zero(), BigInt::one());
            }
            let Some(d) = k2.to_i64() else { break };
            if dens.last() != Some(&d) {
                dens.push(d);
            }
        }
        dens.into_iter().map(|d| vec![d]).collect()
    } else {
        if rational_rank_check(a, 16).is_some() && a.entries.iter().all(|e| e.is_rational()) {
            return Err(BadApproxError::Rational);
        }
        let af: Vec<f64> = a.entries.iter().map(|e| e.to_f64()).collect();
        let eta_f = |y: &[i64]| -> f64 {
            (0..a.m)
                .map(|j| {
                    let v: f64 = y.iter().enumerate().map(|(i, &yi)| yi as f64 * af[i * a.m + j]).sum();
                    let d = v - v.round();
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        };
        let mut best = f64::INFINITY;
        let mut out = Vec::new();
        let mut visited = 0u64;
        let mut s = 1i64;
        while thin(&out, ratio_min).len() < count && visited < SEARCH_BUDGET {
            let mut shell_best: Option<(f64, Vec<i64>)> = None;
            shell(a.n, s, &mut |y| {
                visited += 1;
                let e = eta_f(y);
                if e < best && shell_best.as_ref().map_or(true, |(b, _)| e < *b) {
                    shell_best = Some((e, y.to_vec()));
                }
                true
            });
            if let Some((e, y)) = shell_best {
                if e < best * (1.0 - 1e-12) {
                    best = e;
                    out.push(y);
                }
            }
            s += 1;
        }
        out
    };
    let vectors: Vec<Vec<i64>> = thin(&all, ratio_min).into_iter().take(count).collect();
    if vectors.is_empty() {
        return Err(BadApproxError::EmptySequence);
    }
    let errors: Vec<Enclosure> = vectors.iter().map(|y| eta(a, y)).collect();
    let ratio = vectors
        .windows(2)
        .map(|w| {
            let q = norm2_i(&w[1]) / norm2_i(&w[0]);
            sqrt_bounds(&q).0
        })
        .min();
    Ok(BestApproxSequence { all, vectors, errors, ratio })
}

/// Rows y_kᵀ with targets Z_k = ℤ: Ẽ of this pair lies in Bad_A.
pub fn bad_reduction(seq: &BestApproxSequence) -> Result<(MatrixSequence, TargetFamily), BadApproxError> {
    if seq.vectors.is_empty() {
        return Err(BadApproxError::EmptySequence);
    }
    let rows: Vec<Vector> = seq.vectors.iter().map(|y| y.iter().map(|&v| int(v)).collect()).collect();
    let m = MatrixSequence::row_vectors(rows)?;
    Ok((m, TargetFamily::constant_lattice(vec![int(0)])))
}

/// Minimum of `eval` over ±q for 0 < ‖q‖_∞ ≤ q_bound; shells split across threads.
fn min_over_q<T: Ord + Send>(m: usize, q_bound: i64, eval: &(impl Fn(&[i64]) -> T + Sync)) -> Option<T> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(16) as i64;
    let results: Vec<Option<T>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                scope.spawn(move || {
                    let mut best: Option<T> = None;
                    let mut neg = vec![0i64; m];
                    let mut s = 1 + t;
                    while s <= q_bound {
                        shell(m, s, &mut |q| {
                            neg.iter_mut().zip(q).for_each(|(n, v)| *n = -v);
                            for v in [eval(q), eval(&neg)] {
                                if best.as_ref().map_or(true, |b| v < *b) {
                                    best = Some(v);
                                }
                            }
                            true
                        });
                        s += threads;
                    }
                    best
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("margin worker")).collect()
    });
    results.into_iter().flatten().min()
}

/// Lower bound of D·d(I/D, ℤ) for the integer interval I = [a, b].
fn dist_numerators(a: &BigInt, b: &BigInt, d: &BigInt) -> BigInt {
    let f = a.mod_floor(d);
    let g = &f + (b - a);
    if f.is_zero() || &g >= d {
        return BigInt::zero();
    }
    let two = BigInt::from(2);
    if &two * &f <= *d && *d <= &two * &g {
        return f.min(d - &g);
    }
    let dist = |x: &BigInt| x.clone().min(d - x);
    dist(&f).min(dist(&g))
}

/// Certified lower bound on min over 0 < ‖q‖_∞ ≤ q_bound of
/// ‖q‖^{m/n}·d(Aq − x, ℤⁿ), valid for every x in B(center, radius).
pub fn bad_margin(a: &AffineSystem, center: &[Scalar], radius: &Scalar, q_bound: u64) -> Result<Scalar, BadApproxError> {
    if center.len() != a.n {
        return Err(BadApproxError::Shape);
    }
    let q_bound = q_bound.max(1) as i64;
    // the square ‖q‖^{2m/n}·d² is minimized; one square root at the end
    let best = if a.m == a.n {
        // everything over a common denominator D, so each q costs integer work only
        let encl: Vec<Enclosure> = a.entries.iter().map(|e| e.enclosure()).collect();
        let d = crate::numeric::denom_lcm(
            encl.iter().flat_map(|e| [&e.lo, &e.hi]).chain(center.iter()).chain(std::iter::once(radius)),
        );
        let dd = big(d.clone());
        let num = |v: &Scalar| (v * &dd).to_integer();
        let lo: Vec<BigInt> = encl.iter().map(|e| num(&e.lo)).collect();
        let hi: Vec<BigInt> = encl.iter().map(|e| num(&e.hi)).collect();
        let c: Vec<BigInt> = center.iter().map(num).collect();
        let r = num(radius);
        let eval = |q: &[i64]| -> BigInt {
            let mut d2 = BigInt::zero();
            for i in 0..a.n {
                let (mut l, mut h) = (-&c[i] - &r, -&c[i] + &r);
                for (j, &qj) in q.iter().enumerate() {
                    let (x, y) = if qj >= 0 { (&lo[i * a.m + j], &hi[i * a.m + j]) } else { (&hi[i * a.m + j], &lo[i * a.m + j]) };
                    l += x * qj;
                    h += y * qj;
                }
                let di = dist_numerators(&l, &h, &d);
                d2 += &di * &di;
            }
            d2 * q.iter().map(|&x| x * x).sum::<i64>()
        };
        min_over_q(a.m, q_bound, &eval).map(|v| Scalar::new(v, &d * &d))
    } else {
        let exponent = Scalar::new(BigInt::from(a.m), BigInt::from(a.n));
        let eval = |q: &[i64]| -> Scalar {
            let mut d2 = Scalar::zero();
            for i in 0..a.n {
                let e = a.aq_enclosure(i, q);
                let shifted = Enclosure::new(&e.lo - &center[i] - radius, &e.hi - &center[i] + radius);
                let (l, _) = dist_interval_to_integer(&shifted);
                d2 += &l * &l;
            }
            if d2.is_zero() {
                return d2;
            }
            pow_rational_bounds(&norm2_i(q), &exponent, 64).0 * d2
        };
        min_over_q(a.m, q_bound, &eval)
    };
    best.map(|v| sqrt_bounds(&v).0).ok_or_else(|| BadApproxError::Precision("no q enumerated".into()))
}

/// 1 + αβ − 2α > 0.
pub fn moshchevitin_feasible(alpha: &Scalar, beta: &Scalar) -> bool {
    (Scalar::one() + alpha * beta - int(2) * alpha).is_positive()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> RealEntry {
        RealEntry::algebraic(Poly::from_ints(&[-1, -1, 1]), int(1), int(2)).unwrap()
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rational_rank_check(&AffineSystem::scalar(RealEntry::rational(ratio(1, 2))), 10), Some(vec![2]));
        assert_eq!(rational_rank_check(&AffineSystem::scalar(RealEntry::sqrt(2)), 1000), None);
        let row = AffineSystem::new(1, 2, vec![RealEntry::rational(ratio(1, 3)), RealEntry::rational(ratio(1, 6))]).unwrap();
        assert_eq!(rational_rank_check(&row, 10), Some(vec![6]));
    }

    #[test]
    fn rational_case_examples() {
        let a = AffineSystem::scalar(RealEntry::rational(ratio(1, 2)));
        let fam = rational_case_set(&a, vec![2]);
        assert!(!fam.excludes(&[ratio(1, 3)]));
        assert!(fam.excludes(&[ratio(1, 2)]));
        assert_eq!(bad_margin(&a, &[ratio(1, 3)], &int(0), 10_000).unwrap(), ratio(1, 6));
        let zero = AffineSystem::scalar(RealEntry::rational(int(0)));
        let f0 = rational_case_set(&zero, vec![1]);
        assert!(f0.excludes(&[int(3)]) && !f0.excludes(&[ratio(1, 3)]));
    }

    #[test]
    fn margin_examples() {
        let zero = AffineSystem::scalar(RealEntry::rational(int(0)));
        assert_eq!(bad_margin(&zero, &[ratio(1, 3)], &int(0), 50).unwrap(), ratio(1, 3));
        let half = AffineSystem::scalar(RealEntry::rational(ratio(1, 2)));
        assert_eq!(bad_margin(&half, &[ratio(1, 4)], &int(0), 100).unwrap(), ratio(1, 4));
        let one = AffineSystem::scalar(RealEntry::rational(int(1)));
        assert_eq!(bad_margin(&one, &[int(2)], &int(0), 5).unwrap(), int(0));
    }

    #[test]
    fn continued_fractions() {
        let s2 = RealEntry::sqrt(2).continued_fraction(8).unwrap();
        assert_eq!(s2, [1, 2, 2, 2, 2, 2, 2, 2].map(BigInt::from).to_vec());
        let g = golden().continued_fraction(10).unwrap();
        assert!(g.iter().all(|a| a.is_one()));
        assert_eq!(RealEntry::rational(ratio(3, 2)).continued_fraction(3), Err(BadApproxError::Rational));
    }

    #[test]
    fn best_approximations() {
        let a = AffineSystem::scalar(RealEntry::sqrt(2));
        let s = best_approx_sequence(&a, 6, &int(1)).unwrap();
        let d: Vec<i64> = s.all.iter().take(7).map(|v| v[0]).collect();
        assert_eq!(d, vec![1, 2, 5, 12, 29, 70, 169]);
        let g = AffineSystem::scalar(golden());
        let t = best_approx_sequence(&g, 4, &int(3)).unwrap();
        let d: Vec<i64> = t.vectors.iter().map(|v| v[0]).collect();
        assert_eq!(d, vec![1, 3, 13, 55]);
        assert!(t.ratio.clone().unwrap() >= int(3));
        assert!(t.errors.windows(2).all(|w| w[1].hi < w[0].lo));
        let (m, _) = bad_reduction(&t).unwrap();
        let rep = crate::matseq::analyze_lacunarity(&m, 10).unwrap();
        assert!(rep.lacunary() && rep.q.unwrap() >= int(3));
    }

    #[test]
    fn two_dimensional_search() {
        let a = AffineSystem::new(2, 1, vec![RealEntry::sqrt(2), RealEntry::sqrt(3)]).unwrap();
        let s = best_approx_sequence(&a, 3, &int(3)).unwrap();
        assert!(s.errors.windows(2).all(|w| w[1].hi < w[0].lo));
        assert!(s.ratio.unwrap() >= int(3));
    }

    #[test]
    fn moshchevitin_condition() {
        assert!(moshchevitin_feasible(&ratio(1, 2), &ratio(1, 2)));
        assert!(!moshchevitin_feasible(&ratio(9, 10), &ratio(1, 10)));
    }
}
