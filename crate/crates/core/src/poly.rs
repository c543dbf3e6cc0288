//! Univariate polynomials over ℚ with Sturm-sequence root isolation.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::numeric::{big, int, ratio, to_f64, Enclosure, Scalar};

/// Coefficients stored lowest degree first; trailing zeros are trimmed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly {
    coeffs: Vec<Scalar>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Scalar>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn from_ints(c: &[i64]) -> Self {
        Poly::new(c.iter().map(|&v| int(v)).collect())
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![] }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[Scalar] {
        &self.coeffs
    }

    /// Degree, with the zero polynomial reported as None.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn lead(&self) -> Scalar {
        self.coeffs.last().cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn eval(&self, x: &Scalar) -> Scalar {
        let mut acc = Scalar::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + to_f64(c))
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * int(i as i64))
                .collect(),
        )
    }

    pub fn scale(&self, s: &Scalar) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        self.scale(&self.lead().recip())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let z = Scalar::zero();
        Poly::new(
            (0..n)
                .map(|i| self.coeffs.get(i).unwrap_or(&z) - other.coeffs.get(i).unwrap_or(&z))
                .collect(),
        )
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Scalar::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// Euclidean division: self = q·d + r with deg r < deg d.
    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        assert!(!d.is_zero(), "division by the zero polynomial");
        let dd = d.degree().unwrap();
        let mut r = self.coeffs.clone();
        if r.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let lead_inv = d.lead().recip();
        let mut q = vec![Scalar::zero(); r.len() - dd];
        for i in (0..q.len()).rev() {
            let c = &r[i + dd] * &lead_inv;
            if !c.is_zero() {
                for (j, dc) in d.coeffs.iter().enumerate() {
                    r[i + j] -= &c * dc;
                }
            }
            q[i] = c;
        }
        r.truncate(dd);
        (Poly::new(q), Poly::new(r))
    }

    pub fn gcd(&self, other: &Poly) -> Poly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r.monic();
        }
        a.monic()
    }

    /// The product of the distinct irreducible factors (same real roots,
    /// all simple).
    pub fn squarefree(&self) -> Poly {
        if self.degree().unwrap_or(0) == 0 {
            return self.clone();
        }
        let g = self.gcd(&self.derivative());
        if g.degree() == Some(0) {
            self.monic()
        } else {
            self.div_rem(&g).0.monic()
        }
    }

    /// Divides out every factor (x − r) for a rational root r.
    pub fn deflate_root(&self, r: &Scalar) -> Poly {
        let lin = Poly::new(vec![-r.clone(), Scalar::one()]);
        let mut p = self.clone();
        while !p.is_zero() && p.eval(r).is_zero() {
            p = p.div_rem(&lin).0;
        }
        p
    }

    /// p(x + a).
    pub fn shift(&self, a: &Scalar) -> Poly {
        // Horner in polynomial arithmetic
        let xa = Poly::new(vec![a.clone(), Scalar::one()]);
        let mut acc = Poly::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(&xa);
            acc = acc.sub(&Poly::new(vec![-c.clone()]));
        }
        acc
    }

    /// x^deg · p(1/x).
    pub fn reversed(&self) -> Poly {
        let mut c = self.coeffs.clone();
        c.reverse();
        Poly::new(c)
    }

    /// Clears denominators and content so coefficients are coprime integers.
    pub fn primitive(&self) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        let l = crate::numeric::denom_lcm(&self.coeffs);
        let ints: Vec<BigInt> = self.coeffs.iter().map(|c| (c * big(l.clone())).to_integer()).collect();
        let g = crate::numeric::gcd_all(&ints);
        let mut p = Poly::new(ints.into_iter().map(|v| Scalar::new(v, g.clone())).collect());
        if p.lead().is_negative() {
            p = p.scale(&int(-1));
        }
        p
    }

    /// Cauchy bound: every root satisfies |z| < 1 + max |a_i / a_n|.
    pub fn root_bound(&self) -> Scalar {
        let lead = self.lead().abs();
        let m = self.coeffs[..self.coeffs.len().saturating_sub(1)]
            .iter()
            .map(|c| c.abs() / &lead)
            .max()
            .unwrap_or_else(Scalar::zero);
        m + Scalar::one()
    }
}

/// Sturm chain of a polynomial, used for exact counting of distinct
/// real roots in half-open intervals.
#[derive(Debug, Clone)]
pub struct SturmChain {
    chain: Vec<Poly>,
}

impl SturmChain {
    pub fn new(p: &Poly) -> Self {
        let p0 = p.primitive();
        let mut chain = vec![p0.clone()];
        let p1 = p0.derivative();
        if !p1.is_zero() {
            chain.push(p1.primitive());
            loop {
                let n = chain.len();
                let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
                if r.is_zero() {
                    break;
                }
                // keep the sign of −r while scaling to a primitive form
                let neg = r.scale(&int(-1));
                let prim = neg.primitive();
                let same_sign = prim.lead().is_positive() == neg.lead().is_positive();
                chain.push(if same_sign { prim } else { prim.scale(&int(-1)) });
            }
        }
        SturmChain { chain }
    }

    pub fn poly(&self) -> &Poly {
        &self.chain[0]
    }

    fn variations(signs: impl Iterator<Item = i8>) -> usize {
        let mut count = 0;
        let mut last = 0i8;
        for s in signs.filter(|&s| s != 0) {
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
        count
    }

    pub fn variations_at(&self, x: &Scalar) -> usize {
        Self::variations(self.chain.iter().map(|p| {
            let v = p.eval(x);
            if v.is_zero() {
                0
            } else if v.is_positive() {
                1
            } else {
                -1
            }
        }))
    }

    pub fn variations_at_pos_inf(&self) -> usize {
        Self::variations(self.chain.iter().map(|p| if p.lead().is_positive() { 1 } else { -1 }))
    }

    /// Number of distinct real roots in (a, b].
    pub fn count_in(&self, a: &Scalar, b: &Scalar) -> usize {
        self.variations_at(a).saturating_sub(self.variations_at(b))
    }

    /// Number of distinct real roots in (a, ∞).
    pub fn count_above(&self, a: &Scalar) -> usize {
        self.variations_at(a).saturating_sub(self.variations_at_pos_inf())
    }
}

/// Certified isolating interval of a single real root of a polynomial.
#[derive(Debug, Clone)]
pub struct IsolatedRoot {
    pub enclosure: Enclosure,
    /// Set when the root was recognized as an exact rational.
    pub exact: Option<Scalar>,
}

/// Tries small-denominator rationals near the enclosure midpoint (via
/// continued-fraction convergents) as exact roots.
fn rational_root_in(p: &Poly, enc: &Enclosure) -> Option<Scalar> {
    let mid = enc.mid();
    let mut x = mid.clone();
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    for _ in 0..40 {
        let a = crate::numeric::floor(&x);
        let h2 = &a * &h1 + &h0;
        let k2 = &a * &k1 + &k0;
        let cand = Scalar::new(h2.clone(), k2.clone());
        if enc.contains(&cand) {
            return p.eval(&cand).is_zero().then_some(cand);
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let frac = &x - big(a);
        if frac.is_zero() {
            break;
        }
        x = frac.recip();
    }
    None
}

/// Bisects an isolating interval (lo, hi] holding exactly one root of a
/// squarefree polynomial until hi − lo ≤ rel·|lo| (or the root is hit).
fn refine(p: &Poly, mut lo: Scalar, mut hi: Scalar, rel: &Scalar) -> IsolatedRoot {
    let mut slo = p.eval(&lo);
    if p.eval(&hi).is_zero() {
        return IsolatedRoot {
            enclosure: Enclosure::exact(hi.clone()),
            exact: Some(hi),
        };
    }
    let two = int(2);
    loop {
        let w = &hi - &lo;
        let scale = if lo.abs() > hi.abs() { hi.abs() } else { lo.abs() };
        let target = if scale.is_zero() { rel.clone() } else { rel * &scale };
        if w <= target {
            break;
        }
        let mid = (&lo + &hi) / &two;
        let sm = p.eval(&mid);
        if sm.is_zero() {
            return IsolatedRoot {
                enclosure: Enclosure::exact(mid.clone()),
                exact: Some(mid),
            };
        }
        if sm.is_positive() == slo.is_positive() {
            lo = mid;
            slo = sm;
        } else {
            hi = mid;
        }
    }
    let enclosure = Enclosure::new(lo, hi);
    let exact = rational_root_in(p, &enclosure);
    match exact {
        Some(r) => IsolatedRoot {
            enclosure: Enclosure::exact(r.clone()),
            exact: Some(r),
        },
        None => IsolatedRoot { enclosure, exact: None },
    }
}

/// Largest real root of `p` enclosed to relative width `rel`; `hint` is an
/// optional floating estimate used to bracket quickly.
pub fn largest_real_root(p: &Poly, rel: &Scalar, hint: Option<f64>) -> Option<IsolatedRoot> {
    let sf = p.squarefree();
    if sf.degree().unwrap_or(0) == 0 {
        return None;
    }
    let sturm = SturmChain::new(&sf);
    let bound = sf.root_bound();
    if sturm.count_above(&-bound.clone()) == 0 {
        return None;
    }
    if let Some(h) = hint.filter(|h| h.is_finite() && *h != 0.0) {
        // fast path: certify a tight bracket around the float estimate
        let hq = crate::numeric::from_f64(h);
        let eps = crate::numeric::from_f64(h.abs() * 1e-11);
        let lo = &hq - &eps;
        let hi = &hq + &eps;
        if sturm.count_above(&hi) == 0 && sturm.count_in(&lo, &hi) == 1 {
            return Some(refine(&sf, lo, hi, rel));
        }
    }
    // locate (lo, hi] containing only the largest root
    let mut hi = bound.clone();
    let mut lo = -bound;
    let two = int(2);
    loop {
        let mid = (&lo + &hi) / &two;
        let above = sturm.count_in(&mid, &hi);
        if above >= 1 {
            lo = mid;
            if above == 1 && sturm.count_in(&lo, &hi) == 1 {
                break;
            }
        } else {
            hi = mid;
        }
        if sturm.count_in(&lo, &hi) == 1 {
            break;
        }
    }
    Some(refine(&sf, lo, hi, rel))
}

/// All distinct real roots, ascending, each certified to relative width `rel`.
pub fn real_roots(p: &Poly, rel: &Scalar) -> Vec<IsolatedRoot> {
    let sf = p.squarefree();
    if sf.degree().unwrap_or(0) == 0 {
        return vec![];
    }
    let sturm = SturmChain::new(&sf);
    let bound = sf.root_bound();
    let mut stack = vec![(-bound.clone(), bound)];
    let mut isolated = Vec::new();
    let two = int(2);
    while let Some((a, b)) = stack.pop() {
        match sturm.count_in(&a, &b) {
            0 => {}
            1 => isolated.push((a, b)),
            _ => {
                let m = (&a + &b) / &two;
                stack.push((a, m.clone()));
                stack.push((m, b));
            }
        }
    }
    isolated.sort_by(|x, y| x.0.cmp(&y.0));
    isolated
        .into_iter()
        .map(|(a, b)| refine(&sf, a, b, rel))
        .collect()
}

pub fn default_rel() -> Scalar {
    ratio(1, 1_000_000_000_000)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_and_gcd() {
        // (x−1)²(x+2)
        let p = Poly::from_ints(&[2, -3, 0, 1]);
        let sf = p.squarefree();
        assert_eq!(sf, Poly::from_ints(&[-2, 1, 1]));
        let (q, r) = p.div_rem(&Poly::from_ints(&[-1, 1]));
        assert!(r.is_zero());
        assert_eq!(q, Poly::from_ints(&[-2, 1, 1]));
    }

    #[test]
    fn sturm_counts_sqrt2() {
        let p = Poly::from_ints(&[-2, 0, 1]);
        let s = SturmChain::new(&p);
        assert_eq!(s.count_in(&int(-2), &int(2)), 2);
        assert_eq!(s.count_in(&int(0), &int(2)), 1);
        assert_eq!(s.count_above(&int(2)), 0);
    }

    #[test]
    fn golden_ratio_squared_root() {
        // λ² − 3λ + 1, largest root (3+√5)/2
        let p = Poly::from_ints(&[1, -3, 1]);
        let r = largest_real_root(&p, &default_rel(), None).unwrap();
        let v = (3.0 + 5f64.sqrt()) / 2.0;
        assert!(r.exact.is_none());
        assert!(to_f64(&r.enclosure.lo) <= v + 1e-12 && to_f64(&r.enclosure.hi) >= v - 1e-12);
        assert!(r.enclosure.rel_width() < 1e-11);
    }

    #[test]
    fn exact_rational_roots_are_recognized() {
        // (x − 25)(x − 1/3)
        let p = Poly::new(vec![ratio(25, 3), ratio(-76, 3), int(1)]);
        let r = largest_real_root(&p, &default_rel(), Some(25.0000001)).unwrap();
        assert_eq!(r.exact, Some(int(25)));
        let all = real_roots(&p, &default_rel());
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].exact, Some(ratio(1, 3)));
    }

    #[test]
    fn shift_and_reverse() {
        let p = Poly::from_ints(&[-2, 0, 1]);
        // (x+1)² − 2 = x² + 2x − 1
        assert_eq!(p.shift(&int(1)), Poly::from_ints(&[-1, 2, 1]));
        assert_eq!(p.reversed(), Poly::from_ints(&[1, 0, -2]));
    }
}
