//! Exact rational scalars and certified bounds for the few irrational
//! quantities the engine needs (square roots, rational powers, logs).

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Every engine constant lives in this type; arithmetic never rounds.
pub type Scalar = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse `{0}` as an exact rational")]
pub struct ParseScalarError(pub String);

pub fn int(v: i64) -> Scalar {
    Scalar::from_integer(BigInt::from(v))
}

pub fn ratio(n: i64, d: i64) -> Scalar {
    Scalar::new(BigInt::from(n), BigInt::from(d))
}

pub fn big(v: BigInt) -> Scalar {
    Scalar::from_integer(v)
}

/// Parses `p/q`, an integer, or a finite decimal such as `-0.125` or `1e-6`.
pub fn parse_scalar(s: &str) -> Result<Scalar, ParseScalarError> {
    let t = s.trim();
    let err = || ParseScalarError(s.to_string());
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Scalar::new(n, d));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| err())?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (ip, fp) = digits.split_once('.').unwrap_or((digits, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(err());
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let all = format!("{ip}{fp}");
    let mut n = BigInt::from_str(if all.is_empty() { "0" } else { &all }).map_err(|_| err())?;
    if neg {
        n = -n;
    }
    let scale = exp - fp.len() as i32;
    let ten = BigInt::from(10);
    Ok(if scale >= 0 {
        Scalar::from_integer(n * num_traits::pow(ten, scale as usize))
    } else {
        Scalar::new(n, num_traits::pow(ten, (-scale) as usize))
    })
}

/// Lossless text form: `p` or `p/q`.
pub fn fmt_scalar(q: &Scalar) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn to_f64(q: &Scalar) -> f64 {
    if let Some(v) = q.to_f64() {
        if v.is_finite() && (v != 0.0 || q.is_zero()) {
            return v;
        }
    }
    // fall back to a log-domain evaluation for extreme magnitudes
    let l = log2_abs(q);
    let v = l.exp2();
    if q.is_negative() {
        -v
    } else {
        v
    }
}

/// Exact conversion of a finite float.
pub fn from_f64(x: f64) -> Scalar {
    Scalar::from_float(x).expect("finite float")
}

fn log2_big(v: &BigInt) -> f64 {
    let bits = v.bits();
    if bits <= 1000 {
        return v.to_f64().unwrap().abs().log2();
    }
    let shift = bits - 60;
    let top: BigInt = v.abs() >> shift;
    top.to_f64().unwrap().log2() + shift as f64
}

/// log2 |q| with ~1e-15 relative accuracy, valid for any nonzero magnitude.
pub fn log2_abs(q: &Scalar) -> f64 {
    log2_big(q.numer()) - log2_big(q.denom())
}

pub fn ln_abs(q: &Scalar) -> f64 {
    log2_abs(q) * std::f64::consts::LN_2
}

pub fn floor(q: &Scalar) -> BigInt {
    q.floor().to_integer()
}

pub fn ceil(q: &Scalar) -> BigInt {
    q.ceil().to_integer()
}

/// Nearest integer (ties toward +∞).
pub fn round_nearest(q: &Scalar) -> BigInt {
    floor(&(q + ratio(1, 2)))
}

/// |q − round(q)|, the exact distance to ℤ.
pub fn dist_to_integer(q: &Scalar) -> Scalar {
    let f = q - big(floor(q));
    let g = Scalar::one() - &f;
    if f < g {
        f
    } else {
        g
    }
}

/// floor(q·2^bits)/2^bits.
pub fn round_down_dyadic(q: &Scalar, bits: u32) -> Scalar {
    let scale = BigInt::one() << bits;
    Scalar::new(floor(&(q * big(scale.clone()))), scale)
}

pub fn round_up_dyadic(q: &Scalar, bits: u32) -> Scalar {
    let scale = BigInt::one() << bits;
    Scalar::new(ceil(&(q * big(scale.clone()))), scale)
}

pub fn pow(q: &Scalar, e: i64) -> Scalar {
    if e >= 0 {
        num_traits::pow(q.clone(), e as usize)
    } else {
        num_traits::pow(q.recip(), (-e) as usize)
    }
}

fn exact_root(v: &BigInt, n: u32) -> Option<BigInt> {
    if v.is_negative() {
        return None;
    }
    let r = v.nth_root(n);
    if num_traits::pow(r.clone(), n as usize) == *v {
        Some(r)
    } else {
        None
    }
}

/// Certified enclosure of the positive real n-th root of q ≥ 0, with
/// relative width about 2^-bits; exact when q is a perfect n-th power.
pub fn root_bounds(q: &Scalar, n: u32, bits: u32) -> (Scalar, Scalar) {
    assert!(!q.is_negative(), "root of a negative rational");
    assert!(n >= 1);
    if q.is_zero() {
        return (Scalar::zero(), Scalar::zero());
    }
    if let (Some(a), Some(b)) = (exact_root(q.numer(), n), exact_root(q.denom(), n)) {
        let r = Scalar::new(a, b);
        return (r.clone(), r);
    }
    // choose b so that floor(q·2^{nb})^{1/n} has at least `bits` bits
    let l2 = log2_abs(q);
    let extra = ((-l2) / n as f64).ceil().max(0.0) as u32;
    let b = bits + extra + 2;
    let scaled = floor(&(q * big(BigInt::one() << (n * b))));
    let a = scaled.nth_root(n);
    let den = BigInt::one() << b;
    (Scalar::new(a.clone(), den.clone()), Scalar::new(a + 1, den))
}

pub fn sqrt_bounds(q: &Scalar) -> (Scalar, Scalar) {
    root_bounds(q, 2, 96)
}

/// Enclosure of x^(p/q) for x > 0 and a small rational exponent.
pub fn pow_rational_bounds(x: &Scalar, exponent: &Scalar, bits: u32) -> (Scalar, Scalar) {
    assert!(x.is_positive());
    let p = exponent.numer().to_i64().expect("exponent numerator fits i64");
    let q = exponent.denom().to_u32().expect("exponent denominator fits u32");
    let base = pow(x, p.abs());
    let (lo, hi) = root_bounds(&base, q, bits + 8);
    if p >= 0 {
        (lo, hi)
    } else if lo.is_zero() {
        unreachable!("positive base has positive root bound")
    } else {
        (hi.recip(), lo.recip())
    }
}

/// A closed rational interval certified to contain a real quantity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Enclosure {
    pub lo: Scalar,
    pub hi: Scalar,
}

impl Enclosure {
    pub fn new(lo: Scalar, hi: Scalar) -> Self {
        debug_assert!(lo <= hi);
        Enclosure { lo, hi }
    }

    pub fn exact(v: Scalar) -> Self {
        Enclosure { lo: v.clone(), hi: v }
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn width(&self) -> Scalar {
        &self.hi - &self.lo
    }

    pub fn mid(&self) -> Scalar {
        (&self.lo + &self.hi) / int(2)
    }

    pub fn mid_f64(&self) -> f64 {
        to_f64(&self.mid())
    }

    /// width / |lo|; zero for exact enclosures.
    pub fn rel_width(&self) -> f64 {
        if self.is_exact() {
            return 0.0;
        }
        to_f64(&(self.width() / self.lo.abs()))
    }

    pub fn contains(&self, v: &Scalar) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    /// Square root of an enclosure of a nonnegative quantity.
    pub fn sqrt(&self) -> Enclosure {
        let (lo, _) = sqrt_bounds(&self.lo);
        let (_, hi) = sqrt_bounds(&self.hi);
        Enclosure { lo, hi }
    }
}

impl fmt::Display for Enclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_exact() {
            write!(f, "{}", fmt_scalar(&self.lo))
        } else {
            write!(f, "[{:.12e}, {:.12e}]", to_f64(&self.lo), to_f64(&self.hi))
        }
    }
}

/// A nonnegative real of the form √square, kept exact via its square.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqrtScalar {
    pub square: Scalar,
}

impl SqrtScalar {
    pub fn from_square(square: Scalar) -> Self {
        assert!(!square.is_negative());
        SqrtScalar { square }
    }

    pub fn from_value(v: &Scalar) -> Self {
        SqrtScalar { square: v * v }
    }

    pub fn exact(&self) -> Option<Scalar> {
        let (lo, hi) = sqrt_bounds(&self.square);
        (lo == hi).then_some(lo)
    }

    pub fn lower(&self) -> Scalar {
        sqrt_bounds(&self.square).0
    }

    pub fn upper(&self) -> Scalar {
        sqrt_bounds(&self.square).1
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.square).sqrt()
    }

    /// Exact comparison with a rational.
    pub fn cmp_scalar(&self, v: &Scalar) -> std::cmp::Ordering {
        if v.is_negative() {
            return std::cmp::Ordering::Greater;
        }
        self.square.cmp(&(v * v))
    }
}

/// A scalar extended with +∞, used for margins over empty horizons.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bound {
    Finite(Scalar),
    Infinite,
}

impl Bound {
    pub fn min(self, other: Bound) -> Bound {
        std::cmp::min(self, other)
    }

    pub fn finite(&self) -> Option<&Scalar> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Infinite => None,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(v) => write!(f, "{}", fmt_scalar(v)),
            Bound::Infinite => write!(f, "inf"),
        }
    }
}

pub fn sign(v: &Scalar) -> Sign {
    if v.is_zero() {
        Sign::NoSign
    } else if v.is_negative() {
        Sign::Minus
    } else {
        Sign::Plus
    }
}

/// gcd of a list of integers (0 for an empty or all-zero list).
pub fn gcd_all<'a>(vals: impl IntoIterator<Item = &'a BigInt>) -> BigInt {
    vals.into_iter().fold(BigInt::zero(), |g, v| g.gcd(v))
}

/// lcm of denominators.
pub fn denom_lcm<'a>(vals: impl IntoIterator<Item = &'a Scalar>) -> BigInt {
    vals.into_iter().fold(BigInt::one(), |l, v| l.lcm(v.denom()))
}

/// Serde adapter storing a scalar as its `p/q` string.
pub mod serde_scalar {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Scalar, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_scalar(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Scalar, D::Error> {
        let s = String::deserialize(d)?;
        parse_scalar(&s).map_err(serde::de::Error::custom)
    }
}

pub mod serde_scalar_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Scalar], s: S) -> Result<S::Ok, S::Error> {
        let strs: Vec<String> = v.iter().map(fmt_scalar).collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Scalar>, D::Error> {
        let strs = Vec::<String>::deserialize(d)?;
        strs.iter()
            .map(|s| parse_scalar(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse_scalar("3/6").unwrap(), ratio(1, 2));
        assert_eq!(parse_scalar("-0.125").unwrap(), ratio(-1, 8));
        assert_eq!(parse_scalar("1e-3").unwrap(), ratio(1, 1000));
        assert_eq!(parse_scalar("2.5E1").unwrap(), int(25));
        assert_eq!(parse_scalar(" 7 ").unwrap(), int(7));
        assert!(parse_scalar("1/0").is_err());
        assert!(parse_scalar("abc").is_err());
        assert!(parse_scalar(".").is_err());
    }

    #[test]
    fn sqrt_bounds_exact_and_inexact() {
        assert_eq!(sqrt_bounds(&ratio(9, 4)), (ratio(3, 2), ratio(3, 2)));
        let (lo, hi) = sqrt_bounds(&int(2));
        assert!(&lo * &lo <= int(2) && &hi * &hi >= int(2));
        assert!(to_f64(&(&hi - &lo)) < 1e-25);
        let tiny = ratio(1, 3) * pow(&int(10), -40);
        let (lo, hi) = sqrt_bounds(&tiny);
        assert!(&lo * &lo <= tiny && &hi * &hi >= tiny);
        assert!(to_f64(&((&hi - &lo) / &lo)) < 1e-20);
    }

    #[test]
    fn rational_power_bounds() {
        let (lo, hi) = pow_rational_bounds(&int(4), &ratio(1, 2), 64);
        assert_eq!((lo, hi), (int(2), int(2)));
        let (lo, hi) = pow_rational_bounds(&int(2), &ratio(8, 5), 64);
        let exact = 2f64.powf(1.6);
        assert!(to_f64(&lo) <= exact * (1.0 + 1e-15) && exact <= to_f64(&hi) * (1.0 + 1e-15));
        assert!(lo < hi && to_f64(&((&hi - &lo) / &lo)) < 1e-18);
        let (lo, hi) = pow_rational_bounds(&int(2), &ratio(-1, 2), 64);
        assert!(to_f64(&lo) <= 0.5f64.sqrt() + 1e-15 && to_f64(&hi) >= 0.5f64.sqrt() - 1e-15);
    }

    #[test]
    fn dist_to_integer_is_symmetric() {
        assert_eq!(dist_to_integer(&ratio(-5, 6)), ratio(1, 6));
        assert_eq!(dist_to_integer(&ratio(7, 3)), ratio(1, 3));
        assert_eq!(dist_to_integer(&int(4)), int(0));
    }

    #[test]
    fn logs_of_huge_values() {
        let v = pow(&int(3), 2000);
        assert!((log2_abs(&v) - 2000.0 * 3f64.log2()).abs() < 1e-9);
        assert!((to_f64(&pow(&int(2), -1000)).log2() + 1000.0).abs() < 1e-9);
    }
}
