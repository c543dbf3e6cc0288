//! Uniformly discrete target families Z_k.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::linalg::{norm2, vsub, Vector};
use crate::numeric::{big, ceil, dist_to_integer, floor, int, SqrtScalar, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TargetError {
    #[error("target family needs at least one base point or point set")]
    Empty,
    #[error("points of set {index} are not {delta}-separated")]
    NotSeparated { index: usize, delta: String },
    #[error("target dimension mismatch")]
    DimensionMismatch,
    #[error("delta must be positive")]
    NonPositiveDelta,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetKind {
    /// Z_k = y_k + ℤᵐ; the last base point repeats for larger k.
    LatticeTranslate { base_points: Vec<Vector> },
    /// Explicit finite Z_k; the last set repeats for larger k.
    ExplicitPoints { sets: Vec<Vec<Vector>> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetFamily {
    kind: TargetKind,
    delta: Scalar,
    dim: usize,
}

impl TargetFamily {
    pub fn lattice(base_points: Vec<Vector>) -> Result<Self, TargetError> {
        let dim = base_points.first().ok_or(TargetError::Empty)?.len();
        if base_points.iter().any(|p| p.len() != dim) {
            return Err(TargetError::DimensionMismatch);
        }
        Ok(TargetFamily { kind: TargetKind::LatticeTranslate { base_points }, delta: int(1), dim })
    }

    /// The same translate y + ℤᵐ for every k.
    pub fn constant_lattice(y: Vector) -> Self {
        TargetFamily::lattice(vec![y]).expect("nonempty family")
    }

    pub fn explicit(sets: Vec<Vec<Vector>>, delta: Scalar) -> Result<Self, TargetError> {
        if delta <= Scalar::zero() {
            return Err(TargetError::NonPositiveDelta);
        }
        let dim = sets
            .iter()
            .flat_map(|s| s.first())
            .map(|p| p.len())
            .next()
            .ok_or(TargetError::Empty)?;
        let d2 = &delta * &delta;
        for (index, s) in sets.iter().enumerate() {
            if s.iter().any(|p| p.len() != dim) {
                return Err(TargetError::DimensionMismatch);
            }
            for i in 0..s.len() {
                for j in i + 1..s.len() {
                    if norm2(&vsub(&s[i], &s[j])) <= d2 {
                        return Err(TargetError::NotSeparated { index, delta: crate::numeric::fmt_scalar(&delta) });
                    }
                }
            }
        }
        Ok(TargetFamily { kind: TargetKind::ExplicitPoints { sets }, delta, dim })
    }

    pub fn kind(&self) -> &TargetKind {
        &self.kind
    }

    pub fn delta(&self) -> &Scalar {
        &self.delta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn pick<T>(list: &[T], k: usize) -> &T {
        &list[k.saturating_sub(1).min(list.len() - 1)]
    }

    /// The points of Z_k within `radius` of `center` (k is 1-based).
    pub fn points_near(&self, k: usize, center: &[Scalar], radius: &Scalar) -> Vec<Vector> {
        let r2 = radius * radius;
        match &self.kind {
            TargetKind::LatticeTranslate { base_points } => {
                let y = Self::pick(base_points, k);
                let rel = vsub(center, y);
                let ranges: Vec<(BigInt, BigInt)> =
                    rel.iter().map(|c| (ceil(&(c - radius)), floor(&(c + radius)))).collect();
                let mut out = Vec::new();
                let mut cur: Vec<BigInt> = Vec::with_capacity(self.dim);
                enumerate_box(&ranges, &mut cur, &mut |z| {
                    let p: Vector = y.iter().zip(z).map(|(a, b)| a + big(b.clone())).collect();
                    if norm2(&vsub(&p, center)) <= r2 {
                        out.push(p);
                    }
                });
                out
            }
            TargetKind::ExplicitPoints { sets } => {
                let s = Self::pick(sets, k);
                let set: BTreeSet<&Vector> =
                    s.iter().filter(|p| norm2(&vsub(p, center)) <= r2).collect();
                set.into_iter().cloned().collect()
            }
        }
    }

    /// Exact distance from p to Z_k, kept as a square root.
    pub fn dist_to_targets(&self, k: usize, p: &[Scalar]) -> SqrtScalar {
        match &self.kind {
            TargetKind::LatticeTranslate { base_points } => {
                let y = Self::pick(base_points, k);
                let sq = p.iter().zip(y).fold(Scalar::zero(), |acc, (a, b)| {
                    let d = dist_to_integer(&(a - b));
                    acc + &d * &d
                });
                SqrtScalar::from_square(sq)
            }
            TargetKind::ExplicitPoints { sets } => {
                let s = Self::pick(sets, k);
                let sq = s.iter().map(|q| norm2(&vsub(q, p))).min().expect("nonempty point set");
                SqrtScalar::from_square(sq)
            }
        }
    }

    /// Packing bound on |points_near(…, radius)|.
    pub fn packing_bound(&self, radius: &Scalar) -> usize {
        let side = int(2) * radius / &self.delta + int(1);
        let v = crate::numeric::pow(&side, self.dim as i64);
        ceil(&v).to_usize().unwrap_or(usize::MAX)
    }
}

fn enumerate_box(ranges: &[(BigInt, BigInt)], cur: &mut Vec<BigInt>, f: &mut impl FnMut(&[BigInt])) {
    if cur.len() == ranges.len() {
        f(cur);
        return;
    }
    let (lo, hi) = &ranges[cur.len()];
    let mut z = lo.clone();
    while &z <= hi {
        cur.push(z.clone());
        enumerate_box(ranges, cur, f);
        cur.pop();
        z += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ratio;

    #[test]
    fn points_near_examples() {
        let z2 = TargetFamily::constant_lattice(vec![int(0), int(0)]);
        // (0,0) is at distance √0.32 ≈ 0.566 from (0.4, 0.4)
        assert!(z2.points_near(1, &[ratio(2, 5), ratio(2, 5)], &ratio(1, 2)).is_empty());
        let near = z2.points_near(1, &[ratio(2, 5), ratio(2, 5)], &ratio(3, 5));
        assert_eq!(near, vec![vec![int(0), int(0)]]);
        assert_eq!(z2.points_near(3, &[int(1), int(2)], &int(0)), vec![vec![int(1), int(2)]]);
        assert!(z2.points_near(1, &[ratio(1, 2), ratio(1, 2)], &ratio(1, 2)).is_empty());
    }

    #[test]
    fn distance_examples() {
        let half = TargetFamily::constant_lattice(vec![ratio(1, 2)]);
        assert_eq!(half.dist_to_targets(1, &[int(0)]).exact(), Some(ratio(1, 2)));
        let z2 = TargetFamily::constant_lattice(vec![int(0), int(0)]);
        assert_eq!(z2.dist_to_targets(1, &[ratio(1, 3), int(0)]).exact(), Some(ratio(1, 3)));
        let d = z2.dist_to_targets(1, &[ratio(1, 2), ratio(1, 2)]);
        assert_eq!(d.square, ratio(1, 2));
        assert!(d.exact().is_none());
    }

    #[test]
    fn explicit_checks_separation() {
        let ok = TargetFamily::explicit(vec![vec![vec![int(0)], vec![int(2)]]], int(1));
        assert!(ok.is_ok());
        let bad = TargetFamily::explicit(vec![vec![vec![int(0)], vec![ratio(1, 2)]]], int(1));
        assert!(matches!(bad, Err(TargetError::NotSeparated { .. })));
    }
}
