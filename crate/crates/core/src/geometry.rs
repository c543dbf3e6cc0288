//! Balls, slabs and the nesting order used to referee moves.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, norm2, vsub, Vector};
use crate::numeric::{sqrt_bounds, Enclosure, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("slab normal is zero")]
    ZeroNormal,
    #[error("ball radius must be positive")]
    NonPositiveRadius,
}

/// Closed ball B(center, radius).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ball {
    #[serde(with = "crate::numeric::serde_scalar_vec")]
    pub center: Vector,
    #[serde(with = "crate::numeric::serde_scalar")]
    pub radius: Scalar,
}

impl Ball {
    pub fn new(center: Vector, radius: Scalar) -> Result<Self, GeometryError> {
        if !radius.is_positive() {
            return Err(GeometryError::NonPositiveRadius);
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains_point(&self, x: &[Scalar]) -> bool {
        norm2(&vsub(x, &self.center)) <= &self.radius * &self.radius
    }
}

/// {x : |normal·x − offset| ≤ halfwidth·‖normal‖}; the halfwidth is a
/// Euclidean distance regardless of how the normal is scaled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlabConstraint {
    #[serde(with = "crate::numeric::serde_scalar_vec")]
    pub normal: Vector,
    #[serde(with = "crate::numeric::serde_scalar")]
    pub offset: Scalar,
    #[serde(with = "crate::numeric::serde_scalar")]
    pub halfwidth: Scalar,
}

impl SlabConstraint {
    pub fn new(normal: Vector, offset: Scalar, halfwidth: Scalar) -> Result<Self, GeometryError> {
        if normal.iter().all(|v| v.is_zero()) {
            return Err(GeometryError::ZeroNormal);
        }
        Ok(SlabConstraint { normal, offset, halfwidth })
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// |normal·x − offset|, the unnormalized distance to the centerline.
    pub fn residual(&self, x: &[Scalar]) -> Scalar {
        (dot(&self.normal, x) - &self.offset).abs()
    }

    pub fn with_halfwidth(&self, h: Scalar) -> SlabConstraint {
        SlabConstraint { halfwidth: h, ..self.clone() }
    }

    pub fn contains_point(&self, x: &[Scalar]) -> bool {
        let s = self.residual(x);
        &s * &s <= &self.halfwidth * &self.halfwidth * norm2(&self.normal)
    }
}

fn check_dims(a: usize, b: usize) -> Result<(), GeometryError> {
    if a == b {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch(a, b))
    }
}

/// inner ≤ outer in the nesting order: ρ₂ + d(x₁, x₂) ≤ ρ₁.
pub fn schmidt_leq(inner: &Ball, outer: &Ball) -> Result<bool, GeometryError> {
    check_dims(inner.dim(), outer.dim())?;
    let gap = &outer.radius - &inner.radius;
    if gap.is_negative() {
        return Ok(false);
    }
    Ok(&gap * &gap >= norm2(&vsub(&outer.center, &inner.center)))
}

/// Enclosure of max(0, d(center, L)/‖n‖ − halfwidth − radius). Exact
/// whenever ‖normal‖ is rational.
pub fn slab_ball_distance_enclosure(ball: &Ball, slab: &SlabConstraint) -> Result<Enclosure, GeometryError> {
    check_dims(ball.dim(), slab.dim())?;
    let nn = norm2(&slab.normal);
    if nn.is_zero() {
        return Err(GeometryError::ZeroNormal);
    }
    let s = slab.residual(&ball.center);
    let (nlo, nhi) = sqrt_bounds(&nn);
    let clamp = |v: Scalar| if v.is_negative() { Scalar::zero() } else { v };
    let lo = clamp(&s / &nhi - &slab.halfwidth - &ball.radius);
    let hi = clamp(&s / &nlo - &slab.halfwidth - &ball.radius);
    Ok(Enclosure::new(lo, hi))
}

/// Certified lower bound on the ball-to-slab gap (exact when ‖normal‖ is rational).
pub fn slab_ball_distance(ball: &Ball, slab: &SlabConstraint) -> Result<Scalar, GeometryError> {
    Ok(slab_ball_distance_enclosure(ball, slab)?.lo)
}

/// Exactly decides slab_ball_distance > margin via s² > (h + r + m)²‖n‖².
pub fn slab_disjoint_certificate(ball: &Ball, slab: &SlabConstraint, margin: &Scalar) -> bool {
    if ball.dim() != slab.dim() {
        return false;
    }
    let s = slab.residual(&ball.center);
    let t = &slab.halfwidth + &ball.radius + margin;
    if t.is_negative() {
        return true;
    }
    &s * &s > &t * &t * norm2(&slab.normal)
}

/// Exactly decides d(x, slab centerline) > clearance, without a radius.
pub fn point_clears(x: &[Scalar], slab: &SlabConstraint, clearance: &Scalar) -> bool {
    let s = slab.residual(x);
    let t = &slab.halfwidth + clearance;
    &s * &s > &t * &t * norm2(&slab.normal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{int, ratio};

    fn ball(c: &[Scalar], r: Scalar) -> Ball {
        Ball::new(c.to_vec(), r).unwrap()
    }

    #[test]
    fn nesting_examples() {
        let outer = ball(&[int(0)], int(1));
        assert!(schmidt_leq(&ball(&[int(0)], ratio(1, 2)), &outer).unwrap());
        assert!(!schmidt_leq(&ball(&[ratio(3, 5)], ratio(1, 2)), &outer).unwrap());
        assert!(schmidt_leq(&ball(&[ratio(1, 2)], ratio(1, 2)), &outer).unwrap());
        assert!(schmidt_leq(&ball(&[int(0)], int(1)), &ball(&[int(0), int(0)], int(2))).is_err());
    }

    #[test]
    fn slab_distance_examples() {
        let b = ball(&[int(0), int(0)], int(1));
        let s = SlabConstraint::new(vec![int(1), int(0)], int(3), ratio(1, 2)).unwrap();
        assert_eq!(slab_ball_distance(&b, &s).unwrap(), ratio(3, 2));
        let through = SlabConstraint::new(vec![int(1), int(1)], int(0), int(0)).unwrap();
        assert_eq!(slab_ball_distance(&b, &through).unwrap(), int(0));
        let p = SlabConstraint::new(vec![int(1)], ratio(9, 10), ratio(1, 10)).unwrap();
        assert_eq!(slab_ball_distance(&ball(&[int(0)], ratio(1, 5)), &p).unwrap(), ratio(3, 5));
        assert!(SlabConstraint::new(vec![int(0)], int(0), int(0)).is_err());
    }

    #[test]
    fn certificate_is_strict() {
        let b = ball(&[int(0), int(0)], int(1));
        let s = SlabConstraint::new(vec![int(2), int(0)], int(6), ratio(1, 2)).unwrap();
        assert!(slab_disjoint_certificate(&b, &s, &int(1)));
        assert!(!slab_disjoint_certificate(&b, &s, &ratio(3, 2)));
        let hit = SlabConstraint::new(vec![int(1), int(0)], ratio(1, 2), int(0)).unwrap();
        assert!(!slab_disjoint_certificate(&b, &hit, &int(0)));
    }

    #[test]
    fn irrational_norm_lower_bound() {
        let b = ball(&[int(0), int(0)], ratio(1, 10));
        let s = SlabConstraint::new(vec![int(1), int(1)], int(2), int(0)).unwrap();
        let e = slab_ball_distance_enclosure(&b, &s).unwrap();
        let v = 2f64.sqrt() - 0.1;
        assert!(crate::numeric::to_f64(&e.lo) <= v && crate::numeric::to_f64(&e.hi) >= v - 1e-15);
        assert!(e.rel_width() < 1e-20);
    }
}
