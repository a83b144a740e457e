//! Fuzzy memberships that down-weight points far from their class center.
//!
//! Each class of a binary subproblem is summarized by its mean and the
//! distance to its farthest member. A point's membership decays linearly
//! with the distance to its own center, and is scaled by `1 − μ` when the
//! point is closer to its own center than to the opposite one, `μ`
//! otherwise.

use crate::error::{Error, Result};
use crate::linalg::{distance, Matrix};
use crate::scalar::Real;

/// Center and radius of one class.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassGeometry<T> {
    pub center: Vec<T>,
    pub radius: T,
}

impl<T: Real> ClassGeometry<T> {
    pub fn from_rows(rows: &Matrix<T>) -> Result<Self> {
        let center = class_center(rows)?;
        let radius = class_radius(rows, &center)?;
        Ok(ClassGeometry { center, radius })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FuzzyParams<T> {
    pub mu: T,
    pub delta: T,
}

impl<T: Real> Default for FuzzyParams<T> {
    fn default() -> Self {
        FuzzyParams {
            mu: T::lit(0.1),
            delta: T::lit(1e-4),
        }
    }
}

impl<T: Real> FuzzyParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= T::zero() && self.mu <= T::one()) {
            return Err(Error::InvalidParam(format!(
                "mu {} outside [0, 1]",
                self.mu
            )));
        }
        if !(self.delta > T::zero()) {
            return Err(Error::InvalidParam(format!(
                "delta {} must be > 0",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Coordinatewise mean of the rows.
pub fn class_center<T: Real>(rows: &Matrix<T>) -> Result<Vec<T>> {
    if rows.rows() == 0 {
        return Err(Error::Empty);
    }
    let mut c = vec![T::zero(); rows.cols()];
    for r in rows.iter_rows() {
        for (ci, &v) in c.iter_mut().zip(r) {
            *ci += v;
        }
    }
    let k = T::from_usize(rows.rows()).unwrap();
    c.iter_mut().for_each(|v| *v /= k);
    Ok(c)
}

/// Largest Euclidean distance from `center` to any row.
pub fn class_radius<T: Real>(rows: &Matrix<T>, center: &[T]) -> Result<T> {
    if rows.rows() == 0 {
        return Err(Error::Empty);
    }
    Ok(rows
        .iter_rows()
        .map(|r| distance(r, center))
        .fold(T::zero(), T::max))
}

/// Membership of `x` in its own class.
///
/// The own-center distance is capped at the stored radius, so points that
/// arrive later from outside the training-time hypersphere receive the
/// branch's boundary value `coef·δ/(r+δ)` instead of a negative weight.
pub fn membership<T: Real>(
    x: &[T],
    own: &ClassGeometry<T>,
    other: &ClassGeometry<T>,
    p: FuzzyParams<T>,
) -> T {
    let d_own = distance(x, &own.center);
    let d_other = distance(x, &other.center);
    let coef = if d_own >= d_other {
        p.mu
    } else {
        T::one() - p.mu
    };
    coef * (T::one() - d_own.min(own.radius) / (own.radius + p.delta))
}

/// Memberships for every row of `rows`.
pub fn memberships<T: Real>(
    rows: &Matrix<T>,
    own: &ClassGeometry<T>,
    other: &ClassGeometry<T>,
    p: FuzzyParams<T>,
) -> Vec<T> {
    rows.iter_rows()
        .map(|r| membership(r, own, other, p))
        .collect()
}
