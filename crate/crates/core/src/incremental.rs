//! Growing and shrinking a trained binary model from stream batches.
//!
//! New points are screened by their dual gradient against the band of
//! projected gradients left by the last solve: only points falling outside
//! the band can change the optimum, so only those join the retained set and
//! trigger a warm-started re-solve. Retained points whose multiplier stays
//! below `φ` for `d` passes are forgotten.

use crate::binary::{BinaryModel, Hyperparams};
use crate::error::{Error, Result};
use crate::fuzzy::membership;
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;
use crate::solver::GradientBand;

/// Which statistic of the stored gradients bounds the screening band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum ScreenPolicy {
    /// `[m′_min, m′_max]` as left by the solver.
    #[default]
    Extrema,
    Mean,
    Median,
    Quartiles,
    /// Admit every point.
    Disabled,
}

impl ScreenPolicy {
    pub const ALL: [ScreenPolicy; 5] = [
        ScreenPolicy::Extrema,
        ScreenPolicy::Mean,
        ScreenPolicy::Median,
        ScreenPolicy::Quartiles,
        ScreenPolicy::Disabled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScreenPolicy::Extrema => "extrema",
            ScreenPolicy::Mean => "mean",
            ScreenPolicy::Median => "median",
            ScreenPolicy::Quartiles => "quartiles",
            ScreenPolicy::Disabled => "none",
        }
    }

    /// `(lo, hi)`; `None` admits everything.
    pub fn band<T: Real>(self, b: &GradientBand<T>) -> Option<(T, T)> {
        match self {
            ScreenPolicy::Extrema => Some((b.min_prime, b.max_prime)),
            ScreenPolicy::Mean => Some(b.mean),
            ScreenPolicy::Median => Some(b.median),
            ScreenPolicy::Quartiles => Some(b.quartiles),
            ScreenPolicy::Disabled => None,
        }
    }
}

impl std::str::FromStr for ScreenPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScreenPolicy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown screening policy {s:?}")))
    }
}

/// Forgetting configuration: a point is dropped once its multiplier has
/// been below `phi` on `d` decrement passes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Forgetting<T> {
    /// `None` disables forgetting.
    pub d: Option<u32>,
    pub phi: T,
}

impl<T: Real> Default for Forgetting<T> {
    fn default() -> Self {
        Forgetting {
            d: None,
            phi: T::lit(1e-6),
        }
    }
}

impl<T: Real> Forgetting<T> {
    pub fn validate(&self) -> Result<()> {
        if self.d == Some(0) {
            return Err(Error::InvalidParam(
                "forgetting score d must be >= 1".into(),
            ));
        }
        if !(self.phi > T::zero()) || !self.phi.is_finite() {
            return Err(Error::InvalidParam(format!("phi {} must be > 0", self.phi)));
        }
        Ok(())
    }
}

/// Occurrence counters of the retained points of one class.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ForgettingState {
    pub counts: Vec<u32>,
}

impl ForgettingState {
    pub fn zeroed(n: usize) -> Self {
        ForgettingState { counts: vec![0; n] }
    }
}

/// Indices of admitted rows per class.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Admitted {
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
}

impl Admitted {
    pub fn len(&self) -> usize {
        self.pos.len() + self.neg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn affine<T: Real>(u: &[T], x: &[T]) -> T {
    let n = x.len();
    dot(&u[..n], x) + u[n]
}

/// Dual gradient of a new negative point in the positive-plane problem.
pub fn gradient_neg<T: Real>(m: &BinaryModel<T>, x: &[T]) -> T {
    -affine(&m.u_plus, x) - T::one()
}

/// Dual gradient of a new positive point in the negative-plane problem.
pub fn gradient_pos<T: Real>(m: &BinaryModel<T>, x: &[T]) -> T {
    affine(&m.u_minus, x) - T::one()
}

fn outside<T: Real>(g: T, band: Option<(T, T)>) -> bool {
    match band {
        None => true,
        Some((lo, hi)) => g > hi || g < lo,
    }
}

/// Selects the new rows whose gradient falls outside the stored band.
pub fn screen<T: Real>(
    m: &BinaryModel<T>,
    pos: &Matrix<T>,
    neg: &Matrix<T>,
    policy: ScreenPolicy,
) -> Admitted {
    let band_pos = policy.band(&m.band_minus);
    let band_neg = policy.band(&m.band_plus);
    Admitted {
        pos: (0..pos.rows())
            .filter(|&i| outside(gradient_pos(m, pos.row(i)), band_pos))
            .collect(),
        neg: (0..neg.rows())
            .filter(|&i| outside(gradient_neg(m, neg.row(i)), band_neg))
            .collect(),
    }
}

fn check_dim<T: Real>(m: &BinaryModel<T>, rows: &Matrix<T>) -> Result<()> {
    if rows.rows() > 0 && rows.cols() != m.dim() {
        return Err(Error::Dimension {
            expected: m.dim(),
            got: rows.cols(),
        });
    }
    if !rows.is_finite() {
        return Err(Error::NonFinite("batch"));
    }
    Ok(())
}

/// Screens a batch, appends the admitted rows and re-solves warm-started.
/// Returns the admitted indices.
pub fn increment<T: Real>(
    m: &mut BinaryModel<T>,
    pos: &Matrix<T>,
    neg: &Matrix<T>,
    hp: &Hyperparams<T>,
    policy: ScreenPolicy,
) -> Result<Admitted> {
    check_dim(m, pos)?;
    check_dim(m, neg)?;
    let admitted = screen(m, pos, neg, policy);
    if admitted.is_empty() && !m.stale {
        return Ok(admitted);
    }
    for &i in &admitted.pos {
        let x = pos.row(i);
        m.retained_pos.push_row(x)?;
        m.s_pos
            .push(membership(x, &m.geom_pos, &m.geom_neg, hp.fuzzy));
        m.nu.push(T::zero());
        m.forget_pos.counts.push(0);
    }
    for &i in &admitted.neg {
        let x = neg.row(i);
        m.retained_neg.push_row(x)?;
        m.s_neg
            .push(membership(x, &m.geom_neg, &m.geom_pos, hp.fuzzy));
        m.alpha.push(T::zero());
        m.forget_neg.counts.push(0);
    }
    m.resolve(hp)?;
    Ok(admitted)
}

/// Counts and drops one class's rows; returns the keep mask.
fn forget_mask<T: Real>(mult: &[T], counts: &mut [u32], d: u32, phi: T) -> Vec<bool> {
    mult.iter()
        .zip(counts.iter_mut())
        .map(|(&a, c)| {
            if a < phi {
                *c += 1;
            }
            *c < d
        })
        .collect()
}

fn retain<V: Clone>(v: &mut Vec<V>, keep: &[bool]) {
    let mut k = keep.iter();
    v.retain(|_| *k.next().unwrap());
}

/// One forgetting pass. Returns the number of removed points.
pub fn decrement<T: Real>(m: &mut BinaryModel<T>, hp: &Hyperparams<T>) -> Result<usize> {
    let Some(d) = hp.forgetting.d else {
        return Ok(0);
    };
    let phi = hp.forgetting.phi;
    let mut pos_counts = m.forget_pos.counts.clone();
    let mut neg_counts = m.forget_neg.counts.clone();
    let keep_pos = forget_mask(&m.nu, &mut pos_counts, d, phi);
    let keep_neg = forget_mask(&m.alpha, &mut neg_counts, d, phi);
    if !keep_pos.contains(&true) {
        return Err(Error::ClassCollapse("positive"));
    }
    if !keep_neg.contains(&true) {
        return Err(Error::ClassCollapse("negative"));
    }
    let removed = keep_pos.iter().chain(&keep_neg).filter(|k| !**k).count();
    m.forget_pos.counts = pos_counts;
    m.forget_neg.counts = neg_counts;
    if removed == 0 {
        return Ok(0);
    }
    m.retained_pos.retain_rows(&keep_pos);
    m.retained_neg.retain_rows(&keep_neg);
    retain(&mut m.nu, &keep_pos);
    retain(&mut m.s_pos, &keep_pos);
    retain(&mut m.forget_pos.counts, &keep_pos);
    retain(&mut m.alpha, &keep_neg);
    retain(&mut m.s_neg, &keep_neg);
    retain(&mut m.forget_neg.counts, &keep_neg);
    m.recompute_primal(hp)?;
    m.stale = true;
    Ok(removed)
}

/// What one [`update`] did.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct UpdateReport {
    pub removed: usize,
    pub admitted: usize,
}

/// Forgetting pass followed by an incremental pass. The first update after
/// training skips forgetting.
pub fn update<T: Real>(
    m: &mut BinaryModel<T>,
    pos: &Matrix<T>,
    neg: &Matrix<T>,
    hp: &Hyperparams<T>,
    policy: ScreenPolicy,
) -> Result<UpdateReport> {
    check_dim(m, pos)?;
    check_dim(m, neg)?;
    let mut next = m.clone();
    let removed = if next.updates > 0 {
        decrement(&mut next, hp)?
    } else {
        0
    };
    let admitted = increment(&mut next, pos, neg, hp, policy)?.len();
    next.updates += 1;
    *m = next;
    Ok(UpdateReport { removed, admitted })
}
