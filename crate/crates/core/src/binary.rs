//! Two-class fuzzy bounded twin SVM.
//!
//! Two non-parallel planes are fitted, each close to one class and at unit
//! functional distance from the other. With `H₊ = [Z₊, e]`, `H₋ = [Z₋, e]`:
//!
//! ```text
//! u₊ = −(H₊ᵀH₊ + C₁I)⁻¹ H₋ᵀ α,   0 ≤ α ≤ C₃ s₋
//! u₋ =  (H₋ᵀH₋ + C₂I)⁻¹ H₊ᵀ ν,   0 ≤ ν ≤ C₄ s₊
//! ```
//!
//! A point is assigned to the class whose plane is nearer.

use crate::error::{Error, Result};
use crate::fuzzy::{memberships, ClassGeometry, FuzzyParams};
use crate::incremental::{Forgetting, ForgettingState};
use crate::linalg::{dot, norm, Matrix};
use crate::scalar::Real;
use crate::solver::{
    regularized_inverse, solve, GradientBand, InversionRoute, SolverConfig, SolverContext,
    SolverState,
};

/// Which plane of a twin model, or which class of a binary node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> i8 {
        match self {
            Side::Plus => 1,
            Side::Minus => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparams<T> {
    /// Regularization of the positive plane.
    pub c1: T,
    /// Regularization of the negative plane.
    pub c2: T,
    /// Penalty on negative points violating the positive plane's margin.
    pub c3: T,
    /// Penalty on positive points violating the negative plane's margin.
    pub c4: T,
    pub fuzzy: FuzzyParams<T>,
    pub solver: SolverConfig<T>,
    pub forgetting: Forgetting<T>,
}

impl<T: Real> Hyperparams<T> {
    /// Ties `c3 = c1` and `c4 = c2`.
    pub fn two_dim(c1: T, c2: T) -> Self {
        Hyperparams {
            c1,
            c2,
            c3: c1,
            c4: c2,
            fuzzy: FuzzyParams::default(),
            solver: SolverConfig::default(),
            forgetting: Forgetting::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, c) in [
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
        ] {
            if !(c > T::zero()) || !c.is_finite() {
                return Err(Error::InvalidParam(format!("{name} = {c} must be > 0")));
            }
        }
        self.fuzzy.validate()?;
        self.solver.validate()?;
        self.forgetting.validate()
    }
}

impl<T: Real> Default for Hyperparams<T> {
    fn default() -> Self {
        Self::two_dim(T::one(), T::one())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinaryModel<T> {
    /// `[ω₊; b₊]`
    pub u_plus: Vec<T>,
    /// `[ω₋; b₋]`
    pub u_minus: Vec<T>,
    /// One multiplier per retained negative point.
    pub alpha: Vec<T>,
    /// One multiplier per retained positive point.
    pub nu: Vec<T>,
    pub retained_pos: Matrix<T>,
    pub retained_neg: Matrix<T>,
    pub s_pos: Vec<T>,
    pub s_neg: Vec<T>,
    pub geom_pos: ClassGeometry<T>,
    pub geom_neg: ClassGeometry<T>,
    /// Screening band of the positive-plane problem (negative points).
    pub band_plus: GradientBand<T>,
    /// Screening band of the negative-plane problem (positive points).
    pub band_minus: GradientBand<T>,
    pub forget_pos: ForgettingState,
    pub forget_neg: ForgettingState,
    pub converged: bool,
    pub degenerate: bool,
    /// Completed update calls.
    pub updates: u64,
    /// Completed solver runs; feeds per-solve seeds.
    pub solves: u64,
    pub seed: u64,
    /// Multipliers changed since the last solve (forgetting removed points).
    pub stale: bool,
}

pub(crate) fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a simple combination.
    let mut z =
        seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trains a node from feature-mapped rows of the positive and negative class.
pub fn train_binary<T: Real>(
    pos: &Matrix<T>,
    neg: &Matrix<T>,
    hp: &Hyperparams<T>,
) -> Result<BinaryModel<T>> {
    hp.validate()?;
    if pos.rows() == 0 {
        return Err(Error::InvalidParam("positive class is empty".into()));
    }
    if neg.rows() == 0 {
        return Err(Error::InvalidParam("negative class is empty".into()));
    }
    if pos.cols() != neg.cols() {
        return Err(Error::Dimension {
            expected: pos.cols(),
            got: neg.cols(),
        });
    }
    let geom_pos = ClassGeometry::from_rows(pos)?;
    let geom_neg = ClassGeometry::from_rows(neg)?;
    let s_pos = memberships(pos, &geom_pos, &geom_neg, hp.fuzzy);
    let s_neg = memberships(neg, &geom_neg, &geom_pos, hp.fuzzy);
    let m = pos.cols() + 1;
    let mut model = BinaryModel {
        u_plus: vec![T::zero(); m],
        u_minus: vec![T::zero(); m],
        alpha: vec![T::zero(); neg.rows()],
        nu: vec![T::zero(); pos.rows()],
        retained_pos: pos.clone(),
        retained_neg: neg.clone(),
        s_pos,
        s_neg,
        geom_pos,
        geom_neg,
        band_plus: GradientBand::default(),
        band_minus: GradientBand::default(),
        forget_pos: ForgettingState::zeroed(pos.rows()),
        forget_neg: ForgettingState::zeroed(neg.rows()),
        converged: false,
        degenerate: false,
        updates: 0,
        solves: 0,
        seed: hp.solver.seed,
        stale: false,
    };
    model.resolve(hp)?;
    Ok(model)
}

impl<T: Real> BinaryModel<T> {
    /// Width of the mapped feature space.
    pub fn dim(&self) -> usize {
        self.retained_pos.cols()
    }

    /// Retained points across both classes.
    pub fn n_retained(&self) -> usize {
        self.retained_pos.rows() + self.retained_neg.rows()
    }

    /// Dual problem of the positive plane: own rows are positive, dual
    /// variables belong to negative points.
    pub fn plus_problem(&self, hp: &Hyperparams<T>) -> Result<SolverContext<T>> {
        SolverContext::precompute(
            self.retained_pos.augmented(T::one()),
            self.retained_neg.augmented(T::one()),
            hp.c1,
        )
    }

    /// Dual problem of the negative plane, in the same canonical form; its
    /// solver stack is `−u₋`.
    pub fn minus_problem(&self, hp: &Hyperparams<T>) -> Result<SolverContext<T>> {
        SolverContext::precompute(
            self.retained_neg.augmented(T::one()),
            self.retained_pos.augmented(T::one()),
            hp.c2,
        )
    }

    pub fn upper_alpha(&self, hp: &Hyperparams<T>) -> Vec<T> {
        self.s_neg.iter().map(|&s| hp.c3 * s).collect()
    }

    pub fn upper_nu(&self, hp: &Hyperparams<T>) -> Vec<T> {
        self.s_pos.iter().map(|&s| hp.c4 * s).collect()
    }

    /// Re-solves both duals warm-started from the current multipliers.
    pub(crate) fn resolve(&mut self, hp: &Hyperparams<T>) -> Result<()> {
        let plus = self.plus_problem(hp)?;
        let minus = self.minus_problem(hp)?;
        let mut cfg = hp.solver;

        let mut st =
            SolverState::warm(&plus, std::mem::take(&mut self.alpha), self.upper_alpha(hp))?;
        cfg.seed = mix_seed(self.seed, self.solves, 1);
        let rep_plus = solve(&plus, &mut st, &cfg)?;
        self.alpha = st.alpha;
        self.u_plus = st.u;
        self.band_plus = st.band;

        let mut st = SolverState::warm(&minus, std::mem::take(&mut self.nu), self.upper_nu(hp))?;
        cfg.seed = mix_seed(self.seed, self.solves, 2);
        let rep_minus = solve(&minus, &mut st, &cfg)?;
        self.nu = st.alpha;
        self.u_minus = st.u.iter().map(|&v| -v).collect();
        self.band_minus = st.band;

        self.solves += 1;
        self.converged = rep_plus.converged && rep_minus.converged;
        self.stale = false;
        self.refresh_degenerate();
        Ok(())
    }

    /// Recomputes both stacks from the current multipliers without
    /// re-optimizing them.
    pub(crate) fn recompute_primal(&mut self, hp: &Hyperparams<T>) -> Result<()> {
        let (u_plus, u_minus) = self.primal_from_multipliers(hp)?;
        self.u_plus = u_plus;
        self.u_minus = u_minus;
        self.refresh_degenerate();
        Ok(())
    }

    /// `(u₊, u₋)` from the multipliers through the regularized inverses,
    /// independent of any solver context.
    pub fn primal_from_multipliers(&self, hp: &Hyperparams<T>) -> Result<(Vec<T>, Vec<T>)> {
        let h_pos = self.retained_pos.augmented(T::one());
        let h_neg = self.retained_neg.augmented(T::one());
        let p1 = regularized_inverse(
            &h_pos,
            hp.c1,
            InversionRoute::for_shape(h_pos.rows(), h_pos.cols()),
        )?;
        let p2 = regularized_inverse(
            &h_neg,
            hp.c2,
            InversionRoute::for_shape(h_neg.rows(), h_neg.cols()),
        )?;
        let u_plus = p1
            .mul_vec(&h_neg.tr_mul_vec(&self.alpha))
            .into_iter()
            .map(|v| -v)
            .collect();
        let u_minus = p2.mul_vec(&h_pos.tr_mul_vec(&self.nu));
        Ok((u_plus, u_minus))
    }

    /// Largest relative deviation of the stored stacks from
    /// [`BinaryModel::primal_from_multipliers`].
    pub fn primal_residual(&self, hp: &Hyperparams<T>) -> Result<T> {
        let (p, m) = self.primal_from_multipliers(hp)?;
        let rel = |stored: &[T], fresh: &[T]| {
            let diff: Vec<T> = stored.iter().zip(fresh).map(|(&a, &b)| a - b).collect();
            norm(&diff) / (T::one() + norm(stored))
        };
        Ok(rel(&self.u_plus, &p).max(rel(&self.u_minus, &m)))
    }

    fn refresh_degenerate(&mut self) {
        let n = self.dim();
        self.degenerate = norm(&self.u_plus[..n]) <= T::min_positive_value()
            || norm(&self.u_minus[..n]) <= T::min_positive_value();
    }

    fn stack(&self, side: Side) -> &[T] {
        match side {
            Side::Plus => &self.u_plus,
            Side::Minus => &self.u_minus,
        }
    }

    /// `|xᵀω + b|` for one plane.
    pub fn plane_residual(&self, x: &[T], side: Side) -> T {
        let u = self.stack(side);
        let n = self.dim();
        (dot(&u[..n], x) + u[n]).abs()
    }

    /// Perpendicular distance `|xᵀω + b| / ‖ω‖`.
    pub fn plane_distance(&self, x: &[T], side: Side) -> Result<T> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let w = norm(&self.stack(side)[..self.dim()]);
        if w <= T::min_positive_value() {
            return Err(Error::DegeneratePlane);
        }
        Ok(self.plane_residual(x, side) / w)
    }

    /// Nearest plane wins; ties go to [`Side::Plus`]. A plane with a zero
    /// normal is compared by its unnormalized residual.
    pub fn classify(&self, x: &[T]) -> Result<Side> {
        let dist = |side| match self.plane_distance(x, side) {
            Err(Error::DegeneratePlane) => Err(self.plane_residual(x, side)),
            other => Ok(other),
        };
        let (dp, dm) = match (dist(Side::Plus), dist(Side::Minus)) {
            (Ok(p), Ok(m)) => (p?, m?),
            (Err(p), Ok(m)) => (p, m?),
            (Ok(p), Err(m)) => (p?, m),
            (Err(_), Err(_)) => return Err(Error::DegeneratePlane),
        };
        Ok(if dp <= dm { Side::Plus } else { Side::Minus })
    }
}
