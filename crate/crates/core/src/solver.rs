//! Dual coordinate descent with shrinking for one bounded twin-SVM dual:
//!
//! ```text
//! min_α  ½ αᵀ Q α − eᵀα    s.t. 0 ≤ α ≤ upper
//! Q  = H_other · Q′
//! Q′ = (H_ownᵀ H_own + C·I)⁻¹ H_otherᵀ
//! ```
//!
//! `Q` is never formed. The solver keeps the primal stack `u = −Q′α`
//! up to date after every coordinate step, so a gradient entry costs one
//! row product: `∇_i f = −H_other,i · u − 1`.
//!
//! The positive-class problem maps directly onto this form. The
//! negative-class problem uses the same form with the roles of the two
//! classes swapped; its primal stack is the negation of `u`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, cholesky, cholesky_inverse, dot, Matrix};
use crate::scalar::Real;

/// How `(H_ownᵀH_own + C·I)⁻¹` is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InversionRoute {
    /// Factor the `(N+1) × (N+1)` regularized Gram directly.
    Cholesky,
    /// Sherman–Morrison–Woodbury through the `l_own × l_own` system
    /// `C·I + H_own H_ownᵀ`.
    Woodbury,
}

impl InversionRoute {
    /// Picks whichever system is smaller.
    pub fn for_shape(own_rows: usize, cols: usize) -> Self {
        if cols <= own_rows {
            InversionRoute::Cholesky
        } else {
            InversionRoute::Woodbury
        }
    }
}

/// `(HᵀH + c·I)⁻¹` for an augmented feature matrix `H`.
pub fn regularized_inverse<T: Real>(
    h: &Matrix<T>,
    c_reg: T,
    route: InversionRoute,
) -> Result<Matrix<T>> {
    let m = h.cols();
    match route {
        InversionRoute::Cholesky => {
            let mut a = h.gram();
            a.add_diagonal(c_reg);
            Ok(cholesky_inverse(&cholesky(&a)?))
        }
        InversionRoute::Woodbury => {
            let mut k = h.outer_gram();
            k.add_diagonal(c_reg);
            let k_inv = cholesky_inverse(&cholesky(&k)?);
            // (HᵀH + cI)⁻¹ = (I − Hᵀ (cI + HHᵀ)⁻¹ H) / c
            let w = k_inv.matmul(h);
            let mut inv = h.transpose().matmul(&w);
            let inv_c = T::one() / c_reg;
            for i in 0..m {
                for j in 0..m {
                    let delta = if i == j { T::one() } else { T::zero() };
                    inv[(i, j)] = (delta - inv[(i, j)]) * inv_c;
                }
            }
            Ok(inv)
        }
    }
}

/// Immutable data of one dual problem.
#[derive(Clone, Debug)]
pub struct SolverContext<T> {
    /// Augmented own-class rows `[Z_own, e]`.
    pub h_own: Matrix<T>,
    /// Augmented opposite-class rows `[Z_other, e]`; one dual variable each.
    pub h_other: Matrix<T>,
    pub c_reg: T,
    /// `Q′` stored transposed: row `i` is column `i` of `Q′`, length `N+1`.
    pub qcols: Matrix<T>,
    /// `D_i = H_other,i · Q′_{:,i}`, the diagonal of `Q`.
    pub diag: Vec<T>,
}

impl<T: Real> SolverContext<T> {
    pub fn precompute(h_own: Matrix<T>, h_other: Matrix<T>, c_reg: T) -> Result<Self> {
        let route = InversionRoute::for_shape(h_own.rows(), h_own.cols());
        Self::precompute_with(h_own, h_other, c_reg, route)
    }

    pub fn precompute_with(
        h_own: Matrix<T>,
        h_other: Matrix<T>,
        c_reg: T,
        route: InversionRoute,
    ) -> Result<Self> {
        if !(c_reg > T::zero()) || !c_reg.is_finite() {
            return Err(Error::InvalidParam(format!(
                "regularization {c_reg} must be > 0"
            )));
        }
        if h_own.cols() != h_other.cols() {
            return Err(Error::Dimension {
                expected: h_own.cols(),
                got: h_other.cols(),
            });
        }
        if !h_own.is_finite() || !h_other.is_finite() {
            return Err(Error::NonFinite("solver input"));
        }
        let inv = regularized_inverse(&h_own, c_reg, route)?;
        // Q′ᵀ = H_other · A⁻¹ since A⁻¹ is symmetric.
        let qcols = h_other.matmul(&inv);
        let diag: Vec<T> = h_other
            .iter_rows()
            .zip(qcols.iter_rows())
            .map(|(h, q)| dot(h, q))
            .collect();
        if diag.iter().any(|d| !(*d > T::zero())) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(SolverContext {
            h_own,
            h_other,
            c_reg,
            qcols,
            diag,
        })
    }

    /// Number of dual variables.
    pub fn len(&self) -> usize {
        self.h_other.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Width of the primal stack, `N + 1`.
    pub fn primal_dim(&self) -> usize {
        self.h_own.cols()
    }

    /// `u = −Q′α`, computed from scratch.
    pub fn primal_from(&self, alpha: &[T]) -> Vec<T> {
        let mut u = vec![T::zero(); self.primal_dim()];
        for (q, &a) in self.qcols.iter_rows().zip(alpha) {
            if a != T::zero() {
                axpy(-a, q, &mut u);
            }
        }
        u
    }

    /// `∇_i f = −H_other,i · u − 1`
    pub fn gradient(&self, i: usize, u: &[T]) -> T {
        -dot(self.h_other.row(i), u) - T::one()
    }

    /// `½ αᵀQα − eᵀα` evaluated through `u = −Q′α`.
    pub fn dual_objective(&self, alpha: &[T], u: &[T]) -> T {
        let mut quad = T::zero();
        let mut lin = T::zero();
        for (i, &a) in alpha.iter().enumerate() {
            if a != T::zero() {
                quad += a * -dot(self.h_other.row(i), u);
                lin += a;
            }
        }
        T::lit(0.5) * quad - lin
    }
}

/// Clamp-free projection of a gradient entry onto the feasible box.
pub fn projected_gradient<T: Real>(g: T, alpha: T, upper: T) -> T {
    if alpha <= T::zero() {
        g.min(T::zero())
    } else if alpha >= upper {
        g.max(T::zero())
    } else {
        g
    }
}

/// Single-variable Newton step clipped to `[0, upper]`.
pub fn update_coordinate<T: Real>(alpha: T, g: T, diag: T, upper: T) -> T {
    (alpha - g / diag).max(T::zero()).min(upper)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig<T> {
    pub epsilon: T,
    pub max_sweeps: usize,
    pub shrink_rate: T,
    pub seed: u64,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            epsilon: T::lit(1e-3),
            max_sweeps: 1000,
            shrink_rate: T::lit(0.9),
            seed: 0,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero()) {
            return Err(Error::InvalidParam(format!(
                "epsilon {} must be > 0",
                self.epsilon
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParam("max_sweeps must be >= 1".into()));
        }
        if !(self.shrink_rate > T::zero() && self.shrink_rate < T::one()) {
            return Err(Error::InvalidParam(format!(
                "shrink rate {} outside (0, 1)",
                self.shrink_rate
            )));
        }
        Ok(())
    }
}

/// Projected-gradient summary kept after a solve, used to screen stream
/// points without re-running the solver.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct GradientBand<T> {
    /// Last finite `(m′_min, m′_max)` pair of the solve.
    pub min_prime: T,
    pub max_prime: T,
    /// Mean of the negative / positive final projected gradients.
    pub mean: (T, T),
    /// Median of the negative / positive final projected gradients.
    pub median: (T, T),
    /// First / third quartile of all final projected gradients.
    pub quartiles: (T, T),
}

impl<T: Real> GradientBand<T> {
    fn from_solve(
        pg: &[T],
        last_min: Option<T>,
        last_max: Option<T>,
        sweep_min: T,
        sweep_max: T,
    ) -> Self {
        let finite_or_zero = |v: T| if v.is_finite() { v } else { T::zero() };
        let min_prime = last_min.unwrap_or_else(|| finite_or_zero(sweep_min));
        let max_prime = last_max.unwrap_or_else(|| finite_or_zero(sweep_max));

        let mut neg: Vec<T> = pg.iter().copied().filter(|&v| v < T::zero()).collect();
        let mut pos: Vec<T> = pg.iter().copied().filter(|&v| v > T::zero()).collect();
        let mut all = pg.to_vec();
        for v in [&mut neg, &mut pos, &mut all] {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        let clamp = |lo: T, hi: T| (lo.max(min_prime), hi.min(max_prime));
        GradientBand {
            min_prime,
            max_prime,
            mean: clamp(mean(&neg), mean(&pos)),
            median: clamp(quantile(&neg, 0.5), quantile(&pos, 0.5)),
            quartiles: clamp(quantile(&all, 0.25), quantile(&all, 0.75)),
        }
    }
}

fn mean<T: Real>(v: &[T]) -> T {
    if v.is_empty() {
        T::zero()
    } else {
        v.iter().copied().sum::<T>() / T::from_usize(v.len()).unwrap()
    }
}

/// Linear-interpolated quantile of sorted data; zero when empty.
fn quantile<T: Real>(sorted: &[T], q: f64) -> T {
    match sorted.len() {
        0 => T::zero(),
        1 => sorted[0],
        n => {
            let pos = q * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let t = T::lit(pos - lo as f64);
            sorted[lo] + (sorted[hi] - sorted[lo]) * t
        }
    }
}

/// Mutable iterate of one dual problem.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState<T> {
    pub alpha: Vec<T>,
    /// Primal stack `[ω; b]`, always `−Q′α`.
    pub u: Vec<T>,
    pub upper: Vec<T>,
    pub band: GradientBand<T>,
}

impl<T: Real> SolverState<T> {
    /// All multipliers at zero.
    pub fn cold(ctx: &SolverContext<T>, upper: Vec<T>) -> Result<Self> {
        Self::warm(ctx, vec![T::zero(); ctx.len()], upper)
    }

    /// Starts from existing multipliers; `u` is rebuilt against `ctx`.
    pub fn warm(ctx: &SolverContext<T>, alpha: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if alpha.len() != ctx.len() || upper.len() != ctx.len() {
            return Err(Error::Dimension {
                expected: ctx.len(),
                got: alpha.len().min(upper.len()),
            });
        }
        if upper.iter().any(|&c| !(c >= T::zero())) {
            return Err(Error::InvalidParam("dual upper bounds must be >= 0".into()));
        }
        let alpha: Vec<T> = alpha
            .into_iter()
            .zip(&upper)
            .map(|(a, &c)| a.max(T::zero()).min(c))
            .collect();
        let u = ctx.primal_from(&alpha);
        Ok(SolverState {
            alpha,
            u,
            upper,
            band: GradientBand::default(),
        })
    }

    /// Projected gradients of every variable at the current iterate.
    pub fn projected_gradients(&self, ctx: &SolverContext<T>) -> Vec<T> {
        (0..ctx.len())
            .map(|i| projected_gradient(ctx.gradient(i, &self.u), self.alpha[i], self.upper[i]))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveReport {
    pub sweeps: usize,
    pub converged: bool,
}

/// Coordinate descent with shrinking until `m_max − m_min < ε` holds over the
/// full variable set, or `max_sweeps` sweeps have run.
pub fn solve<T: Real>(
    ctx: &SolverContext<T>,
    state: &mut SolverState<T>,
    cfg: &SolverConfig<T>,
) -> Result<SolveReport> {
    cfg.validate()?;
    let l = ctx.len();
    debug_assert_eq!(state.alpha.len(), l);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let inf = T::infinity();
    let mut active: Vec<usize> = (0..l).collect();
    let mut m_max_prime = inf;
    let mut m_min_prime = -inf;
    let mut last_max: Option<T> = None;
    let mut last_min: Option<T> = None;
    let (mut m_max, mut m_min) = (-inf, inf);
    let mut sweeps = 0;
    let mut converged = false;

    #[cfg(test)]
    let mut prev_obj = ctx.dual_objective(&state.alpha, &state.u);

    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        m_max = -inf;
        m_min = inf;
        active.shuffle(&mut rng);
        let mut kept = Vec::with_capacity(active.len());
        for &i in &active {
            let g = ctx.gradient(i, &state.u);
            if !g.is_finite() {
                return Err(Error::NonFinite("gradient"));
            }
            let a = state.alpha[i];
            let c = state.upper[i];
            let mut pg = T::zero();
            if a <= T::zero() {
                if g > m_max_prime {
                    continue;
                }
                if g < T::zero() {
                    pg = g;
                }
            } else if a >= c {
                if g < m_min_prime {
                    continue;
                }
                if g > T::zero() {
                    pg = g;
                }
            } else {
                pg = g;
            }
            kept.push(i);
            m_max = m_max.max(pg);
            m_min = m_min.min(pg);
            if pg != T::zero() {
                let next = update_coordinate(a, g, ctx.diag[i], c);
                let step = next - a;
                if step != T::zero() {
                    state.alpha[i] = next;
                    axpy(-step, ctx.qcols.row(i), &mut state.u);
                }
            }
        }
        active = kept;

        #[cfg(test)]
        {
            let obj = ctx.dual_objective(&state.alpha, &state.u);
            let tol = T::lit(1e-9) * (T::one() + prev_obj.abs());
            assert!(
                obj <= prev_obj + tol,
                "dual objective rose: {prev_obj} -> {obj}"
            );
            prev_obj = obj;
        }

        if m_max - m_min < cfg.epsilon {
            if active.len() == l {
                converged = true;
                break;
            }
            active = (0..l).collect();
            m_max_prime = inf;
            m_min_prime = -inf;
            continue;
        }
        m_max_prime = if m_max <= T::zero() {
            inf
        } else {
            m_max * cfg.shrink_rate
        };
        m_min_prime = if m_min >= T::zero() {
            -inf
        } else {
            m_min * cfg.shrink_rate
        };
        if m_max_prime.is_finite() {
            last_max = Some(m_max_prime);
        }
        if m_min_prime.is_finite() {
            last_min = Some(m_min_prime);
        }
    }

    let pg = state.projected_gradients(ctx);
    state.band = GradientBand::from_solve(&pg, last_min, last_max, m_min, m_max);
    Ok(SolveReport { sweeps, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
        let data = (0..rows * cols)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn augmented(rng: &mut ChaCha8Rng, rows: usize, n: usize) -> Matrix<f64> {
        random_matrix(rng, rows, n).augmented(1.0)
    }

    /// Gauss–Jordan inverse with partial pivoting; independent of the
    /// Cholesky-based routes under test.
    fn gauss_jordan_inverse(a: &Matrix<f64>) -> Matrix<f64> {
        let n = a.rows();
        let mut m = a.clone();
        let mut inv = Matrix::identity(n);
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| m[(x, col)].abs().total_cmp(&m[(y, col)].abs()))
                .unwrap();
            for j in 0..n {
                let (t1, t2) = (m[(col, j)], m[(piv, j)]);
                m[(col, j)] = t2;
                m[(piv, j)] = t1;
                let (t1, t2) = (inv[(col, j)], inv[(piv, j)]);
                inv[(col, j)] = t2;
                inv[(piv, j)] = t1;
            }
            let p = m[(col, col)];
            for j in 0..n {
                m[(col, j)] /= p;
                inv[(col, j)] /= p;
            }
            for r in 0..n {
                if r != col {
                    let f = m[(r, col)];
                    for j in 0..n {
                        m[(r, j)] -= f * m[(col, j)];
                        inv[(r, j)] -= f * inv[(col, j)];
                    }
                }
            }
        }
        inv
    }

    /// Dense `Q` built without any solver code.
    fn dense_q(h_own: &Matrix<f64>, h_other: &Matrix<f64>, c: f64) -> Matrix<f64> {
        let mut a = h_own.transpose().matmul(h_own);
        for i in 0..a.rows() {
            a[(i, i)] += c;
        }
        h_other
            .matmul(&gauss_jordan_inverse(&a))
            .matmul(&h_other.transpose())
    }

    fn objective(q: &Matrix<f64>, alpha: &[f64]) -> f64 {
        0.5 * dot(alpha, &q.mul_vec(alpha)) - alpha.iter().sum::<f64>()
    }

    /// Accelerated projected gradient on the dense dual.
    fn oracle(q: &Matrix<f64>, upper: &[f64]) -> f64 {
        let n = q.rows();
        let lip = (0..n)
            .map(|i| (0..n).map(|j| q[(i, j)].abs()).sum::<f64>())
            .fold(1e-12, f64::max);
        let mut x = vec![0.0; n];
        let mut y = x.clone();
        let mut t = 1.0f64;
        for _ in 0..20_000 {
            let g = q.mul_vec(&y);
            let next: Vec<f64> = (0..n)
                .map(|i| (y[i] - (g[i] - 1.0) / lip).clamp(0.0, upper[i]))
                .collect();
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            y = (0..n)
                .map(|i| next[i] + (t - 1.0) / t_next * (next[i] - x[i]))
                .collect();
            x = next;
            t = t_next;
        }
        objective(q, &x)
    }

    #[test]
    fn identity_precompute() {
        let h = Matrix::<f64>::identity(2);
        let ctx = SolverContext::precompute(h.clone(), h, 1.0).unwrap();
        for (got, want) in ctx.qcols.as_slice().iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(ctx.diag.iter().all(|d| (d - 0.5).abs() < 1e-15));
    }

    #[test]
    fn inversion_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..20 {
            let (own, cols) = if trial % 2 == 0 { (10, 6) } else { (6, 10) };
            let h_own = random_matrix(&mut rng, own, cols);
            let h_other = random_matrix(&mut rng, 7, cols);
            let a = SolverContext::precompute_with(
                h_own.clone(),
                h_other.clone(),
                0.3,
                InversionRoute::Cholesky,
            )
            .unwrap();
            let b = SolverContext::precompute_with(h_own, h_other, 0.3, InversionRoute::Woodbury)
                .unwrap();
            let scale = a
                .qcols
                .as_slice()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, y) in a.qcols.as_slice().iter().zip(b.qcols.as_slice()) {
                assert!((x - y).abs() <= 1e-8 * scale, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn heavy_regularization_shrinks_qcols() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h_own = random_matrix(&mut rng, 5, 3);
        let h_other = random_matrix(&mut rng, 4, 3);
        let small = SolverContext::precompute(h_own.clone(), h_other.clone(), 1.0).unwrap();
        let big = SolverContext::precompute(h_own, h_other, 1e9).unwrap();
        let max = |c: &SolverContext<f64>| {
            c.qcols
                .as_slice()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
        };
        assert!(max(&big) < 1e-8 * max(&small).max(1.0));
    }

    #[test]
    fn precompute_rejects_bad_input() {
        let h = Matrix::<f64>::identity(2);
        assert!(SolverContext::precompute(h.clone(), h.clone(), 0.0).is_err());
        let mut bad = h.clone();
        bad[(0, 0)] = f64::NAN;
        assert!(matches!(
            SolverContext::precompute(h, bad, 1.0),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn projected_gradient_cases() {
        assert_eq!(projected_gradient(0.7, 0.0, 1.0), 0.0);
        assert_eq!(projected_gradient(-0.5, 0.0, 1.0), -0.5);
        assert_eq!(projected_gradient(0.7, 1.0, 1.0), 0.7);
        assert_eq!(projected_gradient(-0.7, 1.0, 1.0), 0.0);
        assert_eq!(projected_gradient(-0.3, 0.5, 1.0), -0.3);
    }

    #[test]
    fn coordinate_update_cases() {
        assert!((update_coordinate(0.2, -0.5, 1.0, 1.0) - 0.7f64).abs() < 1e-15);
        assert_eq!(update_coordinate(0.9, -0.5, 1.0, 1.0), 1.0);
        assert_eq!(update_coordinate(0.1, 0.5, 1.0, 1.0), 0.0);
    }

    #[test]
    fn empty_dual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ctx = SolverContext::precompute(augmented(&mut rng, 4, 2), Matrix::with_cols(3), 1.0)
            .unwrap();
        let mut st = SolverState::cold(&ctx, vec![]).unwrap();
        let rep = solve(&ctx, &mut st, &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert!(st.alpha.is_empty());
        assert_eq!(st.u, vec![0.0; 3]);
    }

    #[test]
    fn matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let cfg = SolverConfig {
            epsilon: 1e-6,
            max_sweeps: 100_000,
            ..SolverConfig::default()
        };
        for _ in 0..10 {
            let h_own = augmented(&mut rng, 15, 4);
            let h_other = augmented(&mut rng, 15, 4);
            let upper: Vec<f64> = (0..15).map(|_| 0.05 + rng.random::<f64>()).collect();
            let ctx = SolverContext::precompute(h_own.clone(), h_other.clone(), 0.7).unwrap();
            let mut st = SolverState::cold(&ctx, upper.clone()).unwrap();
            let rep = solve(&ctx, &mut st, &cfg).unwrap();
            assert!(rep.converged);
            let q = dense_q(&h_own, &h_other, 0.7);
            let f = objective(&q, &st.alpha);
            let f_star = oracle(&q, &upper);
            assert!(
                (f - f_star).abs() <= 1e-4 * f_star.abs().max(1.0),
                "{f} vs {f_star}"
            );
            for (a, c) in st.alpha.iter().zip(&upper) {
                assert!(*a >= 0.0 && a <= c);
            }
            let fresh = ctx.primal_from(&st.alpha);
            let err: f64 =
                st.u.iter()
                    .zip(&fresh)
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt();
            assert!(err <= 1e-8 * (1.0 + crate::linalg::norm(&st.u)));
            let kkt = st
                .projected_gradients(&ctx)
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(kkt <= cfg.epsilon, "kkt {kkt}");
        }
    }

    #[test]
    fn optimal_warm_start_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let ctx =
            SolverContext::precompute(augmented(&mut rng, 12, 3), augmented(&mut rng, 10, 3), 1.0)
                .unwrap();
        let upper = vec![0.8; 10];
        let mut st = SolverState::cold(&ctx, upper.clone()).unwrap();
        let tight = SolverConfig {
            epsilon: 1e-13,
            max_sweeps: 1_000_000,
            ..SolverConfig::default()
        };
        assert!(solve(&ctx, &mut st, &tight).unwrap().converged);
        let before = st.alpha.clone();
        let mut warm = SolverState::warm(&ctx, before.clone(), upper).unwrap();
        let rep = solve(
            &ctx,
            &mut warm,
            &SolverConfig {
                epsilon: 1e-5,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        assert_eq!(rep.sweeps, 1);
        for (a, b) in warm.alpha.iter().zip(&before) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn band_is_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ctx =
            SolverContext::precompute(augmented(&mut rng, 20, 3), augmented(&mut rng, 20, 3), 0.5)
                .unwrap();
        let mut st = SolverState::cold(&ctx, vec![1.0; 20]).unwrap();
        solve(&ctx, &mut st, &SolverConfig::default()).unwrap();
        let b = st.band;
        assert!(b.min_prime <= 0.0 && b.max_prime >= 0.0);
        for (lo, hi) in [b.mean, b.median, b.quartiles] {
            assert!(lo >= b.min_prime && hi <= b.max_prime);
        }
    }

    #[test]
    fn quantiles() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5), 3.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
        assert_eq!(quantile::<f64>(&[], 0.5), 0.0);
        assert_eq!(mean(&[1.0, 3.0]), 2.0);
    }

    #[test]
    fn generic_over_f32() {
        let h = Matrix::<f32>::identity(2);
        let ctx = SolverContext::precompute(h.clone(), h, 1.0f32).unwrap();
        let mut st = SolverState::cold(&ctx, vec![1.0, 1.0]).unwrap();
        assert!(
            solve(&ctx, &mut st, &SolverConfig::default())
                .unwrap()
                .converged
        );
        // ∇ = α/2 − 1 hits zero at α = 2, clipped to the bound.
        assert_eq!(st.alpha, vec![1.0, 1.0]);
    }
}
