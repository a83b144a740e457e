//! Random Fourier features for the Gaussian kernel `exp(−γ‖x−y‖²)`.
//!
//! Frequencies are drawn from the kernel's spectral density, which for this
//! kernel is an isotropic normal with per-coordinate variance `2γ`; phases
//! are uniform on `[0, 2π)`. The map is sampled once and frozen so that
//! points mapped in later stream batches live in the same feature space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct FourierMap<T> {
    /// `N × n`, one frequency per row.
    pub tau: Matrix<T>,
    /// Length `N`, in `[0, 2π)`.
    pub offsets: Vec<T>,
    pub gamma: T,
}

impl<T: Real> FourierMap<T> {
    /// Samples `features` frequencies for inputs of dimension `input_dim`.
    pub fn sample(input_dim: usize, features: usize, gamma: T, seed: u64) -> Result<Self> {
        if input_dim == 0 || features == 0 {
            return Err(Error::InvalidParam(
                "Fourier map needs input_dim >= 1 and features >= 1".into(),
            ));
        }
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(Error::InvalidParam(format!("gamma {gamma} must be > 0")));
        }
        let normal = Normal::new(0.0, (2.0 * gamma.as_f64()).sqrt())
            .map_err(|e| Error::InvalidParam(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tau: Vec<T> = (0..features * input_dim)
            .map(|_| T::lit(normal.sample(&mut rng)))
            .collect();
        let two_pi = 2.0 * std::f64::consts::PI;
        let offsets = (0..features)
            .map(|_| {
                // Casting to f32 can round up to exactly 2π.
                let b = T::lit(rng.random::<f64>() * two_pi);
                if b >= T::TAU() {
                    T::zero()
                } else {
                    b
                }
            })
            .collect();
        Ok(FourierMap {
            tau: Matrix::from_vec(features, input_dim, tau)?,
            offsets,
            gamma,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.tau.cols()
    }

    pub fn features(&self) -> usize {
        self.tau.rows()
    }

    /// `z(x)_j = √(2/N)·cos(τ_jᵀx + b_j)`
    pub fn transform(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let scale = (T::lit(2.0) / T::from_usize(self.features()).unwrap()).sqrt();
        Ok(self
            .tau
            .iter_rows()
            .zip(&self.offsets)
            .map(|(t, &b)| scale * (dot(t, x) + b).cos())
            .collect())
    }
}

/// Feature map applied before the linear twin SVM: identity for the linear
/// kernel, random Fourier features for the approximated Gaussian kernel.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureMap<T> {
    Linear { input_dim: usize },
    Fourier(FourierMap<T>),
}

impl<T: Real> FeatureMap<T> {
    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMap::Linear { input_dim } => *input_dim,
            FeatureMap::Fourier(m) => m.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FeatureMap::Linear { input_dim } => *input_dim,
            FeatureMap::Fourier(m) => m.features(),
        }
    }

    pub fn transform(&self, x: &[T]) -> Result<Vec<T>> {
        match self {
            FeatureMap::Linear { input_dim } => {
                if x.len() != *input_dim {
                    return Err(Error::Dimension {
                        expected: *input_dim,
                        got: x.len(),
                    });
                }
                Ok(x.to_vec())
            }
            FeatureMap::Fourier(m) => m.transform(x),
        }
    }
}
