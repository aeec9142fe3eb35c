//! Eigenvalue-simplex coordinates and the diagonal block of the Bures metric.
//!
//! The N eigenvalues of a density matrix form a point of the probability
//! simplex. They are encoded here by N-1 angles:
//!
//! ```text
//! lambda_k = sin²θ_1 ··· sin²θ_{k-1} · cos²θ_k      (k = 1..N-1)
//! lambda_N = sin²θ_1 ··· sin²θ_{N-1}
//! ```
//!
//! With every θ_k in [0, π/2] the map covers the simplex exactly once, so the
//! inversion is unambiguous. In these angles the eigenvalue part of the Bures
//! line element, Σ dλ_i²/(4λ_i), becomes a diagonal quadratic form.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Interior floor on eigenvalues accepted by metric evaluations.
///
/// The eigenvalue block of the metric carries 1/(4λ) factors, so both the
/// closed form and the eigendecomposition-based reference lose conditioning
/// as λ → 0. Anything below this floor is treated as a boundary state and
/// rejected by metric code.
pub const LAMBDA_MIN_FLOOR: f64 = 1e-8;

/// Simplex point encoded by N-1 angles in [0, π/2].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    thetas: Vec<f64>,
}

impl Spectrum {
    /// Wraps a vector of N-1 angles. Fails if empty, non-finite, or outside
    /// [0, π/2].
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::InvalidSpectrum(
                "need at least one angle (two-level system or larger)".into(),
            ));
        }
        for (k, &t) in thetas.iter().enumerate() {
            if !t.is_finite() || !(0.0..=std::f64::consts::FRAC_PI_2).contains(&t) {
                return Err(Error::InvalidSpectrum(format!(
                    "theta_{} = {t:?} is outside [0, pi/2]",
                    k + 1
                )));
            }
        }
        Ok(Self { thetas })
    }

    /// Level count N.
    pub fn n(&self) -> usize {
        self.thetas.len() + 1
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// Eigenvalues (λ_1, ..., λ_N) induced by the angles. Non-negative and
    /// summing to one by construction.
    pub fn lambdas(&self) -> Vec<f64> {
        let n = self.n();
        let mut lams = vec![0.0; n];
        let mut prefix = 1.0;
        for (k, &t) in self.thetas.iter().enumerate() {
            let (s, c) = t.sin_cos();
            lams[k] = prefix * c * c;
            prefix *= s * s;
        }
        lams[n - 1] = prefix;
        lams
    }

    /// Inverts an eigenvalue vector into angles in [0, π/2].
    ///
    /// Fails when the prefix product of sines underflows while probability
    /// mass remains unplaced: that is a simplex-boundary point where the
    /// inversion is ill-conditioned.
    pub fn from_lambdas(lams: &[f64]) -> Result<Self> {
        let n = lams.len();
        if n < 2 {
            return Err(Error::InvalidSpectrum(
                "need at least two eigenvalues".into(),
            ));
        }
        let mut sum = 0.0;
        for (i, &l) in lams.iter().enumerate() {
            if !l.is_finite() || !(-1e-10..=1.0 + 1e-10).contains(&l) {
                return Err(Error::InvalidSpectrum(format!(
                    "lambda_{} = {l:?} is outside [0, 1]",
                    i + 1
                )));
            }
            sum += l;
        }
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidSpectrum(format!(
                "eigenvalues sum to {sum:.17}, not 1"
            )));
        }

        let mut thetas = Vec::with_capacity(n - 1);
        let mut prefix = 1.0_f64;
        for k in 0..n - 1 {
            if prefix < 1e-300 {
                let remaining: f64 = lams[k..].iter().map(|&l| l.max(0.0)).sum();
                if remaining > 1e-300 {
                    return Err(Error::BoundaryInversion { remaining });
                }
                thetas.push(0.0);
                continue;
            }
            let ratio = (lams[k].max(0.0) / prefix).clamp(0.0, 1.0);
            let t = ratio.sqrt().acos();
            thetas.push(t);
            prefix *= t.sin().powi(2);
        }
        Spectrum::new(thetas)
    }

    pub fn min_lambda(&self) -> f64 {
        self.lambdas().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Returns the eigenvalues after checking the interior floor.
    pub fn interior_lambdas(&self) -> Result<Vec<f64>> {
        let lams = self.lambdas();
        let min = lams.iter().copied().fold(f64::INFINITY, f64::min);
        if min < LAMBDA_MIN_FLOOR {
            return Err(Error::BoundarySpectrum {
                min_lambda: min,
                floor: LAMBDA_MIN_FLOOR,
            });
        }
        Ok(lams)
    }
}

/// Diagonal of the eigenvalue block of the Bures metric:
/// g_11 = 1 and g_kk = sin²θ_1 ··· sin²θ_{k-1} for k ≥ 2.
///
/// The result never reads the last angle, so it is bit-identical under
/// perturbations of θ_{N-1}. Errors on boundary spectra, where the
/// underlying 1/(4λ) form diverges.
pub fn g_diagonal(s: &Spectrum) -> Result<DVector<f64>> {
    s.interior_lambdas()?;
    let count = s.thetas.len();
    let mut g = DVector::zeros(count);
    let mut prefix = 1.0;
    for k in 0..count {
        g[k] = prefix;
        if k + 1 < count {
            let sk = s.thetas[k].sin();
            prefix *= sk * sk;
        }
    }
    Ok(g)
}
