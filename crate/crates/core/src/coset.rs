//! Coset representatives of U(N)/T^N and density-matrix assembly.
//!
//! A non-degenerate density matrix is ρ = Ω diag(λ) Ω† where Ω is a coset
//! representative of the unitary group modulo its maximal torus. Here Ω is
//! built as the ordered product Ω = Ω^(N) Ω^(N-1) ··· Ω^(2) of level
//! components. Each component acts on the leading m coordinates and
//! factorizes as Ω^(m) = X^(m) R^(m) X^(m)†: R^(m) is a real rotation that
//! mixes the (m-1)-plane with axis m through the radius vector γ^(m), and
//! X^(m) is the diagonal phase matrix of the ξ^(m).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::Spectrum;

/// Dense complex matrix used for unitaries, density matrices, and
/// differentials.
pub type CMatrix = DMatrix<Complex64>;

/// Per-level coset coordinates: for every level m in 2..=N a radius vector
/// γ^(m) and a phase vector ξ^(m), each of length m-1. N(N-1) reals total.
#[derive(Debug, Clone, PartialEq)]
pub struct CosetCoords {
    n: usize,
    gammas: Vec<Vec<f64>>,
    xis: Vec<Vec<f64>>,
}

impl CosetCoords {
    /// Wraps per-level vectors indexed by m = 2..=n (element m-2 of each
    /// outer vector). Lengths must be m-1 and all values finite; the radii
    /// and phases are otherwise unrestricted.
    pub fn new(n: usize, gammas: Vec<Vec<f64>>, xis: Vec<Vec<f64>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidCoords("level count must be at least 2".into()));
        }
        if gammas.len() != n - 1 || xis.len() != n - 1 {
            return Err(Error::InvalidCoords(format!(
                "expected {} levels of gamma/xi vectors, got {}/{}",
                n - 1,
                gammas.len(),
                xis.len()
            )));
        }
        for m in 2..=n {
            for (name, v) in [("gamma", &gammas[m - 2]), ("xi", &xis[m - 2])] {
                if v.len() != m - 1 {
                    return Err(Error::InvalidCoords(format!(
                        "{name}^({m}) must have length {}, got {}",
                        m - 1,
                        v.len()
                    )));
                }
                if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::InvalidCoords(format!(
                        "{name}^({m}) contains non-finite value {bad:?}"
                    )));
                }
            }
        }
        Ok(Self { n, gammas, xis })
    }

    /// All radii and phases zero; Ω is the identity.
    pub fn zero(n: usize) -> Result<Self> {
        let gammas = (2..=n).map(|m| vec![0.0; m - 1]).collect();
        let xis = (2..=n).map(|m| vec![0.0; m - 1]).collect();
        Self::new(n, gammas, xis)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of real coordinates, Σ_m 2(m-1) = N(N-1).
    pub fn dim(&self) -> usize {
        self.n * (self.n - 1)
    }

    /// Radius vector γ^(m). Panics if m is outside 2..=N.
    pub fn gamma(&self, m: usize) -> &[f64] {
        assert!((2..=self.n).contains(&m), "level {m} outside 2..={}", self.n);
        &self.gammas[m - 2]
    }

    /// Phase vector ξ^(m). Panics if m is outside 2..=N.
    pub fn xi(&self, m: usize) -> &[f64] {
        assert!((2..=self.n).contains(&m), "level {m} outside 2..={}", self.n);
        &self.xis[m - 2]
    }

    /// Euclidean norm γ^(m) of the level-m radius vector.
    pub fn gamma_norm(&self, m: usize) -> f64 {
        self.gamma(m).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[cfg(test)]
    pub(crate) fn gamma_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.gammas[m - 2]
    }

    #[cfg(test)]
    pub(crate) fn xi_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.xis[m - 2]
    }
}

/// (cos γ - 1)/γ², series below 1e-6 where the direct form cancels.
pub(crate) fn cos_minus_one_over_sq(g: f64) -> f64 {
    if g.abs() < 1e-6 {
        let g2 = g * g;
        -0.5 + g2 / 24.0 - g2 * g2 / 720.0
    } else {
        (g.cos() - 1.0) / (g * g)
    }
}

/// sin γ / γ, series below 1e-6.
pub(crate) fn sinc(g: f64) -> f64 {
    if g.abs() < 1e-6 {
        let g2 = g * g;
        1.0 - g2 / 6.0 + g2 * g2 / 120.0
    } else {
        g.sin() / g
    }
}

/// Real orthogonal rotation factor R^(m): identity outside the leading m
/// block; inside it rotates the γ̂ direction of the (m-1)-plane toward axis m
/// by the radius γ^(m).
///
/// Entrywise, with γ̂_i = γ_i/γ:
/// R_ij = δ_ij + γ̂_i γ̂_j (cos γ - 1), R_im = -R_mi = γ̂_i sin γ,
/// R_mm = cos γ. Written through (cos γ - 1)/γ² and sin γ / γ the entries
/// stay finite for γ → 0, where R is the identity.
pub fn build_r(m: usize, coords: &CosetCoords) -> DMatrix<f64> {
    let n = coords.n();
    assert!((2..=n).contains(&m), "level {m} outside 2..={n}");
    let gv = coords.gamma(m);
    let g = coords.gamma_norm(m);
    let k = cos_minus_one_over_sq(g);
    let sc = sinc(g);
    let mut r = DMatrix::identity(n, n);
    for i in 0..m - 1 {
        for j in 0..m - 1 {
            r[(i, j)] = if i == j { 1.0 } else { 0.0 } + gv[i] * gv[j] * k;
        }
        let border = gv[i] * sc;
        r[(i, m - 1)] = border;
        r[(m - 1, i)] = -border;
    }
    r[(m - 1, m - 1)] = g.cos();
    r
}

/// Diagonal phase factor X^(m): entries e^{iξ^(m)_k} for k < m, one beyond.
pub fn build_x(m: usize, coords: &CosetCoords) -> CMatrix {
    let n = coords.n();
    assert!((2..=n).contains(&m), "level {m} outside 2..={n}");
    let xv = coords.xi(m);
    let mut x = CMatrix::identity(n, n);
    for (k, &phase) in xv.iter().enumerate() {
        x[(k, k)] = Complex64::cis(phase);
    }
    x
}

/// Level component Ω^(m) = X^(m) R^(m) X^(m)†. Unitary by construction;
/// equal to R^(m) when all phases vanish.
pub fn build_omega_component(m: usize, coords: &CosetCoords) -> CMatrix {
    let r = build_r(m, coords).map(|v| Complex64::new(v, 0.0));
    let x = build_x(m, coords);
    &x * r * x.adjoint()
}

/// Direct m×m coset block embedded at the top-left of an N×N identity,
/// driven by the complex column b (length m-1):
///
/// ```text
/// [ I + b̂ b̂† (cos γ - 1)   b̂ sin γ ]
/// [ -b̂† sin γ               cos γ   ]       γ = |b|
/// ```
///
/// Used as an independent cross-check of `build_omega_component` with
/// b_i = γ_i e^{iξ_i}.
pub fn build_coset_direct(n: usize, m: usize, b: &[Complex64]) -> CMatrix {
    assert!((2..=n).contains(&m), "level {m} outside 2..={n}");
    assert_eq!(b.len(), m - 1, "column must have length m-1");
    let g = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut out = CMatrix::identity(n, n);
    if g == 0.0 {
        return out;
    }
    let bh: Vec<Complex64> = b.iter().map(|z| z / g).collect();
    let (sg, cg) = g.sin_cos();
    for i in 0..m - 1 {
        for j in 0..m - 1 {
            let delta = if i == j { 1.0 } else { 0.0 };
            out[(i, j)] = Complex64::new(delta, 0.0) + bh[i] * bh[j].conj() * (cg - 1.0);
        }
        out[(i, m - 1)] = bh[i] * sg;
        out[(m - 1, i)] = -bh[i].conj() * sg;
    }
    out[(m - 1, m - 1)] = Complex64::new(cg, 0.0);
    out
}

/// Full coset representative Ω = Ω^(N) Ω^(N-1) ··· Ω^(2), highest level
/// leftmost. The coordinate ordering elsewhere in the crate assumes exactly
/// this product order.
pub fn build_omega(coords: &CosetCoords) -> CMatrix {
    let n = coords.n();
    let mut omega = CMatrix::identity(n, n);
    for m in (2..=n).rev() {
        omega *= build_omega_component(m, coords);
    }
    omega
}

/// Density matrix ρ = Ω diag(λ) Ω†. Hermitian with unit trace, and its
/// eigenvalue multiset is exactly the spectrum's. Panics on mismatched level
/// counts.
pub fn assemble_density(s: &Spectrum, coords: &CosetCoords) -> CMatrix {
    assert_eq!(
        s.n(),
        coords.n(),
        "spectrum and coset coordinates disagree on the level count"
    );
    let n = s.n();
    let lams = s.lambdas();
    let omega = build_omega(coords);
    let diag = CMatrix::from_diagonal(&DVector::from_iterator(
        n,
        lams.iter().map(|&l| Complex64::new(l, 0.0)),
    ));
    &omega * diag * omega.adjoint()
}
