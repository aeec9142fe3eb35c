//! Closed-form Bures metric in the canonical coset coordinates.
//!
//! At a point (spectrum, coset coordinates) the metric splits into two
//! blocks: the diagonal eigenvalue block from [`crate::spectral`], and the
//! coset block assembled here. The coset block is a weighted sum over
//! eigenvalue pairs,
//!
//! ```text
//! g_ab = Σ_{i<j} Λ_ij · Re{ (K_ij)_a · conj((K_ij)_b) },
//! Λ_ij = (λ_i - λ_j)² / (λ_i + λ_j),
//! ```
//!
//! where (K_ij)_a is the coefficient of coordinate differential a in the
//! matrix-valued one-form K^(m) = W^(m)† (Ω^(m)† dΩ^(m)) W^(m) of the level
//! owning a, and W^(m) = Ω^(m-1) ··· Ω^(2) collects the lower levels. The
//! spectrum enters only through the Λ weights, so every entry separates into
//! an eigenvalue factor times a coset factor.
//!
//! Canonical coordinate order, used for every matrix index and label:
//! θ_1..θ_{N-1}, then per level m = 2..N the radii γ^(m)_1..γ^(m)_{m-1}
//! followed by the phases ξ^(m)_1..ξ^(m)_{m-1}.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::coset::{
    build_omega_component, build_r, cos_minus_one_over_sq, sinc, CMatrix, CosetCoords,
};
use crate::error::{Error, Result};
use crate::spectral::{g_diagonal, Spectrum};

/// Neumaier compensated accumulator for the pair sums.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Labels of the canonical coordinate order: "theta_k", "gamma_m_r", "xi_m_r"
/// (all indices 1-based, matching the serialized formats).
pub fn coordinate_labels(n: usize) -> Vec<String> {
    let mut labels = Vec::with_capacity(n * n - 1);
    for k in 1..n {
        labels.push(format!("theta_{k}"));
    }
    for m in 2..=n {
        for r in 1..m {
            labels.push(format!("gamma_{m}_{r}"));
        }
        for r in 1..m {
            labels.push(format!("xi_{m}_{r}"));
        }
    }
    labels
}

/// Offset of level m inside the coset coordinate block: Σ_{l<m} 2(l-1).
fn level_offset(m: usize) -> usize {
    (m - 1) * (m - 2)
}

/// Flattens a point into the canonical coordinate vector of length N²-1.
pub fn point_to_vec(s: &Spectrum, coords: &CosetCoords) -> DVector<f64> {
    assert_eq!(s.n(), coords.n());
    let n = s.n();
    let mut v = Vec::with_capacity(n * n - 1);
    v.extend_from_slice(s.thetas());
    for m in 2..=n {
        v.extend_from_slice(coords.gamma(m));
        v.extend_from_slice(coords.xi(m));
    }
    DVector::from_vec(v)
}

/// Rebuilds a point from a canonical coordinate vector.
pub fn vec_to_point(n: usize, v: &DVector<f64>) -> Result<(Spectrum, CosetCoords)> {
    if n < 2 || v.len() != n * n - 1 {
        return Err(Error::InvalidArgument(format!(
            "coordinate vector for n={n} must have length {}, got {}",
            n * n - 1,
            v.len()
        )));
    }
    let s = Spectrum::new(v.as_slice()[..n - 1].to_vec())?;
    let mut gammas = Vec::with_capacity(n - 1);
    let mut xis = Vec::with_capacity(n - 1);
    let mut idx = n - 1;
    for m in 2..=n {
        gammas.push(v.as_slice()[idx..idx + m - 1].to_vec());
        idx += m - 1;
        xis.push(v.as_slice()[idx..idx + m - 1].to_vec());
        idx += m - 1;
    }
    Ok((s, CosetCoords::new(n, gammas, xis)?))
}

/// Pair weights Λ_ij = (λ_i - λ_j)²/(λ_i + λ_j) for i < j, stored in
/// lexicographic pair order. Zero exactly when a pair is degenerate.
#[derive(Debug, Clone)]
pub struct LambdaWeights {
    n: usize,
    values: Vec<f64>,
}

/// Relative eigenvalue gap below which a pair counts as exactly degenerate.
///
/// No representable angle produces bit-identical eigenvalue products (the
/// sin²/cos² grids straddle their crossing), so "λ_i = λ_j" can only mean
/// equality to machine precision. Snapping such pairs to weight zero keeps
/// the exact-zero consequences of degeneracy — rank deficiency, a vanishing
/// volume element — literally true.
pub const DEGENERACY_SNAP: f64 = 1e-15;

/// Computes the pair weights of an interior spectrum. Boundary spectra are
/// rejected: the weights themselves stay finite there, but every consumer of
/// the weights also divides by eigenvalue sums.
pub fn lambda_weights(s: &Spectrum) -> Result<LambdaWeights> {
    let lams = s.interior_lambdas()?;
    let n = lams.len();
    let mut values = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let diff = lams[i] - lams[j];
            let sum = lams[i] + lams[j];
            let w = if diff.abs() <= DEGENERACY_SNAP * sum {
                0.0
            } else {
                diff * diff / sum
            };
            values.push(w);
        }
    }
    Ok(LambdaWeights { n, values })
}

impl LambdaWeights {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Weight of the (i, j) pair, zero-based, order-insensitive.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i != j && i < self.n && j < self.n);
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        // lexicographic offset of pair (i, j), i < j
        self.values[i * self.n - i * (i + 1) / 2 + (j - i - 1)]
    }

    /// Pairs (i, j, Λ_ij) in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
            .zip(self.values.iter())
            .map(|((i, j), &w)| (i, j, w))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn product(&self) -> f64 {
        self.values.iter().product()
    }
}

/// Partial derivative of the rotation factor with respect to the k-th radius
/// component (k zero-based): Γ^(m)_k = ∂R^(m)/∂γ^(m)_k as an N×N real matrix.
///
/// At γ = 0 the direction-dependent pieces cancel and the limit is the plane
/// generator: Γ_km = 1, Γ_mk = -1, all else zero.
pub fn gamma_tensor(m: usize, coords: &CosetCoords, k: usize) -> DMatrix<f64> {
    let n = coords.n();
    assert!((2..=n).contains(&m), "level {m} outside 2..={n}");
    assert!(k < m - 1, "component {k} outside 0..{}", m - 1);
    let gv = coords.gamma(m);
    let g = coords.gamma_norm(m);
    let mut t = DMatrix::zeros(n, n);
    if g == 0.0 {
        t[(k, m - 1)] = 1.0;
        t[(m - 1, k)] = -1.0;
        return t;
    }
    let u: Vec<f64> = gv.iter().map(|x| x / g).collect();
    let cm1_over_g = g * cos_minus_one_over_sq(g); // (cos γ - 1)/γ
    let sc = sinc(g);
    let (sg, cg) = g.sin_cos();
    for i in 0..m - 1 {
        for j in 0..m - 1 {
            let d_jk = if j == k { u[i] } else { 0.0 };
            let d_ik = if i == k { u[j] } else { 0.0 };
            t[(i, j)] =
                (d_jk + d_ik - 2.0 * u[i] * u[j] * u[k]) * cm1_over_g - u[i] * u[j] * u[k] * sg;
        }
        let d_ik = if i == k { 1.0 } else { 0.0 };
        let border = (d_ik - u[i] * u[k]) * sc + u[i] * u[k] * cg;
        t[(i, m - 1)] = border;
        t[(m - 1, i)] = -border;
    }
    t[(m - 1, m - 1)] = -u[k] * sg;
    t
}

/// Real coefficient matrices of the level-m one-form before phases:
/// (E_ij)_{γ_k} = Σ_l R_li Γ_lj;k and (E_ij)_{ξ_k} = R_ki R_kj - δ_ij δ_jk.
///
/// The γ family is antisymmetric (RᵀdR of an orthogonal family), and the
/// δ term of the ξ family makes the one-form traceless, as Ω†dΩ of a
/// determinant-one factor must be.
pub fn e_tensors(m: usize, coords: &CosetCoords) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let n = coords.n();
    let r = build_r(m, coords);
    let rt = r.transpose();
    let e_gamma: Vec<DMatrix<f64>> = (0..m - 1).map(|k| &rt * gamma_tensor(m, coords, k)).collect();
    let e_xi: Vec<DMatrix<f64>> = (0..m - 1)
        .map(|k| {
            DMatrix::from_fn(n, n, |i, j| {
                let quad = r[(k, i)] * r[(k, j)];
                if i == j && j == k {
                    quad - 1.0
                } else {
                    quad
                }
            })
        })
        .collect();
    (e_gamma, e_xi)
}

/// Lower-level product W^(m) = Ω^(m-1) ··· Ω^(2); identity for m = 2.
pub fn w_matrix(m: usize, coords: &CosetCoords) -> CMatrix {
    let n = coords.n();
    assert!((2..=n).contains(&m), "level {m} outside 2..={n}");
    let mut w = CMatrix::identity(n, n);
    for l in (2..m).rev() {
        w *= build_omega_component(l, coords);
    }
    w
}

/// Coefficient matrices (K_ij)_a of the one-forms W^(m)† (Ω^(m)† dΩ^(m)) W^(m),
/// flattened in canonical coset-coordinate order. Each matrix is
/// anti-Hermitian, and the coefficients depend on the coset coordinates only.
#[derive(Debug, Clone)]
pub struct KTensor {
    n: usize,
    coeffs: Vec<CMatrix>,
}

impl KTensor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient matrix of the a-th coset coordinate (canonical order).
    pub fn coefficient(&self, a: usize) -> &CMatrix {
        &self.coeffs[a]
    }

    /// Coefficient of dγ^(m)_r, r zero-based.
    pub fn gamma_coefficient(&self, m: usize, r: usize) -> &CMatrix {
        assert!(r < m - 1);
        &self.coeffs[level_offset(m) + r]
    }

    /// Coefficient of dξ^(m)_r, r zero-based.
    pub fn xi_coefficient(&self, m: usize, r: usize) -> &CMatrix {
        assert!(r < m - 1);
        &self.coeffs[level_offset(m) + (m - 1) + r]
    }
}

/// Weaves the phase prefactor e^{i(ξ_i - ξ_j)} into a real coefficient
/// matrix, producing the level's complex one-form coefficient.
fn apply_phases(e: &DMatrix<f64>, phases: &[Complex64]) -> CMatrix {
    let n = e.nrows();
    CMatrix::from_fn(n, n, |i, j| phases[i] * phases[j].conj() * e[(i, j)])
}

/// Builds every one-form coefficient matrix at a coset point.
///
/// The phase prefactor of each level is attached before conjugation by the
/// lower-level product W^(m), and the ξ coefficients carry the factor i of
/// the phase differentials.
pub fn k_tensor(coords: &CosetCoords) -> KTensor {
    let n = coords.n();
    let mut coeffs = Vec::with_capacity(coords.dim());
    let mut w = CMatrix::identity(n, n); // W^(2) = 1
    for m in 2..=n {
        let (e_gamma, e_xi) = e_tensors(m, coords);
        let mut phases = vec![Complex64::new(1.0, 0.0); n];
        for (i, &x) in coords.xi(m).iter().enumerate() {
            phases[i] = Complex64::cis(x);
        }
        let wh = w.adjoint();
        for e in &e_gamma {
            coeffs.push(&wh * apply_phases(e, &phases) * &w);
        }
        for e in &e_xi {
            coeffs.push(&wh * (apply_phases(e, &phases) * Complex64::i()) * &w);
        }
        if m < n {
            w = build_omega_component(m, coords) * w;
        }
    }
    KTensor { n, coeffs }
}

/// Coset block of the Bures metric: the symmetric N(N-1) × N(N-1) matrix
/// g_ab = Σ_{i<j} Λ_ij Re{ (K_ij)_a conj((K_ij)_b) }, covering same-level and
/// cross-level coordinate pairs alike.
pub fn g_coset(s: &Spectrum, coords: &CosetCoords) -> Result<DMatrix<f64>> {
    assert_eq!(s.n(), coords.n());
    let weights = lambda_weights(s)?;
    let kt = k_tensor(coords);
    let d = coords.dim();
    let mut g = DMatrix::zeros(d, d);
    for a in 0..d {
        let ka = kt.coefficient(a);
        for b in a..d {
            let kb = kt.coefficient(b);
            let mut acc = CompensatedSum::default();
            for (i, j, w) in weights.pairs() {
                acc.add(w * (ka[(i, j)] * kb[(i, j)].conj()).re);
            }
            let v = acc.value();
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    Ok(g)
}

/// Block-structured Bures metric at a point: diagonal eigenvalue block g_d
/// and dense coset block g_c, in the canonical coordinate order.
#[derive(Debug, Clone)]
pub struct BuresMetric {
    n: usize,
    g_d: DVector<f64>,
    g_c: DMatrix<f64>,
}

impl BuresMetric {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Full dimension N²-1.
    pub fn dim(&self) -> usize {
        self.n * self.n - 1
    }

    /// Diagonal of the eigenvalue block.
    pub fn g_d(&self) -> &DVector<f64> {
        &self.g_d
    }

    /// Coset block.
    pub fn g_c(&self) -> &DMatrix<f64> {
        &self.g_c
    }

    pub fn coordinate_order(&self) -> Vec<String> {
        coordinate_labels(self.n)
    }

    /// Assembles the dense (N²-1)×(N²-1) matrix with both blocks in place.
    pub fn full_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let nd = self.n - 1;
        let mut g = DMatrix::zeros(d, d);
        for k in 0..nd {
            g[(k, k)] = self.g_d[k];
        }
        for a in 0..self.g_c.nrows() {
            for b in 0..self.g_c.ncols() {
                g[(nd + a, nd + b)] = self.g_c[(a, b)];
            }
        }
        g
    }
}

/// Evaluates the full closed-form Bures metric at an interior point.
pub fn full_metric(s: &Spectrum, coords: &CosetCoords) -> Result<BuresMetric> {
    let g_d = g_diagonal(s)?;
    let g_c = g_coset(s, coords)?;
    Ok(BuresMetric {
        n: s.n(),
        g_d,
        g_c,
    })
}
