//! Reference implementations used to validate the closed-form metric.
//!
//! Everything here works directly on density matrices through a Hermitian
//! eigensolver: Uhlmann fidelity, the Bures distance, the eigenbasis
//! quadratic form for infinitesimal distances, and a central-difference
//! metric that knows nothing about the closed-form coefficient machinery.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::coset::{assemble_density, CMatrix, CosetCoords};
use crate::error::{Error, Result};
use crate::metric::{point_to_vec, vec_to_point};
use crate::spectral::{Spectrum, LAMBDA_MIN_FLOOR};

/// Default central-difference step: balances O(h²) truncation against
/// cancellation at double precision.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Eigendecomposition of a Hermitian matrix with a deterministic gauge:
/// eigenvalues sorted descending, each eigenvector's largest-magnitude
/// component rotated to the positive real axis.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: DVector<f64>,
    /// Unitary matrix with eigenvectors as columns.
    pub eigenvectors: CMatrix,
}

/// Decomposes a Hermitian matrix. The input is symmetrized first; callers
/// that care about asymmetry must validate before calling.
pub fn eigen_hermitian(a: &CMatrix) -> Result<EigenSystem> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::InvalidState(format!(
            "expected a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let sym = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let decomp = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        decomp.eigenvalues[j]
            .partial_cmp(&decomp.eigenvalues[i])
            .expect("eigenvalues of a Hermitian matrix are finite reals")
    });

    let mut eigenvalues = DVector::zeros(n);
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues[dst] = decomp.eigenvalues[src];
        let col = decomp.eigenvectors.column(src);
        // gauge: largest-magnitude component real and positive
        let lead = col
            .iter()
            .max_by(|x, y| x.norm_sqr().partial_cmp(&y.norm_sqr()).unwrap())
            .copied()
            .unwrap();
        let phase = if lead.norm() > 0.0 {
            lead.conj() / lead.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            eigenvectors[(i, dst)] = col[i] * phase;
        }
    }
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

fn max_cabs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn validate_density(rho: &CMatrix, label: &str) -> Result<()> {
    let n = rho.nrows();
    if rho.ncols() != n || n == 0 {
        return Err(Error::InvalidState(format!(
            "{label} must be square, got {}x{}",
            n,
            rho.ncols()
        )));
    }
    let herm = max_cabs(&(rho - rho.adjoint()));
    if herm > 1e-8 {
        return Err(Error::InvalidState(format!(
            "{label} is not Hermitian: max |rho - rho^dag| = {herm:.3e}"
        )));
    }
    let tr: Complex64 = rho.diagonal().iter().sum();
    if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-8 {
        return Err(Error::InvalidState(format!(
            "{label} trace is {tr}, expected 1"
        )));
    }
    Ok(())
}

/// Principal square root of a Hermitian positive-semidefinite matrix.
/// Eigenvalues in [-1e-10, 0) are clamped to zero; anything lower is an
/// error because the input was not a state.
fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let eig = eigen_hermitian(a)?;
    let n = a.nrows();
    let mut scaled = eig.eigenvectors.clone();
    for (j, &val) in eig.eigenvalues.iter().enumerate() {
        if val < -1e-10 {
            return Err(Error::NegativeEigenvalue { value: val });
        }
        let root = val.max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= root;
        }
    }
    Ok(&scaled * eig.eigenvectors.adjoint())
}

/// Uhlmann fidelity F(ρ₁, ρ₂) = [Tr √(√ρ₁ ρ₂ √ρ₁)]², clamped into [0, 1].
pub fn fidelity(rho1: &CMatrix, rho2: &CMatrix) -> Result<f64> {
    validate_density(rho1, "rho1")?;
    validate_density(rho2, "rho2")?;
    if rho1.nrows() != rho2.nrows() {
        return Err(Error::InvalidState(format!(
            "dimension mismatch: {} vs {}",
            rho1.nrows(),
            rho2.nrows()
        )));
    }
    let root = psd_sqrt(rho1)?;
    let inner = &root * rho2 * &root;
    let eig = eigen_hermitian(&inner)?;
    let mut tr = 0.0;
    for &val in eig.eigenvalues.iter() {
        if val < -1e-10 {
            return Err(Error::NegativeEigenvalue { value: val });
        }
        tr += val.max(0.0).sqrt();
    }
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// Bures distance d_B = √(2 - 2√F). Zero exactly when the states coincide.
pub fn bures_distance(rho1: &CMatrix, rho2: &CMatrix) -> Result<f64> {
    let f = fidelity(rho1, rho2)?;
    Ok((2.0 - 2.0 * f.sqrt()).max(0.0).sqrt())
}

/// Infinitesimal Bures distance as a quadratic form in a Hermitian traceless
/// perturbation: ½ Σ_ij |⟨i|dρ|j⟩|²/(λ_i + λ_j) over the eigenbasis of ρ.
///
/// The perturbation is symmetrized before use; asymmetry above 1e-8 or a
/// trace above 1e-10 is rejected, as is any ρ with an eigenvalue below the
/// interior floor.
pub fn hubner_form(rho: &CMatrix, drho: &CMatrix) -> Result<f64> {
    validate_density(rho, "rho")?;
    let n = rho.nrows();
    if drho.nrows() != n || drho.ncols() != n {
        return Err(Error::InvalidState(format!(
            "perturbation must be {n}x{n}, got {}x{}",
            drho.nrows(),
            drho.ncols()
        )));
    }
    let asym = max_cabs(&(drho - drho.adjoint()));
    if asym > 1e-8 {
        return Err(Error::InvalidState(format!(
            "perturbation asymmetry {asym:.3e} exceeds 1e-8"
        )));
    }
    let sym = (drho + drho.adjoint()) * Complex64::new(0.5, 0.0);
    let tr: Complex64 = sym.diagonal().iter().sum();
    if tr.norm() > 1e-10 {
        return Err(Error::InvalidState(format!(
            "perturbation trace {tr} exceeds 1e-10"
        )));
    }

    let eig = eigen_hermitian(rho)?;
    let min = eig.eigenvalues[n - 1];
    if min < LAMBDA_MIN_FLOOR {
        return Err(Error::BoundarySpectrum {
            min_lambda: min,
            floor: LAMBDA_MIN_FLOOR,
        });
    }
    let m = eig.eigenvectors.adjoint() * sym * &eig.eigenvectors;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += m[(i, j)].norm_sqr() / (eig.eigenvalues[i] + eig.eigenvalues[j]);
        }
    }
    Ok(0.5 * total)
}

/// Central-difference Bures metric in the canonical coordinates: each ∂_a ρ
/// comes from differencing the assembled density matrix, and the quadratic
/// form is contracted in the numerically computed eigenbasis of ρ.
///
/// Shares nothing with the closed-form coefficient machinery except the
/// density assembly itself.
pub fn finite_diff_metric(s: &Spectrum, coords: &CosetCoords, h: f64) -> Result<DMatrix<f64>> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::StepOutOfRange { h });
    }
    s.interior_lambdas()?;
    let n = s.n();
    let dim = n * n - 1;
    let center = point_to_vec(s, coords);
    let eig = eigen_hermitian(&assemble_density(s, coords))?;

    let mut modes: Vec<CMatrix> = Vec::with_capacity(dim);
    for a in 0..dim {
        let mut plus = center.clone();
        plus[a] += h;
        let mut minus = center.clone();
        minus[a] -= h;
        let (sp, cp) = vec_to_point(n, &plus)?;
        let (sm, cm) = vec_to_point(n, &minus)?;
        let drho = (assemble_density(&sp, &cp) - assemble_density(&sm, &cm))
            / Complex64::new(2.0 * h, 0.0);
        modes.push(eig.eigenvectors.adjoint() * drho * &eig.eigenvectors);
    }

    let mut g = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in a..dim {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += (modes[a][(i, j)] * modes[b][(j, i)]).re
                        / (eig.eigenvalues[i] + eig.eigenvalues[j]);
                }
            }
            let v = 0.5 * acc;
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coset::{build_omega, build_x};
    use crate::metric::{full_metric, g_coset};
    use crate::spectral::g_diagonal;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn random_coords(n: usize, rng: &mut impl Rng) -> CosetCoords {
        let gammas = (2..=n)
            .map(|m| (0..m - 1).map(|_| rng.random_range(0.05..1.5)).collect())
            .collect();
        let xis = (2..=n)
            .map(|m| (0..m - 1).map(|_| rng.random_range(0.0..2.0 * PI)).collect())
            .collect();
        CosetCoords::new(n, gammas, xis).unwrap()
    }

    fn diag_density(lams: &[f64]) -> CMatrix {
        let n = lams.len();
        CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(lams[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    fn random_traceless_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
            for j in i + 1..n {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        let shift: Complex64 = m.diagonal().iter().sum::<Complex64>() / n as f64;
        for i in 0..n {
            m[(i, i)] -= shift;
        }
        m
    }

    #[test]
    fn eigen_reconstructs_and_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let s = Spectrum::new(vec![0.7, 0.5, 1.1]).unwrap();
        let rho = assemble_density(&s, &random_coords(4, &mut rng));
        let eig = eigen_hermitian(&rho).unwrap();
        let lam = CMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                Complex64::new(eig.eigenvalues[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let rebuilt = &eig.eigenvectors * lam * eig.eigenvectors.adjoint();
        assert!(max_cabs(&(rebuilt - &rho)) < 1e-10);
        for k in 1..4 {
            assert!(eig.eigenvalues[k - 1] >= eig.eigenvalues[k]);
        }
        // gauge determinism: a second run is bit-identical
        let again = eigen_hermitian(&rho).unwrap();
        assert_eq!(eig.eigenvectors, again.eigenvectors);
        // each column's largest component is real and positive
        for j in 0..4 {
            let col = eig.eigenvectors.column(j);
            let lead = col
                .iter()
                .max_by(|x, y| x.norm_sqr().partial_cmp(&y.norm_sqr()).unwrap())
                .unwrap();
            assert!(lead.im.abs() < 1e-14 && lead.re > 0.0);
        }
    }

    #[test]
    fn fidelity_of_identical_states_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let s = Spectrum::new(vec![0.8, 0.6]).unwrap();
        let rho = assemble_density(&s, &random_coords(3, &mut rng));
        let f = fidelity(&rho, &rho).unwrap();
        assert!((f - 1.0).abs() < 1e-10);
        assert!(bures_distance(&rho, &rho).unwrap() < 1e-7);
    }

    #[test]
    fn fidelity_commuting_closed_form() {
        let rho1 = diag_density(&[0.5, 0.5]);
        let rho2 = diag_density(&[0.75, 0.25]);
        let f = fidelity(&rho1, &rho2).unwrap();
        let want = 0.5 + 3f64.sqrt() / 4.0;
        assert!((f - want).abs() < 1e-12, "{f} vs {want}");

        let lam = [0.5, 0.3, 0.2];
        let mu = [0.1, 0.6, 0.3];
        let f = fidelity(&diag_density(&lam), &diag_density(&mu)).unwrap();
        let want: f64 = lam
            .iter()
            .zip(&mu)
            .map(|(&l, &m)| (l * m).sqrt())
            .sum::<f64>()
            .powi(2);
        assert!((f - want).abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let s1 = Spectrum::new(vec![rng.random_range(0.2..1.3), rng.random_range(0.2..1.3)]).unwrap();
            let s2 = Spectrum::new(vec![rng.random_range(0.2..1.3), rng.random_range(0.2..1.3)]).unwrap();
            let r1 = assemble_density(&s1, &random_coords(3, &mut rng));
            let r2 = assemble_density(&s2, &random_coords(3, &mut rng));
            let f12 = fidelity(&r1, &r2).unwrap();
            let f21 = fidelity(&r2, &r1).unwrap();
            assert!((0.0..=1.0).contains(&f12));
            assert!((f12 - f21).abs() < 1e-10);
        }
    }

    #[test]
    fn fidelity_rejects_bad_states() {
        let mut bad = diag_density(&[0.5, 0.5]);
        bad[(0, 1)] = Complex64::new(0.0, 0.5); // not Hermitian
        assert!(matches!(
            fidelity(&bad, &diag_density(&[0.5, 0.5])),
            Err(Error::InvalidState(_))
        ));

        let not_psd = diag_density(&[1.0 + 1e-6, -1e-6]);
        assert!(matches!(
            fidelity(&not_psd, &diag_density(&[0.5, 0.5])),
            Err(Error::NegativeEigenvalue { .. })
        ));
    }

    #[test]
    fn bures_distance_approaches_sqrt_two_for_disjoint_states() {
        let eps = 1e-8;
        let d = bures_distance(
            &diag_density(&[1.0 - eps, eps]),
            &diag_density(&[eps, 1.0 - eps]),
        )
        .unwrap();
        assert!(d > 1.40 && d <= 2f64.sqrt() + 1e-12, "d = {d}");
    }

    #[test]
    fn bures_distance_squared_matches_quadratic_form_at_small_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let s = Spectrum::new(vec![0.8, 0.5]).unwrap();
        let coords = random_coords(3, &mut rng);
        let g = full_metric(&s, &coords).unwrap().full_matrix();
        let center = point_to_vec(&s, &coords);
        let dir = DVector::from_fn(center.len(), |k, _| 0.5 + 0.1 * k as f64);
        let t = 1e-3;
        let step = &dir * t;
        let (sp, cp) = vec_to_point(3, &(&center + &step)).unwrap();
        let d = bures_distance(
            &assemble_density(&s, &coords),
            &assemble_density(&sp, &cp),
        )
        .unwrap();
        let quad = (step.transpose() * &g * &step)[(0, 0)];
        assert!(
            (d * d - quad).abs() < 5e-3 * quad,
            "d^2 = {:e}, quadratic form = {quad:e}",
            d * d
        );
    }

    #[test]
    fn hubner_form_basics() {
        let rho = diag_density(&[0.6, 0.4]);
        let zero = CMatrix::zeros(2, 2);
        assert_eq!(hubner_form(&rho, &zero).unwrap(), 0.0);

        // diagonal perturbation of a diagonal state: Σ dρ_ii²/(4 λ_i)
        let lams = [0.5, 0.3, 0.2];
        let d = [0.02, -0.05, 0.03];
        let rho = diag_density(&lams);
        let drho = CMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                Complex64::new(d[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let got = hubner_form(&rho, &drho).unwrap();
        let want: f64 = lams.iter().zip(&d).map(|(&l, &x)| x * x / (4.0 * l)).sum();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn hubner_form_is_unitarily_invariant_and_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..10 {
            let n = rng.random_range(2..=4);
            let thetas: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.3..1.2)).collect();
            let rho = diag_density(&Spectrum::new(thetas).unwrap().lambdas());
            let drho = random_traceless_hermitian(n, &mut rng);
            let base = hubner_form(&rho, &drho).unwrap();
            assert!(base >= 0.0);

            // unitary = coset representative times diagonal phases
            let coords = random_coords(n, &mut rng);
            let mut phase_coords = CosetCoords::zero(n).unwrap();
            for m in 2..=n {
                for (k, x) in phase_coords.xi_mut(m).iter_mut().enumerate() {
                    *x = rng.random_range(0.0..2.0 * PI) + k as f64 * 0.1;
                }
            }
            let u = build_omega(&coords) * build_x(n, &phase_coords);
            let moved = hubner_form(&(&u * &rho * u.adjoint()), &(&u * &drho * u.adjoint())).unwrap();
            assert!((moved - base).abs() < 1e-10, "{moved} vs {base}");
        }
    }

    #[test]
    fn hubner_form_rejects_bad_perturbations() {
        let rho = diag_density(&[0.6, 0.4]);
        let mut asym = CMatrix::zeros(2, 2);
        asym[(0, 1)] = Complex64::new(1e-3, 0.0);
        assert!(matches!(
            hubner_form(&rho, &asym),
            Err(Error::InvalidState(_))
        ));

        let traced = diag_density(&[0.1, 0.1]);
        assert!(matches!(
            hubner_form(&rho, &traced),
            Err(Error::InvalidState(_))
        ));

        let boundary = diag_density(&[1.0, 0.0]);
        assert!(matches!(
            hubner_form(&boundary, &CMatrix::zeros(2, 2)),
            Err(Error::BoundarySpectrum { .. })
        ));
    }

    #[test]
    fn fd_metric_coset_block_vanishes_at_maximally_mixed() {
        let s = Spectrum::new(vec![FRAC_PI_4]).unwrap();
        let coords = CosetCoords::new(2, vec![vec![0.6]], vec![vec![0.7]]).unwrap();
        let g = finite_diff_metric(&s, &coords, DEFAULT_FD_STEP).unwrap();
        for a in 1..3 {
            for b in 1..3 {
                assert!(g[(a, b)].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn fd_metric_diagonal_block_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let s = Spectrum::new(vec![0.9, 0.5]).unwrap();
        let coords = random_coords(3, &mut rng);
        let g = finite_diff_metric(&s, &coords, DEFAULT_FD_STEP).unwrap();
        let gd = g_diagonal(&s).unwrap();
        for k in 0..2 {
            assert!((g[(k, k)] - gd[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn fd_metric_rejects_out_of_range_step() {
        let s = Spectrum::new(vec![0.9]).unwrap();
        let coords = CosetCoords::zero(2).unwrap();
        assert!(matches!(
            finite_diff_metric(&s, &coords, 1e-8),
            Err(Error::StepOutOfRange { .. })
        ));
        assert!(matches!(
            finite_diff_metric(&s, &coords, 1e-2),
            Err(Error::StepOutOfRange { .. })
        ));
    }

    #[test]
    fn fd_metric_residual_shrinks_quadratically() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let s = Spectrum::new(vec![0.9, 0.55]).unwrap();
        let coords = random_coords(3, &mut rng);
        let exact = full_metric(&s, &coords).unwrap().full_matrix();
        let res = |h: f64| {
            let fd = finite_diff_metric(&s, &coords, h).unwrap();
            (&fd - &exact).iter().map(|v| v.abs()).fold(0.0, f64::max)
        };
        let r1 = res(1e-3);
        let r2 = res(5e-4);
        let ratio = r1 / r2;
        assert!(
            (3.0..6.0).contains(&ratio),
            "residuals {r1:e} -> {r2:e}, ratio {ratio}"
        );
    }

    #[test]
    fn g_coset_two_level_matches_fd_exactly_where_it_should() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let s = Spectrum::new(vec![0.6]).unwrap();
        let coords = random_coords(2, &mut rng);
        let g = g_coset(&s, &coords).unwrap();
        let fd = finite_diff_metric(&s, &coords, DEFAULT_FD_STEP).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert!((g[(a, b)] - fd[(a + 1, b + 1)]).abs() < 1e-7);
            }
        }
    }
}
