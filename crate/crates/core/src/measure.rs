//! Volume element, measure factorization diagnostics, and Monte Carlo
//! volume estimation.
//!
//! The block structure of the metric makes the volume element a product:
//! √det g = √(det g_d · det g_c). Because the spectrum enters g_c only
//! through the pair weights Λ_ij — each eigenvalue pair feeding exactly two
//! real coset directions — det g_c separates as Π_{i<j} Λ_ij² times a
//! function of the coset coordinates alone. `factorization_check` verifies
//! that separation numerically and reports the fitted exponent.
//!
//! The Monte Carlo estimator integrates √det g over θ_k ∈ [0, π/2], the
//! polar coset domain (radius γ^(m) ∈ [0, π/2], direction on the positive
//! orthant), and ξ ∈ [0, 2π), then divides by N! for the eigenvalue
//! permutation quotient. For N = 2 this domain reproduces the closed-form
//! volume π²/8; for N = 3 the result is a domain-convention volume.

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric::{g_coset, lambda_weights, CompensatedSum};
use crate::coset::CosetCoords;
use crate::spectral::{g_diagonal, Spectrum};

/// Samples closer than this to an eigenvalue degeneracy or to the simplex
/// boundary are rejected (counted, required under 1% of the stream).
pub const DEGENERACY_REJECT: f64 = 1e-8;

/// Maximum accepted relative spread of the factorization ratios.
pub const FACTORIZATION_SPREAD_TOL: f64 = 1e-8;

/// Fixed Monte Carlo chunk plan: chunk c draws from ChaCha8 stream c+1 of
/// the run seed, so the estimate is independent of thread scheduling.
pub const MC_CHUNK_SIZE: u64 = 16_384;

/// Determinant of a symmetric positive-semidefinite matrix: Cholesky when
/// positive definite, otherwise symmetric eigenvalues with clamping.
/// Eigenvalues in [-1e-10, 0) count as zero; anything lower aborts.
fn psd_det(g: &DMatrix<f64>) -> Result<f64> {
    if let Some(ch) = Cholesky::new(g.clone()) {
        return Ok(ch.determinant());
    }
    let eig = g.clone().symmetric_eigen().eigenvalues;
    let mut det = 1.0;
    for &e in eig.iter() {
        if e < -1e-10 {
            return Err(Error::IndefiniteMetric { value: e });
        }
        det *= e.max(0.0);
    }
    Ok(det)
}

/// Bures volume element √(det g_d · det g_c) at an interior point, using
/// the block structure instead of the assembled full matrix. Exactly zero
/// on degenerate spectra.
pub fn volume_element(s: &Spectrum, coords: &CosetCoords) -> Result<f64> {
    let g_d = g_diagonal(s)?;
    let det_d: f64 = g_d.iter().product();
    // det g_c carries the squared pair weights as exact factors, so one
    // degenerate pair nulls it
    if lambda_weights(s)?.min() == 0.0 {
        return Ok(0.0);
    }
    let det_c = psd_det(&g_coset(s, coords)?)?;
    Ok((det_d * det_c).sqrt())
}

/// Outcome of the measure-factorization diagnostic at one coset point.
#[derive(Debug, Clone)]
pub struct FactorizationReport {
    /// Exponent p in Π Λ_ij^p that makes det g_c / Π Λ_ij^p spectrum-free.
    pub fitted_exponent: u32,
    /// Relative spread of the ratios across the input spectra at that
    /// exponent.
    pub max_rel_spread: f64,
    /// Ratio per input spectrum at the fitted exponent.
    pub ratios: Vec<f64>,
    pub pass: bool,
}

/// Tests that det g_c separates into a spectrum factor Π Λ_ij^p times a
/// coset-only factor, fitting p over {1, 2}. Requires at least two
/// non-degenerate interior spectra.
pub fn factorization_check(
    coords: &CosetCoords,
    spectra: &[Spectrum],
) -> Result<FactorizationReport> {
    if spectra.len() < 2 {
        return Err(Error::InvalidArgument(
            "factorization check needs at least two spectra".into(),
        ));
    }
    let mut ratios_by_exp: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for s in spectra {
        if s.n() != coords.n() {
            return Err(Error::InvalidArgument(
                "spectrum and coset coordinates disagree on the level count".into(),
            ));
        }
        let weights = lambda_weights(s)?;
        if let Some((i, j, _)) = weights.pairs().find(|&(_, _, w)| w == 0.0) {
            return Err(Error::DegenerateSpectrum { i, j });
        }
        let det = psd_det(&g_coset(s, coords)?)?;
        let prod = weights.product();
        ratios_by_exp[0].push(det / prod);
        ratios_by_exp[1].push(det / (prod * prod));
    }

    let spread = |ratios: &[f64]| -> f64 {
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = ratios.iter().map(|r| r.abs()).sum::<f64>() / ratios.len() as f64;
        if mean == 0.0 {
            f64::INFINITY
        } else {
            (hi - lo) / mean
        }
    };
    let spreads = [spread(&ratios_by_exp[0]), spread(&ratios_by_exp[1])];
    if !spreads[0].is_finite() && !spreads[1].is_finite() {
        return Err(Error::InvalidArgument(
            "coset block is singular at this coset point; ratios are degenerate".into(),
        ));
    }
    let fitted = if spreads[1] <= spreads[0] { 1usize } else { 0 };
    Ok(FactorizationReport {
        fitted_exponent: fitted as u32 + 1,
        max_rel_spread: spreads[fitted],
        ratios: ratios_by_exp[fitted].clone(),
        pass: spreads[fitted] < FACTORIZATION_SPREAD_TOL,
    })
}

/// Monte Carlo estimate of the Bures volume with its sampling plan.
/// Reproducible: (n, samples, seed) fully determine every field.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeEstimate {
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    pub value: f64,
    pub std_error: f64,
    /// Samples discarded for sitting within the rejection margin of a
    /// degeneracy or the simplex boundary (they contribute zero).
    pub rejected: u64,
    pub chunk_size: u64,
    pub chunks: u64,
    pub rng: &'static str,
    /// Domain caveat: the n = 2 domain reproduces the closed-form volume;
    /// for n = 3 single coverage of the flag manifold is a convention.
    pub convention: &'static str,
}

struct ChunkStats {
    sum: f64,
    sum_sq: f64,
    rejected: u64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Direction measure of the positive orthant of the (m-2)-sphere.
fn orthant_angle(m: usize) -> f64 {
    match m {
        2 => 1.0,
        3 => std::f64::consts::FRAC_PI_2,
        _ => unreachable!("volume estimation is restricted to n <= 3"),
    }
}

/// Product of coordinate ranges and direction measures of the sampling
/// domain, before the N! quotient.
fn domain_volume(n: usize) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut v = FRAC_PI_2.powi(n as i32 - 1);
    for m in 2..=n {
        v *= FRAC_PI_2 * orthant_angle(m) * (2.0 * PI).powi(m as i32 - 1);
    }
    v
}

/// One uniform draw from the sampling domain plus the polar Jacobian
/// Π_m r_m^{m-2} that converts it back to Cartesian coset measure.
fn sample_domain_point(n: usize, rng: &mut impl Rng) -> (Spectrum, CosetCoords, f64) {
    use std::f64::consts::{FRAC_PI_2, PI};
    let thetas: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.0..FRAC_PI_2)).collect();
    let mut gammas = Vec::with_capacity(n - 1);
    let mut xis = Vec::with_capacity(n - 1);
    let mut jacobian = 1.0;
    for m in 2..=n {
        let radius = rng.random_range(0.0..FRAC_PI_2);
        let direction = match m {
            2 => vec![1.0],
            3 => {
                let phi = rng.random_range(0.0..FRAC_PI_2);
                vec![phi.cos(), phi.sin()]
            }
            _ => unreachable!("volume estimation is restricted to n <= 3"),
        };
        gammas.push(direction.iter().map(|d| radius * d).collect());
        jacobian *= radius.powi(m as i32 - 2);
        xis.push((0..m - 1).map(|_| rng.random_range(0.0..2.0 * PI)).collect());
    }
    let s = Spectrum::new(thetas).expect("sampled angles lie in range");
    let coords = CosetCoords::new(n, gammas, xis).expect("sampled coordinates are well-formed");
    (s, coords, jacobian)
}

fn within_rejection_margin(lams: &[f64]) -> bool {
    let n = lams.len();
    if lams.iter().any(|&l| l < DEGENERACY_REJECT) {
        return true;
    }
    for i in 0..n {
        for j in i + 1..n {
            if (lams[i] - lams[j]).abs() < DEGENERACY_REJECT {
                return true;
            }
        }
    }
    false
}

/// Monte Carlo Bures volume for n ∈ {2, 3} with at least 10⁴ samples.
///
/// Chunks are mapped over a thread pool but each chunk owns a derived RNG
/// stream and partial sums combine in fixed chunk order, so the estimate is
/// bit-reproducible for a given (n, samples, seed).
pub fn mc_volume(n: usize, samples: u64, seed: u64) -> Result<VolumeEstimate> {
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "volume estimation supports n in {{2, 3}}, got {n}"
        )));
    }
    if samples < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10000 samples, got {samples}"
        )));
    }
    let chunks = samples.div_ceil(MC_CHUNK_SIZE);
    let stats: Vec<Result<ChunkStats>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c + 1);
            let count = MC_CHUNK_SIZE.min(samples - c * MC_CHUNK_SIZE);
            let mut sum = CompensatedSum::default();
            let mut sum_sq = CompensatedSum::default();
            let mut rejected = 0;
            for _ in 0..count {
                let (s, coords, jacobian) = sample_domain_point(n, &mut rng);
                if within_rejection_margin(&s.lambdas()) {
                    rejected += 1;
                    continue;
                }
                let f = volume_element(&s, &coords)? * jacobian;
                sum.add(f);
                sum_sq.add(f * f);
            }
            Ok(ChunkStats {
                sum: sum.value(),
                sum_sq: sum_sq.value(),
                rejected,
            })
        })
        .collect();

    let mut sum = CompensatedSum::default();
    let mut sum_sq = CompensatedSum::default();
    let mut rejected = 0;
    for chunk in stats {
        let chunk = chunk?;
        sum.add(chunk.sum);
        sum_sq.add(chunk.sum_sq);
        rejected += chunk.rejected;
    }
    if rejected * 100 >= samples {
        return Err(Error::ExcessiveRejection { rejected, samples });
    }

    let count = samples as f64;
    let mean = sum.value() / count;
    let variance = ((sum_sq.value() - count * mean * mean) / (count - 1.0)).max(0.0);
    let scale = domain_volume(n) / factorial(n);
    Ok(VolumeEstimate {
        n,
        samples,
        seed,
        value: scale * mean,
        std_error: scale * (variance / count).sqrt(),
        rejected,
        chunk_size: MC_CHUNK_SIZE,
        chunks,
        rng: "chacha8, one stream per chunk",
        convention: if n == 2 {
            "domain validated against the closed-form volume"
        } else {
            "domain-convention volume"
        },
    })
}

/// Draws an interior point with margins on the smallest eigenvalue and the
/// smallest eigenvalue gap; used by validation sweeps, where conditioning of
/// the finite-difference reference matters.
pub fn sample_interior_point(
    n: usize,
    rng: &mut impl Rng,
    min_lambda: f64,
    min_gap: f64,
) -> (Spectrum, CosetCoords) {
    use std::f64::consts::{FRAC_PI_2, PI};
    loop {
        let thetas: Vec<f64> = (0..n - 1)
            .map(|_| rng.random_range(0.02..FRAC_PI_2 - 0.02))
            .collect();
        let s = Spectrum::new(thetas).expect("sampled angles lie in range");
        let lams = s.lambdas();
        if lams.iter().any(|&l| l < min_lambda) {
            continue;
        }
        let mut gap_ok = true;
        for i in 0..n {
            for j in i + 1..n {
                gap_ok &= (lams[i] - lams[j]).abs() >= min_gap;
            }
        }
        if !gap_ok {
            continue;
        }
        let gammas = (2..=n)
            .map(|m| (0..m - 1).map(|_| rng.random_range(0.02..FRAC_PI_2)).collect())
            .collect();
        let xis = (2..=n)
            .map(|m| (0..m - 1).map(|_| rng.random_range(0.0..2.0 * PI)).collect())
            .collect();
        let coords = CosetCoords::new(n, gammas, xis).expect("sampled coordinates are well-formed");
        return (s, coords);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn volume_element_two_level_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        for _ in 0..20 {
            let (s, coords) = sample_interior_point(2, &mut rng, 0.01, 0.01);
            let v = volume_element(&s, &coords).unwrap();
            let lams = s.lambdas();
            let lam12 = (lams[0] - lams[1]).powi(2);
            let gam = coords.gamma(2)[0];
            let want = lam12 * gam.sin() * gam.cos();
            assert!((v - want).abs() < 1e-12, "{v} vs {want}");
        }
    }

    #[test]
    fn volume_element_vanishes_on_degenerate_spectrum() {
        let s = Spectrum::new(vec![FRAC_PI_4]).unwrap();
        let coords = CosetCoords::new(2, vec![vec![0.8]], vec![vec![0.3]]).unwrap();
        assert_eq!(volume_element(&s, &coords).unwrap(), 0.0);
    }

    #[test]
    fn volume_element_matches_full_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for n in 2..=3usize {
            for _ in 0..5 {
                let (s, coords) = sample_interior_point(n, &mut rng, 0.02, 0.02);
                let v = volume_element(&s, &coords).unwrap();
                let fd = oracle::finite_diff_metric(&s, &coords, 1e-5).unwrap();
                let want = fd.determinant().abs().sqrt();
                assert!(
                    (v - want).abs() <= 1e-5 * want.abs().max(1e-12),
                    "n={n}: {v} vs {want}"
                );
            }
        }
    }

    #[test]
    fn factorization_fits_exponent_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        for n in 2..=3usize {
            let (_, coords) = sample_interior_point(n, &mut rng, 0.05, 0.05);
            let spectra: Vec<Spectrum> = (0..5)
                .map(|_| sample_interior_point(n, &mut rng, 0.05, 0.05).0)
                .collect();
            let report = factorization_check(&coords, &spectra).unwrap();
            assert_eq!(report.fitted_exponent, 2, "n={n}");
            assert!(report.pass, "n={n} spread {:e}", report.max_rel_spread);
            assert_eq!(report.ratios.len(), 5);
        }
    }

    #[test]
    fn factorization_rejects_degenerate_and_short_input() {
        let coords = CosetCoords::new(2, vec![vec![0.7]], vec![vec![0.2]]).unwrap();
        let degenerate = Spectrum::new(vec![FRAC_PI_4]).unwrap();
        let fine = Spectrum::new(vec![0.5]).unwrap();
        assert!(matches!(
            factorization_check(&coords, &[degenerate, fine.clone()]),
            Err(Error::DegenerateSpectrum { .. })
        ));
        assert!(matches!(
            factorization_check(&coords, &[fine]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn mc_volume_is_reproducible() {
        let a = mc_volume(2, 20_000, 1234).unwrap();
        let b = mc_volume(2, 20_000, 1234).unwrap();
        assert_eq!(a, b);
        assert!(a.std_error >= 0.0);
        assert_eq!(a.chunks, 2);

        let c = mc_volume(2, 20_000, 99).unwrap();
        assert_ne!(a.value, c.value);
    }

    #[test]
    fn mc_volume_tracks_known_two_level_value() {
        let est = mc_volume(2, 50_000, 7).unwrap();
        let want = std::f64::consts::PI.powi(2) / 8.0;
        assert!(
            (est.value - want).abs() < 4.0 * est.std_error.max(1e-4),
            "estimate {} ± {}, reference {want}",
            est.value,
            est.std_error
        );
        assert!(est.rejected < est.samples / 100);
    }

    #[test]
    fn mc_volume_error_shrinks_with_sample_count() {
        let small = mc_volume(2, 20_000, 5).unwrap();
        let large = mc_volume(2, 40_000, 5).unwrap();
        let ratio = large.std_error / small.std_error;
        assert!((0.6..0.82).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn mc_volume_validates_arguments() {
        assert!(matches!(
            mc_volume(4, 20_000, 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            mc_volume(2, 100, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn interior_sampler_respects_margins() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        for _ in 0..50 {
            let (s, coords) = sample_interior_point(3, &mut rng, 0.05, 0.03);
            let lams = s.lambdas();
            assert!(lams.iter().all(|&l| l >= 0.05));
            for i in 0..3 {
                for j in i + 1..3 {
                    assert!((lams[i] - lams[j]).abs() >= 0.03);
                }
            }
            assert_eq!(coords.n(), 3);
        }
    }
}
