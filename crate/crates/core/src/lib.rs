//! Bures geometry of N-level density matrices in canonical coset
//! coordinates.
//!
//! A non-degenerate N-level density matrix is parameterized as
//! ρ = Ω diag(λ) Ω†: the eigenvalues λ live on the probability simplex,
//! encoded by N-1 angles, and Ω is a representative of the unitary group
//! modulo its maximal torus, built as an ordered product of per-level coset
//! components with N(N-1) radius/phase coordinates. In these coordinates the
//! Bures metric — the Riemannian metric induced by Uhlmann fidelity — splits
//! into a diagonal eigenvalue block and a dense coset block with closed-form
//! entries, and the associated measure factorizes into an eigenvalue part
//! times a truncated Haar part.
//!
//! The crate computes the closed-form metric, validates it against
//! eigendecomposition-based references (fidelity, the infinitesimal
//! quadratic form, and a central-difference metric), and estimates Bures
//! volumes by deterministic Monte Carlo. A CLI exposes the same operations
//! on JSON point files.

pub mod cli;
pub mod coset;
pub mod error;
pub mod measure;
pub mod metric;
pub mod oracle;
pub mod spectral;

pub use coset::{CMatrix, CosetCoords};
pub use error::{Error, Result};
pub use metric::BuresMetric;
pub use spectral::Spectrum;
