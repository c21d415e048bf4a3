//! Random-matrix toolkit for checking eigenvector equipartition numerically.
//!
//! A composite Wigner matrix `H = Σ σ_ι H_ι` (with `Σ σ_ι² = 1`) has eigenvectors
//! whose energy splits between the components: `w_α* H_ι w_α ≈ σ_ι λ_α` up to
//! errors of order `N^{-1/2}`. The modules here sample such models, compute
//! resolvents and semicircle quantities, and run Monte Carlo verifiers that turn
//! the asymptotic statements into pass/fail tests with explicit tolerances.

pub mod cumulants;
pub mod ensembles;
pub mod linalg;
pub mod rng;
pub mod semicircle;
pub mod spectral;
pub mod verify;

pub use num_complex::Complex64 as C64;
