//! Sinc-quadrature parametric finite elements for the spectral fractional
//! Laplace–Beltrami problem `(-Δ_γ)^s u = f` on closed surfaces.
//!
//! The pipeline is:
//!
//! 1. [`mesh`]: a polyhedral (triangle) or bilinear (quad) surface `Γ` whose
//!    vertices lie on the exact surface `γ`, refined uniformly.
//! 2. [`lift`]: maps `Γ → γ` (orthogonal projection or the six-patch generic
//!    lift) with their Jacobians and the area ratio `σ`.
//! 3. [`fem`]: P1/Q1 mass and stiffness matrices and the `σ`-weighted load.
//! 4. [`solver`]: sparse Cholesky for the shifted systems `(μM + A)U = b`.
//! 5. [`sinc`]: the sinc rule for `λ^{-s}` and the weighted sum of shifted
//!    solves that approximates `(-Δ_Γ)^{-s}`.
//! 6. [`sphere`] and [`norms`]: the exact zonal solution on the unit sphere
//!    and the `L²(Γ)` / `H¹(Γ)` error norms.
//! 7. [`study`]: convergence, sinc and `σ` studies, and file export.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fem;
pub mod io;
pub mod lift;
pub mod mesh;
pub mod norms;
pub mod ordering;
pub mod quadrature;
pub mod sinc;
pub mod solver;
pub mod sphere;
pub mod study;
pub mod vec3;

pub use error::{Error, Result};
pub use fem::{FeFunction, FeSpace, SparseSpd};
pub use lift::Lift;
pub use mesh::{CellKind, InitialMesh, MeshQuality, SurfaceMesh};
pub use sinc::SincRule;
pub use solver::{DirectSolver, ShiftedFactor, SolverKind};
pub use sphere::{StepData, ZonalSeries};
