//! Entropy-variable local discontinuous Galerkin solver for nonlinear
//! cross-diffusion systems `∂ₜρ − ∇·(A(ρ)∇ρ) = f(ρ)`.
//!
//! The unknown is the entropy variable `w = s'(ρ)`; densities are recovered as
//! `ρ = u(w)`, which lies in the admissible set for every finite `w`.

pub mod assembly;
pub mod config;
pub mod dgspace;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod mesh;
pub mod models;
pub mod output;
pub mod stepper;
pub mod system;

pub use error::{Error, Result};
