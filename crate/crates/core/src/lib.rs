//! Numerical laboratory for static Klein-Gordon-Maxwell-Proca systems
//!
//!     Delta_g u + m0^2 u = u^(p-1) + omega^2 (q v - 1)^2 u
//!     Delta_g v + (m1^2 + q^2 u^2) v = q u^2
//!
//! on model closed 4-manifolds (flat torus, round sphere), with the
//! electrostatic reduction v = Phi(u), the reduced energy I_p, a
//! mountain-pass saddle search, and diagnostics for the critical
//! exponent p = 4 (bubble profiles, Sobolev quotients, blow-up scales).
//!
//! Sign convention throughout: Delta_g = -div_g grad is the geometer's
//! Laplacian, a nonnegative operator. All integrals are quadratures
//! against the discrete volume element carried by a [`manifold::Discretization`].

pub mod analysis;
pub mod elliptic;
pub mod fields;
pub mod functional;
mod krylov;
pub mod manifold;
pub mod mountain_pass;
pub mod phi_map;

use thiserror::Error;

/// Failure modes surfaced by builders and solvers.
///
/// Grid/shape mismatches between fields and discretizations are treated as
/// programming errors and panic instead; see the module docs of [`elliptic`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid manifold spec: {0}")]
    InvalidSpec(String),

    #[error("invalid physics parameters: {0}")]
    InvalidParams(String),

    #[error("screened solve needs a strictly positive potential (min V = {min_v:.3e})")]
    NonPositivePotential { min_v: f64 },

    #[error("iterative solve hit the iteration cap ({iterations} iterations, residual {residual:.3e})")]
    IterationCap { iterations: usize, residual: f64 },

    #[error("Rayleigh quotient undefined: {0}")]
    DegenerateQuotient(String),

    #[error("invalid seed field: {0}")]
    InvalidSeed(String),

    #[error("energy stays positive along the ray: doubling cap 2^30 exceeded")]
    RayCapExceeded,

    #[error("deformation sweep cap exceeded while the path was still descending (max energy {max_energy:.6e}, gradient norm {grad_norm:.3e})")]
    SweepCapExceeded { max_energy: f64, grad_norm: f64 },

    #[error("refinement stagnated at gradient norm {grad_norm:.3e} (tolerance {tolerance:.3e})")]
    RefinementStagnation {
        grad_norm: f64,
        tolerance: f64,
        /// Best iterate reached, reported with `converged = false`.
        partial: Box<mountain_pass::MptResult>,
    },

    #[error("blow-up: max u exceeded the cap {cap:.3e} (concentration scales {})", format_mu_trajectory(mu_trajectory))]
    BlowUp { cap: f64, mu_trajectory: Vec<f64> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn format_mu_trajectory(mu: &[f64]) -> String {
    let tail: Vec<String> = mu
        .iter()
        .rev()
        .take(6)
        .rev()
        .map(|m| format!("{m:.3e}"))
        .collect();
    format!("mu = [... {}]", tail.join(", "))
}

pub type Result<T> = std::result::Result<T, Error>;
