//! The auxiliary electrostatic map Phi(u), its differential, and the
//! reduced coupling functional Psi.
//!
//! Phi(u) is the unique solution of
//!
//! ```text
//! Delta_g Phi + (m1^2 + q^2 u^2) Phi = q u^2,
//! ```
//!
//! which satisfies 0 <= Phi(u) <= 1/q. Its differential V_u = DPhi(u) in a
//! direction phi solves the same screened equation with right-hand side
//! 2 q u (1 - q Phi(u)) phi. The functional
//!
//! ```text
//! Psi(u) = 1/2 int (1 - q Phi(u)) u^2
//! ```
//!
//! has derivative DPsi(u)(phi) = int (1 - q Phi(u))^2 u phi; the quadratic
//! Phi-dependence drops out of the derivative, which is what makes the
//! reduced one-field formulation workable. Phi is recomputed on every call
//! at the caller's tolerance; nothing is cached.

use crate::elliptic::{self, ScalarField};
use crate::manifold::Discretization;
use crate::{Error, Result};

/// Default relative tolerance for the inner screened solves. Two orders
/// tighter than the outer solver tolerances so that differentiation through
/// Phi stays clean at working precision.
pub const DEFAULT_PHI_TOL: f64 = 1e-10;

/// Physical parameters of the system: charge q, masses m0 (particle) and
/// m1 (field), phase omega, and the power nonlinearity exponent p.
///
/// The admissible phase range is omega^2 < m0^2 and the exponent range is
/// 2 < p <= 4 (p = 4 is the critical exponent in dimension 4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsParams {
    q: f64,
    m0: f64,
    m1: f64,
    omega: f64,
    p: f64,
}

impl PhysicsParams {
    pub fn new(q: f64, m0: f64, m1: f64, omega: f64, p: f64) -> Result<Self> {
        let params = Self::with_phase_unchecked(q, m0, m1, omega, p)?;
        if !(omega * omega < m0 * m0) {
            return Err(Error::InvalidParams(format!(
                "phase must satisfy omega^2 < m0^2, got omega = {omega}, m0 = {m0}"
            )));
        }
        Ok(params)
    }

    /// Like [`PhysicsParams::new`] but without the phase admissibility
    /// check. The degenerate constant families approach (and can cross)
    /// omega^2 = m0^2, so their construction needs this escape hatch;
    /// everything downstream evaluates fine, only the existence theory's
    /// hypotheses are void.
    pub fn with_phase_unchecked(q: f64, m0: f64, m1: f64, omega: f64, p: f64) -> Result<Self> {
        for (name, v) in [("q", q), ("m0", m0), ("m1", m1)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !omega.is_finite() {
            return Err(Error::InvalidParams(format!(
                "omega must be finite, got {omega}"
            )));
        }
        if !(p > 2.0 && p <= 4.0) {
            return Err(Error::InvalidParams(format!(
                "exponent p must lie in (2, 4], got {p}"
            )));
        }
        Ok(PhysicsParams { q, m0, m1, omega, p })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// lambda = m0^2 - omega^2, the effective linear coefficient.
    pub fn lambda(&self) -> f64 {
        self.m0 * self.m0 - self.omega * self.omega
    }

    pub fn with_p(self, p: f64) -> Result<Self> {
        Self::new(self.q, self.m0, self.m1, self.omega, p)
    }

    pub fn with_omega(self, omega: f64) -> Result<Self> {
        Self::new(self.q, self.m0, self.m1, omega, self.p)
    }
}

/// Screening potential m1^2 + q^2 u^2 of the Phi-equation.
fn screening(params: &PhysicsParams, u: &ScalarField) -> ScalarField {
    let (q2, m1sq) = (params.q * params.q, params.m1 * params.m1);
    u.map(|v| m1sq + q2 * v * v)
}

/// Solve for Phi(u).
pub fn phi(
    d: &Discretization,
    params: &PhysicsParams,
    u: &ScalarField,
    tol: f64,
) -> Result<ScalarField> {
    let v = screening(params, u);
    let q = params.q;
    let f = u.map(|x| q * x * x);
    Ok(elliptic::screened_solve(d, &v, &f, tol)?.field)
}

/// Directional derivative V_u(direction) = DPhi(u)(direction).
pub fn dphi(
    d: &Discretization,
    params: &PhysicsParams,
    u: &ScalarField,
    direction: &ScalarField,
    tol: f64,
) -> Result<ScalarField> {
    let phi_u = phi(d, params, u, tol)?;
    dphi_with_phi(d, params, u, &phi_u, direction, tol)
}

/// Like [`dphi`], reusing an already-computed Phi(u). The refinement loop
/// needs many directional derivatives at one base point.
pub fn dphi_with_phi(
    d: &Discretization,
    params: &PhysicsParams,
    u: &ScalarField,
    phi_u: &ScalarField,
    direction: &ScalarField,
    tol: f64,
) -> Result<ScalarField> {
    let v = screening(params, u);
    let q = params.q;
    let mut rhs = u.zip_map(phi_u, |uv, pv| 2.0 * q * uv * (1.0 - q * pv));
    rhs = rhs.zip_map(direction, |a, b| a * b);
    Ok(elliptic::screened_solve(d, &v, &rhs, tol)?.field)
}

/// Psi(u) = 1/2 int (1 - q Phi(u)) u^2.
pub fn psi(d: &Discretization, params: &PhysicsParams, u: &ScalarField, tol: f64) -> Result<f64> {
    let phi_u = phi(d, params, u, tol)?;
    let q = params.q;
    let integrand = u.zip_map(&phi_u, |uv, pv| (1.0 - q * pv) * uv * uv);
    Ok(0.5 * d.integrate(&integrand))
}

/// The energy form of Psi:
/// 1/2 int (|grad Phi|^2 + m1^2 Phi^2) + 1/2 int (1 - q Phi)^2 u^2.
/// Agrees with [`psi`] up to the inner-solve tolerance; the cross terms
/// cancel through the defining equation of Phi tested against Phi itself.
pub fn psi_energy_form(
    d: &Discretization,
    params: &PhysicsParams,
    u: &ScalarField,
    tol: f64,
) -> Result<f64> {
    let phi_u = phi(d, params, u, tol)?;
    let q = params.q;
    let m1sq = params.m1 * params.m1;
    let dirichlet = elliptic::l2_inner(d, &phi_u, &d.laplacian(&phi_u));
    let mass = m1sq * elliptic::l2_inner(d, &phi_u, &phi_u);
    let screened = u.zip_map(&phi_u, |uv, pv| {
        let s = 1.0 - q * pv;
        s * s * uv * uv
    });
    Ok(0.5 * (dirichlet + mass) + 0.5 * d.integrate(&screened))
}

/// DPsi(u)(direction) = int (1 - q Phi(u))^2 u * direction.
pub fn dpsi(
    d: &Discretization,
    params: &PhysicsParams,
    u: &ScalarField,
    direction: &ScalarField,
    tol: f64,
) -> Result<f64> {
    let phi_u = phi(d, params, u, tol)?;
    let q = params.q;
    let integrand = u
        .zip_map(&phi_u, |uv, pv| {
            let s = 1.0 - q * pv;
            s * s * uv
        })
        .zip_map(direction, |a, b| a * b);
    Ok(d.integrate(&integrand))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields;
    use crate::manifold::ManifoldSpec;
    use std::f64::consts::PI;

    fn torus(n: usize) -> Discretization {
        ManifoldSpec::Torus4 {
            lengths: [2.0 * PI; 4],
            nodes: [n; 4],
        }
        .build()
        .unwrap()
    }

    fn sphere(n: usize) -> Discretization {
        ManifoldSpec::Sphere4Radial {
            radius: 1.0,
            radial_nodes: n,
        }
        .build()
        .unwrap()
    }

    fn params() -> PhysicsParams {
        PhysicsParams::new(1.0, 1.0, 1.0, 0.5, 4.0).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(PhysicsParams::new(0.0, 1.0, 1.0, 0.5, 4.0).is_err());
        assert!(PhysicsParams::new(1.0, -1.0, 1.0, 0.5, 4.0).is_err());
        assert!(PhysicsParams::new(1.0, 1.0, 0.0, 0.5, 4.0).is_err());
        assert!(PhysicsParams::new(1.0, 1.0, 1.0, 1.0, 4.0).is_err());
        assert!(PhysicsParams::new(1.0, 1.0, 1.0, -1.2, 4.0).is_err());
        assert!(PhysicsParams::new(1.0, 1.0, 1.0, 0.5, 2.0).is_err());
        assert!(PhysicsParams::new(1.0, 1.0, 1.0, 0.5, 4.5).is_err());
        assert!(PhysicsParams::new(1.0, 1.0, 1.0, 0.5, 3.0).is_ok());

        // The unchecked constructor admits any finite phase.
        let p = PhysicsParams::with_phase_unchecked(1.0, 1.0, 1.0, 1.3, 4.0).unwrap();
        assert!(p.lambda() < 0.0);
        assert!((params().lambda() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn phi_of_zero_is_zero() {
        let d = torus(8);
        let p = phi(&d, &params(), &d.zeros(), 1e-10).unwrap();
        assert_eq!(p.sup_norm(), 0.0);
    }

    #[test]
    fn phi_of_constant_matches_algebra() {
        // On constants the operator is multiplication by m1^2 + q^2 c^2,
        // so Phi = q c^2 / (m1^2 + q^2 c^2) exactly.
        let pr = params();
        let c = 0.8;
        let expected = pr.q() * c * c / (pr.m1() * pr.m1() + pr.q() * pr.q() * c * c);
        for d in [torus(8), sphere(128)] {
            let p = phi(&d, &pr, &d.constant(c), 1e-12).unwrap();
            for &v in p.values() {
                assert!((v - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn phi_respects_the_interval_bounds() {
        let pr = PhysicsParams::new(2.0, 1.0, 0.7, 0.3, 3.0).unwrap();
        for (d, seed) in [(torus(8), 40u64), (sphere(256), 41u64)] {
            let mut rng = fields::seeded_rng(seed);
            for _ in 0..5 {
                let u = fields::smooth_random_field(&d, &mut rng).scaled(2.0);
                let p = phi(&d, &pr, &u, 1e-10).unwrap();
                assert!(p.min_value() >= -1e-8, "min {}", p.min_value());
                assert!(
                    p.max_value() <= 1.0 / pr.q() + 1e-8,
                    "max {}",
                    p.max_value()
                );
            }
        }
    }

    #[test]
    fn dphi_of_zero_base_vanishes() {
        let d = torus(8);
        let dir = fields::smooth_random_field(&d, &mut fields::seeded_rng(50));
        let v = dphi(&d, &params(), &d.zeros(), &dir, 1e-10).unwrap();
        assert_eq!(v.sup_norm(), 0.0);
    }

    #[test]
    fn dphi_constant_base_constant_direction() {
        let pr = params();
        let d = torus(8);
        let c = 1.3;
        let denom = pr.m1() * pr.m1() + pr.q() * pr.q() * c * c;
        let phi_c = pr.q() * c * c / denom;
        let expected = 2.0 * pr.q() * c * (1.0 - pr.q() * phi_c) / denom;
        let v = dphi(&d, &pr, &d.constant(c), &d.constant(1.0), 1e-12).unwrap();
        for &x in v.values() {
            assert!((x - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn psi_of_constant_matches_algebra() {
        // Psi(c) = (c^2 V / 2) * m1^2 / (m1^2 + q^2 c^2).
        let pr = params();
        let d = torus(8);
        let c = 0.9;
        let vol = (2.0 * PI).powi(4);
        let expected =
            0.5 * c * c * vol * pr.m1() * pr.m1() / (pr.m1() * pr.m1() + pr.q() * pr.q() * c * c);
        let val = psi(&d, &pr, &d.constant(c), 1e-12).unwrap();
        assert!((val - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn psi_forms_agree_on_random_fields() {
        let pr = PhysicsParams::new(1.5, 1.2, 0.9, 0.4, 3.5).unwrap();
        for (d, seed) in [(torus(8), 60u64), (sphere(256), 61u64)] {
            let mut rng = fields::seeded_rng(seed);
            let u = fields::smooth_random_field(&d, &mut rng).scaled(1.5);
            let a = psi(&d, &pr, &u, 1e-10).unwrap();
            let b = psi_energy_form(&d, &pr, &u, 1e-10).unwrap();
            assert!(
                (a - b).abs() <= 1e-7 * a.abs().max(1.0),
                "psi forms differ: {a} vs {b}"
            );
        }
    }

    #[test]
    fn dpsi_of_zero_is_zero() {
        let d = torus(8);
        let dir = fields::smooth_random_field(&d, &mut fields::seeded_rng(70));
        assert_eq!(dpsi(&d, &params(), &d.zeros(), &dir, 1e-10).unwrap(), 0.0);
    }
}
