//! Energies and gradients of the reduced and full formulations.
//!
//! The reduced functional of the matter amplitude alone is
//!
//! ```text
//! I_p(u) = 1/2 int |grad u|^2 + m0^2/2 int u^2 - 1/p int (u+)^p
//!          - omega^2/2 int (1 - q Phi(u)) u^2,
//! ```
//!
//! whose L^2-gradient is
//!
//! ```text
//! grad I_p(u) = Delta_g u + m0^2 u - (u+)^{p-1} - omega^2 (1 - q Phi(u))^2 u.
//! ```
//!
//! The derivative of the coupling term does not see the derivative of Phi:
//! testing the Phi-equation against DPhi contributions cancels them exactly,
//! also at the discrete level, because the discrete Laplacian is exactly
//! self-adjoint. The gradient returned here is therefore the exact gradient
//! of the discrete energy up to the inner-solve tolerance, which is what
//! the difference-quotient suites verify.
//!
//! `energy_s` is the full two-field action; substituting the constraint
//! v = Phi(u) collapses it to I_p(u), and that identity is exact in the
//! same sense.

use crate::elliptic::{self, ScalarField};
use crate::manifold::Discretization;
use crate::phi_map::{self, PhysicsParams};
use crate::{Error, Result};

/// max(v, 0)^e with the convention 0^e = 0 (e > 0).
pub(crate) fn pow_plus(v: f64, e: f64) -> f64 {
    if v > 0.0 {
        v.powf(e)
    } else {
        0.0
    }
}

/// The four terms of the reduced energy and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    /// 1/2 int |grad u|^2.
    pub kinetic: f64,
    /// m0^2/2 int u^2.
    pub mass: f64,
    /// -1/p int (u+)^p.
    pub power: f64,
    /// -omega^2/2 int (1 - q Phi(u)) u^2.
    pub coupling: f64,
    pub total: f64,
}

/// Reduced energy, computing Phi(u) at tolerance `tol`.
pub fn energy_ip(
    d: &Discretization,
    params: &PhysicsParams,
    u: &ScalarField,
    tol: f64,
) -> Result<EnergyBreakdown> {
    let phi_u = if params.omega() == 0.0 {
        d.zeros()
    } else {
        phi_map::phi(d, params, u, tol)?
    };
    Ok(energy_ip_with_phi(d, params, u, &phi_u))
}

/// Reduced energy with a caller-supplied Phi(u); the solver loops compute
/// Phi once per point and evaluate energy and gradient from it.
pub fn energy_ip_with_phi(
    d: &Discretization,
    params: &PhysicsParams,
    u: &ScalarField,
    phi_u: &ScalarField,
) -> EnergyBreakdown {
    let p = params.p();
    let q = params.q();
    let om2 = params.omega() * params.omega();

    let kinetic = 0.5 * elliptic::l2_inner(d, u, &d.laplacian(u));
    let mass = 0.5 * params.m0() * params.m0() * elliptic::l2_inner(d, u, u);
    let power = -d.integrate(&u.map(|v| pow_plus(v, p))) / p;
    let coupling = if om2 == 0.0 {
        0.0
    } else {
        -0.5 * om2 * d.integrate(&u.zip_map(phi_u, |uv, pv| (1.0 - q * pv) * uv * uv))
    };
    let total = kinetic + mass + power + coupling;
    EnergyBreakdown {
        kinetic,
        mass,
        power,
        coupling,
        total,
    }
}

/// L^2-gradient of I_p, computing Phi(u) at tolerance `tol`.
pub fn grad_ip(
    d: &Discretization,
    params: &PhysicsParams,
    u: &ScalarField,
    tol: f64,
) -> Result<ScalarField> {
    let phi_u = if params.omega() == 0.0 {
        d.zeros()
    } else {
        phi_map::phi(d, params, u, tol)?
    };
    Ok(grad_ip_with_phi(d, params, u, &phi_u))
}

/// L^2-gradient with a caller-supplied Phi(u).
pub fn grad_ip_with_phi(
    d: &Discretization,
    params: &PhysicsParams,
    u: &ScalarField,
    phi_u: &ScalarField,
) -> ScalarField {
    let p = params.p();
    let q = params.q();
    let m0sq = params.m0() * params.m0();
    let om2 = params.omega() * params.omega();

    let mut g = d.laplacian(u);
    for ((gv, &uv), &pv) in g
        .values_mut()
        .iter_mut()
        .zip(u.values())
        .zip(phi_u.values())
    {
        let s = 1.0 - q * pv;
        *gv += m0sq * uv - pow_plus(uv, p - 1.0) - om2 * s * s * uv;
    }
    g
}

/// The full two-field action
///
/// ```text
/// S(u, v) = 1/2 int |grad u|^2 - omega^2/2 int |grad v|^2
///           + m0^2/2 int u^2 - omega^2 m1^2/2 int v^2
///           - 1/p int (u+)^p - omega^2/2 int u^2 (1 - q v)^2.
/// ```
///
/// The power term uses the positive part, matching the reduced energy; for
/// nonnegative u this is the literal action.
pub fn energy_s(
    d: &Discretization,
    params: &PhysicsParams,
    u: &ScalarField,
    v: &ScalarField,
) -> f64 {
    let p = params.p();
    let q = params.q();
    let om2 = params.omega() * params.omega();
    let m0sq = params.m0() * params.m0();
    let m1sq = params.m1() * params.m1();

    let kin_u = 0.5 * elliptic::l2_inner(d, u, &d.laplacian(u));
    let kin_v = -0.5 * om2 * elliptic::l2_inner(d, v, &d.laplacian(v));
    let mass_u = 0.5 * m0sq * elliptic::l2_inner(d, u, u);
    let mass_v = -0.5 * om2 * m1sq * elliptic::l2_inner(d, v, v);
    let power = -d.integrate(&u.map(|x| pow_plus(x, p))) / p;
    let coupling = -0.5
        * om2
        * d.integrate(&u.zip_map(v, |uv, vv| {
            let s = 1.0 - q * vv;
            uv * uv * s * s
        }));
    kin_u + kin_v + mass_u + mass_v + power + coupling
}

/// Rayleigh-type quotient J_lambda(u) = (int |grad u|^2 + lambda int u^2)
/// / (int u^4)^{1/2}. Scale-invariant of degree zero.
pub fn rayleigh_j(d: &Discretization, u: &ScalarField, lambda: f64) -> Result<f64> {
    let quartic = d.integrate(&u.map(|v| v * v * v * v));
    if !(quartic > 0.0) {
        return Err(Error::DegenerateQuotient(format!(
            "int u^4 = {quartic}, quotient needs u not identically zero"
        )));
    }
    let num = elliptic::l2_inner(d, u, &d.laplacian(u)) + lambda * elliptic::l2_inner(d, u, u);
    Ok(num / quartic.sqrt())
}

/// L^2 residual norms of the two coupled equations at the pair (u, v):
///
/// ```text
/// r1 = || Delta u + m0^2 u - (u+)^{p-1} - omega^2 (q v - 1)^2 u ||
/// r2 = || Delta v + (m1^2 + q^2 u^2) v - q u^2 ||
/// ```
pub fn system_residual(
    d: &Discretization,
    params: &PhysicsParams,
    u: &ScalarField,
    v: &ScalarField,
) -> (f64, f64) {
    let p = params.p();
    let q = params.q();
    let om2 = params.omega() * params.omega();
    let m0sq = params.m0() * params.m0();
    let m1sq = params.m1() * params.m1();

    let mut e1 = d.laplacian(u);
    for ((ev, &uv), &vv) in e1
        .values_mut()
        .iter_mut()
        .zip(u.values())
        .zip(v.values())
    {
        let s = q * vv - 1.0;
        *ev += m0sq * uv - pow_plus(uv, p - 1.0) - om2 * s * s * uv;
    }

    let mut e2 = d.laplacian(v);
    for ((ev, &uv), &vv) in e2
        .values_mut()
        .iter_mut()
        .zip(u.values())
        .zip(v.values())
    {
        *ev += (m1sq + q * q * uv * uv) * vv - q * uv * uv;
    }

    (elliptic::l2_norm(d, &e1), elliptic::l2_norm(d, &e2))
}
