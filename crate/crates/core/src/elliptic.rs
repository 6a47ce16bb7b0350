//! Screened linear solves (Delta_g + V) w = f and the inner products and
//! norms shared by the higher modules.
//!
//! The solver is conjugate gradient in the quadrature inner product,
//! preconditioned by the constant-coefficient operator (Delta_g + Vbar)^{-1}
//! with Vbar the weighted mean of V. Both the Laplacian and the
//! multiplication by V are exactly self-adjoint in that inner product, so
//! the iteration is a textbook PCG; the preconditioner application is an
//! exact solve (spectral on the torus, tridiagonal on the sphere).

use crate::manifold::{Discretization, GridId};
use crate::{Error, Result};

/// A real-valued grid function tied to the discretization it lives on.
/// Operations panic when fields from different grids are mixed, mirroring
/// how array libraries treat shape mismatches.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
    grid: GridId,
}

impl ScalarField {
    pub(crate) fn new(values: Vec<f64>, grid: GridId) -> Self {
        ScalarField { values, grid }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid_id(&self) -> GridId {
        self.grid
    }

    fn check_same(&self, other: &ScalarField) {
        assert!(
            self.grid == other.grid && self.values.len() == other.values.len(),
            "fields live on different discretizations"
        );
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::new(self.values.iter().map(|&v| f(v)).collect(), self.grid)
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        self.check_same(other);
        let vals = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        ScalarField::new(vals, self.grid)
    }

    pub fn scaled(&self, t: f64) -> ScalarField {
        self.map(|v| t * v)
    }

    pub fn plus(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn minus(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a - b)
    }

    /// self + t * other.
    pub fn axpy(&self, t: f64, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + t * b)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Positive part max(u, 0).
    pub fn positive_part(&self) -> ScalarField {
        self.map(|v| v.max(0.0))
    }
}

/// Outcome of a screened solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub field: ScalarField,
    pub iterations: usize,
    /// Final relative residual ||(Delta + V) w - f|| / ||f|| in the
    /// quadrature L^2 norm.
    pub residual: f64,
}

/// Quadrature L^2 inner product.
pub fn l2_inner(d: &Discretization, u: &ScalarField, w: &ScalarField) -> f64 {
    d.check_field(u);
    d.check_field(w);
    d.weights()
        .iter()
        .zip(u.values())
        .zip(w.values())
        .map(|((q, a), b)| q * a * b)
        .sum()
}

pub fn l2_norm(d: &Discretization, u: &ScalarField) -> f64 {
    l2_inner(d, u, u).max(0.0).sqrt()
}

/// H^1 inner product int (grad u . grad w) + int u w, with the gradient
/// term evaluated through the operator: int u Delta_g w + int u w.
pub fn h1_inner(d: &Discretization, u: &ScalarField, w: &ScalarField) -> f64 {
    let dw = d.laplacian(w);
    l2_inner(d, u, &dw) + l2_inner(d, u, w)
}

pub fn h1_norm(d: &Discretization, u: &ScalarField) -> f64 {
    h1_inner(d, u, u).max(0.0).sqrt()
}

/// L^p norm by quadrature of |u|^p.
pub fn lp_norm(d: &Discretization, u: &ScalarField, p: f64) -> f64 {
    d.check_field(u);
    assert!(p >= 1.0 && p.is_finite(), "lp_norm needs p >= 1, got {p}");
    let int: f64 = d
        .weights()
        .iter()
        .zip(u.values())
        .map(|(w, v)| w * v.abs().powf(p))
        .sum();
    int.powf(1.0 / p)
}

/// Solve (Delta_g + V) w = f for a strictly positive potential V by
/// preconditioned conjugate gradient, to relative L^2 residual `tol`.
///
/// The iteration cap is 10 * node count; hitting it is reported as an error
/// carrying the last residual.
pub fn screened_solve(
    d: &Discretization,
    v: &ScalarField,
    f: &ScalarField,
    tol: f64,
) -> Result<SolveReport> {
    d.check_field(v);
    d.check_field(f);
    assert!(tol > 0.0, "tolerance must be positive, got {tol}");

    let min_v = v.min_value();
    if !(min_v > 0.0) {
        return Err(Error::NonPositivePotential { min_v });
    }

    let n = d.node_count();
    let weights = d.weights();
    let wdot = |a: &[f64], b: &[f64]| -> f64 {
        weights
            .iter()
            .zip(a)
            .zip(b)
            .map(|((q, x), y)| q * x * y)
            .sum()
    };

    let f_norm = wdot(f.values(), f.values()).sqrt();
    if f_norm == 0.0 {
        return Ok(SolveReport {
            field: d.zeros(),
            iterations: 0,
            residual: 0.0,
        });
    }

    let v_bar = d.integrate(v) / d.volume();
    let apply = |x: &ScalarField| -> ScalarField {
        let mut ax = d.laplacian(x);
        for ((o, &xv), &vv) in ax
            .values_mut()
            .iter_mut()
            .zip(x.values())
            .zip(v.values())
        {
            *o += vv * xv;
        }
        ax
    };
    let precond = |r: &ScalarField| -> ScalarField { d.solve_shifted(r, v_bar) };

    let cap = 10 * n;
    let mut x = d.zeros();
    let mut r = f.clone();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = wdot(r.values(), z.values());
    let mut iterations = 0;
    let mut rel = 1.0;

    while iterations < cap {
        let ap = apply(&p);
        let pap = wdot(p.values(), ap.values());
        if !(pap > 0.0) {
            // Loss of positivity can only come from accumulated rounding;
            // fall out and let the cap error carry the state.
            break;
        }
        let alpha = rz / pap;
        x = x.axpy(alpha, &p);
        r = r.axpy(-alpha, &ap);
        iterations += 1;

        rel = wdot(r.values(), r.values()).sqrt() / f_norm;
        if rel <= tol {
            // Confirm with the true residual; the recurrence can drift.
            let true_r = f.minus(&apply(&x));
            let true_rel = wdot(true_r.values(), true_r.values()).sqrt() / f_norm;
            if true_rel <= tol {
                return Ok(SolveReport {
                    field: x,
                    iterations,
                    residual: true_rel,
                });
            }
            r = true_r;
            rel = true_rel;
        }

        z = precond(&r);
        let rz_new = wdot(r.values(), z.values());
        let beta = rz_new / rz;
        rz = rz_new;
        p = z.axpy(beta, &p);
    }

    Err(Error::IterationCap {
        iterations,
        residual: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields;
    use crate::manifold::ManifoldSpec;
    use proptest::prelude::*;
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

    #[test]
    fn constant_problem_has_constant_solution() {
        let d = torus(8);
        let rep = screened_solve(&d, &d.constant(2.0), &d.constant(3.0), 1e-12).unwrap();
        for &w in rep.field.values() {
            assert!((w - 1.5).abs() < 1e-10);
        }
        assert!(rep.residual <= 1e-12);
    }

    #[test]
    fn torus_single_mode_is_diagonal() {
        let d = torus(8);
        let l = 2.0 * PI;
        let f = d.scalar_field(
            d.coords()
                .iter()
                .map(|x| (2.0 * PI * x[0] / l).cos())
                .collect(),
        );
        let c = 0.7;
        let rep = screened_solve(&d, &d.constant(c), &f, 1e-12).unwrap();
        let lam = (2.0 * PI / l).powi(2);
        for (w, fv) in rep.field.values().iter().zip(f.values()) {
            assert!((w - fv / (lam + c)).abs() < 1e-10);
        }
    }

    #[test]
    fn random_potential_solve_meets_tolerance_on_reapplication() {
        for (d, seed) in [(torus(8), 11u64), (sphere(256), 12u64)] {
            let mut rng = fields::seeded_rng(seed);
            let v = fields::smooth_random_field(&d, &mut rng).map(|x| 1.5 + 0.5 * x.tanh());
            assert!(v.min_value() >= 1.0 && v.max_value() <= 2.0);
            let f = fields::rough_random_field(&d, &mut rng);

            let tol = 1e-10;
            let rep = screened_solve(&d, &v, &f, tol).unwrap();
            let back = d.laplacian(&rep.field).plus(&v.zip_map(&rep.field, |a, b| a * b));
            let resid = l2_norm(&d, &back.minus(&f)) / l2_norm(&d, &f);
            assert!(resid <= tol, "true residual {resid}");
            assert!(rep.iterations <= 10 * d.node_count());
        }
    }

    #[test]
    fn solve_is_linear_in_the_right_hand_side() {
        let d = torus(8);
        let mut rng = fields::seeded_rng(21);
        let v = fields::smooth_random_field(&d, &mut rng).map(|x| 1.5 + 0.4 * x.tanh());
        let f1 = fields::rough_random_field(&d, &mut rng);
        let f2 = fields::rough_random_field(&d, &mut rng);
        let tol = 1e-10;
        let w1 = screened_solve(&d, &v, &f1, tol).unwrap().field;
        let w2 = screened_solve(&d, &v, &f2, tol).unwrap().field;
        let w12 = screened_solve(&d, &v, &f1.plus(&f2), tol).unwrap().field;
        let gap = l2_norm(&d, &w12.minus(&w1.plus(&w2)));
        let scale = l2_norm(&d, &f1).max(l2_norm(&d, &f2));
        assert!(gap <= 2.0 * tol * scale * 10.0, "linearity gap {gap}");
    }

    #[test]
    fn nonnegative_data_gives_essentially_nonnegative_solutions() {
        for (d, seed) in [(torus(8), 31u64), (sphere(256), 32u64)] {
            let mut rng = fields::seeded_rng(seed);
            let v = fields::smooth_random_field(&d, &mut rng).map(|x| 1.2 + 0.2 * x.tanh());
            let f = fields::nonneg_random_field(&d, &mut rng);
            let rep = screened_solve(&d, &v, &f, 1e-12).unwrap();
            let floor = -1e-8 * f.sup_norm() / v.min_value();
            assert!(
                rep.field.min_value() >= floor,
                "min {} below floor {}",
                rep.field.min_value(),
                floor
            );
        }
    }

    #[test]
    fn zero_rhs_short_circuits() {
        let d = sphere(64);
        let rep = screened_solve(&d, &d.constant(1.0), &d.zeros(), 1e-10).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.field.sup_norm(), 0.0);
    }

    #[test]
    fn non_positive_potential_is_rejected() {
        let d = torus(8);
        let mut vals = vec![1.0; d.node_count()];
        vals[3] = 0.0;
        let v = d.scalar_field(vals);
        match screened_solve(&d, &v, &d.constant(1.0), 1e-10) {
            Err(Error::NonPositivePotential { min_v }) => assert_eq!(min_v, 0.0),
            other => panic!("expected NonPositivePotential, got {other:?}"),
        }
    }

    #[test]
    fn inner_products_and_norms_on_constants() {
        let d = torus(8);
        let vol = (2.0 * PI).powi(4);
        let one = d.constant(1.0);
        assert!((l2_inner(&d, &one, &one) - vol).abs() <= 1e-9 * vol);
        // Gradient term vanishes for constants.
        let h1 = h1_inner(&d, &one, &one);
        assert!((h1 - vol).abs() <= 1e-9 * vol);
    }

    #[test]
    fn quartic_norm_of_cosine_mode() {
        // mean of cos^4 over a full period is 3/8.
        let d = torus(8);
        let l = 2.0 * PI;
        let u = d.scalar_field(
            d.coords()
                .iter()
                .map(|x| (2.0 * PI * x[0] / l).cos())
                .collect(),
        );
        let vol = l.powi(4);
        let n4 = lp_norm(&d, &u, 4.0);
        assert!((n4.powi(4) - 0.375 * vol).abs() <= 1e-9 * vol);
    }

    #[test]
    fn h1_inner_matches_gradient_quadrature_on_modes() {
        let d = torus(8);
        let l = 2.0 * PI;
        let u = d.scalar_field(
            d.coords()
                .iter()
                .map(|x| (2.0 * PI * x[0] / l).cos())
                .collect(),
        );
        // int |grad u|^2 = lam * int u^2 = lam * V/2 for the first mode.
        let lam = (2.0 * PI / l).powi(2);
        let vol = l.powi(4);
        let expected = (lam + 1.0) * vol / 2.0;
        assert!((h1_inner(&d, &u, &u) - expected).abs() <= 1e-9 * vol);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn lp_norm_is_absolutely_homogeneous(t in -3.0f64..3.0, p in 1.0f64..6.0, seed in 0u64..1000) {
            let d = sphere(64);
            let mut rng = fields::seeded_rng(seed);
            let u = fields::smooth_random_field(&d, &mut rng);
            let lhs = lp_norm(&d, &u.scaled(t), p);
            let rhs = t.abs() * lp_norm(&d, &u, p);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs));
        }
    }
}
