//! Restarted GMRES in the quadrature inner product with right
//! preconditioning, for the Newton refinement stage. The operator is
//! supplied as a closure (a finite-difference directional derivative of
//! the gradient), so it may fail; failures propagate.

use crate::elliptic::{self, ScalarField};
use crate::manifold::Discretization;
use crate::Result;

/// Solve A x = rhs approximately; returns (x, relative residual, matvecs).
/// `precond` applies an approximate inverse M^{-1}; the iteration solves
/// A M^{-1} y = rhs and returns x = M^{-1} y.
pub(crate) fn gmres(
    d: &Discretization,
    mut apply: impl FnMut(&ScalarField) -> Result<ScalarField>,
    mut precond: impl FnMut(&ScalarField) -> ScalarField,
    rhs: &ScalarField,
    restart: usize,
    max_matvecs: usize,
    rel_tol: f64,
) -> Result<(ScalarField, f64, usize)> {
    let b_norm = elliptic::l2_norm(d, rhs);
    let mut x = d.zeros();
    if b_norm == 0.0 {
        return Ok((x, 0.0, 0));
    }

    let mut matvecs = 0;
    let mut final_rel = 1.0;

    while matvecs < max_matvecs {
        let r = if matvecs == 0 {
            rhs.clone()
        } else {
            let ax = apply(&x)?;
            matvecs += 1;
            rhs.minus(&ax)
        };
        let beta = elliptic::l2_norm(d, &r);
        final_rel = beta / b_norm;
        if final_rel <= rel_tol || matvecs >= max_matvecs {
            break;
        }

        let m = restart.min(max_matvecs - matvecs);
        let mut basis: Vec<ScalarField> = vec![r.scaled(1.0 / beta)];
        // Columns of the Hessenberg matrix after Givens rotations.
        let mut cols: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut steps = 0;

        for j in 0..m {
            let z = precond(&basis[j]);
            let mut w = apply(&z)?;
            matvecs += 1;

            let mut col = Vec::with_capacity(j + 2);
            for basis_i in basis.iter().take(j + 1) {
                let hij = elliptic::l2_inner(d, &w, basis_i);
                w = w.axpy(-hij, basis_i);
                col.push(hij);
            }
            let h_next = elliptic::l2_norm(d, &w);
            col.push(h_next);

            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = (col[j] * col[j] + col[j + 1] * col[j + 1]).sqrt();
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (col[j] / denom, col[j + 1] / denom)
            };
            cs.push(c);
            sn.push(s);
            col[j] = denom;
            col[j + 1] = 0.0;
            cols.push(col);
            g.push(-s * g[j]);
            g[j] *= c;
            steps = j + 1;

            final_rel = g[j + 1].abs() / b_norm;
            if h_next == 0.0 || final_rel <= rel_tol || matvecs >= max_matvecs {
                break;
            }
            basis.push(w.scaled(1.0 / h_next));
        }

        let mut y = vec![0.0; steps];
        for i in (0..steps).rev() {
            let mut acc = g[i];
            for (k, yk) in y.iter().enumerate().take(steps).skip(i + 1) {
                acc -= cols[k][i] * yk;
            }
            y[i] = if cols[i][i] != 0.0 { acc / cols[i][i] } else { 0.0 };
        }
        let mut corr = d.zeros();
        for (k, yk) in y.iter().enumerate() {
            corr = corr.axpy(*yk, &basis[k]);
        }
        x = x.plus(&precond(&corr));

        if final_rel <= rel_tol {
            break;
        }
    }

    Ok((x, final_rel, matvecs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields;
    use crate::manifold::ManifoldSpec;
    use std::f64::consts::PI;

    #[test]
    fn solves_a_shifted_laplacian() {
        let d = ManifoldSpec::Torus4 {
            lengths: [2.0 * PI; 4],
            nodes: [8; 4],
        }
        .build()
        .unwrap();
        let f = fields::rough_random_field(&d, &mut fields::seeded_rng(77));
        let shift = 2.0;
        let apply = |v: &ScalarField| -> Result<ScalarField> {
            Ok(d.laplacian(v).axpy(shift, v))
        };
        let precond = |r: &ScalarField| d.solve_shifted(r, 1.0);
        let (x, rel, mv) = gmres(&d, apply, precond, &f, 30, 300, 1e-10).unwrap();
        assert!(rel <= 1e-10, "reported relative residual {rel}");
        let resid = f.minus(&d.laplacian(&x).axpy(shift, &x));
        let true_rel = elliptic::l2_norm(&d, &resid) / elliptic::l2_norm(&d, &f);
        assert!(true_rel <= 1e-9, "true relative residual {true_rel}");
        assert!(mv > 0 && mv <= 300);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let d = ManifoldSpec::Torus4 {
            lengths: [2.0 * PI; 4],
            nodes: [8; 4],
        }
        .build()
        .unwrap();
        let (x, rel, mv) = gmres(
            &d,
            |v| Ok(v.clone()),
            |r| r.clone(),
            &d.zeros(),
            10,
            50,
            1e-8,
        )
        .unwrap();
        assert_eq!(x.sup_norm(), 0.0);
        assert_eq!(rel, 0.0);
        assert_eq!(mv, 0);
    }
}
