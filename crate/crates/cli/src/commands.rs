//! Solver-driving subcommands: `solve`, `sweep`, `continuation`.

use std::path::PathBuf;

use kgmp_core::manifold::{Discretization, ManifoldSpec};
use kgmp_core::mountain_pass::{self, MptResult, SeedStrategy};
use kgmp_core::{analysis, Error};

use crate::config::ExperimentConfig;
use crate::report::{fnum, write_table, Report};
use crate::CliError;

pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub out_dir: PathBuf,
    pub command: &'static str,
}

impl Ctx {
    pub fn discretize(&self) -> Result<Discretization, CliError> {
        Ok(self.cfg.manifold.clone().build()?)
    }
}

pub fn required_list<'a>(
    list: &'a Option<Vec<f64>>,
    path: &str,
    command: &str,
) -> Result<&'a [f64], CliError> {
    list.as_deref()
        .ok_or_else(|| CliError::Config(format!("{path}: required by the {command} command")))
}

/// One full search from a constant seed; writes the solution fields and a
/// scalar summary. A stagnated refinement still reports its partial
/// candidate so the artifacts stay inspectable.
pub fn solve(ctx: &Ctx) -> Result<Report, CliError> {
    let d = ctx.discretize()?;
    let height = ctx.cfg.experiment.seed_height.unwrap_or(1.0);
    let seed = mountain_pass::select_seed(&d, SeedStrategy::ConstantBump { height })?;

    let mut rep = Report::new();
    match mountain_pass::mpa_solve(&d, &ctx.cfg.physics, &seed, &ctx.cfg.settings) {
        Ok(r) => emit_solution(ctx, &d, &mut rep, &r, None)?,
        Err(Error::RefinementStagnation {
            grad_norm,
            tolerance,
            partial,
        }) => {
            let note = format!(
                "refinement stagnated at gradient norm {grad_norm:.3e} (tolerance {tolerance:.3e})"
            );
            emit_solution(ctx, &d, &mut rep, &partial, Some(note))?;
        }
        Err(e) => {
            rep.check("solve", false, e.to_string());
        }
    }
    Ok(rep)
}

fn emit_solution(
    ctx: &Ctx,
    d: &Discretization,
    rep: &mut Report,
    r: &MptResult,
    failure: Option<String>,
) -> Result<(), CliError> {
    rep.num("c_p", r.c_p);
    rep.num("sup_u", r.u.max_value());
    rep.num("min_u", r.u.min_value());
    rep.num("min_v", r.v.min_value());
    rep.num("sup_v", r.v.max_value());
    rep.num("mu", r.mu);
    rep.num("r1", r.residuals.0);
    rep.num("r2", r.residuals.1);
    rep.int("iterations", r.iterations as u64);
    rep.flag("converged", r.converged);
    rep.flag("is_constant", r.is_constant);

    rep.check(
        "converged",
        r.converged && failure.is_none(),
        failure.unwrap_or_else(|| format!("gradient tolerance {:.1e}", ctx.cfg.settings.grad_tol)),
    );
    rep.check(
        "residuals",
        r.residuals.0 <= 1e-6 && r.residuals.1 <= 1e-6,
        format!("r1 = {:.3e}, r2 = {:.3e}", r.residuals.0, r.residuals.1),
    );
    rep.check(
        "solution_window",
        r.u.min_value() > 0.0
            && r.v.min_value() > 0.0
            && r.v.max_value() < 1.0 / ctx.cfg.physics.q(),
        format!(
            "u in [{:.4e}, {:.4e}], v in [{:.4e}, {:.4e}]",
            r.u.min_value(),
            r.u.max_value(),
            r.v.min_value(),
            r.v.max_value()
        ),
    );
    rep.check("positive_level", r.c_p > 0.0, format!("c_p = {:.6e}", r.c_p));

    write_fields(ctx, d, r)?;
    Ok(())
}

/// Solution snapshot: node index, coordinates, u, v.
fn write_fields(ctx: &Ctx, d: &Discretization, r: &MptResult) -> Result<(), CliError> {
    let (header, rows) = match d.spec() {
        ManifoldSpec::Torus4 { .. } => {
            let rows: Vec<String> = d
                .coords()
                .iter()
                .zip(r.u.values().iter().zip(r.v.values()))
                .enumerate()
                .map(|(i, (x, (u, v)))| {
                    format!(
                        "{i},{},{},{},{},{},{}",
                        fnum(x[0]),
                        fnum(x[1]),
                        fnum(x[2]),
                        fnum(x[3]),
                        fnum(*u),
                        fnum(*v)
                    )
                })
                .collect();
            ("index,x0,x1,x2,x3,u,v", rows)
        }
        ManifoldSpec::Sphere4Radial { .. } => {
            let rows: Vec<String> = d
                .base_distance()
                .iter()
                .zip(r.u.values().iter().zip(r.v.values()))
                .enumerate()
                .map(|(i, (rad, (u, v)))| format!("{i},{},{},{}", fnum(*rad), fnum(*u), fnum(*v)))
                .collect();
            ("index,r,u,v", rows)
        }
    };
    write_table(&ctx.out_dir, "fields.csv", header, &rows)?;
    Ok(())
}

/// Phase sweep over the configured omega grid; rows land in the CSV in
/// phase order with the fixed column set.
pub fn sweep(ctx: &Ctx) -> Result<Report, CliError> {
    let grid = required_list(&ctx.cfg.experiment.omega_grid, "experiment.omega_grid", "sweep")?;
    let d = ctx.discretize()?;
    let sr = analysis::phase_sweep(
        &d,
        &ctx.cfg.physics,
        grid,
        ctx.cfg.physics.p(),
        &ctx.cfg.settings,
    )?;

    let rows: Vec<String> = sr
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{},{},{}",
                fnum(r.omega),
                fnum(r.p),
                r.converged,
                r.threshold_holds,
                fnum(r.c_p),
                fnum(r.sup_u),
                fnum(r.mu),
                fnum(r.r1),
                fnum(r.r2),
                r.is_constant,
                r.iterations
            )
        })
        .collect();
    write_table(
        &ctx.out_dir,
        "sweep.csv",
        "omega,p,converged,threshold_holds,c_p,sup_u,mu,r1,r2,is_constant,iterations",
        &rows,
    )?;

    let mut rep = Report::new();
    rep.int("rows", sr.rows.len() as u64);

    let failures: Vec<String> = sr
        .rows
        .iter()
        .filter(|r| !r.converged)
        .map(|r| {
            format!(
                "omega = {}: {}",
                r.omega,
                r.failure.as_deref().unwrap_or("did not converge")
            )
        })
        .collect();
    rep.check(
        "all_converged",
        failures.is_empty(),
        if failures.is_empty() {
            sr.admissible.clone()
        } else {
            failures.join("; ")
        },
    );

    let sups: Vec<f64> = sr.rows.iter().filter(|r| r.converged).map(|r| r.sup_u).collect();
    match max_and_median(&sups) {
        Some((max, median)) => {
            rep.num("sup_u_max", max);
            rep.num("sup_u_median", median);
            rep.check(
                "sup_bounded",
                max <= 3.0 * median,
                format!("max sup_u = {max:.6e}, median = {median:.6e}"),
            );
        }
        None => rep.check("sup_bounded", false, "no converged rows".to_string()),
    }
    Ok(rep)
}

/// Max and lower median of a nonempty slice.
fn max_and_median(vals: &[f64]) -> Option<(f64, f64)> {
    if vals.is_empty() {
        return None;
    }
    let mut sorted = vals.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some((sorted[sorted.len() - 1], sorted[(sorted.len() - 1) / 2]))
}

/// Warm-started continuation along the configured exponent list.
pub fn continuation(ctx: &Ctx) -> Result<Report, CliError> {
    let p_list = required_list(&ctx.cfg.experiment.p_list, "experiment.p_list", "continuation")?;
    let d = ctx.discretize()?;
    let entries =
        mountain_pass::continuation_to_critical(&d, &ctx.cfg.physics, p_list, &ctx.cfg.settings)?;

    let rows: Vec<String> = entries
        .iter()
        .map(|e| match &e.result {
            Some(r) => format!(
                "{},{},{},{},{},{},{},{}",
                fnum(e.p),
                r.converged,
                fnum(r.c_p),
                fnum(r.u.max_value()),
                fnum(r.mu),
                fnum(r.residuals.0),
                fnum(r.residuals.1),
                r.iterations
            ),
            None => format!("{},false,NaN,NaN,NaN,NaN,NaN,0", fnum(e.p)),
        })
        .collect();
    write_table(
        &ctx.out_dir,
        "continuation.csv",
        "p,converged,c_p,sup_u,mu,r1,r2,iterations",
        &rows,
    )?;

    let mut rep = Report::new();
    rep.int("entries", entries.len() as u64);
    let failures: Vec<String> = entries
        .iter()
        .filter(|e| !e.result.as_ref().is_some_and(|r| r.converged))
        .map(|e| {
            format!(
                "p = {}: {}",
                e.p,
                e.failure.as_deref().unwrap_or("did not converge")
            )
        })
        .collect();
    rep.check(
        "all_converged",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} exponents up to p = {}", entries.len(), p_list[p_list.len() - 1])
        } else {
            failures.join("; ")
        },
    );
    if let Some(r) = entries.last().and_then(|e| e.result.as_ref()) {
        rep.num("final_c_p", r.c_p);
        rep.num("final_sup_u", r.u.max_value());
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_bound_uses_the_lower_middle() {
        let (max, median) = max_and_median(&[3.0, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!(max, 10.0);
        assert_eq!(median, 2.0);
        assert!(max_and_median(&[]).is_none());
    }
}
