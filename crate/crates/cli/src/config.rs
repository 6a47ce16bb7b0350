//! Sectioned key-value experiment configuration.
//!
//! The format is deliberately plain so configs diff well:
//!
//! ```text
//! [manifold]
//! kind = torus
//! lengths = 6.283185307179586, 6.283185307179586, 6.283185307179586, 6.283185307179586
//! nodes = 8, 8, 8, 8
//!
//! [physics]
//! q = 1.0
//! m0 = 1.0
//! m1 = 1.0
//! omega = 0.5
//! p = 3.0
//!
//! [solver]
//! seed = 42
//!
//! [experiment]
//! omega_grid = -0.6, -0.2, 0.2, 0.6
//! ```
//!
//! `#` and `;` start comments. Every module invariant is validated at parse
//! time; violations are reported with the offending field path (for example
//! `physics.m0`) so a bad config never reaches a solver.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use kgmp_core::manifold::ManifoldSpec;
use kgmp_core::mountain_pass::MpaSettings;
use kgmp_core::phi_map::PhysicsParams;
use serde::Serialize;

use crate::CliError;

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub manifold: ManifoldSpec,
    pub physics: PhysicsParams,
    pub settings: MpaSettings,
    pub seed: u64,
    pub experiment: ExperimentSection,
}

/// Subcommand-specific knobs; requiredness is enforced by each command.
#[derive(Debug, Clone, Default)]
pub struct ExperimentSection {
    pub omega_grid: Option<Vec<f64>>,
    pub p_list: Option<Vec<f64>>,
    pub eps_list: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub out_dir: Option<String>,
    pub seed_height: Option<f64>,
}

/// Echo of the parsed configuration for the summary artifact.
#[derive(Debug, Serialize)]
pub struct ConfigEcho {
    pub manifold: String,
    pub q: f64,
    pub m0: f64,
    pub m1: f64,
    pub omega: f64,
    pub p: f64,
    pub path_nodes: usize,
    pub max_sweeps: usize,
    pub initial_step: f64,
    pub grad_tol: f64,
    pub blowup_cap: f64,
    pub phi_tol: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn echo(&self) -> ConfigEcho {
        let manifold = match &self.manifold {
            ManifoldSpec::Torus4 { lengths, nodes } => {
                let mut s = String::from("torus");
                for (l, n) in lengths.iter().zip(nodes) {
                    let _ = write!(s, " {l}x{n}");
                }
                s
            }
            ManifoldSpec::Sphere4Radial {
                radius,
                radial_nodes,
            } => format!("sphere r={radius} n={radial_nodes}"),
        };
        ConfigEcho {
            manifold,
            q: self.physics.q(),
            m0: self.physics.m0(),
            m1: self.physics.m1(),
            omega: self.physics.omega(),
            p: self.physics.p(),
            path_nodes: self.settings.path_nodes,
            max_sweeps: self.settings.max_sweeps,
            initial_step: self.settings.initial_step,
            grad_tol: self.settings.grad_tol,
            blowup_cap: self.settings.blowup_cap,
            phi_tol: self.settings.phi_tol,
            seed: self.seed,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Raw sections as written, before typing.
type RawSections = BTreeMap<String, BTreeMap<String, String>>;

fn parse_raw(text: &str) -> Result<RawSections, CliError> {
    const SECTIONS: [&str; 4] = ["manifold", "physics", "solver", "experiment"];
    let mut out: RawSections = BTreeMap::new();
    let mut current: Option<String> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find(['#', ';']) {
            Some(cut) => &raw_line[..cut],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }

        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| config_err(format!("line {line_no}: unterminated section header")))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(config_err(format!(
                    "line {line_no}: unknown section [{name}] (expected one of [manifold], [physics], [solver], [experiment])"
                )));
            }
            if out.contains_key(name) {
                return Err(config_err(format!(
                    "line {line_no}: duplicate section [{name}]"
                )));
            }
            out.insert(name.to_string(), BTreeMap::new());
            current = Some(name.to_string());
            continue;
        }

        let (key, value) = line.split_once('=').ok_or_else(|| {
            config_err(format!("line {line_no}: expected `key = value`, got `{line}`"))
        })?;
        let section = current.as_ref().ok_or_else(|| {
            config_err(format!("line {line_no}: key before any [section] header"))
        })?;
        let key = key.trim().to_string();
        let entry = out.get_mut(section).unwrap();
        if entry.contains_key(&key) {
            return Err(config_err(format!(
                "{section}.{key}: duplicated (second definition on line {line_no})"
            )));
        }
        entry.insert(key, value.trim().to_string());
    }
    Ok(out)
}

/// One section's typed accessor with field-path errors and an
/// unknown-key sweep at the end.
struct Section<'a> {
    name: &'a str,
    raw: BTreeMap<String, String>,
    taken: Vec<String>,
}

impl<'a> Section<'a> {
    fn new(name: &'a str, sections: &mut RawSections) -> Self {
        Section {
            name,
            raw: sections.remove(name).unwrap_or_default(),
            taken: Vec::new(),
        }
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.taken.push(key.to_string());
        self.raw.remove(key)
    }

    fn required(&mut self, key: &str) -> Result<String, CliError> {
        self.take(key)
            .ok_or_else(|| config_err(format!("{}.{key}: missing required key", self.name)))
    }

    fn f64(&mut self, key: &str) -> Result<f64, CliError> {
        parse_f64(self.name, key, &self.required(key)?)
    }

    fn f64_opt(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        self.take(key)
            .map(|v| parse_f64(self.name, key, &v))
            .transpose()
    }

    fn usize_opt(&mut self, key: &str) -> Result<Option<usize>, CliError> {
        self.take(key)
            .map(|v| {
                v.parse::<usize>().map_err(|_| {
                    config_err(format!(
                        "{}.{key}: expected a nonnegative integer, got `{v}`",
                        self.name
                    ))
                })
            })
            .transpose()
    }

    fn u64_opt(&mut self, key: &str) -> Result<Option<u64>, CliError> {
        self.take(key)
            .map(|v| {
                v.parse::<u64>().map_err(|_| {
                    config_err(format!(
                        "{}.{key}: expected a nonnegative integer, got `{v}`",
                        self.name
                    ))
                })
            })
            .transpose()
    }

    fn f64_list_opt(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(v) = self.take(key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for piece in v.split(',') {
            out.push(parse_f64(self.name, key, piece.trim())?);
        }
        Ok(Some(out))
    }

    /// Everything not consumed is a typo worth rejecting.
    fn finish(self) -> Result<(), CliError> {
        if let Some(stray) = self.raw.keys().next() {
            let mut known = self.taken.clone();
            known.sort();
            return Err(config_err(format!(
                "{}.{stray}: unknown key (known keys: {})",
                self.name,
                known.join(", ")
            )));
        }
        Ok(())
    }
}

fn parse_f64(section: &str, key: &str, text: &str) -> Result<f64, CliError> {
    let v: f64 = text
        .parse()
        .map_err(|_| config_err(format!("{section}.{key}: expected a number, got `{text}`")))?;
    if !v.is_finite() {
        return Err(config_err(format!(
            "{section}.{key}: must be finite, got `{text}`"
        )));
    }
    Ok(v)
}

pub fn load(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, seed_override)
}

pub fn parse(text: &str, seed_override: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut sections = parse_raw(text)?;

    // [manifold]
    let mut m = Section::new("manifold", &mut sections);
    let kind = m.required("kind")?;
    let manifold = match kind.as_str() {
        "torus" => {
            let lengths = m.required("lengths")?;
            let lengths = fixed4(&lengths, "manifold", "lengths", |s| {
                parse_f64("manifold", "lengths", s)
            })?;
            let nodes = m.required("nodes")?;
            let nodes = fixed4(&nodes, "manifold", "nodes", |s| {
                s.parse::<usize>().map_err(|_| {
                    config_err(format!("manifold.nodes: expected an integer, got `{s}`"))
                })
            })?;
            for key in ["radius", "radial_nodes"] {
                if m.take(key).is_some() {
                    return Err(config_err(format!(
                        "manifold.{key}: only valid for kind = sphere"
                    )));
                }
            }
            ManifoldSpec::Torus4 { lengths, nodes }
        }
        "sphere" => {
            let radius = m.f64("radius")?;
            let radial_nodes = m.usize_opt("radial_nodes")?.ok_or_else(|| {
                config_err("manifold.radial_nodes: missing required key".to_string())
            })?;
            for key in ["lengths", "nodes"] {
                if m.take(key).is_some() {
                    return Err(config_err(format!(
                        "manifold.{key}: only valid for kind = torus"
                    )));
                }
            }
            ManifoldSpec::Sphere4Radial {
                radius,
                radial_nodes,
            }
        }
        other => {
            return Err(config_err(format!(
                "manifold.kind: expected `torus` or `sphere`, got `{other}`"
            )))
        }
    };
    m.finish()?;
    manifold
        .validate()
        .map_err(|e| config_err(format!("manifold: {e}")))?;

    // [physics]
    let mut ph = Section::new("physics", &mut sections);
    let q = ph.f64("q")?;
    let m0 = ph.f64("m0")?;
    let m1 = ph.f64("m1")?;
    let omega = ph.f64("omega")?;
    let p = ph.f64("p")?;
    ph.finish()?;
    let physics = PhysicsParams::new(q, m0, m1, omega, p)
        .map_err(|e| config_err(format!("physics: {e}")))?;

    // [solver]
    let mut s = Section::new("solver", &mut sections);
    let defaults = MpaSettings::default();
    let settings = MpaSettings {
        path_nodes: s.usize_opt("path_nodes")?.unwrap_or(defaults.path_nodes),
        max_sweeps: s.usize_opt("max_sweeps")?.unwrap_or(defaults.max_sweeps),
        initial_step: s.f64_opt("initial_step")?.unwrap_or(defaults.initial_step),
        grad_tol: s.f64_opt("grad_tol")?.unwrap_or(defaults.grad_tol),
        blowup_cap: s.f64_opt("blowup_cap")?.unwrap_or(defaults.blowup_cap),
        phi_tol: s.f64_opt("phi_tol")?.unwrap_or(defaults.phi_tol),
    };
    let seed_cfg = s.u64_opt("seed")?;
    s.finish()?;
    settings
        .validate()
        .map_err(|e| config_err(format!("solver: {e}")))?;
    let seed = seed_override.or(seed_cfg).unwrap_or(42);

    // [experiment]
    let mut e = Section::new("experiment", &mut sections);
    let experiment = ExperimentSection {
        omega_grid: e.f64_list_opt("omega_grid")?,
        p_list: e.f64_list_opt("p_list")?,
        eps_list: e.f64_list_opt("eps_list")?,
        lambda: e.f64_opt("lambda")?,
        out_dir: e.take("out_dir"),
        seed_height: e.f64_opt("seed_height")?,
    };
    e.finish()?;
    if let Some(h) = experiment.seed_height {
        if !(h > 0.0) {
            return Err(config_err(format!(
                "experiment.seed_height: must be positive, got {h}"
            )));
        }
    }

    Ok(ExperimentConfig {
        manifold,
        physics,
        settings,
        seed,
        experiment,
    })
}

fn fixed4<T: Copy + std::fmt::Debug>(
    text: &str,
    section: &str,
    key: &str,
    one: impl Fn(&str) -> Result<T, CliError>,
) -> Result<[T; 4], CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(config_err(format!(
            "{section}.{key}: expected 4 comma-separated values, got {}",
            parts.len()
        )));
    }
    let mut vals = Vec::with_capacity(4);
    for piece in parts {
        vals.push(one(piece)?);
    }
    Ok([vals[0], vals[1], vals[2], vals[3]])
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
[manifold]
kind = torus
lengths = 6.283185307179586, 6.283185307179586, 6.283185307179586, 6.283185307179586
nodes = 8, 8, 8, 8

[physics]
q = 1.0
m0 = 1.0
m1 = 1.0
omega = 0.5
p = 3.0

[solver]
seed = 7
grad_tol = 1e-8

[experiment]
omega_grid = -0.5, 0.0, 0.5
";

    #[test]
    fn parses_a_complete_config() {
        let cfg = parse(GOOD, None).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.physics.p(), 3.0);
        assert_eq!(cfg.settings.grad_tol, 1e-8);
        assert_eq!(cfg.experiment.omega_grid.as_deref(), Some(&[-0.5, 0.0, 0.5][..]));
        match cfg.manifold {
            ManifoldSpec::Torus4 { nodes, .. } => assert_eq!(nodes, [8; 4]),
            _ => panic!("wrong manifold"),
        }
    }

    #[test]
    fn seed_override_wins() {
        let cfg = parse(GOOD, Some(99)).unwrap();
        assert_eq!(cfg.seed, 99);
    }

    #[test]
    fn missing_required_key_names_the_field_path() {
        let bad = GOOD.replace("m0 = 1.0\n", "");
        let err = parse(&bad, None).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("physics.m0"), "message was: {msg}");
    }

    #[test]
    fn invariant_violations_surface_at_parse_time() {
        let bad = GOOD.replace("omega = 0.5", "omega = 2.0");
        let msg = format!("{}", parse(&bad, None).unwrap_err());
        assert!(msg.contains("physics"), "message was: {msg}");

        let bad = GOOD.replace("nodes = 8, 8, 8, 8", "nodes = 8, 8, 8, 3");
        assert!(parse(&bad, None).is_err());
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let bad = format!("{GOOD}\nmistyped = 1\n");
        let msg = format!("{}", parse(&bad, None).unwrap_err());
        assert!(msg.contains("experiment.mistyped"), "message was: {msg}");

        let bad = GOOD.replace("[solver]", "[solvers]");
        assert!(parse(&bad, None).is_err());
    }

    #[test]
    fn sphere_configs_reject_torus_keys() {
        let text = "\
[manifold]
kind = sphere
radius = 1.0
radial_nodes = 64
nodes = 8, 8, 8, 8

[physics]
q = 1.0
m0 = 1.0
m1 = 1.0
omega = 0.0
p = 4.0
";
        let msg = format!("{}", parse(text, None).unwrap_err());
        assert!(msg.contains("manifold.nodes"), "message was: {msg}");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = GOOD.replace("q = 1.0", "q = 1.0  # coupling");
        assert!(parse(&text, None).is_ok());
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let bad = GOOD.replace("q = 1.0", "q 1.0");
        let msg = format!("{}", parse(&bad, None).unwrap_err());
        assert!(msg.contains("key = value"), "message was: {msg}");
    }
}
