//! Run configuration: a sectioned `key = value` text format.
//!
//! ```text
//! scenario = half_defect_2d      # or custom
//! [mesh]
//! source = generate              # generate | file | saturn
//! cells = 128
//! [flow]
//! tau = 0.01
//! [output]
//! dir = out
//! ```
//!
//! Naming a scenario fills every field with that preset's defaults; explicit
//! keys override them. Unknown keys are errors. Custom problems need a
//! `[mesh]` section plus `[bc]`/`[init]` data (constant per region).

use crate::energy::DoubleWell;
use crate::error::{Error, Result};
use crate::flow::{FlowConfig, GuardPolicy};
use crate::mesh::MeshPattern;
use crate::scenarios::saturn::SaturnRecipe;
use crate::scenarios::{MeshSpec, Scenario, ScenarioKind};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub vtk: bool,
    pub csv: bool,
    /// Emit a checkpoint every N steps (0 = only the final state).
    pub checkpoint_every: usize,
    /// Seed for randomized test utilities; recorded in output for
    /// reproducibility.
    pub seed: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            vtk: true,
            csv: true,
            checkpoint_every: 0,
            seed: 0,
        }
    }
}

/// Constant Dirichlet data for custom problems.
#[derive(Debug, Clone)]
pub struct CustomBc {
    pub label: String,
    pub s: Option<f64>,
    pub n: Option<[f64; 3]>,
}

/// Fully resolved run configuration (defaults applied at load time).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Option<ScenarioKind>,
    pub mesh: MeshSpec,
    pub well: Option<DoubleWell>,
    pub flow: FlowConfig,
    pub delta0: f64,
    pub output: OutputConfig,
    pub custom_bc: Vec<CustomBc>,
    pub custom_init_s: f64,
    pub custom_init_n: [f64; 3],
}

impl RunConfig {
    /// Materializes the preset with this config's overrides applied.
    pub fn to_scenario(&self) -> Option<Scenario> {
        let kind = self.scenario?;
        let mut sc = Scenario::preset(kind);
        sc.mesh = self.mesh.clone();
        sc.well = self.well;
        sc.flow = self.flow;
        sc.delta0 = self.delta0;
        Some(sc)
    }
}

struct RawConfig {
    /// (section, key) -> (value, line number)
    entries: HashMap<(String, String), (String, usize)>,
    consumed: std::cell::RefCell<std::collections::HashSet<(String, String)>>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        let mut section = String::new();
        for (ln, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(k) => &raw_line[..k],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(Error::Config(format!(
                        "line {}: malformed section header '{line}'",
                        ln + 1
                    )));
                }
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value', got '{line}'", ln + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries
                .insert((section.clone(), key.clone()), (value, ln + 1))
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {}: duplicate key '{key}' in section '[{section}]'",
                    ln + 1
                )));
            }
        }
        Ok(RawConfig {
            entries,
            consumed: Default::default(),
        })
    }

    fn get(&self, section: &str, key: &str) -> Option<&(String, usize)> {
        let id = (section.to_string(), key.to_string());
        let out = self.entries.get(&id);
        if out.is_some() {
            self.consumed.borrow_mut().insert(id);
        }
        out
    }

    fn take<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some((v, ln)) => v.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("line {ln}: cannot parse '{v}' for key '{key}'"))
            }),
        }
    }

    fn take_bool(&self, section: &str, key: &str) -> Result<Option<bool>> {
        match self.get(section, key) {
            None => Ok(None),
            Some((v, ln)) => match v.as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                _ => Err(Error::Config(format!(
                    "line {ln}: expected a boolean for '{key}', got '{v}'"
                ))),
            },
        }
    }

    fn take_floats(&self, section: &str, key: &str, count: usize) -> Result<Option<Vec<f64>>> {
        match self.get(section, key) {
            None => Ok(None),
            Some((v, ln)) => {
                let vals: Vec<f64> = v
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| {
                        Error::Config(format!("line {ln}: cannot parse numbers for '{key}'"))
                    })?;
                if vals.len() != count {
                    return Err(Error::Config(format!(
                        "line {ln}: '{key}' needs {count} numbers, got {}",
                        vals.len()
                    )));
                }
                Ok(Some(vals))
            }
        }
    }

    /// Errors on the first key that was never consumed.
    fn check_unknown(&self) -> Result<()> {
        let consumed = self.consumed.borrow();
        let mut unknown: Vec<(&(String, String), usize)> = self
            .entries
            .iter()
            .filter(|(id, _)| !consumed.contains(*id))
            .map(|(id, (_, ln))| (id, *ln))
            .collect();
        unknown.sort_by_key(|(_, ln)| *ln);
        if let Some(((section, key), ln)) = unknown.first() {
            let place = if section.is_empty() {
                String::new()
            } else {
                format!(" in section '[{section}]'")
            };
            return Err(Error::Config(format!(
                "line {ln}: unknown key '{key}'{place}"
            )));
        }
        Ok(())
    }
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let raw = RawConfig::parse(text)?;

    let scenario = match raw.get("", "scenario") {
        None => None,
        Some((v, _)) if v == "custom" => None,
        Some((v, _)) => Some(ScenarioKind::parse(v)?),
    };
    let has_scenario_key = raw.entries.contains_key(&(String::new(), "scenario".into()));
    if !has_scenario_key {
        return Err(Error::Config(
            "missing top-level 'scenario = <name>|custom'".into(),
        ));
    }

    // defaults from the preset (or bare defaults for custom problems)
    let preset = scenario.map(Scenario::preset);
    let mut mesh = preset.as_ref().map(|p| p.mesh.clone());
    let mut well = preset.as_ref().and_then(|p| p.well);
    let mut flow = preset.as_ref().map(|p| p.flow).unwrap_or_default();
    let mut delta0 = preset.as_ref().map_or(1e-3, |p| p.delta0);
    let mut output = OutputConfig::default();

    // [mesh]
    if let Some((source, ln)) = raw.get("mesh", "source").cloned() {
        match source.as_str() {
            "generate" => {
                let dim = raw
                    .take::<usize>("mesh", "dim")?
                    .ok_or_else(|| Error::Config("mesh: 'generate' needs 'dim'".into()))?;
                let pattern_name = raw
                    .get("mesh", "pattern")
                    .map(|(v, _)| v.clone())
                    .unwrap_or_else(|| if dim == 2 { "crisscross" } else { "kuhn" }.to_string());
                let pattern = MeshPattern::parse(&pattern_name)?;
                let cells = raw.take::<usize>("mesh", "cells")?.unwrap_or(16);
                let extents = raw
                    .take_floats("mesh", "box", 2 * dim)?
                    .unwrap_or_else(|| {
                        (0..dim).flat_map(|_| [0.0, 1.0]).collect::<Vec<f64>>()
                    });
                mesh = Some(MeshSpec::Box {
                    dim,
                    extents,
                    cells,
                    pattern,
                });
            }
            "file" => {
                let path = raw
                    .get("mesh", "path")
                    .map(|(v, _)| v.clone())
                    .ok_or_else(|| Error::Config("mesh: 'file' needs 'path'".into()))?;
                let resolved = base_dir.join(&path);
                if !resolved.exists() {
                    return Err(Error::Mesh(format!(
                        "mesh file '{}' does not exist",
                        resolved.display()
                    )));
                }
                mesh = Some(MeshSpec::File(resolved.to_string_lossy().into_owned()));
            }
            "saturn" => {
                let mut recipe = SaturnRecipe::default();
                if let Some(v) = raw.take::<f64>("mesh", "fine_h")? {
                    recipe.fine_h = v;
                }
                if let Some(v) = raw.take::<f64>("mesh", "fine_half")? {
                    recipe.fine_half = v;
                }
                if let Some(v) = raw.take::<f64>("mesh", "growth")? {
                    recipe.growth = v;
                }
                mesh = Some(MeshSpec::Saturn(recipe));
            }
            other => {
                return Err(Error::Config(format!(
                    "line {ln}: unknown mesh source '{other}'"
                )))
            }
        }
    } else if let Some(MeshSpec::Box { cells, .. }) = &mut mesh {
        // resolution override on a preset box mesh
        if let Some(c) = raw.take::<usize>("mesh", "cells")? {
            *cells = c;
        }
    } else if let Some(MeshSpec::Saturn(recipe)) = &mut mesh {
        if let Some(v) = raw.take::<f64>("mesh", "fine_h")? {
            recipe.fine_h = v;
        }
        if let Some(v) = raw.take::<f64>("mesh", "fine_half")? {
            recipe.fine_half = v;
        }
        if let Some(v) = raw.take::<f64>("mesh", "growth")? {
            recipe.growth = v;
        }
    }
    let mesh = mesh.ok_or_else(|| {
        Error::Config("custom problems need a [mesh] section with 'source'".into())
    })?;

    // [well]
    if let Some(enabled) = raw.take_bool("well", "enabled")? {
        if !enabled {
            well = None;
        }
    }
    let psi_c = raw.take_floats("well", "psi_c", 2)?;
    let psi_e = raw.take_floats("well", "psi_e", 3)?;
    if psi_c.is_some() || psi_e.is_some() {
        let c = psi_c.ok_or_else(|| Error::Config("well: psi_c = c2 c0 required".into()))?;
        let e = psi_e.ok_or_else(|| Error::Config("well: psi_e = e4 e3 e2 required".into()))?;
        let eta_b = raw
            .take::<f64>("well", "eta_b")?
            .ok_or_else(|| Error::Config("well: eta_b required".into()))?;
        let s_star = raw
            .take::<f64>("well", "s_star")?
            .ok_or_else(|| Error::Config("well: s_star required".into()))?;
        well = Some(DoubleWell {
            c2: c[0],
            c0: c[1],
            e4: e[0],
            e3: e[1],
            e2: e[2],
            eta_b,
            s_star,
        });
    } else {
        if let (Some(w), Some(eta)) = (&mut well, raw.take::<f64>("well", "eta_b")?) {
            w.eta_b = eta;
        }
        if let (Some(w), Some(s_star)) = (&mut well, raw.take::<f64>("well", "s_star")?) {
            w.s_star = s_star;
        }
    }
    if let Some(w) = &well {
        if !(w.eta_b > 0.0) {
            return Err(Error::Config(format!(
                "well: eta_b must be positive, got {}",
                w.eta_b
            )));
        }
    }

    // [flow]
    if let Some(v) = raw.take::<f64>("flow", "tau")? {
        flow.tau = v;
    }
    if let Some(v) = raw.take::<f64>("flow", "eps")? {
        flow.eps = v;
    }
    if let Some(v) = raw.take::<usize>("flow", "max_steps")? {
        flow.max_steps = v;
    }
    if let Some(v) = raw.take::<f64>("flow", "c0")? {
        flow.cfl_constant = v;
    }
    if let Some((v, ln)) = raw.get("flow", "guard") {
        flow.guard = match v.as_str() {
            "abort" | "true" => GuardPolicy::Abort,
            "halve" => GuardPolicy::HalveOnce,
            "off" | "false" => GuardPolicy::Off,
            other => {
                return Err(Error::Config(format!(
                    "line {ln}: guard must be abort|halve|off, got '{other}'"
                )))
            }
        };
    }
    if let Some(v) = raw.take::<f64>("flow", "cg_tol")? {
        flow.cg_tol = v;
    }
    if let Some(v) = raw.take::<usize>("flow", "cg_max_iter_mul")? {
        flow.cg_max_iter_mul = v;
    }
    flow.validate()?;
    if let Some(v) = raw.take::<f64>("", "delta0")? {
        delta0 = v;
    }
    if !(delta0 > 0.0) {
        return Err(Error::Config(format!(
            "delta0 must be positive, got {delta0}"
        )));
    }

    // [output]
    if let Some((v, _)) = raw.get("output", "dir") {
        output.dir = base_dir.join(v);
    }
    if let Some(v) = raw.take_bool("output", "vtk")? {
        output.vtk = v;
    }
    if let Some(v) = raw.take_bool("output", "csv")? {
        output.csv = v;
    }
    if let Some(v) = raw.take::<usize>("output", "checkpoint_every")? {
        output.checkpoint_every = v;
    }
    if let Some(v) = raw.take::<u64>("output", "seed")? {
        output.seed = v;
    }

    // [bc] / [init] for custom problems
    let mut custom_bc: Vec<CustomBc> = Vec::new();
    let bc_keys: Vec<(String, String, usize)> = raw
        .entries
        .iter()
        .filter(|((section, _), _)| section == "bc")
        .map(|((_, key), (v, ln))| (key.clone(), v.clone(), *ln))
        .collect();
    for (key, value, ln) in bc_keys {
        let (field, label) = key.split_once('.').ok_or_else(|| {
            Error::Config(format!(
                "line {ln}: bc keys look like 's.<region>' or 'n.<region>'"
            ))
        })?;
        let entry = match custom_bc.iter_mut().find(|e| e.label == label) {
            Some(e) => e,
            None => {
                custom_bc.push(CustomBc {
                    label: label.to_string(),
                    s: None,
                    n: None,
                });
                custom_bc.last_mut().unwrap()
            }
        };
        match field {
            "s" => {
                entry.s = Some(value.parse().map_err(|_| {
                    Error::Config(format!("line {ln}: bad scalar boundary value '{value}'"))
                })?);
                raw.get("bc", &key);
            }
            "n" => {
                let vals: Vec<f64> = value
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| {
                        Error::Config(format!("line {ln}: bad director boundary value"))
                    })?;
                if vals.len() < 2 || vals.len() > 3 {
                    return Err(Error::Config(format!(
                        "line {ln}: director needs 2 or 3 components"
                    )));
                }
                let mut n = [0.0; 3];
                n[..vals.len()].copy_from_slice(&vals);
                entry.n = Some(n);
                raw.get("bc", &key);
            }
            other => {
                return Err(Error::Config(format!(
                    "line {ln}: unknown bc field '{other}' (use s.<region> / n.<region>)"
                )))
            }
        }
    }
    custom_bc.sort_by(|a, b| a.label.cmp(&b.label));
    let custom_init_s = raw.take::<f64>("init", "s")?.unwrap_or(0.5);
    let custom_init_n = raw
        .take_floats("init", "n", 3)?
        .map(|v| [v[0], v[1], v[2]])
        .unwrap_or([1.0, 0.0, 0.0]);

    raw.check_unknown()?;

    Ok(RunConfig {
        scenario,
        mesh,
        well,
        flow,
        delta0,
        output,
        custom_bc,
        custom_init_s,
        custom_init_n,
    })
}

/// Loads and validates a run configuration; relative paths resolve against
/// the config file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config_str(text, Path::new("."))
    }

    #[test]
    fn minimal_scenario_config_applies_defaults() {
        let cfg = parse("scenario = half_defect_2d\n").unwrap();
        assert_eq!(cfg.scenario, Some(ScenarioKind::HalfDefect2d));
        assert_eq!(cfg.flow.tau, 1e-2);
        let w = cfg.well.unwrap();
        assert_eq!(w.eta_b, 1.0 / 16.0);
        assert_eq!(w.s_star, 0.7);
        match cfg.mesh {
            MeshSpec::Box { dim, cells, .. } => {
                assert_eq!(dim, 2);
                assert_eq!(cells, crate::scenarios::HALF_DEFECT_2D_CELLS);
            }
            _ => panic!("expected box mesh"),
        }
    }

    #[test]
    fn negative_tau_rejected() {
        let err = parse("scenario = half_defect_2d\n[flow]\ntau = -1\n").unwrap_err();
        assert!(err.to_string().contains("tau"), "{err}");
    }

    #[test]
    fn unknown_key_named() {
        let err = parse("scenario = half_defect_2d\n[flow]\nfobar = 3\n").unwrap_err();
        assert!(err.to_string().contains("fobar"), "{err}");
    }

    #[test]
    fn unknown_scenario_rejected() {
        assert!(parse("scenario = wat\n").is_err());
    }

    #[test]
    fn cells_override_on_preset() {
        let cfg = parse("scenario = half_defect_2d\n[mesh]\ncells = 32\n").unwrap();
        match cfg.mesh {
            MeshSpec::Box { cells, .. } => assert_eq!(cells, 32),
            _ => panic!(),
        }
    }

    #[test]
    fn custom_problem_with_bc() {
        let text = "scenario = custom\n[mesh]\nsource = generate\ndim = 2\ncells = 4\n\
                    [bc]\ns.x0 = 0.5\nn.x0 = 1 0\n[init]\ns = 0.4\nn = 0 1 0\n";
        let cfg = parse(text).unwrap();
        assert!(cfg.scenario.is_none());
        assert_eq!(cfg.custom_bc.len(), 1);
        assert_eq!(cfg.custom_bc[0].s, Some(0.5));
        assert_eq!(cfg.custom_init_s, 0.4);
    }

    #[test]
    fn missing_mesh_file_is_mesh_error() {
        let err = parse("scenario = custom\n[mesh]\nsource = file\npath = nope.mesh\n")
            .unwrap_err();
        assert!(matches!(err, Error::Mesh(_)), "{err}");
    }

    #[test]
    fn well_override_eta_only() {
        let cfg = parse("scenario = saturn_ring\n[well]\neta_b = 0.5\n").unwrap();
        assert_eq!(cfg.well.unwrap().eta_b, 0.5);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = parse("# a comment\nscenario = orientable_2d\n\n[flow] # trailing\ntau = 0.001\n")
            .unwrap();
        assert_eq!(cfg.flow.tau, 0.001);
    }
}
