//! TOML run configuration: parsing, default filling and validation.
//!
//! A document has a top-level `command` key and one level of sections:
//! `[rod]`, `[initial]`, `[grid]`, `[solver]`, `[checks]`, `[flow]`, `[scan]`,
//! `[norms]`, `[sweep]` and `[output]`. Unknown keys are errors.

use std::path::PathBuf;

use rodwave_core::evolution::{NormMonitor, SolverControls};
use rodwave_core::inflation::SweepOptions;
use rodwave_core::RodParams;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("`{path}`: {detail}")]
    Invalid { path: String, detail: String },
}

fn invalid(path: &str, detail: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.into(), detail: detail.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    VerifyNorms,
    BlowupScan,
    InflateSweep,
    FlowTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Mollified plateau datum built from `[rod]`.
    Plateau,
    /// `u₀ ≡ 0`.
    Zero,
    /// `amplitude·sech(x)`.
    Sech,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<Command>,
    rod: Option<RawRod>,
    initial: Option<RawInitial>,
    grid: Option<RawGrid>,
    solver: Option<RawSolver>,
    checks: Option<RawChecks>,
    flow: Option<RawFlow>,
    scan: Option<RawScan>,
    norms: Option<RawNorms>,
    sweep: Option<RawSweep>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRod {
    gamma: Option<f64>,
    p0: Option<f64>,
    q0: Option<f64>,
    moll_width: Option<f64>,
    s: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    profile: Option<Profile>,
    amplitude: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    half_length: Option<f64>,
    n_points: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    dt_init: Option<f64>,
    cfl_safety: Option<f64>,
    ux_blowup_threshold: Option<f64>,
    t_max: Option<f64>,
    dealias: Option<bool>,
    log_every: Option<usize>,
    checkpoints: Option<Vec<f64>>,
    max_steps: Option<usize>,
    monitor_s: Option<f64>,
    monitor_p: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChecks {
    e_drift_max: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlow {
    labels: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    p0s: Option<Vec<f64>>,
    q0: Option<f64>,
    half_length: Option<f64>,
    grid_budget: Option<usize>,
    cfl_safety: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNorms {
    q0s: Option<Vec<f64>>,
    ss: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    ns: Option<Vec<u32>>,
    s: Option<f64>,
    gamma: Option<f64>,
    grid_budget: Option<usize>,
    half_length: Option<f64>,
    blowup_multiple: Option<f64>,
    cfl_safety: Option<f64>,
    c_slack: Option<f64>,
    t_max_factor: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

/// Initial datum selection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialConfig {
    pub profile: Profile,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    pub half_length: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanConfig {
    pub p0s: Vec<f64>,
    pub q0: f64,
    pub half_length: f64,
    pub grid_budget: usize,
    pub cfl_safety: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormsConfig {
    pub q0s: Vec<f64>,
    pub ss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub ns: Vec<u32>,
    pub s: f64,
    pub gamma: f64,
    pub grid_budget: usize,
    pub options: SweepOptions,
}

/// Validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub rod: RodParams,
    pub initial: InitialConfig,
    pub grid: GridConfig,
    pub solver: SolverControls,
    /// Largest relative E drift accepted by `simulate` and `flow-trace`.
    pub e_drift_max: Option<f64>,
    pub seed_labels: Vec<f64>,
    pub scan: ScanConfig,
    pub norms: NormsConfig,
    pub sweep: Option<SweepConfig>,
    pub output_dir: PathBuf,
}

pub const DEFAULT_HALF_LENGTH: f64 = 30.0;
pub const DEFAULT_N_POINTS: usize = 1 << 14;

fn positive(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(path, format!("must be positive and finite, got {v}")))
    }
}

fn power_of_two(path: &str, n: usize) -> Result<usize, ConfigError> {
    if n >= 16 && n.is_power_of_two() {
        Ok(n)
    } else {
        Err(invalid(path, format!("must be a power of two >= 16, got {n}")))
    }
}

fn rod_params(raw: Option<RawRod>, required: bool) -> Result<RodParams, ConfigError> {
    let raw = match raw {
        Some(r) => r,
        None if required => return Err(ConfigError::Missing("rod".into())),
        None => RawRod { gamma: None, p0: None, q0: None, moll_width: None, s: None },
    };
    let need = |v: Option<f64>, key: &str, default: f64| match v {
        Some(x) => Ok(x),
        None if required => Err(ConfigError::Missing(format!("rod.{key}"))),
        None => Ok(default),
    };
    let gamma = raw.gamma.unwrap_or(1.0);
    let p0 = need(raw.p0, "p0", 8.0)?;
    let q0 = need(raw.q0, "q0", 0.05)?;
    let mut params = RodParams::new(gamma, p0, q0);
    if let Some(eps) = raw.moll_width {
        params = params.with_moll_width(eps);
    }
    if let Some(s) = raw.s {
        params = params.with_s(s);
    }
    params.validate().map_err(|e| match e {
        rodwave_core::RodError::OutOfRange { name, detail } => {
            let detail = if name == "q0" { format!("q0 out of (0, 0.25): {detail}") } else { detail };
            invalid(&format!("rod.{name}"), detail)
        }
        other => invalid("rod", other.to_string()),
    })?;
    Ok(params)
}

/// Parse and validate a TOML document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, None)
}

/// [`parse_config`] with the command also given on the command line; the
/// document's `command` may then be omitted but must agree when present.
pub fn parse_config_with(text: &str, cli_command: Option<Command>) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let command = match (raw.command, cli_command) {
        (Some(a), Some(b)) if a != b => {
            return Err(invalid("command", format!("config says {a:?} but the command line says {b:?}")))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(ConfigError::Missing("command".into())),
    };

    let initial = match raw.initial {
        Some(i) => InitialConfig { profile: i.profile.unwrap_or(Profile::Plateau), amplitude: i.amplitude.unwrap_or(0.1) },
        None => InitialConfig { profile: Profile::Plateau, amplitude: 0.1 },
    };
    if initial.profile == Profile::Sech && !initial.amplitude.is_finite() {
        return Err(invalid("initial.amplitude", "must be finite"));
    }
    let needs_rod = matches!(command, Command::Simulate | Command::FlowTrace) && initial.profile == Profile::Plateau;
    let rod = rod_params(raw.rod, needs_rod)?;

    let grid = match raw.grid {
        Some(g) => GridConfig {
            half_length: positive("grid.half_length", g.half_length.unwrap_or(DEFAULT_HALF_LENGTH))?,
            n_points: power_of_two("grid.n_points", g.n_points.unwrap_or(DEFAULT_N_POINTS))?,
        },
        None => GridConfig { half_length: DEFAULT_HALF_LENGTH, n_points: DEFAULT_N_POINTS },
    };

    let mut solver = SolverControls::default();
    if let Some(s) = raw.solver {
        if let Some(v) = s.dt_init {
            solver.dt_init = positive("solver.dt_init", v)?;
        }
        if let Some(v) = s.cfl_safety {
            solver.cfl_safety = positive("solver.cfl_safety", v)?;
            if v > 1.0 {
                return Err(invalid("solver.cfl_safety", format!("must be at most 1, got {v}")));
            }
        }
        if let Some(v) = s.ux_blowup_threshold {
            solver.ux_blowup_threshold = positive("solver.ux_blowup_threshold", v)?;
        }
        if let Some(v) = s.t_max {
            solver.t_max = positive("solver.t_max", v)?;
        }
        if let Some(v) = s.dealias {
            solver.dealias = v;
        }
        if let Some(v) = s.log_every {
            if v == 0 {
                return Err(invalid("solver.log_every", "must be at least 1"));
            }
            solver.log_every = v;
        }
        if let Some(v) = s.checkpoints {
            if let Some(bad) = v.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
                return Err(invalid("solver.checkpoints", format!("times must be finite and >= 0, got {bad}")));
            }
            solver.checkpoints = v;
        }
        if let Some(v) = s.max_steps {
            if v == 0 {
                return Err(invalid("solver.max_steps", "must be at least 1"));
            }
            solver.max_steps = v;
        }
        match (s.monitor_s, s.monitor_p) {
            (None, None) => {}
            (Some(ms), Some(mp)) => {
                if !(0.0..=3.0).contains(&ms) {
                    return Err(invalid("solver.monitor_s", format!("must lie in [0, 3], got {ms}")));
                }
                if !(mp >= 1.0 && mp.is_finite()) {
                    return Err(invalid("solver.monitor_p", format!("must be finite and >= 1, got {mp}")));
                }
                solver.monitor = Some(NormMonitor { s: ms, p: mp });
            }
            _ => return Err(invalid("solver", "monitor_s and monitor_p must be given together")),
        }
    }

    let e_drift_max = match raw.checks.and_then(|c| c.e_drift_max) {
        Some(v) => Some(positive("checks.e_drift_max", v)?),
        None => None,
    };

    let seed_labels = raw.flow.and_then(|f| f.labels).unwrap_or_default();
    if command == Command::FlowTrace {
        if seed_labels.is_empty() {
            return Err(ConfigError::Missing("flow.labels".into()));
        }
        let half = grid.half_length / 2.0;
        if let Some(bad) = seed_labels.iter().find(|x| !(x.abs() <= half)) {
            return Err(invalid("flow.labels", format!("label {bad} outside [-L/2, L/2] = [{}, {half}]", -half)));
        }
    }

    let scan = {
        let s = raw.scan.unwrap_or(RawScan { p0s: None, q0: None, half_length: None, grid_budget: None, cfl_safety: None });
        let p0s = s.p0s.unwrap_or_else(|| vec![4.0, 8.0, 16.0]);
        if p0s.is_empty() {
            return Err(invalid("scan.p0s", "must not be empty"));
        }
        for &p in &p0s {
            positive("scan.p0s", p)?;
        }
        let q0 = s.q0.unwrap_or(rod.q0);
        if !(q0 > 0.0 && q0 < 0.25) {
            return Err(invalid("scan.q0", format!("q0 out of (0, 0.25): got {q0}")));
        }
        ScanConfig {
            p0s,
            q0,
            half_length: positive("scan.half_length", s.half_length.unwrap_or(10.0))?,
            grid_budget: power_of_two("scan.grid_budget", s.grid_budget.unwrap_or(1 << 20))?,
            cfl_safety: positive("scan.cfl_safety", s.cfl_safety.unwrap_or(0.3))?,
        }
    };

    let norms = {
        let n = raw.norms.unwrap_or(RawNorms { q0s: None, ss: None });
        let q0s = n.q0s.unwrap_or_else(|| vec![0.01, 0.05, 0.2]);
        let ss = n.ss.unwrap_or_else(|| vec![1.1, 1.25, 1.4]);
        if let Some(bad) = q0s.iter().find(|q| !(**q > 0.0 && **q < 0.25)) {
            return Err(invalid("norms.q0s", format!("q0 out of (0, 0.25): got {bad}")));
        }
        if let Some(bad) = ss.iter().find(|s| !(**s > 1.0 && **s < 1.5)) {
            return Err(invalid("norms.ss", format!("s out of (1, 1.5): got {bad}")));
        }
        NormsConfig { q0s, ss }
    };

    let sweep = match raw.sweep {
        None if command == Command::InflateSweep => return Err(ConfigError::Missing("sweep".into())),
        None => None,
        Some(s) => {
            let ns = s.ns.ok_or_else(|| ConfigError::Missing("sweep.ns".into()))?;
            if ns.is_empty() {
                return Err(invalid("sweep.ns", "must not be empty"));
            }
            if let Some(bad) = ns.iter().find(|n| **n < 2) {
                return Err(invalid("sweep.ns", format!("need n >= 2, got {bad}")));
            }
            let sv = s.s.unwrap_or(1.25);
            if !(sv > 1.0 && sv < 1.5) {
                return Err(invalid("sweep.s", format!("s out of (1, 1.5): got {sv}")));
            }
            let gamma = s.gamma.unwrap_or(rod.gamma);
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(invalid("sweep.gamma", format!("must be positive, got {gamma}")));
            }
            let d = SweepOptions::default();
            let options = SweepOptions {
                half_length: positive("sweep.half_length", s.half_length.unwrap_or(d.half_length))?,
                blowup_multiple: positive("sweep.blowup_multiple", s.blowup_multiple.unwrap_or(d.blowup_multiple))?,
                cfl_safety: positive("sweep.cfl_safety", s.cfl_safety.unwrap_or(d.cfl_safety))?,
                c_slack: positive("sweep.c_slack", s.c_slack.unwrap_or(d.c_slack))?,
                t_max_factor: positive("sweep.t_max_factor", s.t_max_factor.unwrap_or(d.t_max_factor))?,
            };
            Some(SweepConfig {
                ns,
                s: sv,
                gamma,
                grid_budget: power_of_two("sweep.grid_budget", s.grid_budget.unwrap_or(1 << 20))?,
                options,
            })
        }
    };

    let output_dir = raw.output.and_then(|o| o.dir).unwrap_or_else(|| PathBuf::from("rodwave-out"));

    Ok(RunConfig { command, rod, initial, grid, solver, e_drift_max, seed_labels, scan, norms, sweep, output_dir })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_simulate_fills_defaults() {
        let c = parse_config("command = \"simulate\"\n[rod]\ngamma = 1.0\np0 = 8.0\nq0 = 0.05\n").unwrap();
        assert_eq!(c.command, Command::Simulate);
        assert_eq!(c.grid.half_length, 30.0);
        assert_eq!(c.grid.n_points, 1 << 14);
        assert_eq!(c.solver.cfl_safety, 0.3);
        assert_eq!(c.rod.moll_width, 0.05 * 0.05);
        assert!(c.sweep.is_none());
    }

    #[test]
    fn q0_out_of_range_is_named() {
        let e = parse_config("command = \"simulate\"\n[rod]\np0 = 8.0\nq0 = 0.5\n").unwrap_err().to_string();
        assert!(e.contains("q0 out of (0, 0.25)"), "{e}");
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config("command = \"simulate\"\n[rod]\ngamma_ = 1.0\np0 = 8.0\nq0 = 0.05\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("gamma_"), "{e}");
    }

    #[test]
    fn missing_keys_are_named() {
        assert!(parse_config("[rod]\np0 = 1.0\n").unwrap_err().to_string().contains("command"));
        let e = parse_config("command = \"simulate\"\n[rod]\nq0 = 0.05\n").unwrap_err().to_string();
        assert!(e.contains("rod.p0"), "{e}");
        let e = parse_config("command = \"inflate-sweep\"\n").unwrap_err().to_string();
        assert!(e.contains("sweep"), "{e}");
    }

    #[test]
    fn zero_profile_needs_no_rod_block() {
        let c = parse_config("command = \"simulate\"\n[initial]\nprofile = \"zero\"\n").unwrap();
        assert_eq!(c.initial.profile, Profile::Zero);
    }

    #[test]
    fn flow_labels_are_checked() {
        let base = "command = \"flow-trace\"\n[rod]\np0 = 4.0\nq0 = 0.1\n";
        assert!(parse_config(base).unwrap_err().to_string().contains("flow.labels"));
        let e = parse_config(&format!("{base}[flow]\nlabels = [0.0, 20.0]\n")).unwrap_err().to_string();
        assert!(e.contains("flow.labels"), "{e}");
        assert!(parse_config(&format!("{base}[flow]\nlabels = [0.0, 1.0]\n")).is_ok());
    }

    #[test]
    fn grid_size_must_be_power_of_two() {
        let e = parse_config("command = \"verify-norms\"\n[grid]\nn_points = 1000\n").unwrap_err().to_string();
        assert!(e.contains("grid.n_points"), "{e}");
    }
}
