//! Command-line front end: configuration, experiment orchestration and
//! artifact emission.

pub mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rodwave_core::evolution::{conserved_e, BlowupReport, Trajectory};
use rodwave_core::inflation::{plan_resolution, run_inflation_sweep, write_sweep_csv, InflationRecord, RecordStatus};
use rodwave_core::initial_data::{profile_integral, profile_integral_bounds};
use rodwave_core::{
    build_u0, lifespan_bounds, make_grid, simulate, simulate_with_particles, Field, RodError, RodParams, RunStatus,
    SolverControls, Symmetry,
};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{parse_config, parse_config_with, Command, ConfigError, Profile, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Rod(#[from] RodError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Other(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// One in-run assertion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Debug, Serialize)]
struct Versions {
    rodwave: &'static str,
    rodwave_core: &'static str,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: Command,
    run_id: &'a str,
    config: &'a RunConfig,
    versions: Versions,
    wall_time_s: f64,
    artifacts: &'a [String],
    verdicts: &'a [Verdict],
    failures: Vec<&'a str>,
    report: serde_json::Value,
}

/// Result of a completed run.
#[derive(Debug)]
pub struct RunOutcome {
    pub run_id: String,
    pub output_dir: PathBuf,
    pub verdicts: Vec<Verdict>,
    pub artifacts: Vec<String>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn failures(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| !v.pass).collect()
    }
}

/// SHA-256 of the validated configuration, excluding the output directory.
pub fn run_id(config: &RunConfig) -> String {
    let mut value = serde_json::to_value(config).expect("config serializes");
    if let Some(obj) = value.as_object_mut() {
        obj.remove("output_dir");
    }
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

struct Ctx {
    dir: PathBuf,
    run_id: String,
    artifacts: Vec<String>,
    verdicts: Vec<Verdict>,
    report: serde_json::Value,
}

impl Ctx {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        let f = File::create(&path).map_err(io_err(&path))?;
        self.artifacts.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn write_with(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut w = self.create(name)?;
        body(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))
    }

    fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict::new(name, pass, detail));
    }
}

/// Execute `config`, writing artifacts and `manifest.json` into its output directory.
pub fn run(config: &RunConfig) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut ctx = Ctx {
        dir: dir.clone(),
        run_id: run_id(config),
        artifacts: Vec::new(),
        verdicts: Vec::new(),
        report: serde_json::Value::Null,
    };
    match config.command {
        Command::Simulate => cmd_simulate(config, &mut ctx, false)?,
        Command::FlowTrace => cmd_simulate(config, &mut ctx, true)?,
        Command::VerifyNorms => cmd_verify_norms(config, &mut ctx)?,
        Command::BlowupScan => cmd_blowup_scan(config, &mut ctx)?,
        Command::InflateSweep => cmd_inflate_sweep(config, &mut ctx)?,
    }
    let manifest = Manifest {
        command: config.command,
        run_id: &ctx.run_id,
        config,
        versions: Versions { rodwave: env!("CARGO_PKG_VERSION"), rodwave_core: env!("CARGO_PKG_VERSION") },
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts: &ctx.artifacts,
        verdicts: &ctx.verdicts,
        failures: ctx.verdicts.iter().filter(|v| !v.pass).map(|v| v.name.as_str()).collect(),
        report: ctx.report.clone(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Other(e.to_string()))?;
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(RunOutcome { run_id: ctx.run_id, output_dir: dir, verdicts: ctx.verdicts, artifacts: ctx.artifacts })
}

fn initial_field(config: &RunConfig) -> Result<Field, CliError> {
    let grid = make_grid(config.grid.half_length, config.grid.n_points)?;
    Ok(match config.initial.profile {
        Profile::Plateau => build_u0(&config.rod, &grid)?,
        Profile::Zero => Field::zeros(&grid).with_symmetry(Symmetry::Odd),
        Profile::Sech => {
            let a = config.initial.amplitude;
            Field::from_fn(&grid, |x| a / x.cosh())
        }
    })
}

fn write_trajectory(ctx: &mut Ctx, traj: &Trajectory) -> Result<(), CliError> {
    let id = ctx.run_id.clone();
    ctx.write_with("trajectory.csv", |w| traj.write_csv(w, &id))?;
    for (k, snap) in traj.snapshots.iter().enumerate() {
        ctx.write_with(&format!("snapshots/snapshot_{k:05}.csv"), |w| snap.write_csv(w, &id))?;
    }
    Ok(())
}

fn cmd_simulate(config: &RunConfig, ctx: &mut Ctx, with_particles: bool) -> Result<(), CliError> {
    let u0 = initial_field(config)?;
    let gamma = config.rod.gamma;
    let controls: SolverControls = config.solver.clone();
    let (traj, pset) = if with_particles {
        let (t, p) = simulate_with_particles(&u0, gamma, &controls, &config.seed_labels)?;
        (t, Some(p))
    } else {
        (simulate(&u0, gamma, &controls)?, None)
    };
    write_trajectory(ctx, &traj)?;

    let t_end = traj.final_time();
    ctx.check("finite", traj.status != RunStatus::Poisoned, format!("status {:?} at t = {t_end:.17e}", traj.status));
    let e0 = conserved_e(&traj.initial)?;
    let bound = (0.5 * e0).sqrt() + 1e-6;
    let sup = traj.max_abs_u.iter().copied().fold(0.0, f64::max);
    ctx.check("sup_bound", sup <= bound, format!("max |u| = {sup:.17e} <= sqrt(E/2) + 1e-6 = {bound:.17e}"));
    let drift = traj.e_drift_until(t_end);
    if let Some(tol) = config.e_drift_max {
        ctx.check("e_drift", drift <= tol, format!("relative E drift {drift:.17e} <= {tol:.17e}"));
    }

    let mut report = serde_json::json!({
        "status": traj.status,
        "final_time": t_end,
        "steps": traj.times.len().saturating_sub(1),
        "e_drift": drift,
        "threshold": traj.threshold,
    });
    if config.initial.profile == Profile::Plateau && config.rod.gamma > 0.0 {
        if let Ok(win) = lifespan_bounds(&u0, &config.rod) {
            let rep = BlowupReport::from_trajectory(&traj, (win.t1_min, win.t1_max))?;
            report["lifespan"] = serde_json::to_value(win).unwrap_or_default();
            report["blowup"] = serde_json::to_value(rep).unwrap_or_default();
        }
    }
    ctx.report = report;

    if let Some(ps) = pset {
        let id = ctx.run_id.clone();
        ctx.write_with("particles.csv", |w| ps.write_csv(w, &id))?;
        let gaps = ps.min_gaps();
        let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        ctx.check("flow_order", ps.is_strictly_ordered(), format!("smallest label-adjacent gap {min_gap:.17e}"));
        if u0.symmetry() == Symmetry::Odd {
            if let Some(i0) = ps.find_label(0.0) {
                let drift = ps.paths[i0].iter().map(|x| x.abs()).fold(0.0, f64::max);
                ctx.check("origin_fixed", drift < 1e-9, format!("origin particle drift {drift:.17e}"));
            }
        }
    }
    Ok(())
}

fn cmd_verify_norms(config: &RunConfig, ctx: &mut Ctx) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for &s in &config.norms.ss {
        let (lo, hi) = profile_integral_bounds(s);
        for &q0 in &config.norms.q0s {
            let f = profile_integral(q0, s)?;
            let pass = lo <= f && f <= hi;
            ctx.check(format!("profile_integral(q0 = {q0}, s = {s})"), pass, format!("{lo:.17e} <= {f:.17e} <= {hi:.17e}"));
            rows.push((q0, s, f, lo, hi, pass));
        }
    }
    let id = ctx.run_id.clone();
    ctx.write_with("norms.csv", |w| {
        writeln!(w, "q0,s,F_quadrature,F_lower,F_upper,pass,run_id")?;
        for (q0, s, f, lo, hi, pass) in &rows {
            writeln!(w, "{q0:.16e},{s:.16e},{f:.16e},{lo:.16e},{hi:.16e},{pass},{id}")?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct ScanRow {
    p0: f64,
    q0: f64,
    n_points: usize,
    moll_width: f64,
    t_det: Option<f64>,
    t_fit: Option<f64>,
    t1_min: f64,
    t1_max: f64,
    in_window: bool,
}

fn cmd_blowup_scan(config: &RunConfig, ctx: &mut Ctx) -> Result<(), CliError> {
    let sc = &config.scan;
    let gamma = config.rod.gamma;
    if !(gamma > 0.0) {
        return Err(CliError::Other(format!("blowup-scan needs rod.gamma > 0, got {gamma}")));
    }
    let multiple = config.solver.ux_blowup_threshold;
    let mut rows = Vec::new();
    for &p0 in &sc.p0s {
        let params = RodParams::new(gamma, p0, sc.q0).with_s(config.rod.s);
        let plan = plan_resolution(&params, sc.half_length, multiple, sc.grid_budget).ok_or_else(|| {
            CliError::Other(format!("p0 = {p0}, q0 = {}: no grid within scan.grid_budget resolves the datum", sc.q0))
        })?;
        let params = params.with_moll_width(plan.moll_width);
        let grid = make_grid(plan.half_length, plan.n_points)?;
        let u0 = build_u0(&params, &grid)?;
        let win = lifespan_bounds(&u0, &params)?;
        let controls = SolverControls {
            cfl_safety: sc.cfl_safety,
            ux_blowup_threshold: multiple,
            t_max: 1.1 * win.t1_max,
            log_every: 1_000_000,
            ..Default::default()
        };
        let traj = simulate(&u0, gamma, &controls)?;
        let rep = BlowupReport::from_trajectory(&traj, (win.t1_min, win.t1_max))?;
        let in_window = rep.detected_time.is_some_and(|t| t >= 0.95 * win.t1_min && t <= 1.05 * win.t1_max);
        ctx.check(
            format!("window(p0 = {p0})"),
            in_window,
            format!("T_det {:?} in [0.95 T1_min, 1.05 T1_max] = [{:.17e}, {:.17e}]", rep.detected_time, 0.95 * win.t1_min, 1.05 * win.t1_max),
        );
        rows.push(ScanRow {
            p0,
            q0: sc.q0,
            n_points: plan.n_points,
            moll_width: plan.moll_width,
            t_det: rep.detected_time,
            t_fit: rep.extrapolated_time,
            t1_min: win.t1_min,
            t1_max: win.t1_max,
            in_window,
        });
    }
    let id = ctx.run_id.clone();
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    ctx.write_with("blowup_scan.csv", |w| {
        writeln!(w, "p0,q0,n_points,moll_width,T_det,T_fit,T1_min,T1_max,in_window,run_id")?;
        for r in &rows {
            writeln!(
                w,
                "{:.16e},{:.16e},{},{:.16e},{},{},{:.16e},{:.16e},{},{id}",
                r.p0,
                r.q0,
                r.n_points,
                r.moll_width,
                opt(r.t_det),
                opt(r.t_fit),
                r.t1_min,
                r.t1_max,
                r.in_window
            )?;
        }
        Ok(())
    })?;
    ctx.report = serde_json::to_value(&rows).unwrap_or_default();
    Ok(())
}

fn sweep_checks(recs: &[InflationRecord]) -> Vec<Verdict> {
    let mut out = Vec::new();
    let done: Vec<&InflationRecord> = recs.iter().filter(|r| r.status == RecordStatus::Completed).collect();
    for r in &done {
        out.push(Verdict::new(
            format!("a_floor(n = {})", r.n),
            r.a_measured >= r.a_lower_bound,
            format!("A = {:.17e} >= floor {:.17e} at t = {:.17e}", r.a_measured, r.a_lower_bound, r.probe_time),
        ));
    }
    for w in done.windows(2) {
        let (a, b) = (w[0], w[1]);
        out.push(Verdict::new(
            format!("initial_decreasing(n = {} -> {})", a.n, b.n),
            b.norm_u0_hs < a.norm_u0_hs,
            format!("{:.17e} -> {:.17e}", a.norm_u0_hs, b.norm_u0_hs),
        ));
        out.push(Verdict::new(
            format!("peak_increasing(n = {} -> {})", a.n, b.n),
            b.peak_norm_hs > a.peak_norm_hs,
            format!("{:.17e} -> {:.17e}", a.peak_norm_hs, b.peak_norm_hs),
        ));
    }
    out
}

fn cmd_inflate_sweep(config: &RunConfig, ctx: &mut Ctx) -> Result<(), CliError> {
    let sw = config.sweep.as_ref().ok_or_else(|| ConfigError::Missing("sweep".into()))?;
    let recs = run_inflation_sweep(&sw.ns, sw.s, sw.gamma, sw.grid_budget, &sw.options)?;
    for r in &recs {
        if r.status != RecordStatus::Completed {
            ctx.check(format!("completed(n = {})", r.n), false, format!("{:?}: {}", r.status, r.resolution_note));
        }
    }
    ctx.verdicts.extend(sweep_checks(&recs));
    let id = ctx.run_id.clone();
    ctx.write_with("sweep.csv", |w| write_sweep_csv(&recs, w, &id))?;
    let json = serde_json::to_string_pretty(&recs).map_err(|e| CliError::Other(e.to_string()))?;
    ctx.write_with("sweep.json", |w| w.write_all(json.as_bytes()))?;
    ctx.report = serde_json::json!(recs.iter().map(|r| serde_json::json!({"n": r.n, "growth": r.growth()})).collect::<Vec<_>>());
    Ok(())
}
