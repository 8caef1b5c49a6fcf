//! Moving-interval functional `A(p,t) = ∫_I (-u_x)^p`, its analytic floor and
//! the n-sweep of the norm-inflation construction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, RodError, RodResult};
use crate::evolution::{simulate_with_particles, NormMonitor, RunStatus, SolverControls, Trajectory};
use crate::flow_map::ParticleSet;
use crate::grid::make_grid;
use crate::initial_data::{build_u0, choose_params, plateau_lp, RodParams};
use crate::norms::{restricted_lp_integral, sobolev_norm};
use crate::riccati::{c_gamma, lifespan_bounds};
use crate::spectral::spectral_derivative;

/// Labels `q₀² - q₀` and `q₀ - q₀²` bounding the moving interval.
pub fn interval_labels(q0: f64) -> (f64, f64) {
    (q0 * q0 - q0, q0 - q0 * q0)
}

/// `A(p, t) = ∫_{φ(t,q₀²-q₀)}^{φ(t,q₀-q₀²)} (-u_x)^p dx`.
///
/// Requires a snapshot and a particle log at `t` and the two boundary particles.
pub fn compute_a(traj: &Trajectory, pset: &ParticleSet, q0: f64, p: f64, t: f64) -> RodResult<f64> {
    let snap = traj.snapshot_at(t).ok_or(RodError::MissingState(t))?;
    let k = pset.time_index(t).ok_or(RodError::MissingState(t))?;
    let (la, lb) = interval_labels(q0);
    let ia = pset.find_label(la).ok_or_else(|| RodError::Hypothesis(format!("no particle labelled {la}")))?;
    let ib = pset.find_label(lb).ok_or_else(|| RodError::Hypothesis(format!("no particle labelled {lb}")))?;
    let (a, b) = (pset.paths[ia][k], pset.paths[ib][k]);
    let ux = spectral_derivative(&snap.u)?;
    let g = ux.grid();
    let inside = (0..g.len()).filter(|&j| g.node(j) > a && g.node(j) < b);
    let mut worst = f64::NEG_INFINITY;
    for j in inside {
        worst = worst.max(ux.values()[j]);
    }
    worst = worst.max(pset.ux_along[ia][k]).max(pset.ux_along[ib][k]);
    if worst >= 0.0 {
        return Err(RodError::SignViolation(format!("u_x reaches {worst} >= 0 on the moving interval at t = {t}")));
    }
    restricted_lp_integral(&ux.scale(-1.0), p, a, b)
}

/// `exp{B(p,t)} = (1 + γ/2·M(0)·t)^{-(p-2)}` with `M(0) = u₀'(0) + C_γ‖u₀‖_{H¹}`.
pub fn exp_b(params: &RodParams, norm_h1: f64, p: f64, t: f64) -> RodResult<f64> {
    let gamma = params.gamma;
    if !(gamma > 0.0) {
        return Err(out_of_range("gamma", format!("need gamma > 0, got {gamma}")));
    }
    let k = c_gamma(gamma) * norm_h1;
    let f0 = params.plateau_slope();
    let t1_min = -2.0 / (gamma * (f0 - k));
    if !(t >= 0.0) || t > t1_min * (1.0 + 1e-6) {
        return Err(out_of_range("t", format!("t = {t} not in [0, T1_min = {t1_min}]")));
    }
    let base = 1.0 + 0.5 * gamma * (f0 + k) * t;
    Ok(base.powf(-(p - 2.0)))
}

/// `(2/3)·exp{B(p,t)}·(A₀ - C_slack·p₀²q₀t)` with `A₀ = plateau_lp(params, p)`.
pub fn analytic_a_floor(params: &RodParams, norm_h1: f64, p: f64, t: f64, c_slack: f64) -> RodResult<f64> {
    let eb = exp_b(params, norm_h1, p, t)?;
    let a0 = plateau_lp(params, p);
    Ok(2.0 / 3.0 * eb * (a0 - c_slack * params.p0 * params.p0 * params.q0 * t))
}

/// `c·p₀^p·q₀^{2-p/2}`.
pub fn scaling_floor(params: &RodParams, p: f64, c: f64) -> f64 {
    c * params.p0.powf(p) * params.q0.powf(2.0 - 0.5 * p)
}

/// Grid and mollifier radius chosen for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPlan {
    pub n_points: usize,
    pub half_length: f64,
    pub moll_width: f64,
    pub modified_eps: bool,
}

/// Smallest power-of-two grid on `[-L, L)` that resolves the mollifier
/// (`dx <= ε/8`) and the collapsing plateau up to the detection threshold
/// (`dx <= 2(q₀-ε)/(2k²)` for a threshold multiple `k`). Tries `ε = q₀²`, then
/// `ε = q₀/8`; `None` when neither fits in `budget` points.
pub fn plan_resolution(params: &RodParams, half_length: f64, multiple: f64, budget: usize) -> Option<ResolutionPlan> {
    let q0 = params.q0;
    for (eps, modified) in [(q0 * q0, false), (q0 / 8.0, true)] {
        let w0 = 2.0 * (q0 - eps);
        let dx = (eps / 8.0).min(w0 / (2.0 * multiple * multiple));
        let n = ((2.0 * half_length / dx).ceil() as usize).max(16).next_power_of_two();
        if n <= budget {
            return Some(ResolutionPlan { n_points: n, half_length, moll_width: eps, modified_eps: modified });
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Completed,
    NoBlowup,
    Skipped,
}

/// One row of the inflation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflationRecord {
    pub n: u32,
    pub s: f64,
    pub p_s: f64,
    pub params: RodParams,
    pub status: RecordStatus,
    pub n_points: usize,
    pub half_length: f64,
    pub norm_u0_hs: f64,
    pub peak_norm_hs: f64,
    pub peak_norm_w1p: f64,
    /// `‖u‖_{H^s}/‖u‖_{W^{1,p_s}}` at the time of the H^s peak.
    pub hs_over_w1p: f64,
    pub a_measured: f64,
    pub a_lower_bound: f64,
    pub probe_time: f64,
    pub t_det: Option<f64>,
    pub t1_min: f64,
    pub t1_max: f64,
    pub e_drift: f64,
    pub resolution_note: String,
}

impl InflationRecord {
    /// `peak_norm_hs / norm_u0_hs`.
    pub fn growth(&self) -> f64 {
        self.peak_norm_hs / self.norm_u0_hs
    }

    fn skipped(n: u32, s: f64, params: RodParams, note: String) -> Self {
        Self {
            n,
            s,
            p_s: params.p_s(),
            params,
            status: RecordStatus::Skipped,
            n_points: 0,
            half_length: 0.0,
            norm_u0_hs: f64::NAN,
            peak_norm_hs: f64::NAN,
            peak_norm_w1p: f64::NAN,
            hs_over_w1p: f64::NAN,
            a_measured: f64::NAN,
            a_lower_bound: f64::NAN,
            probe_time: f64::NAN,
            t_det: None,
            t1_min: f64::NAN,
            t1_max: f64::NAN,
            e_drift: f64::NAN,
            resolution_note: note,
        }
    }
}

/// Knobs of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub half_length: f64,
    pub blowup_multiple: f64,
    pub cfl_safety: f64,
    pub c_slack: f64,
    /// `t_max` as a multiple of `T1_max`.
    pub t_max_factor: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { half_length: 10.0, blowup_multiple: 20.0, cfl_safety: 0.3, c_slack: 10.0, t_max_factor: 1.1 }
    }
}

/// A completed run with particles on the moving-interval boundary.
pub struct ProbeRun {
    pub params: RodParams,
    pub plan: ResolutionPlan,
    pub traj: Trajectory,
    pub pset: ParticleSet,
    pub t1_min: f64,
    pub t1_max: f64,
    pub h1_norm: f64,
    pub u0_hs: f64,
}

/// Simulate `params` on the planned grid with the boundary particles
/// `±(q₀-q₀²)`, the origin and `extra_labels`, landing on `T1_min` exactly.
pub fn probe_run(
    params: &RodParams,
    plan: &ResolutionPlan,
    opts: &SweepOptions,
    extra_labels: &[f64],
) -> RodResult<ProbeRun> {
    let params = params.with_moll_width(plan.moll_width);
    let grid = make_grid(plan.half_length, plan.n_points)?;
    let u0 = build_u0(&params, &grid)?;
    let win = lifespan_bounds(&u0, &params)?;
    let (la, lb) = interval_labels(params.q0);
    let mut labels = vec![la, 0.0, lb];
    for &x in extra_labels {
        if !labels.contains(&x) {
            labels.push(x);
        }
    }
    let controls = SolverControls {
        cfl_safety: opts.cfl_safety,
        ux_blowup_threshold: opts.blowup_multiple,
        t_max: opts.t_max_factor * win.t1_max,
        checkpoints: vec![win.t1_min],
        monitor: Some(NormMonitor { s: params.s, p: params.p_s() }),
        log_every: 1_000_000,
        ..Default::default()
    };
    let (traj, pset) = simulate_with_particles(&u0, params.gamma, &controls, &labels)?;
    Ok(ProbeRun {
        u0_hs: sobolev_norm(&u0, params.s)?,
        params,
        plan: plan.clone(),
        traj,
        pset,
        t1_min: win.t1_min,
        t1_max: win.t1_max,
        h1_norm: win.h1_norm,
    })
}

impl ProbeRun {
    /// `min(T1_min, 0.9·T_det)`; `T1_min` when no blow-up was detected.
    pub fn probe_time(&self) -> f64 {
        match self.traj.detected_time() {
            Some(td) => self.t1_min.min(0.9 * td),
            None => self.t1_min,
        }
    }

    /// `A(p, probe_time)`, rerunning to the probe time when it is not `T1_min`.
    pub fn a_at_probe(&self, p: f64) -> RodResult<f64> {
        let t = self.probe_time();
        if self.traj.snapshot_at(t).is_some() {
            return compute_a(&self.traj, &self.pset, self.params.q0, p, t);
        }
        let mut controls = self.traj.controls.clone();
        controls.t_max = t;
        controls.checkpoints = vec![t];
        let (tr, ps) = simulate_with_particles(&self.traj.source, self.params.gamma, &controls, &self.pset.labels)?;
        compute_a(&tr, &ps, self.params.q0, p, t)
    }
}

fn sweep_one(n: u32, s: f64, gamma: f64, budget: usize, opts: &SweepOptions) -> RodResult<InflationRecord> {
    let params = choose_params(n, s, gamma)?;
    let Some(plan) = plan_resolution(&params, opts.half_length, opts.blowup_multiple, budget) else {
        return Ok(InflationRecord::skipped(
            n,
            s,
            params,
            format!("grid budget {budget} too small even with eps = q0/8"),
        ));
    };
    let run = probe_run(&params, &plan, opts, &[])?;
    let params = run.params;
    let p_s = params.p_s();
    let traj = &run.traj;
    let t_det = traj.detected_time();
    let horizon = t_det.map(|t| 0.9 * t).unwrap_or(traj.final_time());
    let mut peak_hs = 0.0f64;
    let mut peak_w = 0.0f64;
    let mut ratio = f64::NAN;
    for (i, &t) in traj.times.iter().enumerate() {
        if t > horizon {
            break;
        }
        if traj.hs_log[i] > peak_hs {
            peak_hs = traj.hs_log[i];
            ratio = traj.hs_log[i] / traj.w1p_log[i];
        }
        peak_w = peak_w.max(traj.w1p_log[i]);
    }
    let probe = run.probe_time();
    let a_measured = run.a_at_probe(p_s)?;
    let a_floor = analytic_a_floor(&params, run.h1_norm, p_s, probe, opts.c_slack)?;
    let note = if plan.modified_eps {
        format!("modified-eps: eps = q0/8 = {:.6e} (q0^2 = {:.6e} unresolvable within budget)", params.moll_width, params.q0 * params.q0)
    } else {
        format!("eps = q0^2 = {:.6e}", params.moll_width)
    };
    Ok(InflationRecord {
        n,
        s,
        p_s,
        params,
        status: if traj.status == RunStatus::BlowupDetected { RecordStatus::Completed } else { RecordStatus::NoBlowup },
        n_points: plan.n_points,
        half_length: plan.half_length,
        norm_u0_hs: run.u0_hs,
        peak_norm_hs: peak_hs,
        peak_norm_w1p: peak_w,
        hs_over_w1p: ratio,
        a_measured,
        a_lower_bound: a_floor,
        probe_time: probe,
        t_det,
        t1_min: run.t1_min,
        t1_max: run.t1_max,
        e_drift: traj.e_drift_until(horizon),
        resolution_note: note,
    })
}

/// Run the sweep over `ns` in parallel; records are returned sorted by `n`.
pub fn run_inflation_sweep(
    ns: &[u32],
    s: f64,
    gamma: f64,
    grid_budget: usize,
    opts: &SweepOptions,
) -> RodResult<Vec<InflationRecord>> {
    if !(s > 1.0 && s < 1.5) {
        return Err(out_of_range("s", format!("s = {s} not in (1, 1.5)")));
    }
    if let Some(bad) = ns.iter().find(|&&n| n < 2) {
        return Err(out_of_range("n", format!("need n >= 2, got {bad}")));
    }
    let mut recs = ns
        .par_iter()
        .map(|&n| sweep_one(n, s, gamma, grid_budget, opts))
        .collect::<RodResult<Vec<_>>>()?;
    recs.sort_by_key(|r| r.n);
    Ok(recs)
}

/// CSV summary `n,norm_u0_Hs,peak_norm_Hs,A_measured,A_floor,T_det,T1_min,T1_max,status,note,run_id`.
pub fn write_sweep_csv(recs: &[InflationRecord], mut w: impl std::io::Write, run_id: &str) -> std::io::Result<()> {
    writeln!(w, "n,norm_u0_Hs,peak_norm_Hs,A_measured,A_floor,T_det,T1_min,T1_max,status,resolution_note,run_id")?;
    for r in recs {
        let status = match r.status {
            RecordStatus::Completed => "completed",
            RecordStatus::NoBlowup => "no_blowup",
            RecordStatus::Skipped => "skipped",
        };
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},\"{}\",{}",
            r.n,
            r.norm_u0_hs,
            r.peak_norm_hs,
            r.a_measured,
            r.a_lower_bound,
            r.t_det.unwrap_or(f64::NAN),
            r.t1_min,
            r.t1_max,
            status,
            r.resolution_note,
            run_id
        )?;
    }
    Ok(())
}
