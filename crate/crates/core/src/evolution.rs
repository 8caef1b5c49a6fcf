//! Time integration of `u_t + γ u u_x = -∂ₓ G∗(a u² + b u_x²)`.
//!
//! The rod equation has `a = (3-γ)/2`, `b = γ/2`. The state is advanced in
//! Fourier space by classical RK4; quadratic terms are formed in physical
//! space from independently 2/3-masked `u` and `u_x`, and the result is masked
//! again. With the mask on, the initial field is projected onto the retained
//! modes so the discrete energy `Σ(u² + u_x²)dx` is an exact invariant of the
//! semi-discrete system.

use std::io::{self, Write};

use realfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, RodError, RodResult};
use crate::flow_map::{cubic_interpolate, ParticleSet};
use crate::grid::{FftWorkspace, Field, Grid};
use crate::norms::homogeneous_from_dft;
use crate::spectral::{mask_in_place, spectral_derivative};

/// Coefficients of `u_t + γ u u_x = -∂ₓ G∗(a u² + b u_x²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RodModel {
    pub gamma: f64,
    /// Coefficient `a` of `u²` inside the convolution.
    pub quad_u: f64,
    /// Coefficient `b` of `u_x²` inside the convolution.
    pub quad_ux: f64,
}

impl RodModel {
    pub fn rod(gamma: f64) -> Self {
        Self { gamma, quad_u: 0.5 * (3.0 - gamma), quad_ux: 0.5 * gamma }
    }

    /// Equation satisfied by `v = -u` when `u` solves `self`.
    ///
    /// For the rod equation this is `v_t - γ v v_x = -∂ₓG∗(-(3+γ̃)/2 v² + γ̃/2 v_x²)`
    /// with `γ̃ = -γ`, which is not the rod equation with parameter `γ̃`.
    pub fn negated(&self) -> Self {
        Self { gamma: -self.gamma, quad_u: -self.quad_u, quad_ux: -self.quad_ux }
    }
}

/// `(γ, t_scale, x_scale)` from the dimensional coefficients `σ₁, σ₂, σ₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterReduction {
    pub gamma: f64,
    pub t_scale: f64,
    pub x_scale: f64,
}

/// Reduce `v_τ + σ₁ v v_ξ + σ₂ v_ξξτ + σ₃(2 v_ξ v_ξξ + v v_ξξξ) = 0` to the
/// one-parameter form via `τ = 3√(-σ₂)/σ₁ t`, `ξ = √(-σ₂) x`.
pub fn reduce_parameters(sigma1: f64, sigma2: f64, sigma3: f64) -> RodResult<ParameterReduction> {
    if sigma1 == 0.0 || !sigma1.is_finite() {
        return Err(out_of_range("sigma1", "must be finite and nonzero"));
    }
    if !(sigma2 < 0.0) {
        return Err(out_of_range("sigma2", format!("need sigma2 < 0, got {sigma2}")));
    }
    if !(sigma3 <= 0.0) {
        return Err(out_of_range("sigma3", format!("need sigma3 <= 0, got {sigma3}")));
    }
    let root = (-sigma2).sqrt();
    Ok(ParameterReduction {
        // adding 0.0 turns -0.0 into 0.0
        gamma: 3.0 * sigma3 / (sigma1 * sigma2) + 0.0,
        t_scale: 3.0 * root / sigma1,
        x_scale: root,
    })
}

/// Returns `(-u, -γ)`.
pub fn negate_transform(u: &Field, gamma: f64) -> (Field, f64) {
    (u.scale(-1.0), -gamma)
}

/// `E(u) = ∫ u² + u_x²`.
pub fn conserved_e(u: &Field) -> RodResult<f64> {
    let ux = spectral_derivative(u)?;
    let dx = u.grid().dx();
    Ok(dx * u.values().iter().zip(ux.values()).map(|(a, b)| a * a + b * b).sum::<f64>())
}

/// `F(u) = ∫ u³ + γ u u_x²`.
pub fn conserved_f(u: &Field, gamma: f64) -> RodResult<f64> {
    let ux = spectral_derivative(u)?;
    let dx = u.grid().dx();
    Ok(dx * u.values().iter().zip(ux.values()).map(|(a, b)| a * a * a + gamma * a * b * b).sum::<f64>())
}

/// `∫ |u|³ + |γ| |u| u_x²`, the natural scale for drift of `F`.
pub fn f_scale(u: &Field, gamma: f64) -> RodResult<f64> {
    let ux = spectral_derivative(u)?;
    let dx = u.grid().dx();
    Ok(dx
        * u.values()
            .iter()
            .zip(ux.values())
            .map(|(a, b)| a.abs() * (a * a + gamma.abs() * b * b))
            .sum::<f64>())
}

/// Spectral right-hand side evaluator with preallocated buffers.
pub(crate) struct Engine {
    grid: Grid,
    model: RodModel,
    dealias: bool,
    fft: FftWorkspace,
    work: Vec<Complex64>,
    /// Physical `u` of the last evaluated state (masked when dealiasing).
    pub u: Vec<f64>,
    /// Physical `u_x` of the last evaluated state.
    pub ux: Vec<f64>,
    quad: Vec<f64>,
    adv: Vec<f64>,
    quad_hat: Vec<Complex64>,
    adv_hat: Vec<Complex64>,
}

impl Engine {
    pub fn new(grid: &Grid, model: RodModel, dealias: bool) -> Self {
        let n = grid.len();
        let m = grid.spectrum_len();
        let z = Complex64::new(0.0, 0.0);
        Self {
            grid: grid.clone(),
            model,
            dealias,
            fft: grid.workspace(),
            work: vec![z; m],
            u: vec![0.0; n],
            ux: vec![0.0; n],
            quad: vec![0.0; n],
            adv: vec![0.0; n],
            quad_hat: vec![z; m],
            adv_hat: vec![z; m],
        }
    }

    pub fn forward(&mut self, values: &[f64], out: &mut [Complex64]) {
        self.fft.forward(values, out);
    }

    pub fn inverse(&mut self, spec: &[Complex64], out: &mut [f64]) {
        self.fft.inverse(spec, out);
    }

    /// Evaluate the spectral rhs of state `vh` into `out`; fills `self.u`, `self.ux`.
    pub fn eval(&mut self, vh: &[Complex64], out: &mut [Complex64]) {
        let xi = self.grid.wavenumbers();
        let nyq = self.grid.len() / 2;
        self.work.copy_from_slice(vh);
        if self.dealias {
            mask_in_place(&self.grid, &mut self.work);
        }
        let mut u = std::mem::take(&mut self.u);
        self.fft.inverse(&self.work, &mut u);
        for (k, c) in self.work.iter_mut().enumerate() {
            *c = if k == nyq { Complex64::new(0.0, 0.0) } else { Complex64::new(-c.im * xi[k], c.re * xi[k]) };
        }
        let mut ux = std::mem::take(&mut self.ux);
        self.fft.inverse(&self.work, &mut ux);
        let (a, b) = (self.model.quad_u, self.model.quad_ux);
        for j in 0..u.len() {
            let (p, q) = (u[j], ux[j]);
            self.quad[j] = a * p * p + b * q * q;
            self.adv[j] = p * q;
        }
        self.u = u;
        self.ux = ux;
        let mut qh = std::mem::take(&mut self.quad_hat);
        let mut ah = std::mem::take(&mut self.adv_hat);
        self.fft.forward(&self.quad, &mut qh);
        self.fft.forward(&self.adv, &mut ah);
        let g = self.model.gamma;
        for k in 0..out.len() {
            let helm = if k == nyq { 0.0 } else { xi[k] / (1.0 + xi[k] * xi[k]) };
            // -γ (u u_x)^ - iξ/(1+ξ²) q̂
            let q = qh[k];
            out[k] = Complex64::new(-g * ah[k].re + helm * q.im, -g * ah[k].im - helm * q.re);
        }
        if self.dealias {
            mask_in_place(&self.grid, out);
        }
        self.quad_hat = qh;
        self.adv_hat = ah;
    }
}

/// Right-hand side of the rod equation with the 2/3 mask.
pub fn rhs(u: &Field, gamma: f64) -> RodResult<Field> {
    rhs_with(u, RodModel::rod(gamma), true)
}

/// Right-hand side for an arbitrary [`RodModel`], with or without the mask.
pub fn rhs_with(u: &Field, model: RodModel, dealias: bool) -> RodResult<Field> {
    u.ensure_finite()?;
    let grid = u.grid();
    let mut eng = Engine::new(grid, model, dealias);
    let mut uh = vec![Complex64::new(0.0, 0.0); grid.spectrum_len()];
    eng.forward(u.values(), &mut uh);
    let mut k = uh.clone();
    eng.eval(&uh, &mut k);
    let mut out = vec![0.0; grid.len()];
    eng.inverse(&k, &mut out);
    let f = Field::new(grid, out)?;
    f.ensure_finite()?;
    Ok(f.with_symmetry(u.symmetry()))
}

fn rk4_spectral(eng: &mut Engine, uh: &[Complex64], dt: f64, k1: &[Complex64]) -> Vec<Complex64> {
    let m = uh.len();
    let mut stage = vec![Complex64::new(0.0, 0.0); m];
    let mut k2 = stage.clone();
    let mut k3 = stage.clone();
    let mut k4 = stage.clone();
    for i in 0..m {
        stage[i] = uh[i] + 0.5 * dt * k1[i];
    }
    eng.eval(&stage, &mut k2);
    for i in 0..m {
        stage[i] = uh[i] + 0.5 * dt * k2[i];
    }
    eng.eval(&stage, &mut k3);
    for i in 0..m {
        stage[i] = uh[i] + dt * k3[i];
    }
    eng.eval(&stage, &mut k4);
    (0..m).map(|i| uh[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

/// One classical RK4 step of the rod equation (mask on).
pub fn step(u: &Field, gamma: f64, dt: f64) -> RodResult<Field> {
    step_with(u, RodModel::rod(gamma), true, dt)
}

/// One RK4 step for an arbitrary model.
pub fn step_with(u: &Field, model: RodModel, dealias: bool, dt: f64) -> RodResult<Field> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(out_of_range("dt", format!("need dt > 0, got {dt}")));
    }
    u.ensure_finite()?;
    let grid = u.grid();
    let mut eng = Engine::new(grid, model, dealias);
    let mut uh = vec![Complex64::new(0.0, 0.0); grid.spectrum_len()];
    eng.forward(u.values(), &mut uh);
    let mut k1 = uh.clone();
    eng.eval(&uh, &mut k1);
    let next = rk4_spectral(&mut eng, &uh, dt, &k1);
    let mut out = vec![0.0; grid.len()];
    eng.inverse(&next, &mut out);
    let f = Field::new(grid, out)?;
    f.ensure_finite()?;
    Ok(f.with_symmetry(u.symmetry()))
}

/// Optional per-step norm monitoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormMonitor {
    /// Sobolev index of the logged `‖u‖_{H^s}`.
    pub s: f64,
    /// Exponent of the logged `‖u‖_{W^{1,p}}`.
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverControls {
    /// Upper bound on the first step.
    pub dt_init: f64,
    pub cfl_safety: f64,
    /// Blow-up indicator fires when `inf γu_x < -ux_blowup_threshold·|γ|·s₀`,
    /// where `s₀ = max|u₀'|` over `|x| <= L/2` (equal to `|u₀'(0)|` for the plateau data).
    pub ux_blowup_threshold: f64,
    pub t_max: f64,
    pub dealias: bool,
    /// Snapshot cadence in steps.
    pub log_every: usize,
    /// Times at which the stepper lands exactly and stores a snapshot.
    pub checkpoints: Vec<f64>,
    pub monitor: Option<NormMonitor>,
    pub max_steps: usize,
}

impl Default for SolverControls {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            cfl_safety: 0.3,
            ux_blowup_threshold: 20.0,
            t_max: 1.0,
            dealias: true,
            log_every: 100,
            checkpoints: Vec::new(),
            monitor: None,
            max_steps: 50_000_000,
        }
    }
}

impl SolverControls {
    pub fn validate(&self) -> RodResult<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(out_of_range("cfl_safety", format!("{} not in (0, 1]", self.cfl_safety)));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(out_of_range("t_max", format!("need t_max > 0, got {}", self.t_max)));
        }
        if !(self.dt_init > 0.0) {
            return Err(out_of_range("dt_init", format!("need dt_init > 0, got {}", self.dt_init)));
        }
        if !(self.ux_blowup_threshold > 0.0) {
            return Err(out_of_range("ux_blowup_threshold", "must be positive"));
        }
        if self.log_every == 0 {
            return Err(out_of_range("log_every", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed,
    BlowupDetected,
    Poisoned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub step: usize,
    pub u: Field,
}

/// Result of a simulation: per-step logs plus snapshots.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub model: RodModel,
    pub controls: SolverControls,
    pub grid: Grid,
    /// Field the run was started from.
    pub source: Field,
    /// State at `t = 0` after projection onto the retained modes.
    pub initial: Field,
    pub times: Vec<f64>,
    /// Step size taken from `times[i]`; zero for the last entry.
    pub dts: Vec<f64>,
    pub e_log: Vec<f64>,
    pub f_log: Vec<f64>,
    pub min_gamma_ux: Vec<f64>,
    pub max_abs_u: Vec<f64>,
    /// `‖u‖_{H^s}` per step when a monitor is set.
    pub hs_log: Vec<f64>,
    /// `‖u‖_{W^{1,p}}` per step when a monitor is set.
    pub w1p_log: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub status: RunStatus,
    /// `max|u₀'|` over `|x| <= L/2`.
    pub reference_slope: f64,
    /// Absolute threshold on `-inf γu_x`.
    pub threshold: f64,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn detected_time(&self) -> Option<f64> {
        (self.status == RunStatus::BlowupDetected).then(|| self.final_time())
    }

    /// `max_i |E_i - E_0| / E_0` over the logged steps with `t <= t_end`.
    pub fn e_drift_until(&self, t_end: f64) -> f64 {
        let e0 = self.e_log.first().copied().unwrap_or(0.0);
        if e0 == 0.0 {
            return 0.0;
        }
        self.times
            .iter()
            .zip(&self.e_log)
            .filter(|(t, _)| **t <= t_end)
            .map(|(_, e)| ((e - e0) / e0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_i |F_i - F_0| / scale` over logged steps with `t <= t_end`.
    pub fn f_drift_until(&self, t_end: f64, scale: f64) -> f64 {
        let f0 = self.f_log.first().copied().unwrap_or(0.0);
        if scale == 0.0 {
            return 0.0;
        }
        self.times
            .iter()
            .zip(&self.f_log)
            .filter(|(t, _)| **t <= t_end)
            .map(|(_, f)| ((f - f0) / scale).abs())
            .fold(0.0, f64::max)
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.snapshots.iter().find(|s| (s.t - t).abs() <= tol)
    }

    /// Index of the logged step at time `t`.
    pub fn step_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.times.iter().position(|s| (s - t).abs() <= tol)
    }

    /// Trajectory CSV: `t,E,F,min_gamma_ux,max_abs_u,dt,run_id`.
    pub fn write_csv(&self, mut w: impl Write, run_id: &str) -> io::Result<()> {
        writeln!(w, "t,E,F,min_gamma_ux,max_abs_u,dt,run_id")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                self.times[i],
                self.e_log[i],
                self.f_log[i],
                self.min_gamma_ux[i],
                self.max_abs_u[i],
                self.dts[i],
                run_id
            )?;
        }
        Ok(())
    }
}

impl Snapshot {
    /// Snapshot CSV: a `N,L,t,step,run_id` header row and its values, then `x,u` rows.
    pub fn write_csv(&self, mut w: impl Write, run_id: &str) -> io::Result<()> {
        let g = self.u.grid();
        writeln!(w, "N,L,t,step,run_id")?;
        writeln!(w, "{},{:.16e},{:.16e},{},{}", g.len(), g.half_length(), self.t, self.step, run_id)?;
        writeln!(w, "x,u")?;
        for (j, v) in self.u.values().iter().enumerate() {
            writeln!(w, "{:.16e},{:.16e}", g.node(j), v)?;
        }
        Ok(())
    }
}

/// Run to `t_max`, blow-up detection, or poisoning.
pub fn simulate(u0: &Field, gamma: f64, controls: &SolverControls) -> RodResult<Trajectory> {
    simulate_model(u0, RodModel::rod(gamma), controls)
}

/// [`simulate`] for an arbitrary [`RodModel`].
pub fn simulate_model(u0: &Field, model: RodModel, controls: &SolverControls) -> RodResult<Trajectory> {
    Ok(run(u0, model, controls, None)?.0)
}

/// Simulate and co-integrate particles `φ̇ = γ u(t, φ)` with the same RK4 steps.
pub fn simulate_with_particles(
    u0: &Field,
    gamma: f64,
    controls: &SolverControls,
    labels: &[f64],
) -> RodResult<(Trajectory, ParticleSet)> {
    let (traj, pset) = run(u0, RodModel::rod(gamma), controls, Some(labels))?;
    Ok((traj, pset.expect("particles requested")))
}

fn lp_sum(v: &[f64], p: f64) -> f64 {
    if p == p.round() && p.abs() < 64.0 {
        let k = p as i32;
        v.iter().map(|x| x.abs().powi(k)).sum()
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum()
    }
}

pub(crate) fn run(
    u0: &Field,
    model: RodModel,
    controls: &SolverControls,
    labels: Option<&[f64]>,
) -> RodResult<(Trajectory, Option<ParticleSet>)> {
    controls.validate()?;
    u0.ensure_finite()?;
    let grid = u0.grid().clone();
    let n = grid.len();
    let dx = grid.dx();
    let l = grid.half_length();
    let gamma = model.gamma;
    let mut eng = Engine::new(&grid, model, controls.dealias);
    let m = grid.spectrum_len();
    let mut uh = vec![Complex64::new(0.0, 0.0); m];
    eng.forward(u0.values(), &mut uh);
    if controls.dealias {
        mask_in_place(&grid, &mut uh);
    }
    let mut init = vec![0.0; n];
    eng.inverse(&uh, &mut init);
    let initial = Field::new(&grid, init)?.with_symmetry(u0.symmetry());

    let mut pset = labels.map(|ls| ParticleSet::new(ls.to_vec()));
    if let Some(ps) = &pset {
        for &x in &ps.labels {
            if !(x.abs() <= 0.5 * l) {
                return Err(out_of_range("labels", format!("label {x} outside [-L/2, L/2]")));
            }
        }
    }
    let mut pos: Vec<f64> = labels.map(|l| l.to_vec()).unwrap_or_default();

    let mut checkpoints: Vec<f64> =
        controls.checkpoints.iter().copied().filter(|c| *c > 0.0 && *c <= controls.t_max).collect();
    checkpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut next_cp = 0usize;

    let mut traj = Trajectory {
        model,
        controls: controls.clone(),
        grid: grid.clone(),
        source: u0.clone(),
        initial,
        times: Vec::new(),
        dts: Vec::new(),
        e_log: Vec::new(),
        f_log: Vec::new(),
        min_gamma_ux: Vec::new(),
        max_abs_u: Vec::new(),
        hs_log: Vec::new(),
        w1p_log: Vec::new(),
        snapshots: Vec::new(),
        status: RunStatus::Running,
        reference_slope: 0.0,
        threshold: 0.0,
    };

    let mut k1 = vec![Complex64::new(0.0, 0.0); m];
    let mut t = 0.0f64;
    let mut step_no = 0usize;
    let mut last_snapshot_step = usize::MAX;
    loop {
        eng.eval(&uh, &mut k1);
        let finite = eng.u.iter().chain(eng.ux.iter()).all(|v| v.is_finite());
        if !finite {
            traj.status = RunStatus::Poisoned;
            break;
        }
        let (mut e, mut f, mut mn, mut mu, mut mux) = (0.0, 0.0, f64::INFINITY, 0.0f64, 0.0f64);
        for j in 0..n {
            let (a, b) = (eng.u[j], eng.ux[j]);
            e += a * a + b * b;
            f += a * a * a + gamma * a * b * b;
            mn = mn.min(gamma * b);
            mu = mu.max(a.abs());
            mux = mux.max(b.abs());
        }
        e *= dx;
        f *= dx;
        if step_no == 0 {
            // the truncated tails leave a jump at ±L whose Gibbs ripple would inflate max|u₀'|
            let central = eng.ux[n / 4..=3 * n / 4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            traj.reference_slope = central;
            traj.threshold = controls.ux_blowup_threshold * gamma.abs() * central;
        }
        traj.times.push(t);
        traj.e_log.push(e);
        traj.f_log.push(f);
        traj.min_gamma_ux.push(mn);
        traj.max_abs_u.push(mu);
        if let Some(mon) = controls.monitor {
            let l2 = (dx * eng.u.iter().map(|v| v * v).sum::<f64>()).sqrt();
            traj.hs_log.push(l2 + homogeneous_from_dft(&grid, &uh, mon.s));
            let w = (dx * lp_sum(&eng.u, mon.p)).powf(1.0 / mon.p)
                + (dx * lp_sum(&eng.ux, mon.p)).powf(1.0 / mon.p);
            traj.w1p_log.push(w);
        }
        if let Some(ps) = pset.as_mut() {
            ps.times.push(t);
            for (i, &y) in pos.iter().enumerate() {
                ps.paths[i].push(y);
                ps.ux_along[i].push(cubic_interpolate(&grid, &eng.ux, y));
            }
        }
        let at_cp = next_cp < checkpoints.len() && (t - checkpoints[next_cp]).abs() <= 1e-12 * checkpoints[next_cp].max(1.0);
        if at_cp {
            next_cp += 1;
        }
        if step_no % controls.log_every == 0 || at_cp {
            traj.snapshots.push(Snapshot { t, step: step_no, u: Field::new(&grid, eng.u.clone())?.with_symmetry(u0.symmetry()) });
            last_snapshot_step = step_no;
        }
        let blown = mn < -traj.threshold;
        let done = t >= controls.t_max * (1.0 - 1e-14) || step_no >= controls.max_steps;
        if blown || done {
            traj.status = if blown { RunStatus::BlowupDetected } else { RunStatus::Completed };
            traj.dts.push(0.0);
            if last_snapshot_step != step_no {
                traj.snapshots.push(Snapshot { t, step: step_no, u: Field::new(&grid, eng.u.clone())?.with_symmetry(u0.symmetry()) });
            }
            break;
        }

        let vel = gamma.abs() * mu;
        let mut dt = controls.cfl_safety * (dx / vel).min(1.0 / mux);
        if !dt.is_finite() {
            dt = f64::INFINITY;
        }
        if step_no == 0 {
            dt = dt.min(controls.dt_init);
        }
        let mut target = controls.t_max;
        if next_cp < checkpoints.len() {
            target = target.min(checkpoints[next_cp]);
        }
        let mut t_new = t + dt;
        if t_new >= target * (1.0 - 1e-13) {
            dt = target - t;
            t_new = target;
        }
        traj.dts.push(dt);

        if let Some(ps) = pset.as_ref() {
            // RK4 for particles, reusing the field's stage evaluations
            let np = pos.len();
            let mut kp = [vec![0.0; np], vec![0.0; np], vec![0.0; np], vec![0.0; np]];
            for i in 0..np {
                kp[0][i] = gamma * cubic_interpolate(&grid, &eng.u, pos[i]);
            }
            let mut stage = vec![Complex64::new(0.0, 0.0); m];
            let mut ks = [vec![Complex64::new(0.0, 0.0); m], vec![Complex64::new(0.0, 0.0); m], vec![Complex64::new(0.0, 0.0); m]];
            let coeffs = [0.5, 0.5, 1.0];
            for s in 0..3 {
                let prev: &[Complex64] = if s == 0 { &k1 } else { &ks[s - 1] };
                for i in 0..m {
                    stage[i] = uh[i] + coeffs[s] * dt * prev[i];
                }
                let mut out = std::mem::take(&mut ks[s]);
                eng.eval(&stage, &mut out);
                ks[s] = out;
                for i in 0..np {
                    let y = pos[i] + coeffs[s] * dt * kp[s][i];
                    kp[s + 1][i] = gamma * cubic_interpolate(&grid, &eng.u, y);
                }
            }
            for i in 0..m {
                uh[i] += dt / 6.0 * (k1[i] + 2.0 * ks[0][i] + 2.0 * ks[1][i] + ks[2][i]);
            }
            for i in 0..np {
                pos[i] += dt / 6.0 * (kp[0][i] + 2.0 * kp[1][i] + 2.0 * kp[2][i] + kp[3][i]);
                if !(pos[i].abs() < l) {
                    return Err(RodError::ParticleEscaped { label: ps.labels[i], time: t_new });
                }
            }
        } else {
            uh = rk4_spectral(&mut eng, &uh, dt, &k1);
        }
        t = t_new;
        step_no += 1;
    }
    if let Some(ps) = pset.as_mut() {
        ps.gamma = gamma;
    }
    Ok((traj, pset))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupVerdict {
    WithinWindow,
    OutsideWindow,
    NoBlowup,
}

/// Detected and extrapolated breakdown time against an analytic window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub detected_time: Option<f64>,
    /// Zero of the least-squares line through `-1/inf γu_x` over the tail.
    pub extrapolated_time: Option<f64>,
    /// Slope of that line (Riccati predicts `-1/2` close to breakdown).
    pub fit_slope: Option<f64>,
    pub window: (f64, f64),
    pub threshold_used: f64,
    pub verdict: BlowupVerdict,
}

impl BlowupReport {
    /// Build a report; the tail fit uses the steps where `-inf γu_x` exceeds
    /// a quarter of the detection threshold.
    pub fn from_trajectory(traj: &Trajectory, window: (f64, f64)) -> RodResult<Self> {
        if !(window.0 <= window.1) {
            return Err(out_of_range("window", format!("[{}, {}] is inverted", window.0, window.1)));
        }
        let detected = traj.detected_time();
        let (fit, slope) = match detected {
            Some(_) => riccati_tail_fit(traj, 0.25 * traj.threshold),
            None => (None, None),
        };
        let verdict = match detected {
            None => BlowupVerdict::NoBlowup,
            Some(t) if t >= window.0 && t <= window.1 => BlowupVerdict::WithinWindow,
            Some(_) => BlowupVerdict::OutsideWindow,
        };
        Ok(Self {
            detected_time: detected,
            extrapolated_time: fit,
            fit_slope: slope,
            window,
            threshold_used: traj.threshold,
            verdict,
        })
    }
}

fn riccati_tail_fit(traj: &Trajectory, level: f64) -> (Option<f64>, Option<f64>) {
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.min_gamma_ux)
        .filter(|(_, g)| **g < -level)
        .map(|(t, g)| (*t, -1.0 / g))
        .collect();
    if pts.len() < 3 {
        return (None, None);
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    if sxx == 0.0 {
        return (None, None);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    if slope >= 0.0 {
        return (None, Some(slope));
    }
    (Some(-intercept / slope), Some(slope))
}
