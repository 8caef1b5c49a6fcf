//! Characteristics `φ̇ = γ u(t, φ)`, `φ(0, x) = x`, and `u_x` along them.

use std::io::{self, Write};

use crate::error::{out_of_range, RodError, RodResult};
use crate::evolution::{run, Trajectory};
use crate::grid::{Field, Grid};

/// Four-point periodic Lagrange interpolation of nodal `values` at `x`.
pub(crate) fn cubic_interpolate(grid: &Grid, values: &[f64], x: f64) -> f64 {
    let n = grid.len() as i64;
    let r = x / grid.dx() + (n / 2) as f64;
    let nearest = r.round();
    if (r - nearest).abs() < 1e-9 {
        return values[(nearest as i64).rem_euclid(n) as usize];
    }
    let i = r.floor();
    let th = r - i;
    let i = i as i64;
    let at = |j: i64| values[j.rem_euclid(n) as usize];
    let wm = -th * (th - 1.0) * (th - 2.0) / 6.0;
    let w0 = (th + 1.0) * (th - 1.0) * (th - 2.0) / 2.0;
    let w1 = -(th + 1.0) * th * (th - 2.0) / 2.0;
    let w2 = (th + 1.0) * th * (th - 1.0) / 6.0;
    wm * at(i - 1) + w0 * at(i) + w1 * at(i + 1) + w2 * at(i + 2)
}

/// Cubic interpolation of `f` at an off-grid point (periodic wrap).
pub fn interpolate(f: &Field, x: f64) -> f64 {
    cubic_interpolate(f.grid(), f.values(), x)
}

/// Particle paths and `u_x` sampled along them at every logged step.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub labels: Vec<f64>,
    pub gamma: f64,
    pub times: Vec<f64>,
    /// `paths[i][k] = φ(times[k], labels[i])`.
    pub paths: Vec<Vec<f64>>,
    /// `ux_along[i][k] = u_x(times[k], φ(times[k], labels[i]))`.
    pub ux_along: Vec<Vec<f64>>,
}

impl ParticleSet {
    pub(crate) fn new(labels: Vec<f64>) -> Self {
        let n = labels.len();
        Self { labels, gamma: 0.0, times: Vec::new(), paths: vec![Vec::new(); n], ux_along: vec![Vec::new(); n] }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Logged series `u_x(t, φ(t, x_i))`.
    pub fn ux_along_flow(&self, i: usize) -> RodResult<&[f64]> {
        self.ux_along
            .get(i)
            .map(|v| v.as_slice())
            .ok_or_else(|| out_of_range("particle index", format!("{i} >= {}", self.len())))
    }

    pub fn path(&self, i: usize) -> RodResult<&[f64]> {
        self.paths
            .get(i)
            .map(|v| v.as_slice())
            .ok_or_else(|| out_of_range("particle index", format!("{i} >= {}", self.len())))
    }

    /// Index of the particle whose label equals `label` (to 1e-14 relative).
    pub fn find_label(&self, label: f64) -> Option<usize> {
        let tol = 1e-14 * label.abs().max(1e-300);
        self.labels.iter().position(|l| (l - label).abs() <= tol)
    }

    pub fn time_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.times.iter().position(|s| (s - t).abs() <= tol)
    }

    /// Label order, i.e. particle indices sorted by label.
    fn label_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.labels[a].partial_cmp(&self.labels[b]).unwrap());
        idx
    }

    /// Smallest gap `φ(t, x_{i+1}) - φ(t, x_i)` between label-adjacent particles at
    /// each logged time; positive entries mean the order is preserved.
    pub fn min_gaps(&self) -> Vec<f64> {
        let order = self.label_order();
        (0..self.times.len())
            .map(|k| {
                order
                    .windows(2)
                    .map(|w| self.paths[w[1]][k] - self.paths[w[0]][k])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    pub fn is_strictly_ordered(&self) -> bool {
        self.min_gaps().iter().all(|g| *g > 0.0)
    }

    /// CSV rows `t,x_label,phi,ux_along,run_id`.
    pub fn write_csv(&self, mut w: impl Write, run_id: &str) -> io::Result<()> {
        writeln!(w, "t,x_label,phi,ux_along,run_id")?;
        for k in 0..self.times.len() {
            for i in 0..self.len() {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{}",
                    self.times[k], self.labels[i], self.paths[i][k], self.ux_along[i][k], run_id
                )?;
            }
        }
        Ok(())
    }
}

/// Co-integrate particles with the field by replaying the trajectory's run.
///
/// The replay starts from the trajectory's initial field with its controls,
/// so the particle log times coincide with `traj.times`.
pub fn advance_particles(traj: &Trajectory, gamma: f64, labels: &[f64]) -> RodResult<ParticleSet> {
    if gamma != traj.model.gamma {
        return Err(out_of_range("gamma", format!("{gamma} differs from the trajectory's {}", traj.model.gamma)));
    }
    let mut controls = traj.controls.clone();
    controls.t_max = traj.final_time().max(f64::MIN_POSITIVE);
    controls.max_steps = traj.times.len().saturating_sub(1);
    let (_, pset) = run(&traj.source, traj.model, &controls, Some(labels))?;
    let pset = pset.ok_or(RodError::Hypothesis("particle set missing".into()))?;
    Ok(pset)
}
