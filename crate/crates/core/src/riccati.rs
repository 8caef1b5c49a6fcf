//! Riccati comparison bounds, the wave-breaking criterion and the lifespan window.
//!
//! Every `‖u₀‖_{H¹}` here is the energy norm `√E(u₀) = (∫u₀² + u₀'²)^{1/2}`.

use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, RodError, RodResult};
use crate::evolution::{conserved_e, negate_transform};
use crate::grid::Field;
use crate::initial_data::{v0_energy, RodParams};
use crate::spectral::spectral_derivative;

/// Upper bound `(a t + 1/(f₀+λ))^{-1} - λ`, `λ = √(b/a)·c`, on solutions of
/// `f' <= -a f² + b c²` with `f(0) = f₀ < -λ`.
pub fn riccati_bound(a: f64, b: f64, c: f64, f0: f64, t: f64) -> RodResult<f64> {
    if !(a > 0.0) {
        return Err(out_of_range("a", format!("need a > 0, got {a}")));
    }
    if !(b >= 0.0) || !(c >= 0.0) {
        return Err(out_of_range("b, c", format!("need b, c >= 0, got b = {b}, c = {c}")));
    }
    if !(t >= 0.0) {
        return Err(out_of_range("t", format!("need t >= 0, got {t}")));
    }
    let lambda = (b / a).sqrt() * c;
    if !(f0 < -lambda) {
        return Err(RodError::Hypothesis(format!("f0 = {f0} is not below -lambda = {}", -lambda)));
    }
    let t_blow = -1.0 / (a * (f0 + lambda));
    if t >= t_blow {
        return Err(out_of_range("t", format!("t = {t} is not before the bound's blow-up time {t_blow}")));
    }
    Ok(1.0 / (a * t + 1.0 / (f0 + lambda)) - lambda)
}

/// `C_γ = √((3+γ)/γ)` for `γ > 0`.
pub fn c_gamma(gamma: f64) -> f64 {
    ((3.0 + gamma) / gamma).sqrt()
}

/// Outcome of the wave-breaking criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub triggered: bool,
    /// Upper bound on the lifespan when triggered.
    pub t_upper: Option<f64>,
    /// Grid node where `u₀'` is extremal (minimal for γ > 0, maximal for γ < 0).
    pub witness_x: f64,
    pub slope_at_witness: f64,
    pub h1_norm: f64,
    pub c_gamma: f64,
}

/// For γ > 0: triggered iff `min u₀' < -C_γ‖u₀‖_{H¹}`, with
/// `T* <= -2/(γ u₀'(x₀) + √(γ(3+γ))‖u₀‖_{H¹})`.
/// For γ < 0 the criterion is applied to `(-u₀, -γ)`.
pub fn blowup_criterion(u0: &Field, gamma: f64) -> RodResult<CriterionOutcome> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(out_of_range("gamma", "criterion needs a finite nonzero gamma"));
    }
    if gamma < 0.0 {
        let (v, g) = negate_transform(u0, gamma);
        let mut out = blowup_criterion(&v, g)?;
        out.slope_at_witness = -out.slope_at_witness;
        return Ok(out);
    }
    let h1 = conserved_e(u0)?.sqrt();
    let ux = spectral_derivative(u0)?;
    let (j, &slope) = ux
        .values()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("grid is non-empty");
    let cg = c_gamma(gamma);
    let triggered = slope < -cg * h1;
    let t_upper = triggered.then(|| -2.0 / (gamma * slope + (gamma * (3.0 + gamma)).sqrt() * h1));
    Ok(CriterionOutcome {
        triggered,
        t_upper,
        witness_x: u0.grid().node(j),
        slope_at_witness: slope,
        h1_norm: h1,
        c_gamma: cg,
    })
}

/// Riccati-derived lifespan bracket for the plateau data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifespanWindow {
    pub t1_min: f64,
    pub t1_max: f64,
    pub coarse_lo: f64,
    pub coarse_hi: f64,
    pub c_gamma: f64,
    pub h1_norm: f64,
    /// `u₀'(0)`.
    pub slope0: f64,
    /// `coarse_lo <= T1_min <= T1_max <= coarse_hi`.
    pub tight: bool,
}

impl LifespanWindow {
    /// Window from `γ > 0`, `p₀`, `u₀'(0)` and `‖u₀‖_{H¹}`.
    pub fn from_values(gamma: f64, p0: f64, slope0: f64, h1: f64) -> RodResult<Self> {
        if !(gamma > 0.0) {
            return Err(out_of_range("gamma", format!("lifespan window needs gamma > 0, got {gamma}")));
        }
        let cg = c_gamma(gamma);
        if !(slope0 + cg * h1 < 0.0) {
            return Err(RodError::Hypothesis(format!(
                "criterion not triggered at the origin: u0'(0) = {slope0}, C_gamma |u0|_H1 = {}",
                cg * h1
            )));
        }
        let t1_max = -2.0 / (gamma * (slope0 + cg * h1));
        let t1_min = -2.0 / (gamma * (slope0 - cg * h1));
        let coarse_lo = 1.0 / (gamma * p0);
        let coarse_hi = 3.0 / (gamma * p0);
        let tight = coarse_lo <= t1_min && t1_min <= t1_max && t1_max <= coarse_hi;
        Ok(Self { t1_min, t1_max, coarse_lo, coarse_hi, c_gamma: cg, h1_norm: h1, slope0, tight })
    }
}

/// Lifespan window for `u₀` built from `params`; `u₀'(0)` is the spectral
/// derivative at the origin node.
pub fn lifespan_bounds(u0: &Field, params: &RodParams) -> RodResult<LifespanWindow> {
    let h1 = conserved_e(u0)?.sqrt();
    let slope0 = spectral_derivative(u0)?.at_origin();
    LifespanWindow::from_values(params.gamma, params.p0, slope0, h1)
}

/// `(m(t), M(t))` with `m = 1/(γt/2 + 1/(u₀'(0) - C_γ‖u₀‖))` and
/// `M = 1/(γt/2 + 1/(u₀'(0) + C_γ‖u₀‖))`, `u₀'(0) = -p₀e^{-q₀}`.
///
/// `m` is returned as `-∞` from `T1_min` on, where its formula has passed its pole
/// and the lower comparison bound carries no information.
pub fn sandwich_bounds(params: &RodParams, norm_h1: f64, gamma: f64, t: f64) -> RodResult<(f64, f64)> {
    if !(gamma > 0.0) {
        return Err(out_of_range("gamma", format!("need gamma > 0, got {gamma}")));
    }
    if !(t >= 0.0) {
        return Err(out_of_range("t", format!("need t >= 0, got {t}")));
    }
    let k = c_gamma(gamma) * norm_h1;
    let f0 = params.plateau_slope();
    if !(f0 + k < 0.0) {
        return Err(RodError::Hypothesis("u0'(0) + C_gamma |u0|_H1 must be negative".into()));
    }
    let den_m = 0.5 * gamma * t + 1.0 / (f0 + k);
    if den_m >= 0.0 {
        return Err(out_of_range("t", format!("t = {t} is at or beyond T1_max = {}", -2.0 / (gamma * (f0 + k)))));
    }
    let den_lo = 0.5 * gamma * t + 1.0 / (f0 - k);
    let m = if den_lo < 0.0 { 1.0 / den_lo } else { f64::NEG_INFINITY };
    Ok((m, 1.0 / den_m))
}

/// Largest `q₀ < 1/4` for which the window is tight, by bisection on the
/// closed forms with `‖u₀‖_{H¹}` replaced by `√E(v₀)` (the ε → 0 limit);
/// the result does not depend on `p₀`.
pub fn smallness_threshold(gamma: f64) -> RodResult<f64> {
    if !(gamma > 0.0) {
        return Err(out_of_range("gamma", format!("need gamma > 0, got {gamma}")));
    }
    let tight = |q0: f64| {
        let p = RodParams::new(gamma, 1.0, q0);
        LifespanWindow::from_values(gamma, 1.0, p.plateau_slope(), v0_energy(&p).sqrt())
            .map(|w| w.tight)
            .unwrap_or(false)
    };
    let (mut lo, mut hi) = (1e-12, 0.25);
    if !tight(lo) {
        return Ok(0.0);
    }
    if tight(hi) {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tight(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(lo)
}
