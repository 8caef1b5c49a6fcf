//! The odd piecewise profile `v₀`, its transform and norms, the mollified
//! datum `u₀ = J_ε ∗ v₀`, and the parameter schedule used for inflation.

use std::sync::OnceLock;

use realfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, RodError, RodResult};
use crate::grid::{Field, Grid, Symmetry};
use crate::quad;

/// Parameters of the initial profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RodParams {
    /// Nonlinearity coefficient γ.
    pub gamma: f64,
    /// Amplitude p₀.
    pub p0: f64,
    /// Plateau half-width q₀.
    pub q0: f64,
    /// Mollifier radius ε.
    pub moll_width: f64,
    /// Sobolev index s of the inflation diagnostics.
    pub s: f64,
}

impl RodParams {
    /// Parameters with the default mollifier radius `ε = q₀²` and `s = 5/4`.
    pub fn new(gamma: f64, p0: f64, q0: f64) -> Self {
        Self { gamma, p0, q0, moll_width: q0 * q0, s: 1.25 }
    }

    pub fn with_moll_width(mut self, eps: f64) -> Self {
        self.moll_width = eps;
        self
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn validate(&self) -> RodResult<()> {
        if !self.gamma.is_finite() || self.gamma == 0.0 {
            return Err(out_of_range("gamma", format!("need a finite nonzero value, got {}", self.gamma)));
        }
        if !(self.p0.is_finite() && self.p0 > 0.0) {
            return Err(out_of_range("p0", format!("need p0 > 0, got {}", self.p0)));
        }
        if !(self.q0 > 0.0 && self.q0 < 0.25) {
            return Err(out_of_range("q0", format!("q0 = {} not in (0, 0.25)", self.q0)));
        }
        if !(self.moll_width > 0.0 && self.moll_width <= self.q0) {
            return Err(out_of_range(
                "moll_width",
                format!("need 0 < eps <= q0, got eps = {} with q0 = {}", self.moll_width, self.q0),
            ));
        }
        if !(self.s > 1.0 && self.s < 1.5) {
            return Err(out_of_range("s", format!("s = {} not in (1, 1.5)", self.s)));
        }
        Ok(())
    }

    /// Critical exponent `p_s = 1/(3/2 - s)`.
    pub fn p_s(&self) -> f64 {
        1.0 / (1.5 - self.s)
    }

    /// Slope of `v₀` on the plateau, `-p₀ e^{-q₀}`.
    pub fn plateau_slope(&self) -> f64 {
        -self.p0 * (-self.q0).exp()
    }

    /// True when ε differs from the default `q₀²`.
    pub fn modified_eps(&self) -> bool {
        (self.moll_width - self.q0 * self.q0).abs() > 1e-15 * self.q0 * self.q0
    }
}

/// `v₀(x)`.
pub fn eval_v0(params: &RodParams, x: f64) -> f64 {
    let (p0, q0) = (params.p0, params.q0);
    if x < -q0 {
        p0 * q0 * x.exp()
    } else if x <= q0 {
        -p0 * (-q0).exp() * x
    } else {
        -p0 * q0 * (-x).exp()
    }
}

/// `v₀'(x)`; at the kinks `|x| = q₀` the plateau value is returned.
pub fn eval_v0_prime(params: &RodParams, x: f64) -> f64 {
    let (p0, q0) = (params.p0, params.q0);
    if x < -q0 {
        p0 * q0 * x.exp()
    } else if x <= q0 {
        -p0 * (-q0).exp()
    } else {
        p0 * q0 * (-x).exp()
    }
}

/// `(sin y - y cos y) / y²`, with a Taylor branch for `|y| < 1e-4`.
fn sinc_defect(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        let y2 = y * y;
        y * (1.0 / 3.0 - y2 / 30.0 + y2 * y2 / 840.0)
    } else {
        (y.sin() - y * y.cos()) / (y * y)
    }
}

/// Closed-form transform `v̂₀(ξ) = ∫ v₀ e^{-ixξ} dx`, purely imaginary and odd in ξ.
pub fn v0_hat(params: &RodParams, xi: f64) -> Complex64 {
    let (p0, q0) = (params.p0, params.q0);
    let y = q0 * xi;
    // q₀ sin/(1+ξ²) + sin/ξ² - q₀ cos/((1+ξ²)ξ), regrouped to avoid cancellation
    let bracket = ((1.0 + q0) * y.sin() + q0 * q0 * sinc_defect(y)) / (1.0 + xi * xi);
    Complex64::new(0.0, 2.0 * p0 * (-q0).exp() * bracket)
}

/// `‖v₀‖_{L²} = p₀ q₀ e^{-q₀} (1 + 2q₀/3)^{1/2}`.
pub fn v0_l2_norm(params: &RodParams) -> f64 {
    let q0 = params.q0;
    params.p0 * q0 * (-q0).exp() * (1.0 + 2.0 * q0 / 3.0).sqrt()
}

/// `E(v₀) = ‖v₀‖²_{L²} + ‖v₀'‖²_{L²}`.
pub fn v0_energy(params: &RodParams) -> f64 {
    let (p0, q0) = (params.p0, params.q0);
    p0 * p0 * (-2.0 * q0).exp() * (q0 * q0 * (2.0 + 2.0 * q0 / 3.0) + 2.0 * q0)
}

/// Integrand factor `b(η)` of the profile integral.
fn profile_b(q0: f64, eta: f64) -> f64 {
    eta * ((1.0 + q0) * eta.sin() + q0 * q0 * sinc_defect(eta)) / (q0 * q0 + eta * eta)
}

/// `F(q₀, s) = ∫₀^∞ η^{2s-2} b(η)² dη` with
/// `b = q₀(η sin η - q₀ cos η)/(q₀² + η²) + sin η / η`.
///
/// Integrated period by period up to `1000π`, plus the leading-order tail.
pub fn profile_integral(q0: f64, s: f64) -> RodResult<f64> {
    if !(q0 > 0.0 && q0 < 0.25) {
        return Err(out_of_range("q0", format!("q0 = {q0} not in (0, 0.25)")));
    }
    if !(s > 0.5 && s < 1.5) {
        return Err(out_of_range("s", format!("s = {s} not in (1/2, 3/2)")));
    }
    const PERIODS: usize = 1000;
    let lambda = PERIODS as f64 * std::f64::consts::PI;
    let a = 2.0 * s - 2.0;
    let f = |eta: f64| {
        let b = profile_b(q0, eta);
        eta.powf(a) * b * b
    };
    let body = quad::integrate_pieces(f, 0.0, lambda, PERIODS, 1e-12);
    let tail = 0.5 * (1.0 + q0).powi(2) * lambda.powf(2.0 * s - 3.0) / (3.0 - 2.0 * s);
    Ok(body + tail)
}

/// Lower and upper bounds on [`profile_integral`] valid for `q₀ < 1/4`, `1/2 < s < 3/2`.
pub fn profile_integral_bounds(s: f64) -> (f64, f64) {
    let pi = std::f64::consts::PI;
    let lo = pi.powf(2.0 * s - 2.0) * (2f64.powf(1.0 - 2.0 * s) - 4f64.powf(1.0 - 2.0 * s))
        / (2.0 * s - 1.0);
    let hi = 4.0 / (2.0 * s - 1.0) + 9.0 / (3.0 - 2.0 * s);
    (lo, hi)
}

/// `‖v₀‖_{Ḣ^s} = 2 p₀ e^{-q₀} q₀^{3/2-s} (F(q₀,s)/π)^{1/2}`.
pub fn v0_homogeneous_norm(params: &RodParams, s: f64) -> RodResult<f64> {
    let f = profile_integral(params.q0, s)?;
    Ok(2.0 * params.p0 * (-params.q0).exp() * params.q0.powf(1.5 - s) * (f / std::f64::consts::PI).sqrt())
}

/// Normalisation `∫_{-1}^{1} e^{1/(x²-1)} dx` of the standard bump.
pub fn mollifier_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| quad::integrate_pieces(bump, -1.0, 1.0, 16, 1e-15))
}

fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (1.0 / (t * t - 1.0)).exp()
    } else {
        0.0
    }
}

/// `J_ε(x) = J(x/ε)/ε` with unit mass.
pub fn mollifier(eps: f64, x: f64) -> f64 {
    bump(x / eps) / (mollifier_constant() * eps)
}

/// Smallest power-of-two grid on `[-L, L)` with `dx <= ε/8`.
pub fn required_points(half_length: f64, eps: f64) -> usize {
    let need = (16.0 * half_length / eps).ceil() as usize;
    need.max(16).next_power_of_two()
}

/// `u₀ = J_ε ∗ v₀` sampled on the grid.
///
/// On the plateau `|x| <= q₀ - ε` the kernel reproduces the linear profile
/// exactly, and on the tails `|x| >= q₀ + ε` it multiplies the exponential by
/// `∫J_ε(y)e^y dy`. In the transition zones the convolution integral is split at
/// the kink of `v₀` and each smooth piece is integrated adaptively, so the
/// sampled field is smooth and exactly odd.
pub fn build_u0(params: &RodParams, grid: &Grid) -> RodResult<Field> {
    params.validate()?;
    let eps = params.moll_width;
    let dx = grid.dx();
    if dx > eps / 8.0 {
        return Err(RodError::UnderResolved {
            dx,
            limit: eps / 8.0,
            required_n: required_points(grid.half_length(), eps),
        });
    }
    let c = mollifier_constant();
    let tail_factor = quad::integrate_pieces(|t| bump(t) * (eps * t).exp(), -1.0, 1.0, 16, 1e-15) / c;
    let q0 = params.q0;
    // J_ε ∗ v₀ at x in (q₀-ε, q₀+ε), in the scaled variable t = y/ε
    let transition = |x: f64| {
        let f = |t: f64| bump(t) * eval_v0(params, x - eps * t);
        let kink = ((x - q0) / eps).clamp(-1.0, 1.0);
        // a single adaptive pass can stop early near the flat ends of the bump
        (quad::integrate_pieces(f, -1.0, kink, 16, 1e-15) + quad::integrate_pieces(f, kink, 1.0, 16, 1e-15)) / c
    };
    let n = grid.len();
    let mut values = vec![0.0; n];
    for (j, v) in values.iter_mut().enumerate() {
        let x = grid.node(j);
        let ax = x.abs();
        *v = if ax <= q0 - eps {
            eval_v0(params, x)
        } else if ax >= q0 + eps {
            eval_v0(params, x) * tail_factor
        } else {
            let s = transition(ax);
            if x < 0.0 {
                -s
            } else {
                s
            }
        };
    }
    Ok(Field::new(grid, values)?.with_symmetry(Symmetry::Odd))
}

/// Closed form of `∫_{|x| <= q₀-q₀²} (-v₀')^p = 2(q₀ - q₀²) p₀^p e^{-p q₀}`.
pub fn plateau_lp(params: &RodParams, p: f64) -> f64 {
    let q0 = params.q0;
    2.0 * (q0 - q0 * q0) * params.p0.powf(p) * (-p * q0).exp()
}

/// Inflation schedule: `p₀ = n`, `q₀ = 1/(n^{p_s} ln n)`, `ε = q₀²`.
pub fn choose_params(n: u32, s: f64, gamma: f64) -> RodResult<RodParams> {
    if n < 2 {
        return Err(out_of_range("n", format!("need n >= 2, got {n}")));
    }
    if !(s > 1.0 && s < 1.5) {
        return Err(out_of_range("s", format!("s = {s} not in (1, 1.5)")));
    }
    let nf = n as f64;
    let p_s = 1.0 / (1.5 - s);
    let q0 = 1.0 / (nf.powf(p_s) * nf.ln());
    let params = RodParams::new(gamma, nf, q0).with_s(s);
    params.validate()?;
    Ok(params)
}
