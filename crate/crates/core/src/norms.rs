//! Discrete Lebesgue and Sobolev norms.
//!
//! `‖f‖_{H^s}` is the sum `‖f‖_{L²} + ‖f‖_{Ḣ^s}` with the homogeneous part
//! `(Σ_k |ξ_k|^{2s} |f̂_k|² / 2L)^{1/2}` and the convention `|0|^s = 0` for `s > 0`.

use realfft::num_complex::Complex64;

use crate::error::{out_of_range, RodResult};
use crate::grid::{Field, Grid};
use crate::spectral::spectral_derivative;

fn check_p(p: f64) -> RodResult<()> {
    if p.is_nan() || p < 1.0 {
        return Err(out_of_range("p", format!("need p >= 1, got {p}")));
    }
    Ok(())
}

/// Discrete `L^p` norm `(dx Σ |f_j|^p)^{1/p}`; `p = ∞` gives the max norm.
pub fn lp_norm(f: &Field, p: f64) -> RodResult<f64> {
    check_p(p)?;
    f.ensure_finite()?;
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let dx = f.grid().dx();
    if p == 2.0 {
        return Ok((dx * f.values().iter().map(|v| v * v).sum::<f64>()).sqrt());
    }
    Ok((dx * f.values().iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p))
}

/// `∫_a^b |f|^p dx` by the trapezoid rule on the grid nodes inside `(a, b)`,
/// with endpoint values from linear interpolation.
pub fn restricted_lp_integral(f: &Field, p: f64, a: f64, b: f64) -> RodResult<f64> {
    check_p(p)?;
    if p.is_infinite() {
        return Err(out_of_range("p", "restricted integral needs finite p"));
    }
    f.ensure_finite()?;
    let grid = f.grid();
    let l = grid.half_length();
    if !(a.is_finite() && b.is_finite()) || a < -l || b > l || a >= b {
        return Err(out_of_range("interval", format!("[{a}, {b}] is empty or not inside [-{l}, {l}]")));
    }
    let dx = grid.dx();
    let n = grid.len();
    let half = (n / 2) as f64;
    let vals = f.values();
    let at = |j: i64| vals[j.rem_euclid(n as i64) as usize];
    let interp = |x: f64| {
        let r = x / dx + half;
        let i = r.floor();
        let th = r - i;
        let i = i as i64;
        (1.0 - th) * at(i) + th * at(i + 1)
    };
    let g = |v: f64| v.abs().powf(p);
    let first = (a / dx + half).floor() as i64 + 1;
    let last = (b / dx + half).ceil() as i64 - 1;
    let mut acc = 0.0;
    let mut x_prev = a;
    let mut g_prev = g(interp(a));
    for j in first..=last {
        let x = (j as f64 - half) * dx;
        if x <= a || x >= b {
            continue;
        }
        let gj = g(at(j));
        acc += 0.5 * (g_prev + gj) * (x - x_prev);
        x_prev = x;
        g_prev = gj;
    }
    acc += 0.5 * (g_prev + g(interp(b))) * (b - x_prev);
    Ok(acc)
}

/// `(∫_a^b |f|^p)^{1/p}`.
pub fn restricted_lp_norm(f: &Field, p: f64, a: f64, b: f64) -> RodResult<f64> {
    Ok(restricted_lp_integral(f, p, a, b)?.powf(1.0 / p))
}

fn check_s(s: f64) -> RodResult<()> {
    if !(0.0..=3.0).contains(&s) {
        return Err(out_of_range("s", format!("need 0 <= s <= 3, got {s}")));
    }
    Ok(())
}

/// `‖f‖_{Ḣ^s}` from an unnormalised half spectrum (as returned by [`Grid::dft`]).
pub(crate) fn homogeneous_from_dft(grid: &Grid, dft: &[Complex64], s: f64) -> f64 {
    let n = grid.len();
    let xi = grid.wavenumbers();
    let mut acc = 0.0;
    for (k, c) in dft.iter().enumerate() {
        let w = if k == 0 {
            if s == 0.0 {
                1.0
            } else {
                0.0
            }
        } else if k == n / 2 {
            xi[k].powf(2.0 * s)
        } else {
            2.0 * xi[k].powf(2.0 * s)
        };
        acc += w * c.norm_sqr();
    }
    let dx = grid.dx();
    (acc * dx * dx / (2.0 * grid.half_length())).sqrt()
}

/// Homogeneous seminorm `‖f‖_{Ḣ^s}`.
pub fn homogeneous_sobolev_norm(f: &Field, s: f64) -> RodResult<f64> {
    check_s(s)?;
    f.ensure_finite()?;
    let grid = f.grid();
    Ok(homogeneous_from_dft(grid, &grid.dft(f.values()), s))
}

/// `‖f‖_{H^s} = ‖f‖_{L²} + ‖f‖_{Ḣ^s}`.
pub fn sobolev_norm(f: &Field, s: f64) -> RodResult<f64> {
    check_s(s)?;
    Ok(lp_norm(f, 2.0)? + homogeneous_sobolev_norm(f, s)?)
}

/// `‖f‖_{W^{1,p}} = ‖f‖_{L^p} + ‖∂ₓf‖_{L^p}`.
pub fn w1p_norm(f: &Field, p: f64) -> RodResult<f64> {
    check_p(p)?;
    Ok(lp_norm(f, p)? + lp_norm(&spectral_derivative(f)?, p)?)
}
