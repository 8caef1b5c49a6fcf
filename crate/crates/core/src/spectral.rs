//! Fourier-multiplier operators: derivative, `(1 - ∂²)^{-1}` and the 2/3 mask.

use realfft::num_complex::Complex64;

use crate::error::RodResult;
use crate::grid::{Field, Grid};

fn apply_multiplier(f: &Field, m: impl Fn(usize, f64) -> Complex64) -> RodResult<Field> {
    f.ensure_finite()?;
    let grid = f.grid();
    let mut s = grid.dft(f.values());
    for (k, c) in s.iter_mut().enumerate() {
        *c *= m(k, grid.wavenumbers()[k]);
    }
    Field::new(grid, grid.idft(&s))
}

/// `∂ₓ f` via the multiplier `iξ`, with the Nyquist mode zeroed.
pub fn spectral_derivative(f: &Field) -> RodResult<Field> {
    let nyq = f.grid().len() / 2;
    let out = apply_multiplier(f, |k, xi| {
        if k == nyq {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, xi)
        }
    })?;
    Ok(out.with_symmetry(f.symmetry().derivative()))
}

/// `(1 - ∂²)^{-1} f`, i.e. convolution with `G(x) = e^{-|x|}/2`.
pub fn helmholtz_inverse(f: &Field) -> RodResult<Field> {
    let out = apply_multiplier(f, |_, xi| Complex64::new(1.0 / (1.0 + xi * xi), 0.0))?;
    Ok(out.with_symmetry(f.symmetry()))
}

/// Zero every mode with `|k| >= N/3`.
pub fn dealias(f: &Field) -> RodResult<Field> {
    let cut = f.grid().dealias_cutoff();
    let out = apply_multiplier(f, |k, _| {
        if k <= cut {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })?;
    Ok(out.with_symmetry(f.symmetry()))
}

/// In-place 2/3 mask on a half spectrum.
pub(crate) fn mask_in_place(grid: &Grid, s: &mut [Complex64]) {
    let cut = grid.dealias_cutoff();
    for c in s.iter_mut().skip(cut + 1) {
        *c = Complex64::new(0.0, 0.0);
    }
}
