//! Periodic grid on `[-L, L)` and real fields sampled on it.
//!
//! Nodes are `x_j = (j - N/2) dx`, so the node set is symmetric under
//! `x -> -x` exactly (node `j` maps to node `N - j`, node `0` is `-L ≡ L`).
//! Spectral coefficients follow `f̂_k = dx Σ f_j e^{-i ξ_k x_j}` with
//! `ξ_k = π k / L`; only `k = 0..=N/2` are stored.

use std::fmt;
use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{RodError, RodResult};

struct GridData {
    half_length: f64,
    n_points: usize,
    dx: f64,
    wavenumbers: Vec<f64>,
    fwd: Arc<dyn RealToComplex<f64>>,
    inv: Arc<dyn ComplexToReal<f64>>,
}

/// Cheap-to-clone handle to a periodic grid with cached FFT plans.
#[derive(Clone)]
pub struct Grid {
    data: Arc<GridData>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_length", &self.data.half_length)
            .field("n_points", &self.data.n_points)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.data, &other.data)
            || (self.data.n_points == other.data.n_points
                && self.data.half_length == other.data.half_length)
    }
}

/// Build the grid `x_j = (j - N/2)·2L/N`, `j = 0..N`.
pub fn make_grid(half_length: f64, n_points: usize) -> RodResult<Grid> {
    Grid::new(half_length, n_points)
}

impl Grid {
    pub fn new(half_length: f64, n_points: usize) -> RodResult<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(RodError::BadHalfLength(half_length));
        }
        if n_points < 16 || !n_points.is_power_of_two() {
            return Err(RodError::BadGridSize(n_points));
        }
        let mut planner = RealFftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n_points);
        let inv = planner.plan_fft_inverse(n_points);
        let wavenumbers = (0..=n_points / 2)
            .map(|k| std::f64::consts::PI * k as f64 / half_length)
            .collect();
        Ok(Self {
            data: Arc::new(GridData {
                half_length,
                n_points,
                dx: 2.0 * half_length / n_points as f64,
                wavenumbers,
                fwd,
                inv,
            }),
        })
    }

    pub fn half_length(&self) -> f64 {
        self.data.half_length
    }

    pub fn len(&self) -> usize {
        self.data.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.data.dx
    }

    /// Index of the node at `x = 0`.
    pub fn origin_index(&self) -> usize {
        self.data.n_points / 2
    }

    pub fn node(&self, j: usize) -> f64 {
        (j as f64 - (self.data.n_points / 2) as f64) * self.data.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.node(j)).collect()
    }

    /// Non-negative wavenumbers `ξ_k`, `k = 0..=N/2`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.data.wavenumbers
    }

    /// Full frequency lattice `π k / L`, `k = -N/2..N/2-1`, in ascending order.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.len() as i64;
        (-n / 2..n / 2)
            .map(|k| std::f64::consts::PI * k as f64 / self.half_length())
            .collect()
    }

    /// Largest retained index under the 2/3 rule (`k < N/3`).
    pub fn dealias_cutoff(&self) -> usize {
        let n = self.len();
        if n % 3 == 0 {
            n / 3 - 1
        } else {
            n / 3
        }
    }

    /// Number of stored spectral coefficients, `N/2 + 1`.
    pub fn spectrum_len(&self) -> usize {
        self.len() / 2 + 1
    }

    /// Unnormalised real-to-complex DFT of `values`.
    pub fn dft(&self, values: &[f64]) -> Vec<Complex64> {
        let mut input = values.to_vec();
        let mut out = self.data.fwd.make_output_vec();
        self.data
            .fwd
            .process(&mut input, &mut out)
            .expect("forward FFT buffer sizes are fixed by the plan");
        out
    }

    /// Inverse of [`Grid::dft`], including the `1/N` factor.
    pub fn idft(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut input = spectrum.to_vec();
        input[0].im = 0.0;
        let last = input.len() - 1;
        input[last].im = 0.0;
        let mut out = self.data.inv.make_output_vec();
        self.data
            .inv
            .process(&mut input, &mut out)
            .expect("inverse FFT buffer sizes are fixed by the plan");
        let scale = 1.0 / self.len() as f64;
        out.iter_mut().for_each(|v| *v *= scale);
        out
    }

    pub(crate) fn workspace(&self) -> FftWorkspace {
        FftWorkspace {
            fwd: self.data.fwd.clone(),
            inv: self.data.inv.clone(),
            real: vec![0.0; self.len()],
            cplx: vec![Complex64::new(0.0, 0.0); self.spectrum_len()],
            scratch_fwd: self.data.fwd.make_scratch_vec(),
            scratch_inv: self.data.inv.make_scratch_vec(),
            inv_n: 1.0 / self.len() as f64,
        }
    }
}

/// Allocation-free FFT helper for inner loops.
pub(crate) struct FftWorkspace {
    fwd: Arc<dyn RealToComplex<f64>>,
    inv: Arc<dyn ComplexToReal<f64>>,
    real: Vec<f64>,
    cplx: Vec<Complex64>,
    scratch_fwd: Vec<Complex64>,
    scratch_inv: Vec<Complex64>,
    inv_n: f64,
}

impl FftWorkspace {
    pub fn forward(&mut self, input: &[f64], out: &mut [Complex64]) {
        self.real.copy_from_slice(input);
        self.fwd
            .process_with_scratch(&mut self.real, out, &mut self.scratch_fwd)
            .expect("forward FFT buffer sizes are fixed by the plan");
    }

    /// Normalised inverse; `input` is left untouched.
    pub fn inverse(&mut self, input: &[Complex64], out: &mut [f64]) {
        self.cplx.copy_from_slice(input);
        self.cplx[0].im = 0.0;
        let last = self.cplx.len() - 1;
        self.cplx[last].im = 0.0;
        self.inv
            .process_with_scratch(&mut self.cplx, out, &mut self.scratch_inv)
            .expect("inverse FFT buffer sizes are fixed by the plan");
        let s = self.inv_n;
        out.iter_mut().for_each(|v| *v *= s);
    }
}

/// Parity tag carried by a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Symmetry {
    #[default]
    None,
    Odd,
    Even,
}

impl Symmetry {
    pub fn derivative(self) -> Self {
        match self {
            Symmetry::Odd => Symmetry::Even,
            Symmetry::Even => Symmetry::Odd,
            Symmetry::None => Symmetry::None,
        }
    }
}

/// Real samples of a periodic function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    symmetry: Symmetry,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<f64>) -> RodResult<Self> {
        if values.len() != grid.len() {
            return Err(RodError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid: grid.clone(), values, symmetry: Symmetry::None })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()], symmetry: Symmetry::None }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|j| f(grid.node(j))).collect();
        Self { grid: grid.clone(), values, symmetry: Symmetry::None }
    }

    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Self {
        self.symmetry = symmetry;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn is_poisoned(&self) -> bool {
        self.values.iter().any(|v| !v.is_finite())
    }

    pub fn ensure_finite(&self) -> RodResult<()> {
        if self.is_poisoned() {
            Err(RodError::Poisoned)
        } else {
            Ok(())
        }
    }

    pub(crate) fn same_grid(&self, other: &Field) -> RodResult<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(RodError::GridMismatch)
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value at the node `x = 0`.
    pub fn at_origin(&self) -> f64 {
        self.values[self.grid.origin_index()]
    }

    /// `max_j |f(x_j) + f(-x_j)|` over the nodes whose mirror is a node
    /// (all but `x_0 = -L`); zero for an exactly odd field.
    pub fn odd_residual(&self) -> f64 {
        self.parity_residual(1.0)
    }

    /// `max_j |f(x_j) - f(-x_j)|`; zero for an exactly even field.
    pub fn even_residual(&self) -> f64 {
        self.parity_residual(-1.0)
    }

    fn parity_residual(&self, sign: f64) -> f64 {
        let n = self.values.len();
        (1..n)
            .map(|j| (self.values[j] + sign * self.values[n - j]).abs())
            .fold(0.0, f64::max)
    }

    /// Spectral coefficients `f̂_k ≈ ∫ f e^{-iξ_k x} dx`, `k = 0..=N/2`.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let dx = self.grid.dx();
        let mut s = self.grid.dft(&self.values);
        // x_0 = -L contributes the phase e^{iπk} = (-1)^k
        for (k, c) in s.iter_mut().enumerate() {
            let sign = if k % 2 == 0 { dx } else { -dx };
            *c *= sign;
        }
        s
    }

    /// Inverse of [`Field::spectrum`].
    pub fn from_spectrum(grid: &Grid, spectrum: &[Complex64]) -> RodResult<Self> {
        if spectrum.len() != grid.spectrum_len() {
            return Err(RodError::LengthMismatch {
                expected: grid.spectrum_len(),
                got: spectrum.len(),
            });
        }
        let dx = grid.dx();
        let raw: Vec<Complex64> = spectrum
            .iter()
            .enumerate()
            .map(|(k, c)| if k % 2 == 0 { c / dx } else { -c / dx })
            .collect();
        Field::new(grid, grid.idft(&raw))
    }

    pub fn scale(&self, a: f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
            symmetry: self.symmetry,
        }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Field) -> RodResult<Field> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect();
        let symmetry = if self.symmetry == other.symmetry { self.symmetry } else { Symmetry::None };
        Ok(Field { grid: self.grid.clone(), values, symmetry })
    }

    pub fn max_abs_diff(&self, other: &Field) -> RodResult<f64> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}
