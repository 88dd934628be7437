//! Periodic grids on the unit flat torus and the scalar fields that live on them.
//!
//! A grid of complex dimension `ndim` has `2 * ndim` real axes, each sampled at
//! `N` equispaced points, with total volume one. Differential operators are
//! spectral: fields are transformed along every axis with an FFT, multiplied
//! by a Fourier symbol and transformed back.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Exponents are clamped here before `exp` so that `e^x` stays below ~2.4e17.
pub const EXP_CLAMP: f64 = 40.0;

struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Symbol of d²/dx² along one axis, indexed in FFT order (Nyquist kept).
    second: Vec<f64>,
    /// Angular wavenumber for d/dx along one axis (Nyquist zeroed).
    first: Vec<f64>,
}

/// Periodic sampling of the unit torus `[0,1)^(2·ndim)`.
#[derive(Clone)]
pub struct Grid {
    ndim: usize,
    n: usize,
    spectral: Arc<Spectral>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.ndim == other.ndim && self.n == other.n
    }
}

impl Eq for Grid {}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("ndim", &self.ndim)
            .field("n", &self.n)
            .finish()
    }
}

impl Grid {
    /// `ndim` is the complex dimension (1, or 2 for the experimental backend);
    /// `n` is the number of samples per real axis and must be even and at least 8.
    pub fn new(ndim: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&ndim) {
            return Err(Error::InvalidGrid(format!(
                "complex dimension {ndim} not supported (expected 1 or 2)"
            )));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "resolution {n} must be even and at least 8"
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let mut second = Vec::with_capacity(n);
        let mut first = Vec::with_capacity(n);
        for i in 0..n {
            let k = if i <= n / 2 {
                i as f64
            } else {
                i as f64 - n as f64
            };
            let omega = 2.0 * PI * k;
            second.push(-omega * omega);
            first.push(if 2 * i == n { 0.0 } else { omega });
        }
        Ok(Self {
            ndim,
            n,
            spectral: Arc::new(Spectral {
                forward,
                inverse,
                second,
                first,
            }),
        })
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of real axes, `2 * ndim`.
    pub fn axes(&self) -> usize {
        2 * self.ndim
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.axes() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of a single grid point.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.axes() as i32)
    }

    /// Per-axis integer coordinates of a flat index (axis 0 varies slowest).
    pub fn multi_index(&self, mut index: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = index % self.n;
            index /= self.n;
        }
    }

    /// Physical coordinates in `[0,1)` of a flat index.
    pub fn coords(&self, index: usize) -> Vec<f64> {
        let mut idx = vec![0; self.axes()];
        self.multi_index(index, &mut idx);
        idx.iter().map(|&i| i as f64 * self.spacing()).collect()
    }

    /// Signed integer wavenumber of FFT slot `i` along an axis.
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    pub(crate) fn second_symbol(&self, i: usize) -> f64 {
        self.spectral.second[i]
    }

    pub(crate) fn first_symbol(&self, i: usize) -> f64 {
        self.spectral.first[i]
    }

    fn fft_all_axes(&self, data: &mut [Complex64], inverse: bool) {
        let fft = if inverse {
            &self.spectral.inverse
        } else {
            &self.spectral.forward
        };
        let n = self.n;
        let axes = self.axes();
        let len = data.len();
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for axis in 0..axes {
            let stride = n.pow((axes - 1 - axis) as u32);
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = stride * n;
            let mut line = 0;
            for outer in (0..len).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    let dst = &mut buf[line * n..(line + 1) * n];
                    for (t, d) in dst.iter_mut().enumerate() {
                        *d = data[base + t * stride];
                    }
                    line += 1;
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            line = 0;
            for outer in (0..len).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    let src = &buf[line * n..(line + 1) * n];
                    for (t, s) in src.iter().enumerate() {
                        data[base + t * stride] = *s;
                    }
                    line += 1;
                }
            }
        }
    }

    /// Unnormalized forward transform of real samples.
    pub(crate) fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_all_axes(&mut data, false);
        data
    }

    /// Inverse of [`Grid::forward`], keeping the real part.
    pub(crate) fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.fft_all_axes(&mut data, true);
        let scale = 1.0 / data.len() as f64;
        data.into_iter().map(|c| c.re * scale).collect()
    }

    /// Multiply the spectrum of `values` by `symbol(multi_index)` and transform back.
    pub(crate) fn apply_symbol<F>(&self, values: &[f64], symbol: F) -> Vec<f64>
    where
        F: Fn(&[usize]) -> Complex64,
    {
        let mut spec = self.forward(values);
        self.scale_spectrum(&mut spec, symbol);
        self.inverse_real(spec)
    }

    pub(crate) fn scale_spectrum<F>(&self, spec: &mut [Complex64], symbol: F)
    where
        F: Fn(&[usize]) -> Complex64,
    {
        let mut idx = vec![0; self.axes()];
        for (i, c) in spec.iter_mut().enumerate() {
            self.multi_index(i, &mut idx);
            *c *= symbol(&idx);
        }
    }

    /// Symbol of the Laplacian (sum of pure second derivatives over all real axes).
    pub(crate) fn laplacian_symbol(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.spectral.second[i]).sum()
    }

    fn laplacian_values(&self, values: &[f64]) -> Vec<f64> {
        self.apply_symbol(values, |idx| {
            Complex64::new(self.laplacian_symbol(idx), 0.0)
        })
    }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in iter {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A real function sampled on a [`Grid`]. Values are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_vec(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        debug_assert!(
            values.iter().all(|v| v.is_finite()),
            "non-finite field value"
        );
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: &Grid, f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self::from_vec(grid, values)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self::from_vec(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        self.grid == other.grid
    }

    /// `∫ f ω_0^n`, the quadrature sum `h^(2·ndim) Σ f_i`.
    pub fn integrate(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) * self.grid.cell_volume()
    }

    /// Same as [`ScalarField::integrate`]; the torus has unit volume.
    pub fn mean(&self) -> f64 {
        self.integrate()
    }

    pub fn sup(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index of the smallest value (first occurrence).
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = i;
            }
        }
        best
    }

    /// `∫ f g ω_0^n`.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        assert_same_grid(self, other);
        compensated_sum(self.values.iter().zip(&other.values).map(|(a, b)| a * b))
            * self.grid.cell_volume()
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self::from_vec(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &ScalarField, f: F) -> Self {
        assert_same_grid(self, other);
        Self::from_vec(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn shift(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    /// Pointwise maximum.
    pub fn max(&self, other: &ScalarField) -> Self {
        self.zip_map(other, f64::max)
    }

    /// `exp(f)` with exponents clamped at [`EXP_CLAMP`]; the flag reports whether
    /// the clamp was active anywhere.
    pub fn exp_clamped(&self) -> (Self, bool) {
        let mut clamped = false;
        let values = self
            .values
            .iter()
            .map(|&v| {
                if v > EXP_CLAMP {
                    clamped = true;
                    EXP_CLAMP.exp()
                } else {
                    v.exp()
                }
            })
            .collect();
        (Self::from_vec(&self.grid, values), clamped)
    }

    /// Spectral Laplacian. The result has zero mean up to round-off.
    pub fn laplacian(&self) -> Self {
        Self::from_vec(&self.grid, self.grid.laplacian_values(&self.values))
    }

    /// Spectral partial derivative along real axis `axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        assert!(axis < self.grid.axes());
        let values = self.grid.apply_symbol(&self.values, |idx| {
            Complex64::new(0.0, self.grid.first_symbol(idx[axis]))
        });
        Self::from_vec(&self.grid, values)
    }

    /// Pointwise Euclidean norm of the spectral gradient.
    pub fn gradient_norm(&self) -> Self {
        let mut acc = vec![0.0; self.values.len()];
        for axis in 0..self.grid.axes() {
            let d = self.derivative(axis);
            for (a, v) in acc.iter_mut().zip(d.values) {
                *a += v * v;
            }
        }
        Self::from_vec(&self.grid, acc.into_iter().map(f64::sqrt).collect())
    }

    /// Mean-zero `u` with `Δu = rhs − mean(rhs)`; fails if `|mean(rhs)| > tol_mean`.
    pub fn poisson_solve(&self, tol_mean: f64) -> Result<Self> {
        let mean = self.integrate();
        if mean.abs() > tol_mean {
            return Err(Error::MeanNotZero {
                mean,
                tol: tol_mean,
            });
        }
        let grid = &self.grid;
        let values = grid.apply_symbol(&self.values, |idx| {
            let s = grid.laplacian_symbol(idx);
            if s == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0 / s, 0.0)
            }
        });
        Ok(Self::from_vec(grid, values))
    }
}

fn assert_same_grid(a: &ScalarField, b: &ScalarField) {
    assert!(
        a.grid == b.grid,
        "grid mismatch: {:?} vs {:?}",
        a.grid,
        b.grid
    );
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.scale(rhs)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scale(-1.0)
    }
}

/// `cos(2π Σ k_a x_a)` on `grid`, one wavenumber per real axis.
pub fn cosine(grid: &Grid, k: &[i64]) -> ScalarField {
    assert_eq!(k.len(), grid.axes());
    ScalarField::from_fn(grid, |p| {
        let phase: f64 = p.iter().zip(k).map(|(x, &ka)| x * ka as f64).sum();
        (2.0 * PI * phase).cos()
    })
}
