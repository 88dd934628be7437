//! Monge-Ampère measures, the Monge-Ampère energy and the variational
//! functionals built from it.
//!
//! In complex dimension 1 the density of `θ + dd^c φ` is identified with
//! `ρ + Δφ`, so the Monge-Ampère measure is linear in the potential. In
//! complex dimension 2 (experimental) forms are constant Hermitian metrics `g`
//! and the measure is `det(g + H φ)` with `H` the spectral complex Hessian,
//! scaled so that its diagonal entries are the partial Laplacians.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{compensated_sum, Grid, ScalarField};
use crate::problem::{Hermitian2, KahlerForm, ProblemData};

/// Pointwise slack allowed below zero for densities of admissible potentials.
pub const TOL_POS: f64 = 1e-8;

/// Normalization of the Monge-Ampère energy.
///
/// `Standard` carries the `1/(n+1)` factor, so that `E(φ + c) = E(φ) + cV`
/// and `dE/dφ` is the Monge-Ampère measure. `None` drops it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EnergyPrefactor {
    #[default]
    Standard,
    None,
}

impl std::str::FromStr for EnergyPrefactor {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "standard" => Ok(Self::Standard),
            "none" => Ok(Self::None),
            other => Err(format!(
                "unknown energy prefactor `{other}` (standard|none)"
            )),
        }
    }
}

impl std::fmt::Display for EnergyPrefactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Standard => "standard",
            Self::None => "none",
        })
    }
}

/// A measure absolutely continuous with respect to `ω_0^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureDensity {
    density: ScalarField,
    mass: f64,
}

impl MeasureDensity {
    pub fn new(density: ScalarField) -> Self {
        let mass = density.integrate();
        Self { density, mass }
    }

    pub fn density(&self) -> &ScalarField {
        &self.density
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// The measure divided by `c`.
    pub fn normalized(&self, c: f64) -> Self {
        Self::new(self.density.scale(1.0 / c))
    }

    pub fn sup_density(&self) -> f64 {
        self.density.sup()
    }
}

/// Monge-Ampère measure of `φ` with respect to `θ`, dispatching on dimension.
pub fn ma_measure(form: &KahlerForm, phi: &ScalarField) -> Result<MeasureDensity> {
    match phi.grid().ndim() {
        1 => ma_measure_1d(form, phi),
        _ => ma_measure_nd(form, phi),
    }
}

fn check_admissible(density: &ScalarField) -> Result<()> {
    let index = density.argmin();
    let min = density.values()[index];
    if min < -TOL_POS {
        return Err(Error::NotAdmissible { min, index });
    }
    Ok(())
}

fn ma_measure_1d(form: &KahlerForm, phi: &ScalarField) -> Result<MeasureDensity> {
    check_grid(form, phi)?;
    let density = form.density() + &phi.laplacian();
    check_admissible(&density)?;
    Ok(MeasureDensity::new(density))
}

fn check_grid(form: &KahlerForm, phi: &ScalarField) -> Result<()> {
    if form.grid() != phi.grid() {
        return Err(Error::GridMismatch(format!(
            "form on {:?}, potential on {:?}",
            form.grid(),
            phi.grid()
        )));
    }
    Ok(())
}

/// Pointwise complex Hessian `H_ab = 4 ∂_a ∂̄_b φ` in complex dimension 2.
///
/// Real axes are ordered `(x1, y1, x2, y2)`; `H_11 = Δ_1 φ`, `H_22 = Δ_2 φ`,
/// `H_12 = φ_{x1x2} + φ_{y1y2} + i(φ_{x1y2} − φ_{y1x2})`.
#[derive(Clone, Debug)]
pub struct ComplexHessian {
    pub h11: Vec<f64>,
    pub h22: Vec<f64>,
    pub h12_re: Vec<f64>,
    pub h12_im: Vec<f64>,
}

impl ComplexHessian {
    pub fn of(phi: &ScalarField) -> Self {
        let grid = phi.grid();
        assert_eq!(
            grid.ndim(),
            2,
            "complex Hessian requires complex dimension 2"
        );
        let spec = grid.forward(phi.values());
        let component = |pick: fn([f64; 4]) -> f64| {
            let mut s = spec.clone();
            grid.scale_spectrum(&mut s, |idx| {
                Complex64::new(pick(hessian_symbols(grid, idx)), 0.0)
            });
            grid.inverse_real(s)
        };
        Self {
            h11: component(|s| s[0]),
            h22: component(|s| s[1]),
            h12_re: component(|s| s[2]),
            h12_im: component(|s| s[3]),
        }
    }

    /// `g + H` at point `i`.
    pub fn shifted(&self, g: &Hermitian2, i: usize) -> Hermitian2 {
        Hermitian2::new(
            g.a11 + self.h11[i],
            g.a22 + self.h22[i],
            g.a12 + Complex64::new(self.h12_re[i], self.h12_im[i]),
        )
    }
}

/// Fourier symbols of `(H_11, H_22, Re H_12, Im H_12)` at a multi-index.
pub(crate) fn hessian_symbols(grid: &Grid, idx: &[usize]) -> [f64; 4] {
    let f = |i: usize| grid.first_symbol(i);
    let s = |i: usize| grid.second_symbol(i);
    [
        s(idx[0]) + s(idx[1]),
        s(idx[2]) + s(idx[3]),
        -f(idx[0]) * f(idx[2]) - f(idx[1]) * f(idx[3]),
        -f(idx[0]) * f(idx[3]) + f(idx[1]) * f(idx[2]),
    ]
}

/// Mixed determinant `D(A, B) = ½(det(A+B) − det A − det B)`.
pub(crate) fn mixed_det(a: &Hermitian2, b: &Hermitian2) -> f64 {
    0.5 * (a.a11 * b.a22 + a.a22 * b.a11 - 2.0 * (a.a12 * b.a12.conj()).re)
}

fn metric_of(form: &KahlerForm) -> Result<&Hermitian2> {
    form.metric()
        .ok_or(Error::Unsupported("forms without a constant metric", 1))
}

/// Monge-Ampère density without the admissibility check (for residuals of
/// arbitrary potentials).
pub fn ma_density_unchecked(form: &KahlerForm, phi: &ScalarField) -> Result<ScalarField> {
    check_grid(form, phi)?;
    match phi.grid().ndim() {
        1 => Ok(form.density() + &phi.laplacian()),
        _ => {
            let g = metric_of(form)?;
            let hess = ComplexHessian::of(phi);
            let det = (0..phi.grid().len())
                .map(|i| hess.shifted(g, i).det())
                .collect();
            ScalarField::new(phi.grid(), det)
        }
    }
}

/// Experimental complex-dimension-2 Monge-Ampère measure `det(g + Hφ)`.
pub fn ma_measure_nd(form: &KahlerForm, phi: &ScalarField) -> Result<MeasureDensity> {
    check_grid(form, phi)?;
    if phi.grid().ndim() != 2 {
        return Err(Error::Unsupported("ma_measure_nd", 2));
    }
    let g = metric_of(form)?;
    let hess = ComplexHessian::of(phi);
    let mut det = Vec::with_capacity(phi.grid().len());
    let mut worst = (f64::INFINITY, 0);
    for i in 0..phi.grid().len() {
        let a = hess.shifted(g, i);
        let ev = a.min_eigenvalue();
        if ev < worst.0 {
            worst = (ev, i);
        }
        det.push(a.det());
    }
    if worst.0 < -TOL_POS {
        return Err(Error::NotAdmissible {
            min: worst.0,
            index: worst.1,
        });
    }
    Ok(MeasureDensity::new(ScalarField::new(phi.grid(), det)?))
}

/// Monge-Ampère energy with the standard `1/(n+1)` normalization.
pub fn energy(form: &KahlerForm, phi: &ScalarField) -> Result<f64> {
    energy_with(form, phi, EnergyPrefactor::Standard)
}

/// `E_θ(φ) = c_n Σ_{l=0}^{n} ∫ φ (θ+dd^cφ)^l ∧ θ^{n−l}`, `c_n = 1/(n+1)` or 1.
pub fn energy_with(
    form: &KahlerForm,
    phi: &ScalarField,
    prefactor: EnergyPrefactor,
) -> Result<f64> {
    let grid = phi.grid();
    let n = grid.ndim();
    let sum = match n {
        1 => {
            let ma = ma_measure_1d(form, phi)?;
            phi.dot(form.density()) + phi.dot(ma.density())
        }
        _ => {
            ma_measure_nd(form, phi)?;
            let g = metric_of(form)?;
            let hess = ComplexHessian::of(phi);
            let v = phi.values();
            let terms = (0..grid.len()).map(|i| {
                let a = hess.shifted(g, i);
                v[i] * (g.det() + mixed_det(&a, g) + a.det())
            });
            compensated_sum(terms) * grid.cell_volume()
        }
    };
    Ok(match prefactor {
        EnergyPrefactor::Standard => sum / (n as f64 + 1.0),
        EnergyPrefactor::None => sum,
    })
}

fn potential_sum(potentials: &[ScalarField], data: &ProblemData) -> Result<ScalarField> {
    if potentials.len() != data.m() {
        return Err(Error::InvalidArgument(format!(
            "expected {} potentials, got {}",
            data.m(),
            potentials.len()
        )));
    }
    let mut sum = ScalarField::zeros(data.grid());
    for p in potentials {
        if p.grid() != data.grid() {
            return Err(Error::GridMismatch("potential not on the data grid".into()));
        }
        sum = &sum + p;
    }
    Ok(sum)
}

fn normalized_energy_sum(
    potentials: &[ScalarField],
    data: &ProblemData,
    prefactor: EnergyPrefactor,
) -> Result<f64> {
    let mut total = 0.0;
    for (p, form) in potentials.iter().zip(data.forms()) {
        total += energy_with(form, p, prefactor)? / form.mass();
    }
    Ok(total)
}

/// `(1/β) log ∫ e^{β g} ω_0^n`, evaluated with the exponent shifted by `sup(βg)`.
pub fn log_mean_exp(g: &ScalarField, beta: f64) -> f64 {
    let top = g.sup();
    let shifted = g.map(|v| (beta * (v - top)).exp());
    top + shifted.integrate().ln() / beta
}

/// `f_φ = Σ E_j(φ_j)/V_j − sup(Σφ_j − φ)`.
pub fn f_phi(potentials: &[ScalarField], data: &ProblemData) -> Result<f64> {
    f_phi_with(potentials, data, EnergyPrefactor::Standard)
}

pub fn f_phi_with(
    potentials: &[ScalarField],
    data: &ProblemData,
    prefactor: EnergyPrefactor,
) -> Result<f64> {
    let gap = &potential_sum(potentials, data)? - data.phi();
    Ok(normalized_energy_sum(potentials, data, prefactor)? - gap.sup())
}

/// `f_φ^β = Σ E_j(φ_j)/V_j − (1/β) log ∫ e^{β(Σφ_j − φ)} ω_0^n`.
pub fn f_phi_beta(potentials: &[ScalarField], data: &ProblemData, beta: f64) -> Result<f64> {
    f_phi_beta_with(potentials, data, beta, EnergyPrefactor::Standard)
}

pub fn f_phi_beta_with(
    potentials: &[ScalarField],
    data: &ProblemData,
    beta: f64,
    prefactor: EnergyPrefactor,
) -> Result<f64> {
    if beta <= 0.0 || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let gap = &potential_sum(potentials, data)? - data.phi();
    Ok(normalized_energy_sum(potentials, data, prefactor)? - log_mean_exp(&gap, beta))
}

/// `∫ v dμ`.
pub fn pairing(v: &ScalarField, mu: &MeasureDensity) -> f64 {
    v.dot(mu.density())
}

/// Largest `t ≤ 1` (halving from 1) such that `base + t·direction` keeps the
/// Monge-Ampère density of `form` above `margin · min(ρ)` (complex dimension 1).
pub fn admissible_step(
    form: &KahlerForm,
    base: &ScalarField,
    direction: &ScalarField,
    margin: f64,
) -> f64 {
    let floor = margin * form.density().inf();
    let base_ma = form.density() + &base.laplacian();
    let dir_lap = direction.laplacian();
    let mut t = 1.0;
    for _ in 0..60 {
        let ok = base_ma
            .values()
            .iter()
            .zip(dir_lap.values())
            .all(|(b, d)| b + t * d >= floor);
        if ok {
            return t;
        }
        t *= 0.5;
    }
    0.0
}

/// Grid helper shared by tests: `ε cos(2π k·x)`.
pub fn cosine_potential(grid: &Grid, k: &[i64], eps: f64) -> ScalarField {
    crate::grid::cosine(grid, k).scale(eps)
}
