//! The envelope `P_θ(φ) = sup{ψ ≤ φ : θ + dd^cψ ≥ 0}` as a discrete obstacle
//! problem (complex dimension 1).
//!
//! Projected SOR on the 5-point stencil finds an approximate contact set; a
//! primal-dual active-set iteration on the spectral operator then solves
//! `min(φ − u, ρ + Δu) = 0` to solver precision.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::krylov::pcg;
use crate::multigrid::Multigrid;
use crate::problem::{KahlerForm, ProblemData};

/// Contact threshold multiplier: `φ − u ≤ κ·tol`.
pub const KAPPA: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeResiduals {
    /// `max(0, sup(u − φ))`
    pub obstacle: f64,
    /// `max(0, −inf(ρ + Δu))`
    pub positivity: f64,
    /// `sup |min(φ − u, ρ + Δu)|`
    pub complementarity: f64,
}

impl EnvelopeResiduals {
    pub fn max(&self) -> f64 {
        self.obstacle.max(self.positivity).max(self.complementarity)
    }
}

#[derive(Clone, Debug)]
pub struct EnvelopeSolution {
    pub u: ScalarField,
    /// `ρ + Δu`, the Monge-Ampère density of the envelope.
    pub density: ScalarField,
    /// Points where `φ − u ≤ κ·tol`.
    pub contact_mask: Vec<bool>,
    pub residuals: EnvelopeResiduals,
    /// Projected SOR sweeps plus active-set iterations.
    pub iterations: usize,
    pub tol: f64,
    obstacle: ScalarField,
}

impl EnvelopeSolution {
    pub fn obstacle(&self) -> &ScalarField {
        &self.obstacle
    }

    pub fn contact_fraction(&self) -> f64 {
        self.contact_mask.iter().filter(|&&c| c).count() as f64 / self.contact_mask.len() as f64
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EnvelopeOptions {
    pub tol: f64,
    /// Cap on projected SOR sweeps.
    pub max_iter: usize,
    pub omega: f64,
    pub max_active_set_iter: usize,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 1000,
            omega: 1.5,
            max_active_set_iter: 200,
        }
    }
}

/// Envelope of `phi` with respect to `form`.
pub fn project(
    form: &KahlerForm,
    phi: &ScalarField,
    tol: f64,
    max_iter: usize,
) -> Result<EnvelopeSolution> {
    project_with(
        form,
        phi,
        &EnvelopeOptions {
            tol,
            max_iter,
            ..EnvelopeOptions::default()
        },
    )
}

pub fn project_with(
    form: &KahlerForm,
    phi: &ScalarField,
    opts: &EnvelopeOptions,
) -> Result<EnvelopeSolution> {
    let grid = phi.grid();
    if grid.ndim() != 1 {
        return Err(Error::Unsupported("envelope", 1));
    }
    if form.grid() != grid {
        return Err(Error::GridMismatch("form and obstacle grids differ".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {}",
            opts.tol
        )));
    }
    let n = grid.resolution();
    let rho = form.density().values();
    let obstacle = phi.values();

    let (u0, sweeps) = psor(n, rho, obstacle, opts);
    let mut active: Vec<bool> = u0.iter().zip(obstacle).map(|(u, p)| u >= p).collect();
    if !active.iter().any(|&a| a) {
        active[phi.argmin()] = true;
    }

    let mut seen = HashSet::new();
    let mut u = u0;
    let mut best: Option<EnvelopeSolution> = None;
    let mut iterations = sweeps;
    for _ in 0..opts.max_active_set_iter {
        iterations += 1;
        solve_restricted(phi, rho, &active, &mut u);
        let field = ScalarField::from_vec(grid, u.clone());
        let sol = assemble(form, phi, field, iterations, opts.tol);
        let improved = best
            .as_ref()
            .is_none_or(|b| sol.residuals.max() < b.residuals.max());
        let density = sol.density.values().to_vec();
        if improved {
            best = Some(sol);
        }
        let next: Vec<bool> = (0..u.len())
            .map(|i| {
                if active[i] {
                    density[i] > 0.0
                } else {
                    u[i] > obstacle[i]
                }
            })
            .collect();
        if next == active || !seen.insert(active.clone()) {
            break;
        }
        active = next;
        if !active.iter().any(|&a| a) {
            active[phi.argmin()] = true;
        }
    }
    let best = best.expect("at least one active-set iteration");
    if best.residuals.max() <= opts.tol {
        Ok(best)
    } else {
        Err(Error::EnvelopeNoConvergence {
            max_iter: opts.max_iter,
            best: Box::new(best),
        })
    }
}

fn assemble(
    form: &KahlerForm,
    phi: &ScalarField,
    u: ScalarField,
    iterations: usize,
    tol: f64,
) -> EnvelopeSolution {
    let density = form.density() + &u.laplacian();
    let mut residuals = EnvelopeResiduals {
        obstacle: 0.0,
        positivity: 0.0,
        complementarity: 0.0,
    };
    for ((&ui, &pi), &di) in u.values().iter().zip(phi.values()).zip(density.values()) {
        residuals.obstacle = residuals.obstacle.max(ui - pi);
        residuals.positivity = residuals.positivity.max(-di);
        residuals.complementarity = residuals.complementarity.max((pi - ui).min(di).abs());
    }
    let contact_mask = contact_mask_of(phi, &u, KAPPA * tol);
    EnvelopeSolution {
        u,
        density,
        contact_mask,
        residuals,
        iterations,
        tol,
        obstacle: phi.clone(),
    }
}

fn contact_mask_of(phi: &ScalarField, u: &ScalarField, threshold: f64) -> Vec<bool> {
    phi.values()
        .iter()
        .zip(u.values())
        .map(|(p, u)| p - u <= threshold)
        .collect()
}

/// Red-black projected SOR for `min(φ − u, ρ + Δ_h u) = 0` with the 5-point Laplacian.
fn psor(n: usize, rho: &[f64], phi: &[f64], opts: &EnvelopeOptions) -> (Vec<f64>, usize) {
    let h2 = 1.0 / (n * n) as f64;
    let sup = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inf = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let mut u: Vec<f64> = phi.iter().map(|p| p - sup + inf).collect();
    let stop = 1e-3 * opts.tol;
    for sweep in 0..opts.max_iter {
        let mut change: f64 = 0.0;
        for color in 0..2 {
            for i in 0..n {
                let ip = (i + 1) % n;
                let im = (i + n - 1) % n;
                for j in ((i + color) % 2..n).step_by(2) {
                    let jp = (j + 1) % n;
                    let jm = (j + n - 1) % n;
                    let k = i * n + j;
                    let nb = u[ip * n + j] + u[im * n + j] + u[i * n + jp] + u[i * n + jm];
                    let gs = 0.25 * (nb + rho[k] * h2);
                    let new = (u[k] + opts.omega * (gs - u[k])).min(phi[k]);
                    change = change.max((new - u[k]).abs());
                    u[k] = new;
                }
            }
        }
        if change <= stop {
            return (u, sweep + 1);
        }
    }
    (u, opts.max_iter)
}

/// Sets `u = φ` on the active set and solves `ρ + Δu = 0` on its complement.
fn solve_restricted(phi: &ScalarField, rho: &[f64], active: &[bool], u: &mut [f64]) {
    let grid = phi.grid();
    let n = grid.resolution();
    let len = u.len();
    let pinned: Vec<f64> = (0..len)
        .map(|i| if active[i] { phi.values()[i] } else { 0.0 })
        .collect();
    if active.iter().all(|&a| a) {
        u.copy_from_slice(&pinned);
        return;
    }
    let lap_pinned = ScalarField::from_vec(grid, pinned.clone()).laplacian();
    let b: Vec<f64> = (0..len)
        .map(|i| {
            if active[i] {
                0.0
            } else {
                rho[i] + lap_pinned.values()[i]
            }
        })
        .collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        let lap = ScalarField::from_vec(grid, x.to_vec()).laplacian();
        for i in 0..len {
            y[i] = if active[i] { 0.0 } else { -lap.values()[i] };
        }
    };
    let big = 1e6 * 4.0 * (n * n) as f64;
    let w: Vec<f64> = active.iter().map(|&a| if a { big } else { 0.0 }).collect();
    let mg = Multigrid::new(n, &w);
    let precond = |r: &[f64], z: &mut [f64]| {
        mg.apply(r, z);
        for i in 0..len {
            if active[i] {
                z[i] = 0.0;
            }
        }
    };
    let mut x: Vec<f64> = (0..len)
        .map(|i| if active[i] { 0.0 } else { u[i] })
        .collect();
    pcg(apply, precond, &b, &mut x, 1e-14, 2000);
    for i in 0..len {
        u[i] = if active[i] { pinned[i] } else { x[i] };
    }
}

/// Points where `φ − u ≤ κ·tol`.
pub fn contact_set(sol: &EnvelopeSolution, kappa: f64) -> Vec<bool> {
    contact_mask_of(&sol.obstacle, &sol.u, kappa * sol.tol)
}

/// Envelope with respect to the summed form `Σθ_j`; its density is the
/// Monge-Ampère density `(Σθ_j + dd^c P(φ))^n`.
pub fn sum_form_envelope(data: &ProblemData, opts: &EnvelopeOptions) -> Result<EnvelopeSolution> {
    let sum = KahlerForm::sum(data.forms())?;
    project_with(&sum, data.phi(), opts)
}
