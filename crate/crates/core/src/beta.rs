//! The regularized system `ρ_j + Δφ_j = V_j e^{β(Σφ_k − φ)}` at fixed `β`
//! with `sup φ_j = 0` for `j ≥ 2`.
//!
//! All `m` equations share the right-hand side, so their sum is a single
//! Liouville-type equation for `s = Σφ_j`. We solve for `u = s − φ`,
//!
//! ```text
//! G(u) = Δu + Δφ + R − λ e^{βu} = 0,    λ = Σ V_j,  R = Σ ρ_j,
//! ```
//!
//! by damped Newton and recover each `φ_j` from one Poisson solve.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::energy::{f_phi_beta_with, log_mean_exp, EnergyPrefactor};
use crate::error::{Error, Result};
use crate::grid::{ScalarField, EXP_CLAMP};
use crate::krylov::pcg;
use crate::multigrid::Multigrid;
use crate::problem::ProblemData;
use crate::random::FieldSampler;

#[derive(Clone, Debug)]
pub struct BetaSolution {
    pub beta: f64,
    pub potentials: Vec<ScalarField>,
    /// `max_j sup|ρ_j + Δφ_j − V_j e^{β(Σφ_k − φ)}|`, recomputed from the fields.
    pub residual_sup: f64,
    /// Tolerance actually enforced: the requested one, raised to the
    /// round-off floor of the residual when that is larger.
    pub tol_effective: f64,
    pub newton_iters: usize,
    pub cg_iters: usize,
    /// The exponent clamp was active at some iterate.
    pub exponent_clamped: bool,
}

impl BetaSolution {
    pub fn potential_sum(&self) -> ScalarField {
        sum_fields(&self.potentials)
    }

    /// `e^{β(Σφ_j − φ)}`, the common normalized Monge-Ampère density.
    pub fn normalized_density(&self, data: &ProblemData) -> ScalarField {
        (&self.potential_sum() - data.phi()).map(|v| (self.beta * v).min(EXP_CLAMP).exp())
    }
}

/// Preconditioner for the Newton systems `(−Δ + W)δ = G`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Preconditioner {
    /// One V-cycle of geometric multigrid on `−Δ_h + W`.
    #[default]
    Multigrid,
    /// `(−Δ + mean W)^{-1}` applied spectrally.
    SpectralPoisson,
}

#[derive(Clone, Copy, Debug)]
pub struct BetaOptions {
    pub tol: f64,
    pub max_newton: usize,
    pub cg_rtol: f64,
    pub cg_max_iter: usize,
    pub max_halvings: usize,
    pub preconditioner: Preconditioner,
    /// Scale a warm start `u ↦ u·β_old/β` so the density is carried over.
    pub rescale_warm_start: bool,
}

impl Default for BetaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_newton: 60,
            cg_rtol: 1e-12,
            cg_max_iter: 1000,
            max_halvings: 30,
            preconditioner: Preconditioner::Multigrid,
            rescale_warm_start: true,
        }
    }
}

/// Initial guess for [`solve_beta_with`].
#[derive(Clone, Copy, Debug)]
pub enum BetaStart<'a> {
    Zero,
    Potentials(&'a [ScalarField]),
    /// Warm start from a solution at another `β`.
    Rung(&'a BetaSolution),
}

pub(crate) fn sum_fields(fields: &[ScalarField]) -> ScalarField {
    let mut iter = fields.iter();
    let first = iter.next().expect("at least one field").clone();
    iter.fold(first, |acc, f| &acc + f)
}

/// Solves at fixed `β` from `init` (or zero potentials).
pub fn solve_beta(
    data: &ProblemData,
    beta: f64,
    init: Option<&[ScalarField]>,
    tol: f64,
    max_newton: usize,
) -> Result<BetaSolution> {
    let start = init.map_or(BetaStart::Zero, BetaStart::Potentials);
    let opts = BetaOptions {
        tol,
        max_newton,
        ..BetaOptions::default()
    };
    solve_beta_with(data, beta, start, &opts)
}

pub fn solve_beta_with(
    data: &ProblemData,
    beta: f64,
    start: BetaStart<'_>,
    opts: &BetaOptions,
) -> Result<BetaSolution> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if data.grid().ndim() == 2 {
        return crate::beta_nd::solve_beta_nd(
            data,
            beta,
            start,
            &crate::beta_nd::NdOptions::from(opts),
        );
    }
    let phi = data.phi();
    let u0 = match start {
        BetaStart::Zero => -phi,
        BetaStart::Potentials(p) => {
            check_shapes(data, p)?;
            &sum_fields(p) - phi
        }
        BetaStart::Rung(sol) => {
            check_shapes(data, &sol.potentials)?;
            let u = &sol.potential_sum() - phi;
            if opts.rescale_warm_start {
                u.scale(sol.beta / beta)
            } else {
                u
            }
        }
    };
    let problem = Liouville::new(data, beta);
    let mut u = u0.shift(-log_mean_exp(&u0, beta));
    let mut clamped_any = false;
    let mut cg_total = 0;
    let mut best: Option<BetaSolution> = None;

    for iter in 0..=opts.max_newton {
        let state = problem.evaluate(&u);
        clamped_any |= state.clamped;
        let res = state.residual.sup_norm();
        let floor = problem.floor(&u, &state);
        if res <= opts.tol.max(floor) && !state.clamped {
            let sol = problem.recover(&u, iter, cg_total, clamped_any, opts.tol)?;
            if sol.residual_sup <= sol.tol_effective {
                return Ok(sol);
            }
            best = Some(sol);
        }
        if iter == opts.max_newton {
            break;
        }
        let (delta, cg) = problem.newton_step(&state, opts);
        cg_total += cg;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial = &u + &delta.scale(t);
            let r = problem.evaluate(&trial).residual.sup_norm();
            if r < res {
                u = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let best = match best {
        Some(b) => b,
        None => problem.recover(&u, opts.max_newton, cg_total, clamped_any, opts.tol)?,
    };
    Err(Error::BetaNoConvergence {
        max_newton: opts.max_newton,
        beta,
        residual: best.residual_sup,
        best: Box::new(best),
    })
}

fn check_shapes(data: &ProblemData, p: &[ScalarField]) -> Result<()> {
    if p.len() != data.m() {
        return Err(Error::InvalidArgument(format!(
            "expected {} initial potentials, got {}",
            data.m(),
            p.len()
        )));
    }
    if p.iter().any(|f| f.grid() != data.grid()) {
        return Err(Error::GridMismatch(
            "initial potentials not on the data grid".into(),
        ));
    }
    Ok(())
}

struct State {
    residual: ScalarField,
    exp: ScalarField,
    clamped: bool,
}

struct Liouville<'a> {
    data: &'a ProblemData,
    beta: f64,
    lambda: f64,
    /// `R + Δφ`
    source: ScalarField,
}

impl<'a> Liouville<'a> {
    fn new(data: &'a ProblemData, beta: f64) -> Self {
        let mut r = ScalarField::zeros(data.grid());
        for f in data.forms() {
            r = &r + f.density();
        }
        Self {
            data,
            beta,
            lambda: data.total_mass(),
            source: &r + &data.phi().laplacian(),
        }
    }

    fn evaluate(&self, u: &ScalarField) -> State {
        let (exp, clamped) = u.scale(self.beta).exp_clamped();
        let residual = &(&u.laplacian() + &self.source) - &exp.scale(self.lambda);
        State {
            residual,
            exp,
            clamped,
        }
    }

    /// Round-off floor of the residual: `β ε |s − φ|` relative error in the
    /// exponential and `ε (πN)²|φ|` in the spectral Laplacian.
    fn floor(&self, u: &ScalarField, state: &State) -> f64 {
        let n = self.data.grid().resolution() as f64;
        let scale = u.sup_norm() + 2.0 * self.data.phi().sup_norm();
        let density = self.lambda * state.exp.sup();
        f64::EPSILON * (self.beta * scale * density + 2.0 * (PI * n).powi(2) * scale)
    }

    fn newton_step(&self, state: &State, opts: &BetaOptions) -> (ScalarField, usize) {
        let grid = self.data.grid();
        let w: Vec<f64> = state
            .exp
            .values()
            .iter()
            .map(|e| self.lambda * self.beta * e)
            .collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            let lap = ScalarField::from_vec(grid, x.to_vec()).laplacian();
            for i in 0..x.len() {
                y[i] = w[i] * x[i] - lap.values()[i];
            }
        };
        let mut delta = vec![0.0; grid.len()];
        let b = state.residual.values();
        let outcome = match opts.preconditioner {
            Preconditioner::Multigrid => {
                let mg = Multigrid::new(grid.resolution(), &w);
                pcg(
                    apply,
                    |r, z| mg.apply(r, z),
                    b,
                    &mut delta,
                    opts.cg_rtol,
                    opts.cg_max_iter,
                )
            }
            Preconditioner::SpectralPoisson => {
                let shift = w.iter().sum::<f64>() / w.len() as f64;
                let precond = |r: &[f64], z: &mut [f64]| {
                    let out = grid.apply_symbol(r, |idx| {
                        Complex64::new(1.0 / (shift - grid.laplacian_symbol(idx)), 0.0)
                    });
                    z.copy_from_slice(&out);
                };
                pcg(
                    apply,
                    precond,
                    b,
                    &mut delta,
                    opts.cg_rtol,
                    opts.cg_max_iter,
                )
            }
        };
        (ScalarField::from_vec(grid, delta), outcome.iterations)
    }

    fn recover(
        &self,
        u: &ScalarField,
        newton_iters: usize,
        cg_iters: usize,
        exponent_clamped: bool,
        tol: f64,
    ) -> Result<BetaSolution> {
        let data = self.data;
        let phi = data.phi();
        let s = u + phi;
        let (exp, _) = u.scale(self.beta).exp_clamped();
        let m = data.m();
        let mut potentials = Vec::with_capacity(m);
        for form in &data.forms()[1..] {
            let rhs = &exp.scale(form.mass()) - form.density();
            let p = rhs.poisson_solve(f64::INFINITY)?;
            let top = p.sup();
            potentials.push(p.shift(-top));
        }
        let rest = if m > 1 {
            sum_fields(&potentials)
        } else {
            ScalarField::zeros(data.grid())
        };
        potentials.insert(0, &s - &rest);
        let residual_sup = field_residual(data, self.beta, &potentials);
        let state = self.evaluate(u);
        let tol_effective = tol.max(self.floor(u, &state));
        Ok(BetaSolution {
            beta: self.beta,
            potentials,
            residual_sup,
            tol_effective,
            newton_iters,
            cg_iters,
            exponent_clamped,
        })
    }
}

/// `max_j sup|ρ_j + Δφ_j − V_j e^{β(Σφ_k − φ)}|` computed from raw fields.
pub fn field_residual(data: &ProblemData, beta: f64, potentials: &[ScalarField]) -> f64 {
    let gap = &sum_fields(potentials) - data.phi();
    let exp = gap.map(|v| (beta * v).min(EXP_CLAMP).exp());
    potentials
        .iter()
        .zip(data.forms())
        .map(|(p, form)| {
            let lhs = form.density() + &p.laplacian();
            (&lhs - &exp.scale(form.mass())).sup_norm()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaximizerReport {
    pub trials: usize,
    pub seed: u64,
    pub value: f64,
    /// Largest `f(perturbed) − f(solution)`; nonpositive for a maximizer.
    pub max_increase: f64,
    /// Largest `f(x+tv) + f(x−tv) − 2f(x)`; nonpositive by concavity.
    pub max_second_difference: f64,
    pub violations: usize,
}

impl MaximizerReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Compares `f_φ^β` at the solution with `trials` random admissible perturbations.
pub fn maximizer_check(
    sol: &BetaSolution,
    data: &ProblemData,
    trials: usize,
    seed: u64,
) -> Result<MaximizerReport> {
    let prefactor = EnergyPrefactor::Standard;
    let f = |p: &[ScalarField]| f_phi_beta_with(p, data, sol.beta, prefactor);
    let value = f(&sol.potentials)?;
    let mut sampler = FieldSampler::new(seed);
    let mut report = MaximizerReport {
        trials,
        seed,
        value,
        max_increase: f64::NEG_INFINITY,
        max_second_difference: f64::NEG_INFINITY,
        violations: 0,
    };
    for _ in 0..trials {
        let dirs: Vec<ScalarField> = data
            .forms()
            .iter()
            .map(|_| sampler.band_limited(data.grid()))
            .collect();
        let mut t: f64 = 1e-2;
        for ((form, p), v) in data.forms().iter().zip(&sol.potentials).zip(&dirs) {
            if data.grid().ndim() == 1 {
                t = t.min(crate::energy::admissible_step(form, p, v, 0.5));
                t = t.min(crate::energy::admissible_step(form, p, &-v, 0.5));
            }
        }
        let plus: Vec<ScalarField> = sol
            .potentials
            .iter()
            .zip(&dirs)
            .map(|(p, v)| p + &v.scale(t))
            .collect();
        let minus: Vec<ScalarField> = sol
            .potentials
            .iter()
            .zip(&dirs)
            .map(|(p, v)| p - &v.scale(t))
            .collect();
        let fp = f(&plus)?;
        let fm = f(&minus)?;
        let increase = (fp - value).max(fm - value);
        report.max_increase = report.max_increase.max(increase);
        report.max_second_difference = report.max_second_difference.max(fp + fm - 2.0 * value);
        if increase > 1e-10 {
            report.violations += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{cosine, Grid};
    use crate::problem::{KahlerForm, Weight};

    fn flat(g: &Grid, c: f64) -> KahlerForm {
        KahlerForm::from_potential(c, &ScalarField::zeros(g)).unwrap()
    }

    #[test]
    fn constants_solve_flat_problem() {
        let g = Grid::new(1, 16).unwrap();
        let data = ProblemData::new(
            vec![flat(&g, 1.0), flat(&g, 2.5)],
            Weight::smooth(ScalarField::zeros(&g)),
        )
        .unwrap();
        for beta in [0.5, 10.0, 1e4] {
            let sol = solve_beta(&data, beta, None, 1e-10, 60).unwrap();
            assert_eq!(sol.residual_sup, 0.0);
            for p in &sol.potentials {
                assert!(p.sup_norm() < 1e-15);
            }
        }
    }

    #[test]
    fn normalization_and_unit_mass() {
        let g = Grid::new(1, 32).unwrap();
        let rho2 = KahlerForm::from_potential(1.0, &cosine(&g, &[0, 1]).scale(0.002)).unwrap();
        let data = ProblemData::new(
            vec![flat(&g, 1.0), rho2],
            Weight::smooth(cosine(&g, &[1, 0]).scale(0.3)),
        )
        .unwrap();
        let sol = solve_beta(&data, 10.0, None, 1e-10, 60).unwrap();
        assert!(sol.residual_sup <= 1e-10);
        assert!(sol.potentials[1].sup().abs() < 1e-12);
        let mass = sol.normalized_density(&data).integrate();
        assert!((mass - 1.0).abs() < 10.0 * sol.residual_sup.max(1e-15));
        let mu1 = &(data.forms()[0].density() + &sol.potentials[0].laplacian()).scale(1.0);
        let mu2 = &(data.forms()[1].density() + &sol.potentials[1].laplacian()).scale(1.0);
        assert!((mu1 - mu2).sup_norm() <= 10.0 * sol.residual_sup.max(1e-15) + 1e-12);
    }

    #[test]
    fn preconditioners_agree() {
        let g = Grid::new(1, 32).unwrap();
        let data = ProblemData::new(
            vec![flat(&g, 1.0)],
            Weight::smooth(cosine(&g, &[1, 0]).scale(0.5)),
        )
        .unwrap();
        let a = solve_beta_with(&data, 50.0, BetaStart::Zero, &BetaOptions::default()).unwrap();
        let opts = BetaOptions {
            preconditioner: Preconditioner::SpectralPoisson,
            ..BetaOptions::default()
        };
        let b = solve_beta_with(&data, 50.0, BetaStart::Zero, &opts).unwrap();
        assert!((&a.potentials[0] - &b.potentials[0]).sup_norm() < 1e-9);
    }

    #[test]
    fn flat_maximizer_strict() {
        let g = Grid::new(1, 16).unwrap();
        let data =
            ProblemData::new(vec![flat(&g, 1.0)], Weight::smooth(ScalarField::zeros(&g))).unwrap();
        let sol = solve_beta(&data, 3.0, None, 1e-10, 60).unwrap();
        let report = maximizer_check(&sol, &data, 10, 1).unwrap();
        assert!(report.passed());
        assert!(report.max_increase < 0.0);
        assert!(report.max_second_difference <= 0.0);
    }
}
