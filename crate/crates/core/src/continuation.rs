//! The `β → ∞` ladder: warm-started fixed-`β` solves whose limit gives the
//! extremal potentials and the equilibrium measure.

use crate::beta::{solve_beta_with, sum_fields, BetaOptions, BetaSolution, BetaStart};
use crate::energy::{
    energy_with, f_phi_beta_with, f_phi_with, log_mean_exp, ma_density_unchecked, ma_measure,
    EnergyPrefactor, MeasureDensity,
};
use crate::envelope::{sum_form_envelope, EnvelopeOptions};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::problem::ProblemData;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaSchedule {
    pub beta0: f64,
    pub growth: f64,
    pub beta_max: f64,
    pub ladder_tol: f64,
}

impl Default for BetaSchedule {
    fn default() -> Self {
        Self {
            beta0: 1.0,
            growth: 4.0,
            beta_max: 4f64.powi(10),
            ladder_tol: 1e-5,
        }
    }
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta0 > 0.0)
            || !(self.growth > 1.0)
            || !(self.beta_max >= self.beta0)
            || !(self.ladder_tol > 0.0)
        {
            return Err(Error::InvalidArgument(format!(
                "schedule needs beta0 > 0, growth > 1, beta_max >= beta0, ladder_tol > 0; got {self:?}"
            )));
        }
        Ok(())
    }

    /// `β_0, β_0 g, β_0 g², …` up to `β_max`.
    pub fn rungs(&self) -> Vec<f64> {
        let mut out = vec![self.beta0];
        loop {
            let next = out.last().unwrap() * self.growth;
            if next > self.beta_max * (1.0 + 1e-12) {
                return out;
            }
            out.push(next);
        }
    }
}

/// Diagnostics recorded after each successful rung.
#[derive(Clone, Debug, PartialEq)]
pub struct RungRecord {
    pub beta: f64,
    pub residual: f64,
    pub tol_effective: f64,
    pub newton_iters: usize,
    pub cg_iters: usize,
    /// `sup(Σφ_j − φ)`
    pub sup_gap: f64,
    /// `β · sup_gap`
    pub sum_bound: f64,
    /// `(1/β) log ∫ e^{β(Σφ_j − φ)}`
    pub log_mean: f64,
    pub energies: Vec<f64>,
    /// `f_φ^β` at the rung potentials.
    pub f_value: f64,
    /// `f_φ` at the rung potentials.
    pub f_limit: f64,
    pub laplacian_sups: Vec<f64>,
    /// `max_j sup|φ_j^β − φ_j^{β_prev}|`; absent on the first rung.
    pub increment: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Admissibility {
    /// `max(0, sup(Σφ_j − φ))`
    pub max_violation: f64,
    /// `∫(φ − Σφ_j) dμ_eq`
    pub support_residual: f64,
}

#[derive(Clone, Debug)]
pub struct ExtremalResult {
    pub potentials: Vec<ScalarField>,
    pub mu_eq: MeasureDensity,
    pub beta_final: f64,
    pub ladder_history: Vec<RungRecord>,
    pub admissibility: Admissibility,
    /// `max_j sup|MA_j/V_j − μ_eq|`
    pub measure_disagreement: f64,
    /// The last increment fell below `ladder_tol`.
    pub converged: bool,
    /// β values whose solve failed (retried at an intermediate β).
    pub failed_rungs: Vec<f64>,
    /// Potentials at every rung, when requested.
    pub rung_potentials: Vec<Vec<ScalarField>>,
}

impl ExtremalResult {
    pub fn potential_sum(&self) -> ScalarField {
        sum_fields(&self.potentials)
    }

    pub fn last_rung(&self) -> &RungRecord {
        self.ladder_history.last().expect("nonempty ladder")
    }
}

#[derive(Clone, Debug, Default)]
pub struct LadderOptions {
    pub beta: BetaOptions,
    pub prefactor: EnergyPrefactor,
    pub keep_rungs: bool,
}

impl LadderOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            beta: BetaOptions {
                tol,
                ..BetaOptions::default()
            },
            ..Self::default()
        }
    }
}

pub fn solve_extremal(
    data: &ProblemData,
    schedule: &BetaSchedule,
    tol: f64,
) -> Result<ExtremalResult> {
    solve_extremal_with(data, schedule, &LadderOptions::with_tol(tol), None)
}

pub fn solve_extremal_with(
    data: &ProblemData,
    schedule: &BetaSchedule,
    opts: &LadderOptions,
    init: Option<&[ScalarField]>,
) -> Result<ExtremalResult> {
    schedule.validate()?;
    let mut pending: Vec<f64> = schedule.rungs();
    pending.reverse();
    let mut prev: Option<BetaSolution> = None;
    let mut history: Vec<RungRecord> = Vec::new();
    let mut rungs = Vec::new();
    let mut failed = Vec::new();
    let mut consecutive_failures = 0;
    let mut converged = false;
    while let Some(beta) = pending.pop() {
        let start = match (&prev, init) {
            (Some(p), _) => BetaStart::Rung(p),
            (None, Some(p)) => BetaStart::Potentials(p),
            (None, None) => BetaStart::Zero,
        };
        match solve_beta_with(data, beta, start, &opts.beta) {
            Ok(sol) => {
                consecutive_failures = 0;
                let increment = prev.as_ref().map(|p| {
                    p.potentials
                        .iter()
                        .zip(&sol.potentials)
                        .map(|(a, b)| (a - b).sup_norm())
                        .fold(0.0, f64::max)
                });
                history.push(record(data, &sol, increment, opts.prefactor)?);
                if opts.keep_rungs {
                    rungs.push(sol.potentials.clone());
                }
                prev = Some(sol);
                if increment.is_some_and(|inc| inc <= schedule.ladder_tol) {
                    converged = true;
                    break;
                }
            }
            Err(e) if e.is_convergence_failure() => {
                failed.push(beta);
                consecutive_failures += 1;
                let Some(p) = &prev else { return Err(e) };
                if consecutive_failures >= 2 {
                    let best = finish(data, p, history, false, failed, rungs)?;
                    return Err(Error::LadderStalled {
                        beta,
                        best: Box::new(best),
                    });
                }
                pending.push(beta);
                pending.push((p.beta * beta).sqrt());
            }
            Err(e) => return Err(e),
        }
    }
    let last = prev.expect("at least one rung");
    finish(data, &last, history, converged, failed, rungs)
}

fn record(
    data: &ProblemData,
    sol: &BetaSolution,
    increment: Option<f64>,
    prefactor: EnergyPrefactor,
) -> Result<RungRecord> {
    let gap = &sol.potential_sum() - data.phi();
    let sup_gap = gap.sup();
    let energies = sol
        .potentials
        .iter()
        .zip(data.forms())
        .map(|(p, f)| energy_with(f, p, prefactor))
        .collect::<Result<Vec<_>>>()?;
    Ok(RungRecord {
        beta: sol.beta,
        residual: sol.residual_sup,
        tol_effective: sol.tol_effective,
        newton_iters: sol.newton_iters,
        cg_iters: sol.cg_iters,
        sup_gap,
        sum_bound: sol.beta * sup_gap,
        log_mean: log_mean_exp(&gap, sol.beta),
        energies,
        f_value: f_phi_beta_with(&sol.potentials, data, sol.beta, prefactor)?,
        f_limit: f_phi_with(&sol.potentials, data, prefactor)?,
        laplacian_sups: sol
            .potentials
            .iter()
            .map(|p| p.laplacian().sup_norm())
            .collect(),
        increment,
    })
}

fn normalized_measures(
    data: &ProblemData,
    potentials: &[ScalarField],
) -> Result<Vec<MeasureDensity>> {
    potentials
        .iter()
        .zip(data.forms())
        .map(|(p, f)| Ok(ma_measure(f, p)?.normalized(f.mass())))
        .collect()
}

fn finish(
    data: &ProblemData,
    last: &BetaSolution,
    ladder_history: Vec<RungRecord>,
    converged: bool,
    failed_rungs: Vec<f64>,
    rung_potentials: Vec<Vec<ScalarField>>,
) -> Result<ExtremalResult> {
    let potentials = last.potentials.clone();
    let measures = normalized_measures(data, &potentials)?;
    let mu_eq = measures[0].clone();
    let measure_disagreement = measures
        .iter()
        .map(|m| (m.density() - mu_eq.density()).sup_norm())
        .fold(0.0, f64::max);
    let gap = &sum_fields(&potentials) - data.phi();
    let admissibility = Admissibility {
        max_violation: gap.sup().max(0.0),
        support_residual: -gap.dot(mu_eq.density()),
    };
    Ok(ExtremalResult {
        potentials,
        mu_eq,
        beta_final: last.beta,
        ladder_history,
        admissibility,
        measure_disagreement,
        converged,
        failed_rungs,
        rung_potentials,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionReport {
    /// `max_{j<k} sup|MA_j/V_j − MA_k/V_k|`
    pub measure_equality: f64,
    /// `sup(Σφ_j − φ)`, signed.
    pub admissibility: f64,
    /// `∫(φ − Σφ_j) dμ_eq`, signed.
    pub support: f64,
    pub tol: f64,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.measure_equality <= self.tol
            && self.admissibility <= self.tol
            && self.support.abs() <= self.tol
    }
}

/// Recomputes the three defining conditions from the raw potentials.
pub fn check_conditions(
    result: &ExtremalResult,
    data: &ProblemData,
    tol: f64,
) -> Result<ConditionReport> {
    check_potentials(&result.potentials, data, tol)
}

pub fn check_potentials(
    potentials: &[ScalarField],
    data: &ProblemData,
    tol: f64,
) -> Result<ConditionReport> {
    let measures = potentials
        .iter()
        .zip(data.forms())
        .map(|(p, f)| {
            Ok(MeasureDensity::new(
                ma_density_unchecked(f, p)?.scale(1.0 / f.mass()),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut measure_equality: f64 = 0.0;
    for j in 0..measures.len() {
        for k in j + 1..measures.len() {
            measure_equality =
                measure_equality.max((measures[j].density() - measures[k].density()).sup_norm());
        }
    }
    let gap = &sum_fields(potentials) - data.phi();
    Ok(ConditionReport {
        measure_equality,
        admissibility: gap.sup(),
        support: -gap.dot(measures[0].density()),
        tol,
    })
}

/// Whether a monitored series stays within twice its maximum over the first
/// three entries. Returns `(max, bound)`.
pub fn early_bound(series: &[f64]) -> (f64, f64) {
    let early = series.iter().take(3).copied().fold(0.0, f64::max);
    let max = series.iter().copied().fold(0.0, f64::max);
    (max, 2.0 * early)
}

/// The series `β_k · sup(Σφ_j^{β_k} − φ)`; fails if it leaves `2×` its early maximum.
pub fn sum_bound_monitor(result: &ExtremalResult) -> Result<Vec<f64>> {
    if result.ladder_history.is_empty() {
        return Err(Error::InvalidArgument("empty ladder history".into()));
    }
    let series: Vec<f64> = result.ladder_history.iter().map(|r| r.sum_bound).collect();
    let (max, bound) = early_bound(&series);
    if max > bound {
        return Err(Error::BoundViolated {
            observed: max,
            bound,
        });
    }
    Ok(series)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport {
    /// Sup of the Monge-Ampère density of the sum-form envelope (complex dimension 1 only).
    pub envelope_density_sup: Option<f64>,
    pub mu_eq_density_sup: f64,
    pub gradient_sups: Vec<f64>,
    pub laplacian_sups: Vec<f64>,
    pub ladder_increments: Vec<f64>,
    /// `max_j sup|Δφ_j^β|` per rung.
    pub laplacian_series: Vec<f64>,
    /// `(max, 2× early max)` of the Laplacian series.
    pub laplacian_bound: (f64, f64),
    /// Whether the Laplacian bound is asserted (smooth weights only).
    pub laplacian_asserted: bool,
    pub density_finite: bool,
}

impl RegularityReport {
    pub fn passed(&self) -> bool {
        let lap_ok = !self.laplacian_asserted || self.laplacian_bound.0 <= self.laplacian_bound.1;
        self.density_finite && lap_ok
    }
}

pub fn regularity_report(
    data: &ProblemData,
    result: &ExtremalResult,
    env: &EnvelopeOptions,
) -> Result<RegularityReport> {
    let envelope_density_sup = if data.grid().ndim() == 1 {
        let sol = match sum_form_envelope(data, env) {
            Ok(s) => s,
            Err(Error::EnvelopeNoConvergence { best, .. }) => *best,
            Err(e) => return Err(e),
        };
        Some(sol.density.sup())
    } else {
        None
    };
    let mu_sup = result.mu_eq.sup_density();
    let laplacian_series: Vec<f64> = result
        .ladder_history
        .iter()
        .map(|r| r.laplacian_sups.iter().copied().fold(0.0, f64::max))
        .collect();
    Ok(RegularityReport {
        envelope_density_sup,
        mu_eq_density_sup: mu_sup,
        gradient_sups: result
            .potentials
            .iter()
            .map(|p| p.gradient_norm().sup())
            .collect(),
        laplacian_sups: result
            .potentials
            .iter()
            .map(|p| p.laplacian().sup_norm())
            .collect(),
        ladder_increments: result
            .ladder_history
            .iter()
            .filter_map(|r| r.increment)
            .collect(),
        laplacian_bound: early_bound(&laplacian_series),
        laplacian_series,
        laplacian_asserted: data.weight().is_smooth(),
        density_finite: envelope_density_sup.is_none_or(f64::is_finite) && mu_sup.is_finite(),
    })
}
