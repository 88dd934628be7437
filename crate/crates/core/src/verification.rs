//! Checks of optimality, uniqueness, concavity and differentiability of the
//! extremal problem, built on top of the ladder solver.

use crate::beta::{solve_beta_with, sum_fields, BetaOptions, BetaStart};
use crate::continuation::{solve_extremal_with, BetaSchedule, ExtremalResult, LadderOptions};
use crate::energy::{admissible_step, f_phi_with, pairing};
use crate::error::Result;
use crate::grid::ScalarField;
use crate::problem::{ProblemData, Weight};
use crate::random::FieldSampler;

/// `F(φ) = sup f_φ`, evaluated at the ladder limit.
pub fn big_f(data: &ProblemData, schedule: &BetaSchedule, opts: &LadderOptions) -> Result<f64> {
    Ok(big_f_with_result(data, schedule, opts)?.0)
}

pub fn big_f_with_result(
    data: &ProblemData,
    schedule: &BetaSchedule,
    opts: &LadderOptions,
) -> Result<(f64, ExtremalResult)> {
    let result = solve_extremal_with(data, schedule, opts, None)?;
    let value = f_phi_with(&result.potentials, data, opts.prefactor)?;
    Ok((value, result))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeReport {
    pub direction: ScalarField,
    /// Strictly decreasing.
    pub steps: Vec<f64>,
    pub slopes: Vec<f64>,
    /// `∫ v dμ_eq`
    pub pairing: f64,
    /// `|slope − pairing|` per step.
    pub gaps: Vec<f64>,
    /// `K = max |gap|/t` over the two largest steps.
    pub k_fit: f64,
    /// Additive allowance in `|gap| ≤ K t + floor`.
    pub floor: f64,
    /// Gap extrapolated linearly to `t = 0` from the two smallest steps.
    pub extrapolated_error: f64,
    pub passed: bool,
}

/// Central differences of `F` along `v` against `∫ v dμ_eq`.
pub fn differentiability_test(
    data: &ProblemData,
    v: &ScalarField,
    steps: &[f64],
    schedule: &BetaSchedule,
    opts: &LadderOptions,
) -> Result<DerivativeReport> {
    differentiability_test_with_floor(data, v, steps, schedule, opts, 10.0 * schedule.ladder_tol)
}

pub fn differentiability_test_with_floor(
    data: &ProblemData,
    v: &ScalarField,
    steps: &[f64],
    schedule: &BetaSchedule,
    opts: &LadderOptions,
    floor: f64,
) -> Result<DerivativeReport> {
    let mut steps = steps.to_vec();
    steps.sort_by(|a, b| b.total_cmp(a));
    steps.dedup();
    let (_, base) = big_f_with_result(data, schedule, opts)?;
    let exact = pairing(v, &base.mu_eq);
    let mut slopes = Vec::with_capacity(steps.len());
    for &t in &steps {
        let plus = data.with_weight(data.weight().perturbed(v, t, true));
        let minus = data.with_weight(data.weight().perturbed(v, -t, true));
        let fp = big_f(&plus, schedule, opts)?;
        let fm = big_f(&minus, schedule, opts)?;
        slopes.push((fp - fm) / (2.0 * t));
    }
    let gaps: Vec<f64> = slopes.iter().map(|s| (s - exact).abs()).collect();
    let k_fit = gaps
        .iter()
        .zip(&steps)
        .take(2)
        .map(|(g, t)| g / t)
        .fold(0.0, f64::max);
    let passed = gaps
        .iter()
        .zip(&steps)
        .all(|(g, t)| *g <= k_fit * t + floor);
    let n = steps.len();
    let extrapolated_error = if n >= 2 {
        let (t1, t2) = (steps[n - 2], steps[n - 1]);
        let (g1, g2) = (slopes[n - 2] - exact, slopes[n - 1] - exact);
        (g2 - t2 * (g1 - g2) / (t1 - t2)).abs()
    } else {
        gaps.last().copied().unwrap_or(0.0)
    };
    Ok(DerivativeReport {
        direction: v.clone(),
        steps,
        slopes,
        pairing: exact,
        gaps,
        k_fit,
        floor,
        extrapolated_error,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcavityReport {
    pub ts: Vec<f64>,
    /// `F(tφ′ + (1−t)φ)`
    pub values: Vec<f64>,
    /// `t F(φ′) + (1−t) F(φ)`
    pub chords: Vec<f64>,
    pub endpoints: (f64, f64),
    pub tol: f64,
    pub violations: usize,
    /// Largest `chord − value`.
    pub max_violation: f64,
}

impl ConcavityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Compares `F` along the segment from `data`'s weight to `other` with its chord.
pub fn concavity_test(
    data: &ProblemData,
    other: &Weight,
    ts: &[f64],
    schedule: &BetaSchedule,
    opts: &LadderOptions,
) -> Result<ConcavityReport> {
    let tol = 1e-4;
    let f0 = big_f(data, schedule, opts)?;
    let f1 = big_f(&data.with_weight(other.clone()), schedule, opts)?;
    let mut report = ConcavityReport {
        ts: ts.to_vec(),
        values: Vec::new(),
        chords: Vec::new(),
        endpoints: (f0, f1),
        tol,
        violations: 0,
        max_violation: f64::NEG_INFINITY,
    };
    for &t in ts {
        let w = data.weight().interpolate(other, t);
        let value = big_f(&data.with_weight(w), schedule, opts)?;
        let chord = t * f1 + (1.0 - t) * f0;
        report.max_violation = report.max_violation.max(chord - value);
        if value < chord - tol {
            report.violations += 1;
        }
        report.values.push(value);
        report.chords.push(chord);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniquenessReport {
    pub n_starts: usize,
    pub seed: u64,
    /// `Some(β)` for the fixed-β variant.
    pub beta: Option<f64>,
    /// `max` over pairs and `j` of `sup|φ_j − φ_j′|`.
    pub max_potential_distance: f64,
    /// `max` over pairs of `sup|Σφ_j − Σφ_j′|`.
    pub max_sum_distance: f64,
}

/// Random band-limited admissible potentials, one per form.
pub fn random_initial_potentials(
    data: &ProblemData,
    sampler: &mut FieldSampler,
) -> Vec<ScalarField> {
    data.forms()
        .iter()
        .map(|form| {
            let v = sampler.band_limited(data.grid());
            let scale = sampler.uniform(0.2, 1.0);
            if data.grid().ndim() == 1 {
                let t = admissible_step(form, &ScalarField::zeros(data.grid()), &v, 0.5);
                v.scale(scale * t)
            } else {
                v.scale(scale * 1e-3)
            }
        })
        .collect()
}

fn pairwise(solutions: &[Vec<ScalarField>]) -> (f64, f64) {
    let sums: Vec<ScalarField> = solutions.iter().map(|p| sum_fields(p)).collect();
    let mut pot: f64 = 0.0;
    let mut sum: f64 = 0.0;
    for a in 0..solutions.len() {
        for b in a + 1..solutions.len() {
            for (x, y) in solutions[a].iter().zip(&solutions[b]) {
                pot = pot.max((x - y).sup_norm());
            }
            sum = sum.max((&sums[a] - &sums[b]).sup_norm());
        }
    }
    (pot, sum)
}

/// Ladders from `n_starts` random initializations.
pub fn uniqueness_test(
    data: &ProblemData,
    n_starts: usize,
    schedule: &BetaSchedule,
    opts: &LadderOptions,
    seed: u64,
) -> Result<UniquenessReport> {
    let mut sampler = FieldSampler::new(seed);
    let mut solutions = Vec::with_capacity(n_starts);
    for _ in 0..n_starts.max(2) {
        let init = random_initial_potentials(data, &mut sampler);
        solutions.push(solve_extremal_with(data, schedule, opts, Some(&init))?.potentials);
    }
    let (max_potential_distance, max_sum_distance) = pairwise(&solutions);
    Ok(UniquenessReport {
        n_starts: solutions.len(),
        seed,
        beta: None,
        max_potential_distance,
        max_sum_distance,
    })
}

/// Fixed-`β` solves from `n_starts` random initializations.
pub fn uniqueness_beta_test(
    data: &ProblemData,
    n_starts: usize,
    beta: f64,
    opts: &BetaOptions,
    seed: u64,
) -> Result<UniquenessReport> {
    let mut sampler = FieldSampler::new(seed);
    let mut solutions = Vec::with_capacity(n_starts);
    for _ in 0..n_starts.max(2) {
        let init = random_initial_potentials(data, &mut sampler);
        solutions.push(solve_beta_with(data, beta, BetaStart::Potentials(&init), opts)?.potentials);
    }
    let (max_potential_distance, max_sum_distance) = pairwise(&solutions);
    Ok(UniquenessReport {
        n_starts: solutions.len(),
        seed,
        beta: Some(beta),
        max_potential_distance,
        max_sum_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::problem::KahlerForm;

    fn flat_data(phi: ScalarField, m: usize) -> ProblemData {
        let g = phi.grid().clone();
        let form = KahlerForm::from_potential(1.0, &ScalarField::zeros(&g)).unwrap();
        ProblemData::new(vec![form; m], Weight::smooth(phi)).unwrap()
    }

    #[test]
    fn big_f_of_constants() {
        let g = Grid::new(1, 16).unwrap();
        let s = BetaSchedule::default();
        let o = LadderOptions::default();
        assert_eq!(
            big_f(&flat_data(ScalarField::zeros(&g), 2), &s, &o).unwrap(),
            0.0
        );
        let c = big_f(&flat_data(ScalarField::constant(&g, 0.37), 2), &s, &o).unwrap();
        assert!((c - 0.37).abs() < 1e-14);
    }

    #[test]
    fn trivial_uniqueness() {
        let g = Grid::new(1, 16).unwrap();
        let data = flat_data(ScalarField::zeros(&g), 2);
        let r = uniqueness_test(
            &data,
            5,
            &BetaSchedule::default(),
            &LadderOptions::default(),
            3,
        )
        .unwrap();
        assert!(r.max_potential_distance <= 1e-10);
        assert!(r.max_sum_distance <= 1e-10);
    }
}
