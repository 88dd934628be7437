//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use eqmeasure_core::continuation::early_bound;
use eqmeasure_core::energy::{admissible_step, energy, ma_measure};
use eqmeasure_core::envelope::project_with;
use eqmeasure_core::grid::cosine;
use eqmeasure_core::problem::Complex64;
use eqmeasure_core::verification::{
    big_f_with_result, concavity_test, differentiability_test, uniqueness_beta_test,
    uniqueness_test,
};
use eqmeasure_core::{
    check_conditions, presets, solve_extremal, solve_extremal_with, BetaOptions, BetaSchedule,
    EnvelopeOptions, FieldSampler, Grid, Hermitian2, KahlerForm, LadderOptions, ProblemData,
    ScalarField,
};

type Outcome = (bool, String);

fn preset(name: &str) -> ProblemData {
    presets::config(name).unwrap().problem().unwrap()
}

fn cosine_preset(n: usize) -> ProblemData {
    let grid = Grid::new(1, n).unwrap();
    presets::config("envelope-cosine")
        .unwrap()
        .problem_on(&grid)
        .unwrap()
}

/// `sup|φ_1′ − 𝒫(φ)|` and the value gap, both on the grid of resolution `n`.
fn oracle_gap(n: usize) -> (f64, f64) {
    let data = cosine_preset(n);
    let (f, res) =
        big_f_with_result(&data, &BetaSchedule::default(), &LadderOptions::default()).unwrap();
    let form = &data.forms()[0];
    let env = project_with(form, data.phi(), &EnvelopeOptions::default()).unwrap();
    let e = energy(form, &env.u).unwrap() / form.mass();
    ((&res.potentials[0] - &env.u).sup_norm(), (f - e).abs())
}

fn trivial_exactness() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for m in 1..=3 {
        let data = preset(&format!("trivial-m{m}"));
        let start = Instant::now();
        let res = solve_extremal(&data, &BetaSchedule::default(), 1e-10).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let pot = res
            .potentials
            .iter()
            .map(ScalarField::sup_norm)
            .fold(0.0, f64::max);
        let mu = res.mu_eq.density().map(|d| d - 1.0).sup_norm();
        let c = check_conditions(&res, &data, 1e-10).unwrap();
        let resid = c.measure_equality.max(c.admissibility).max(c.support.abs());
        let good = pot == 0.0 && mu <= 1e-10 && resid <= 1e-10 && secs < 1.0;
        ok &= good;
        notes.push(format!(
            "m={m}: |φ|={pot:e} |μ−1|={mu:e} residual={resid:e} {secs:.2}s"
        ));
    }
    (ok, notes.join("; "))
}

fn oracle_agreement() -> Outcome {
    let start = Instant::now();
    let (pot, value) = oracle_gap(128);
    let secs = start.elapsed().as_secs_f64();
    (
        pot <= 5e-3 && value <= 5e-3 && secs < 30.0,
        format!("sup|φ_1 − P(φ)|={pot:.3e} |F − E(P)/V|={value:.3e} {secs:.1}s"),
    )
}

fn defining_residuals() -> Outcome {
    let data = preset("mixed-m2");
    let start = Instant::now();
    let res = solve_extremal(&data, &BetaSchedule::default(), 1e-10).unwrap();
    let c = check_conditions(&res, &data, 1e-3).unwrap();
    let secs = start.elapsed().as_secs_f64();
    (
        c.passed() && secs < 60.0,
        format!(
            "measure equality {:.3e}, admissibility {:.3e}, support {:.3e}, {secs:.1}s",
            c.measure_equality, c.admissibility, c.support
        ),
    )
}

fn uniqueness() -> Outcome {
    let data = preset("mixed-m2");
    let ladder = uniqueness_test(
        &data,
        5,
        &BetaSchedule::default(),
        &LadderOptions::default(),
        2024,
    )
    .unwrap();
    let opts = BetaOptions::default();
    let fixed = uniqueness_beta_test(&data, 5, 100.0, &opts, 2024).unwrap();
    let ladder_d = ladder.max_potential_distance.max(ladder.max_sum_distance);
    let fixed_d = fixed.max_potential_distance.max(fixed.max_sum_distance);
    (
        ladder_d <= 1e-4 && fixed_d <= 100.0 * opts.tol,
        format!(
            "ladder {ladder_d:.3e} (≤ 1e-4), β=100 {fixed_d:.3e} (≤ {:.0e})",
            100.0 * opts.tol
        ),
    )
}

/// The presets with smooth weights, and their ladders.
fn smooth_ladders() -> Vec<(&'static str, eqmeasure_core::ExtremalResult)> {
    presets::names()
        .filter_map(|name| {
            let cfg = presets::config(name).unwrap();
            let data = cfg.problem().unwrap();
            if !data.weight().is_smooth() {
                return None;
            }
            let res =
                solve_extremal_with(&data, &cfg.schedule, &cfg.ladder_options(), None).unwrap();
            Some((name, res))
        })
        .collect()
}

fn bounded(
    label: &str,
    ladders: &[(&str, eqmeasure_core::ExtremalResult)],
    series: impl Fn(&eqmeasure_core::continuation::RungRecord) -> f64,
) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, res) in ladders {
        let s: Vec<f64> = res.ladder_history.iter().map(&series).collect();
        let (max, bound) = early_bound(&s);
        let good = max <= bound;
        ok &= good;
        if !good || max > 0.0 {
            notes.push(format!(
                "{name}: {label} max {max:.3e} vs bound {bound:.3e}"
            ));
        }
    }
    (ok, notes.join("; "))
}

fn derivative() -> Outcome {
    let data = preset("mixed-m2");
    let s = BetaSchedule::default();
    let o = LadderOptions::default();
    let steps = [0.04, 0.02, 0.01];
    let one = differentiability_test(
        &data,
        &ScalarField::constant(data.grid(), 1.0),
        &steps,
        &s,
        &o,
    )
    .unwrap();
    let unit = one
        .slopes
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    let cos = differentiability_test(&data, &cosine(data.grid(), &[1, 0]), &steps, &s, &o).unwrap();
    let within = cos
        .gaps
        .iter()
        .zip(&cos.steps)
        .all(|(g, t)| *g <= cos.k_fit * t + 1e-4);
    (
        unit <= 1e-10 && within,
        format!(
            "v=1: max|slope−1|={unit:.1e}; v=cos: gaps {:?} K={:.3e} pairing {:.6e}",
            cos.gaps
                .iter()
                .map(|g| format!("{g:.2e}"))
                .collect::<Vec<_>>(),
            cos.k_fit,
            cos.pairing
        ),
    )
}

fn concavity() -> Outcome {
    let data = preset("mixed-m2");
    let other = preset("cosine-y").weight().clone();
    let rep = concavity_test(
        &data,
        &other,
        &[0.25, 0.5, 0.75],
        &BetaSchedule::default(),
        &LadderOptions::default(),
    )
    .unwrap();
    (
        rep.passed(),
        format!(
            "{} violations, max chord excess {:.3e}",
            rep.violations, rep.max_violation
        ),
    )
}

fn energy_and_mass() -> Outcome {
    let mut sampler = FieldSampler::new(99);
    let mut ok = true;
    let mut worst_mass: f64 = 0.0;
    let mut worst_one_dim: f64 = 0.0;
    // complex dimension 1: the energy is quadratic, central differences are exact
    let g1 = Grid::new(1, 64).unwrap();
    let form = KahlerForm::from_potential(1.0, &cosine(&g1, &[1, 2]).scale(0.004)).unwrap();
    for _ in 0..10 {
        let v = sampler.band_limited(&g1);
        let phi = v.scale(admissible_step(&form, &ScalarField::zeros(&g1), &v, 0.5) * 0.5);
        let w = sampler.band_limited(&g1);
        let t = 0.5
            * admissible_step(&form, &phi, &w, 0.5).min(admissible_step(
                &form,
                &phi,
                &w.scale(-1.0),
                0.5,
            ));
        let mu = ma_measure(&form, &phi).unwrap();
        worst_mass = worst_mass.max((mu.mass() - form.mass()).abs() / form.mass());
        let slope = (energy(&form, &(&phi + &w.scale(t))).unwrap()
            - energy(&form, &(&phi - &w.scale(t))).unwrap())
            / (2.0 * t);
        let want = eqmeasure_core::pairing(&w, &mu);
        worst_one_dim = worst_one_dim.max((slope - want).abs());
    }
    ok &= worst_one_dim <= 1e-10 && worst_mass <= 1e-14;

    // complex dimension 2: the energy is cubic, the gap must shrink like t²
    let g2 = Grid::new(2, 8).unwrap();
    let form2 =
        KahlerForm::from_metric(&g2, Hermitian2::new(1.5, 1.0, Complex64::new(0.2, -0.1))).unwrap();
    let phi2 = sampler.band_limited_with(&g2, 1).scale(1e-3);
    let w2 = sampler.band_limited_with(&g2, 1).scale(1e-2);
    let mu2 = ma_measure(&form2, &phi2).unwrap();
    worst_mass = worst_mass.max((mu2.mass() - form2.mass()).abs() / form2.mass());
    let want2 = eqmeasure_core::pairing(&w2, &mu2);
    let gap = |t: f64| {
        let ep = energy(&form2, &(&phi2 + &w2.scale(t))).unwrap();
        let em = energy(&form2, &(&phi2 - &w2.scale(t))).unwrap();
        ((ep - em) / (2.0 * t) - want2).abs()
    };
    let (g_a, g_b) = (gap(0.2), gap(0.1));
    let ratio = g_a / g_b;
    ok &= (3.5..=4.5).contains(&ratio) && worst_mass <= 1e-14;
    (
        ok,
        format!("dim 1 gap {worst_one_dim:.1e}; dim 2 gaps {g_a:.2e}, {g_b:.2e} (ratio {ratio:.2}); mass error {worst_mass:.1e}"),
    )
}

fn refinement() -> Outcome {
    let errs: Vec<f64> = [32, 64, 128].iter().map(|&n| oracle_gap(n).0).collect();
    (
        errs.windows(2).all(|w| w[1] < w[0]),
        format!(
            "N=32,64,128: {:.4e}, {:.4e}, {:.4e}",
            errs[0], errs[1], errs[2]
        ),
    )
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let (ok, detail) = match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!(
        "criterion {n:>2} {verdict} {name} [{:.1}s]: {detail}",
        start.elapsed().as_secs_f64()
    );
    ok
}

fn main() -> ExitCode {
    let mut all = true;
    all &= run(1, "trivial exactness", trivial_exactness);
    all &= run(2, "single-form oracle agreement", oracle_agreement);
    all &= run(3, "defining residuals", defining_residuals);
    all &= run(4, "uniqueness", uniqueness);
    let ladders = smooth_ladders();
    all &= run(5, "sum bound", || {
        bounded("β·sup gap", &ladders, |r| r.sum_bound)
    });
    all &= run(6, "laplacian bound", || {
        bounded("sup|Δφ_j|", &ladders, |r| {
            r.laplacian_sups.iter().copied().fold(0.0, f64::max)
        })
    });
    all &= run(7, "gateaux derivative", derivative);
    all &= run(8, "concavity", concavity);
    all &= run(9, "energy derivative and mass", energy_and_mass);
    all &= run(10, "refinement sweep", refinement);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
