use eqmeasure_core::energy::energy;
use eqmeasure_core::envelope::project_with;
use eqmeasure_core::grid::cosine;
use eqmeasure_core::verification::{
    big_f, concavity_test, differentiability_test, uniqueness_test,
};
use eqmeasure_core::{
    presets, BetaSchedule, EnvelopeOptions, Grid, LadderOptions, ProblemData, ScalarField, Weight,
};

fn preset(name: &str) -> ProblemData {
    presets::config(name).unwrap().problem().unwrap()
}

fn setup() -> (BetaSchedule, LadderOptions) {
    (BetaSchedule::default(), LadderOptions::default())
}

#[test]
fn single_form_value_is_the_envelope_energy() {
    let cfg = presets::config("envelope-cosine").unwrap();
    let data = cfg.problem_on(&Grid::new(1, 64).unwrap()).unwrap();
    let (s, o) = setup();
    let f = big_f(&data, &s, &o).unwrap();
    let env = project_with(&data.forms()[0], data.phi(), &EnvelopeOptions::default()).unwrap();
    let form = &data.forms()[0];
    let e = energy(form, &env.u).unwrap() / form.mass();
    assert!((f - e).abs() <= 5e-3, "{f} vs {e}");
}

#[test]
fn constant_direction_has_unit_slope() {
    let data = preset("mixed-m2");
    let (s, o) = setup();
    let one = ScalarField::constant(data.grid(), 1.0);
    let rep = differentiability_test(&data, &one, &[0.04, 0.02, 0.01], &s, &o).unwrap();
    assert!((rep.pairing - 1.0).abs() <= 1e-12);
    for slope in &rep.slopes {
        assert!((slope - 1.0).abs() <= 1e-10, "{slope}");
    }
    assert!(rep.passed);
}

#[test]
fn cosine_direction_matches_the_pairing() {
    let data = preset("mixed-m2");
    let (s, o) = setup();
    let v = cosine(data.grid(), &[1, 0]);
    let rep = differentiability_test(&data, &v, &[0.04, 0.02, 0.01], &s, &o).unwrap();
    assert!(rep.steps.windows(2).all(|w| w[0] > w[1]));
    for (g, t) in rep.gaps.iter().zip(&rep.steps) {
        assert!(*g <= rep.k_fit * t + 1e-4, "{rep:?}");
    }
    assert!(rep.passed);

    let neg = differentiability_test(&data, &v.scale(-1.0), &[0.04, 0.02, 0.01], &s, &o).unwrap();
    for (a, b) in rep.slopes.iter().zip(&neg.slopes) {
        assert!((a + b).abs() <= 2.0 * s.ladder_tol, "{a} {b}");
    }

    // identical inputs give identical reports
    let again = differentiability_test(&data, &v, &[0.04, 0.02, 0.01], &s, &o).unwrap();
    assert_eq!(again, rep);
}

#[test]
fn value_is_concave_between_cosine_weights() {
    let data = preset("mixed-m2");
    let other = preset("cosine-y").weight().clone();
    let (s, o) = setup();
    let rep = concavity_test(&data, &other, &[0.25, 0.5, 0.75], &s, &o).unwrap();
    assert!(rep.passed(), "{rep:?}");

    let same = concavity_test(&data, data.weight(), &[0.25, 0.5, 0.75], &s, &o).unwrap();
    for (v, c) in same.values.iter().zip(&same.chords) {
        assert!((v - c).abs() <= 1e-12);
    }
    let lifted = concavity_test(&data, &data.weight().shifted(0.2), &[0.5], &s, &o).unwrap();
    assert!(
        (lifted.values[0] - lifted.chords[0]).abs() <= 1e-10,
        "{lifted:?}"
    );
}

#[test]
fn value_is_monotone_in_the_weight() {
    let data = preset("mixed-m2");
    let (s, o) = setup();
    let g = data.grid();
    let bump = cosine(g, &[0, 1]).map(|c| 0.05 * (1.0 + c));
    let higher = data.with_weight(Weight::smooth(data.phi() + &bump));
    let lo = big_f(&data, &s, &o).unwrap();
    let hi = big_f(&higher, &s, &o).unwrap();
    assert!(lo <= hi + 1e-4, "{lo} > {hi}");
}

#[test]
fn mixed_limit_is_unique() {
    let data = preset("mixed-m2");
    let (s, o) = setup();
    let rep = uniqueness_test(&data, 5, &s, &o, 17).unwrap();
    assert_eq!(rep.seed, 17);
    assert!(rep.max_potential_distance <= 1e-4, "{rep:?}");
    assert!(rep.max_sum_distance <= 1e-4, "{rep:?}");
}
