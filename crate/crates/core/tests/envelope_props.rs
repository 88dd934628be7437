use eqmeasure_core::envelope::{
    contact_set, project_with, sum_form_envelope, EnvelopeOptions, KAPPA,
};
use eqmeasure_core::grid::cosine;
use eqmeasure_core::{FieldSampler, Grid, KahlerForm, ProblemData, ScalarField, Weight};

const TOL: f64 = 1e-8;

fn opts() -> EnvelopeOptions {
    EnvelopeOptions {
        tol: TOL,
        ..EnvelopeOptions::default()
    }
}

fn flat(g: &Grid) -> KahlerForm {
    KahlerForm::from_potential(1.0, &ScalarField::zeros(g)).unwrap()
}

fn bumped(g: &Grid) -> KahlerForm {
    KahlerForm::from_potential(1.0, &cosine(g, &[1, 1]).scale(0.01)).unwrap()
}

fn obstacle(g: &Grid, sampler: &mut FieldSampler) -> ScalarField {
    sampler.band_limited(g).scale(0.3)
}

#[test]
fn monotone_in_the_obstacle() {
    let g = Grid::new(1, 32).unwrap();
    let form = bumped(&g);
    let mut sampler = FieldSampler::new(21);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let phi = obstacle(&g, &mut sampler);
        let bump = sampler.band_limited(&g).map(|v| 0.05 * (v + 1.0));
        let higher = &phi + &bump;
        let a = project_with(&form, &phi, &opts()).unwrap();
        let b = project_with(&form, &higher, &opts()).unwrap();
        worst = worst.max((&a.u - &b.u).sup());
    }
    println!("monotonicity worst {worst:e}");
    assert!(worst <= TOL, "worst {worst:e}");
}

#[test]
fn idempotent() {
    let g = Grid::new(1, 32).unwrap();
    let form = bumped(&g);
    let mut sampler = FieldSampler::new(5);
    for _ in 0..3 {
        let phi = obstacle(&g, &mut sampler);
        let once = project_with(&form, &phi, &opts()).unwrap();
        let twice = project_with(&form, &once.u, &opts()).unwrap();
        let d = (&once.u - &twice.u).sup_norm();
        assert!(d <= TOL, "{d:e}");
    }
}

#[test]
fn measure_lives_on_contact_set() {
    let g = Grid::new(1, 64).unwrap();
    let form = flat(&g);
    let mut sampler = FieldSampler::new(9);
    for _ in 0..3 {
        let phi = obstacle(&g, &mut sampler);
        let sol = project_with(&form, &phi, &opts()).unwrap();
        let weak = (&phi - &sol.u).dot(&sol.density);
        assert!(weak <= KAPPA * TOL * form.mass(), "{weak:e}");
    }
}

#[test]
fn dominates_admissible_competitors() {
    let g = Grid::new(1, 32).unwrap();
    let form = bumped(&g);
    let mut sampler = FieldSampler::new(77);
    let phi = obstacle(&g, &mut sampler);
    let u = project_with(&form, &phi, &opts()).unwrap().u;
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..20 {
        let r = obstacle(&g, &mut sampler);
        let psi = project_with(&form, &r, &opts()).unwrap().u;
        let psi = psi.shift(-(&psi - &phi).sup());
        worst = worst.max((&psi - &u).sup());
    }
    println!("domination worst {worst:e}");
    assert!(worst <= TOL, "{worst:e}");
}

#[test]
fn sum_form_envelope_of_two_flat_forms() {
    let g = Grid::new(1, 32).unwrap();
    let zero = ProblemData::new(
        vec![flat(&g), flat(&g)],
        Weight::smooth(ScalarField::zeros(&g)),
    )
    .unwrap();
    let sol = sum_form_envelope(&zero, &opts()).unwrap();
    for d in sol.density.values() {
        assert!((d - 2.0).abs() <= 1e-10, "{d}");
    }

    let data = ProblemData::new(
        vec![flat(&g), flat(&g)],
        Weight::smooth(cosine(&g, &[1, 0]).scale(0.5)),
    )
    .unwrap();
    let sol = sum_form_envelope(&data, &opts()).unwrap();
    assert!((sol.density.integrate() - 2.0).abs() <= 1e-12);
    assert!(sol.density.sup().is_finite());
    assert!(sol.residuals.max() <= KAPPA * TOL);
}

#[test]
fn contact_set_of_the_cosine_obstacle() {
    let g = Grid::new(1, 64).unwrap();
    let phi = cosine(&g, &[1, 0]).scale(0.5);
    let sol = project_with(&flat(&g), &phi, &opts()).unwrap();
    let mask = contact_set(&sol, KAPPA);
    assert_eq!(mask, sol.contact_mask);
    // contact around the minimum of the obstacle, nowhere near its maximum
    let coords = |i: usize| g.coords(i)[0];
    for (i, &m) in mask.iter().enumerate() {
        if m {
            assert!(
                (coords(i) - 0.5).abs() < 0.1,
                "contact at x = {}",
                coords(i)
            );
        }
    }
    assert!(mask.iter().any(|&m| m));
}
