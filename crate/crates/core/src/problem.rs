//! Input data: Kähler forms, the continuous weight and the reference volume form.

use std::f64::consts::PI;
use std::fmt;

pub use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

/// One cosine term `amplitude · cos(2π k·x)`, with one wavenumber per real axis.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigTerm {
    pub k: Vec<i64>,
    pub amplitude: f64,
}

impl TrigTerm {
    pub fn new(k: &[i64], amplitude: f64) -> Self {
        Self {
            k: k.to_vec(),
            amplitude,
        }
    }
}

/// Evaluate a cosine polynomial on `grid`.
pub fn trig_field(grid: &Grid, terms: &[TrigTerm]) -> Result<ScalarField> {
    for t in terms {
        if t.k.len() != grid.axes() {
            return Err(Error::InvalidArgument(format!(
                "trig term has {} wavenumbers, grid has {} axes",
                t.k.len(),
                grid.axes()
            )));
        }
    }
    Ok(ScalarField::from_fn(grid, |p| {
        terms
            .iter()
            .map(|t| {
                let phase: f64 = p.iter().zip(&t.k).map(|(x, &k)| x * k as f64).sum();
                t.amplitude * (2.0 * PI * phase).cos()
            })
            .sum()
    }))
}

/// Constant Hermitian 2×2 matrix `[[a11, a12], [conj(a12), a22]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hermitian2 {
    pub a11: f64,
    pub a22: f64,
    pub a12: Complex64,
}

impl Hermitian2 {
    pub fn identity() -> Self {
        Self::new(1.0, 1.0, Complex64::new(0.0, 0.0))
    }

    pub fn new(a11: f64, a22: f64, a12: Complex64) -> Self {
        Self { a11, a22, a12 }
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12.norm_sqr()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let half_tr = 0.5 * (self.a11 + self.a22);
        let half_diff = 0.5 * (self.a11 - self.a22);
        half_tr - (half_diff * half_diff + self.a12.norm_sqr()).sqrt()
    }

    pub fn inverse(&self) -> Self {
        let d = self.det();
        Self::new(self.a22 / d, self.a11 / d, -self.a12 / d)
    }
}

/// A Kähler form on the flat torus, represented by its volume density with
/// respect to `ω_0^n`. Forms in complex dimension 2 also carry their constant
/// Hermitian metric.
#[derive(Clone, Debug, PartialEq)]
pub struct KahlerForm {
    density: ScalarField,
    mass: f64,
    metric: Option<Hermitian2>,
}

impl KahlerForm {
    /// `θ = c·ω_0 + dd^c ψ` in complex dimension 1, density `c + Δψ`.
    pub fn from_potential(c: f64, psi: &ScalarField) -> Result<Self> {
        if psi.grid().ndim() != 1 {
            return Err(Error::Unsupported("form_from_potential", 1));
        }
        if c <= 0.0 {
            return Err(Error::NotPositive { min: c });
        }
        let density = psi.laplacian().shift(c);
        let min = density.inf();
        if min <= 0.0 {
            return Err(Error::NotPositive { min });
        }
        Ok(Self {
            density,
            mass: c,
            metric: None,
        })
    }

    /// Form with the given density; the mass is its integral.
    pub fn from_density(density: ScalarField) -> Result<Self> {
        let min = density.inf();
        if min <= 0.0 {
            return Err(Error::NotPositive { min });
        }
        Ok(Self::unchecked(density))
    }

    /// Skips the positivity check; run [`validate`] before solving with it.
    pub fn unchecked(density: ScalarField) -> Self {
        let mass = density.integrate();
        Self {
            density,
            mass,
            metric: None,
        }
    }

    /// Constant form `i Σ g_ab dz_a ∧ dz̄_b` in complex dimension 2.
    pub fn from_metric(grid: &Grid, metric: Hermitian2) -> Result<Self> {
        if grid.ndim() != 2 {
            return Err(Error::Unsupported("form_from_metric", 2));
        }
        if metric.min_eigenvalue() <= 0.0 {
            return Err(Error::NotPositive {
                min: metric.min_eigenvalue(),
            });
        }
        let det = metric.det();
        Ok(Self {
            density: ScalarField::constant(grid, det),
            mass: det,
            metric: Some(metric),
        })
    }

    pub fn density(&self) -> &ScalarField {
        &self.density
    }

    /// `V = ∫ θ^n`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn metric(&self) -> Option<&Hermitian2> {
        self.metric.as_ref()
    }

    pub fn grid(&self) -> &Grid {
        self.density.grid()
    }

    /// Sum of forms: densities and masses add (complex dimension 1).
    pub fn sum(forms: &[KahlerForm]) -> Result<KahlerForm> {
        let first = forms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty form list".into()))?;
        if first.grid().ndim() != 1 {
            return Err(Error::Unsupported("sum of forms", 1));
        }
        let mut density = first.density.clone();
        let mut mass = first.mass;
        for f in &forms[1..] {
            if !f.density.same_grid(&density) {
                return Err(Error::GridMismatch("forms live on different grids".into()));
            }
            density = &density + &f.density;
            mass += f.mass;
        }
        Ok(Self {
            density,
            mass,
            metric: None,
        })
    }
}

/// The continuous weight `φ`. `smooth` marks band-limited weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    field: ScalarField,
    smooth: bool,
}

impl Weight {
    pub fn smooth(field: ScalarField) -> Self {
        Self {
            field,
            smooth: true,
        }
    }

    pub fn continuous(field: ScalarField) -> Self {
        Self {
            field,
            smooth: false,
        }
    }

    pub fn from_trig(grid: &Grid, terms: &[TrigTerm]) -> Result<Self> {
        Ok(Self::smooth(trig_field(grid, terms)?))
    }

    /// Pointwise maximum of several cosine polynomials: continuous, not smooth.
    pub fn max_of_trig(grid: &Grid, components: &[Vec<TrigTerm>]) -> Result<Self> {
        let mut iter = components.iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::InvalidArgument("max_of_trig needs components".into()))?;
        let mut field = trig_field(grid, first)?;
        for c in iter {
            field = field.max(&trig_field(grid, c)?);
        }
        Ok(Self::continuous(field))
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            field: self.field.shift(c),
            smooth: self.smooth,
        }
    }

    /// `φ + t v`; smoothness is kept only if the direction is declared smooth.
    pub fn perturbed(&self, direction: &ScalarField, t: f64, direction_smooth: bool) -> Self {
        Self {
            field: &self.field + &direction.scale(t),
            smooth: self.smooth && direction_smooth,
        }
    }

    /// `t·other + (1−t)·self`.
    pub fn interpolate(&self, other: &Weight, t: f64) -> Self {
        Self {
            field: self
                .field
                .zip_map(&other.field, |a, b| t * b + (1.0 - t) * a),
            smooth: self.smooth && other.smooth,
        }
    }
}

/// A single invariant failure found by [`validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// The tuple `(θ_1, …, θ_m, φ, ω_0)` on a common grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemData {
    forms: Vec<KahlerForm>,
    weight: Weight,
    reference: ScalarField,
}

impl ProblemData {
    /// Builds and validates; any violation is returned as an error.
    pub fn new(forms: Vec<KahlerForm>, weight: Weight) -> Result<Self> {
        let data = Self::assemble(forms, weight);
        let report = validate(&data);
        if report.is_empty() {
            Ok(data)
        } else {
            let msg: Vec<String> = report.iter().map(ToString::to_string).collect();
            Err(Error::InvalidArgument(msg.join("; ")))
        }
    }

    /// Builds without checking invariants.
    pub fn assemble(forms: Vec<KahlerForm>, weight: Weight) -> Self {
        let reference = ScalarField::constant(weight.field().grid(), 1.0);
        Self {
            forms,
            weight,
            reference,
        }
    }

    pub fn forms(&self) -> &[KahlerForm] {
        &self.forms
    }

    pub fn m(&self) -> usize {
        self.forms.len()
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn phi(&self) -> &ScalarField {
        self.weight.field()
    }

    pub fn reference(&self) -> &ScalarField {
        &self.reference
    }

    pub fn grid(&self) -> &Grid {
        self.weight.field().grid()
    }

    pub fn total_mass(&self) -> f64 {
        self.forms.iter().map(KahlerForm::mass).sum()
    }

    pub fn with_weight(&self, weight: Weight) -> Self {
        Self {
            forms: self.forms.clone(),
            reference: ScalarField::constant(weight.field().grid(), 1.0),
            weight,
        }
    }
}

/// Largest spectral amplitude at or above `N/4` in any axis, relative to the
/// largest amplitude overall.
fn high_frequency_fraction(field: &ScalarField) -> f64 {
    let grid = field.grid();
    let spec = grid.forward(field.values());
    let mut idx = vec![0; grid.axes()];
    let mut high: f64 = 0.0;
    let mut total: f64 = 0.0;
    let cutoff = (grid.resolution() / 4) as u64;
    for (i, c) in spec.iter().enumerate() {
        grid.multi_index(i, &mut idx);
        let a = c.norm();
        total = total.max(a);
        if idx
            .iter()
            .any(|&j| grid.wavenumber(j).unsigned_abs() >= cutoff)
        {
            high = high.max(a);
        }
    }
    if total == 0.0 {
        0.0
    } else {
        high / total
    }
}

/// Checks every invariant of the input tuple. An empty report means valid.
pub fn validate(data: &ProblemData) -> Vec<Violation> {
    let mut report = Vec::new();
    let grid = data.grid();
    if data.forms.is_empty() {
        report.push(Violation {
            subject: "forms".into(),
            message: "at least one form is required".into(),
        });
    }
    for (j, form) in data.forms.iter().enumerate() {
        let subject = format!("form {}", j + 1);
        if form.grid() != grid {
            report.push(Violation {
                subject,
                message: format!("grid mismatch: {:?} vs weight grid {:?}", form.grid(), grid),
            });
            continue;
        }
        let min_idx = form.density.argmin();
        let min = form.density.values()[min_idx];
        if min <= 0.0 {
            report.push(Violation {
                subject: subject.clone(),
                message: format!("density not positive (min {min:e} at index {min_idx})"),
            });
        }
        if form.mass <= 0.0 {
            report.push(Violation {
                subject: subject.clone(),
                message: format!("mass {} not positive", form.mass),
            });
        }
        let integral = form.density.integrate();
        if (integral - form.mass).abs() > 1e-12 * form.mass.abs().max(1.0) {
            report.push(Violation {
                subject: subject.clone(),
                message: format!("cached mass {} differs from ∫ρ = {}", form.mass, integral),
            });
        }
        if grid.ndim() == 2 && form.metric.is_none() {
            report.push(Violation {
                subject,
                message: "complex dimension 2 requires a constant metric".into(),
            });
        }
    }
    if data.weight.smooth {
        let frac = high_frequency_fraction(data.weight.field());
        if frac > 1e-10 {
            report.push(Violation {
                subject: "weight".into(),
                message: format!(
                    "declared smooth but has spectral content at or above N/4 (relative {frac:e})"
                ),
            });
        }
    }
    if data.reference.grid() != grid {
        report.push(Violation {
            subject: "reference".into(),
            message: "grid mismatch".into(),
        });
    } else if (data.reference.integrate() - 1.0).abs() > 1e-14 {
        report.push(Violation {
            subject: "reference".into(),
            message: "reference volume is not one".into(),
        });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::cosine;

    fn grid() -> Grid {
        Grid::new(1, 32).unwrap()
    }

    #[test]
    fn form_from_potential_examples() {
        let g = grid();
        let flat = KahlerForm::from_potential(1.0, &ScalarField::zeros(&g)).unwrap();
        assert_eq!(flat.density(), &ScalarField::constant(&g, 1.0));
        assert_eq!(flat.mass(), 1.0);

        let psi = cosine(&g, &[0, 1]).scale(0.001);
        let bumped = KahlerForm::from_potential(1.0, &psi).unwrap();
        let expected =
            ScalarField::from_fn(&g, |p| 1.0 - 0.004 * PI * PI * (2.0 * PI * p[1]).cos());
        assert!((bumped.density() - &expected).sup_norm() < 1e-12);
        assert_eq!(bumped.mass(), 1.0);
        assert!((bumped.density().integrate() - 1.0).abs() < 1e-14);

        let err = KahlerForm::from_potential(1.0, &cosine(&g, &[0, 1]));
        assert!(matches!(err, Err(Error::NotPositive { .. })));
    }

    #[test]
    fn validate_examples() {
        let g = grid();
        let flat = KahlerForm::from_potential(1.0, &ScalarField::zeros(&g)).unwrap();
        let data = ProblemData::new(
            vec![flat.clone(), flat.clone()],
            Weight::smooth(ScalarField::zeros(&g)),
        )
        .unwrap();
        assert!(validate(&data).is_empty());

        let mut v = vec![1.0; g.len()];
        v[17] = -0.5;
        let bad = KahlerForm::unchecked(ScalarField::new(&g, v).unwrap());
        let data = ProblemData::assemble(
            vec![flat.clone(), bad],
            Weight::smooth(ScalarField::zeros(&g)),
        );
        let report = validate(&data);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].subject, "form 2");

        let other = Grid::new(1, 16).unwrap();
        let off = KahlerForm::from_potential(1.0, &ScalarField::zeros(&other)).unwrap();
        let data = ProblemData::assemble(vec![flat, off], Weight::smooth(ScalarField::zeros(&g)));
        let report = validate(&data);
        assert_eq!(report.len(), 1);
        assert!(report[0].message.contains("grid mismatch"));
    }

    #[test]
    fn smooth_flag_is_checked() {
        let g = grid();
        let flat = KahlerForm::from_potential(1.0, &ScalarField::zeros(&g)).unwrap();
        let rough = cosine(&g, &[9, 0]);
        let data = ProblemData::assemble(vec![flat.clone()], Weight::smooth(rough.clone()));
        assert_eq!(validate(&data).len(), 1);
        let data = ProblemData::assemble(vec![flat], Weight::continuous(rough));
        assert!(validate(&data).is_empty());
    }

    #[test]
    fn metric_forms() {
        let g = Grid::new(2, 8).unwrap();
        let m = Hermitian2::new(2.0, 1.0, Complex64::new(0.5, 0.5));
        let f = KahlerForm::from_metric(&g, m).unwrap();
        assert!((f.mass() - 1.5).abs() < 1e-15);
        let bad = Hermitian2::new(1.0, 1.0, Complex64::new(1.0, 0.5));
        assert!(KahlerForm::from_metric(&g, bad).is_err());
        let inv = m.inverse();
        assert!((inv.det() * m.det() - 1.0).abs() < 1e-14);
    }
}
