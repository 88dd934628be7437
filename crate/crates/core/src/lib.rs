//! Coupled extremal potentials and equilibrium measures for several Kähler
//! forms and a continuous weight on a flat torus.
//!
//! The hard constraint `Σφ_j ≤ φ` is replaced by the penalty density
//! `e^{β(Σφ_j − φ)}`; [`continuation::solve_extremal`] follows the solutions of
//! the regularized system as `β → ∞`. An independent obstacle-problem solver
//! ([`envelope::project`]) provides ground truth for a single form.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beta;
pub mod beta_nd;
pub mod continuation;
pub mod energy;
pub mod envelope;
pub mod error;
pub mod grid;
pub mod io;
mod krylov;
mod multigrid;
pub mod presets;
pub mod problem;
pub mod random;
pub mod verification;

pub use beta::{
    maximizer_check, solve_beta, solve_beta_with, BetaOptions, BetaSolution, BetaStart,
    Preconditioner,
};
pub use continuation::{
    check_conditions, regularity_report, solve_extremal, solve_extremal_with, sum_bound_monitor,
    BetaSchedule, ExtremalResult, LadderOptions,
};
pub use energy::{energy, f_phi, f_phi_beta, ma_measure, pairing, EnergyPrefactor, MeasureDensity};
pub use envelope::{contact_set, project, sum_form_envelope, EnvelopeOptions, EnvelopeSolution};
pub use error::{Error, Result};
pub use grid::{Grid, ScalarField};
pub use io::{
    dump_field, load_field, load_field_on, ConfigError, FieldIoError, RunConfig, Summary,
};
pub use problem::{validate, Hermitian2, KahlerForm, ProblemData, TrigTerm, Weight};
pub use random::FieldSampler;
