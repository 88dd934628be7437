use std::fmt::Display;
use std::path::{Path, PathBuf};

use eqmeasure_core::beta::field_residual;
use eqmeasure_core::beta_nd::nd_residual;
use eqmeasure_core::continuation::early_bound;
use eqmeasure_core::envelope::{project_with, KAPPA};
use eqmeasure_core::io::mask_field;
use eqmeasure_core::problem::trig_field;
use eqmeasure_core::verification::{differentiability_test, uniqueness_beta_test, uniqueness_test};
use eqmeasure_core::{
    check_conditions, dump_field, maximizer_check, regularity_report, solve_beta_with,
    solve_extremal_with, sum_form_envelope, BetaSolution, BetaStart, ConfigError, Error,
    ExtremalResult, Grid, ProblemData, RunConfig, ScalarField, Summary,
};
use rayon::prelude::*;

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
}

pub enum Failure {
    Config(ConfigError),
    Io(String),
    Solver(Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

type CmdResult = Result<(), Failure>;

impl Context {
    pub fn summary(&self, command: &str) -> Summary {
        let mut s = Summary::new(command, &self.config);
        s.seed = Some(self.seed);
        s
    }

    fn data(&self) -> Result<ProblemData, Failure> {
        Ok(self.config.problem()?)
    }
}

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

fn list<T: Display>(v: &[T]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn sci_list(v: &[f64]) -> String {
    v.iter().map(|x| sci(*x)).collect::<Vec<_>>().join(",")
}

fn dump(dir: &Path, name: &str, f: &ScalarField) -> CmdResult {
    let path = dir.join(name);
    dump_field(f, &path).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn dump_potentials(dir: &Path, prefix: &str, potentials: &[ScalarField]) -> CmdResult {
    for (j, p) in potentials.iter().enumerate() {
        dump(dir, &format!("{prefix}phi_{}.csv", j + 1), p)?;
    }
    Ok(())
}

fn ladder_table(summary: &mut Summary, res: &ExtremalResult) {
    let m = res.potentials.len();
    summary.ladder_header = [
        "beta",
        "residual",
        "newton_iters",
        "sup_gap",
        "sum_bound",
        "increment",
    ]
    .iter()
    .map(ToString::to_string)
    .chain((1..=m).map(|j| format!("energy_{j}")))
    .chain(["f_beta".to_string(), "max_laplacian".to_string()])
    .collect();
    summary.ladder_rows = res
        .ladder_history
        .iter()
        .map(|r| {
            let mut row = vec![
                sci(r.beta),
                sci(r.residual),
                r.newton_iters.to_string(),
                sci(r.sup_gap),
                sci(r.sum_bound),
                r.increment.map(sci).unwrap_or_else(|| "-".into()),
            ];
            row.extend(r.energies.iter().map(|e| sci(*e)));
            row.push(sci(r.f_value));
            row.push(sci(r.laplacian_sups.iter().copied().fold(0.0, f64::max)));
            row
        })
        .collect();
}

fn ladder(ctx: &Context, data: &ProblemData) -> Result<ExtremalResult, Failure> {
    let cfg = &ctx.config;
    Ok(solve_extremal_with(
        data,
        &cfg.schedule,
        &cfg.ladder_options(),
        None,
    )?)
}

fn record_conditions(
    ctx: &Context,
    summary: &mut Summary,
    data: &ProblemData,
    res: &ExtremalResult,
) -> CmdResult {
    let tol = ctx.config.checks.tol;
    let c = check_conditions(res, data, tol)?;
    summary.value("beta_final", sci(res.beta_final));
    summary.value("converged", res.converged);
    summary.value("failed_rungs", sci_list(&res.failed_rungs));
    summary.value("residual_measure_equality", sci(c.measure_equality));
    summary.value("residual_admissibility", sci(c.admissibility));
    summary.value("residual_support", sci(c.support));
    summary.value("mu_eq_mass", format!("{:.16e}", res.mu_eq.mass()));
    summary.value("mu_eq_density_sup", sci(res.mu_eq.sup_density()));
    summary.assert(
        "defining_conditions",
        c.passed(),
        format!("all residuals within {tol:e}"),
    );
    let mass_err = (res.mu_eq.mass() - 1.0).abs();
    summary.assert(
        "mu_eq_probability",
        mass_err <= 1e-10,
        format!("|mass - 1| = {mass_err:e}"),
    );
    Ok(())
}

pub fn solve(ctx: &Context, summary: &mut Summary) -> CmdResult {
    let data = ctx.data()?;
    let res = ladder(ctx, &data)?;
    ladder_table(summary, &res);
    record_conditions(ctx, summary, &data, &res)?;
    if ctx.config.outputs.dump_fields {
        dump_potentials(&ctx.out, "", &res.potentials)?;
        dump(&ctx.out, "mu_eq.csv", res.mu_eq.density())?;
    }
    for (k, pots) in res.rung_potentials.iter().enumerate() {
        dump_potentials(&ctx.out, &format!("rung_{k:02}_"), pots)?;
    }
    Ok(())
}

fn residual_of(data: &ProblemData, sol: &BetaSolution) -> f64 {
    if data.grid().ndim() == 1 {
        field_residual(data, sol.beta, &sol.potentials)
    } else {
        nd_residual(data, sol.beta, &sol.potentials)
    }
}

pub fn solve_beta(ctx: &Context, summary: &mut Summary, beta: Option<f64>) -> CmdResult {
    let data = ctx.data()?;
    let beta = beta.unwrap_or(ctx.config.solver.beta);
    let sol = solve_beta_with(&data, beta, BetaStart::Zero, &ctx.config.beta_options())?;
    let residual = residual_of(&data, &sol);
    let gap = &sol.potential_sum() - data.phi();
    let mass = gap.map(|v| (beta * v).exp()).integrate();
    summary.value("beta", sci(beta));
    summary.value("residual_sup", sci(sol.residual_sup));
    summary.value("residual_recomputed", sci(residual));
    summary.value("tol_effective", sci(sol.tol_effective));
    summary.value("newton_iters", sol.newton_iters);
    summary.value("cg_iters", sol.cg_iters);
    summary.value("exponent_clamped", sol.exponent_clamped);
    summary.value("sup_gap", sci(gap.sup()));
    summary.value("unit_mass", format!("{mass:.16e}"));
    let tol = ctx.config.solver.tol.max(sol.tol_effective);
    summary.assert(
        "residual",
        residual <= tol,
        format!("recomputed residual within {tol:e}"),
    );
    if ctx.config.outputs.dump_fields {
        dump_potentials(&ctx.out, "", &sol.potentials)?;
    }
    Ok(())
}

pub fn envelope(ctx: &Context, summary: &mut Summary) -> CmdResult {
    let data = ctx.data()?;
    if data.grid().ndim() != 1 {
        return Err(ConfigError {
            line: None,
            field: "grid.ndim".into(),
            message: "the envelope solver needs complex dimension 1".into(),
        }
        .into());
    }
    let opts = ctx.config.envelope_options();
    let sol = if data.m() == 1 {
        project_with(&data.forms()[0], data.phi(), &opts)?
    } else {
        sum_form_envelope(&data, &opts)?
    };
    summary.value("forms", data.m());
    summary.value("iterations", sol.iterations);
    summary.value("residual_obstacle", sci(sol.residuals.obstacle));
    summary.value("residual_positivity", sci(sol.residuals.positivity));
    summary.value(
        "residual_complementarity",
        sci(sol.residuals.complementarity),
    );
    summary.value("contact_fraction", sci(sol.contact_fraction()));
    summary.value("density_sup", sci(sol.density.sup()));
    summary.value("density_mass", sci(sol.density.integrate()));
    let bound = KAPPA * opts.tol;
    summary.assert(
        "envelope_residuals",
        sol.residuals.max() <= bound,
        format!("all within {bound:e}"),
    );
    dump(&ctx.out, "envelope.csv", &sol.u)?;
    dump(
        &ctx.out,
        "contact_mask.csv",
        &mask_field(data.grid(), &sol.contact_mask),
    )?;
    dump(&ctx.out, "envelope_density.csv", &sol.density)?;
    Ok(())
}

pub fn check(ctx: &Context, summary: &mut Summary) -> CmdResult {
    let data = ctx.data()?;
    let res = ladder(ctx, &data)?;
    ladder_table(summary, &res);
    record_conditions(ctx, summary, &data, &res)?;

    let sums: Vec<f64> = res.ladder_history.iter().map(|r| r.sum_bound).collect();
    let (max, bound) = early_bound(&sums);
    summary.value("sum_bound_max", sci(max));
    summary.assert(
        "sum_bound",
        max <= bound,
        format!("max {max:e} vs 2x early max {bound:e}"),
    );

    let reg = regularity_report(&data, &res, &ctx.config.envelope_options())?;
    if let Some(a) = reg.envelope_density_sup {
        summary.value("envelope_density_sup", sci(a));
    }
    summary.value("gradient_sups", sci_list(&reg.gradient_sups));
    summary.value("laplacian_sups", sci_list(&reg.laplacian_sups));
    summary.value("ladder_increments", sci_list(&reg.ladder_increments));
    summary.assert(
        "density_finite",
        reg.density_finite,
        format!("mu_eq density sup {:e}", reg.mu_eq_density_sup),
    );
    let (lmax, lbound) = reg.laplacian_bound;
    if reg.laplacian_asserted {
        summary.assert(
            "laplacian_bound",
            lmax <= lbound,
            format!("max {lmax:e} vs 2x early max {lbound:e}"),
        );
    } else {
        summary.value(
            "laplacian_bound",
            format!("not asserted for a non-smooth weight (max {lmax:e})"),
        );
    }

    let beta = ctx.config.solver.beta;
    let sol = solve_beta_with(&data, beta, BetaStart::Zero, &ctx.config.beta_options())?;
    if data.grid().ndim() == 1 {
        let rep = maximizer_check(&sol, &data, 100, ctx.seed)?;
        summary.value("maximizer_max_increase", sci(rep.max_increase));
        summary.assert(
            "maximizer",
            rep.passed(),
            format!(
                "{} violations in {} perturbations at beta {beta:e}",
                rep.violations, rep.trials
            ),
        );
    }
    Ok(())
}

pub fn derivative(ctx: &Context, summary: &mut Summary) -> CmdResult {
    let data = ctx.data()?;
    let cfg = &ctx.config;
    let v = trig_field(data.grid(), &cfg.checks.direction)?;
    let rep = differentiability_test(
        &data,
        &v,
        &cfg.checks.steps,
        &cfg.schedule,
        &cfg.ladder_options(),
    )?;
    summary.value("steps", sci_list(&rep.steps));
    summary.value("slopes", list(&rep.slopes));
    summary.value("pairing", rep.pairing);
    summary.value("gaps", sci_list(&rep.gaps));
    summary.value("k_fit", sci(rep.k_fit));
    summary.value("floor", sci(rep.floor));
    summary.value("extrapolated_error", sci(rep.extrapolated_error));
    summary.assert("derivative", rep.passed, "every gap within K t + floor");
    Ok(())
}

pub fn uniqueness(ctx: &Context, summary: &mut Summary) -> CmdResult {
    let data = ctx.data()?;
    let cfg = &ctx.config;
    let starts = cfg.checks.starts;
    let rep = uniqueness_test(
        &data,
        starts,
        &cfg.schedule,
        &cfg.ladder_options(),
        ctx.seed,
    )?;
    summary.value("starts", rep.n_starts);
    summary.value("ladder_potential_distance", sci(rep.max_potential_distance));
    summary.value("ladder_sum_distance", sci(rep.max_sum_distance));
    let d = rep.max_potential_distance.max(rep.max_sum_distance);
    summary.assert("ladder_uniqueness", d <= 1e-4, format!("{d:e} within 1e-4"));
    if let Some(beta) = cfg.checks.uniqueness_beta {
        let opts = cfg.beta_options();
        let rep = uniqueness_beta_test(&data, starts, beta, &opts, ctx.seed)?;
        let d = rep.max_potential_distance.max(rep.max_sum_distance);
        summary.value("fixed_beta", sci(beta));
        summary.value("fixed_beta_distance", sci(d));
        let tol = 100.0 * opts.tol;
        summary.assert(
            "fixed_beta_uniqueness",
            d <= tol,
            format!("{d:e} within {tol:e}"),
        );
    }
    Ok(())
}

enum Job {
    Resolution(usize),
    Beta(f64),
}

struct JobResult {
    label: String,
    /// Sup error against the envelope (single form) or the condition residual.
    error: f64,
    detail: String,
}

fn run_job(ctx: &Context, job: &Job) -> Result<JobResult, Failure> {
    let cfg = &ctx.config;
    let (label, mut sub) = match job {
        Job::Resolution(n) => (format!("n{n}"), Summary::new("sweep", cfg)),
        Job::Beta(b) => (format!("beta{b:e}"), Summary::new("sweep", cfg)),
    };
    let dir = ctx.out.join(&label);
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
    let result = match job {
        Job::Resolution(n) => {
            let grid = Grid::new(cfg.ndim, *n)?;
            let data = cfg.problem_on(&grid)?;
            let res = solve_extremal_with(&data, &cfg.schedule, &cfg.ladder_options(), None)?;
            ladder_table(&mut sub, &res);
            let (error, detail) = if data.m() == 1 && cfg.ndim == 1 {
                let env = project_with(&data.forms()[0], data.phi(), &cfg.envelope_options())?;
                let err = (&res.potentials[0] - &env.u).sup_norm();
                (err, format!("N={n}: sup|phi_1 - envelope| = {err:.6e}"))
            } else {
                let c = check_conditions(&res, &data, cfg.checks.tol)?;
                let r = c.measure_equality.max(c.admissibility).max(c.support.abs());
                (r, format!("N={n}: max condition residual = {r:.6e}"))
            };
            if cfg.outputs.dump_fields {
                dump_potentials(&dir, "", &res.potentials)?;
            }
            JobResult {
                label,
                error,
                detail,
            }
        }
        Job::Beta(beta) => {
            let data = cfg.problem()?;
            let sol = solve_beta_with(&data, *beta, BetaStart::Zero, &cfg.beta_options())?;
            let r = residual_of(&data, &sol);
            if cfg.outputs.dump_fields {
                dump_potentials(&dir, "", &sol.potentials)?;
            }
            JobResult {
                label,
                error: r,
                detail: format!(
                    "beta={beta:e}: residual {r:.6e}, {} Newton steps",
                    sol.newton_iters
                ),
            }
        }
    };
    sub.value("result", &result.detail);
    let path = dir.join("summary.txt");
    std::fs::write(&path, sub.render())
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(result)
}

pub fn sweep(ctx: &Context, summary: &mut Summary) -> CmdResult {
    let cfg = &ctx.config;
    let jobs: Vec<Job> = cfg
        .sweep
        .n
        .iter()
        .map(|&n| Job::Resolution(n))
        .chain(cfg.sweep.beta.iter().map(|&b| Job::Beta(b)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Io(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<JobResult, Failure>> =
        pool.install(|| jobs.par_iter().map(|j| run_job(ctx, j)).collect());
    let mut resolution_errors = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        let r = r?;
        summary.value(&r.label, &r.detail);
        if let Job::Resolution(_) = job {
            resolution_errors.push(r.error);
        }
    }
    let single_form = cfg.forms.len() == 1 && cfg.ndim == 1;
    if single_form && resolution_errors.len() >= 2 {
        let decreasing = resolution_errors.windows(2).all(|w| w[1] < w[0]);
        summary.assert(
            "refinement",
            decreasing,
            format!(
                "envelope errors {} strictly decreasing",
                sci_list(&resolution_errors)
            ),
        );
    }
    Ok(())
}

/// Records what is known about a solver failure.
pub fn diagnose(summary: &mut Summary, e: &Error) {
    summary.value("error", e);
    match e {
        Error::LadderStalled { best, .. } => {
            ladder_table(summary, best);
            summary.value("best_beta", sci(best.beta_final));
            summary.value("best_max_violation", sci(best.admissibility.max_violation));
        }
        Error::BetaNoConvergence { best, .. } => {
            summary.value("best_residual", sci(best.residual_sup));
            summary.value("best_newton_iters", best.newton_iters);
        }
        Error::EnvelopeNoConvergence { best, .. } => {
            summary.value("best_residual", sci(best.residuals.max()));
        }
        _ => {}
    }
}
