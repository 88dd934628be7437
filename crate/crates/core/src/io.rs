//! Run configuration, field dumps and run summaries.
//!
//! Configs are line-oriented `section.key = value` text; `#` starts a comment.
//! Each `form.mass` line opens a new form block that the following
//! `form.potential` / `form.metric` lines refer to. Cosine terms are written
//! `k_1,…,k_d,amplitude` with one wavenumber per real axis, separated by `;`.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use rustfft::num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::beta::{BetaOptions, Preconditioner};
use crate::continuation::{BetaSchedule, LadderOptions};
use crate::energy::EnergyPrefactor;
use crate::envelope::EnvelopeOptions;
use crate::grid::{Grid, ScalarField};
use crate::problem::{validate, Hermitian2, KahlerForm, ProblemData, TrigTerm, Weight};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{field}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, field: &str, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            line: None,
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WeightKind {
    Trig,
    MaxOfTrig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormSpec {
    pub mass: f64,
    pub potential: Vec<TrigTerm>,
    pub metric: Option<Hermitian2>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub coefficients: Vec<TrigTerm>,
    pub components: Vec<Vec<TrigTerm>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSpec {
    pub tol: f64,
    pub max_newton: usize,
    pub energy_prefactor: EnergyPrefactor,
    pub preconditioner: Preconditioner,
    /// `β` for single-rung solves.
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub dir: Option<String>,
    pub dump_fields: bool,
    pub dump_every_rung: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub n: Vec<usize>,
    pub beta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckSpec {
    /// Tolerance for the defining conditions.
    pub tol: f64,
    pub envelope_tol: f64,
    pub envelope_max_iter: usize,
    /// Direction of the derivative test.
    pub direction: Vec<TrigTerm>,
    pub steps: Vec<f64>,
    pub starts: usize,
    /// Fixed `β` of the uniqueness test; the ladder is used when absent.
    pub uniqueness_beta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub ndim: usize,
    pub n: usize,
    pub forms: Vec<FormSpec>,
    pub weight: WeightSpec,
    pub schedule: BetaSchedule,
    pub solver: SolverSpec,
    pub outputs: OutputSpec,
    pub sweep: SweepSpec,
    pub checks: CheckSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        let beta = BetaOptions::default();
        Self {
            ndim: 1,
            n: 64,
            forms: Vec::new(),
            weight: WeightSpec {
                kind: WeightKind::Trig,
                coefficients: Vec::new(),
                components: Vec::new(),
            },
            schedule: BetaSchedule::default(),
            solver: SolverSpec {
                tol: beta.tol,
                max_newton: beta.max_newton,
                energy_prefactor: EnergyPrefactor::Standard,
                preconditioner: Preconditioner::Multigrid,
                beta: 10.0,
            },
            outputs: OutputSpec {
                dir: None,
                dump_fields: false,
                dump_every_rung: false,
            },
            sweep: SweepSpec {
                n: vec![32, 64, 128],
                beta: Vec::new(),
            },
            checks: CheckSpec {
                tol: 1e-3,
                envelope_tol: EnvelopeOptions::default().tol,
                envelope_max_iter: EnvelopeOptions::default().max_iter,
                direction: vec![TrigTerm::new(&[1, 0], 1.0)],
                steps: vec![0.04, 0.02, 0.01],
                starts: 5,
                uniqueness_beta: None,
            },
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim()
        .parse()
        .map_err(|_| ConfigError::at(line, key, format!("cannot parse `{}`", v.trim())))
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(ConfigError::at(
            line,
            key,
            format!("expected true or false, got `{other}`"),
        )),
    }
}

fn parse_list<T: std::str::FromStr>(
    line: usize,
    key: &str,
    v: &str,
) -> Result<Vec<T>, ConfigError> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(line, key, s))
        .collect()
}

fn parse_terms(line: usize, key: &str, v: &str) -> Result<Vec<TrigTerm>, ConfigError> {
    let mut out = Vec::new();
    for chunk in v.split(';').map(str::trim).filter(|c| !c.is_empty()) {
        let parts: Vec<&str> = chunk.split(',').map(str::trim).collect();
        if parts.len() < 2 {
            return Err(ConfigError::at(
                line,
                key,
                format!("term `{chunk}` needs wavenumbers and an amplitude"),
            ));
        }
        let (ks, amp) = parts.split_at(parts.len() - 1);
        let k = ks
            .iter()
            .map(|s| parse_num::<i64>(line, key, s))
            .collect::<Result<Vec<_>, _>>()?;
        let amplitude = parse_num::<f64>(line, key, amp[0])?;
        out.push(TrigTerm { k, amplitude });
    }
    Ok(out)
}

fn parse_metric(line: usize, key: &str, v: &str) -> Result<Hermitian2, ConfigError> {
    let vals: Vec<f64> = parse_list(line, key, v)?;
    if vals.len() != 4 {
        return Err(ConfigError::at(
            line,
            key,
            "expected a11,a22,re(a12),im(a12)",
        ));
    }
    Ok(Hermitian2::new(
        vals[0],
        vals[1],
        Complex64::new(vals[2], vals[3]),
    ))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        let mut has_coefficients = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::at(
                    line,
                    content,
                    "expected `section.key = value`",
                ));
            };
            let key = key.trim();
            let value = value.trim();
            let repeatable = matches!(key, "weight.component") || key.starts_with("form.");
            if !repeatable && !seen.insert(key.to_string()) {
                return Err(ConfigError::at(line, key, "duplicate key"));
            }
            let last_form = |cfg: &mut RunConfig| -> Result<usize, ConfigError> {
                if cfg.forms.is_empty() {
                    Err(ConfigError::at(
                        line,
                        key,
                        "appears before the first form.mass",
                    ))
                } else {
                    Ok(cfg.forms.len() - 1)
                }
            };
            match key {
                "grid.ndim" => cfg.ndim = parse_num(line, key, value)?,
                "grid.n" => cfg.n = parse_num(line, key, value)?,
                "form.mass" => cfg.forms.push(FormSpec {
                    mass: parse_num(line, key, value)?,
                    potential: Vec::new(),
                    metric: None,
                }),
                "form.potential" => {
                    let j = last_form(&mut cfg)?;
                    cfg.forms[j].potential = parse_terms(line, key, value)?;
                }
                "form.metric" => {
                    let j = last_form(&mut cfg)?;
                    cfg.forms[j].metric = Some(parse_metric(line, key, value)?);
                }
                "weight.kind" => {
                    cfg.weight.kind = match value {
                        "trig" => WeightKind::Trig,
                        "max_of_trig" => WeightKind::MaxOfTrig,
                        other => {
                            return Err(ConfigError::at(
                                line,
                                key,
                                format!("unknown kind `{other}` (trig|max_of_trig)"),
                            ))
                        }
                    }
                }
                "weight.coefficients" => {
                    has_coefficients = true;
                    cfg.weight.coefficients = parse_terms(line, key, value)?;
                }
                "weight.component" => cfg.weight.components.push(parse_terms(line, key, value)?),
                "schedule.beta0" => cfg.schedule.beta0 = parse_num(line, key, value)?,
                "schedule.growth" => cfg.schedule.growth = parse_num(line, key, value)?,
                "schedule.beta_max" => cfg.schedule.beta_max = parse_num(line, key, value)?,
                "schedule.ladder_tol" => cfg.schedule.ladder_tol = parse_num(line, key, value)?,
                "solver.tol" => cfg.solver.tol = parse_num(line, key, value)?,
                "solver.max_newton" => cfg.solver.max_newton = parse_num(line, key, value)?,
                "solver.energy_prefactor" => {
                    cfg.solver.energy_prefactor = value
                        .parse()
                        .map_err(|e: String| ConfigError::at(line, key, e))?
                }
                "solver.preconditioner" => {
                    cfg.solver.preconditioner = match value {
                        "multigrid" => Preconditioner::Multigrid,
                        "spectral" => Preconditioner::SpectralPoisson,
                        other => {
                            return Err(ConfigError::at(
                                line,
                                key,
                                format!("unknown preconditioner `{other}` (multigrid|spectral)"),
                            ))
                        }
                    }
                }
                "solver.beta" => cfg.solver.beta = parse_num(line, key, value)?,
                "outputs.dir" => cfg.outputs.dir = Some(value.to_string()),
                "outputs.dump_fields" => cfg.outputs.dump_fields = parse_bool(line, key, value)?,
                "outputs.dump_every_rung" => {
                    cfg.outputs.dump_every_rung = parse_bool(line, key, value)?
                }
                "sweep.n" => cfg.sweep.n = parse_list(line, key, value)?,
                "sweep.beta" => cfg.sweep.beta = parse_list(line, key, value)?,
                "check.tol" => cfg.checks.tol = parse_num(line, key, value)?,
                "check.envelope_tol" => cfg.checks.envelope_tol = parse_num(line, key, value)?,
                "check.envelope_max_iter" => {
                    cfg.checks.envelope_max_iter = parse_num(line, key, value)?
                }
                "check.direction" => cfg.checks.direction = parse_terms(line, key, value)?,
                "check.steps" => cfg.checks.steps = parse_list(line, key, value)?,
                "check.starts" => cfg.checks.starts = parse_num(line, key, value)?,
                "check.uniqueness_beta" => {
                    cfg.checks.uniqueness_beta = Some(parse_num(line, key, value)?)
                }
                other => return Err(ConfigError::at(line, other, "unknown key")),
            }
        }
        if cfg.forms.is_empty() {
            return Err(ConfigError::field(
                "form.mass",
                "at least one form is required",
            ));
        }
        if cfg.weight.kind == WeightKind::MaxOfTrig && cfg.weight.components.is_empty() {
            return Err(ConfigError::field(
                "weight.component",
                "max_of_trig needs at least one component",
            ));
        }
        if cfg.weight.kind == WeightKind::Trig
            && !cfg.weight.components.is_empty()
            && !has_coefficients
        {
            return Err(ConfigError::field(
                "weight.kind",
                "components given but kind is trig",
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| {
            ConfigError::field(path.display().to_string(), format!("cannot read: {e}"))
        })?;
        Self::parse(&text)
    }

    /// Canonical text with every key spelled out; parses back to `self`.
    pub fn to_text(&self) -> String {
        let terms = |t: &[TrigTerm]| {
            t.iter()
                .map(|t| {
                    let ks: Vec<String> = t.k.iter().map(ToString::to_string).collect();
                    format!("{},{:e}", ks.join(","), t.amplitude)
                })
                .collect::<Vec<_>>()
                .join("; ")
        };
        let list = |v: &[String]| v.join(",");
        let mut s = String::new();
        let _ = writeln!(s, "grid.ndim = {}", self.ndim);
        let _ = writeln!(s, "grid.n = {}", self.n);
        for f in &self.forms {
            let _ = writeln!(s, "form.mass = {:e}", f.mass);
            if !f.potential.is_empty() {
                let _ = writeln!(s, "form.potential = {}", terms(&f.potential));
            }
            if let Some(g) = f.metric {
                let _ = writeln!(
                    s,
                    "form.metric = {:e},{:e},{:e},{:e}",
                    g.a11, g.a22, g.a12.re, g.a12.im
                );
            }
        }
        let kind = match self.weight.kind {
            WeightKind::Trig => "trig",
            WeightKind::MaxOfTrig => "max_of_trig",
        };
        let _ = writeln!(s, "weight.kind = {kind}");
        if !self.weight.coefficients.is_empty() {
            let _ = writeln!(
                s,
                "weight.coefficients = {}",
                terms(&self.weight.coefficients)
            );
        }
        for c in &self.weight.components {
            let _ = writeln!(s, "weight.component = {}", terms(c));
        }
        let sch = &self.schedule;
        let _ = writeln!(s, "schedule.beta0 = {:e}", sch.beta0);
        let _ = writeln!(s, "schedule.growth = {:e}", sch.growth);
        let _ = writeln!(s, "schedule.beta_max = {:e}", sch.beta_max);
        let _ = writeln!(s, "schedule.ladder_tol = {:e}", sch.ladder_tol);
        let sv = &self.solver;
        let _ = writeln!(s, "solver.tol = {:e}", sv.tol);
        let _ = writeln!(s, "solver.max_newton = {}", sv.max_newton);
        let _ = writeln!(s, "solver.energy_prefactor = {}", sv.energy_prefactor);
        let pre = match sv.preconditioner {
            Preconditioner::Multigrid => "multigrid",
            Preconditioner::SpectralPoisson => "spectral",
        };
        let _ = writeln!(s, "solver.preconditioner = {pre}");
        let _ = writeln!(s, "solver.beta = {:e}", sv.beta);
        if let Some(d) = &self.outputs.dir {
            let _ = writeln!(s, "outputs.dir = {d}");
        }
        let _ = writeln!(s, "outputs.dump_fields = {}", self.outputs.dump_fields);
        let _ = writeln!(
            s,
            "outputs.dump_every_rung = {}",
            self.outputs.dump_every_rung
        );
        let ns: Vec<String> = self.sweep.n.iter().map(ToString::to_string).collect();
        let _ = writeln!(s, "sweep.n = {}", list(&ns));
        if !self.sweep.beta.is_empty() {
            let bs: Vec<String> = self.sweep.beta.iter().map(|b| format!("{b:e}")).collect();
            let _ = writeln!(s, "sweep.beta = {}", list(&bs));
        }
        let c = &self.checks;
        let _ = writeln!(s, "check.tol = {:e}", c.tol);
        let _ = writeln!(s, "check.envelope_tol = {:e}", c.envelope_tol);
        let _ = writeln!(s, "check.envelope_max_iter = {}", c.envelope_max_iter);
        let _ = writeln!(s, "check.direction = {}", terms(&c.direction));
        let steps: Vec<String> = c.steps.iter().map(|t| format!("{t:e}")).collect();
        let _ = writeln!(s, "check.steps = {}", list(&steps));
        let _ = writeln!(s, "check.starts = {}", c.starts);
        if let Some(b) = c.uniqueness_beta {
            let _ = writeln!(s, "check.uniqueness_beta = {b:e}");
        }
        s
    }

    /// SHA-256 of the canonical text.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.ndim, self.n).map_err(|e| ConfigError::field("grid", e.to_string()))
    }

    /// Builds and validates the problem data.
    pub fn problem(&self) -> Result<ProblemData, ConfigError> {
        self.problem_on(&self.grid()?)
    }

    /// Builds the problem on another grid (used by resolution sweeps).
    pub fn problem_on(&self, grid: &Grid) -> Result<ProblemData, ConfigError> {
        let term_field = |field: &str, terms: &[TrigTerm]| {
            crate::problem::trig_field(grid, terms)
                .map_err(|e| ConfigError::field(field, e.to_string()))
        };
        let mut forms = Vec::with_capacity(self.forms.len());
        for (j, spec) in self.forms.iter().enumerate() {
            let name = format!("form {}", j + 1);
            if !(spec.mass > 0.0) {
                return Err(ConfigError::field(
                    name,
                    format!("mass must be positive, got {}", spec.mass),
                ));
            }
            let form = if grid.ndim() == 1 {
                let psi = term_field(&format!("{name}.potential"), &spec.potential)?;
                KahlerForm::from_potential(spec.mass, &psi)
                    .map_err(|e| ConfigError::field(&name, e.to_string()))?
            } else {
                // the metric fixes the shape, the mass fixes det g
                let g = spec.metric.unwrap_or_else(Hermitian2::identity);
                if !(g.min_eigenvalue() > 0.0) {
                    return Err(ConfigError::field(
                        format!("{name}.metric"),
                        "must be positive definite",
                    ));
                }
                let r = (spec.mass / g.det()).sqrt();
                let g = Hermitian2::new(g.a11 * r, g.a22 * r, g.a12 * r);
                KahlerForm::from_metric(grid, g)
                    .map_err(|e| ConfigError::field(&name, e.to_string()))?
            };
            forms.push(form);
        }
        let weight = match self.weight.kind {
            WeightKind::Trig => Weight::smooth(term_field(
                "weight.coefficients",
                &self.weight.coefficients,
            )?),
            WeightKind::MaxOfTrig => Weight::max_of_trig(grid, &self.weight.components)
                .map_err(|e| ConfigError::field("weight.component", e.to_string()))?,
        };
        let data = ProblemData::assemble(forms, weight);
        if let Some(v) = validate(&data).first() {
            return Err(ConfigError::field(v.subject.clone(), v.message.clone()));
        }
        self.schedule
            .validate()
            .map_err(|e| ConfigError::field("schedule", e.to_string()))?;
        Ok(data)
    }

    pub fn beta_options(&self) -> BetaOptions {
        BetaOptions {
            tol: self.solver.tol,
            max_newton: self.solver.max_newton,
            preconditioner: self.solver.preconditioner,
            ..BetaOptions::default()
        }
    }

    pub fn ladder_options(&self) -> LadderOptions {
        LadderOptions {
            beta: self.beta_options(),
            prefactor: self.solver.energy_prefactor,
            keep_rungs: self.outputs.dump_every_rung,
        }
    }

    pub fn envelope_options(&self) -> EnvelopeOptions {
        EnvelopeOptions {
            tol: self.checks.envelope_tol,
            max_iter: self.checks.envelope_max_iter,
            ..EnvelopeOptions::default()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FieldIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },
}

fn format_err(offset: usize, message: impl Into<String>) -> FieldIoError {
    FieldIoError::Format {
        offset,
        message: message.into(),
    }
}

/// Text encoding of a field: header `field,v1,ndim=<d>,N=<n>`, then one line of
/// `N` comma-separated values per grid row.
pub fn encode_field(f: &ScalarField) -> String {
    let g = f.grid();
    let n = g.resolution();
    let mut s = String::with_capacity(g.len() * 24 + 32);
    let _ = writeln!(s, "field,v1,ndim={},N={}", g.ndim(), n);
    for row in f.values().chunks(n) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn decode_field(text: &str, expected: Option<&Grid>) -> Result<ScalarField, FieldIoError> {
    let header_end = text
        .find('\n')
        .ok_or_else(|| format_err(0, "missing header line"))?;
    let header = &text[..header_end];
    let parts: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if parts.len() != 4 || parts[0] != "field" || parts[1] != "v1" {
        return Err(format_err(
            0,
            format!("expected header `field,v1,ndim=<d>,N=<n>`, got `{header}`"),
        ));
    }
    let tagged = |part: &str, tag: &str| -> Result<usize, FieldIoError> {
        let offset = header.find(part).unwrap_or(0);
        part.strip_prefix(tag)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| format_err(offset, format!("expected `{tag}<integer>`, got `{part}`")))
    };
    let ndim = tagged(parts[2], "ndim=")?;
    let n = tagged(parts[3], "N=")?;
    let grid = match expected {
        Some(g) => {
            if g.ndim() != ndim || g.resolution() != n {
                let offset = header.find(parts[3]).unwrap_or(0);
                return Err(format_err(
                    offset,
                    format!(
                        "expected ndim={} N={}, file has ndim={ndim} N={n}",
                        g.ndim(),
                        g.resolution()
                    ),
                ));
            }
            g.clone()
        }
        None => Grid::new(ndim, n).map_err(|e| format_err(0, e.to_string()))?,
    };
    let mut values = Vec::with_capacity(grid.len());
    let mut offset = header_end + 1;
    for line in text[header_end + 1..].split_inclusive('\n') {
        let body = line.trim_end_matches(['\n', '\r']);
        if body.is_empty() {
            offset += line.len();
            continue;
        }
        let mut cell_offset = offset;
        let mut count = 0;
        for cell in body.split(',') {
            let v: f64 = cell
                .parse()
                .map_err(|_| format_err(cell_offset, format!("cannot parse `{cell}`")))?;
            values.push(v);
            cell_offset += cell.len() + 1;
            count += 1;
        }
        if count != n {
            return Err(format_err(
                offset,
                format!("row has {count} values, expected {n}"),
            ));
        }
        offset += line.len();
    }
    if values.len() != grid.len() {
        return Err(format_err(
            text.len(),
            format!("expected {} values, found {}", grid.len(), values.len()),
        ));
    }
    ScalarField::new(&grid, values).map_err(|e| format_err(offset, e.to_string()))
}

pub fn dump_field(f: &ScalarField, path: &Path) -> Result<(), FieldIoError> {
    fs::write(path, encode_field(f))?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<ScalarField, FieldIoError> {
    decode_field(&fs::read_to_string(path)?, None)
}

/// Loads into a fixed grid; a resolution mismatch is a format error.
pub fn load_field_on(path: &Path, grid: &Grid) -> Result<ScalarField, FieldIoError> {
    decode_field(&fs::read_to_string(path)?, Some(grid))
}

/// Dumps a boolean mask as a field of zeros and ones.
pub fn mask_field(grid: &Grid, mask: &[bool]) -> ScalarField {
    ScalarField::new(
        grid,
        mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
    )
    .expect("finite mask")
}

/// Structured run summary with a fixed section order: header, config echo,
/// ladder table, final values, assertions.
#[derive(Clone, Debug, Default)]
pub struct Summary {
    pub command: String,
    pub status: String,
    pub exit_code: i32,
    pub config_text: String,
    pub inputs_hash: String,
    pub seed: Option<u64>,
    pub ladder_header: Vec<String>,
    pub ladder_rows: Vec<Vec<String>>,
    pub finals: Vec<(String, String)>,
    pub assertions: Vec<Assertion>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Summary {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            status: "ok".into(),
            config_text: config.to_text(),
            inputs_hash: config.content_hash(),
            ..Self::default()
        }
    }

    pub fn value(&mut self, key: &str, value: impl fmt::Display) {
        self.finals.push((key.to_string(), value.to_string()));
    }

    pub fn assert(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "status = {}", self.status);
        let _ = writeln!(s, "exit_code = {}", self.exit_code);
        let _ = writeln!(s, "inputs_sha256 = {}", self.inputs_hash);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed = {seed}");
        }
        let _ = writeln!(s, "\n[config]");
        s.push_str(&self.config_text);
        if !self.ladder_rows.is_empty() {
            let _ = writeln!(s, "\n[ladder]");
            let _ = writeln!(s, "{}", self.ladder_header.join(","));
            for row in &self.ladder_rows {
                let _ = writeln!(s, "{}", row.join(","));
            }
        }
        let _ = writeln!(s, "\n[final]");
        for (k, v) in &self.finals {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "\n[assertions]");
        for a in &self.assertions {
            let verdict = if a.passed { "pass" } else { "FAIL" };
            let _ = writeln!(s, "{} = {} ({})", a.name, verdict, a.detail);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
        grid.n = 16  # comment
        form.mass = 1
        form.potential = 0,1,0.002
        form.mass = 2.5
        weight.kind = trig
        weight.coefficients = 1,0,0.3; 0,2,-0.1
        schedule.beta_max = 4096
    ";

    #[test]
    fn parse_and_echo_round_trip() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.forms.len(), 2);
        assert_eq!(cfg.forms[0].potential, vec![TrigTerm::new(&[0, 1], 0.002)]);
        assert_eq!(cfg.weight.coefficients.len(), 2);
        let again = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.content_hash(), cfg.content_hash());
        let data = cfg.problem().unwrap();
        assert_eq!(data.m(), 2);
        assert!((data.total_mass() - 3.5).abs() < 1e-14);
    }

    #[test]
    fn errors_name_line_and_field() {
        let err = RunConfig::parse("grid.n = 16\nform.mass = x\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert_eq!(err.field, "form.mass");
        let err = RunConfig::parse("grid.n = 16\nform.potential = 1,0,1\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        let err = RunConfig::parse("form.mass = 1\nbogus.key = 3\n").unwrap_err();
        assert_eq!(err.field, "bogus.key");
        let err = RunConfig::parse("form.mass = 1\nform.mass = -2\n")
            .unwrap()
            .problem()
            .unwrap_err();
        assert_eq!(err.field, "form 2");
        assert!(err.to_string().contains("mass must be positive"));
    }

    #[test]
    fn field_round_trip_is_bit_exact() {
        let g = Grid::new(1, 16).unwrap();
        let f = crate::random::FieldSampler::new(4)
            .band_limited(&g)
            .scale(std::f64::consts::PI);
        let back = decode_field(&encode_field(&f), None).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn field_format_errors() {
        let g = Grid::new(1, 8).unwrap();
        let text = encode_field(&ScalarField::zeros(&g));
        let bad = text.replacen("field,v1", "field,v2", 1);
        assert!(matches!(
            decode_field(&bad, None),
            Err(FieldIoError::Format { offset: 0, .. })
        ));
        let other = Grid::new(1, 16).unwrap();
        match decode_field(&text, Some(&other)) {
            Err(FieldIoError::Format { message, .. }) => {
                assert!(
                    message.contains("N=16") && message.contains("N=8"),
                    "{message}"
                );
            }
            r => panic!("unexpected {r:?}"),
        }
        let corrupt = text.replacen("0.0000000000000000e0", "zero", 1);
        match decode_field(&corrupt, None) {
            Err(FieldIoError::Format { offset, .. }) => {
                assert_eq!(offset, text.find('\n').unwrap() + 1)
            }
            r => panic!("unexpected {r:?}"),
        }
    }
}
