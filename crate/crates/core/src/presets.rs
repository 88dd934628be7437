//! Named configurations shipped with the CLI.

use crate::io::{ConfigError, RunConfig};

pub const PRESETS: &[(&str, &str)] = &[
    (
        "trivial-m1",
        "grid.n = 64\nform.mass = 1\nweight.kind = trig\n",
    ),
    (
        "trivial-m2",
        "grid.n = 64\nform.mass = 1\nform.mass = 1\nweight.kind = trig\n",
    ),
    (
        "trivial-m3",
        "grid.n = 64\nform.mass = 1\nform.mass = 1\nform.mass = 1\nweight.kind = trig\n",
    ),
    (
        "envelope-cosine",
        "# one flat form, weight 0.5 cos(2πx)
grid.n = 128
form.mass = 1
weight.kind = trig
weight.coefficients = 1,0,0.5
check.direction = 1,0,1
",
    ),
    (
        "mixed-m2",
        "# a flat form and a bumped one, weight 0.3 cos(2πx)
grid.n = 64
form.mass = 1
form.mass = 1
form.potential = 0,1,0.002
weight.kind = trig
weight.coefficients = 1,0,0.3
check.direction = 1,0,1
check.uniqueness_beta = 100
",
    ),
    (
        "cosine-y",
        "# partner weight of mixed-m2 for concavity checks
grid.n = 64
form.mass = 1
form.mass = 1
form.potential = 0,1,0.002
weight.kind = trig
weight.coefficients = 0,1,0.3
",
    ),
    (
        "max-of-trig",
        "# continuous but not smooth weight
grid.n = 64
form.mass = 1
form.mass = 1
weight.kind = max_of_trig
weight.component = 1,0,0.3
weight.component = 0,1,0.3
",
    ),
    (
        "nd-flat",
        "# complex dimension 2, experimental
grid.ndim = 2
grid.n = 8
form.mass = 1
form.mass = 1
weight.kind = trig
schedule.beta_max = 64
",
    ),
    (
        "nd-small",
        "# complex dimension 2, small weight, experimental
grid.ndim = 2
grid.n = 8
form.mass = 1
form.mass = 2
form.metric = 2,1,0.2,0.1
weight.kind = trig
weight.coefficients = 1,0,0,0,0.01
# the 8^4 grid cannot resolve the penalty layer much beyond this
schedule.beta_max = 1024
solver.tol = 1e-9
",
    ),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn config(name: &str) -> Result<RunConfig, ConfigError> {
    let t = text(name).ok_or_else(|| ConfigError {
        line: None,
        field: "preset".into(),
        message: format!(
            "unknown preset `{name}`; known: {}",
            names().collect::<Vec<_>>().join(", ")
        ),
    })?;
    RunConfig::parse(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in names() {
            let cfg = config(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            cfg.problem().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(config("nope").is_err());
    }
}
