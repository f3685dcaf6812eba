//! Experiment configuration: a single TOML document, schema-validated
//! before anything runs. Unknown fields are rejected.

use fixpoint::problem::{ContractionProblem, ControlSchedule};
use fixpoint::schemes::{SchemeId, StopRule};
use nalgebra::DMatrix;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub problem: ProblemSpec,
    pub schedule: ScheduleSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub analyses: AnalysesSpec,
    #[serde(default)]
    pub datadep: Option<DatadepSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `x -> A x + b`; must be a contraction in the operator norm.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// `x -> cos(x) / 2` on the line.
    HalfCosine,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant { values: [f64; 3] },
    HarmonicComplement,
    Harmonic,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub schemes: Vec<String>,
    pub x0: Vec<f64>,
    pub max_iterations: usize,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysesSpec {
    pub bounds: bool,
    pub rates: bool,
    pub equivalence: bool,
    pub datadep: bool,
    pub lemmas: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatadepSpec {
    pub epsilon: f64,
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Malformed(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Malformed(format!("{e}")))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(CliError::Malformed(
                "name must be a nonempty [a-zA-Z0-9_-]+ token".into(),
            ));
        }
        if self.run.schemes.is_empty() {
            return Err(CliError::Malformed("scheme list is empty".into()));
        }
        for tag in &self.run.schemes {
            if SchemeId::parse(tag).is_none() {
                return Err(CliError::Malformed(format!("unknown scheme '{tag}'")));
            }
        }
        if self.run.x0.is_empty() {
            return Err(CliError::Malformed("x0 is empty".into()));
        }
        if self.run.max_iterations == 0 {
            return Err(CliError::Malformed("max_iterations must be positive".into()));
        }
        if let Some(t) = self.run.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Malformed("tolerance must be a positive real".into()));
            }
        }
        if let ScheduleSpec::Constant { values } = &self.schedule {
            if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(CliError::Malformed(
                    "schedule values must lie in [0, 1]".into(),
                ));
            }
        }
        if let ProblemSpec::Affine { matrix, offset } = &self.problem {
            let d = offset.len();
            if d == 0 || matrix.len() != d || matrix.iter().any(|row| row.len() != d) {
                return Err(CliError::Malformed(
                    "affine problem needs a square matrix matching the offset length".into(),
                ));
            }
            if self.run.x0.len() != d {
                return Err(CliError::Malformed("x0 dimension differs from problem".into()));
            }
        }
        if self.analyses.datadep && self.datadep.is_none() {
            return Err(CliError::Malformed(
                "datadep analysis requested without a [datadep] section".into(),
            ));
        }
        if let Some(d) = &self.datadep {
            if !(d.epsilon > 0.0 && d.epsilon.is_finite()) {
                return Err(CliError::Malformed("datadep epsilon must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn schemes(&self) -> Vec<SchemeId> {
        self.run
            .schemes
            .iter()
            .map(|t| SchemeId::parse(t).expect("validated"))
            .collect()
    }

    pub fn build_problem(&self) -> Result<ContractionProblem, CliError> {
        match &self.problem {
            ProblemSpec::Affine { matrix, offset } => {
                let d = offset.len();
                let m = DMatrix::from_fn(d, d, |r, c| matrix[r][c]);
                ContractionProblem::affine(m, offset.clone())
                    .map_err(|e| CliError::Malformed(format!("problem rejected: {e}")))
            }
            ProblemSpec::HalfCosine => Ok(ContractionProblem::half_cosine()),
        }
    }

    pub fn build_schedule(&self) -> ControlSchedule {
        match &self.schedule {
            ScheduleSpec::Constant { values } => {
                ControlSchedule::constant(values[0], values[1], values[2])
            }
            ScheduleSpec::HarmonicComplement => ControlSchedule::HarmonicComplement,
            ScheduleSpec::Harmonic => ControlSchedule::Harmonic,
        }
    }

    pub fn stop_rule(&self) -> StopRule {
        match self.run.tolerance {
            Some(t) => StopRule::new(self.run.max_iterations, t),
            None => StopRule::exhaustive(self.run.max_iterations),
        }
    }

    /// Constant schedule values when the schedule is constant.
    pub fn constant_alpha(&self) -> Option<[f64; 3]> {
        match &self.schedule {
            ScheduleSpec::Constant { values } => Some(*values),
            _ => None,
        }
    }
}
