//! Executes a validated config and persists the result bundle: raw traces,
//! analysis summaries, and a manifest with a content hash per file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fixpoint::analysis::{
    compare_rates, equivalence_gap, lemma_recurrence_check, theoretical_bounds, theta_ratio_test,
    LemmaKind, LemmaRecurrence, RateThresholds,
};
use fixpoint::datadep::{data_dependence_experiment, seeded_constant_shift};
use fixpoint::error::Error;
use fixpoint::oracle::{exact_error_sequence, exact_run, ExactAffine, Rational};
use fixpoint::problem::Point;
use fixpoint::schemes::{run_scheme, IterationTrace, SchemeId, Termination};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const TRACES_FILE: &str = "traces.json";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
pub struct TraceRecord {
    pub scheme: String,
    pub iterates: Vec<Vec<f64>>,
    pub errors: Option<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub reached_tolerance: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TracesDocument {
    pub config_name: String,
    pub seed: u64,
    pub traces: Vec<TraceRecord>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct AnalysisDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<RatesSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<EquivalenceSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemmas: Option<LemmasSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub datadep: Option<DatadepSection>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BoundsSection {
    pub exp_bound: Vec<f64>,
    pub a_n: Vec<f64>,
    pub b_n: Vec<f64>,
    pub theta_n: Vec<f64>,
    pub theta_step_ratio: f64,
    pub theta_ratio_passes: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RatesSection {
    pub first_scheme: String,
    pub second_scheme: String,
    pub estimated_limit: f64,
    pub classification: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EquivalenceSection {
    pub first_scheme: String,
    pub second_scheme: String,
    pub max_gap: f64,
    pub final_gap: f64,
    pub recurrence_holds: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LemmasSection {
    pub hypotheses_hold: bool,
    pub conclusion_holds: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatadepSection {
    pub epsilon: f64,
    pub bound: f64,
    pub observed_gap: f64,
    pub margin: f64,
    pub recurrence_holds: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config_name: String,
    pub seed: u64,
    /// file name -> sha256 of its bytes
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

fn lib_error(e: Error) -> CliError {
    match e {
        Error::InadmissibleSchedule { reason } => CliError::Inadmissible(reason),
        other => CliError::Other(other.to_string()),
    }
}

fn record(trace: &IterationTrace) -> TraceRecord {
    TraceRecord {
        scheme: trace.scheme.tag().to_string(),
        iterates: trace.iterates.iter().map(|p| p.0.clone()).collect(),
        errors: trace.errors.clone(),
        residuals: trace.residuals.clone(),
        reached_tolerance: trace.termination == Termination::ReachedTolerance,
    }
}

/// Runs every scheme in the config on a worker pool and assembles the
/// bundle in config order, so the output does not depend on completion
/// order. Returns the bundle directory.
pub fn run_config(
    config: &ExperimentConfig,
    output_root: &Path,
    seed_override: Option<u64>,
) -> Result<PathBuf, CliError> {
    let problem = config.build_problem()?;
    let schedule = config.build_schedule();
    let stop = config.stop_rule();
    let x0 = Point(config.run.x0.clone());
    let seed = seed_override.or(config.seed).unwrap_or(0);
    let schemes = config.schemes();

    let traces: Vec<IterationTrace> = schemes
        .par_iter()
        .map(|&scheme| run_scheme(&problem, scheme, &schedule, &x0, stop))
        .collect::<Result<_, _>>()
        .map_err(lib_error)?;

    let mut analysis = AnalysisDocument::default();

    if config.analyses.bounds {
        let alpha = config.constant_alpha().ok_or_else(|| {
            CliError::Inadmissible("bound sequences need a constant schedule".into())
        })?;
        let errors = traces
            .iter()
            .find_map(|t| t.errors.as_ref())
            .ok_or_else(|| {
                CliError::Inadmissible("bound check needs a known fixed point".into())
            })?;
        let n_steps = errors.len() - 1;
        let bounds = theoretical_bounds(errors[0], problem.delta(), alpha, n_steps)
            .map_err(lib_error)?;
        let theta = theta_ratio_test(problem.delta(), alpha).map_err(lib_error)?;
        for trace in &traces {
            if !matches!(trace.scheme, SchemeId::Ko | SchemeId::KoPerturbed) {
                continue;
            }
            let errs = trace.errors.as_ref().expect("checked above");
            for n in 0..errs.len() - 1 {
                if errs[n + 1] > bounds.exp_bound[n] + 1e-12 {
                    return Err(CliError::BoundViolation(format!(
                        "{} error {} exceeds bound {} at step {}",
                        trace.scheme,
                        errs[n + 1],
                        bounds.exp_bound[n],
                        n + 1
                    )));
                }
            }
        }
        analysis.bounds = Some(BoundsSection {
            exp_bound: bounds.exp_bound,
            a_n: bounds.a_n,
            b_n: bounds.b_n,
            theta_n: bounds.theta_n,
            theta_step_ratio: bounds.theta_step_ratio,
            theta_ratio_passes: theta.passes,
        });
    }

    if config.analyses.rates {
        if traces.len() < 2 {
            return Err(CliError::Inadmissible(
                "rate comparison needs at least two schemes".into(),
            ));
        }
        let pair = [traces[0].scheme, traces[1].scheme];
        let sequences = exact_error_pair(config, pair).or_else(|| {
            let a = traces[0].errors.clone()?;
            let b = traces[1].errors.clone()?;
            Some((a, b))
        });
        let (a, b) = sequences.ok_or_else(|| {
            CliError::Inadmissible("rate comparison needs a known fixed point".into())
        })?;
        let n = a.len().min(b.len());
        let report =
            compare_rates(&a[..n], &b[..n], RateThresholds::default()).map_err(lib_error)?;
        analysis.rates = Some(RatesSection {
            first_scheme: traces[0].scheme.tag().to_string(),
            second_scheme: traces[1].scheme.tag().to_string(),
            estimated_limit: report.estimated_limit,
            classification: format!("{:?}", report.classification),
        });
    }

    if config.analyses.equivalence || config.analyses.lemmas {
        let ko = traces.iter().find(|t| t.scheme == SchemeId::Ko);
        let cr = traces.iter().find(|t| t.scheme == SchemeId::Cr);
        let (Some(ko), Some(cr)) = (ko, cr) else {
            return Err(CliError::Inadmissible(
                "equivalence needs both the ko and cr schemes".into(),
            ));
        };
        let n = ko.len().min(cr.len());
        let gap = equivalence_gap(&truncate(ko, n), &truncate(cr, n), problem.delta())
            .map_err(lib_error)?;
        if config.analyses.equivalence {
            analysis.equivalence = Some(EquivalenceSection {
                first_scheme: ko.scheme.tag().to_string(),
                second_scheme: cr.scheme.tag().to_string(),
                max_gap: gap.gaps.iter().cloned().fold(0.0, f64::max),
                final_gap: *gap.gaps.last().unwrap(),
                recurrence_holds: gap.recurrence_holds,
            });
        }
        if config.analyses.lemmas {
            let delta = problem.delta();
            let errors = ko.errors.as_ref().ok_or_else(|| {
                CliError::Inadmissible("lemma validation needs a known fixed point".into())
            })?;
            let len = gap.gaps.len();
            let coeff: Vec<f64> = (0..len).map(|k| schedule.eval(k)[0] * (1.0 - delta)).collect();
            let forcing: Vec<f64> = (0..len)
                .map(|k| {
                    let [a1, a2, a3] = schedule.eval(k);
                    (1.0 - a1) * (2.0 + a2 * delta * a3) * (1.0 + delta) * errors[k]
                })
                .collect();
            let verdict = lemma_recurrence_check(
                &LemmaRecurrence {
                    kind: LemmaKind::Lemma1,
                    a: gap.gaps.clone(),
                    coeff,
                    forcing,
                },
                1e-10,
            )
            .map_err(lib_error)?;
            analysis.lemmas = Some(LemmasSection {
                hypotheses_hold: verdict.hypotheses_hold,
                conclusion_holds: verdict.conclusion_holds,
            });
        }
    }

    if config.analyses.datadep {
        let spec_eps = config.datadep.as_ref().expect("validated").epsilon;
        let spec = seeded_constant_shift(problem.dim(), seed, spec_eps);
        let report = data_dependence_experiment(&problem, &spec, &schedule, &x0, stop)
            .map_err(lib_error)?;
        if report.margin < 0.0 {
            return Err(CliError::BoundViolation(format!(
                "observed gap {} exceeds bound {}",
                report.observed_gap, report.bound
            )));
        }
        analysis.datadep = Some(DatadepSection {
            epsilon: report.epsilon,
            bound: report.bound,
            observed_gap: report.observed_gap,
            margin: report.margin,
            recurrence_holds: report.recurrence_holds,
        });
    }

    let dir = output_root.join(&config.name);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Other(format!("cannot create {}: {e}", dir.display())))?;

    let traces_doc = TracesDocument {
        config_name: config.name.clone(),
        seed,
        traces: traces.iter().map(record).collect(),
    };
    let mut files = BTreeMap::new();
    for (name, payload) in [
        (TRACES_FILE, to_json(&traces_doc)?),
        (ANALYSIS_FILE, to_json(&analysis)?),
    ] {
        std::fs::write(dir.join(name), &payload)
            .map_err(|e| CliError::Other(format!("cannot write {name}: {e}")))?;
        files.insert(name.to_string(), sha256_hex(payload.as_bytes()));
    }
    let manifest = Manifest {
        config_name: config.name.clone(),
        seed,
        files,
    };
    std::fs::write(dir.join(MANIFEST_FILE), to_json(&manifest)?)
        .map_err(|e| CliError::Other(format!("cannot write manifest: {e}")))?;
    Ok(dir)
}

/// Rate comparison on error sequences from the exact oracle when the
/// problem is affine and the schedule constant. Floating errors collapse
/// to zero a few ulps from the fixed point, which hides the asymptotic
/// ratio; the exact replay keeps decaying. Capped at 150 steps to keep
/// bignum growth in check.
fn exact_error_pair(
    config: &ExperimentConfig,
    pair: [SchemeId; 2],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let crate::config::ProblemSpec::Affine { matrix, offset } = &config.problem else {
        return None;
    };
    let [a1, a2, a3] = config.constant_alpha()?;
    let rational = |v: f64| Rational::from_float(v).unwrap();
    let map = ExactAffine::from_f64(matrix, offset);
    let star = exact_fixed_point(&map)?;
    let schedule = [rational(a1), rational(a2), rational(a3)];
    let x0: Vec<Rational> = config.run.x0.iter().map(|&v| rational(v)).collect();
    let steps = config.run.max_iterations.min(150);
    let mut out = Vec::new();
    for scheme in pair {
        let trace = exact_run(&map, scheme, schedule.clone(), x0.clone(), steps);
        out.push(exact_error_sequence(&trace, &star));
    }
    let b = out.pop().unwrap();
    let a = out.pop().unwrap();
    Some((a, b))
}

/// Solves `(I - A) x = b` by exact Gaussian elimination.
fn exact_fixed_point(map: &ExactAffine) -> Option<Vec<Rational>> {
    use num::{One, Zero};
    let d = map.offset.len();
    // augmented [I - A | b]
    let mut rows: Vec<Vec<Rational>> = (0..d)
        .map(|r| {
            let mut row: Vec<Rational> = (0..d)
                .map(|c| {
                    let id = if r == c { Rational::one() } else { Rational::zero() };
                    id - &map.matrix[r][c]
                })
                .collect();
            row.push(map.offset[r].clone());
            row
        })
        .collect();
    for col in 0..d {
        let pivot = (col..d).find(|&r| !rows[r][col].is_zero())?;
        rows.swap(col, pivot);
        let p = rows[col][col].clone();
        for v in rows[col][col..].iter_mut() {
            *v = &*v / &p;
        }
        let pivot_row = rows[col].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != col && !row[col].is_zero() {
                let f = row[col].clone();
                for (v, pv) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *v = &*v - &f * pv;
                }
            }
        }
    }
    Some(rows.into_iter().map(|row| row[d].clone()).collect())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Other(format!("serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn truncate(trace: &IterationTrace, n: usize) -> IterationTrace {
    IterationTrace {
        scheme: trace.scheme,
        iterates: trace.iterates[..n].to_vec(),
        errors: trace.errors.as_ref().map(|e| e[..n].to_vec()),
        residuals: trace.residuals[..n].to_vec(),
        schedule: trace.schedule.clone(),
        termination: trace.termination,
    }
}

pub fn load_traces(bundle: &Path) -> Result<TracesDocument, CliError> {
    let path = bundle.join(TRACES_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Malformed(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed(format!("{e}")))
}

pub fn load_analysis(bundle: &Path) -> Result<AnalysisDocument, CliError> {
    let path = bundle.join(ANALYSIS_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Malformed(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed(format!("{e}")))
}

pub fn load_manifest(bundle: &Path) -> Result<Manifest, CliError> {
    let path = bundle.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Malformed(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed(format!("{e}")))
}
