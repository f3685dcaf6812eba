//! Approximate operators, the perturbed KO run, and the data-dependence
//! bound check.

use crate::error::{Error, Result};
use crate::problem::{
    seeded_offset, AffineMap, ContractionMap, ContractionProblem, ControlSchedule, Point,
};
use crate::schemes::{run_scheme, SchemeId, StopRule, Termination};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How the approximate operator differs from the base map.
#[derive(Debug, Clone)]
pub enum PerturbationMode {
    /// `T~(x) = T(x) + c` with `||c|| <= epsilon`. Preserves the
    /// contraction factor; on affine problems the perturbed fixed point
    /// is known analytically.
    ConstantShift(Point),
    /// Deterministic per-point offset of norm below epsilon, keyed on the
    /// seed, so the perturbed map is a true function.
    SeededBounded { seed: u64 },
}

/// Sup-norm perturbation budget plus the perturbation mode.
#[derive(Debug, Clone)]
pub struct PerturbationSpec {
    pub epsilon: f64,
    pub mode: PerturbationMode,
}

impl PerturbationSpec {
    pub fn constant_shift(shift: Vec<f64>, epsilon: f64) -> Result<Self> {
        let c = Point::new(shift)?;
        if c.norm() > epsilon {
            return Err(Error::OffsetBudgetExceeded {
                norm: c.norm(),
                epsilon,
            });
        }
        Ok(PerturbationSpec {
            epsilon,
            mode: PerturbationMode::ConstantShift(c),
        })
    }

    pub fn seeded_bounded(seed: u64, epsilon: f64) -> Self {
        PerturbationSpec {
            epsilon,
            mode: PerturbationMode::SeededBounded { seed },
        }
    }
}

/// Builds the approximate operator `T~` as a new problem.
///
/// For a constant shift on an affine problem the perturbed fixed point
/// `(I - A)^{-1}(b + c)` is carried along; otherwise no fixed point is
/// claimed.
pub fn make_approximate_operator(
    problem: &ContractionProblem,
    spec: &PerturbationSpec,
) -> Result<ContractionProblem> {
    if spec.epsilon < 0.0 {
        return Err(Error::OffsetBudgetExceeded {
            norm: 0.0,
            epsilon: spec.epsilon,
        });
    }
    match &spec.mode {
        PerturbationMode::ConstantShift(c) => {
            if c.dim() != problem.dim() {
                return Err(Error::DimensionMismatch {
                    expected: problem.dim(),
                    got: c.dim(),
                });
            }
            if c.norm() > spec.epsilon {
                return Err(Error::OffsetBudgetExceeded {
                    norm: c.norm(),
                    epsilon: spec.epsilon,
                });
            }
            if let ContractionMap::Affine(AffineMap { matrix, offset }) = problem.map() {
                // shifted affine map stays affine with the same factor
                let mut shifted = offset.clone();
                for (o, ci) in shifted.iter_mut().zip(&c.0) {
                    *o += ci;
                }
                let star = crate::problem::solve_affine_fixed_point(matrix, &shifted)?;
                let map = ContractionMap::Affine(AffineMap {
                    matrix: matrix.clone(),
                    offset: shifted,
                });
                return Ok(ContractionProblem::with_map(
                    map,
                    problem.delta(),
                    problem.dim(),
                    Some(star),
                ));
            }
            let map = ContractionMap::Shifted {
                base: Box::new(problem.map().clone()),
                shift: c.0.clone(),
            };
            Ok(ContractionProblem::with_map(
                map,
                problem.delta(),
                problem.dim(),
                None,
            ))
        }
        PerturbationMode::SeededBounded { seed } => {
            let map = ContractionMap::SeededOffset {
                base: Box::new(problem.map().clone()),
                seed: *seed,
                epsilon: spec.epsilon,
            };
            Ok(ContractionProblem::with_map(
                map,
                problem.delta(),
                problem.dim(),
                None,
            ))
        }
    }
}

/// Samples the sup distance `||T x - T~ x||` over `samples` seeded points
/// and returns the maximum observed.
pub fn sampled_operator_distance(
    problem: &ContractionProblem,
    approx: &ContractionProblem,
    samples: usize,
    range: f64,
    seed: u64,
) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut sup = 0.0_f64;
    for _ in 0..samples {
        let x = Point(
            (0..problem.dim())
                .map(|_| rng.gen_range(-range..range))
                .collect(),
        );
        let d = problem.apply(&x)?.distance(&approx.apply(&x)?);
        sup = sup.max(d);
    }
    Ok(sup)
}

/// Outcome of one data-dependence experiment.
#[derive(Debug, Clone)]
pub struct DataDependenceReport {
    pub epsilon: f64,
    pub delta: f64,
    /// The theoretical bound `5 epsilon / (1 - delta)`.
    pub bound: f64,
    /// `||x* - x~*||` with the perturbed fixed point taken as the
    /// converged final iterate of the perturbed run.
    pub observed_gap: f64,
    pub margin: f64,
    /// Whether the per-step gap recurrence held at every step.
    pub recurrence_holds: bool,
}

/// The theoretical data-dependence bound.
pub fn data_dependence_bound(epsilon: f64, delta: f64) -> f64 {
    5.0 * epsilon / (1.0 - delta)
}

/// Runs KO on `T` and the perturbed KO recursion on `T~` from the same
/// start, then compares the observed fixed-point gap against the bound
/// `5 epsilon / (1 - delta)` and checks the per-step recurrence
/// `d_{n+1} <= [1 - a1(1-d)] d_n + a1(1-d) * 5 eps/(1-d) + 1e-12`.
///
/// The schedule must keep `alpha_n^1 >= 1/2` everywhere and have a
/// divergent alpha1 series; anything else is rejected before running.
pub fn data_dependence_experiment(
    problem: &ContractionProblem,
    spec: &PerturbationSpec,
    schedule: &ControlSchedule,
    x0: &Point,
    stop: StopRule,
) -> Result<DataDependenceReport> {
    if schedule.alpha1_infimum() < 0.5 {
        return Err(Error::InadmissibleSchedule {
            reason: format!(
                "data dependence requires alpha_n^1 >= 1/2, infimum is {}",
                schedule.alpha1_infimum()
            ),
        });
    }
    if !schedule.alpha1_sum_diverges() {
        return Err(Error::InadmissibleSchedule {
            reason: "data dependence requires a divergent alpha1 series".into(),
        });
    }
    let star = problem.fixed_point().ok_or(Error::MissingFixedPoint)?.clone();
    let approx = make_approximate_operator(problem, spec)?;

    let base_trace = run_scheme(problem, SchemeId::Ko, schedule, x0, stop)?;
    let perturbed_trace = run_scheme(&approx, SchemeId::KoPerturbed, schedule, x0, stop)?;
    if perturbed_trace.termination != Termination::ReachedTolerance
        && approx.fixed_point().is_some()
    {
        return Err(Error::InadmissibleSchedule {
            reason: "perturbed run did not converge within the step budget".into(),
        });
    }

    let perturbed_star = perturbed_trace.iterates.last().unwrap();
    let observed_gap = star.distance(perturbed_star);
    let delta = problem.delta();
    let bound = data_dependence_bound(spec.epsilon, delta);

    // per-step recurrence over the shared prefix
    let shared = base_trace.len().min(perturbed_trace.len());
    let mut recurrence_holds = true;
    for n in 0..shared.saturating_sub(1) {
        let d_n = base_trace.iterates[n].distance(&perturbed_trace.iterates[n]);
        let d_next = base_trace.iterates[n + 1].distance(&perturbed_trace.iterates[n + 1]);
        let a1 = schedule.eval(n)[0];
        let rhs = (1.0 - a1 * (1.0 - delta)) * d_n + a1 * (1.0 - delta) * bound + 1e-12;
        if d_next > rhs {
            recurrence_holds = false;
            break;
        }
    }

    Ok(DataDependenceReport {
        epsilon: spec.epsilon,
        delta,
        bound,
        observed_gap,
        margin: bound - observed_gap,
        recurrence_holds,
    })
}

/// One case of a seeded perturbation batch over scalar affine problems.
#[derive(Debug, Clone)]
pub struct BatchCase {
    pub delta: f64,
    pub epsilon: f64,
    pub seed: u64,
}

/// Derives a constant shift from the seed: a direction and a magnitude
/// below `epsilon`, so the perturbed map stays a contraction with the
/// same factor and the batch remains deterministic per seed.
pub fn seeded_constant_shift(dim: usize, seed: u64, epsilon: f64) -> PerturbationSpec {
    let raw = seeded_offset(&vec![0.0; dim], seed, epsilon);
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let shift = if norm == 0.0 {
        let mut s = vec![0.0; dim];
        s[0] = epsilon / 2.0;
        s
    } else {
        raw
    };
    PerturbationSpec::constant_shift(shift, epsilon).expect("offset within budget by construction")
}

fn run_batch_case(case: &BatchCase) -> Result<DataDependenceReport> {
    let problem = ContractionProblem::scalar_affine(case.delta, 1.0)?;
    let spec = seeded_constant_shift(1, case.seed, case.epsilon);
    data_dependence_experiment(
        &problem,
        &spec,
        &ControlSchedule::constant(0.5, 0.5, 0.5),
        &Point::scalar(0.0),
        StopRule::new(20_000, 1e-12),
    )
}

/// Sequential batch runner.
pub fn run_batch_seq(cases: &[BatchCase]) -> Result<Vec<DataDependenceReport>> {
    cases.iter().map(run_batch_case).collect()
}

/// Batch runner; data-parallel over cases when the `parallel` feature is
/// enabled, sequential otherwise.
#[cfg(feature = "parallel")]
pub fn run_batch(cases: &[BatchCase]) -> Result<Vec<DataDependenceReport>> {
    cases.par_iter().map(run_batch_case).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_batch(cases: &[BatchCase]) -> Result<Vec<DataDependenceReport>> {
    run_batch_seq(cases)
}

/// The standard seeded grid: `seeds x epsilon in {0.01, 0.1} x delta in
/// {0.3, 0.5, 0.9}` scalar affine cases.
pub fn standard_batch_cases(seeds: u64) -> Vec<BatchCase> {
    let mut cases = Vec::new();
    for seed in 0..seeds {
        for epsilon in [0.01, 0.1] {
            for delta in [0.3, 0.5, 0.9] {
                cases.push(BatchCase {
                    delta,
                    epsilon,
                    seed,
                });
            }
        }
    }
    cases
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_shift_standard_problem() {
        let p = ContractionProblem::standard();
        let spec = PerturbationSpec::constant_shift(vec![0.1], 0.1).unwrap();
        let approx = make_approximate_operator(&p, &spec).unwrap();
        // T~(x) = 0.5x + 1.1 with fixed point 2.2
        assert_eq!(approx.apply(&Point::scalar(0.0)).unwrap().0[0], 1.1);
        assert!((approx.fixed_point().unwrap().0[0] - 2.2).abs() < 1e-12);
    }

    #[test]
    fn zero_shift_is_identity_perturbation() {
        let p = ContractionProblem::standard();
        let spec = PerturbationSpec::constant_shift(vec![0.0], 0.1).unwrap();
        let approx = make_approximate_operator(&p, &spec).unwrap();
        for x in [-3.0, 0.0, 0.7, 2.0] {
            assert_eq!(
                p.apply(&Point::scalar(x)).unwrap().0,
                approx.apply(&Point::scalar(x)).unwrap().0
            );
        }
    }

    #[test]
    fn shift_budget_enforced() {
        assert!(PerturbationSpec::constant_shift(vec![0.2], 0.1).is_err());
    }

    #[test]
    fn seeded_bounded_sup_distance_within_budget() {
        let p = ContractionProblem::standard();
        let spec = PerturbationSpec::seeded_bounded(7, 0.1);
        let approx = make_approximate_operator(&p, &spec).unwrap();
        let sup = sampled_operator_distance(&p, &approx, 1000, 100.0, 7).unwrap();
        assert!(sup <= 0.1 + 1e-12, "sup = {sup}");
        assert!(sup > 0.0);
    }

    #[test]
    fn seeded_bounded_is_a_function() {
        let p = ContractionProblem::standard();
        let approx =
            make_approximate_operator(&p, &PerturbationSpec::seeded_bounded(3, 0.05)).unwrap();
        let x = Point::scalar(1.2345);
        assert_eq!(approx.apply(&x).unwrap().0, approx.apply(&x).unwrap().0);
    }

    #[test]
    fn standard_experiment_report() {
        let p = ContractionProblem::standard();
        let spec = PerturbationSpec::constant_shift(vec![0.1], 0.1).unwrap();
        let report = data_dependence_experiment(
            &p,
            &spec,
            &ControlSchedule::constant(0.5, 0.5, 0.5),
            &Point::scalar(0.0),
            StopRule::new(10_000, 1e-12),
        )
        .unwrap();
        // x~* - x* = 0.1 / 0.5 = 0.2 exactly for the scalar affine shift
        assert!((report.observed_gap - 0.2).abs() < 1e-12);
        assert_eq!(report.bound, 1.0);
        assert!((report.margin - 0.8).abs() < 1e-12);
        assert!(report.recurrence_holds);
    }

    #[test]
    fn zero_epsilon_gives_zero_gap() {
        let p = ContractionProblem::standard();
        let spec = PerturbationSpec::constant_shift(vec![0.0], 0.0).unwrap();
        let report = data_dependence_experiment(
            &p,
            &spec,
            &ControlSchedule::constant(0.5, 0.5, 0.5),
            &Point::scalar(0.0),
            StopRule::new(10_000, 1e-12),
        )
        .unwrap();
        assert!(report.observed_gap <= 1e-12);
    }

    #[test]
    fn small_alpha1_rejected_before_running() {
        let p = ContractionProblem::standard();
        let spec = PerturbationSpec::constant_shift(vec![0.1], 0.1).unwrap();
        let err = data_dependence_experiment(
            &p,
            &spec,
            &ControlSchedule::constant(0.25, 0.5, 0.5),
            &Point::scalar(0.0),
            StopRule::new(100, 1e-12),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InadmissibleSchedule { .. }));
    }

    #[test]
    fn harmonic_complement_schedule_admissible() {
        let p = ContractionProblem::standard();
        let spec = PerturbationSpec::constant_shift(vec![0.05], 0.1).unwrap();
        let report = data_dependence_experiment(
            &p,
            &spec,
            &ControlSchedule::HarmonicComplement,
            &Point::scalar(0.0),
            StopRule::new(10_000, 1e-12),
        )
        .unwrap();
        assert!(report.margin >= 0.0);
        assert!(report.recurrence_holds);
    }

    #[test]
    fn batch_margins_nonnegative() {
        let reports = run_batch(&standard_batch_cases(17)).unwrap();
        assert!(reports.len() >= 100);
        for r in &reports {
            assert!(r.margin >= -1e-10, "margin {} at eps {} delta {}", r.margin, r.epsilon, r.delta);
            assert!(r.recurrence_holds);
            // sharper analytic fact for constant shifts on affine problems
            assert!(r.observed_gap <= r.epsilon / (1.0 - r.delta) + 1e-10);
        }
    }

    #[test]
    fn batch_parallel_matches_sequential() {
        let cases = standard_batch_cases(5);
        let seq = run_batch_seq(&cases).unwrap();
        let par = run_batch(&cases).unwrap();
        assert_eq!(seq.len(), par.len());
        for (a, b) in seq.iter().zip(&par) {
            assert_eq!(a.observed_gap.to_bits(), b.observed_gap.to_bits());
        }
    }
}
