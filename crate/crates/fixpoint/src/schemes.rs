//! One deterministic step of every iteration scheme, and the run loop
//! that produces traces.
//!
//! Every step is built from the same convex-combination helper with a
//! fixed sub-step evaluation order, so traces are reproducible and the
//! classical reductions (Noor to Ishikawa/Mann, SP to two-step Mann,
//! degenerate collapses to Picard) hold bit-exactly.

use std::fmt;

use crate::error::{Error, Result};
use crate::problem::{ContractionProblem, ControlSchedule, Point};

/// The iteration schemes covered by this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    Picard,
    Mann,
    Ishikawa,
    Noor,
    Sp,
    TwoStepMann,
    S,
    Cr,
    Ko,
    KoPerturbed,
}

impl SchemeId {
    pub const ALL: [SchemeId; 10] = [
        SchemeId::Picard,
        SchemeId::Mann,
        SchemeId::Ishikawa,
        SchemeId::Noor,
        SchemeId::Sp,
        SchemeId::TwoStepMann,
        SchemeId::S,
        SchemeId::Cr,
        SchemeId::Ko,
        SchemeId::KoPerturbed,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            SchemeId::Picard => "picard",
            SchemeId::Mann => "mann",
            SchemeId::Ishikawa => "ishikawa",
            SchemeId::Noor => "noor",
            SchemeId::Sp => "sp",
            SchemeId::TwoStepMann => "two-step-mann",
            SchemeId::S => "s",
            SchemeId::Cr => "cr",
            SchemeId::Ko => "ko",
            SchemeId::KoPerturbed => "ko-perturbed",
        }
    }

    pub fn parse(s: &str) -> Option<SchemeId> {
        SchemeId::ALL.iter().copied().find(|id| id.tag() == s)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ReachedMaxIterations,
    ReachedTolerance,
}

/// Stop rule for `run_scheme`: the run ends at `max_iterations` or at the
/// first step whose error (fixed point known) or residual (unknown) is
/// at or below `tolerance`.
#[derive(Debug, Clone, Copy)]
pub struct StopRule {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl StopRule {
    pub fn new(max_iterations: usize, tolerance: f64) -> Self {
        StopRule {
            max_iterations,
            tolerance,
        }
    }

    /// Runs to `max_iterations` with no early exit.
    pub fn exhaustive(max_iterations: usize) -> Self {
        StopRule {
            max_iterations,
            tolerance: -1.0,
        }
    }
}

/// The ordered iterates of one scheme run with per-step errors and
/// residuals. Intermediate sub-step points are recomputed per step and
/// not persisted.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub scheme: SchemeId,
    pub iterates: Vec<Point>,
    /// `||x_n - x*||`, present only when the fixed point is known.
    pub errors: Option<Vec<f64>>,
    /// `||x_n - T x_n||`.
    pub residuals: Vec<f64>,
    pub schedule: ControlSchedule,
    pub termination: Termination,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    /// Index of the final iterate (the step count at termination).
    pub fn final_step(&self) -> usize {
        self.iterates.len() - 1
    }
}

pub fn step_picard(problem: &ContractionProblem, x: &Point) -> Result<Point> {
    problem.apply(x)
}

pub fn step_mann(problem: &ContractionProblem, x: &Point, alpha: [f64; 3]) -> Result<Point> {
    let [a1, _, _] = alpha;
    Ok(x.lerp(&problem.apply(x)?, a1))
}

pub fn step_ishikawa(problem: &ContractionProblem, x: &Point, alpha: [f64; 3]) -> Result<Point> {
    let [a1, a2, _] = alpha;
    let y = x.lerp(&problem.apply(x)?, a2);
    Ok(x.lerp(&problem.apply(&y)?, a1))
}

/// Noor step: z = (1-a3)x + a3 Tx, y = (1-a2)x + a2 Tz, x+ = (1-a1)x + a1 Ty.
pub fn step_noor(problem: &ContractionProblem, x: &Point, alpha: [f64; 3]) -> Result<Point> {
    let [a1, a2, a3] = alpha;
    let z = x.lerp(&problem.apply(x)?, a3);
    let y = x.lerp(&problem.apply(&z)?, a2);
    Ok(x.lerp(&problem.apply(&y)?, a1))
}

/// SP step: z = (1-a3)x + a3 Tx, y = (1-a2)z + a2 Tz, x+ = (1-a1)y + a1 Ty.
pub fn step_sp(problem: &ContractionProblem, x: &Point, alpha: [f64; 3]) -> Result<Point> {
    let [a1, a2, a3] = alpha;
    let z = x.lerp(&problem.apply(x)?, a3);
    let y = z.lerp(&problem.apply(&z)?, a2);
    Ok(y.lerp(&problem.apply(&y)?, a1))
}

pub fn step_two_step_mann(
    problem: &ContractionProblem,
    x: &Point,
    alpha: [f64; 3],
) -> Result<Point> {
    let [a1, a2, _] = alpha;
    let y = x.lerp(&problem.apply(x)?, a2);
    Ok(y.lerp(&problem.apply(&y)?, a1))
}

/// S step: t = (1-a2)s + a2 Ts, s+ = (1-a1)Ts + a1 Tt.
pub fn step_s(problem: &ContractionProblem, s: &Point, alpha: [f64; 3]) -> Result<Point> {
    let [a1, a2, _] = alpha;
    let ts = problem.apply(s)?;
    let t = s.lerp(&ts, a2);
    Ok(ts.lerp(&problem.apply(&t)?, a1))
}

/// CR step: y = (1-a3)u + a3 Tu, v = (1-a2)Tu + a2 Ty, u+ = (1-a1)v + a1 Tv.
pub fn step_cr(problem: &ContractionProblem, u: &Point, alpha: [f64; 3]) -> Result<Point> {
    let [a1, a2, a3] = alpha;
    let tu = problem.apply(u)?;
    let y = u.lerp(&tu, a3);
    let v = tu.lerp(&problem.apply(&y)?, a2);
    Ok(v.lerp(&problem.apply(&v)?, a1))
}

/// Karahan-Ozdemir step: r = (1-a3)p + a3 Tp, q = (1-a2)Tp + a2 Tr,
/// p+ = (1-a1)Tp + a1 Tq.
pub fn step_ko(problem: &ContractionProblem, p: &Point, alpha: [f64; 3]) -> Result<Point> {
    let [a1, a2, a3] = alpha;
    let tp = problem.apply(p)?;
    let r = p.lerp(&tp, a3);
    let q = tp.lerp(&problem.apply(&r)?, a2);
    Ok(tp.lerp(&problem.apply(&q)?, a1))
}

/// Same structure as `step_ko` with every application of T replaced by
/// the approximate operator carried by `approx_problem`.
pub fn step_ko_perturbed(
    approx_problem: &ContractionProblem,
    p: &Point,
    alpha: [f64; 3],
) -> Result<Point> {
    step_ko(approx_problem, p, alpha)
}

/// Dispatches one step of `scheme`.
pub fn step(
    problem: &ContractionProblem,
    scheme: SchemeId,
    x: &Point,
    alpha: [f64; 3],
) -> Result<Point> {
    match scheme {
        SchemeId::Picard => step_picard(problem, x),
        SchemeId::Mann => step_mann(problem, x, alpha),
        SchemeId::Ishikawa => step_ishikawa(problem, x, alpha),
        SchemeId::Noor => step_noor(problem, x, alpha),
        SchemeId::Sp => step_sp(problem, x, alpha),
        SchemeId::TwoStepMann => step_two_step_mann(problem, x, alpha),
        SchemeId::S => step_s(problem, x, alpha),
        SchemeId::Cr => step_cr(problem, x, alpha),
        SchemeId::Ko => step_ko(problem, x, alpha),
        SchemeId::KoPerturbed => step_ko_perturbed(problem, x, alpha),
    }
}

/// Runs `scheme` from `x0` under `schedule` until the stop rule fires.
///
/// The stop criterion is the true error when the fixed point is known and
/// the residual `||x_n - T x_n||` otherwise; the residual is a sound
/// proxy since it is bounded by `(1 + delta)` times the error.
pub fn run_scheme(
    problem: &ContractionProblem,
    scheme: SchemeId,
    schedule: &ControlSchedule,
    x0: &Point,
    stop: StopRule,
) -> Result<IterationTrace> {
    if x0.dim() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: x0.dim(),
        });
    }
    let star = problem.fixed_point();
    let mut iterates = vec![x0.clone()];
    let mut errors: Option<Vec<f64>> = star.map(|_| Vec::new());
    let mut residuals = Vec::new();
    let mut termination = Termination::ReachedMaxIterations;

    let mut n = 0usize;
    loop {
        let current = iterates.last().unwrap().clone();
        if !current.is_finite() {
            return Err(Error::DivergedIterate { step: n });
        }
        let image = problem.apply(&current)?;
        let residual = current.distance(&image);
        residuals.push(residual);
        let criterion = match star {
            Some(star) => {
                let e = current.distance(star);
                errors.as_mut().unwrap().push(e);
                e
            }
            None => residual,
        };
        if criterion <= stop.tolerance {
            termination = Termination::ReachedTolerance;
            break;
        }
        if n >= stop.max_iterations {
            break;
        }
        let next = step(problem, scheme, &current, schedule.eval(n))?;
        iterates.push(next);
        n += 1;
    }

    Ok(IterationTrace {
        scheme,
        iterates,
        errors,
        residuals,
        schedule: schedule.clone(),
        termination,
    })
}
