//! The acceptance suite: nine desk-scale checks covering convergence,
//! bound domination and tightness, the ratio test, equivalence, data
//! dependence, oracle agreement, the reduction identities, and the rate
//! direction report. Shared by the CLI `verify` verb and the acceptance
//! test target.

use crate::analysis::{
    equivalence_gap, lemma_recurrence_check, rate_direction_report, theoretical_bounds,
    theta_ratio_test, LemmaKind, LemmaRecurrence, RateClass,
};
use crate::datadep::{
    run_batch, seeded_constant_shift, standard_batch_cases, PerturbationMode, PerturbationSpec,
};
use crate::oracle::{
    compare_traces, exact_error_sequence, exact_run, ratio, ExactAffine, Rational,
};
use crate::problem::{ContractionProblem, ControlSchedule, Point};
use crate::schemes::{run_scheme, SchemeId, StopRule, Termination};
use num::{One, Zero};

/// Result of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        format!("{status} criterion {}: {} ({})", self.id, self.name, self.detail)
    }
}

fn outcome(id: usize, name: &'static str, result: Result<(bool, String), String>) -> CriterionOutcome {
    match result {
        Ok((passed, detail)) => CriterionOutcome {
            id,
            name,
            passed,
            detail,
        },
        Err(e) => CriterionOutcome {
            id,
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn half() -> ControlSchedule {
    ControlSchedule::constant(0.5, 0.5, 0.5)
}

fn c1_convergence() -> Result<(bool, String), String> {
    let problem = ContractionProblem::standard();
    let shifted = crate::datadep::make_approximate_operator(
        &problem,
        &PerturbationSpec::constant_shift(vec![0.1], 0.1).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let x0 = Point::scalar(0.0);
    let stop = StopRule::new(200, 1e-10);
    let mut converged = 0usize;
    let mut ko_final = None;
    for scheme in SchemeId::ALL {
        let prob = if scheme == SchemeId::KoPerturbed {
            &shifted
        } else {
            &problem
        };
        let trace =
            run_scheme(prob, scheme, &half(), &x0, stop).map_err(|e| e.to_string())?;
        let reached = trace.termination == Termination::ReachedTolerance
            && trace.errors.as_ref().unwrap().last().copied().unwrap() < 1e-10;
        if reached {
            converged += 1;
        }
        if scheme == SchemeId::Ko {
            ko_final = Some(trace.final_step());
        }
    }
    let ko_ok = ko_final == Some(24);
    Ok((
        converged == SchemeId::ALL.len() && ko_ok,
        format!(
            "{converged}/10 schemes below 1e-10 within 200 steps; ko stopped at n = {:?}",
            ko_final
        ),
    ))
}

fn c2_exponential_bound() -> Result<(bool, String), String> {
    let mut worst = f64::NEG_INFINITY;
    for delta in [0.3, 0.5, 0.9] {
        let problem = ContractionProblem::scalar_affine(delta, 1.0).map_err(|e| e.to_string())?;
        let trace = run_scheme(
            &problem,
            SchemeId::Ko,
            &half(),
            &Point::scalar(0.0),
            StopRule::exhaustive(101),
        )
        .map_err(|e| e.to_string())?;
        let errors = trace.errors.as_ref().unwrap();
        let bounds =
            theoretical_bounds(errors[0], delta, [0.5, 0.5, 0.5], 100).map_err(|e| e.to_string())?;
        for n in 0..=100 {
            let slack = errors[n + 1] - bounds.exp_bound[n] - 1e-12;
            worst = worst.max(slack);
        }
    }
    Ok((worst <= 0.0, format!("worst bound slack {worst:.3e}")))
}

fn c3_bound_tightness() -> Result<(bool, String), String> {
    // error sequences come from the exact oracle: measured floating errors
    // flatten at the rounded fixed point well before step 50, while the
    // exact errors keep the geometric decay the closed forms describe
    let mut worst = 0.0_f64;
    let schedule = [ratio(1, 2), ratio(1, 2), ratio(1, 2)];
    for a in [0.3, 0.5, 0.9] {
        let map = ExactAffine::from_f64(&[vec![a]], &[1.0]);
        let star = &map.offset[0] / (Rational::one() - &map.matrix[0][0]);
        let ko = exact_run(&map, SchemeId::Ko, schedule.clone(), vec![Rational::zero()], 51);
        let cr = exact_run(&map, SchemeId::Cr, schedule.clone(), vec![Rational::zero()], 51);
        let ko_err = exact_error_sequence(&ko, std::slice::from_ref(&star));
        let cr_err = exact_error_sequence(&cr, std::slice::from_ref(&star));
        let bounds =
            theoretical_bounds(ko_err[0], a, [0.5, 0.5, 0.5], 50).map_err(|e| e.to_string())?;
        for n in 0..=50 {
            let rel_ko = (ko_err[n + 1] - bounds.b_n[n]).abs() / bounds.b_n[n];
            let rel_cr = (cr_err[n + 1] - bounds.a_n[n]).abs() / bounds.a_n[n];
            worst = worst.max(rel_ko).max(rel_cr);
        }
    }
    Ok((worst <= 1e-12, format!("worst relative mismatch {worst:.3e}")))
}

fn c4_theta_ratio_test() -> Result<(bool, String), String> {
    let standard = theta_ratio_test(0.5, [0.5, 0.5, 0.5]).map_err(|e| e.to_string())?;
    let standard_ok = (standard.ratio - 21.0 / 23.0).abs() <= 1e-12 && standard.passes;

    let bounds = theoretical_bounds(2.0, 0.5, [0.5, 0.5, 0.5], 200).map_err(|e| e.to_string())?;
    let theta_small = bounds.theta_n.iter().any(|&t| t < 1e-6);

    let mut grid_ok = true;
    for delta in [0.3, 0.5, 0.9] {
        for a1 in [0.25, 0.5, 0.75] {
            for a23 in [0.25, 0.5, 0.75] {
                let t = theta_ratio_test(delta, [a1, a23, a23]).map_err(|e| e.to_string())?;
                if !(t.ratio < 1.0 && t.passes) {
                    grid_ok = false;
                }
            }
        }
    }
    // boundary: dyadic inputs make the algebraic identity exact in floats
    let boundary = theta_ratio_test(0.5, [1.0, 0.5, 0.5]).map_err(|e| e.to_string())?;
    let boundary_ok = boundary.ratio == 1.0 && !boundary.passes;

    Ok((
        standard_ok && theta_small && grid_ok && boundary_ok,
        format!(
            "ratio {:.12} at the standard point, 27-point grid below 1, boundary ratio {}",
            standard.ratio, boundary.ratio
        ),
    ))
}

fn c5_equivalence() -> Result<(bool, String), String> {
    let problem = ContractionProblem::standard();
    let sched = half();
    let x0 = Point::scalar(0.0);
    let ko = run_scheme(&problem, SchemeId::Ko, &sched, &x0, StopRule::exhaustive(200))
        .map_err(|e| e.to_string())?;
    let cr = run_scheme(&problem, SchemeId::Cr, &sched, &x0, StopRule::exhaustive(200))
        .map_err(|e| e.to_string())?;
    let gap = equivalence_gap(&ko, &cr, problem.delta()).map_err(|e| e.to_string())?;
    let gap_small = gap.gaps.iter().take(201).any(|&g| g < 1e-10);

    let errors = ko.errors.as_ref().unwrap();
    let delta = problem.delta();
    let n = gap.gaps.len();
    let coeff: Vec<f64> = (0..n).map(|k| sched.eval(k)[0] * (1.0 - delta)).collect();
    let forcing: Vec<f64> = (0..n)
        .map(|k| {
            let [a1, a2, a3] = sched.eval(k);
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
    .map_err(|e| e.to_string())?;

    Ok((
        gap_small && gap.recurrence_holds && verdict.hypotheses_hold && verdict.conclusion_holds,
        format!(
            "gap below 1e-10: {gap_small}, recurrence: {}, lemma hypotheses/conclusion: {}/{}",
            gap.recurrence_holds, verdict.hypotheses_hold, verdict.conclusion_holds
        ),
    ))
}

fn c6_data_dependence() -> Result<(bool, String), String> {
    let cases = standard_batch_cases(17);
    let reports = run_batch(&cases).map_err(|e| e.to_string())?;
    let mut all_ok = reports.len() >= 100;
    let mut worst_margin = f64::INFINITY;
    let mut worst_analytic = 0.0_f64;
    for (case, report) in cases.iter().zip(&reports) {
        worst_margin = worst_margin.min(report.margin);
        if report.margin < 0.0 || !report.recurrence_holds {
            all_ok = false;
        }
        // constant-shift scalar cases match the analytic gap |c| / (1 - a)
        let spec = seeded_constant_shift(1, case.seed, case.epsilon);
        let shift_norm = match &spec.mode {
            PerturbationMode::ConstantShift(c) => c.norm(),
            PerturbationMode::SeededBounded { .. } => unreachable!(),
        };
        let analytic = shift_norm / (1.0 - case.delta);
        let gap = (report.observed_gap - analytic).abs();
        worst_analytic = worst_analytic.max(gap);
        if gap > 1e-12 {
            all_ok = false;
        }
    }
    Ok((
        all_ok,
        format!(
            "{} experiments, worst margin {worst_margin:.3e}, worst analytic-gap mismatch {worst_analytic:.3e}",
            reports.len()
        ),
    ))
}

fn c7_oracle_equivalence() -> Result<(bool, String), String> {
    let problem = ContractionProblem::standard();
    let shifted = crate::datadep::make_approximate_operator(
        &problem,
        &PerturbationSpec::constant_shift(vec![0.1], 0.1).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let exact_standard = ExactAffine::standard();
    let exact_shifted = ExactAffine::from_f64(&[vec![0.5]], &[1.0 + 0.1]);
    let schedule = [ratio(1, 2), ratio(1, 2), ratio(1, 2)];
    let mut max_gap = 0.0_f64;
    for scheme in SchemeId::ALL {
        let (prob, exact_map) = if scheme == SchemeId::KoPerturbed {
            (&shifted, &exact_shifted)
        } else {
            (&problem, &exact_standard)
        };
        let float_trace = run_scheme(
            prob,
            scheme,
            &half(),
            &Point::scalar(0.0),
            StopRule::exhaustive(50),
        )
        .map_err(|e| e.to_string())?;
        let exact = exact_run(
            exact_map,
            scheme,
            schedule.clone(),
            vec![Rational::zero()],
            50,
        );
        let cmp = compare_traces(&float_trace, &exact, 1e-12).map_err(|e| e.to_string())?;
        max_gap = max_gap.max(cmp.max_abs_gap);
        if !cmp.pass {
            return Ok((false, format!("{scheme} diverged from oracle at {:?}", cmp.first_violation)));
        }
    }
    Ok((true, format!("max float-vs-exact gap {max_gap:.3e} over 10 schemes")))
}

fn traces_bit_equal(a: &[Point], b: &[Point]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.0.iter()
                .zip(&y.0)
                .all(|(u, v)| u.to_bits() == v.to_bits())
        })
}

fn c8_reduction_identities() -> Result<(bool, String), String> {
    let problem = ContractionProblem::standard();
    let starts = [0.0, 3.5, -1.25];
    let stop = StopRule::exhaustive(50);
    let mut failures = Vec::new();

    let mut check = |name: &str,
                     lhs: (SchemeId, ControlSchedule),
                     rhs: (SchemeId, ControlSchedule)|
     -> Result<(), String> {
        for &s in &starts {
            let x0 = Point::scalar(s);
            let a = run_scheme(&problem, lhs.0, &lhs.1, &x0, stop).map_err(|e| e.to_string())?;
            let b = run_scheme(&problem, rhs.0, &rhs.1, &x0, stop).map_err(|e| e.to_string())?;
            if !traces_bit_equal(&a.iterates, &b.iterates) {
                failures.push(format!("{name} from {s}"));
            }
        }
        Ok(())
    };

    check(
        "noor(a2=a3=0) = mann",
        (SchemeId::Noor, ControlSchedule::constant(0.7, 0.0, 0.0)),
        (SchemeId::Mann, ControlSchedule::constant(0.7, 0.0, 0.0)),
    )?;
    check(
        "noor(a3=0) = ishikawa",
        (SchemeId::Noor, ControlSchedule::constant(0.7, 0.3, 0.0)),
        (SchemeId::Ishikawa, ControlSchedule::constant(0.7, 0.3, 0.0)),
    )?;
    check(
        "sp(a3=0) = two-step mann",
        (SchemeId::Sp, ControlSchedule::constant(0.7, 0.3, 0.0)),
        (SchemeId::TwoStepMann, ControlSchedule::constant(0.7, 0.3, 0.0)),
    )?;
    check(
        "s(a2=0) = picard",
        (SchemeId::S, ControlSchedule::constant(0.5, 0.0, 0.0)),
        (SchemeId::Picard, ControlSchedule::constant(0.5, 0.0, 0.0)),
    )?;
    check(
        "cr(0,0,0) = picard",
        (SchemeId::Cr, ControlSchedule::constant(0.0, 0.0, 0.0)),
        (SchemeId::Picard, ControlSchedule::constant(0.0, 0.0, 0.0)),
    )?;
    check(
        "ko(a1=0) = picard",
        (SchemeId::Ko, ControlSchedule::constant(0.0, 0.3, 0.7)),
        (SchemeId::Picard, ControlSchedule::constant(0.0, 0.3, 0.7)),
    )?;

    // ko(1,1,1) steps are triple Picard applications
    for &s in &starts {
        let x0 = Point::scalar(s);
        let ko = run_scheme(
            &problem,
            SchemeId::Ko,
            &ControlSchedule::constant(1.0, 1.0, 1.0),
            &x0,
            stop,
        )
        .map_err(|e| e.to_string())?;
        let picard = run_scheme(
            &problem,
            SchemeId::Picard,
            &ControlSchedule::constant(1.0, 1.0, 1.0),
            &x0,
            StopRule::exhaustive(150),
        )
        .map_err(|e| e.to_string())?;
        let ok = ko
            .iterates
            .iter()
            .enumerate()
            .all(|(n, p)| p.0[0].to_bits() == picard.iterates[3 * n].0[0].to_bits());
        if !ok {
            failures.push(format!("ko(1,1,1) = picard^3 from {s}"));
        }
    }

    Ok((
        failures.is_empty(),
        if failures.is_empty() {
            "seven identities bit-exact over 50 steps and three starts".to_string()
        } else {
            format!("failed: {}", failures.join(", "))
        },
    ))
}

fn c9_rate_direction() -> Result<(bool, String), String> {
    let map = ExactAffine::standard();
    let schedule = [ratio(1, 2), ratio(1, 2), ratio(1, 2)];
    let star = [ratio(2, 1)];
    let ko = exact_run(&map, SchemeId::Ko, schedule.clone(), vec![Rational::zero()], 200);
    let cr = exact_run(&map, SchemeId::Cr, schedule, vec![Rational::zero()], 200);
    let ko_err = exact_error_sequence(&ko, &star);
    let cr_err = exact_error_sequence(&cr, &star);
    let report = rate_direction_report(&cr_err, &ko_err, 0.5, [0.5, 0.5, 0.5])
        .map_err(|e| e.to_string())?;
    let ok = report.empirical.classification == RateClass::FirstFaster
        && report.empirical.estimated_limit <= 0.01
        && !report.theta_n.is_empty()
        && report.notes.iter().any(|n| n.contains("abstract"));
    Ok((
        ok,
        format!(
            "classification {:?}, estimated limit {:.3e}, bound ratio {:.9}",
            report.empirical.classification, report.empirical.estimated_limit, report.theta_step_ratio
        ),
    ))
}

/// Runs every acceptance criterion and returns the per-criterion results.
pub fn run_all() -> Vec<CriterionOutcome> {
    vec![
        outcome(1, "convergence of all schemes", c1_convergence()),
        outcome(2, "exponential error bound", c2_exponential_bound()),
        outcome(3, "closed-form bound tightness", c3_bound_tightness()),
        outcome(4, "theta ratio test", c4_theta_ratio_test()),
        outcome(5, "ko-cr equivalence", c5_equivalence()),
        outcome(6, "data dependence", c6_data_dependence()),
        outcome(7, "oracle equivalence", c7_oracle_equivalence()),
        outcome(8, "reduction identities", c8_reduction_identities()),
        outcome(9, "rate direction report", c9_rate_direction()),
    ]
}
