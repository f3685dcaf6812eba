use fixpoint::analysis::{compare_rates, RateThresholds};
use fixpoint::oracle::{compare_traces, exact_run, ExactAffine, Rational};
use fixpoint::problem::{ContractionProblem, ControlSchedule, Point};
use fixpoint::schemes::{run_scheme, SchemeId, StopRule};
use proptest::prelude::*;

fn any_scheme() -> impl Strategy<Value = SchemeId> {
    prop::sample::select(SchemeId::ALL.to_vec())
}

// keep away from 0 and 1 so schedules and contractions stay admissible
fn unit_open() -> impl Strategy<Value = f64> {
    0.05f64..0.95
}

fn bits_equal(a: &Point, b: &Point) -> bool {
    a.0.len() == b.0.len()
        && a.0
            .iter()
            .zip(&b.0)
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

proptest! {
    #[test]
    fn sampled_contraction_holds_for_random_affine(
        a in -0.95f64..0.95,
        b in -50.0f64..50.0,
        seed in any::<u64>(),
    ) {
        let delta = a.abs().max(1e-6);
        let p = ContractionProblem::scalar_affine(a, b).unwrap();
        prop_assert!(p.sampled_contraction_check(64, 100.0, seed).is_ok());
        prop_assert!((p.delta() - delta).abs() < 1e-15);
    }

    #[test]
    fn schedule_values_always_admissible(
        c1 in 0.0f64..=1.0,
        c2 in 0.0f64..=1.0,
        c3 in 0.0f64..=1.0,
        n in 0usize..10_000,
    ) {
        for sched in [
            ControlSchedule::constant(c1, c2, c3),
            ControlSchedule::HarmonicComplement,
            ControlSchedule::Harmonic,
        ] {
            for v in sched.eval(n) {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn fixed_point_absorbs_every_scheme(
        scheme in any_scheme(),
        a1 in unit_open(),
        a2 in unit_open(),
        a3 in unit_open(),
    ) {
        let p = ContractionProblem::standard();
        let sched = ControlSchedule::constant(a1, a2, a3);
        let trace = run_scheme(&p, scheme, &sched, &Point::scalar(2.0), StopRule::exhaustive(10)).unwrap();
        for x in &trace.iterates {
            prop_assert_eq!(x.0[0].to_bits(), 2.0f64.to_bits());
        }
    }

    #[test]
    fn trace_length_respects_stop_rule(
        scheme in any_scheme(),
        a1 in unit_open(),
        max in 1usize..40,
    ) {
        let p = ContractionProblem::standard();
        let sched = ControlSchedule::constant(a1, 0.5, 0.5);
        let trace = run_scheme(&p, scheme, &sched, &Point::scalar(0.0), StopRule::new(max, 1e-8)).unwrap();
        prop_assert!(trace.len() <= max + 1);
        prop_assert!(!trace.iterates.is_empty());
    }

    #[test]
    fn degenerate_weights_collapse_schemes(
        a1 in 0.0f64..=1.0,
        a2 in 0.0f64..=1.0,
        x0 in -20.0f64..20.0,
    ) {
        // zero inner weights reduce the longer schemes to their shorter
        // ancestors bit for bit, whatever the remaining weights are
        let p = ContractionProblem::standard();
        let stop = StopRule::exhaustive(20);
        let start = Point::scalar(x0);

        let pairs = [
            (SchemeId::Noor, ControlSchedule::constant(a1, 0.0, 0.0),
             SchemeId::Mann, ControlSchedule::constant(a1, 0.0, 0.0)),
            (SchemeId::Noor, ControlSchedule::constant(a1, a2, 0.0),
             SchemeId::Ishikawa, ControlSchedule::constant(a1, a2, 0.0)),
            (SchemeId::Sp, ControlSchedule::constant(a1, a2, 0.0),
             SchemeId::TwoStepMann, ControlSchedule::constant(a1, a2, 0.0)),
            (SchemeId::Cr, ControlSchedule::constant(0.0, 0.0, 0.0),
             SchemeId::Picard, ControlSchedule::constant(0.0, 0.0, 0.0)),
            (SchemeId::Ko, ControlSchedule::constant(0.0, a1, a2),
             SchemeId::Picard, ControlSchedule::constant(0.0, a1, a2)),
        ];
        for (s1, c1, s2, c2) in pairs {
            let t1 = run_scheme(&p, s1, &c1, &start, stop).unwrap();
            let t2 = run_scheme(&p, s2, &c2, &start, stop).unwrap();
            prop_assert_eq!(t1.len(), t2.len());
            for (x, y) in t1.iterates.iter().zip(&t2.iterates) {
                prop_assert!(bits_equal(x, y));
            }
        }
    }

    #[test]
    fn float_traces_track_the_exact_oracle(
        scheme in any_scheme(),
        a1 in unit_open(),
        a2 in unit_open(),
        a3 in unit_open(),
        x0 in -8.0f64..8.0,
    ) {
        // every f64 weight is exactly representable as a rational, so the
        // oracle replays the float run with the same inputs
        let p = ContractionProblem::standard();
        let sched = ControlSchedule::constant(a1, a2, a3);
        let float_trace = run_scheme(&p, scheme, &sched, &Point::scalar(x0), StopRule::exhaustive(20)).unwrap();

        let map = ExactAffine::standard();
        let rational = |v: f64| Rational::from_float(v).unwrap();
        let exact = exact_run(
            &map,
            scheme,
            [rational(a1), rational(a2), rational(a3)],
            vec![rational(x0)],
            20,
        );
        let cmp = compare_traces(&float_trace, &exact, 1e-12).unwrap();
        prop_assert!(cmp.pass, "max gap {}", cmp.max_abs_gap);
    }

    #[test]
    fn rate_ratios_scale_invariant_for_dyadic_scales(
        k in -20i32..20,
        r1 in 0.1f64..0.9,
        r2 in 0.1f64..0.9,
    ) {
        let n = 32;
        let err_a: Vec<f64> = (0..n).map(|i| 3.0 * r1.powi(i)).collect();
        let err_b: Vec<f64> = (0..n).map(|i| 2.0 * r2.powi(i)).collect();
        let scale = 2.0f64.powi(k);
        let sa: Vec<f64> = err_a.iter().map(|v| v * scale).collect();
        let sb: Vec<f64> = err_b.iter().map(|v| v * scale).collect();
        let base = compare_rates(&err_a, &err_b, RateThresholds::default()).unwrap();
        let scaled = compare_rates(&sa, &sb, RateThresholds::default()).unwrap();
        prop_assert_eq!(base.classification, scaled.classification);
        for (x, y) in base.ratios.iter().zip(&scaled.ratios) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn rate_classification_stable_under_any_positive_scale(
        scale in 1e-6f64..1e6,
        r1 in 0.1f64..0.9,
        r2 in 0.1f64..0.9,
    ) {
        let n = 32;
        let err_a: Vec<f64> = (0..n).map(|i| 3.0 * r1.powi(i)).collect();
        let err_b: Vec<f64> = (0..n).map(|i| 2.0 * r2.powi(i)).collect();
        let sa: Vec<f64> = err_a.iter().map(|v| v * scale).collect();
        let sb: Vec<f64> = err_b.iter().map(|v| v * scale).collect();
        let base = compare_rates(&err_a, &err_b, RateThresholds::default()).unwrap();
        let scaled = compare_rates(&sa, &sb, RateThresholds::default()).unwrap();
        prop_assert_eq!(base.classification, scaled.classification);
    }
}
