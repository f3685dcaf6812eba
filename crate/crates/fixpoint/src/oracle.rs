//! Exact rational-arithmetic evaluation of every scheme on affine
//! problems with rational coefficients; ground truth for the floating
//! traces.
//!
//! Rationals are arbitrary-precision `num::BigRational` values, always
//! reduced and with positive denominators, so every iterate is exactly
//! reproducible from the inputs.

use num::{BigRational, Integer, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::schemes::{IterationTrace, SchemeId};

pub type Rational = BigRational;

/// Exact affine map `x -> A x + b` over the rationals.
#[derive(Debug, Clone)]
pub struct ExactAffine {
    pub matrix: Vec<Vec<Rational>>,
    pub offset: Vec<Rational>,
}

impl ExactAffine {
    pub fn scalar(a: Rational, b: Rational) -> Self {
        ExactAffine {
            matrix: vec![vec![a]],
            offset: vec![b],
        }
    }

    /// The standard problem `T(x) = x/2 + 1` with exact coefficients.
    pub fn standard() -> Self {
        ExactAffine::scalar(ratio(1, 2), ratio(1, 1))
    }

    /// Exact affine map from double coefficients (each double converts
    /// exactly to a rational).
    pub fn from_f64(matrix: &[Vec<f64>], offset: &[f64]) -> Self {
        ExactAffine {
            matrix: matrix
                .iter()
                .map(|row| row.iter().map(|&v| Rational::from_float(v).unwrap()).collect())
                .collect(),
            offset: offset
                .iter()
                .map(|&v| Rational::from_float(v).unwrap())
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, x: &[Rational]) -> Vec<Rational> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, b)| {
                row.iter()
                    .zip(x)
                    .fold(b.clone(), |acc, (aij, xj)| acc + aij * xj)
            })
            .collect()
    }
}

/// Convenience rational constructor.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}

/// Exact iterates of one scheme run under a constant rational schedule.
#[derive(Debug, Clone)]
pub struct ExactTrace {
    pub scheme: SchemeId,
    pub iterates: Vec<Vec<Rational>>,
    pub schedule: [Rational; 3],
}

fn lerp(a: &[Rational], b: &[Rational], w: &Rational) -> Vec<Rational> {
    let cw = Rational::one() - w;
    a.iter()
        .zip(b)
        .map(|(ai, bi)| &cw * ai + w * bi)
        .collect()
}

fn step(map: &ExactAffine, scheme: SchemeId, x: &[Rational], alpha: &[Rational; 3]) -> Vec<Rational> {
    let [a1, a2, a3] = alpha;
    match scheme {
        SchemeId::Picard => map.apply(x),
        SchemeId::Mann => lerp(x, &map.apply(x), a1),
        SchemeId::Ishikawa => {
            let y = lerp(x, &map.apply(x), a2);
            lerp(x, &map.apply(&y), a1)
        }
        SchemeId::Noor => {
            let z = lerp(x, &map.apply(x), a3);
            let y = lerp(x, &map.apply(&z), a2);
            lerp(x, &map.apply(&y), a1)
        }
        SchemeId::Sp => {
            let z = lerp(x, &map.apply(x), a3);
            let y = lerp(&z, &map.apply(&z), a2);
            lerp(&y, &map.apply(&y), a1)
        }
        SchemeId::TwoStepMann => {
            let y = lerp(x, &map.apply(x), a2);
            lerp(&y, &map.apply(&y), a1)
        }
        SchemeId::S => {
            let tx = map.apply(x);
            let t = lerp(x, &tx, a2);
            lerp(&tx, &map.apply(&t), a1)
        }
        SchemeId::Cr => {
            let tx = map.apply(x);
            let y = lerp(x, &tx, a3);
            let v = lerp(&tx, &map.apply(&y), a2);
            lerp(&v, &map.apply(&v), a1)
        }
        SchemeId::Ko | SchemeId::KoPerturbed => {
            let tx = map.apply(x);
            let r = lerp(x, &tx, a3);
            let q = lerp(&tx, &map.apply(&r), a2);
            lerp(&tx, &map.apply(&q), a1)
        }
    }
}

/// Runs `scheme` exactly for `n_steps` steps under a constant rational
/// schedule, producing `n_steps + 1` iterates in the same sub-step order
/// as the floating implementation.
pub fn exact_run(
    map: &ExactAffine,
    scheme: SchemeId,
    schedule: [Rational; 3],
    x0: Vec<Rational>,
    n_steps: usize,
) -> ExactTrace {
    let mut iterates = Vec::with_capacity(n_steps + 1);
    iterates.push(x0);
    for _ in 0..n_steps {
        let next = step(map, scheme, iterates.last().unwrap(), &schedule);
        iterates.push(next);
    }
    ExactTrace {
        scheme,
        iterates,
        schedule,
    }
}

/// Correctly rounded conversion of a rational to the nearest double.
///
/// The quotient is computed to 56-58 significant bits with a sticky bit
/// (round-to-odd), then the final rounding happens in the u64 -> f64
/// conversion; two-stage rounding is exact with that many guard bits.
pub fn to_f64_nearest(r: &Rational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    let num = r.numer().abs();
    let den = r.denom().clone();
    let nb = num.bits() as i64;
    let db = den.bits() as i64;
    let shift = 57 - (nb - db);
    let (sn, sd) = if shift >= 0 {
        (num << shift as usize, den)
    } else {
        (num, den << (-shift) as usize)
    };
    let (q, rem) = sn.div_rem(&sd);
    let mut q = q.to_u64().expect("scaled quotient fits 64 bits");
    if !rem.is_zero() {
        q |= 1;
    }
    let exp = -shift as i32;
    if exp < -1074 {
        return sign * 0.0;
    }
    sign * (q as f64) * 2f64.powi(exp)
}

/// Distance from each exact iterate to the fixed point, rounded to
/// doubles. The squared distance is accumulated in rationals, so the
/// only floating steps are one conversion and one square root per entry.
///
/// Unlike errors measured on a floating trace, these keep decaying
/// geometrically instead of collapsing to zero once the iterates land on
/// the rounded fixed point, which is what rate estimation needs.
pub fn exact_error_sequence(trace: &ExactTrace, fixed_point: &[Rational]) -> Vec<f64> {
    trace
        .iterates
        .iter()
        .map(|x| {
            let sq: Rational = x
                .iter()
                .zip(fixed_point)
                .map(|(a, b)| {
                    let d = a - b;
                    &d * &d
                })
                .sum();
            to_f64_nearest(&sq).sqrt()
        })
        .collect()
}

/// Result of comparing a floating trace against its exact counterpart.
#[derive(Debug, Clone)]
pub struct TraceComparison {
    pub max_abs_gap: f64,
    pub pass: bool,
    /// `(step, coordinate)` of the first entry beyond tolerance.
    pub first_violation: Option<(usize, usize)>,
}

/// Compares a floating trace against the exact oracle trace entry by
/// entry, with each exact value rounded to the nearest double first.
pub fn compare_traces(
    float_trace: &IterationTrace,
    exact: &ExactTrace,
    abs_tol: f64,
) -> Result<TraceComparison> {
    if float_trace.scheme != exact.scheme {
        return Err(Error::MismatchedRuns {
            reason: format!("schemes {} and {}", float_trace.scheme, exact.scheme),
        });
    }
    if float_trace.len() != exact.iterates.len() {
        return Err(Error::MismatchedRuns {
            reason: format!(
                "lengths {} and {}",
                float_trace.len(),
                exact.iterates.len()
            ),
        });
    }
    let mut max_abs_gap = 0.0_f64;
    let mut first_violation = None;
    for (n, (fp, ep)) in float_trace.iterates.iter().zip(&exact.iterates).enumerate() {
        for (i, (f, e)) in fp.0.iter().zip(ep).enumerate() {
            let gap = (f - to_f64_nearest(e)).abs();
            if gap > max_abs_gap {
                max_abs_gap = gap;
            }
            if gap > abs_tol && first_violation.is_none() {
                first_violation = Some((n, i));
            }
        }
    }
    Ok(TraceComparison {
        max_abs_gap,
        pass: first_violation.is_none(),
        first_violation,
    })
}

/// Exact per-step error contraction factor of the KO scheme on a scalar
/// affine map with nonnegative slope and constant schedule.
pub fn exact_ko_factor(a: &Rational, alpha: &[Rational; 3]) -> Rational {
    let one = Rational::one();
    let inner = &one - &alpha[1] * &alpha[2] * (&one - a);
    a * (&one - &alpha[0] * (&one - a * inner))
}

/// Exact per-step error contraction factor of the CR scheme under the
/// same conditions.
pub fn exact_cr_factor(a: &Rational, alpha: &[Rational; 3]) -> Rational {
    let one = Rational::one();
    a * (&one - &alpha[0] * (&one - a)) * (&one - &alpha[1] * &alpha[2] * (&one - a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ContractionProblem, ControlSchedule, Point};
    use crate::schemes::{run_scheme, StopRule};

    fn half_schedule() -> [Rational; 3] {
        [ratio(1, 2), ratio(1, 2), ratio(1, 2)]
    }

    #[test]
    fn ko_one_step_is_41_over_32() {
        let t = exact_run(
            &ExactAffine::standard(),
            SchemeId::Ko,
            half_schedule(),
            vec![Rational::zero()],
            1,
        );
        assert_eq!(t.iterates[1][0], ratio(41, 32));
    }

    #[test]
    fn cr_one_step_is_43_over_32() {
        let t = exact_run(
            &ExactAffine::standard(),
            SchemeId::Cr,
            half_schedule(),
            vec![Rational::zero()],
            1,
        );
        assert_eq!(t.iterates[1][0], ratio(43, 32));
    }

    #[test]
    fn picard_two_steps() {
        let t = exact_run(
            &ExactAffine::standard(),
            SchemeId::Picard,
            half_schedule(),
            vec![Rational::zero()],
            2,
        );
        assert_eq!(t.iterates[0][0], ratio(0, 1));
        assert_eq!(t.iterates[1][0], ratio(1, 1));
        assert_eq!(t.iterates[2][0], ratio(3, 2));
    }

    #[test]
    fn exact_error_factors() {
        let a = ratio(1, 2);
        let alpha = half_schedule();
        assert_eq!(exact_ko_factor(&a, &alpha), ratio(23, 64));
        assert_eq!(exact_cr_factor(&a, &alpha), ratio(21, 64));
        let theta_ratio = exact_cr_factor(&a, &alpha) / exact_ko_factor(&a, &alpha);
        assert_eq!(theta_ratio, ratio(21, 23));
    }

    #[test]
    fn exact_errors_follow_constant_factor() {
        let t = exact_run(
            &ExactAffine::standard(),
            SchemeId::Ko,
            half_schedule(),
            vec![Rational::zero()],
            10,
        );
        let star = ratio(2, 1);
        let factor = exact_ko_factor(&ratio(1, 2), &half_schedule());
        for n in 0..10 {
            let e_n = (&t.iterates[n][0] - &star).abs();
            let e_next = (&t.iterates[n + 1][0] - &star).abs();
            assert_eq!(e_next, &e_n * &factor);
        }
    }

    #[test]
    fn float_trace_matches_oracle_over_50_steps() {
        let p = ContractionProblem::standard();
        let sched = ControlSchedule::constant(0.5, 0.5, 0.5);
        let float_trace = run_scheme(
            &p,
            SchemeId::Ko,
            &sched,
            &Point::scalar(0.0),
            StopRule::exhaustive(50),
        )
        .unwrap();
        let exact = exact_run(
            &ExactAffine::standard(),
            SchemeId::Ko,
            half_schedule(),
            vec![Rational::zero()],
            50,
        );
        let cmp = compare_traces(&float_trace, &exact, 1e-12).unwrap();
        assert!(cmp.pass, "max gap {}", cmp.max_abs_gap);
    }

    #[test]
    fn zero_step_comparison_has_zero_gap() {
        let p = ContractionProblem::standard();
        let sched = ControlSchedule::constant(0.5, 0.5, 0.5);
        let float_trace = run_scheme(
            &p,
            SchemeId::Picard,
            &sched,
            &Point::scalar(0.0),
            StopRule::exhaustive(0),
        )
        .unwrap();
        let exact = exact_run(
            &ExactAffine::standard(),
            SchemeId::Picard,
            half_schedule(),
            vec![Rational::zero()],
            0,
        );
        let cmp = compare_traces(&float_trace, &exact, 0.0).unwrap();
        assert_eq!(cmp.max_abs_gap, 0.0);
        assert!(cmp.pass);
    }

    #[test]
    fn corrupted_trace_fails_with_offending_index() {
        let p = ContractionProblem::standard();
        let sched = ControlSchedule::constant(0.5, 0.5, 0.5);
        let mut float_trace = run_scheme(
            &p,
            SchemeId::Ko,
            &sched,
            &Point::scalar(0.0),
            StopRule::exhaustive(10),
        )
        .unwrap();
        float_trace.iterates[4].0[0] += 1e-6;
        let exact = exact_run(
            &ExactAffine::standard(),
            SchemeId::Ko,
            half_schedule(),
            vec![Rational::zero()],
            10,
        );
        let cmp = compare_traces(&float_trace, &exact, 1e-12).unwrap();
        assert!(!cmp.pass);
        assert_eq!(cmp.first_violation, Some((4, 0)));
    }

    #[test]
    fn length_mismatch_rejected() {
        let p = ContractionProblem::standard();
        let sched = ControlSchedule::constant(0.5, 0.5, 0.5);
        let float_trace = run_scheme(
            &p,
            SchemeId::Ko,
            &sched,
            &Point::scalar(0.0),
            StopRule::exhaustive(10),
        )
        .unwrap();
        let exact = exact_run(
            &ExactAffine::standard(),
            SchemeId::Ko,
            half_schedule(),
            vec![Rational::zero()],
            5,
        );
        assert!(compare_traces(&float_trace, &exact, 1e-12).is_err());
    }

    #[test]
    fn rational_rounding_known_values() {
        assert_eq!(to_f64_nearest(&ratio(1, 3)), 1.0 / 3.0);
        assert_eq!(to_f64_nearest(&ratio(-2, 3)), -2.0 / 3.0);
        assert_eq!(to_f64_nearest(&ratio(1, 10)), 0.1);
        assert_eq!(to_f64_nearest(&ratio(41, 32)), 1.28125);
        assert_eq!(to_f64_nearest(&Rational::zero()), 0.0);
        // tiny value with a huge denominator
        let tiny = ratio(1, 2).pow(200) * ratio(7, 3);
        let expected = 0.5_f64.powi(200) * (7.0 / 3.0);
        assert!((to_f64_nearest(&tiny) - expected).abs() <= expected * 1e-15);
    }

    #[test]
    fn iterates_reduced_with_positive_denominators() {
        let t = exact_run(
            &ExactAffine::standard(),
            SchemeId::Cr,
            half_schedule(),
            vec![ratio(-7, 3)],
            20,
        );
        for x in &t.iterates {
            for c in x {
                assert!(c.denom() > &num::BigInt::zero());
                assert!(c.numer().gcd(c.denom()).is_one());
            }
        }
    }
}
