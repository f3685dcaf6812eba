//! Contraction mappings, control schedules, and the test-problem catalog.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance used for fixed-point residual checks at construction time.
pub const CONSTRUCTION_TOL: f64 = 1e-12;

/// A point in a finite-dimensional Euclidean space.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        for (i, c) in coords.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
        }
        Ok(Point(coords))
    }

    pub fn scalar(x: f64) -> Self {
        Point(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Euclidean distance to another point of the same dimension.
    pub fn distance(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Convex combination `(1 - w) * self + w * other`, evaluated
    /// coordinate-wise in a fixed expression order so traces are
    /// reproducible and zero weights collapse bit-exactly.
    pub fn lerp(&self, other: &Point, w: f64) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (1.0 - w) * a + w * b)
                .collect(),
        )
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

/// Affine self-map `x -> A x + b` with spectral-norm contraction factor.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl AffineMap {
    pub fn apply(&self, x: &Point) -> Point {
        let v = DVector::from_column_slice(&x.0);
        let out = &self.matrix * v + &self.offset;
        Point(out.iter().copied().collect())
    }
}

/// The evaluation rule of a contraction problem.
#[derive(Clone)]
pub enum ContractionMap {
    Affine(AffineMap),
    /// `T(x) = cos(x) / 2` on the real line, the built-in nonlinear case.
    HalfCosine,
    /// Base map plus a constant offset (operator perturbation).
    Shifted {
        base: Box<ContractionMap>,
        shift: Vec<f64>,
    },
    /// Base map plus a deterministic per-point offset of norm <= epsilon.
    SeededOffset {
        base: Box<ContractionMap>,
        seed: u64,
        epsilon: f64,
    },
    /// User-supplied pure map; the Lipschitz constant must be asserted.
    Custom(Arc<dyn Fn(&Point) -> Point + Send + Sync>),
}

impl fmt::Debug for ContractionMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContractionMap::Affine(a) => f.debug_tuple("Affine").field(a).finish(),
            ContractionMap::HalfCosine => write!(f, "HalfCosine"),
            ContractionMap::Shifted { base, shift } => f
                .debug_struct("Shifted")
                .field("base", base)
                .field("shift", shift)
                .finish(),
            ContractionMap::SeededOffset { base, seed, epsilon } => f
                .debug_struct("SeededOffset")
                .field("base", base)
                .field("seed", seed)
                .field("epsilon", epsilon)
                .finish(),
            ContractionMap::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl ContractionMap {
    pub fn eval(&self, x: &Point) -> Point {
        match self {
            ContractionMap::Affine(a) => a.apply(x),
            ContractionMap::HalfCosine => Point::scalar(x.0[0].cos() / 2.0),
            ContractionMap::Shifted { base, shift } => {
                let mut y = base.eval(x);
                for (yi, s) in y.0.iter_mut().zip(shift) {
                    *yi += s;
                }
                y
            }
            ContractionMap::SeededOffset { base, seed, epsilon } => {
                let mut y = base.eval(x);
                let off = seeded_offset(&x.0, *seed, *epsilon);
                for (yi, o) in y.0.iter_mut().zip(&off) {
                    *yi += o;
                }
                y
            }
            ContractionMap::Custom(f) => f(x),
        }
    }
}

/// Deterministic offset with `||offset|| <= epsilon`, keyed on the bits of
/// the input point and the seed, so the perturbed map is a true function.
pub(crate) fn seeded_offset(coords: &[f64], seed: u64, epsilon: f64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    // FNV-1a over the coordinate bits, mixed with the seed.
    let mut h: u64 = 0xcbf29ce484222325 ^ seed;
    for c in coords {
        h ^= c.to_bits();
        h = h.wrapping_mul(0x100000001b3);
    }
    if epsilon <= 0.0 {
        return vec![0.0; coords.len()];
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(h);
    let raw: Vec<f64> = (0..coords.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mag: f64 = rng.gen_range(0.0..epsilon);
    if norm == 0.0 {
        return vec![0.0; coords.len()];
    }
    raw.iter().map(|v| v / norm * mag).collect()
}

/// A self-map with Lipschitz constant strictly below one, together with
/// its fixed point when analytically available.
#[derive(Debug, Clone)]
pub struct ContractionProblem {
    map: ContractionMap,
    delta: f64,
    dim: usize,
    fixed_point: Option<Point>,
}

impl ContractionProblem {
    /// Builds an affine contraction `x -> A x + b`. The contraction
    /// factor is the computed operator norm of `A` and the fixed point
    /// `(I - A)^{-1} b` is solved directly.
    pub fn affine(matrix: DMatrix<f64>, offset: Vec<f64>) -> Result<Self> {
        let dim = offset.len();
        assert_eq!(matrix.nrows(), dim, "matrix rows must match offset length");
        assert_eq!(matrix.ncols(), dim, "matrix must be square");
        let norm = operator_norm(&matrix);
        if norm >= 1.0 {
            return Err(Error::NotContractive { norm });
        }
        let b = DVector::from_column_slice(&offset);
        let star = solve_affine_fixed_point(&matrix, &b)?;
        let map = AffineMap {
            matrix,
            offset: b,
        };
        Ok(ContractionProblem {
            map: ContractionMap::Affine(map),
            delta: norm,
            dim,
            fixed_point: Some(star),
        })
    }

    /// Scalar affine problem `T(x) = a x + b`; rejects `|a| >= 1`.
    pub fn scalar_affine(a: f64, b: f64) -> Result<Self> {
        Self::affine(DMatrix::from_element(1, 1, a), vec![b])
    }

    /// The standard desk problem used throughout the tests:
    /// `T(x) = 0.5 x + 1` with fixed point 2.
    pub fn standard() -> Self {
        Self::scalar_affine(0.5, 1.0).expect("standard problem is contractive")
    }

    /// `T(x) = cos(x) / 2` with delta = 1/2; the fixed point is found by a
    /// high-precision Picard pre-solve at tolerance 1e-14.
    pub fn half_cosine() -> Self {
        let mut x = 0.5_f64;
        loop {
            let next = x.cos() / 2.0;
            if (next - x).abs() <= 1e-14 {
                x = next;
                break;
            }
            x = next;
        }
        ContractionProblem {
            map: ContractionMap::HalfCosine,
            delta: 0.5,
            dim: 1,
            fixed_point: Some(Point::scalar(x)),
        }
    }

    /// Wraps a user-supplied map with an asserted Lipschitz constant.
    /// The constant is not derivable for arbitrary maps; callers should
    /// spot-check it by sampling (see `sampled_contraction_check`).
    pub fn custom(
        f: Arc<dyn Fn(&Point) -> Point + Send + Sync>,
        delta: f64,
        dim: usize,
        fixed_point: Option<Point>,
    ) -> Result<Self> {
        if !(0.0 < delta && delta < 1.0) {
            return Err(Error::InvalidDelta { delta });
        }
        if let Some(star) = &fixed_point {
            let residual = f(star).distance(star);
            if residual > CONSTRUCTION_TOL * star.norm().max(1.0) {
                return Err(Error::MissingFixedPoint);
            }
        }
        Ok(ContractionProblem {
            map: ContractionMap::Custom(f),
            delta,
            dim,
            fixed_point,
        })
    }

    /// Perturbed variant sharing the declared delta; used by the
    /// data-dependence module. `fixed_point` is the perturbed fixed point
    /// when known (constant shifts on affine problems).
    pub(crate) fn with_map(
        map: ContractionMap,
        delta: f64,
        dim: usize,
        fixed_point: Option<Point>,
    ) -> Self {
        ContractionProblem {
            map,
            delta,
            dim,
            fixed_point,
        }
    }

    pub fn map(&self) -> &ContractionMap {
        &self.map
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fixed_point(&self) -> Option<&Point> {
        self.fixed_point.as_ref()
    }

    /// Evaluates `T(x)` after validating dimension and finiteness.
    pub fn apply(&self, x: &Point) -> Result<Point> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        if let Some(i) = x.0.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        Ok(self.map.eval(x))
    }

    /// Samples `pairs` random point pairs from `[-range, range]^d` and
    /// checks `||T(x) - T(y)|| <= delta ||x - y|| + 1e-12` on each.
    pub fn sampled_contraction_check(&self, pairs: usize, range: f64, seed: u64) -> Result<()> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..pairs {
            let x = Point((0..self.dim).map(|_| rng.gen_range(-range..range)).collect());
            let y = Point((0..self.dim).map(|_| rng.gen_range(-range..range)).collect());
            let lhs = self.apply(&x)?.distance(&self.apply(&y)?);
            let rhs = self.delta * x.distance(&y) + 1e-12;
            if lhs > rhs {
                return Err(Error::InvalidDelta { delta: self.delta });
            }
        }
        Ok(())
    }
}

/// Fixed point of `x -> A x + b` by direct linear solve of `(I - A) x = b`.
pub fn solve_affine_fixed_point(matrix: &DMatrix<f64>, b: &DVector<f64>) -> Result<Point> {
    let norm = operator_norm(matrix);
    if norm >= 1.0 {
        return Err(Error::NotContractive { norm });
    }
    let n = matrix.nrows();
    let system = DMatrix::identity(n, n) - matrix;
    let solved = system
        .lu()
        .solve(b)
        .expect("I - A is invertible when the operator norm of A is below 1");
    Ok(Point(solved.iter().copied().collect()))
}

/// Spectral norm of a real matrix: for 1x1 it is `|a|`, otherwise the
/// square root of the dominant eigenvalue of `A^T A` by power iteration
/// to tolerance 1e-12.
pub fn operator_norm(matrix: &DMatrix<f64>) -> f64 {
    let n = matrix.nrows();
    if n == 1 {
        return matrix[(0, 0)].abs();
    }
    let gram = matrix.transpose() * matrix;
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0_f64;
    for _ in 0..10_000 {
        let w = &gram * &v;
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        let next = &w / wn;
        let next_lambda = (next.transpose() * &gram * &next)[(0, 0)];
        if (next_lambda - lambda).abs() <= 1e-12 * next_lambda.max(1.0) {
            return next_lambda.max(0.0).sqrt();
        }
        lambda = next_lambda;
        v = next;
    }
    lambda.max(0.0).sqrt()
}

/// The schedule families of control sequences `alpha_n^i in [0,1]`.
///
/// Families are closed analytic forms so that divergence of the series
/// `sum alpha_n^1` is decidable without numeric extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlSchedule {
    /// `alpha_n^i = c_i` for all n.
    Constant([f64; 3]),
    /// `alpha_n^i = 1 - 1/(n + 2)`; starts at 1/2 and increases to 1.
    HarmonicComplement,
    /// `alpha_n^i = 1/(n + 1)`; decreases to 0.
    Harmonic,
}

impl ControlSchedule {
    pub fn constant(c1: f64, c2: f64, c3: f64) -> Self {
        for c in [c1, c2, c3] {
            assert!((0.0..=1.0).contains(&c), "schedule values must lie in [0,1]");
        }
        ControlSchedule::Constant([c1, c2, c3])
    }

    /// The three schedule values at step `n`.
    pub fn eval(&self, n: usize) -> [f64; 3] {
        match self {
            ControlSchedule::Constant(c) => *c,
            ControlSchedule::HarmonicComplement => {
                let v = 1.0 - 1.0 / (n as f64 + 2.0);
                [v, v, v]
            }
            ControlSchedule::Harmonic => {
                let v = 1.0 / (n as f64 + 1.0);
                [v, v, v]
            }
        }
    }

    /// Whether `sum_n alpha_n^1` diverges, decided per family.
    pub fn alpha1_sum_diverges(&self) -> bool {
        match self {
            ControlSchedule::Constant(c) => c[0] > 0.0,
            ControlSchedule::HarmonicComplement => true,
            ControlSchedule::Harmonic => true,
        }
    }

    /// Positive lower bounds for the three components when they exist
    /// (needed as assumption (i) of the rate and data-dependence results).
    pub fn lower_bounds(&self) -> Option<[f64; 3]> {
        match self {
            ControlSchedule::Constant(c) => {
                if c.iter().all(|&v| v > 0.0) {
                    Some(*c)
                } else {
                    None
                }
            }
            // infimum over n >= 0 is the n = 0 value, 1/2
            ControlSchedule::HarmonicComplement => Some([0.5, 0.5, 0.5]),
            // infimum is 0: not bounded below by a positive constant
            ControlSchedule::Harmonic => None,
        }
    }

    /// Analytic partial sum `sum_{k=0}^{n} alpha_k^1`.
    pub fn alpha1_partial_sum(&self, n: usize) -> f64 {
        match self {
            ControlSchedule::Constant(c) => (n as f64 + 1.0) * c[0],
            ControlSchedule::HarmonicComplement => {
                (0..=n).map(|k| 1.0 - 1.0 / (k as f64 + 2.0)).sum()
            }
            ControlSchedule::Harmonic => (0..=n).map(|k| 1.0 / (k as f64 + 1.0)).sum(),
        }
    }

    /// Infimum of `alpha_n^1` over all n, used to gate the
    /// data-dependence assumption `1/2 <= alpha_n^1`.
    pub fn alpha1_infimum(&self) -> f64 {
        match self {
            ControlSchedule::Constant(c) => c[0],
            ControlSchedule::HarmonicComplement => 0.5,
            ControlSchedule::Harmonic => 0.0,
        }
    }
}
