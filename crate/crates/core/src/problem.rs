//! Shared problem model: measurement operators, losses, regularizers, and
//! solve reports.
//!
//! Every solver in the crate minimizes `E(y, A f) + lambda * ||f||^power`
//! for some linear measurement map A, convex data fit E, and norm choice.
//! This module owns the pieces of that statement that are common to all of
//! them, plus validation of a problem before any solver touches it.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::duality::lp_norm;
use crate::{Error, Result};

/// Relative threshold on singular values when deciding the numerical rank
/// of a measurement operator.
pub const RANK_RTOL: f64 = 1e-10;

/// Relative distance below which two measurement sites count as duplicates.
pub const SITE_DUPLICATE_RTOL: f64 = 1e-9;

/// Axis-aligned box domain for site-based operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn unit_interval() -> Self {
        Domain {
            lower: vec![0.0],
            upper: vec![1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    pub fn clamp(&self, point: &mut [f64]) {
        for (x, (lo, hi)) in point.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*lo, *hi);
        }
    }
}

/// A finite family of linear measurements.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementOperator {
    /// Measurements are rows of an explicit matrix acting on a coefficient
    /// vector.
    Dense { matrix: DMatrix<f64> },
    /// Measurements are point evaluations at `sites` (one row per site, one
    /// column per coordinate). A candidate supplies the function values at
    /// the sites themselves.
    PointEvaluation {
        sites: DMatrix<f64>,
        domain: Option<Domain>,
    },
    /// Measurements are integrals of continuous atoms against the candidate,
    /// discretized on a fixed grid: `samples` holds atom values per grid
    /// node and `weights` the quadrature weights.
    ContinuousAtoms {
        samples: DMatrix<f64>,
        weights: DVector<f64>,
    },
}

impl MeasurementOperator {
    pub fn dense(matrix: DMatrix<f64>) -> Self {
        MeasurementOperator::Dense { matrix }
    }

    /// Number of measurements produced.
    pub fn rows(&self) -> usize {
        match self {
            MeasurementOperator::Dense { matrix } => matrix.nrows(),
            MeasurementOperator::PointEvaluation { sites, .. } => sites.nrows(),
            MeasurementOperator::ContinuousAtoms { samples, .. } => samples.nrows(),
        }
    }

    /// Length a candidate vector must have to be measurable.
    pub fn candidate_len(&self) -> usize {
        match self {
            MeasurementOperator::Dense { matrix } => matrix.ncols(),
            MeasurementOperator::PointEvaluation { sites, .. } => sites.nrows(),
            MeasurementOperator::ContinuousAtoms { samples, .. } => samples.ncols(),
        }
    }

    /// Applies the operator to a candidate vector.
    pub fn apply(&self, candidate: &DVector<f64>) -> Result<DVector<f64>> {
        if candidate.len() != self.candidate_len() {
            return Err(Error::DimensionMismatch {
                context: "MeasurementOperator::apply",
                expected: self.candidate_len(),
                found: candidate.len(),
            });
        }
        Ok(match self {
            MeasurementOperator::Dense { matrix } => matrix * candidate,
            MeasurementOperator::PointEvaluation { .. } => candidate.clone(),
            MeasurementOperator::ContinuousAtoms { samples, weights } => {
                samples * candidate.component_mul(weights)
            }
        })
    }

    /// Matrix whose row space carries the quadrature geometry of the
    /// measurements; its singular values decide row independence.
    fn row_geometry(&self) -> DMatrix<f64> {
        match self {
            MeasurementOperator::Dense { matrix } => matrix.clone(),
            MeasurementOperator::PointEvaluation { sites, .. } => {
                // Point evaluations are independent exactly when the sites
                // are pairwise distinct; encode each site as a coordinate
                // row so duplicates collapse the rank.
                let m = sites.nrows();
                let mut g = DMatrix::zeros(m, m);
                for i in 0..m {
                    for j in 0..m {
                        let d = (sites.row(i) - sites.row(j)).norm();
                        g[(i, j)] = (-d).exp();
                    }
                }
                g
            }
            MeasurementOperator::ContinuousAtoms { samples, weights } => {
                let mut scaled = samples.clone();
                for (mut col, w) in scaled.column_iter_mut().zip(weights.iter()) {
                    col *= w.max(0.0).sqrt();
                }
                scaled
            }
        }
    }
}

/// Convex data-fit term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Loss {
    /// Sum of squared residuals, `sum_m (y_m - z_m)^2`.
    Quadratic,
    /// Huber penalty per residual: quadratic core `t^2 / 2` for |t| <= delta,
    /// linear tails `delta * (|t| - delta / 2)` beyond.
    Huber { delta: f64 },
    /// Exact interpolation constraint `z = y`, realized by solvers as the
    /// vanishing-regularization limit rather than evaluated directly.
    Equality,
}

impl Loss {
    /// Loss value at measurement vector `z`.
    pub fn evaluate(&self, y: &DVector<f64>, z: &DVector<f64>) -> Result<f64> {
        if y.len() != z.len() {
            return Err(Error::DimensionMismatch {
                context: "Loss::evaluate",
                expected: y.len(),
                found: z.len(),
            });
        }
        Ok(match self {
            Loss::Quadratic => (y - z).norm_squared(),
            Loss::Huber { delta } => y
                .iter()
                .zip(z.iter())
                .map(|(a, b)| {
                    let t = (a - b).abs();
                    if t <= *delta {
                        0.5 * t * t
                    } else {
                        delta * (t - 0.5 * delta)
                    }
                })
                .sum(),
            Loss::Equality => {
                let scale = 1.0 + y.amax();
                if (y - z).amax() <= 1e-12 * scale {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        })
    }

    /// Gradient of the loss in the measurement variable `z`.
    pub fn gradient_z(&self, y: &DVector<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != z.len() {
            return Err(Error::DimensionMismatch {
                context: "Loss::gradient_z",
                expected: y.len(),
                found: z.len(),
            });
        }
        match self {
            Loss::Quadratic => Ok(2.0 * (z - y)),
            Loss::Huber { delta } => Ok(DVector::from_iterator(
                y.len(),
                y.iter().zip(z.iter()).map(|(a, b)| {
                    let t = b - a;
                    if t.abs() <= *delta {
                        t
                    } else {
                        delta * t.signum()
                    }
                }),
            )),
            Loss::Equality => Err(Error::InvalidProblem {
                message: "equality loss has no gradient; solve it as a vanishing-regularization \
                          limit"
                    .into(),
            }),
        }
    }

    fn check(&self, issues: &mut Vec<String>) {
        if let Loss::Huber { delta } = self {
            if !delta.is_finite() || *delta <= 0.0 {
                issues.push(format!("huber width delta = {delta} must be positive and finite"));
            }
        }
    }
}

/// Which norm the regularizer raises to a power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum NormKind {
    /// p-norm of the coefficient (or sample) vector, p >= 1.
    Lp { p: f64 },
    /// Total-variation norm of a discrete measure: l1 norm of its weights.
    TvMeasure,
    /// Operator-induced sparsity cost: l1 norm of the expansion weights.
    Gtv,
}

impl NormKind {
    fn value(&self, candidate: &DVector<f64>, weights: Option<&DVector<f64>>) -> f64 {
        match self {
            NormKind::Lp { p } => match weights {
                None => lp_norm(candidate.as_slice(), *p),
                Some(w) => {
                    let scaled: Vec<f64> = candidate
                        .iter()
                        .zip(w.iter())
                        .map(|(c, wg)| c.abs() * wg.max(0.0).powf(1.0 / p))
                        .collect();
                    lp_norm(&scaled, *p)
                }
            },
            NormKind::TvMeasure | NormKind::Gtv => candidate.iter().map(|c| c.abs()).sum(),
        }
    }

    fn check(&self, issues: &mut Vec<String>) {
        if let NormKind::Lp { p } = self {
            if !p.is_finite() || *p < 1.0 {
                issues.push(format!("norm exponent p = {p} must be finite and at least 1"));
            }
        }
    }
}

/// Norm-power regularizer `lambda * ||.||^power`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularizationSpec {
    pub norm: NormKind,
    pub power: f64,
    pub lambda: f64,
}

impl RegularizationSpec {
    pub fn lp(p: f64, lambda: f64) -> Self {
        RegularizationSpec {
            norm: NormKind::Lp { p },
            power: p,
            lambda,
        }
    }
}

/// A fully specified reconstruction problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub operator: MeasurementOperator,
    pub loss: Loss,
    pub regularization: RegularizationSpec,
    pub y: DVector<f64>,
}

/// Structured outcome of `validate_problem`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub rows_independent: bool,
    pub operator_rank: usize,
    pub issues: Vec<String>,
}

/// Convergence summary attached to every solver result.
///
/// `wall_seconds` is informational and deliberately excluded from serialized
/// documents so that identical inputs produce byte-identical output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub objective: f64,
    pub iterations: usize,
    pub optimality_residual: f64,
    pub support_size: Option<usize>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl SolveReport {
    pub fn new(objective: f64, iterations: usize, optimality_residual: f64) -> Self {
        debug_assert!(objective.is_finite());
        debug_assert!(optimality_residual >= 0.0);
        SolveReport {
            objective,
            iterations,
            optimality_residual,
            support_size: None,
            warnings: Vec::new(),
            wall_seconds: 0.0,
        }
    }
}

/// Numerical rank of a matrix: singular values above `RANK_RTOL` times the
/// largest one.
pub fn numerical_rank(matrix: &DMatrix<f64>) -> usize {
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return 0;
    }
    let svd = matrix.clone().svd(false, false);
    let max = svd.singular_values.max();
    if max == 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|s| **s > RANK_RTOL * max).count()
}

/// Checks shapes, loss parameters, regularization parameters, and row
/// independence of the measurement operator.
pub fn validate_problem(problem: &ProblemSpec) -> ValidationReport {
    let mut issues = Vec::new();

    if problem.y.len() != problem.operator.rows() {
        issues.push(format!(
            "data length {} does not match the {} operator rows",
            problem.y.len(),
            problem.operator.rows()
        ));
    }

    problem.loss.check(&mut issues);
    problem.regularization.norm.check(&mut issues);

    let reg = &problem.regularization;
    if !reg.power.is_finite() || reg.power < 1.0 {
        issues.push(format!(
            "regularizer power {} must be finite and at least 1",
            reg.power
        ));
    }
    match problem.loss {
        Loss::Equality => {
            if !reg.lambda.is_finite() || reg.lambda < 0.0 {
                issues.push(format!(
                    "lambda = {} must be nonnegative in equality mode",
                    reg.lambda
                ));
            }
        }
        _ => {
            if !reg.lambda.is_finite() || reg.lambda <= 0.0 {
                issues.push(format!(
                    "lambda = {} must be strictly positive outside equality mode",
                    reg.lambda
                ));
            }
        }
    }

    if let MeasurementOperator::PointEvaluation { sites, domain } = &problem.operator {
        let scale = 1.0 + sites.amax();
        for i in 0..sites.nrows() {
            for j in (i + 1)..sites.nrows() {
                let d = (sites.row(i) - sites.row(j)).norm();
                if d < SITE_DUPLICATE_RTOL * scale {
                    issues.push(
                        Error::DuplicateSites {
                            first: i,
                            second: j,
                            distance: d / scale,
                        }
                        .to_string(),
                    );
                }
            }
        }
        if let Some(domain) = domain {
            if domain.dim() != sites.ncols() {
                issues.push(format!(
                    "domain dimension {} does not match site dimension {}",
                    domain.dim(),
                    sites.ncols()
                ));
            } else {
                for i in 0..sites.nrows() {
                    let row: Vec<f64> = sites.row(i).iter().copied().collect();
                    if !domain.contains(&row) {
                        issues.push(format!("site {i} lies outside the declared domain"));
                    }
                }
            }
        }
    }

    let rank = numerical_rank(&problem.operator.row_geometry());
    let rows_independent = rank == problem.operator.rows();
    if !rows_independent {
        issues.push(format!(
            "operator rows are dependent: numerical rank {rank} of {} rows",
            problem.operator.rows()
        ));
    }

    ValidationReport {
        ok: issues.is_empty(),
        rows_independent,
        operator_rank: rank,
        issues,
    }
}

/// Full objective `E(y, A f) + lambda * ||f||^power` at a candidate.
///
/// Continuous-atom operators apply quadrature weights inside the norm as
/// well, so the discrete objective tracks its continuous counterpart.
pub fn evaluate_objective(problem: &ProblemSpec, candidate: &DVector<f64>) -> Result<f64> {
    let z = problem.operator.apply(candidate)?;
    let data = problem.loss.evaluate(&problem.y, &z)?;
    let weights = match &problem.operator {
        MeasurementOperator::ContinuousAtoms { weights, .. } => Some(weights),
        _ => None,
    };
    let norm = problem.regularization.norm.value(candidate, weights);
    Ok(data + problem.regularization.lambda * norm.powf(problem.regularization.power))
}
