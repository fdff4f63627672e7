//! Kernel reconstruction in reproducing-kernel Hilbert spaces.
//!
//! With point measurements `y_m ~ f(x_m)` and a squared-norm regularizer,
//! the minimizer of `E(y, f(x)) + lambda * ||f||^2` is a finite kernel
//! expansion `f(x) = sum_m a_m k(x, x_m)` over the measurement sites; the
//! dual map of a Hilbert space is the identity, so the coefficients solve a
//! finite-dimensional system in the Gram matrix `G[m][n] = k(x_m, x_n)`.
//! For quadratic loss that system is linear, `(G + lambda I) a = y`; other
//! smooth losses are handled by a damped Newton iteration on the same
//! coefficients. `tikhonov_fit` exposes the identical linear algebra for an
//! explicit symmetric positive-semidefinite system matrix.

use nalgebra::{DMatrix, DVector};
use std::time::Instant;

use crate::gtv::check_super_exponential_rate;
use crate::problem::{Loss, SolveReport, SITE_DUPLICATE_RTOL};
use crate::{Error, Result};

/// Gradient sup-norm threshold (relative to data scale) at which the Newton
/// path declares stationarity.
const NEWTON_GRAD_RTOL: f64 = 1e-10;

/// Iteration cap for the Newton path.
const NEWTON_MAX_ITERS: usize = 500;

/// Smallest regularization reached by the equality-mode continuation.
const CONTINUATION_FLOOR: f64 = 1e-8;

/// Per-step shrink factor of the continuation.
const CONTINUATION_FACTOR: f64 = 0.1;

/// Symmetry tolerance (relative to the largest entry) for explicit system
/// matrices.
const SYMMETRY_RTOL: f64 = 1e-8;

/// Positive-definite kernel families.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `exp(-||u - v||^2 / (2 sigma^2))`
    Gaussian { sigma: f64 },
    /// `exp(-||u - v|| / sigma)`
    Laplacian { sigma: f64 },
    /// `(<u, v> + offset)^degree`, positive-semidefinite for offset >= 0.
    Polynomial { degree: u32, offset: f64 },
    /// `exp(-||u - v||^alpha)` for alpha strictly inside (0, 2).
    SuperExponential { alpha: f64 },
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::Gaussian { sigma } | Kernel::Laplacian { sigma } => {
                if !sigma.is_finite() || *sigma <= 0.0 {
                    return Err(Error::InvalidProblem {
                        message: format!("kernel width sigma = {sigma} must be positive"),
                    });
                }
            }
            Kernel::Polynomial { offset, .. } => {
                if !offset.is_finite() || *offset < 0.0 {
                    return Err(Error::InvalidProblem {
                        message: format!(
                            "polynomial kernel offset {offset} must be nonnegative for \
                             positive-semidefiniteness"
                        ),
                    });
                }
            }
            Kernel::SuperExponential { alpha } => check_super_exponential_rate(*alpha)?,
        }
        Ok(())
    }

    /// Kernel value between two points of equal dimension.
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), v.len());
        match self {
            Kernel::Gaussian { sigma } => {
                let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            Kernel::Laplacian { sigma } => {
                let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2.sqrt() / sigma).exp()
            }
            Kernel::Polynomial { degree, offset } => {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                (dot + offset).powi(*degree as i32)
            }
            Kernel::SuperExponential { alpha } => {
                let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2.sqrt().powf(*alpha)).exp()
            }
        }
    }
}

/// A fitted kernel expansion `f(x) = sum_m a_m k(x, x_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    pub kernel: Kernel,
    /// Training sites, one row per site.
    pub sites: DMatrix<f64>,
    pub coefficients: DVector<f64>,
}

impl KernelModel {
    /// Hilbert-space energy `a^T G a` of the expansion.
    pub fn energy(&self) -> Result<f64> {
        let gram = gram_matrix(&self.kernel, &self.sites)?;
        Ok((&gram * &self.coefficients).dot(&self.coefficients))
    }
}

/// Gram matrix of a kernel on a site set. Rejects coincident sites because
/// they make the point evaluations (and the Gram matrix) dependent.
pub fn gram_matrix(kernel: &Kernel, sites: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    kernel.validate()?;
    let m = sites.nrows();
    let scale = 1.0 + sites.amax();
    for i in 0..m {
        for j in (i + 1)..m {
            let d = (sites.row(i) - sites.row(j)).norm();
            if d < SITE_DUPLICATE_RTOL * scale {
                return Err(Error::DuplicateSites {
                    first: i,
                    second: j,
                    distance: d / scale,
                });
            }
        }
    }
    let row = |i: usize| -> Vec<f64> { sites.row(i).iter().copied().collect() };
    let mut gram = DMatrix::zeros(m, m);
    for i in 0..m {
        let ri = row(i);
        gram[(i, i)] = kernel.eval(&ri, &ri);
        for j in (i + 1)..m {
            let value = kernel.eval(&ri, &row(j));
            gram[(i, j)] = value;
            gram[(j, i)] = value;
        }
    }
    Ok(gram)
}

fn spd_solve(system: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    system
        .clone()
        .cholesky()
        .map(|chol| chol.solve(rhs))
        .ok_or_else(|| Error::InvalidProblem {
            message: "system matrix is not positive definite after regularization".into(),
        })
}

/// Coefficients and report for the quadratic-loss problem
/// `min ||y - G a||^2 + lambda a^T G a`, whose stationarity condition is
/// `(G + lambda I) a = y` on the range of G.
fn quadratic_coefficients(
    gram: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
) -> Result<(DVector<f64>, f64)> {
    let m = gram.nrows();
    let system = gram + DMatrix::identity(m, m) * lambda;
    let a = spd_solve(&system, y)?;
    let residual = (&system * &a - y).amax();
    Ok((a, residual))
}

/// Newton solve of `min E(y, G a) + lambda a^T G a` for smooth losses.
fn newton_coefficients(
    gram: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    loss: &Loss,
    start: DVector<f64>,
) -> Result<(DVector<f64>, usize, f64)> {
    let m = gram.nrows();
    let scale = 1.0 + y.amax();
    let objective = |a: &DVector<f64>| -> Result<f64> {
        let z = gram * a;
        Ok(loss.evaluate(y, &z)? + lambda * (gram * a).dot(a))
    };
    let mut a = start;
    let mut value = objective(&a)?;
    for iter in 0..NEWTON_MAX_ITERS {
        let z = gram * &a;
        let grad_z = loss.gradient_z(y, &z)?;
        let grad = gram * &grad_z + 2.0 * lambda * (gram * &a);
        let grad_norm = grad.amax();
        if grad_norm <= NEWTON_GRAD_RTOL * scale {
            return Ok((a, iter, grad_norm));
        }
        // Curvature of the loss in z; Huber has unit core and flat tails.
        let curvature = match loss {
            Loss::Quadratic => DVector::from_element(m, 2.0),
            Loss::Huber { delta } => DVector::from_fn(m, |i, _| {
                if (z[i] - y[i]).abs() <= *delta {
                    1.0
                } else {
                    0.0
                }
            }),
            Loss::Equality => unreachable!("newton path never sees the equality loss"),
        };
        let mut hessian = gram * DMatrix::from_diagonal(&curvature) * gram + (gram * (2.0 * lambda));
        // Damping: grow a ridge until the Hessian factors and the step
        // decreases the objective.
        let mut tau = 0.0;
        let step = loop {
            let attempt = &hessian + DMatrix::identity(m, m) * tau;
            if let Some(chol) = attempt.cholesky() {
                break chol.solve(&(-&grad));
            }
            tau = if tau == 0.0 { 1e-10 * scale } else { tau * 10.0 };
            if tau > 1e12 * scale {
                return Err(Error::NonConvergence {
                    solver: "hilbert newton",
                    iterations: iter,
                    residual: grad_norm,
                });
            }
            hessian = &hessian + DMatrix::zeros(m, m);
        };
        // Armijo backtracking along the damped Newton direction.
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &a + &step * t;
            let trial_value = objective(&trial)?;
            if trial_value <= value + 1e-4 * t * slope {
                a = trial;
                value = trial_value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                solver: "hilbert newton",
                iterations: iter,
                residual: grad_norm,
            });
        }
    }
    let z = gram * &a;
    let grad = gram * loss.gradient_z(y, &z)? + 2.0 * lambda * (gram * &a);
    let grad_norm = grad.amax();
    if grad_norm <= NEWTON_GRAD_RTOL * scale {
        Ok((a, NEWTON_MAX_ITERS, grad_norm))
    } else {
        Err(Error::NonConvergence {
            solver: "hilbert newton",
            iterations: NEWTON_MAX_ITERS,
            residual: grad_norm,
        })
    }
}

/// Fits the kernel expansion minimizing `E(y, G a) + lambda a^T G a`.
///
/// Quadratic loss solves the linear stationarity system directly; Huber loss
/// runs damped Newton; the equality loss takes the vanishing-regularization
/// limit by shrinking lambda geometrically to `1e-8` and returning the last
/// iterate, whose interpolation residual is reported.
pub fn rkhs_fit(
    kernel: &Kernel,
    sites: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    loss: &Loss,
) -> Result<(KernelModel, SolveReport)> {
    let clock = Instant::now();
    if y.len() != sites.nrows() {
        return Err(Error::DimensionMismatch {
            context: "rkhs_fit",
            expected: sites.nrows(),
            found: y.len(),
        });
    }
    if !matches!(loss, Loss::Equality) && !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidProblem {
            message: format!("lambda = {lambda} must be strictly positive outside equality mode"),
        });
    }
    let gram = gram_matrix(kernel, sites)?;

    let (a, iterations, residual, mut warnings) = match loss {
        Loss::Quadratic => {
            let (a, residual) = quadratic_coefficients(&gram, y, lambda)?;
            (a, 1, residual, Vec::new())
        }
        Loss::Huber { .. } => {
            let start = DVector::zeros(y.len());
            let (a, iters, residual) = newton_coefficients(&gram, y, lambda, loss, start)?;
            (a, iters, residual, Vec::new())
        }
        Loss::Equality => {
            // lambda -> 0 continuation: each stage is a fresh linear solve,
            // the last one defines the interpolant.
            let mut stage = 1.0;
            let mut a = DVector::zeros(y.len());
            let mut steps = 0;
            while stage >= CONTINUATION_FLOOR {
                let (next, _) = quadratic_coefficients(&gram, y, stage)?;
                a = next;
                stage *= CONTINUATION_FACTOR;
                steps += 1;
            }
            let interp_residual = (&gram * &a - y).norm();
            let warnings = vec![format!(
                "equality mode reached lambda = {CONTINUATION_FLOOR:.0e}; interpolation \
                 residual {interp_residual:.3e}"
            )];
            (a, steps, interp_residual, warnings)
        }
    };

    let z = &gram * &a;
    let objective = match loss {
        Loss::Equality => lambda * z.dot(&a),
        _ => loss.evaluate(y, &z)? + lambda * z.dot(&a),
    };
    let mut report = SolveReport::new(objective, iterations, residual);
    report.warnings.append(&mut warnings);
    report.wall_seconds = clock.elapsed().as_secs_f64();
    Ok((
        KernelModel {
            kernel: kernel.clone(),
            sites: sites.clone(),
            coefficients: a,
        },
        report,
    ))
}

/// Evaluates a fitted kernel expansion at a point.
pub fn rkhs_predict(model: &KernelModel, point: &[f64]) -> Result<f64> {
    if point.len() != model.sites.ncols() {
        return Err(Error::DimensionMismatch {
            context: "rkhs_predict",
            expected: model.sites.ncols(),
            found: point.len(),
        });
    }
    let mut value = 0.0;
    for m in 0..model.sites.nrows() {
        let site: Vec<f64> = model.sites.row(m).iter().copied().collect();
        value += model.coefficients[m] * model.kernel.eval(point, &site);
    }
    Ok(value)
}

/// Solves `(H + lambda I) a = y` for an explicit symmetric
/// positive-semidefinite H, the stationarity system of
/// `min ||y - H a||^2 + lambda a^T H a`.
pub fn tikhonov_fit(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
) -> Result<(DVector<f64>, SolveReport)> {
    let clock = Instant::now();
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch {
            context: "tikhonov_fit (square matrix required)",
            expected: h.nrows(),
            found: h.ncols(),
        });
    }
    if y.len() != h.nrows() {
        return Err(Error::DimensionMismatch {
            context: "tikhonov_fit",
            expected: h.nrows(),
            found: y.len(),
        });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidProblem {
            message: format!("lambda = {lambda} must be strictly positive"),
        });
    }
    let asymmetry = (h - h.transpose()).amax();
    if asymmetry > SYMMETRY_RTOL * (1.0 + h.amax()) {
        return Err(Error::NotSymmetric {
            max_asymmetry: asymmetry,
        });
    }
    let m = h.nrows();
    let system = h + DMatrix::identity(m, m) * lambda;
    let a = spd_solve(&system, y)?;
    let residual = (&system * &a - y).amax();
    let z = h * &a;
    let objective = (y - &z).norm_squared() + lambda * z.dot(&a);
    let mut report = SolveReport::new(objective, 1, residual);
    report.wall_seconds = clock.elapsed().as_secs_f64();
    Ok((a, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::subgradient_minimize;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn separated_sites(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
        // Jittered grid on [0, 1]: neighbors stay at least 0.7/m apart, which
        // keeps the Gaussian Gram matrix well-conditioned.
        DMatrix::from_fn(m, 1, |i, _| {
            (i as f64 + 0.15 + 0.7 * rng.random_range(0.0..1.0)) / m as f64
        })
    }

    #[test]
    fn gram_of_a_single_site_is_one() {
        let gram = gram_matrix(
            &Kernel::Gaussian { sigma: 0.5 },
            &DMatrix::from_row_slice(1, 2, &[0.3, -0.1]),
        )
        .unwrap();
        assert_eq!(gram, DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn coincident_sites_are_rejected() {
        let sites = DMatrix::from_row_slice(2, 1, &[0.4, 0.4]);
        assert!(matches!(
            gram_matrix(&Kernel::Gaussian { sigma: 1.0 }, &sites),
            Err(Error::DuplicateSites { first: 0, second: 1, .. })
        ));
    }

    #[test]
    fn gram_matrices_are_positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for kernel in [
            Kernel::Gaussian { sigma: 1.0 },
            Kernel::Laplacian { sigma: 0.7 },
            Kernel::SuperExponential { alpha: 1.3 },
        ] {
            let sites = DMatrix::from_fn(10, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let gram = gram_matrix(&kernel, &sites).unwrap();
            let eig = gram.symmetric_eigen();
            let min = eig.eigenvalues.min();
            let max = eig.eigenvalues.max();
            assert!(min >= -1e-10 * max.max(1.0), "min eigenvalue {min}");
        }
    }

    #[test]
    fn scalar_fit_matches_the_closed_form() {
        let sites = DMatrix::from_row_slice(1, 1, &[0.0]);
        let y = DVector::from_column_slice(&[1.0]);
        let (model, report) = rkhs_fit(
            &Kernel::Gaussian { sigma: 1.0 },
            &sites,
            &y,
            1.0,
            &Loss::Quadratic,
        )
        .unwrap();
        assert_relative_eq!(model.coefficients[0], 0.5, max_relative = 1e-14);
        assert!(report.optimality_residual <= 1e-12);
    }

    #[test]
    fn stationarity_system_is_satisfied() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let sites = separated_sites(&mut rng, 6);
        let y = DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let kernel = Kernel::Gaussian { sigma: 0.08 };
        let (model, report) = rkhs_fit(&kernel, &sites, &y, 0.7, &Loss::Quadratic).unwrap();
        let gram = gram_matrix(&kernel, &sites).unwrap();
        let residual =
            (&gram * &model.coefficients + &model.coefficients * 0.7 - &y).amax();
        assert!(residual <= 1e-9, "residual {residual}");
        assert!(report.objective.is_finite());
    }

    #[test]
    fn equality_mode_interpolates() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let sites = separated_sites(&mut rng, 5);
        let y = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let kernel = Kernel::Gaussian { sigma: 0.1 };
        let (model, _) = rkhs_fit(&kernel, &sites, &y, 0.0, &Loss::Equality).unwrap();
        let gram = gram_matrix(&kernel, &sites).unwrap();
        let residual = (&gram * &model.coefficients - &y).norm();
        assert!(residual <= 1e-6 * y.norm(), "residual {residual}");
    }

    #[test]
    fn huber_fit_matches_the_subgradient_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let m = 5;
        let sites = separated_sites(&mut rng, m);
        let y = DVector::from_fn(m, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
        let kernel = Kernel::Gaussian { sigma: 0.07 };
        let loss = Loss::Huber { delta: 0.5 };
        let lambda = 0.6;
        let (model, report) = rkhs_fit(&kernel, &sites, &y, lambda, &loss).unwrap();

        let gram = gram_matrix(&kernel, &sites).unwrap();
        let objective = |a: &DVector<f64>| {
            loss.evaluate(&y, &(&gram * a)).unwrap() + lambda * (&gram * a).dot(a)
        };
        let reference = subgradient_minimize(
            |a| objective(a),
            |a| {
                let z = &gram * a;
                &gram * loss.gradient_z(&y, &z).unwrap() + 2.0 * lambda * (&gram * a)
            },
            &DVector::zeros(m),
            60_000,
            0.2,
        )
        .unwrap();
        assert_relative_eq!(report.objective, reference.objective, max_relative = 1e-6);
        assert_relative_eq!(objective(&model.coefficients), report.objective, max_relative = 1e-12);
    }

    #[test]
    fn predict_with_zero_coefficients_is_zero() {
        let model = KernelModel {
            kernel: Kernel::Gaussian { sigma: 1.0 },
            sites: DMatrix::from_row_slice(2, 1, &[0.1, 0.9]),
            coefficients: DVector::zeros(2),
        };
        assert_eq!(rkhs_predict(&model, &[0.4]).unwrap(), 0.0);
    }

    #[test]
    fn predict_at_training_sites_reproduces_the_gram_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let sites = separated_sites(&mut rng, 6);
        let kernel = Kernel::Laplacian { sigma: 0.4 };
        let coefficients = DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let model = KernelModel {
            kernel: kernel.clone(),
            sites: sites.clone(),
            coefficients: coefficients.clone(),
        };
        let gram = gram_matrix(&kernel, &sites).unwrap();
        let ga = &gram * &coefficients;
        for m in 0..6 {
            let p = [sites[(m, 0)]];
            assert_relative_eq!(rkhs_predict(&model, &p).unwrap(), ga[m], max_relative = 1e-12);
        }
    }

    #[test]
    fn near_interpolation_reproduces_the_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let sites = separated_sites(&mut rng, 5);
        let y = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (model, _) = rkhs_fit(
            &Kernel::Gaussian { sigma: 0.1 },
            &sites,
            &y,
            1e-9,
            &Loss::Quadratic,
        )
        .unwrap();
        for m in 0..5 {
            let p = [sites[(m, 0)]];
            let predicted = rkhs_predict(&model, &p).unwrap();
            assert!((predicted - y[m]).abs() <= 1e-6 * (1.0 + y[m].abs()));
        }
    }

    #[test]
    fn tikhonov_identity_fixture() {
        let y = DVector::from_column_slice(&[2.0, -4.0]);
        let (a, _) = tikhonov_fit(&DMatrix::identity(2, 2), &y, 3.0).unwrap();
        assert_relative_eq!(a[0], 0.5, max_relative = 1e-14);
        assert_relative_eq!(a[1], -1.0, max_relative = 1e-14);
    }

    #[test]
    fn tikhonov_two_by_two_fixture() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_column_slice(&[1.0, 0.0]);
        let (a, _) = tikhonov_fit(&h, &y, 1.0).unwrap();
        assert_relative_eq!(a[0], 3.0 / 8.0, epsilon = 1e-12);
        assert_relative_eq!(a[1], -1.0 / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn tikhonov_agrees_with_rkhs_on_the_gram_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let sites = separated_sites(&mut rng, 5);
        let kernel = Kernel::Gaussian { sigma: 0.09 };
        let y = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let gram = gram_matrix(&kernel, &sites).unwrap();
        let (model, _) = rkhs_fit(&kernel, &sites, &y, 0.4, &Loss::Quadratic).unwrap();
        let (a, _) = tikhonov_fit(&gram, &y, 0.4).unwrap();
        assert!((a - model.coefficients).amax() <= 1e-12);
    }

    #[test]
    fn asymmetric_matrices_are_rejected() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            tikhonov_fit(&h, &DVector::zeros(2), 1.0),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn energy_is_nonincreasing_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        let sites = separated_sites(&mut rng, 6);
        let kernel = Kernel::Gaussian { sigma: 0.1 };
        let y = DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut previous = f64::INFINITY;
        for lambda in [0.01, 0.1, 1.0, 10.0] {
            let (model, _) = rkhs_fit(&kernel, &sites, &y, lambda, &Loss::Quadratic).unwrap();
            let energy = model.energy().unwrap();
            assert!(energy <= previous * (1.0 + 1e-12) + 1e-15, "energy rose at {lambda}");
            previous = energy;
        }
    }
}
