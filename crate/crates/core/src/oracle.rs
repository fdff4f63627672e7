//! Slow reference solvers used by the test suite.
//!
//! Everything here trades speed for being independently auditable: a
//! diminishing-step subgradient loop, an exhaustive support/sign
//! enumeration for small l1 problems, and central finite differences.
//! Production code must never call into this module; tests compare
//! objective values against it, never iterates.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Hard cap on the dimension the subgradient loop accepts.
const MAX_SUBGRADIENT_DIM: usize = 64;

/// Hard cap on the number of columns the exhaustive l1 search accepts;
/// the sign enumeration is exponential beyond this.
const MAX_ENUMERATION_COLS: usize = 12;

/// Outcome of a reference solve: the best objective seen and where.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    pub point: DVector<f64>,
    pub support: Vec<usize>,
    pub evaluations: usize,
}

/// Minimizes a convex function by subgradient descent with step `c / sqrt(k)`
/// and returns the best iterate seen.
///
/// The step constant must respect the curvature of the objective at the
/// start (roughly `c <= 1 / L` for smooth problems); the caller owns that
/// choice because only the caller knows the problem scale.
pub fn subgradient_minimize<F, G>(
    objective: F,
    subgradient: G,
    x0: &DVector<f64>,
    iterations: usize,
    c: f64,
) -> Result<OracleResult>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    if x0.len() > MAX_SUBGRADIENT_DIM {
        return Err(Error::OracleLimit {
            message: format!(
                "subgradient oracle supports dimension <= {MAX_SUBGRADIENT_DIM}, got {}",
                x0.len()
            ),
        });
    }
    let mut x = x0.clone();
    let mut best = objective(&x);
    let mut best_x = x.clone();
    for k in 1..=iterations {
        let g = subgradient(&x);
        let step = c / (k as f64).sqrt();
        x.axpy(-step, &g, 1.0);
        let value = objective(&x);
        if value < best {
            best = value;
            best_x = x.clone();
        }
    }
    Ok(OracleResult {
        objective: best,
        point: best_x,
        support: Vec::new(),
        evaluations: iterations + 1,
    })
}

/// Exactly minimizes `||y - H s||^2 + lambda * ||s||_1` by enumerating every
/// support of size at most `max_support` and every sign pattern on it.
///
/// For each support/sign pair the smooth relaxation has the closed form
/// `H_S^T H_S x = H_S^T y - lambda * sigma / 2`; its minimum-norm solution is
/// evaluated under the true objective, so inconsistent patterns can only
/// overestimate and the global minimum over all candidates is exact. The
/// optimum itself always appears: it has an extreme representative whose
/// restricted problem is sign-consistent.
pub fn enumerate_support_solve(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    max_support: usize,
) -> Result<OracleResult> {
    let (m, n) = (h.nrows(), h.ncols());
    if n > MAX_ENUMERATION_COLS {
        return Err(Error::OracleLimit {
            message: format!(
                "support enumeration supports <= {MAX_ENUMERATION_COLS} columns, got {n}"
            ),
        });
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            context: "enumerate_support_solve",
            expected: m,
            found: y.len(),
        });
    }
    if lambda <= 0.0 || lambda.is_nan() {
        return Err(Error::InvalidProblem {
            message: format!("lambda = {lambda} must be strictly positive"),
        });
    }

    let objective = |s: &DVector<f64>| -> f64 {
        (y - h * s).norm_squared() + lambda * s.iter().map(|v| v.abs()).sum::<f64>()
    };

    let mut best_point = DVector::zeros(n);
    let mut best = objective(&best_point);
    let mut evaluations = 1usize;

    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
        if support.len() > max_support {
            continue;
        }
        let k = support.len();
        let hs = h.select_columns(support.iter());
        let gram = hs.transpose() * &hs;
        let hty = hs.transpose() * y;
        for signs in 0u32..(1 << k) {
            let sigma = DVector::from_fn(k, |i, _| if signs >> i & 1 == 1 { -1.0 } else { 1.0 });
            let rhs = &hty - &sigma * (lambda / 2.0);
            let x = gram.clone().svd(true, true).solve(&rhs, 1e-12);
            let Ok(x) = x else { continue };
            let mut s = DVector::zeros(n);
            for (i, &j) in support.iter().enumerate() {
                s[j] = x[i];
            }
            evaluations += 1;
            let value = objective(&s);
            if value < best {
                best = value;
                best_point = s;
            }
        }
    }

    let peak = best_point.amax();
    let support = (0..n)
        .filter(|&j| best_point[j].abs() > 1e-12 * (1.0 + peak))
        .collect();
    Ok(OracleResult {
        objective: best,
        point: best_point,
        support,
        evaluations,
    })
}

/// Central finite-difference gradient with step `h` per coordinate.
pub fn finite_diff_grad<F>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut grad = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let forward = f(&probe);
        probe[i] = x[i] - h;
        let backward = f(&probe);
        probe[i] = x[i];
        grad[i] = (forward - backward) / (2.0 * h);
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn plain_quadratic_converges_below_tolerance() {
        let y = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        let target = y.clone();
        let result = subgradient_minimize(
            |x| (x - &target).norm_squared(),
            |x| 2.0 * (x - &target),
            &DVector::zeros(3),
            100_000,
            0.4,
        )
        .unwrap();
        assert!(result.objective <= 1e-6, "objective {}", result.objective);
    }

    #[test]
    fn ridge_matches_closed_form_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(301);
        let (m, n) = (4, 3);
        let h = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let lambda = 0.8;
        let objective =
            |s: &DVector<f64>| (&y - &h * s).norm_squared() + lambda * s.norm_squared();
        // Closed form: (H^T H + lambda I) s = H^T y.
        let closed = (h.transpose() * &h + DMatrix::identity(n, n) * lambda)
            .cholesky()
            .unwrap()
            .solve(&(h.transpose() * &y));
        let reference = objective(&closed);

        let ht = h.transpose();
        let result = subgradient_minimize(
            |s| objective(s),
            |s| 2.0 * (&ht * (&h * s - &y)) + 2.0 * lambda * s,
            &DVector::zeros(n),
            60_000,
            0.05,
        )
        .unwrap();
        assert_relative_eq!(result.objective, reference, max_relative = 1e-6);
    }

    #[test]
    fn dimension_guard_rejects_large_problems() {
        let x0 = DVector::zeros(65);
        let err = subgradient_minimize(|_| 0.0, |x| x.clone(), &x0, 10, 0.1);
        assert!(matches!(err, Err(Error::OracleLimit { .. })));
    }

    #[test]
    fn enumeration_solves_the_two_column_fixture_by_hand() {
        // min (2 - s1 - 2 s2)^2 + |s|_1: the active column is the second,
        // stationarity gives s2 = 1 - lambda/8 and value lambda - lambda^2/16.
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let y = DVector::from_column_slice(&[2.0]);
        let lambda = 1.0;
        let result = enumerate_support_solve(&h, &y, lambda, 2).unwrap();
        assert_eq!(result.support, vec![1]);
        assert_relative_eq!(result.point[1], 1.0 - lambda / 8.0, max_relative = 1e-12);
        assert_relative_eq!(
            result.objective,
            lambda - lambda * lambda / 16.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn enumeration_returns_zero_above_the_critical_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let h = DMatrix::from_fn(3, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        // Above 2 ||H^T y||_inf the zero vector is stationary, hence optimal.
        let lambda = 2.0 * (h.transpose() * &y).amax() * 1.01;
        let result = enumerate_support_solve(&h, &y, lambda, 3).unwrap();
        assert!(result.support.is_empty());
        assert_relative_eq!(result.objective, y.norm_squared(), max_relative = 1e-14);
    }

    #[test]
    fn enumeration_column_guard() {
        let h = DMatrix::zeros(2, 13);
        let y = DVector::zeros(2);
        assert!(matches!(
            enumerate_support_solve(&h, &y, 1.0, 2),
            Err(Error::OracleLimit { .. })
        ));
    }

    #[test]
    fn finite_differences_recover_a_quadratic_gradient() {
        let x = DVector::from_column_slice(&[1.0, 2.0]);
        let grad = finite_diff_grad(|v| v.norm_squared(), &x, 1e-6);
        assert_relative_eq!(grad[0], 2.0, epsilon = 1e-6);
        assert_relative_eq!(grad[1], 4.0, epsilon = 1e-6);
    }

    #[test]
    fn finite_differences_track_a_huber_gradient() {
        use crate::problem::Loss;
        let loss = Loss::Huber { delta: 0.6 };
        let y = DVector::from_column_slice(&[0.3, -1.2, 0.9, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let z = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
            let analytic = loss.gradient_z(&y, &z).unwrap();
            let numeric = finite_diff_grad(|v| loss.evaluate(&y, v).unwrap(), &z, 1e-6);
            assert!((analytic - numeric).amax() <= 1e-5);
        }
    }
}
