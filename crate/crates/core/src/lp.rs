//! Coefficient recovery under p-norm regularization.
//!
//! Solves `min E(y, H s) + lambda * sum_n |s_n|^p` for a dense measurement
//! matrix H. The stationarity condition couples the primal coefficients to
//! a dual vector a through the conjugate-map identity
//!
//! ```text
//! lambda * p * |s_n|^(p-1) * sign(s_n) = [H^T (-grad_z E)]_n ,
//! a = -grad_z E(y, H s) / (lambda * p) ,
//! |s_n|^(p-1) * sign(s_n) = (H^T a)_n ,
//! ```
//!
//! so the solution always lives on a manifold parameterized by the M dual
//! variables, however large N is. At p = 2 that manifold is the row span of
//! H; at p = 1 the identity degenerates into the sign conditions that make
//! solutions sparse, and `prune_to_extreme` walks a solution along
//! norm-preserving null directions of H until its support has at most
//! rank(H) entries, producing an extreme point of the solution face.
//!
//! Algorithms: proximal gradient with acceleration for p = 1,
//! backtracking gradient descent on an epsilon-smoothed objective with
//! continuation for 1 < p < 2, backtracking gradient descent on the smooth
//! composite for p >= 2, each followed by a damped Newton polish of the
//! unsmoothed stationarity system. Exponents within 1e-9 of 2 with
//! quadratic loss take the exact linear path.

use nalgebra::{DMatrix, DVector};
use std::time::Instant;

use crate::problem::{numerical_rank, Loss, SolveReport, RANK_RTOL};
use crate::{Error, Result};

/// Coefficients below this fraction of the peak are reported as off-support.
pub const SUPPORT_RTOL: f64 = 1e-8;

/// Exponents closer to 2 than this use the exact quadratic path.
const P_IDENTITY_WINDOW: f64 = 1e-9;

/// Relative stationarity residual every solve must reach.
const STATIONARITY_RTOL: f64 = 1e-9;

/// A solved p-norm problem: coefficients, reported support, and (once
/// requested) the dual certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub coefficients: DVector<f64>,
    pub p: f64,
    pub support: Vec<usize>,
    pub certificate: Option<DVector<f64>>,
}

impl LpSolution {
    fn from_coefficients(s: DVector<f64>, p: f64) -> Self {
        let support = reported_support(&s);
        LpSolution {
            coefficients: s,
            p,
            support,
            certificate: None,
        }
    }
}

/// Indices with `|s_n| > SUPPORT_RTOL * ||s||_inf`.
pub fn reported_support(s: &DVector<f64>) -> Vec<usize> {
    let peak = s.amax();
    if peak == 0.0 {
        return Vec::new();
    }
    (0..s.len())
        .filter(|&n| s[n].abs() > SUPPORT_RTOL * peak)
        .collect()
}

fn regularizer(s: &DVector<f64>, p: f64) -> f64 {
    s.iter().map(|v| v.abs().powf(p)).sum()
}

fn full_objective(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    p: f64,
    loss: &Loss,
    s: &DVector<f64>,
) -> Result<f64> {
    Ok(loss.evaluate(y, &(h * s))? + lambda * regularizer(s, p))
}

/// Stationarity residual of a candidate and the scale it should be compared
/// against.
///
/// For p > 1 the residual is the sup norm of
/// `lambda p |s|^(p-1) sign(s) + H^T grad_z E`; for p = 1 it is the worst
/// violation of the sign conditions (`= lambda sign(s_n)` on the support,
/// `<= lambda` off it). The scale is `1 + lambda p ||s||_inf^(p-1) +
/// ||H^T grad_z E||_inf`, the natural magnitude of the terms being balanced.
pub fn stationarity_residual(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    p: f64,
    loss: &Loss,
    s: &DVector<f64>,
) -> Result<(f64, f64)> {
    let g = h.transpose() * loss.gradient_z(y, &(h * s))?;
    let peak = s.amax();
    let residual = if p == 1.0 {
        let mut worst: f64 = 0.0;
        for n in 0..s.len() {
            let viol = if s[n] != 0.0 {
                (g[n] + lambda * s[n].signum()).abs()
            } else {
                (g[n].abs() - lambda).max(0.0)
            };
            worst = worst.max(viol);
        }
        worst
    } else {
        let mut worst: f64 = 0.0;
        for n in 0..s.len() {
            let reg = if s[n] == 0.0 {
                0.0
            } else {
                lambda * p * s[n].abs().powf(p - 1.0) * s[n].signum()
            };
            worst = worst.max((reg + g[n]).abs());
        }
        worst
    };
    let scale = 1.0 + lambda * p * peak.powf(p - 1.0) + g.amax();
    Ok((residual, scale))
}

/// Largest singular value, used for Lipschitz step sizing.
fn spectral_norm(h: &DMatrix<f64>) -> f64 {
    if h.nrows() == 0 || h.ncols() == 0 {
        return 0.0;
    }
    h.clone().svd(false, false).singular_values.max()
}

fn loss_curvature_bound(loss: &Loss) -> f64 {
    match loss {
        Loss::Quadratic => 2.0,
        Loss::Huber { .. } => 1.0,
        Loss::Equality => 2.0,
    }
}

/// Proximal-gradient (soft-threshold) solve of the p = 1 problem with
/// acceleration, function-value restart, and a sign-fixed active-set polish
/// for the quadratic loss.
fn solve_l1(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    loss: &Loss,
    start: DVector<f64>,
) -> Result<(DVector<f64>, usize)> {
    let ht = h.transpose();
    let lips = loss_curvature_bound(loss) * spectral_norm(h).powi(2);
    let step = if lips > 0.0 { 1.0 / lips } else { 1.0 };
    let shrink = step * lambda;

    let objective = |s: &DVector<f64>| full_objective(h, y, lambda, 1.0, loss, s);
    let grad = |s: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(&ht * loss.gradient_z(y, &(h * s))?)
    };

    let mut x = start;
    let mut momentum = x.clone();
    let mut t = 1.0_f64;
    let mut value = objective(&x)?;
    let max_iters = 200_000usize;

    for iter in 1..=max_iters {
        let g = grad(&momentum)?;
        let mut next = &momentum - &g * step;
        for v in next.iter_mut() {
            *v = v.signum() * (v.abs() - shrink).max(0.0);
        }
        let next_value = objective(&next)?;
        if next_value > value {
            // Restart momentum from the best point; plain proximal steps
            // are monotone, so this cannot loop forever.
            momentum = x.clone();
            t = 1.0;
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            momentum = &next + (&next - &x) * ((t - 1.0) / t_next);
            t = t_next;
            x = next;
            value = next_value;
        }

        if iter % 25 == 0 || iter == max_iters {
            let (residual, scale) = stationarity_residual(h, y, lambda, 1.0, loss, &x)?;
            if residual <= STATIONARITY_RTOL * scale {
                return Ok((x, iter));
            }
            if matches!(loss, Loss::Quadratic) {
                if let Some(polished) = l1_polish(h, y, lambda, &x)? {
                    return Ok((polished, iter));
                }
            }
        }
    }
    let (residual, _) = stationarity_residual(h, y, lambda, 1.0, loss, &x)?;
    Err(Error::NonConvergence {
        solver: "lp proximal gradient",
        iterations: max_iters,
        residual,
    })
}

/// Sign-fixed exact solve on the current active set; returns a polished
/// solution only when it satisfies the full stationarity conditions.
///
/// The orthant system is `H_S^T H_S x = H_S^T y - lambda sigma / 2` (data
/// term `||y - H s||^2`). Coordinates the solve pushes across zero are
/// dropped and the solve retried, mirroring the usual active-set shrink.
fn l1_polish(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    x: &DVector<f64>,
) -> Result<Option<DVector<f64>>> {
    let peak = x.amax();
    if peak == 0.0 {
        return Ok(None);
    }
    let mut support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    let mut signs: Vec<f64> = support.iter().map(|&i| x[i].signum()).collect();

    for _round in 0..8 {
        if support.is_empty() {
            break;
        }
        let hs = h.select_columns(support.iter());
        let gram = hs.transpose() * &hs;
        let sigma = DVector::from_column_slice(&signs);
        let rhs = hs.transpose() * y - &sigma * (lambda / 2.0);
        let Ok(sol) = gram.svd(true, true).solve(&rhs, 1e-13) else {
            return Ok(None);
        };
        let scale = 1.0 + sol.amax();
        let inconsistent: Vec<usize> = (0..support.len())
            .filter(|&i| sol[i] * signs[i] < -1e-12 * scale)
            .collect();
        if inconsistent.is_empty() {
            let mut candidate = DVector::zeros(x.len());
            for (i, &j) in support.iter().enumerate() {
                // Zero-crossers stay exactly zero to keep the support clean.
                candidate[j] = if sol[i] * signs[i] <= 0.0 { 0.0 } else { sol[i] };
            }
            let (residual, res_scale) =
                stationarity_residual(h, y, lambda, 1.0, &Loss::Quadratic, &candidate)?;
            if residual <= STATIONARITY_RTOL * res_scale {
                return Ok(Some(candidate));
            }
            return Ok(None);
        }
        let keep: Vec<bool> = (0..support.len()).map(|i| !inconsistent.contains(&i)).collect();
        support = support
            .iter()
            .zip(&keep)
            .filter_map(|(&j, &k)| k.then_some(j))
            .collect();
        signs = signs
            .iter()
            .zip(&keep)
            .filter_map(|(&sg, &k)| k.then_some(sg))
            .collect();
    }
    Ok(None)
}

/// Smoothed absolute power `(t^2 + eps^2)^(p/2) - eps^p` and its derivative.
fn smoothed_power(t: f64, p: f64, eps: f64) -> (f64, f64) {
    let base = t * t + eps * eps;
    let value = base.powf(0.5 * p) - eps.powf(p);
    let derivative = p * t * base.powf(0.5 * p - 1.0);
    (value, derivative)
}

/// Backtracking gradient descent on a smooth objective; returns iterations
/// used.
fn descend<F, G>(
    objective: F,
    gradient: G,
    x: &mut DVector<f64>,
    grad_tol: f64,
    max_iters: usize,
) -> Result<usize>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
    G: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut value = objective(x)?;
    let mut step = 1.0_f64;
    for iter in 0..max_iters {
        let g = gradient(x)?;
        if g.amax() <= grad_tol {
            return Ok(iter);
        }
        let slope = -g.norm_squared();
        step = (step * 2.0).min(1e6);
        let mut accepted = false;
        for _ in 0..80 {
            let trial = &*x + &g * (-step);
            let trial_value = objective(&trial)?;
            if trial_value <= value + 1e-4 * step * slope {
                *x = trial;
                value = trial_value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Ok(iter);
        }
    }
    Ok(max_iters)
}

/// Damped Newton polish of the unsmoothed objective for p > 1; curvature of
/// the regularizer is clamped near zero coordinates where p < 2 makes it
/// blow up, which freezes those coordinates rather than destabilizing the
/// step.
fn newton_polish(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    p: f64,
    loss: &Loss,
    s: &mut DVector<f64>,
) -> Result<usize> {
    let n = h.ncols();
    let ht = h.transpose();
    let objective = |s: &DVector<f64>| full_objective(h, y, lambda, p, loss, s);
    let gradient = |s: &DVector<f64>| -> Result<DVector<f64>> {
        let mut g = &ht * loss.gradient_z(y, &(h * s))?;
        for i in 0..n {
            if s[i] != 0.0 {
                g[i] += lambda * p * s[i].abs().powf(p - 1.0) * s[i].signum();
            }
        }
        Ok(g)
    };
    let mut value = objective(s)?;
    for iter in 0..200 {
        let z = h * &*s;
        let grad = gradient(s)?;
        let (residual, scale) = stationarity_residual(h, y, lambda, p, loss, s)?;
        if residual <= 1e-12 * scale {
            return Ok(iter);
        }
        let curvature = match loss {
            Loss::Quadratic | Loss::Equality => DVector::from_element(y.len(), 2.0),
            Loss::Huber { delta } => DVector::from_fn(y.len(), |i, _| {
                if (z[i] - y[i]).abs() <= *delta {
                    1.0
                } else {
                    0.0
                }
            }),
        };
        let mut hessian = &ht * DMatrix::from_diagonal(&curvature) * h;
        let floor = 1e-14 * (1.0 + s.amax());
        for i in 0..n {
            hessian[(i, i)] += lambda * p * (p - 1.0) * s[i].abs().max(floor).powf(p - 2.0);
        }
        let mut tau = 0.0;
        let direction = loop {
            let attempt = &hessian + DMatrix::identity(n, n) * tau;
            if let Some(chol) = attempt.cholesky() {
                break chol.solve(&(-&grad));
            }
            tau = if tau == 0.0 { 1e-12 * (1.0 + hessian.amax()) } else { tau * 10.0 };
            if !tau.is_finite() || tau > 1e18 {
                return Ok(iter);
            }
        };
        // Near the optimum the objective decrease drops below floating-point
        // resolution before the residual does, so a full step that shrinks
        // the stationarity residual is accepted even when the sufficient
        // decrease test is inconclusive.
        let full = &*s + &direction;
        let (full_residual, _) = stationarity_residual(h, y, lambda, p, loss, &full)?;
        if full_residual < residual {
            value = objective(&full)?;
            *s = full;
            continue;
        }
        let slope = grad.dot(&direction);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let trial = &*s + &direction * t;
            let trial_value = objective(&trial)?;
            if trial_value <= value + 1e-4 * t * slope {
                *s = trial;
                value = trial_value;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            return Ok(iter);
        }
    }
    Ok(200)
}

/// Smooth-path solve for p > 1 from an optional warm start.
fn solve_smooth(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    p: f64,
    loss: &Loss,
    start: Option<DVector<f64>>,
) -> Result<(DVector<f64>, usize)> {
    let n = h.ncols();
    let ht = h.transpose();

    // Exact path at p = 2 with quadratic loss: (H^T H + lambda I) s = H^T y.
    if (p - 2.0).abs() <= P_IDENTITY_WINDOW && matches!(loss, Loss::Quadratic) {
        let system = &ht * h + DMatrix::identity(n, n) * lambda;
        let s = system
            .cholesky()
            .ok_or_else(|| Error::InvalidProblem {
                message: "normal equations lost positive-definiteness".into(),
            })?
            .solve(&(&ht * y));
        return Ok((s, 1));
    }

    let ridge_start = || -> Result<DVector<f64>> {
        let system = &ht * h + DMatrix::identity(n, n) * lambda.max(1e-6);
        Ok(system
            .cholesky()
            .map(|c| c.solve(&(&ht * y)))
            .unwrap_or_else(|| DVector::zeros(n)))
    };
    let mut s = match start {
        Some(s0) => s0,
        None => {
            if p >= 2.0 {
                ridge_start()?
            } else {
                DVector::zeros(n)
            }
        }
    };

    let scale0 = 1.0 + y.amax();
    let mut iterations = 0usize;

    if p < 2.0 {
        // Continuation on the smoothing width; each stage is cheap because it
        // warm-starts from the previous one.
        let mut eps = 1e-2;
        while eps >= 1e-10 {
            let objective = |s: &DVector<f64>| -> Result<f64> {
                let data = loss.evaluate(y, &(h * s))?;
                let reg: f64 = s.iter().map(|&t| smoothed_power(t, p, eps).0).sum();
                Ok(data + lambda * reg)
            };
            let gradient = |s: &DVector<f64>| -> Result<DVector<f64>> {
                let mut g = &ht * loss.gradient_z(y, &(h * s))?;
                for i in 0..n {
                    g[i] += lambda * smoothed_power(s[i], p, eps).1;
                }
                Ok(g)
            };
            let tol = (1e-6_f64).max(eps * 1e-4) * scale0;
            iterations += descend(objective, gradient, &mut s, tol, 3000)?;
            eps *= 0.1;
        }
    } else {
        let objective = |s: &DVector<f64>| full_objective(h, y, lambda, p, loss, s);
        let gradient = |s: &DVector<f64>| -> Result<DVector<f64>> {
            let mut g = &ht * loss.gradient_z(y, &(h * s))?;
            for i in 0..n {
                if s[i] != 0.0 {
                    g[i] += lambda * p * s[i].abs().powf(p - 1.0) * s[i].signum();
                }
            }
            Ok(g)
        };
        iterations += descend(objective, gradient, &mut s, 1e-6 * scale0, 20_000)?;
    }

    iterations += newton_polish(h, y, lambda, p, loss, &mut s)?;

    let (residual, scale) = stationarity_residual(h, y, lambda, p, loss, &s)?;
    if residual > STATIONARITY_RTOL * scale {
        return Err(Error::NonConvergence {
            solver: "lp smooth descent",
            iterations,
            residual,
        });
    }
    Ok((s, iterations.max(1)))
}

/// Minimizes `E(y, H s) + lambda * sum |s_n|^p`.
///
/// The equality loss is realized as a vanishing-regularization limit:
/// quadratic-loss solves with lambda shrunk geometrically to 1e-8, each
/// warm-starting the next.
pub fn lp_primal_solve(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    p: f64,
    loss: &Loss,
) -> Result<(LpSolution, SolveReport)> {
    let clock = Instant::now();
    if y.len() != h.nrows() {
        return Err(Error::DimensionMismatch {
            context: "lp_primal_solve",
            expected: h.nrows(),
            found: y.len(),
        });
    }
    if !p.is_finite() || p < 1.0 {
        return Err(Error::InvalidNormPower { p });
    }
    if !matches!(loss, Loss::Equality) && !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidProblem {
            message: format!("lambda = {lambda} must be strictly positive outside equality mode"),
        });
    }

    let mut warnings = Vec::new();
    let (s, iterations) = match loss {
        Loss::Equality => {
            // Vanishing-regularization continuation with quadratic data term.
            let mut stage = 1.0;
            let mut current: Option<DVector<f64>> = None;
            let mut total = 0usize;
            while stage >= 1e-8 {
                let (next, iters) = if p == 1.0 {
                    solve_l1(h, y, stage, &Loss::Quadratic, current.take().unwrap_or_else(|| DVector::zeros(h.ncols())))?
                } else {
                    solve_smooth(h, y, stage, p, &Loss::Quadratic, current.take())?
                };
                total += iters;
                current = Some(next);
                stage *= 0.1;
            }
            let s = current.expect("continuation ran at least one stage");
            let interp = (y - h * &s).norm();
            warnings.push(format!(
                "equality mode reached lambda = 1e-8; data residual {interp:.3e}"
            ));
            (s, total)
        }
        _ => {
            if p == 1.0 {
                solve_l1(h, y, lambda, loss, DVector::zeros(h.ncols()))?
            } else {
                solve_smooth(h, y, lambda, p, loss, None)?
            }
        }
    };

    let effective_loss = if matches!(loss, Loss::Equality) { Loss::Quadratic } else { loss.clone() };
    let effective_lambda = if matches!(loss, Loss::Equality) { 1e-8 } else { lambda };
    let (residual, _) = stationarity_residual(h, y, effective_lambda, p, &effective_loss, &s)?;
    let objective = full_objective(h, y, effective_lambda, p, &effective_loss, &s)?;

    let solution = LpSolution::from_coefficients(s, p);
    let mut report = SolveReport::new(objective, iterations, residual);
    report.support_size = Some(solution.support.len());
    report.warnings = warnings;
    report.wall_seconds = clock.elapsed().as_secs_f64();
    Ok((solution, report))
}

/// Dual certificate `a = -grad_z E(y, H s) / (lambda p)` of a stationary
/// solution.
///
/// Refuses a non-stationary input: the certificate identity
/// `|s_n|^(p-1) sign(s_n) = (H^T a)_n` is only meaningful at stationarity.
pub fn dual_certificate(
    solution: &LpSolution,
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    loss: &Loss,
) -> Result<DVector<f64>> {
    let p = solution.p;
    let s = &solution.coefficients;
    let (residual, scale) = stationarity_residual(h, y, lambda, p, loss, s)?;
    if residual > 1e-6 * scale {
        return Err(Error::InvalidProblem {
            message: format!(
                "candidate is not stationary (residual {residual:.3e} vs scale {scale:.3e}); \
                 the dual certificate is undefined"
            ),
        });
    }
    let grad_z = loss.gradient_z(y, &(h * s))?;
    Ok(-grad_z / (lambda * p))
}

/// Walks a solution along norm-preserving null directions of H to an
/// extreme point of its face, preserving `H s` and `||s||_1` exactly.
///
/// Each step finds a direction in the null space of the support columns that
/// is also orthogonal to the support signs (so the l1 norm is constant along
/// it), then moves to the first zero crossing. When two directions are
/// available the one whose first vanishing coordinate has the lowest index
/// is taken. The walk stops once the support columns stacked with the sign
/// vector have full column rank, which is the extremality certificate; for
/// minimizers the sign vector lies in the row space of the support columns,
/// so the result then has at most rank(H) nonzeros.
pub fn prune_to_extreme(s: &DVector<f64>, h: &DMatrix<f64>) -> Result<DVector<f64>> {
    if s.len() != h.ncols() {
        return Err(Error::DimensionMismatch {
            context: "prune_to_extreme",
            expected: h.ncols(),
            found: s.len(),
        });
    }
    let mut s = s.clone();
    for _walk in 0..=s.len() {
        let support: Vec<usize> = (0..s.len()).filter(|&i| s[i] != 0.0).collect();
        if support.is_empty() {
            return Ok(s);
        }
        let hs = h.select_columns(support.iter());
        let rank = numerical_rank(&hs);
        if support.len() <= rank {
            return Ok(s);
        }

        // Null direction of the support columns that keeps sum sign * d = 0.
        // The matrix is padded with zero rows to at least k x k so the thin
        // SVD exposes the entire right space; padding leaves the nonzero
        // singular values untouched.
        let k = support.len();
        let rows = (h.nrows() + 1).max(k);
        let mut augmented = DMatrix::zeros(rows, k);
        augmented.view_mut((0, 0), (h.nrows(), k)).copy_from(&hs);
        for (i, &j) in support.iter().enumerate() {
            augmented[(h.nrows(), i)] = s[j].signum();
        }
        let svd = augmented.svd(false, true);
        let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
        let tol = RANK_RTOL * svd.singular_values.max().max(1.0);
        let mut direction: Option<DVector<f64>> = None;
        for (idx, sv) in svd.singular_values.iter().enumerate() {
            // Singular values are sorted descending; take the smallest one
            // below the tolerance for a deterministic choice.
            if *sv <= tol {
                direction = Some(v_t.row(idx).transpose());
            }
        }
        // Full column rank of the augmented system means no sign-neutral
        // movement exists: the point is already an extreme point of its face.
        let Some(d) = direction else {
            return Ok(s);
        };

        // First zero crossing along +d and -d; both are finite because the
        // sign-neutrality constraint forces coordinates of both orientations.
        let crossing = |dir: &DVector<f64>| -> Option<(f64, usize)> {
            let mut best: Option<(f64, usize)> = None;
            for (i, &j) in support.iter().enumerate() {
                if dir[i] == 0.0 || dir[i].signum() == s[j].signum() {
                    continue;
                }
                let t = -s[j] / dir[i];
                match best {
                    None => best = Some((t, j)),
                    Some((bt, bj)) => {
                        if t < bt * (1.0 - 1e-12) {
                            best = Some((t, j));
                        } else if t <= bt * (1.0 + 1e-12) && j < bj {
                            best = Some((t.min(bt), j));
                        }
                    }
                }
            }
            best
        };
        let minus = -&d;
        let forward = crossing(&d);
        let backward = crossing(&minus);
        let (t_star, dir) = match (forward, backward) {
            (Some((tf, jf)), Some((tb, jb))) => {
                if jf <= jb {
                    (tf, d)
                } else {
                    (tb, minus)
                }
            }
            (Some((tf, _)), None) => (tf, d),
            (None, Some((tb, _))) => (tb, minus),
            (None, None) => {
                return Err(Error::DegeneratePruning {
                    message: "null direction admits no zero crossing".into(),
                })
            }
        };

        let snap = 1e-12 * (1.0 + s.amax());
        for (i, &j) in support.iter().enumerate() {
            s[j] += t_star * dir[i];
            if s[j].abs() <= snap {
                s[j] = 0.0;
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{enumerate_support_solve, subgradient_minimize};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn identity_ridge_closed_form() {
        let y = DVector::from_column_slice(&[2.0, -1.0, 0.5]);
        let lambda = 0.7;
        let (solution, report) = lp_primal_solve(
            &DMatrix::identity(3, 3),
            &y,
            lambda,
            2.0,
            &Loss::Quadratic,
        )
        .unwrap();
        for i in 0..3 {
            assert_relative_eq!(
                solution.coefficients[i],
                y[i] / (1.0 + lambda),
                max_relative = 1e-12
            );
        }
        assert!(report.optimality_residual <= 1e-9 * (1.0 + y.amax()));
    }

    #[test]
    fn two_column_l1_fixture() {
        // min (2 - s1 - 2 s2)^2 + lambda |s|_1 puts all weight on the second
        // column: s2 = 1 - lambda/8 while lambda < 8.
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let y = DVector::from_column_slice(&[2.0]);
        for lambda in [0.5, 1.0, 3.0] {
            let (solution, report) =
                lp_primal_solve(&h, &y, lambda, 1.0, &Loss::Quadratic).unwrap();
            assert_eq!(solution.support, vec![1], "lambda = {lambda}");
            assert_relative_eq!(
                solution.coefficients[1],
                1.0 - lambda / 8.0,
                max_relative = 1e-9
            );
            let oracle = enumerate_support_solve(&h, &y, lambda, 2).unwrap();
            assert_relative_eq!(report.objective, oracle.objective, max_relative = 1e-10);
        }
    }

    #[test]
    fn p_three_halves_matches_the_subgradient_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let h = random_matrix(&mut rng, 3, 8);
        let y = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let lambda = 0.7;
        let p = 1.5;
        let (solution, report) = lp_primal_solve(&h, &y, lambda, p, &Loss::Quadratic).unwrap();

        let ht = h.transpose();
        let objective = |s: &DVector<f64>| {
            (&y - &h * s).norm_squared() + lambda * s.iter().map(|v| v.abs().powf(p)).sum::<f64>()
        };
        let reference = subgradient_minimize(
            |s| objective(s),
            |s| {
                let mut g = &ht * (2.0 * (&h * s - &y));
                for i in 0..8 {
                    if s[i] != 0.0 {
                        g[i] += lambda * p * s[i].abs().powf(p - 1.0) * s[i].signum();
                    }
                }
                g
            },
            &DVector::zeros(8),
            400_000,
            0.02,
        )
        .unwrap();
        assert_relative_eq!(report.objective, reference.objective, max_relative = 1e-6);
        assert_relative_eq!(
            objective(&solution.coefficients),
            report.objective,
            max_relative = 1e-12
        );
    }

    #[test]
    fn ridge_certificate_equals_the_solution() {
        // H = I, p = 2: a = (y - s) / lambda and s = y / (1 + lambda) give
        // a = s, so the certificate reproduces the coefficients.
        let y = DVector::from_column_slice(&[1.5, -0.4]);
        let lambda = 0.9;
        let h = DMatrix::identity(2, 2);
        let (solution, _) = lp_primal_solve(&h, &y, lambda, 2.0, &Loss::Quadratic).unwrap();
        let a = dual_certificate(&solution, &h, &y, lambda, &Loss::Quadratic).unwrap();
        let explicit = (&y - &solution.coefficients) / lambda;
        assert!((&a - &solution.coefficients).amax() <= 1e-10);
        assert!((&a - &explicit).amax() <= 1e-12);
    }

    #[test]
    fn p_two_solutions_live_in_the_row_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        for _ in 0..20 {
            let h = random_matrix(&mut rng, 3, 8);
            let y = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let (solution, _) = lp_primal_solve(&h, &y, 0.6, 2.0, &Loss::Quadratic).unwrap();
            // Projection onto the row span via the thin SVD of H.
            let svd = h.clone().svd(false, true);
            let vt = svd.v_t.unwrap();
            let projected = vt.transpose() * (&vt * &solution.coefficients);
            assert!(
                (&solution.coefficients - projected).amax() <= 1e-8,
                "row-span residual too large"
            );
        }
    }

    #[test]
    fn certificate_identity_holds_at_p_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let h = random_matrix(&mut rng, 3, 6);
        let y = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let lambda = 0.5;
        let (solution, _) = lp_primal_solve(&h, &y, lambda, 3.0, &Loss::Quadratic).unwrap();
        let a = dual_certificate(&solution, &h, &y, lambda, &Loss::Quadratic).unwrap();
        let hta = h.transpose() * &a;
        let s = &solution.coefficients;
        let scale = 1.0 + hta.amax();
        for n in 0..6 {
            let lhs = s[n].abs().powf(2.0) * s[n].signum();
            assert!(
                (lhs - hta[n]).abs() <= 1e-7 * scale,
                "identity residual at {n}: {} vs {}",
                lhs,
                hta[n]
            );
        }
    }

    #[test]
    fn certificate_refuses_non_stationary_input() {
        let h = DMatrix::identity(2, 2);
        let y = DVector::from_column_slice(&[1.0, 1.0]);
        let bogus = LpSolution::from_coefficients(DVector::from_column_slice(&[5.0, -5.0]), 2.0);
        assert!(matches!(
            dual_certificate(&bogus, &h, &y, 1.0, &Loss::Quadratic),
            Err(Error::InvalidProblem { .. })
        ));
    }

    #[test]
    fn pruning_leaves_small_supports_untouched() {
        let h = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        let s = DVector::from_column_slice(&[0.5, -0.25, 0.0]);
        let pruned = prune_to_extreme(&s, &h).unwrap();
        assert_eq!(pruned, s);
    }

    #[test]
    fn pruning_collapses_the_duplicated_column_pair() {
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let t = 0.3;
        let s = DVector::from_column_slice(&[t, t]);
        let pruned = prune_to_extreme(&s, &h).unwrap();
        // The lowest index is dropped; mass and measurement are conserved.
        assert_eq!(pruned[0], 0.0);
        assert_relative_eq!(pruned[1], 2.0 * t, max_relative = 1e-12);
        let l1_before: f64 = s.iter().map(|v| v.abs()).sum();
        let l1_after: f64 = pruned.iter().map(|v| v.abs()).sum();
        assert_relative_eq!(l1_before, l1_after, max_relative = 1e-12);
        assert_relative_eq!((&h * &s)[0], (&h * &pruned)[0], max_relative = 1e-12);
    }

    #[test]
    fn degenerate_instances_prune_to_small_support_with_preserved_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        for trial in 0..20 {
            let m = 2;
            let n = 6;
            let mut h = random_matrix(&mut rng, m, n);
            // Engineer degeneracy: duplicate one column and scale another.
            let dup = h.column(0).into_owned();
            h.set_column(3, &dup);
            let scaled = h.column(1).into_owned() * 2.0;
            h.set_column(4, &scaled);
            let y = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let lambda = 0.4;
            let (solution, report) = lp_primal_solve(&h, &y, lambda, 1.0, &Loss::Quadratic).unwrap();
            let pruned = prune_to_extreme(&solution.coefficients, &h).unwrap();

            let strict: Vec<usize> = (0..n).filter(|&i| pruned[i] != 0.0).collect();
            assert!(strict.len() <= m, "trial {trial}: support {}", strict.len());

            let objective = |s: &DVector<f64>| {
                (&y - &h * s).norm_squared() + lambda * s.iter().map(|v| v.abs()).sum::<f64>()
            };
            assert_relative_eq!(objective(&pruned), report.objective, max_relative = 1e-9);
            assert!(
                ((&h * &solution.coefficients) - (&h * &pruned)).amax() <= 1e-9,
                "measurements drifted"
            );

            let oracle = enumerate_support_solve(&h, &y, lambda, m).unwrap();
            assert_relative_eq!(report.objective, oracle.objective, max_relative = 1e-8);
        }
    }

    #[test]
    fn smooth_solutions_are_start_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        let h = random_matrix(&mut rng, 3, 5);
        let y = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let lambda = 0.6;
        for p in [1.5, 3.0] {
            let (a, _) = solve_smooth(&h, &y, lambda, p, &Loss::Quadratic, None).unwrap();
            let warm = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
            let (b, _) = solve_smooth(&h, &y, lambda, p, &Loss::Quadratic, Some(warm)).unwrap();
            assert!((a - b).amax() <= 1e-7, "starts disagreed at p = {p}");
        }
    }

    #[test]
    fn sub_unit_exponents_are_rejected() {
        let h = DMatrix::identity(2, 2);
        let y = DVector::zeros(2);
        assert!(matches!(
            lp_primal_solve(&h, &y, 1.0, 0.5, &Loss::Quadratic),
            Err(Error::InvalidNormPower { .. })
        ));
    }

    #[test]
    fn equality_mode_recovers_the_data_through_the_identity() {
        let y = DVector::from_column_slice(&[0.8, -0.3]);
        let (solution, report) =
            lp_primal_solve(&DMatrix::identity(2, 2), &y, 0.0, 1.0, &Loss::Equality).unwrap();
        assert!((solution.coefficients - &y).amax() <= 1e-6);
        assert!(report.warnings.iter().any(|w| w.contains("equality mode")));
    }

    #[test]
    fn huber_l1_smoke() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let h = random_matrix(&mut rng, 2, 4);
        let y = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let loss = Loss::Huber { delta: 0.8 };
        let (solution, report) = lp_primal_solve(&h, &y, 0.3, 1.0, &loss).unwrap();
        let (residual, scale) =
            stationarity_residual(&h, &y, 0.3, 1.0, &loss, &solution.coefficients).unwrap();
        assert!(residual <= 1e-9 * scale);
        assert!(report.objective.is_finite());
    }
}
