//! Conjugate maps between p-norm sequence spaces.
//!
//! For a vector x with 1 < p < inf and q = p/(p-1), the conjugate of x is
//!
//! ```text
//! x*[n] = |x[n]|^(p-1) * sign(x[n]) / ||x||_p^(p-2)
//! ```
//!
//! which is the unique norm-preserving peer of x in the dual space: it
//! satisfies `||x*||_q = ||x||_p` and attains the Holder bound,
//! `<x*, x> = ||x*||_q * ||x||_p = ||x||_p^2`. At p = 2 the map reduces to
//! the identity, which is the only exponent where it is linear; the
//! polarization form built from it is additive exactly in that case.
//!
//! The map is set-valued at p = 1 and degenerate at p = inf, so both are
//! rejected rather than approximated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Exponents closer to 2 than this take the exact identity path, avoiding
/// pow round-off on a map that is analytically the identity.
const IDENTITY_WINDOW: f64 = 1e-9;

/// A primal vector together with its conjugate and the exponent pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugatePair {
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub p: f64,
    pub q: f64,
}

/// Outcome of verifying a claimed conjugate pair.
///
/// `norm_residual` is `| ||dual||_q - ||primal||_p |` and `pairing_residual`
/// is `| <dual, primal> - ||dual||_q * ||primal||_p |`. The check passes when
/// both stay below `tol * (1 + ||primal||_p^2)`, which keeps the criterion
/// scale-free for both small and large vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCheck {
    pub norm_residual: f64,
    pub pairing_residual: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// A triple exhibiting non-additivity of the polarization form.
///
/// `violation` is `|form(x + z, y) - form(x, y) - form(z, y)|` for unit
/// vectors; any value meaningfully above round-off certifies that the
/// underlying conjugate map is nonlinear at this exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct NonadditivityWitness {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub violation: f64,
}

fn require_conjugation_exponent(p: f64) -> Result<f64> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::UnsupportedExponent { p });
    }
    Ok(p / (p - 1.0))
}

/// p-norm with max-scaling so that extreme entries do not overflow the
/// intermediate powers. Accepts any p >= 1.
pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    let peak = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    let sum: f64 = x.iter().map(|v| (v.abs() / peak).powf(p)).sum();
    peak * sum.powf(1.0 / p)
}

/// Conjugate (duality) map of `x` at exponent `p`.
///
/// Returns the zero vector for zero input; `J(0) = {0}` is the one point
/// where the set-valued definition collapses to a single value for every p.
pub fn lp_conjugate(x: &[f64], p: f64) -> Result<Vec<f64>> {
    require_conjugation_exponent(p)?;
    if (p - 2.0).abs() <= IDENTITY_WINDOW {
        return Ok(x.to_vec());
    }
    let norm = lp_norm(x, p);
    if norm == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    // ||x||^(2-p) keeps the exponent positive for p < 2 and the norm is
    // nonzero here, so both branches are finite.
    let scale = norm.powf(2.0 - p);
    Ok(x
        .iter()
        .map(|&v| {
            if v == 0.0 {
                0.0
            } else {
                v.abs().powf(p - 1.0) * v.signum() * scale
            }
        })
        .collect())
}

/// Builds the conjugate pair for `x`, carrying both exponents.
pub fn conjugate_pair(x: &[f64], p: f64) -> Result<ConjugatePair> {
    let q = require_conjugation_exponent(p)?;
    let dual = lp_conjugate(x, p)?;
    Ok(ConjugatePair {
        primal: x.to_vec(),
        dual,
        p,
        q,
    })
}

/// Verifies that `dual` is the conjugate of `primal` at exponent `p`.
///
/// Both the norm-preservation residual and the sharp-pairing residual must
/// stay below `tol * (1 + ||primal||_p^2)`.
pub fn check_conjugate_pair(primal: &[f64], dual: &[f64], p: f64, tol: f64) -> Result<PairCheck> {
    let q = require_conjugation_exponent(p)?;
    if primal.len() != dual.len() {
        return Err(Error::DimensionMismatch {
            context: "check_conjugate_pair",
            expected: primal.len(),
            found: dual.len(),
        });
    }
    let primal_norm = lp_norm(primal, p);
    let dual_norm = lp_norm(dual, q);
    let pairing: f64 = primal.iter().zip(dual).map(|(a, b)| a * b).sum();
    let norm_residual = (dual_norm - primal_norm).abs();
    let pairing_residual = (pairing - dual_norm * primal_norm).abs();
    let threshold = tol * (1.0 + primal_norm * primal_norm);
    Ok(PairCheck {
        norm_residual,
        pairing_residual,
        threshold,
        passed: norm_residual <= threshold && pairing_residual <= threshold,
    })
}

/// Bilinear pairing `<y, x>` together with the Holder slack
/// `||y||_q * ||x||_p - |<y, x>|`, which is nonnegative up to round-off.
pub fn holder_pairing(x: &[f64], y: &[f64], p: f64) -> Result<(f64, f64)> {
    let q = require_conjugation_exponent(p)?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "holder_pairing",
            expected: x.len(),
            found: y.len(),
        });
    }
    let pairing: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let slack = lp_norm(y, q) * lp_norm(x, p) - pairing.abs();
    Ok((pairing, slack))
}

/// Symmetrized polarization form `(<J x, y> + <J y, x>) / 2`.
///
/// At p = 2 this is the Euclidean inner product; at any other exponent it is
/// symmetric and homogeneous but fails additivity, which is what separates
/// the Hilbert case from the rest of the p-norm family.
pub fn polarization_inner(x: &[f64], y: &[f64], p: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "polarization_inner",
            expected: x.len(),
            found: y.len(),
        });
    }
    let jx = lp_conjugate(x, p)?;
    let jy = lp_conjugate(y, p)?;
    let a: f64 = jx.iter().zip(y).map(|(u, v)| u * v).sum();
    let b: f64 = jy.iter().zip(x).map(|(u, v)| u * v).sum();
    Ok(0.5 * (a + b))
}

/// Searches for a triple of unit vectors on which the polarization form
/// fails additivity by more than 1e-3.
///
/// Returns the best triple found, or `None` when every attempt stays below
/// the threshold; at p = 2 the form is additive and the search always
/// returns `None`.
pub fn find_nonadditivity_witness(
    p: f64,
    seed: u64,
    attempts: usize,
) -> Result<Option<NonadditivityWitness>> {
    require_conjugation_exponent(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<NonadditivityWitness> = None;
    for _ in 0..attempts {
        let dim = rng.random_range(2..=6);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = lp_norm(&v, p);
            if n == 0.0 {
                v
            } else {
                v.iter().map(|c| c / n).collect()
            }
        };
        let x = draw(&mut rng);
        let z = draw(&mut rng);
        let y = draw(&mut rng);
        let sum: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + b).collect();
        let violation = (polarization_inner(&sum, &y, p)?
            - polarization_inner(&x, &y, p)?
            - polarization_inner(&z, &y, p)?)
        .abs();
        if best.as_ref().is_none_or(|w| violation > w.violation) {
            best = Some(NonadditivityWitness { x, z, y, violation });
        }
    }
    Ok(best.filter(|w| w.violation > 1e-3))
}
