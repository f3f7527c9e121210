//! Saddlepoint approximation of the draw-set integral.
//!
//! For any r > 0 the substitution u = t^(r d) turns the base integral into
//!
//! ```text
//!   INT_0^1 r d t^(r d - 1) prod_j (1 - t^(r mu_j)) dt,
//! ```
//!
//! so r is free to reshape the integrand. Placing its interior maximum at a
//! fixed tau = 1/2 and applying a Gaussian (Laplace) step there gives a
//! closed-form estimate whose cost does not grow with the number of draw
//! sets, which is what makes weight sweeps over many sources affordable.

use std::f64::consts::PI;

use super::{DrawOutcome, WalleniusError};

/// Saddle placement: the inner maximum is pinned at `tau` by choosing `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FogParams {
    pub tau: f64,
    pub r: f64,
}

const TAU: f64 = 0.5;
const R_LO: f64 = 1e-8;
const R_HI: f64 = 1e8;
const RESIDUAL_TOL: f64 = 1e-10;

/// Stationarity residual of the log-integrand at `TAU` as a function of r:
/// `(r d - 1)/tau - sum_j r mu_j tau^(r mu_j - 1) / (1 - tau^(r mu_j))`.
fn saddle_residual(drawn: &[f64], d: f64, r: f64) -> f64 {
    let ln_tau = TAU.ln();
    let mut s = (r * d - 1.0) / TAU;
    for &m in drawn {
        let x = r * m * ln_tau;
        let q = x.exp();
        let one_minus_q = -f64::exp_m1(x);
        s -= (r * m / TAU) * q / one_minus_q;
    }
    s
}

fn saddle_residual_slope(drawn: &[f64], d: f64, r: f64) -> f64 {
    let ln_tau = TAU.ln();
    let mut s = d / TAU;
    for &m in drawn {
        let x = r * m * ln_tau;
        let q = x.exp();
        let one_minus_q = -f64::exp_m1(x);
        s -= (m / TAU) * (q / one_minus_q) * (1.0 + x / one_minus_q);
    }
    s
}

/// Solves for the r that places the integrand maximum at tau = 1/2, by
/// Newton steps safeguarded with a shrinking sign-change bracket.
///
/// `drawn_weights` must be positive with total strictly below one.
pub fn fog_solve(drawn_weights: &[f64]) -> Result<FogParams, WalleniusError> {
    let total: f64 = drawn_weights.iter().sum();
    let d = 1.0 - total;
    assert!(
        !drawn_weights.is_empty() && d > 0.0,
        "saddle solve needs a non-empty draw set with remaining weight, got d = {d}"
    );

    let mut lo = R_LO;
    let mut hi = R_HI;
    let h_lo = saddle_residual(drawn_weights, d, lo);
    let h_hi = saddle_residual(drawn_weights, d, hi);
    if !(h_lo < 0.0 && h_hi > 0.0) {
        return Err(WalleniusError::NoRoot {
            detail: format!(
                "no sign change on ({lo:e}, {hi:e}): residuals {h_lo:e} and {h_hi:e}"
            ),
        });
    }

    // The residual is negative wherever r d <= 1, so the root sits above
    // 1/d; that makes 1/d a natural starting point.
    let mut r = (1.0 / d).clamp(lo, hi);
    let mut hr = saddle_residual(drawn_weights, d, r);
    for _ in 0..200 {
        if hr.abs() <= RESIDUAL_TOL {
            return Ok(FogParams { tau: TAU, r });
        }
        if hr < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let slope = saddle_residual_slope(drawn_weights, d, r);
        let mut next = r - hr / slope;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        r = next;
        hr = saddle_residual(drawn_weights, d, r);
    }
    Err(WalleniusError::NoRoot {
        detail: format!("residual {hr:e} still above {RESIDUAL_TOL:e} after 200 iterations"),
    })
}

/// Saddlepoint estimate of the draw-set probability.
///
/// Unlike the quadrature and exact routes this one has no meaningful value
/// for the empty or the complete draw set and reports them as degenerate;
/// dispatch through [`PmfBackend`](super::PmfBackend) if uniform handling
/// of those cases is wanted.
pub fn pmf_fog(weights: &[f64], outcome: &DrawOutcome) -> Result<f64, WalleniusError> {
    assert_eq!(
        weights.len(),
        outcome.len(),
        "outcome covers {} sources but {} weights were given",
        outcome.len(),
        weights.len()
    );
    let mu: Vec<f64> = outcome.drawn_indices().map(|j| weights[j]).collect();
    let ell = mu.len();
    let n = weights.len();
    if ell == 0 || ell == n {
        return Err(WalleniusError::DegenerateOutcome { ell, n });
    }
    let d = 1.0 - mu.iter().sum::<f64>();
    if d <= 0.0 {
        return Err(WalleniusError::NumericalFailure {
            detail: format!("remaining weight {d:e} is not positive"),
        });
    }
    let FogParams { tau, r } = fog_solve(&mu)?;
    let rd = r * d;
    let ln_tau = tau.ln();

    // Integrand height at the saddle.
    let mut phi = rd * tau.powf(rd - 1.0);
    for &m in &mu {
        phi *= -f64::exp_m1(r * m * ln_tau);
    }

    // Second derivative of the log-integrand at the saddle; must be
    // negative for the Gaussian step to make sense.
    let mut psi = -(rd - 1.0) / (tau * tau);
    for &m in &mu {
        let a = r * m;
        let ta = tau.powf(a);
        let omta = 1.0 - ta;
        psi -= a * ((a - 1.0) * tau.powf(a - 2.0) * omta + a * tau.powf(2.0 * a - 2.0))
            / (omta * omta);
    }
    if psi >= 0.0 {
        return Err(WalleniusError::InvalidCurvature { psi });
    }
    Ok(phi * (2.0 * PI / -psi).sqrt())
}
