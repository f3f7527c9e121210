//! Draw-set probabilities by direct numerical integration.

use crate::numeric::{integrate_adaptive, PanelBudgetExceeded};

use super::{DrawOutcome, WalleniusError};

/// Absolute tolerance requested from the panel integrator.
const ABS_TOL: f64 = 1e-10;
/// Panel budget; exceeding it reports failure instead of a silent bad value.
const MAX_PANELS: usize = 200_000;

/// Probability that the first `ell` draws are exactly the drawn set of
/// `outcome`, via the integral representation
/// `INT_0^1 prod_j (1 - t^(mu_j/d)) dt` with `d` the total weight left in
/// the urn afterwards.
pub fn pmf_quadrature(weights: &[f64], outcome: &DrawOutcome) -> Result<f64, WalleniusError> {
    assert_eq!(
        weights.len(),
        outcome.len(),
        "outcome covers {} sources but {} weights were given",
        outcome.len(),
        weights.len()
    );
    let mu: Vec<f64> = outcome.drawn_indices().map(|j| weights[j]).collect();
    if mu.is_empty() || mu.len() == weights.len() {
        return Ok(1.0);
    }
    let d = 1.0 - mu.iter().sum::<f64>();
    if d <= 0.0 {
        return Err(WalleniusError::NumericalFailure {
            detail: format!("remaining weight {d:e} is not positive"),
        });
    }
    let exponents: Vec<f64> = mu.iter().map(|m| m / d).collect();
    let integrand = move |t: f64| -> f64 {
        let mut p = 1.0;
        for &e in &exponents {
            p *= 1.0 - t.powf(e);
        }
        p
    };
    match integrate_adaptive(&integrand, 0.0, 1.0, ABS_TOL, MAX_PANELS) {
        Ok(v) => Ok(v.clamp(0.0, 1.0)),
        Err(PanelBudgetExceeded) => Err(WalleniusError::NumericalFailure {
            detail: format!("panel budget of {MAX_PANELS} exhausted"),
        }),
    }
}
