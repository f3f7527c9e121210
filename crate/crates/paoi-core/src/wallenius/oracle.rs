//! Exact draw-set probabilities by dynamic programming over subsets.
//!
//! Sequential weighted sampling without replacement admits a direct
//! recursion: the probability that the first draws are exactly the set S is
//! the sum, over the element j drawn last, of the probability for S minus j
//! times the conditional pick probability of j. This route never touches an
//! integral, so it serves as an independent check on the quadrature and
//! saddlepoint routes.

use super::{DrawOutcome, WalleniusError};

/// Largest draw set the subset recursion accepts. The table is 2^ell wide,
/// so the cap keeps memory and time at desk scale.
pub(crate) const ORACLE_MAX_DRAWN: usize = 20;

/// Probability that the first `ell` draws are exactly the drawn set of
/// `outcome`, computed exactly.
///
/// The empty and the complete set are certain. Draw sets above
/// [`ORACLE_MAX_DRAWN`] are refused rather than half-computed.
pub fn pmf_oracle(weights: &[f64], outcome: &DrawOutcome) -> Result<f64, WalleniusError> {
    assert_eq!(
        weights.len(),
        outcome.len(),
        "outcome covers {} sources but {} weights were given",
        outcome.len(),
        weights.len()
    );
    let drawn: Vec<usize> = outcome.drawn_indices().collect();
    let ell = drawn.len();
    if ell == 0 || ell == weights.len() {
        return Ok(1.0);
    }
    if ell > ORACLE_MAX_DRAWN {
        return Err(WalleniusError::TooLarge {
            ell,
            cap: ORACLE_MAX_DRAWN,
        });
    }
    let mu: Vec<f64> = drawn.iter().map(|&j| weights[j]).collect();
    let full = 1usize << ell;

    // weight_sum[mask] = total weight of the sources in the mask.
    let mut weight_sum = vec![0.0f64; full];
    for mask in 1..full {
        let low = mask.trailing_zeros() as usize;
        weight_sum[mask] = weight_sum[mask & (mask - 1)] + mu[low];
    }

    // prob[mask] = chance the first |mask| draws are exactly the mask.
    let mut prob = vec![0.0f64; full];
    prob[0] = 1.0;
    for mask in 1..full {
        let mut acc = 0.0;
        let mut rest = mask;
        while rest != 0 {
            let j = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let without = mask & !(1 << j);
            // Last element drawn is j; before that, everything outside
            // `without` is still in the urn.
            acc += prob[without] * mu[j] / (1.0 - weight_sum[without]);
        }
        prob[mask] = acc;
    }
    Ok(prob[full - 1])
}
