//! Independent per-source weight design against the short-regime bound.
//!
//! The short-regime certificate for a source depends only on that source's
//! own weight, so each source can be sized on its own: take the smallest
//! grid weight whose bound meets the target, then check the weights fit in
//! the unit budget. Leftover budget is spread equally, which can only help,
//! because the bound is strictly decreasing in the weight at every fixed
//! transform point (the derivative of mu / (1 - c(1 - mu)) in mu has the
//! sign of 1 - c, and c > 1 on the admissible range).

use crate::bounds::{admissible_theta_sup, short_regime_bound, BoundError, ThetaSearch};
use crate::model::{ServiceModel, SystemConfig, ViolationSpec, WeightVector};

use super::{
    validate_request, Decision, DesignError, DesignOutcome, DesignerConfig, TraceStep,
    WeightDesigner,
};

pub struct RandomizedS;

/// Smallest grid multiple of `delta` at or above `v`, guarded against the
/// quotient landing one ulp above an integer.
fn grid_ceil_index(v: f64, delta: f64) -> usize {
    let k = (v / delta - 1e-9).ceil();
    if k < 1.0 {
        1
    } else {
        k as usize
    }
}

/// Range of weights that keep the bound at `eps` solvable at a fixed
/// transform point `theta`.
///
/// The lower edge is the admissibility floor: below it the denominator of
/// the bound is not positive. The upper edge is printed in input order,
/// eps * (1 - e^L) / (e^L * (e^{-theta (x - b)} - eps)) with L the log mgf
/// at theta. Note the sign flip: when eps exceeds e^{-theta (x - b)} both
/// the numerator and the denominator are negative, the value is positive
/// and equals the weight at which the bound crosses eps, so the returned
/// flag (denominator not positive) fires exactly when the edge is usable as
/// a minimal feasible weight. With the flag clear the printed edge is
/// negative and carries no weight information.
pub fn weight_window_at_theta(
    service: &ServiceModel,
    theta: f64,
    x: f64,
    b: f64,
    mu_i: f64,
    eps: f64,
) -> Result<(f64, f64, bool), BoundError> {
    if x <= b {
        return Err(BoundError::Domain {
            detail: format!("x = {x} must exceed b = {b}"),
        });
    }
    let sup = admissible_theta_sup(service, mu_i);
    if theta >= sup {
        return Err(BoundError::Domain {
            detail: format!("theta = {theta} is not admissible below {sup} at mu = {mu_i}"),
        });
    }
    let el = service.log_mgf(theta)?;
    let lo = 1.0 - (-el).exp();
    let den = el.exp() * ((-theta * (x - b)).exp() - eps);
    let hi = eps * (1.0 - el.exp()) / den;
    Ok((lo, hi, den <= 0.0))
}

/// Per-source minimal grid weight, or the tightest bound seen if none fits.
fn minimal_weight(
    target: &ViolationSpec,
    config: &SystemConfig,
    search: &ThetaSearch,
    delta: f64,
) -> Result<Result<(usize, f64, f64), f64>, DesignError> {
    let k_max = ((1.0 + 1e-9) / delta).floor() as usize;
    let mut tightest = f64::INFINITY;
    for k in 1..=k_max {
        let mu = (k as f64 * delta).min(1.0);
        let r = short_regime_bound(target.x, config.b, &config.service, mu, search)?;
        if r.admissible && r.value < tightest {
            tightest = r.value;
        }
        if r.admissible && r.value <= target.eps {
            return Ok(Ok((k, r.theta_star, r.value)));
        }
    }
    Ok(Err(tightest))
}

/// Shared tail: check the unit budget, spread slack equally, certify each
/// source at its final weight.
fn finalize(
    config: &SystemConfig,
    targets: &[ViolationSpec],
    search: &ThetaSearch,
    delta: f64,
    minimal: &[(usize, f64)],
    mut outcome: DesignOutcome,
) -> Result<DesignOutcome, DesignError> {
    let n = config.n;
    let sum: f64 = minimal.iter().map(|&(k, _)| k as f64 * delta).sum();
    outcome
        .diagnostics
        .insert("sum_minimal".to_string(), sum);
    for (i, &(k, _)) in minimal.iter().enumerate() {
        outcome
            .diagnostics
            .insert(format!("minimal_mu_{i}"), k as f64 * delta);
    }
    if sum > 1.0 + 1e-9 {
        // Blame the hungriest source; first one on ties.
        let mut worst = 0usize;
        for (i, &(k, _)) in minimal.iter().enumerate() {
            if k > minimal[worst].0 {
                worst = i;
            }
        }
        outcome.decision = Decision::Infeasible {
            source: worst,
            tightest_bound: minimal[worst].1,
            detail: format!("sum of minimal weights {sum} exceeds the unit budget"),
        };
        return Ok(outcome);
    }
    let slack = 1.0 - sum;
    outcome.diagnostics.insert("slack".to_string(), slack);

    let final_mu: Vec<f64> = minimal
        .iter()
        .map(|&(k, _)| k as f64 * delta + slack / n as f64)
        .collect();
    let weights = WeightVector::new(final_mu)?;
    let mut certified = Vec::with_capacity(n);
    for (i, target) in targets.iter().enumerate() {
        let r = short_regime_bound(target.x, config.b, &config.service, weights.get(i), search)?;
        if !(r.admissible && r.value <= target.eps) {
            outcome.decision = Decision::Infeasible {
                source: i,
                tightest_bound: r.value,
                detail: format!(
                    "final-weight certificate {} exceeds eps = {}",
                    r.value, target.eps
                ),
            };
            return Ok(outcome);
        }
        outcome.trace.push(TraceStep {
            source: i,
            mu: weights.get(i),
            theta_star: r.theta_star,
            bound: r.value,
        });
        certified.push(r.value);
    }
    outcome.decision = Decision::Feasible(weights);
    outcome.certified = certified;
    Ok(outcome)
}

impl WeightDesigner for RandomizedS {
    fn name(&self) -> &'static str {
        "randomized-s"
    }

    fn design(
        &self,
        config: &SystemConfig,
        targets: &[ViolationSpec],
        dcfg: &DesignerConfig,
    ) -> Result<DesignOutcome, DesignError> {
        validate_request(config, targets, dcfg)?;
        let search = ThetaSearch::for_service(&config.service);
        let mut outcome = DesignOutcome {
            decision: Decision::Feasible(WeightVector::uniform(config.n).unwrap()),
            certified: Vec::new(),
            trace: Vec::new(),
            diagnostics: Default::default(),
        };

        let mut minimal: Vec<(usize, f64)> = Vec::with_capacity(config.n);
        for (i, target) in targets.iter().enumerate() {
            match minimal_weight(target, config, &search, dcfg.delta)? {
                Ok((k, _, bound)) => minimal.push((k, bound)),
                Err(tightest) => {
                    outcome.decision = Decision::Infeasible {
                        source: i,
                        tightest_bound: tightest,
                        detail: format!("no admissible grid weight meets eps = {}", target.eps),
                    };
                    return Ok(outcome);
                }
            }
        }
        finalize(config, targets, &search, dcfg.delta, &minimal, outcome)
    }
}

/// Fixed-point variant: instead of sweeping the grid, each source repeats
/// "take the bound's optimal transform point at the current weight, invert
/// the bound for the weight that meets the target there, round up to the
/// grid". Every iterate stays feasible (meeting the target at one transform
/// point only loosens under the minimizing one), and the sequence descends
/// to the same minimal grid weight the sweep finds.
pub fn randomized_s_fixed_point(
    config: &SystemConfig,
    targets: &[ViolationSpec],
    dcfg: &DesignerConfig,
) -> Result<DesignOutcome, DesignError> {
    validate_request(config, targets, dcfg)?;
    let search = ThetaSearch::for_service(&config.service);
    let k_max = ((1.0 + 1e-9) / dcfg.delta).floor() as usize;
    let mut outcome = DesignOutcome {
        decision: Decision::Feasible(WeightVector::uniform(config.n).unwrap()),
        certified: Vec::new(),
        trace: Vec::new(),
        diagnostics: Default::default(),
    };

    let mut ks = vec![k_max; config.n];
    let mut iterations = 0usize;
    for _ in 0..dcfg.max_fixed_point_iters {
        iterations += 1;
        let mut next = ks.clone();
        for (i, target) in targets.iter().enumerate() {
            let mu = (ks[i] as f64 * dcfg.delta).min(1.0);
            let r = short_regime_bound(target.x, config.b, &config.service, mu, &search)?;
            if !r.admissible {
                // Too light for any admissible transform point, step up.
                next[i] = (ks[i] + 1).min(k_max);
                continue;
            }
            let (lo, hi, usable) = weight_window_at_theta(
                &config.service,
                r.theta_star,
                target.x,
                config.b,
                mu,
                target.eps,
            )?;
            if usable {
                next[i] = grid_ceil_index(hi.max(lo), dcfg.delta).min(k_max);
            } else {
                // No weight meets the target at this transform point; a
                // heavier weight moves the optimum, so step up and retry.
                next[i] = (ks[i] + 1).min(k_max);
            }
        }
        if next == ks {
            break;
        }
        ks = next;
    }
    outcome
        .diagnostics
        .insert("iterations".to_string(), iterations as f64);

    let mut minimal: Vec<(usize, f64)> = Vec::with_capacity(config.n);
    for (i, target) in targets.iter().enumerate() {
        let mu = (ks[i] as f64 * dcfg.delta).min(1.0);
        let r = short_regime_bound(target.x, config.b, &config.service, mu, &search)?;
        if !(r.admissible && r.value <= target.eps) {
            outcome.decision = Decision::Infeasible {
                source: i,
                tightest_bound: r.value,
                detail: format!(
                    "fixed point stalled at mu = {mu} with bound {} above eps = {}",
                    r.value, target.eps
                ),
            };
            return Ok(outcome);
        }
        minimal.push((ks[i], r.value));
    }
    finalize(config, targets, &search, dcfg.delta, &minimal, outcome)
}
