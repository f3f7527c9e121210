//! Exhaustive search over a grid of group weights.
//!
//! Sources are partitioned into groups that share one weight. Every
//! composition of the unit budget into positive grid multiples, one per
//! group, is checked by a pluggable verifier; the full feasible set comes
//! back, not just one point, so callers can compare regions or pick any
//! point they like.

use crate::bounds::{long_regime_bound, short_regime_bound, EllStrategy, ThetaSearch};
use crate::model::{SystemConfig, ViolationSpec, WeightVector};
use crate::simulator::{derive_seed, estimate_violation, run_simulation, SimOptions};
use crate::wallenius::{GroupStructure, PmfMode};

use super::{
    validate_request, Decision, DesignError, DesignOutcome, DesignerConfig, WeightDesigner,
};

/// How a candidate weight vector is certified against the targets.
pub enum Verifier {
    /// Fresh simulation per candidate; target i passes when the empirical
    /// violation plus three confidence halfwidths stays at or below eps.
    /// The budget caps the total samples drawn across all candidates.
    Simulate {
        samples_per_source: usize,
        total_budget: usize,
    },
    /// Long-regime certificate per source.
    LongBound { strategy: EllStrategy, pmf: PmfMode },
    /// Short-regime certificate per source.
    ShortBound,
}

/// One verified grid point.
#[derive(Debug, Clone)]
pub struct FeasiblePoint {
    /// Weight per group, in group order.
    pub group_weights: Vec<f64>,
    /// The per-source expansion that was certified.
    pub weights: WeightVector,
    /// Certified violation level per source; meaning depends on the
    /// verifier but is comparable across points of one search.
    pub certified: Vec<f64>,
}

/// All feasible grid points plus the indices of those not dominated
/// coordinatewise by another point's certified vector.
#[derive(Debug, Clone)]
pub struct FeasibleSet {
    pub points: Vec<FeasiblePoint>,
    pub frontier: Vec<usize>,
    /// Grid points examined, feasible or not.
    pub candidates: usize,
}

fn compositions(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        if total >= 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
        }
        return;
    }
    for k in 1..=total.saturating_sub(parts - 1) {
        prefix.push(k);
        compositions(total - k, parts - 1, prefix, out);
        prefix.pop();
    }
}

fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

fn pareto_frontier(points: &[FeasiblePoint]) -> Vec<usize> {
    let mut frontier = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate() {
            if i != j && dominates(&q.certified, &p.certified) {
                continue 'outer;
            }
        }
        frontier.push(i);
    }
    frontier
}

/// Certifies one candidate. Ok(Some(v)) holds the per-source certified
/// levels, Ok(None) means some target failed.
fn verify_candidate(
    config: &SystemConfig,
    targets: &[ViolationSpec],
    weights: &WeightVector,
    groups: &GroupStructure,
    verifier: &Verifier,
    stream: u64,
    budget_used: &mut usize,
) -> Result<Option<Vec<f64>>, DesignError> {
    match verifier {
        Verifier::Simulate {
            samples_per_source,
            total_budget,
        } => {
            let cost = samples_per_source * config.n;
            if *budget_used + cost > *total_budget {
                return Err(DesignError::BudgetExceeded {
                    used: *budget_used,
                    budget: *total_budget,
                });
            }
            *budget_used += cost;
            let mut cfg = config.clone();
            cfg.seed = derive_seed(config.seed, stream);
            let mut opts = SimOptions::new(*samples_per_source);
            opts.record_cap = Some(0);
            let run = run_simulation(&cfg, weights, &opts)?;
            let mut certified = Vec::with_capacity(config.n);
            for (i, t) in targets.iter().enumerate() {
                let (p, half) = estimate_violation(&run.samples[i], t.x)?;
                let level = p + 3.0 * half;
                if level > t.eps {
                    return Ok(None);
                }
                certified.push(level);
            }
            Ok(Some(certified))
        }
        Verifier::LongBound { strategy, pmf } => {
            let search = ThetaSearch::for_service(&config.service);
            let mut certified = Vec::with_capacity(config.n);
            for (i, t) in targets.iter().enumerate() {
                let r = long_regime_bound(
                    i,
                    t.x,
                    config.b,
                    &config.service,
                    weights,
                    &search,
                    *strategy,
                    *pmf,
                    Some(groups),
                )?;
                if r.value > t.eps {
                    return Ok(None);
                }
                certified.push(r.value);
            }
            Ok(Some(certified))
        }
        Verifier::ShortBound => {
            let search = ThetaSearch::for_service(&config.service);
            let mut certified = Vec::with_capacity(config.n);
            for (i, t) in targets.iter().enumerate() {
                let r =
                    short_regime_bound(t.x, config.b, &config.service, weights.get(i), &search)?;
                if !(r.admissible && r.value <= t.eps) {
                    return Ok(None);
                }
                certified.push(r.value);
            }
            Ok(Some(certified))
        }
    }
}

/// Examines every composition of the unit budget into positive multiples of
/// `grid_step`, one per group, splitting each group's weight equally over
/// its sources, and returns the points the verifier accepts.
pub fn optimal_search(
    config: &SystemConfig,
    targets: &[ViolationSpec],
    groups: &GroupStructure,
    grid_step: f64,
    verifier: &Verifier,
) -> Result<FeasibleSet, DesignError> {
    config.validate()?;
    if targets.len() != config.n {
        return Err(DesignError::Config {
            detail: format!(
                "{} targets for {} sources, need one per source",
                targets.len(),
                config.n
            ),
        });
    }
    for t in targets {
        t.validate(config.b)?;
    }
    if groups.total_sources() != config.n {
        return Err(DesignError::Config {
            detail: format!(
                "groups cover {} sources, system has {}",
                groups.total_sources(),
                config.n
            ),
        });
    }
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(DesignError::Config {
            detail: format!("grid step {grid_step} is outside (0, 1]"),
        });
    }
    let steps = (1.0 / grid_step).round();
    if (steps * grid_step - 1.0).abs() > 1e-9 {
        return Err(DesignError::Config {
            detail: format!("grid step {grid_step} does not divide the unit budget"),
        });
    }
    let steps = steps as usize;
    if steps < groups.num_groups() {
        return Err(DesignError::Config {
            detail: format!(
                "grid step {grid_step} leaves no room for {} positive group weights",
                groups.num_groups()
            ),
        });
    }

    let mut combos = Vec::new();
    compositions(steps, groups.num_groups(), &mut Vec::new(), &mut combos);

    let mut points = Vec::new();
    let mut budget_used = 0usize;
    for (idx, combo) in combos.iter().enumerate() {
        let group_weights: Vec<f64> = combo.iter().map(|&k| k as f64 * grid_step).collect();
        let mut flat = vec![0.0f64; config.n];
        for (g, &gw) in group_weights.iter().enumerate() {
            let range = groups.block_range(g);
            let share = gw / range.len() as f64;
            for s in range {
                flat[s] = share;
            }
        }
        let weights = WeightVector::new(flat)?;
        if let Some(certified) = verify_candidate(
            config,
            targets,
            &weights,
            groups,
            verifier,
            idx as u64,
            &mut budget_used,
        )? {
            points.push(FeasiblePoint {
                group_weights,
                weights,
                certified,
            });
        }
    }
    let frontier = pareto_frontier(&points);
    Ok(FeasibleSet {
        points,
        frontier,
        candidates: combos.len(),
    })
}

/// The grid search dressed as a designer: runs the full search and returns
/// the feasible point with the largest worst-case margin to its targets.
pub struct OptSearchDesigner {
    groups: GroupStructure,
    grid_step: f64,
    verifier: Verifier,
}

impl OptSearchDesigner {
    pub fn new(groups: GroupStructure, grid_step: f64, verifier: Verifier) -> Self {
        OptSearchDesigner {
            groups,
            grid_step,
            verifier,
        }
    }
}

impl WeightDesigner for OptSearchDesigner {
    fn name(&self) -> &'static str {
        "opt-search"
    }

    fn design(
        &self,
        config: &SystemConfig,
        targets: &[ViolationSpec],
        dcfg: &DesignerConfig,
    ) -> Result<DesignOutcome, DesignError> {
        validate_request(config, targets, dcfg)?;
        let set = optimal_search(config, targets, &self.groups, self.grid_step, &self.verifier)?;
        let mut outcome = DesignOutcome {
            decision: Decision::Feasible(WeightVector::uniform(config.n).unwrap()),
            certified: Vec::new(),
            trace: Vec::new(),
            diagnostics: Default::default(),
        };
        outcome
            .diagnostics
            .insert("candidates".to_string(), set.candidates as f64);
        outcome
            .diagnostics
            .insert("feasible".to_string(), set.points.len() as f64);
        if set.points.is_empty() {
            outcome.decision = Decision::Infeasible {
                source: 0,
                tightest_bound: f64::INFINITY,
                detail: format!("none of {} grid points verified feasible", set.candidates),
            };
            return Ok(outcome);
        }
        let margin = |p: &FeasiblePoint| -> f64 {
            p.certified
                .iter()
                .zip(targets)
                .map(|(c, t)| t.eps - c)
                .fold(f64::INFINITY, f64::min)
        };
        let mut best = 0usize;
        for i in 1..set.points.len() {
            if margin(&set.points[i]) > margin(&set.points[best]) {
                best = i;
            }
        }
        outcome
            .diagnostics
            .insert("chosen_index".to_string(), best as f64);
        outcome
            .diagnostics
            .insert("worst_margin".to_string(), margin(&set.points[best]));
        outcome.certified = set.points[best].certified.clone();
        outcome.decision = Decision::Feasible(set.points[best].weights.clone());
        Ok(outcome)
    }
}
