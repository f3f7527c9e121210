//! Scheduling-weight design: turn per-source violation targets
//! (x_i, eps_i) into a weight vector whose certified bounds meet every
//! target, or an infeasibility verdict naming the binding source.
//!
//! Three strategies share the [`WeightDesigner`] trait. Two are
//! closed-loop searches against an analytical bound, one per regime; the
//! third brute-forces a low-dimensional group-weight grid against a
//! configurable verifier and serves as the region baseline the other two
//! are judged against.

use std::collections::BTreeMap;
use std::fmt;

use crate::bounds::BoundError;
use crate::model::{ModelError, SystemConfig, ViolationSpec, WeightVector};
use crate::simulator::SimError;
use crate::wallenius::PmfMode;

mod optimal;
mod randomized_l;
mod randomized_s;

pub use optimal::{optimal_search, FeasiblePoint, FeasibleSet, OptSearchDesigner, Verifier};
pub use randomized_l::RandomizedL;
pub use randomized_s::{randomized_s_fixed_point, weight_window_at_theta, RandomizedS};

/// Shared designer knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignerConfig {
    /// Weight grid step; candidate weights are multiples of this.
    pub delta: f64,
    /// Draw-order pmf backend used inside the long-regime bound.
    pub pmf_mode: PmfMode,
    /// Cap for the fixed-point variant of the short-regime designer.
    pub max_fixed_point_iters: usize,
}

impl Default for DesignerConfig {
    fn default() -> Self {
        DesignerConfig {
            delta: 0.01,
            pmf_mode: PmfMode::Fog,
            max_fixed_point_iters: 50,
        }
    }
}

impl DesignerConfig {
    pub fn validate(&self) -> Result<(), DesignError> {
        // The grid must cut the unit interval into at least ten cells.
        if !(self.delta > 0.0 && self.delta <= 0.1) {
            return Err(DesignError::Config {
                detail: format!("grid step {} outside (0, 0.1]", self.delta),
            });
        }
        Ok(())
    }
}

/// One accepted step of a designer's search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    /// Source the step chose a weight for (original index).
    pub source: usize,
    pub mu: f64,
    pub theta_star: f64,
    pub bound: f64,
}

/// Final verdict of a design run.
#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Feasible(WeightVector),
    Infeasible {
        /// First source that could not be served (original index).
        source: usize,
        /// Best bound value achieved for that source before giving up.
        tightest_bound: f64,
        detail: String,
    },
}

#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub decision: Decision,
    /// Certified bound value per source at the returned weights; empty when
    /// infeasible.
    pub certified: Vec<f64>,
    pub trace: Vec<TraceStep>,
    /// Named scalar diagnostics (slack redistributed, iterations used).
    pub diagnostics: BTreeMap<String, f64>,
}

impl DesignOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self.decision, Decision::Feasible(_))
    }

    pub fn weights(&self) -> Option<&WeightVector> {
        match &self.decision {
            Decision::Feasible(w) => Some(w),
            Decision::Infeasible { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DesignError {
    Config { detail: String },
    Bound(BoundError),
    Sim(SimError),
    /// The simulation verifier ran out of its sample budget.
    BudgetExceeded { used: usize, budget: usize },
}

impl fmt::Display for DesignError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignError::Config { detail } => write!(f, "invalid design request: {detail}"),
            DesignError::Bound(e) => write!(f, "design bound evaluation failed: {e}"),
            DesignError::Sim(e) => write!(f, "design verification failed: {e}"),
            DesignError::BudgetExceeded { used, budget } => {
                write!(f, "simulation budget exhausted: {used} of {budget} samples")
            }
        }
    }
}

impl std::error::Error for DesignError {}

impl From<BoundError> for DesignError {
    fn from(e: BoundError) -> Self {
        DesignError::Bound(e)
    }
}

impl From<ModelError> for DesignError {
    fn from(e: ModelError) -> Self {
        DesignError::Bound(BoundError::Model(e))
    }
}

impl From<SimError> for DesignError {
    fn from(e: SimError) -> Self {
        DesignError::Sim(e)
    }
}

/// A weight-design strategy, selectable by name at runtime.
pub trait WeightDesigner: Sync {
    fn name(&self) -> &'static str;

    /// Designs weights for `config` meeting `targets` (one per source).
    fn design(
        &self,
        config: &SystemConfig,
        targets: &[ViolationSpec],
        dcfg: &DesignerConfig,
    ) -> Result<DesignOutcome, DesignError>;
}

/// The registered, parameter-free strategies. The grid baseline needs a
/// group structure and verifier, so it is constructed explicitly via
/// [`OptSearchDesigner::new`] instead of living here.
static DESIGNERS: [&dyn WeightDesigner; 2] = [&RandomizedL, &RandomizedS];

pub fn designer_by_name(name: &str) -> Option<&'static dyn WeightDesigner> {
    DESIGNERS.iter().copied().find(|d| d.name() == name)
}

pub fn designer_names() -> Vec<&'static str> {
    DESIGNERS.iter().map(|d| d.name()).collect()
}

/// Shared validation for designer entry points.
fn validate_request(
    config: &SystemConfig,
    targets: &[ViolationSpec],
    dcfg: &DesignerConfig,
) -> Result<(), DesignError> {
    config.validate()?;
    dcfg.validate()?;
    if targets.len() != config.n {
        return Err(DesignError::Config {
            detail: format!("{} targets for {} sources", targets.len(), config.n),
        });
    }
    for (i, t) in targets.iter().enumerate() {
        t.validate(config.b).map_err(|e| DesignError::Config {
            detail: format!("target {i}: {e}"),
        })?;
    }
    Ok(())
}
