//! System description shared by the simulator and the analytical layers:
//! service-time models, scheduling weight vectors, and per-source violation
//! targets.
//!
//! The system under study has `n` sources generating status updates every `b`
//! time units, all at the same instants. Each source keeps at most one update
//! queued (a fresh update replaces a waiting one, never one already in
//! service). A single transmitter serves the queues; whenever it goes idle it
//! picks one non-empty queue at random, with probability proportional to the
//! scheduling weights.

use std::fmt;

use rand::Rng;

/// Service-time distribution of the shared transmitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServiceModel {
    /// Exponential with the given rate.
    Exponential { rate: f64 },
    /// Deterministic with the given duration.
    Deterministic { value: f64 },
}

impl ServiceModel {
    /// Log moment generating function log E[e^{theta V}].
    ///
    /// Only defined on 0 <= theta < [`theta_max`](Self::theta_max); callers
    /// must keep their searches strictly inside that range.
    pub fn log_mgf(&self, theta: f64) -> Result<f64, ModelError> {
        if theta < 0.0 {
            return Err(ModelError::Domain {
                what: "log-MGF",
                detail: format!("theta = {theta} is negative"),
            });
        }
        match *self {
            ServiceModel::Exponential { rate } => {
                if theta >= rate {
                    Err(ModelError::Domain {
                        what: "log-MGF of exponential service",
                        detail: format!("theta = {theta} is not below the rate {rate}"),
                    })
                } else {
                    Ok((rate / (rate - theta)).ln())
                }
            }
            ServiceModel::Deterministic { value } => Ok(theta * value),
        }
    }

    /// Supremum of the domain of the log-MGF. Infinite for deterministic
    /// service.
    pub fn theta_max(&self) -> f64 {
        match *self {
            ServiceModel::Exponential { rate } => rate,
            ServiceModel::Deterministic { .. } => f64::INFINITY,
        }
    }

    /// Mean service time.
    pub fn mean(&self) -> f64 {
        match *self {
            ServiceModel::Exponential { rate } => 1.0 / rate,
            ServiceModel::Deterministic { value } => value,
        }
    }

    /// Draws one service time. Deterministic service consumes no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ServiceModel::Exponential { rate } => {
                // Inverse-CDF on a uniform in [0, 1); 1 - u avoids ln(0).
                let u: f64 = rng.gen();
                -(1.0 - u).ln() / rate
            }
            ServiceModel::Deterministic { value } => value,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = match *self {
            ServiceModel::Exponential { rate } => rate.is_finite() && rate > 0.0,
            ServiceModel::Deterministic { value } => value.is_finite() && value > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::Validation {
                what: "service model",
                detail: format!("{self:?} needs a positive finite parameter"),
            })
        }
    }
}

/// Scheduling weights, one per source, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    /// Accepts weights that are strictly positive and sum to one within
    /// 1e-9, then renormalizes by the exact sum so downstream arithmetic
    /// sees a total of exactly one.
    pub fn new(weights: Vec<f64>) -> Result<Self, ModelError> {
        if weights.is_empty() {
            return Err(ModelError::Validation {
                what: "weight vector",
                detail: "no weights given".to_string(),
            });
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() || *w <= 0.0 {
                return Err(ModelError::Validation {
                    what: "weight vector",
                    detail: format!("weight {i} is {w}, expected a positive finite value"),
                });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::Validation {
                what: "weight vector",
                detail: format!("weights sum to {sum:.12}, expected 1 within 1e-9"),
            });
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(WeightVector { weights })
    }

    /// Equal weights 1/n.
    pub fn uniform(n: usize) -> Result<Self, ModelError> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// System description consumed by the simulator and the bound engine.
/// Scheduling weights are deliberately not part of it: they are the design
/// variable, so every operation takes them alongside the config.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Number of sources.
    pub n: usize,
    /// Update generation period, common to all sources.
    pub b: f64,
    /// Shared transmitter service model.
    pub service: ServiceModel,
    /// Seed for everything random downstream.
    pub seed: u64,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n == 0 {
            return Err(ModelError::Validation {
                what: "system",
                detail: "need at least one source".to_string(),
            });
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(ModelError::Validation {
                what: "system",
                detail: format!("generation period b = {} must be positive", self.b),
            });
        }
        self.service.validate()
    }
}

/// A single peak-age requirement: keep Pr(peak age >= x) at or below eps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationSpec {
    /// Age threshold.
    pub x: f64,
    /// Target violation probability.
    pub eps: f64,
}

impl ViolationSpec {
    pub fn validate(&self, b: f64) -> Result<(), ModelError> {
        // Peak age always exceeds one full generation period, so thresholds
        // at or below b make the requirement unconditionally violated.
        if !(self.x.is_finite() && self.x > b) {
            return Err(ModelError::Validation {
                what: "violation target",
                detail: format!(
                    "threshold x = {} must exceed the generation period {b}",
                    self.x
                ),
            });
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(ModelError::Validation {
                what: "violation target",
                detail: format!("eps = {} must be positive", self.eps),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// A function of the model was evaluated outside its domain.
    Domain { what: &'static str, detail: String },
    /// A configuration value fails its structural constraints.
    Validation { what: &'static str, detail: String },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Domain { what, detail } => {
                write!(f, "domain error in {what}: {detail}")
            }
            ModelError::Validation { what, detail } => {
                write!(f, "invalid {what}: {detail}")
            }
        }
    }
}

impl std::error::Error for ModelError {}
