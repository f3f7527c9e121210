//! Analytical upper bounds on the peak-age violation probability
//! Pr(A_i >= x), one family per sampling-period regime, plus the asymptotic
//! decay rates obtained when period and threshold scale linearly with the
//! number of sources.
//!
//! Both families are Chernoff-style: exponentiate the peak age, bound the
//! moment generating function of the transmitter backlog contribution, and
//! optimize the free exponent parameter theta. The long-regime bound sums
//! over the possible sets of sources served before the tagged one within a
//! period (weighted by the draw-order law from [`crate::wallenius`]); the
//! short-regime bound instead treats the inter-start window as a geometric
//! number of competing services.

use std::collections::BTreeMap;
use std::fmt;

use crate::model::{ModelError, ServiceModel, WeightVector};
use crate::numeric::{golden_max, golden_min};
use crate::wallenius::{enumerate_outcomes, GroupStructure, PmfMode, WalleniusError};

/// How theta is optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Evaluate on an even grid and keep the best point.
    Grid,
    /// Golden-section on the (concave in every use here) exponent.
    Golden,
}

impl SearchMode {
    pub fn name(&self) -> &'static str {
        match self {
            SearchMode::Grid => "grid",
            SearchMode::Golden => "golden",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "grid" => Some(SearchMode::Grid),
            "golden" | "golden-section" => Some(SearchMode::Golden),
            _ => None,
        }
    }
}

/// Search domain and stopping controls for the exponent parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSearch {
    pub mode: SearchMode,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub grid_points: usize,
    pub tolerance: f64,
}

impl ThetaSearch {
    /// Margin keeping the search strictly inside the log-MGF domain.
    const DOMAIN_MARGIN: f64 = 1e-6;
    /// Stand-in upper limit when the log-MGF domain is unbounded.
    const UNBOUNDED_CAP: f64 = 1e3;

    /// Golden-section search over (1e-6, theta_max less a relative margin),
    /// capped at 1e3 when the domain is unbounded.
    pub fn for_service(service: &ServiceModel) -> Self {
        let tmax = service.theta_max();
        let theta_hi = if tmax.is_finite() {
            tmax * (1.0 - Self::DOMAIN_MARGIN)
        } else {
            Self::UNBOUNDED_CAP
        };
        ThetaSearch {
            mode: SearchMode::Golden,
            theta_lo: 1e-6,
            theta_hi,
            grid_points: 400,
            tolerance: 1e-8,
        }
    }

    pub fn validate(&self, service: &ServiceModel) -> Result<(), BoundError> {
        if !(self.theta_lo > 0.0 && self.theta_lo < self.theta_hi) {
            return Err(BoundError::Domain {
                detail: format!(
                    "theta search needs 0 < lo < hi, got [{}, {}]",
                    self.theta_lo, self.theta_hi
                ),
            });
        }
        if self.theta_hi >= service.theta_max() {
            return Err(BoundError::Domain {
                detail: format!(
                    "theta_hi = {} reaches the log-MGF domain edge {}",
                    self.theta_hi,
                    service.theta_max()
                ),
            });
        }
        if self.grid_points == 0 {
            return Err(BoundError::Domain {
                detail: "grid_points must be positive".to_string(),
            });
        }
        Ok(())
    }

    /// Maximizes `f` over [lo, hi] intersected with the search domain,
    /// always including both endpoints as candidates.
    fn maximize<F: Fn(f64) -> f64>(&self, lo: f64, hi: f64, f: F) -> (f64, f64) {
        match self.mode {
            SearchMode::Golden => golden_max(&f, lo, hi, self.tolerance),
            SearchMode::Grid => {
                let mut best = (lo, f(lo));
                for j in 1..=self.grid_points {
                    let t = lo + (hi - lo) * j as f64 / self.grid_points as f64;
                    let v = f(t);
                    if v > best.1 {
                        best = (t, v);
                    }
                }
                best
            }
        }
    }

    fn minimize<F: Fn(f64) -> f64>(&self, lo: f64, hi: f64, f: F) -> (f64, f64) {
        match self.mode {
            SearchMode::Golden => golden_min(&f, lo, hi, self.tolerance),
            SearchMode::Grid => {
                let (t, v) = self.maximize(lo, hi, |x| -f(x));
                (t, -v)
            }
        }
    }
}

/// Which draw counts the long-regime exponent maximizes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllStrategy {
    /// All draw counts 0..n-1.
    Exhaustive,
    /// Only the last draw count n-1, which dominates once n is large
    /// enough; cheap but only an approximation of the true maximum below
    /// that point.
    LastDraw,
}

impl EllStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            EllStrategy::Exhaustive => "exhaustive",
            EllStrategy::LastDraw => "last-draw",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "exhaustive" => Some(EllStrategy::Exhaustive),
            "last-draw" | "lastdraw" => Some(EllStrategy::LastDraw),
            _ => None,
        }
    }
}

/// Outcome of one bound evaluation.
#[derive(Debug, Clone)]
pub struct BoundResult {
    /// Reported bound, clamped to at most one.
    pub value: f64,
    /// Raw bound before clamping; above one only when the bound is vacuous.
    pub raw: f64,
    /// Optimizing exponent parameter.
    pub theta_star: f64,
    /// Draw count attaining the inner maximum (long-regime bound only).
    pub argmax_ell: Option<usize>,
    /// Whether any admissible theta existed (always true for the
    /// long-regime bound).
    pub admissible: bool,
    /// Raw value above one: the bound says nothing.
    pub vacuous: bool,
    /// Intermediate quantities for audits and traces.
    pub diagnostics: BTreeMap<String, f64>,
}

impl BoundResult {
    fn from_raw(raw: f64, theta_star: f64) -> Self {
        BoundResult {
            value: raw.min(1.0),
            raw,
            theta_star,
            argmax_ell: None,
            admissible: true,
            vacuous: raw > 1.0,
            diagnostics: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundError {
    /// Inputs outside the formulas' domain.
    Domain { detail: String },
    /// Invalid model parameters or theta outside the log-MGF domain.
    Model(ModelError),
    /// Draw-order pmf evaluation failed.
    Pmf(WalleniusError),
}

impl fmt::Display for BoundError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundError::Domain { detail } => write!(f, "bound domain error: {detail}"),
            BoundError::Model(e) => write!(f, "bound model error: {e}"),
            BoundError::Pmf(e) => write!(f, "bound pmf error: {e}"),
        }
    }
}

impl std::error::Error for BoundError {}

impl From<ModelError> for BoundError {
    fn from(e: ModelError) -> Self {
        BoundError::Model(e)
    }
}

impl From<WalleniusError> for BoundError {
    fn from(e: WalleniusError) -> Self {
        BoundError::Pmf(e)
    }
}

/// Log of the draw-set sum entering the exponent at draw count `ell`:
/// log Σ_{y} g(y) μ_i / (1 − Σ_{j in y} μ_j), over all draw sets y of size
/// `ell` that exclude source `i`. Independent of theta, so bounds compute
/// it once per `ell` and reuse it across the whole theta search.
pub fn log_tail_sum(
    i: usize,
    ell: usize,
    weights: &WeightVector,
    pmf_mode: PmfMode,
    groups: Option<&GroupStructure>,
) -> Result<f64, BoundError> {
    let n = weights.len();
    if i >= n || ell >= n {
        return Err(BoundError::Domain {
            detail: format!("need i < n and ell < n, got i={i}, ell={ell}, n={n}"),
        });
    }
    let backend = pmf_mode.backend();
    let mut sum = 0.0f64;
    for wo in enumerate_outcomes(n, i, ell, groups) {
        let g = backend.pmf(weights.as_slice(), &wo.outcome)?;
        let drawn: f64 = wo.outcome.drawn_indices().map(|j| weights.get(j)).sum();
        sum += wo.multiplicity * g * weights.get(i) / (1.0 - drawn);
    }
    Ok(sum.ln())
}

/// Exponent contribution of draw count `ell` for source `i`:
/// (ell+2) Λ(theta) + [`log_tail_sum`].
pub fn f_exponent(
    i: usize,
    ell: usize,
    theta: f64,
    service: &ServiceModel,
    weights: &WeightVector,
    pmf_mode: PmfMode,
    groups: Option<&GroupStructure>,
) -> Result<f64, BoundError> {
    let lambda = service.log_mgf(theta)?;
    let tail = log_tail_sum(i, ell, weights, pmf_mode, groups)?;
    Ok((ell as f64 + 2.0) * lambda + tail)
}

/// Long-regime violation bound for source `i` at threshold `x`:
///
/// ```text
///   Pr(A_i >= x) <= exp(-sup_theta { theta (x - b) - n max_ell f_i(ell, theta) })
/// ```
///
/// The draw counts scanned by the inner maximum follow `strategy`. The
/// bound is only valid when every batch finishes within its period.
#[allow(clippy::too_many_arguments)]
pub fn long_regime_bound(
    i: usize,
    x: f64,
    b: f64,
    service: &ServiceModel,
    weights: &WeightVector,
    search: &ThetaSearch,
    strategy: EllStrategy,
    pmf_mode: PmfMode,
    groups: Option<&GroupStructure>,
) -> Result<BoundResult, BoundError> {
    if !(x > b) {
        return Err(BoundError::Domain {
            detail: format!("threshold x = {x} must exceed the period b = {b}"),
        });
    }
    search.validate(service)?;
    let n = weights.len();
    let ells: Vec<usize> = match strategy {
        EllStrategy::Exhaustive => (0..n).collect(),
        EllStrategy::LastDraw => vec![n - 1],
    };
    let mut tails = Vec::with_capacity(ells.len());
    for &ell in &ells {
        tails.push(log_tail_sum(i, ell, weights, pmf_mode, groups)?);
    }

    // The inner max of affine-in-Λ terms is convex in theta, so the duality
    // exponent below is concave and golden-section is exact enough.
    let exponent = |theta: f64| -> f64 {
        let lambda = match service.log_mgf(theta) {
            Ok(v) => v,
            Err(_) => return f64::NEG_INFINITY,
        };
        let m = ells
            .iter()
            .zip(&tails)
            .map(|(&ell, &tail)| (ell as f64 + 2.0) * lambda + tail)
            .fold(f64::NEG_INFINITY, f64::max);
        theta * (x - b) - n as f64 * m
    };
    let (theta_star, sup) = search.maximize(search.theta_lo, search.theta_hi, exponent);

    let lambda_star = service.log_mgf(theta_star)?;
    let mut argmax = ells[0];
    let mut best = f64::NEG_INFINITY;
    let mut result = BoundResult::from_raw((-sup).exp(), theta_star);
    for (&ell, &tail) in ells.iter().zip(&tails) {
        let f = (ell as f64 + 2.0) * lambda_star + tail;
        result.diagnostics.insert(format!("f_ell_{ell}"), f);
        if f > best {
            best = f;
            argmax = ell;
        }
    }
    result.argmax_ell = Some(argmax);
    result.diagnostics.insert("exponent".to_string(), sup);
    Ok(result)
}

/// Largest theta satisfying the short-regime admissibility condition
/// Λ(theta) < log(1/(1 - mu)); infinite when no finite theta reaches it.
pub fn admissible_theta_sup(service: &ServiceModel, mu: f64) -> f64 {
    if mu >= 1.0 {
        return service.theta_max();
    }
    // Solve Λ(theta) = -log(1 - mu) in closed form.
    match *service {
        ServiceModel::Exponential { rate } => rate * mu,
        ServiceModel::Deterministic { value } => -(1.0 - mu).ln() / value,
    }
}

/// Short-regime violation bound for a source holding weight `mu`:
///
/// ```text
///   Pr(A >= x) <= inf_theta e^{-theta (x-b)} e^{Λ} mu / (1 - e^{Λ}(1 - mu))
/// ```
///
/// with the infimum over theta satisfying Λ(theta) < log(1/(1-mu)) strictly.
/// Valid when the transmitter never idles. When no admissible theta lies in
/// the search domain the result carries `admissible = false` and value 1.
pub fn short_regime_bound(
    x: f64,
    b: f64,
    service: &ServiceModel,
    mu: f64,
    search: &ThetaSearch,
) -> Result<BoundResult, BoundError> {
    if !(x > b) {
        return Err(BoundError::Domain {
            detail: format!("threshold x = {x} must exceed the period b = {b}"),
        });
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(BoundError::Domain {
            detail: format!("weight mu = {mu} must lie in (0, 1]"),
        });
    }
    search.validate(service)?;

    let theta_cap = admissible_theta_sup(service, mu);
    // Stay strictly inside the admissible set: the objective blows up at
    // its edge, where the geometric series behind the bound diverges.
    let hi = search.theta_hi.min(theta_cap * (1.0 - 1e-9));
    if hi <= search.theta_lo {
        let mut r = BoundResult::from_raw(1.0, search.theta_lo);
        r.admissible = false;
        return Ok(r);
    }

    let delta = x - b;
    // Convex in theta: Λ is convex and -log(1 - e^Λ (1-mu)) is a convex
    // decreasing transform of a concave map.
    let log_objective = |theta: f64| -> f64 {
        let lambda = match service.log_mgf(theta) {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        };
        let denom = 1.0 - lambda.exp() * (1.0 - mu);
        if denom <= 0.0 {
            return f64::INFINITY;
        }
        -theta * delta + lambda + mu.ln() - denom.ln()
    };
    let (theta_star, log_inf) = search.minimize(search.theta_lo, hi, log_objective);

    let mut result = BoundResult::from_raw(log_inf.exp(), theta_star);
    result
        .diagnostics
        .insert("theta_admissible_sup".to_string(), theta_cap);
    result.diagnostics.insert("log_bound".to_string(), log_inf);
    Ok(result)
}

/// Asymptotic long-regime decay exponent per source at scaled threshold
/// `x'` and period `b'`: sup_theta { theta (x'-b') - f(n_ref - 1, theta) },
/// using a finite reference system of `n_ref = weights.len()` sources as a
/// proxy for the infinite-system exponent.
pub fn long_regime_decay_rate(
    i: usize,
    x_prime: f64,
    b_prime: f64,
    service: &ServiceModel,
    weights: &WeightVector,
    search: &ThetaSearch,
    pmf_mode: PmfMode,
    groups: Option<&GroupStructure>,
) -> Result<f64, BoundError> {
    if !(x_prime > b_prime) {
        return Err(BoundError::Domain {
            detail: format!("need x' = {x_prime} above b' = {b_prime}"),
        });
    }
    search.validate(service)?;
    let n_ref = weights.len();
    let tail = log_tail_sum(i, n_ref - 1, weights, pmf_mode, groups)?;
    let exponent = |theta: f64| -> f64 {
        match service.log_mgf(theta) {
            Ok(lambda) => theta * (x_prime - b_prime) - ((n_ref as f64 + 1.0) * lambda + tail),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let (_, sup) = search.maximize(search.theta_lo, search.theta_hi, exponent);
    Ok(sup)
}

/// Asymptotic short-regime decay rate: theta_adm (x' - b') with theta_adm
/// the supremum of the admissible set. Infinite when that set is unbounded
/// (deterministic service with mu = 1).
pub fn short_regime_decay_rate(
    x_prime: f64,
    b_prime: f64,
    mu: f64,
    service: &ServiceModel,
) -> Result<f64, BoundError> {
    if !(x_prime > b_prime) {
        return Err(BoundError::Domain {
            detail: format!("need x' = {x_prime} above b' = {b_prime}"),
        });
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(BoundError::Domain {
            detail: format!("weight mu = {mu} must lie in (0, 1]"),
        });
    }
    let theta_adm = admissible_theta_sup(service, mu);
    if theta_adm <= 0.0 {
        return Err(BoundError::Domain {
            detail: format!("empty admissible exponent set for mu = {mu}"),
        });
    }
    Ok(theta_adm * (x_prime - b_prime))
}
