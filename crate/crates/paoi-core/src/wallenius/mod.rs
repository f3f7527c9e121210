//! Distribution of the set of sources served before a tagged source under
//! weighted sampling without replacement.
//!
//! When every queue stays non-empty, the order in which the transmitter
//! first serves the sources is a Wallenius-type sequential draw: at each
//! step a not-yet-served source j is picked with probability proportional
//! to its weight. The probability that the first `ell` draws hit exactly a
//! given set has the integral form
//!
//! ```text
//!   g(y) = INT_0^1  prod_{j drawn} (1 - t^(mu_j / d)) dt,
//!   d    = 1 - sum_{j drawn} mu_j,
//! ```
//!
//! which this module evaluates three ways: adaptive quadrature on the
//! integral ([`pmf_quadrature`]), an exact dynamic program over subsets
//! ([`pmf_oracle`]), and a saddlepoint approximation for large draw sets
//! ([`pmf_fog`]). The three live behind [`PmfBackend`] so callers select a
//! route by name at runtime.

use std::fmt;

use crate::numeric::binomial;

mod fog;
mod oracle;
mod quadrature;

pub use fog::{fog_solve, pmf_fog, FogParams};
pub use oracle::pmf_oracle;
pub use quadrature::pmf_quadrature;

/// Indicator vector over all sources: `true` marks a source in the draw set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrawOutcome {
    y: Vec<bool>,
}

impl DrawOutcome {
    pub fn new(y: Vec<bool>) -> Self {
        DrawOutcome { y }
    }

    /// Outcome over `n` sources with exactly the listed indices drawn.
    pub fn from_drawn_indices(n: usize, drawn: &[usize]) -> Self {
        let mut y = vec![false; n];
        for &j in drawn {
            y[j] = true;
        }
        DrawOutcome { y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Number of drawn sources.
    pub fn ones(&self) -> usize {
        self.y.iter().filter(|&&d| d).count()
    }

    pub fn is_drawn(&self, j: usize) -> bool {
        self.y[j]
    }

    pub fn drawn_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.y
            .iter()
            .enumerate()
            .filter_map(|(j, &d)| if d { Some(j) } else { None })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WalleniusError {
    /// Quadrature failed to reach the requested tolerance.
    NumericalFailure { detail: String },
    /// The draw set exceeds the exact route's subset budget.
    TooLarge { ell: usize, cap: usize },
    /// The saddlepoint equation has no root in the search bracket.
    NoRoot { detail: String },
    /// The saddlepoint is not a maximum, so the Gaussian step is invalid.
    InvalidCurvature { psi: f64 },
    /// The requested route cannot evaluate an empty or complete draw set.
    DegenerateOutcome { ell: usize, n: usize },
}

impl fmt::Display for WalleniusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WalleniusError::NumericalFailure { detail } => {
                write!(f, "quadrature failure: {detail}")
            }
            WalleniusError::TooLarge { ell, cap } => {
                write!(f, "draw set of {ell} exceeds the exact-route cap of {cap}")
            }
            WalleniusError::NoRoot { detail } => {
                write!(f, "saddlepoint equation has no root: {detail}")
            }
            WalleniusError::InvalidCurvature { psi } => {
                write!(
                    f,
                    "saddlepoint curvature {psi:e} is not negative, approximation invalid"
                )
            }
            WalleniusError::DegenerateOutcome { ell, n } => {
                write!(f, "draw set of {ell} out of {n} is degenerate for this route")
            }
        }
    }
}

impl std::error::Error for WalleniusError {}

/// Evaluation route for the draw-set probability, selectable at runtime.
///
/// `pmf` handles the two degenerate outcomes uniformly (the empty set and
/// the complete set each occur with probability one) and defers everything
/// else to the route's `pmf_proper`.
pub trait PmfBackend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Route-specific evaluation for draw sets with 0 < ell < n.
    fn pmf_proper(&self, weights: &[f64], outcome: &DrawOutcome) -> Result<f64, WalleniusError>;

    fn pmf(&self, weights: &[f64], outcome: &DrawOutcome) -> Result<f64, WalleniusError> {
        let ell = outcome.ones();
        if ell == 0 || ell == outcome.len() {
            return Ok(1.0);
        }
        self.pmf_proper(weights, outcome)
    }
}

struct QuadratureBackend;
struct FogBackend;
struct OracleBackend;

impl PmfBackend for QuadratureBackend {
    fn name(&self) -> &'static str {
        "quadrature"
    }
    fn pmf_proper(&self, weights: &[f64], outcome: &DrawOutcome) -> Result<f64, WalleniusError> {
        pmf_quadrature(weights, outcome)
    }
}

impl PmfBackend for FogBackend {
    fn name(&self) -> &'static str {
        "fog"
    }
    fn pmf_proper(&self, weights: &[f64], outcome: &DrawOutcome) -> Result<f64, WalleniusError> {
        pmf_fog(weights, outcome)
    }
}

impl PmfBackend for OracleBackend {
    fn name(&self) -> &'static str {
        "oracle"
    }
    fn pmf_proper(&self, weights: &[f64], outcome: &DrawOutcome) -> Result<f64, WalleniusError> {
        pmf_oracle(weights, outcome)
    }
}

static BACKENDS: [&dyn PmfBackend; 3] = [&QuadratureBackend, &FogBackend, &OracleBackend];

/// Named selector for the registered evaluation routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmfMode {
    Quadrature,
    Fog,
    Oracle,
}

impl PmfMode {
    pub fn all() -> [PmfMode; 3] {
        [PmfMode::Quadrature, PmfMode::Fog, PmfMode::Oracle]
    }

    pub fn name(self) -> &'static str {
        self.backend().name()
    }

    pub fn from_name(name: &str) -> Option<PmfMode> {
        match name {
            "quadrature" => Some(PmfMode::Quadrature),
            "fog" => Some(PmfMode::Fog),
            "oracle" => Some(PmfMode::Oracle),
            _ => None,
        }
    }

    pub fn backend(self) -> &'static dyn PmfBackend {
        match self {
            PmfMode::Quadrature => BACKENDS[0],
            PmfMode::Fog => BACKENDS[1],
            PmfMode::Oracle => BACKENDS[2],
        }
    }
}

impl fmt::Display for PmfMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Look up a registered route by its name.
pub fn backend_by_name(name: &str) -> Option<&'static dyn PmfBackend> {
    BACKENDS.iter().copied().find(|b| b.name() == name)
}

pub fn backend_names() -> Vec<&'static str> {
    BACKENDS.iter().map(|b| b.name()).collect()
}

/// Partition of the sources into contiguous blocks of equal weight.
///
/// Sources `0..sizes[0]` form group 0, the next `sizes[1]` form group 1, and
/// so on. Draw sets that hit a group in the same number of sources are
/// exchangeable, which collapses the outcome enumeration from binomial in
/// the source count to polynomial in the group count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupStructure {
    sizes: Vec<usize>,
}

impl GroupStructure {
    pub fn new(sizes: Vec<usize>) -> Result<Self, WalleniusError> {
        if sizes.is_empty() || sizes.iter().any(|&s| s == 0) {
            return Err(WalleniusError::NumericalFailure {
                detail: "group sizes must be a non-empty list of positive counts".to_string(),
            });
        }
        Ok(GroupStructure { sizes })
    }

    /// Every source in its own group; the exhaustive, structure-free view.
    pub fn singletons(n: usize) -> Self {
        GroupStructure { sizes: vec![1; n] }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn total_sources(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Group containing the given source index.
    pub fn group_of(&self, source: usize) -> usize {
        let mut acc = 0;
        for (g, &s) in self.sizes.iter().enumerate() {
            acc += s;
            if source < acc {
                return g;
            }
        }
        panic!("source {source} out of range for {} sources", acc);
    }

    /// Source-index range covered by group `g`.
    pub fn block_range(&self, g: usize) -> std::ops::Range<usize> {
        let start: usize = self.sizes[..g].iter().sum();
        start..start + self.sizes[g]
    }

    /// Checks that the partition covers exactly the given weights and that
    /// each block is constant. Weights inside a block must be bit-identical;
    /// grouped configurations are built from per-group values, so any
    /// difference means the grouping does not describe the system.
    pub fn validate_against(&self, weights: &[f64]) -> Result<(), WalleniusError> {
        if self.total_sources() != weights.len() {
            return Err(WalleniusError::NumericalFailure {
                detail: format!(
                    "group sizes cover {} sources but {} weights were given",
                    self.total_sources(),
                    weights.len()
                ),
            });
        }
        for g in 0..self.num_groups() {
            let r = self.block_range(g);
            let w0 = weights[r.start];
            if weights[r.clone()].iter().any(|&w| w != w0) {
                return Err(WalleniusError::NumericalFailure {
                    detail: format!("weights in group {g} are not all equal"),
                });
            }
        }
        Ok(())
    }
}

/// One exchangeability class of draw sets: `counts[g]` sources drawn from
/// group `g`, covering `multiplicity` distinct source-level outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeClass {
    pub counts: Vec<usize>,
    pub multiplicity: f64,
}

/// A representative draw set together with the number of source-level
/// outcomes it stands for.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedOutcome {
    pub outcome: DrawOutcome,
    pub multiplicity: f64,
}

/// Every draw set of size `ell` over the sources other than `i`, one
/// representative per exchangeability class.
///
/// Without a group structure each source is its own class, so this is the
/// plain enumeration of all C(n-1, ell) subsets, each with multiplicity 1.
/// With one, classes collapse by per-group draw counts and the multiplicity
/// is a product of binomial coefficients; downstream sums must weight by it.
pub fn enumerate_outcomes(
    n: usize,
    i: usize,
    ell: usize,
    groups: Option<&GroupStructure>,
) -> Vec<WeightedOutcome> {
    assert!(i < n, "tagged source {i} out of range for {n} sources");
    assert!(ell < n, "draw count {ell} must leave the tagged source out");
    let singleton;
    let structure = match groups {
        Some(g) => {
            assert_eq!(
                g.total_sources(),
                n,
                "group structure covers {} sources, expected {n}",
                g.total_sources()
            );
            g
        }
        None => {
            singleton = GroupStructure::singletons(n);
            &singleton
        }
    };
    let tagged_group = structure.group_of(i);
    let available: Vec<usize> = structure
        .sizes()
        .iter()
        .enumerate()
        .map(|(g, &s)| if g == tagged_group { s - 1 } else { s })
        .collect();
    enumerate_classes(&available, ell)
        .into_iter()
        .map(|class| {
            let mut drawn = Vec::with_capacity(ell);
            for (g, &c) in class.counts.iter().enumerate() {
                drawn.extend(structure.block_range(g).filter(|&j| j != i).take(c));
            }
            WeightedOutcome {
                outcome: DrawOutcome::from_drawn_indices(n, &drawn),
                multiplicity: class.multiplicity,
            }
        })
        .collect()
}

/// Enumerates the classes of draw sets of size `ell`, where `available[g]`
/// sources of group `g` are eligible. The multiplicity of a class is the
/// product of per-group binomial coefficients.
pub fn enumerate_classes(available: &[usize], ell: usize) -> Vec<OutcomeClass> {
    let mut out = Vec::new();
    let mut counts = vec![0usize; available.len()];
    recurse_classes(available, ell, 0, 1.0, &mut counts, &mut out);
    out
}

fn recurse_classes(
    available: &[usize],
    remaining: usize,
    g: usize,
    mult: f64,
    counts: &mut Vec<usize>,
    out: &mut Vec<OutcomeClass>,
) {
    if g == available.len() {
        if remaining == 0 {
            out.push(OutcomeClass {
                counts: counts.clone(),
                multiplicity: mult,
            });
        }
        return;
    }
    // Prune branches that cannot place the remaining draws at all.
    let room_after: usize = available[g + 1..].iter().sum();
    let lo = remaining.saturating_sub(room_after);
    let hi = remaining.min(available[g]);
    for c in lo..=hi {
        counts[g] = c;
        recurse_classes(
            available,
            remaining - c,
            g + 1,
            mult * binomial(available[g], c),
            counts,
            out,
        );
        counts[g] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcomes_of_size(n: usize, ell: usize) -> Vec<DrawOutcome> {
        // All subsets of {0..n} with ell elements, by bitmask filtering.
        let mut out = Vec::new();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize == ell {
                let y = (0..n).map(|j| mask & (1 << j) != 0).collect();
                out.push(DrawOutcome::new(y));
            }
        }
        out
    }

    #[test]
    fn outcome_accessors() {
        let o = DrawOutcome::from_drawn_indices(5, &[1, 4]);
        assert_eq!(o.len(), 5);
        assert_eq!(o.ones(), 2);
        assert!(o.is_drawn(1) && o.is_drawn(4) && !o.is_drawn(0));
        assert_eq!(o.drawn_indices().collect::<Vec<_>>(), vec![1, 4]);
    }

    #[test]
    fn backends_are_registered_by_name() {
        assert_eq!(backend_names(), vec!["quadrature", "fog", "oracle"]);
        for mode in PmfMode::all() {
            let b = backend_by_name(mode.name()).expect("registered");
            assert_eq!(b.name(), mode.name());
            assert_eq!(PmfMode::from_name(mode.name()), Some(mode));
        }
        assert!(backend_by_name("exact").is_none());
        assert!(PmfMode::from_name("").is_none());
    }

    #[test]
    fn degenerate_outcomes_are_certain_for_every_backend() {
        let w = [0.5, 0.3, 0.2];
        let none = DrawOutcome::from_drawn_indices(3, &[]);
        let all = DrawOutcome::from_drawn_indices(3, &[0, 1, 2]);
        for mode in PmfMode::all() {
            let b = mode.backend();
            assert_eq!(b.pmf(&w, &none).unwrap(), 1.0, "{}", mode);
            assert_eq!(b.pmf(&w, &all).unwrap(), 1.0, "{}", mode);
        }
    }

    #[test]
    fn exact_and_quadrature_routes_agree() {
        // Uneven weights, every draw-set size; the two routes share no code.
        let w = [0.05, 0.37, 0.08, 0.22, 0.18, 0.10];
        for ell in 1..6 {
            for o in outcomes_of_size(6, ell) {
                let exact = pmf_oracle(&w, &o).unwrap();
                let quad = pmf_quadrature(&w, &o).unwrap();
                assert!(
                    (exact - quad).abs() < 1e-9,
                    "ell={ell} outcome={:?}: {exact} vs {quad}",
                    o.drawn_indices().collect::<Vec<_>>()
                );
            }
        }
    }

    #[test]
    fn draw_set_law_normalizes_per_size() {
        let w = [0.05, 0.37, 0.08, 0.22, 0.18, 0.10];
        for ell in 0..=6 {
            let mut total_exact = 0.0;
            let mut total_quad = 0.0;
            for o in outcomes_of_size(6, ell) {
                total_exact += PmfMode::Oracle.backend().pmf(&w, &o).unwrap();
                total_quad += PmfMode::Quadrature.backend().pmf(&w, &o).unwrap();
            }
            assert!((total_exact - 1.0).abs() < 1e-12, "exact ell={ell}: {total_exact}");
            assert!((total_quad - 1.0).abs() < 1e-8, "quad ell={ell}: {total_quad}");
        }
    }

    #[test]
    fn group_structure_basics() {
        let g = GroupStructure::new(vec![2, 3]).unwrap();
        assert_eq!(g.total_sources(), 5);
        assert_eq!(g.group_of(0), 0);
        assert_eq!(g.group_of(1), 0);
        assert_eq!(g.group_of(4), 1);
        assert_eq!(g.block_range(1), 2..5);
        assert!(GroupStructure::new(vec![]).is_err());
        assert!(GroupStructure::new(vec![2, 0]).is_err());

        let w = [0.1, 0.1, 0.26666666666666666, 0.26666666666666666, 0.26666666666666666];
        assert!(g.validate_against(&w).is_ok());
        let bad = [0.1, 0.2, 0.23333333333333333, 0.23333333333333333, 0.23333333333333333];
        assert!(g.validate_against(&bad).is_err());
        assert!(g.validate_against(&w[..4]).is_err());
    }

    #[test]
    fn class_enumeration_counts_and_multiplicities() {
        // Two groups with 8 and 9 eligible sources, draw sets of size 5:
        // one class per split k + (5 - k), multiplicity C(8,k) * C(9,5-k).
        let classes = enumerate_classes(&[8, 9], 5);
        assert_eq!(classes.len(), 6);
        let mut total = 0.0;
        for c in &classes {
            let k = c.counts[0];
            assert_eq!(c.counts[0] + c.counts[1], 5);
            assert_eq!(c.multiplicity, binomial(8, k) * binomial(9, 5 - k));
            total += c.multiplicity;
        }
        // Classes partition all 5-subsets of 17 sources.
        assert_eq!(total, binomial(17, 5));
    }

    #[test]
    fn class_enumeration_matches_explicit_subsets() {
        // Grouped sum of pmf times multiplicity equals the plain sum over
        // every subset, for a weight vector that is constant inside groups.
        let sizes = GroupStructure::new(vec![2, 4]).unwrap();
        let w = [0.14, 0.14, 0.18, 0.18, 0.18, 0.18];
        sizes.validate_against(&w).unwrap();
        for ell in 1..6 {
            let mut plain = 0.0;
            for o in outcomes_of_size(6, ell) {
                plain += pmf_oracle(&w, &o).unwrap();
            }
            let mut grouped = 0.0;
            for class in enumerate_classes(sizes.sizes(), ell) {
                // Representative: first counts[g] sources of each block.
                let mut drawn = Vec::new();
                for (g, &c) in class.counts.iter().enumerate() {
                    drawn.extend(sizes.block_range(g).take(c));
                }
                let o = DrawOutcome::from_drawn_indices(6, &drawn);
                grouped += class.multiplicity * pmf_oracle(&w, &o).unwrap();
            }
            assert!(
                (plain - grouped).abs() < 1e-12,
                "ell={ell}: plain {plain} vs grouped {grouped}"
            );
        }
    }

    #[test]
    fn tagged_enumeration_plain_and_grouped() {
        // Plain: both single-draw sets over the sources other than 0.
        let got = enumerate_outcomes(3, 0, 1, None);
        assert_eq!(got.len(), 2);
        for w in &got {
            assert_eq!(w.multiplicity, 1.0);
            assert!(!w.outcome.is_drawn(0));
            assert_eq!(w.outcome.ones(), 1);
        }

        // Everything but the tagged source drawn: a single outcome.
        let got = enumerate_outcomes(18, 0, 17, None);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].multiplicity, 1.0);
        assert_eq!(got[0].outcome.ones(), 17);
        assert!(!got[0].outcome.is_drawn(0));

        // Grouped: 18 sources in two nines, tagged source in the first.
        let groups = GroupStructure::new(vec![9, 9]).unwrap();
        let got = enumerate_outcomes(18, 0, 5, Some(&groups));
        assert_eq!(got.len(), 6);
        let mut total = 0.0;
        for (k, w) in got.iter().enumerate() {
            assert_eq!(w.multiplicity, binomial(8, k) * binomial(9, 5 - k));
            assert!(!w.outcome.is_drawn(0));
            assert_eq!(w.outcome.ones(), 5);
            // Representative draws k sources from the first block.
            let in_first = w.outcome.drawn_indices().filter(|&j| j < 9).count();
            assert_eq!(in_first, k);
            total += w.multiplicity;
        }
        assert_eq!(total, binomial(17, 5));

        // Multiplicities of the plain view always total C(n-1, ell).
        let got = enumerate_outcomes(7, 3, 4, None);
        assert_eq!(got.len() as f64, binomial(6, 4));
        assert!(got.iter().all(|w| !w.outcome.is_drawn(3)));
    }

    #[test]
    fn enumeration_respects_availability() {
        // Only 1 eligible in the first group: splits with k > 1 are absent.
        let classes = enumerate_classes(&[1, 3], 2);
        assert_eq!(classes.len(), 2);
        assert!(classes.iter().all(|c| c.counts[0] <= 1));
        // Impossible request yields no classes.
        assert!(enumerate_classes(&[1, 1], 3).is_empty());
    }
}
