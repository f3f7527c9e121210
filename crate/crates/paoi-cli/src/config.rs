//! Experiment configuration: TOML schema, scenario presets, and resolution
//! into validated core types.
//!
//! The same schema doubles as the run manifest. Every run serializes its
//! effective configuration (after flag overrides and defaults) back to this
//! format, so feeding a manifest to `--config` reproduces the run.

use std::fmt;
use std::fs;

use serde::{Deserialize, Serialize};

use paoi_core::model::{ServiceModel, SystemConfig, ViolationSpec, WeightVector};
use paoi_core::wallenius::{GroupStructure, PmfMode};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or unusable input: exit code 2.
    Config(String),
    /// A designer declared the targets unreachable: exit code 1.
    Infeasible(String),
    /// Filesystem trouble: exit code 2.
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(d) => write!(f, "configuration error: {d}"),
            CliError::Infeasible(d) => write!(f, "infeasible design: {d}"),
            CliError::Io(d) => write!(f, "io error: {d}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<paoi_core::model::ModelError> for CliError {
    fn from(e: paoi_core::model::ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<paoi_core::bounds::BoundError> for CliError {
    fn from(e: paoi_core::bounds::BoundError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<paoi_core::simulator::SimError> for CliError {
    fn from(e: paoi_core::simulator::SimError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<paoi_core::wallenius::WalleniusError> for CliError {
    fn from(e: paoi_core::wallenius::WalleniusError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<paoi_core::designer::DesignError> for CliError {
    fn from(e: paoi_core::designer::DesignError) -> Self {
        match e {
            paoi_core::designer::DesignError::BudgetExceeded { used, budget } => {
                CliError::Infeasible(format!(
                    "verification budget exhausted after {used} of {budget} samples"
                ))
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

/// On-disk schema. Scalar keys first, then tables; the order matters for
/// TOML serialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecFile {
    pub n: usize,
    pub b: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Subcommand that produced this manifest; informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    pub service: ServiceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<GroupSpec>,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<TargetSpec>,
}

fn default_seed() -> u64 {
    20250501
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServiceSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TargetSpec {
    pub x: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSpec {
    pub sizes: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Experiment knobs. All optional; effective values are filled in when the
/// manifest is written.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sweep: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_prime: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_prime: Option<Vec<f64>>,
}

pub const DEFAULT_SAMPLES: usize = 10_000;
/// Verification sample cap per sweep point.
pub const DEFAULT_BUDGET: usize = 10_000_000;
pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_GRID_STEP: f64 = 0.1;

/// Built-in reference systems: 18 sources, period 90, exponential service
/// with mean 1.5, 8, or 3, two equal groups holding 20% and 80% of the
/// scheduling weight. The default targets and sweep knobs suit the decay
/// experiment out of the box.
fn preset(name: &str) -> Option<SpecFile> {
    let rate = match name {
        "scenario1" => 1.0 / 1.5,
        "scenario2" => 1.0 / 8.0,
        "scenario3" => 1.0 / 3.0,
        _ => return None,
    };
    Some(SpecFile {
        n: 18,
        b: 90.0,
        seed: default_seed(),
        weights: None,
        command: None,
        version: None,
        service: ServiceSpec {
            kind: "exponential".to_string(),
            rate: Some(rate),
            value: None,
        },
        groups: Some(GroupSpec {
            sizes: vec![9, 9],
            weights: vec![0.2, 0.8],
        }),
        run: RunSpec {
            b_prime: Some(5.0),
            x_prime: Some(vec![8.0, 25.0]),
            n_sweep: Some(vec![6, 12, 18]),
            ..RunSpec::default()
        },
        targets: vec![
            TargetSpec { x: 144.0, eps: 0.1 },
            TargetSpec { x: 450.0, eps: 0.1 },
        ],
    })
}

/// Reads a spec from a preset name or a TOML file path.
pub fn load_spec(source: &str) -> Result<SpecFile, CliError> {
    if let Some(spec) = preset(source) {
        return Ok(spec);
    }
    let text = fs::read_to_string(source)
        .map_err(|e| CliError::Config(format!("cannot read config {source}: {e}")))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("cannot parse {source}: {e}")))
}

/// A fully validated experiment: core types plus resolved knobs.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: SystemConfig,
    pub weights: WeightVector,
    /// One violation target per source; empty when the config gave none.
    pub targets: Vec<ViolationSpec>,
    pub groups: GroupStructure,
    /// Aggregate weight per group (explicit groups only).
    pub group_weights: Option<Vec<f64>>,
    /// One target per group when targets were given per group.
    pub group_targets: Option<Vec<ViolationSpec>>,
    pub samples: usize,
    pub budget: usize,
    pub delta: f64,
    pub grid_step: f64,
    pub pmf: PmfMode,
    pub run: RunSpec,
    spec: SpecFile,
}

pub fn apply_overrides(
    spec: &mut SpecFile,
    seed: Option<u64>,
    samples: Option<usize>,
    pmf: Option<&str>,
) {
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(m) = samples {
        spec.run.samples = Some(m);
    }
    if let Some(p) = pmf {
        spec.run.pmf = Some(p.to_string());
    }
}

pub fn resolve(spec: SpecFile) -> Result<Experiment, CliError> {
    let service = match spec.service.kind.as_str() {
        "exponential" => ServiceModel::Exponential {
            rate: spec.service.rate.ok_or_else(|| {
                CliError::Config("exponential service needs service.rate".to_string())
            })?,
        },
        "deterministic" => ServiceModel::Deterministic {
            value: spec.service.value.ok_or_else(|| {
                CliError::Config("deterministic service needs service.value".to_string())
            })?,
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown service.kind {other:?}, expected exponential or deterministic"
            )))
        }
    };
    let config = SystemConfig {
        n: spec.n,
        b: spec.b,
        service,
        seed: spec.seed,
    };
    config.validate()?;

    let (groups, group_weights) = match &spec.groups {
        Some(g) => {
            let groups = GroupStructure::new(g.sizes.clone())?;
            if groups.total_sources() != spec.n {
                return Err(CliError::Config(format!(
                    "group sizes sum to {}, system has {} sources",
                    groups.total_sources(),
                    spec.n
                )));
            }
            if g.weights.len() != g.sizes.len() {
                return Err(CliError::Config(format!(
                    "{} group weights for {} groups",
                    g.weights.len(),
                    g.sizes.len()
                )));
            }
            (groups, Some(g.weights.clone()))
        }
        None => (GroupStructure::singletons(spec.n), None),
    };

    let weights = if let Some(w) = &spec.weights {
        if w.len() != spec.n {
            return Err(CliError::Config(format!(
                "{} weights for {} sources",
                w.len(),
                spec.n
            )));
        }
        WeightVector::new(w.clone())?
    } else if let Some(gw) = &group_weights {
        let mut flat = vec![0.0; spec.n];
        for (g, &w) in gw.iter().enumerate() {
            let range = groups.block_range(g);
            let share = w / range.len() as f64;
            for s in range {
                flat[s] = share;
            }
        }
        WeightVector::new(flat)?
    } else {
        WeightVector::uniform(spec.n)?
    };

    // Targets may be given per source, or per group when groups exist.
    let (targets, group_targets) = if spec.targets.is_empty() {
        (Vec::new(), None)
    } else if spec.targets.len() == spec.n {
        let ts: Vec<ViolationSpec> = spec
            .targets
            .iter()
            .map(|t| ViolationSpec { x: t.x, eps: t.eps })
            .collect();
        let gt = if group_weights.is_some() {
            Some(
                (0..groups.num_groups())
                    .map(|g| ts[groups.block_range(g).start])
                    .collect(),
            )
        } else {
            None
        };
        (ts, gt)
    } else if group_weights.is_some() && spec.targets.len() == groups.num_groups() {
        let gt: Vec<ViolationSpec> = spec
            .targets
            .iter()
            .map(|t| ViolationSpec { x: t.x, eps: t.eps })
            .collect();
        let mut ts = vec![ViolationSpec { x: 0.0, eps: 0.0 }; spec.n];
        for (g, t) in gt.iter().enumerate() {
            for s in groups.block_range(g) {
                ts[s] = *t;
            }
        }
        (ts, Some(gt))
    } else {
        return Err(CliError::Config(format!(
            "{} targets for {} sources ({} groups); give one per source or one per group",
            spec.targets.len(),
            spec.n,
            groups.num_groups()
        )));
    };
    for t in &targets {
        t.validate(spec.b)?;
    }

    let pmf_name = spec.run.pmf.as_deref().unwrap_or("fog");
    let pmf = PmfMode::from_name(pmf_name)
        .ok_or_else(|| CliError::Config(format!("unknown pmf backend {pmf_name:?}")))?;

    Ok(Experiment {
        config,
        weights,
        targets,
        groups,
        group_weights,
        group_targets,
        samples: spec.run.samples.unwrap_or(DEFAULT_SAMPLES),
        budget: spec.run.budget.unwrap_or(DEFAULT_BUDGET),
        delta: spec.run.delta.unwrap_or(DEFAULT_DELTA),
        grid_step: spec.run.grid_step.unwrap_or(DEFAULT_GRID_STEP),
        pmf,
        run: spec.run.clone(),
        spec,
    })
}

impl Experiment {
    /// Group structure usable for grouped pmf enumeration: only when the
    /// weights actually came from the group table, so equal weights within
    /// each block are guaranteed.
    pub fn bound_groups(&self) -> Option<&GroupStructure> {
        if self.group_weights.is_some() && self.spec.weights.is_none() {
            Some(&self.groups)
        } else {
            None
        }
    }

    /// Effective configuration as a manifest document: the input spec with
    /// overrides and defaults baked in, tagged with the producing command.
    pub fn manifest_toml(&self, command: &str) -> String {
        let mut spec = self.spec.clone();
        spec.command = Some(command.to_string());
        spec.version = Some(env!("CARGO_PKG_VERSION").to_string());
        spec.seed = self.config.seed;
        spec.run.samples = Some(self.samples);
        spec.run.budget = Some(self.budget);
        spec.run.delta = Some(self.delta);
        spec.run.grid_step = Some(self.grid_step);
        spec.run.pmf = Some(self.pmf.name().to_string());
        toml::to_string(&spec).expect("manifest serialization cannot fail")
    }
}
