//! Experiment configuration: JSON with an explicit defaults layer, plus
//! dotted-path overrides from the command line. Unknown fields are rejected
//! and deserialization failures carry the offending field path.

use serde::{Deserialize, Serialize};

use cogarq::channel::{erasure, gilbert_elliot, three_state, ChannelModel, GilbertElliotParams};
use cogarq::dp::SolverParams;
use cogarq::policies::Objective;
use cogarq::sim::{BeliefInit, Models, PolicyKind, PolicySpec, SimConfig};

use crate::CliError;

fn default_r_p() -> f64 {
    1.0
}

/// Named channel presets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Erasure {
        p_ee: f64,
        p_ne: f64,
        #[serde(default = "default_r_p")]
        r_p: f64,
    },
    GilbertElliot {
        p_bb: f64,
        p_gb: f64,
        gamma: [f64; 4],
        #[serde(default = "default_r_p")]
        r_p: f64,
    },
    ThreeState {
        matrix: Vec<Vec<f64>>,
        #[serde(default = "default_r_p")]
        r_p: f64,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<ChannelModel, CliError> {
        let model = match self {
            ModelConfig::Erasure { p_ee, p_ne, r_p } => erasure(*p_ee, *p_ne, *r_p),
            ModelConfig::GilbertElliot {
                p_bb,
                p_gb,
                gamma,
                r_p,
            } => gilbert_elliot(
                &GilbertElliotParams {
                    p_bb: *p_bb,
                    p_gb: *p_gb,
                    gamma: *gamma,
                },
                *r_p,
            ),
            ModelConfig::ThreeState { matrix, r_p } => three_state(matrix.clone(), *r_p),
        };
        model.map_err(CliError::from)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    #[serde(default = "ObjectiveConfig::default_w")]
    pub w: f64,
    #[serde(default = "default_r_p")]
    pub r_s: f64,
}

impl ObjectiveConfig {
    fn default_w() -> f64 {
        0.6
    }
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            w: Self::default_w(),
            r_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "SolverConfig::default_alpha")]
    pub alpha: f64,
    /// Nodes per axis; defaults to 1025 on intervals and 257 on planes.
    #[serde(default)]
    pub grid_resolution: Option<usize>,
    #[serde(default = "SolverConfig::default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "SolverConfig::default_max_iterations")]
    pub max_iterations: usize,
}

impl SolverConfig {
    fn default_alpha() -> f64 {
        0.999
    }
    fn default_tolerance() -> f64 {
        1e-10
    }
    fn default_max_iterations() -> usize {
        1_000_000
    }

    pub fn params(&self, objective: Objective, planar: bool) -> SolverParams {
        let base = if planar {
            SolverParams::planar_defaults(objective)
        } else {
            SolverParams::interval_defaults(objective)
        };
        SolverParams {
            alpha: self.alpha,
            grid_resolution: self.grid_resolution.unwrap_or(base.grid_resolution),
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            ..base
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: Self::default_alpha(),
            grid_resolution: None,
            tolerance: Self::default_tolerance(),
            max_iterations: Self::default_max_iterations(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "SimSection::default_horizon")]
    pub horizon: u64,
    #[serde(default = "SimSection::default_replications")]
    pub replications: u64,
    /// Defaults to 0 for stationary initialization, 1000 for random.
    #[serde(default)]
    pub burn_in: Option<u64>,
    #[serde(default = "SimSection::default_belief_init")]
    pub belief_init: BeliefInit,
    #[serde(default)]
    pub trace: bool,
}

impl SimSection {
    fn default_horizon() -> u64 {
        1_000_000
    }
    fn default_replications() -> u64 {
        16
    }
    fn default_belief_init() -> BeliefInit {
        BeliefInit::Stationary
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in.unwrap_or(match self.belief_init {
            BeliefInit::Stationary => 0,
            BeliefInit::RandomUniform => 1_000,
        })
    }
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            horizon: Self::default_horizon(),
            replications: Self::default_replications(),
            burn_in: None,
            belief_init: Self::default_belief_init(),
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default = "TrainingConfig::default_length")]
    pub length: usize,
    /// Trace lengths for length sweeps (estimation-error and degradation
    /// figures).
    #[serde(default = "TrainingConfig::default_lengths")]
    pub lengths: Vec<usize>,
    #[serde(default = "TrainingConfig::default_seeds")]
    pub seeds: u64,
    /// Optional path to a recorded trace instead of a simulated one.
    #[serde(default)]
    pub trace_file: Option<String>,
    /// Second-phase trace for the three-state procedure.
    #[serde(default)]
    pub transmit_trace_file: Option<String>,
    /// Length of the transmitting phase (three-state), defaults to `length`.
    #[serde(default)]
    pub transmit_length: Option<usize>,
}

impl TrainingConfig {
    fn default_length() -> usize {
        1_000
    }
    fn default_lengths() -> Vec<usize> {
        vec![30, 100, 300, 1_000, 3_000, 10_000]
    }
    fn default_seeds() -> u64 {
        32
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            length: Self::default_length(),
            lengths: Self::default_lengths(),
            seeds: Self::default_seeds(),
            trace_file: None,
            transmit_trace_file: None,
            transmit_length: None,
        }
    }
}

fn default_policies() -> Vec<String> {
    vec!["dp".into(), "greedy".into(), "genie".into()]
}

fn default_w_grid() -> Vec<f64> {
    (1..20).map(|i| i as f64 * 0.05).collect()
}

fn default_seed() -> u64 {
    12345
}

/// Top-level experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub model2: Option<ModelConfig>,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    #[serde(default = "default_w_grid")]
    pub w_grid: Vec<f64>,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn models(&self) -> Result<Models, CliError> {
        let first = self.model.build()?;
        Ok(match &self.model2 {
            Some(second) => Models::Two(first, second.build()?),
            None => Models::Single(first),
        })
    }

    pub fn objective(&self) -> Objective {
        Objective::new(self.objective.w, self.objective.r_s)
    }

    pub fn solver_params(&self) -> Result<SolverParams, CliError> {
        let planar = self.model2.is_some()
            || matches!(self.model, ModelConfig::ThreeState { .. });
        Ok(self.solver.params(self.objective(), planar))
    }

    pub fn sim_config(&self, policy: PolicySpec) -> Result<SimConfig, CliError> {
        Ok(SimConfig {
            models: self.models()?,
            policy,
            objective: self.objective(),
            horizon: self.sim.horizon,
            burn_in: self.sim.burn_in(),
            replications: self.sim.replications,
            seed: self.seed,
            belief_init: self.sim.belief_init,
            record_trace: self.sim.trace,
        })
    }

    pub fn policy_kinds(&self) -> Result<Vec<PolicyKind>, CliError> {
        self.policies
            .iter()
            .map(|name| PolicyKind::parse(name).map_err(CliError::from))
            .collect()
    }

    /// The resolved configuration (defaults applied) as a canonical JSON
    /// value, embedded into every output file.
    pub fn resolved_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Parses `--set key.path=value` overrides onto the raw JSON document.
pub fn apply_overrides(
    doc: &mut serde_json::Value,
    sets: &[String],
) -> Result<(), CliError> {
    for entry in sets {
        let (path, raw_value) = entry.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("--set '{entry}' must look like key.path=value"))
        })?;
        let value: serde_json::Value = serde_json::from_str(raw_value)
            .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));
        let mut cursor = &mut *doc;
        let segments: Vec<&str> = path.split('.').collect();
        for (k, segment) in segments.iter().enumerate() {
            if segment.is_empty() {
                return Err(CliError::Usage(format!(
                    "--set '{entry}' has an empty path segment"
                )));
            }
            if !cursor.is_object() {
                return Err(CliError::Usage(format!(
                    "--set '{entry}': '{}' is not an object",
                    segments[..k].join(".")
                )));
            }
            let map = cursor.as_object_mut().unwrap();
            if k == segments.len() - 1 {
                map.insert(segment.to_string(), value);
                break;
            }
            cursor = map
                .entry(segment.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
        }
    }
    Ok(())
}

/// Deserializes the (possibly overridden) document, reporting the offending
/// field path on failure.
pub fn parse_config(doc: serde_json::Value) -> Result<ExperimentConfig, CliError> {
    let deserializer = doc;
    serde_path_to_error::deserialize(deserializer).map_err(|err| {
        CliError::Usage(format!(
            "invalid config at '{}': {}",
            err.path(),
            err.inner()
        ))
    })
}

pub fn load_config(
    path: Option<&std::path::Path>,
    default_doc: serde_json::Value,
    seed: Option<u64>,
    sets: &[String],
) -> Result<ExperimentConfig, CliError> {
    let mut doc = match path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("config is not valid JSON: {e}")))?
        }
        None => default_doc,
    };
    apply_overrides(&mut doc, sets)?;
    if let Some(seed) = seed {
        doc.as_object_mut()
            .ok_or_else(|| CliError::Usage("config root must be a JSON object".into()))?
            .insert("seed".into(), serde_json::json!(seed));
    }
    parse_config(doc)
}
