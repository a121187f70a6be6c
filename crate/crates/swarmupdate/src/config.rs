//! Experiment configuration files.
//!
//! A config is a flat TOML table. Every key is optional and falls back to the
//! default below, which is the full evaluation grid:
//!
//! ```toml
//! strategies = ["swarmsync", "gossip", "soul"]
//! sizes = [20, 100, 200, 500]
//! failure_rates = [0.0, 0.25, 0.5, 0.75]
//! patch_packets = [240]        # or: patch_file = "update.ntp"
//! repetitions = 10
//! seed_base = 0
//! step_cap = 200000
//!
//! control_step_ms = 100
//! comm_range_m = 3.0
//! max_speed_mps = 1.0
//! packet_size_bytes = 12500
//! latency = "argos"            # or "optimistic"
//! # arena_side_m = 30.0        # default grows with the swarm size
//!
//! timeout_steps = 200
//! max_concurrent = 18
//! quiescence_steps = 20
//! group_size = 18
//! request_timer_steps = 10
//!
//! footbots = 1                 # type mix: footbots to eyebots
//! eyebots = 1
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use swarmupdate_core::sim::{TypeMix, UavType};
use swarmupdate_core::{LatencyMode, ProtocolParams, ScenarioConfig, Strategy, WorldConfig};

use crate::files;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("unknown strategy `{0}`")]
    Strategy(String),
    #[error("`{0}` must not be empty")]
    EmptyAxis(&'static str),
    #[error("`{0}` lists several values; this command runs a single scenario")]
    NotSingle(&'static str),
    #[error("patch file {path}: {source}")]
    PatchFile { path: PathBuf, source: files::FileError },
    #[error("invalid scenario: {0}")]
    Invalid(#[from] swarmupdate_core::ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Latency {
    #[default]
    Argos,
    Optimistic,
}

impl From<Latency> for LatencyMode {
    fn from(l: Latency) -> Self {
        match l {
            Latency::Argos => LatencyMode::ArgosFaithful,
            Latency::Optimistic => LatencyMode::Optimistic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub strategies: Vec<String>,
    pub sizes: Vec<usize>,
    pub failure_rates: Vec<f64>,
    pub patch_packets: Vec<u32>,
    /// Takes precedence over `patch_packets`: the packet count of this patch.
    pub patch_file: Option<PathBuf>,
    pub repetitions: u32,
    pub seed_base: u64,
    pub step_cap: u64,

    pub control_step_ms: u32,
    pub comm_range_m: f64,
    pub max_speed_mps: f64,
    pub packet_size_bytes: u32,
    pub latency: Latency,
    pub arena_side_m: Option<f64>,

    pub timeout_steps: u64,
    pub max_concurrent: usize,
    pub quiescence_steps: u64,
    pub group_size: usize,
    pub request_timer_steps: u64,

    pub footbots: u32,
    pub eyebots: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let world = WorldConfig::default();
        let params = ProtocolParams::default();
        let scenario = ScenarioConfig::default();
        let mix = TypeMix::default();
        ExperimentConfig {
            strategies: Strategy::ALL.iter().map(|s| s.name().to_string()).collect(),
            sizes: vec![20, 100, 200, 500],
            failure_rates: vec![0.0, 0.25, 0.5, 0.75],
            patch_packets: vec![scenario.patch_packets],
            patch_file: None,
            repetitions: scenario.repetitions,
            seed_base: scenario.seed_base,
            step_cap: scenario.step_cap,
            control_step_ms: world.control_step_ms,
            comm_range_m: world.comm_range_m,
            max_speed_mps: world.max_speed_mps,
            packet_size_bytes: world.packet_size_bytes,
            latency: Latency::Argos,
            arena_side_m: world.arena_side_m,
            timeout_steps: params.timeout_steps,
            max_concurrent: params.max_concurrent,
            quiescence_steps: params.quiescence_steps,
            group_size: params.group_size,
            request_timer_steps: params.request_timer_steps,
            footbots: mix.footbots,
            eyebots: mix.eyebots,
        }
    }
}

/// Command-line overrides, one per config key.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Strategies (comma separated): swarmsync, gossip, soul.
    #[arg(long, alias = "strategies", value_delimiter = ',')]
    pub strategy: Vec<String>,
    /// Swarm sizes, the Updater not included.
    #[arg(long, alias = "sizes", value_delimiter = ',')]
    pub size: Vec<usize>,
    /// Packet failure rates.
    #[arg(long, alias = "failure-rates", value_delimiter = ',')]
    pub failure: Vec<f64>,
    /// Patch sizes in packets.
    #[arg(long, alias = "patch-packets", value_delimiter = ',')]
    pub packets: Vec<u32>,
    /// Derive the patch size from a patch file.
    #[arg(long)]
    pub patch_file: Option<PathBuf>,
    /// Seed of repetition 0; repetition r uses seed + r.
    #[arg(long, alias = "seed-base")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repetitions: Option<u32>,
    #[arg(long)]
    pub step_cap: Option<u64>,
    #[arg(long)]
    pub control_step_ms: Option<u32>,
    #[arg(long)]
    pub comm_range_m: Option<f64>,
    #[arg(long)]
    pub max_speed_mps: Option<f64>,
    #[arg(long)]
    pub packet_size_bytes: Option<u32>,
    #[arg(long, value_enum)]
    pub latency: Option<Latency>,
    #[arg(long)]
    pub arena_side_m: Option<f64>,
    #[arg(long)]
    pub timeout_steps: Option<u64>,
    #[arg(long)]
    pub max_concurrent: Option<usize>,
    #[arg(long)]
    pub quiescence_steps: Option<u64>,
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long)]
    pub request_timer_steps: Option<u64>,
    #[arg(long)]
    pub footbots: Option<u32>,
    #[arg(long)]
    pub eyebots: Option<u32>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_list<T>(slot: &mut Vec<T>, values: Vec<T>) {
    if !values.is_empty() {
        *slot = values;
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// The file at `path`, or the defaults if there is none.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, ConfigError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn apply(&mut self, o: Overrides) {
        set_list(&mut self.strategies, o.strategy);
        set_list(&mut self.sizes, o.size);
        set_list(&mut self.failure_rates, o.failure);
        set_list(&mut self.patch_packets, o.packets);
        if o.patch_file.is_some() {
            self.patch_file = o.patch_file;
        }
        set(&mut self.seed_base, o.seed);
        set(&mut self.repetitions, o.repetitions);
        set(&mut self.step_cap, o.step_cap);
        set(&mut self.control_step_ms, o.control_step_ms);
        set(&mut self.comm_range_m, o.comm_range_m);
        set(&mut self.max_speed_mps, o.max_speed_mps);
        set(&mut self.packet_size_bytes, o.packet_size_bytes);
        set(&mut self.latency, o.latency);
        if o.arena_side_m.is_some() {
            self.arena_side_m = o.arena_side_m;
        }
        set(&mut self.timeout_steps, o.timeout_steps);
        set(&mut self.max_concurrent, o.max_concurrent);
        set(&mut self.quiescence_steps, o.quiescence_steps);
        set(&mut self.group_size, o.group_size);
        set(&mut self.request_timer_steps, o.request_timer_steps);
        set(&mut self.footbots, o.footbots);
        set(&mut self.eyebots, o.eyebots);
    }

    fn strategies(&self) -> Result<Vec<Strategy>, ConfigError> {
        self.strategies
            .iter()
            .map(|s| s.parse().map_err(|_| ConfigError::Strategy(s.clone())))
            .collect()
    }

    fn packet_counts(&self) -> Result<Vec<u32>, ConfigError> {
        let Some(path) = &self.patch_file else {
            return Ok(self.patch_packets.clone());
        };
        let patch = files::load_patch(path).map_err(|source| ConfigError::PatchFile {
            path: path.clone(),
            source,
        })?;
        let packets = patch.packet_count(u64::from(self.packet_size_bytes));
        Ok(vec![u32::try_from(packets).unwrap_or(u32::MAX)])
    }

    fn template(&self, strategy: Strategy, size: usize, failure_rate: f64, packets: u32) -> ScenarioConfig {
        ScenarioConfig {
            strategy,
            swarm_size: size,
            failure_rate,
            patch_packets: packets,
            repetitions: self.repetitions,
            seed_base: self.seed_base,
            world: WorldConfig {
                control_step_ms: self.control_step_ms,
                comm_range_m: self.comm_range_m,
                max_speed_mps: self.max_speed_mps,
                failure_rate,
                packet_size_bytes: self.packet_size_bytes,
                latency_mode: self.latency.into(),
                arena_side_m: self.arena_side_m,
                seed: self.seed_base,
            },
            params: ProtocolParams {
                timeout_steps: self.timeout_steps,
                max_concurrent: self.max_concurrent,
                quiescence_steps: self.quiescence_steps,
                group_size: self.group_size,
                request_timer_steps: self.request_timer_steps,
            },
            mix: TypeMix {
                footbots: self.footbots,
                eyebots: self.eyebots,
                update_target: UavType::Eyebot,
            },
            step_cap: self.step_cap,
        }
    }

    /// One validated scenario per grid cell, ordered by patch size, swarm
    /// size, failure rate and strategy.
    pub fn cells(&self) -> Result<Vec<ScenarioConfig>, ConfigError> {
        let strategies = self.strategies()?;
        let packets = self.packet_counts()?;
        for (name, empty) in [
            ("strategies", strategies.is_empty()),
            ("sizes", self.sizes.is_empty()),
            ("failure_rates", self.failure_rates.is_empty()),
            ("patch_packets", packets.is_empty()),
        ] {
            if empty {
                return Err(ConfigError::EmptyAxis(name));
            }
        }
        let mut cells = Vec::new();
        for &p in &packets {
            for &n in &self.sizes {
                for &f in &self.failure_rates {
                    for &s in &strategies {
                        let cell = self.template(s, n, f, p);
                        cell.validate()?;
                        cells.push(cell);
                    }
                }
            }
        }
        Ok(cells)
    }

    /// The only cell of a single-scenario config.
    pub fn single(&self) -> Result<ScenarioConfig, ConfigError> {
        for (name, len) in [
            ("strategies", self.strategies.len()),
            ("sizes", self.sizes.len()),
            ("failure_rates", self.failure_rates.len()),
            ("patch_packets", if self.patch_file.is_some() { 1 } else { self.patch_packets.len() }),
        ] {
            if len > 1 {
                return Err(ConfigError::NotSingle(name));
            }
        }
        Ok(self.cells()?.remove(0))
    }
}
