//! Core of the swarm update toolkit.
//!
//! Everything in this crate is pure computation over caller-owned values:
//!
//! * [`model`] encodes named-tensor models, simulates layer-frozen retraining and
//!   builds/applies minimal patches between model versions.
//! * [`sim`] is a deterministic discrete-time broadcast world with range-limited,
//!   lossy radio and a per-agent controller step loop.
//! * [`proto`] holds the three update synchronization strategies driven by that
//!   world: the hierarchical leader/follower protocol, gossip rebroadcast and the
//!   auction-style group server.
//! * [`scenario`] wires a strategy to a world and measures one run.
//!
//! File IO, configuration files, sweeps and the command line live in the
//! `swarmupdate` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod model;
pub mod proto;
pub mod scenario;
pub mod sim;

mod rng;

pub use model::{
    apply_patch, generate_patch, packet_count, simulate_update, synthetic_squeezenet_profile,
    FreezeSpec, ModelDigest, NamedTensorModel, PatchEntry, PatchFile, PatchKind, Tensor,
};
pub use proto::{ProtocolParams, Strategy};
pub use scenario::{run_scenario, MetricsRecord, RunOutcome, Scenario, ScenarioConfig, ScenarioError};
pub use sim::{LatencyMode, UavType, WorldConfig};
