//! Deterministic discrete-time broadcast world.
//!
//! Each step every live agent's [`Controller`] runs once, in id order, with
//! the frames readable to it. Frames reach every live agent within radio range
//! of the sender at emission time; packet frames are lost independently per
//! receiver with the configured failure rate, signals always arrive. Every
//! emission is charged once to the overhead, whoever receives it.

mod config;
mod frame;
pub mod geometry;
mod placement;
mod world;

pub use config::{ConfigError, LatencyMode, WorldConfig};
pub use frame::{AgentId, Body, FloodTag, Frame, FrameKind, PacketHeader, Signal, SignalType};
pub use geometry::{formation_slots, move_towards, FormationCapacityError, Vec2, FORMATION_CAPACITY};
pub use placement::{
    is_connected, place_swarm, place_swarm_with, AgentDescriptor, PlacementError, TypeMix, UavType,
    MAX_PLACEMENT_ATTEMPTS, UPDATER_ID,
};
pub use world::{
    ChannelTotals, Controller, Event, EventRecord, FrameLogEntry, ProtocolFault, StepContext, StepError, World,
};
