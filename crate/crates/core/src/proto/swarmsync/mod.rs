//! Hierarchical leader/follower update synchronization.
//!
//! The Updater serves at most N drones at once. Larger compatible sets are
//! split into homogeneous sub-swarms whose leaders fetch the patch from the
//! Updater and then serve their own followers, so the whole swarm is updated
//! in two transfer cycles.

use alloc::sync::Arc;
use alloc::vec::Vec;

mod drone;
mod plan;
mod updater;

pub use drone::{DronePhase, Membership, SyncDrone};
pub use plan::{partition_subswarms, PlanError, SubSwarm, SubSwarmPlan};
pub use updater::{SyncUpdater, UpdaterPhase};

use super::RunSetup;
use crate::sim::geometry::formation_offset;
use crate::sim::{is_connected, AgentDescriptor, Controller, Event, ProtocolFault, Signal, StepContext, Vec2};

/// Controller of one agent under this strategy.
#[derive(Debug, Clone)]
pub enum SyncAgent {
    Updater(SyncUpdater),
    Drone(SyncDrone),
    /// Incompatible drone: relays floods, otherwise inert.
    Passive { aborted: bool },
}

impl SyncAgent {
    pub fn drone(&self) -> Option<&SyncDrone> {
        match self {
            SyncAgent::Drone(d) => Some(d),
            _ => None,
        }
    }

    pub fn updater(&self) -> Option<&SyncUpdater> {
        match self {
            SyncAgent::Updater(u) => Some(u),
            _ => None,
        }
    }
}

impl Controller for SyncAgent {
    fn control_step(&mut self, ctx: &mut StepContext<'_>) -> Result<(), ProtocolFault> {
        match self {
            SyncAgent::Updater(u) => u.control_step(ctx),
            SyncAgent::Drone(d) => d.control_step(ctx),
            SyncAgent::Passive { aborted } => {
                if !*aborted && ctx.inbox().iter().any(|f| f.signal() == Some(&Signal::Abort)) {
                    *aborted = true;
                    ctx.record(Event::Aborted);
                }
                Ok(())
            }
        }
    }

    fn is_idle(&self) -> bool {
        match self {
            SyncAgent::Updater(u) => u.is_idle(),
            SyncAgent::Drone(d) => d.is_idle(),
            SyncAgent::Passive { .. } => true,
        }
    }
}

/// Where every agent stands while the update is distributed: leaders at their
/// pre-departure positions, followers at their gather slots, everyone else
/// where placed.
pub fn gathered_positions(agents: &[AgentDescriptor], plan: &SubSwarmPlan, comm_range: f64) -> Vec<Vec2> {
    let mut pos: Vec<Vec2> = agents.iter().map(|a| a.position).collect();
    for s in &plan.subswarms {
        let rally = agents[s.leader as usize].position;
        for (k, &f) in s.followers.iter().enumerate() {
            pos[f as usize] = rally + formation_offset(k, comm_range);
        }
    }
    pos
}

/// Whether control floods can still cross the swarm once followers have
/// gathered: the graph without the (travelling) leaders must be connected and
/// every leader's rally point must touch it.
pub fn gathered_connected(agents: &[AgentDescriptor], plan: &SubSwarmPlan, comm_range: f64) -> bool {
    let pos = gathered_positions(agents, plan, comm_range);
    let leaders: Vec<usize> = plan.subswarms.iter().map(|s| s.leader as usize).collect();
    let others: Vec<Vec2> = (0..pos.len()).filter(|i| !leaders.contains(i)).map(|i| pos[i]).collect();
    let r2 = comm_range * comm_range;
    is_connected(&others, comm_range)
        && leaders
            .iter()
            .all(|&l| others.iter().any(|p| p.distance_sq(pos[l]) <= r2))
}

/// Builds one controller per agent, indexed like `agents`.
pub fn build_agents(agents: &[AgentDescriptor], plan: &SubSwarmPlan, setup: RunSetup) -> Vec<SyncAgent> {
    let mut out: Vec<SyncAgent> = agents
        .iter()
        .map(|a| {
            if a.id == crate::sim::UPDATER_ID {
                SyncAgent::Updater(SyncUpdater::new(setup, plan))
            } else {
                SyncAgent::Passive { aborted: false }
            }
        })
        .collect();
    for (k, &id) in plan.direct.iter().enumerate() {
        out[id as usize] = SyncAgent::Drone(SyncDrone::new(
            id,
            setup,
            Membership::Direct {
                updater_slot: formation_offset(k, setup.comm_range),
            },
        ));
    }
    for (u, s) in plan.subswarms.iter().enumerate() {
        let mut members: Vec<_> = s.members().collect();
        members.sort_unstable();
        let members: Arc<[_]> = members.into();
        let rally = agents[s.leader as usize].position;
        let updater_slot = formation_offset(u, setup.comm_range);
        // The leader's own gather slot is only used if it is ever demoted.
        let slot_of = |id| {
            let k = s.followers.iter().position(|&f| f == id).unwrap_or(s.followers.len());
            rally + formation_offset(k.min(crate::sim::FORMATION_CAPACITY - 1), setup.comm_range)
        };
        for id in s.members() {
            out[id as usize] = SyncAgent::Drone(SyncDrone::new(
                id,
                setup,
                Membership::SubSwarm {
                    members: members.clone(),
                    leader: s.leader,
                    updater_slot,
                    rally,
                    gather_slot: slot_of(id),
                },
            ));
        }
    }
    out
}
