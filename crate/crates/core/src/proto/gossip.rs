//! Epidemic rebroadcast baseline.
//!
//! The Updater broadcasts the patch in a loop. Every interested drone that
//! completes its copy becomes a broadcaster too. A receiver that hears the last
//! packet of a pass with gaps asks its neighbours to start over. A broadcaster
//! that hears no request for a quiescence period after a full pass reports
//! convergence, and the Updater declares the swarm converged once every
//! interested drone has reported.

use alloc::collections::BTreeSet;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{PacketSet, RunSetup};
use crate::sim::{AgentDescriptor, AgentId, Controller, Event, PacketHeader, ProtocolFault, Signal, StepContext, UPDATER_ID};

/// Controller of one agent under this strategy.
#[derive(Debug, Clone)]
pub enum GossipAgent {
    Node(GossipNode),
    /// Incompatible drone: relays signals, never stores or rebroadcasts packets.
    Passive,
}

impl GossipAgent {
    pub fn node(&self) -> Option<&GossipNode> {
        match self {
            GossipAgent::Node(n) => Some(n),
            GossipAgent::Passive => None,
        }
    }
}

/// The Updater or an interested drone.
#[derive(Debug, Clone)]
pub struct GossipNode {
    setup: RunSetup,
    is_updater: bool,
    announced: bool,
    received: PacketSet,
    rebroadcasting: bool,
    /// First step on which this node may broadcast.
    broadcast_from: u64,
    next_index: u32,
    /// Index whose emission completes the current full pass.
    pass_last: u32,
    /// A full pass has been sent since the last request.
    pass_done: bool,
    /// Steps since `pass_done` was set.
    quiescence_timer: u64,
    /// Currently silent because the quiescence timer fired.
    resting: bool,
    converged_flag: bool,
    last_packet: Option<u64>,
    last_request: u64,
    /// Updater only: interested drones that have not reported yet.
    outstanding: BTreeSet<AgentId>,
    done: bool,
}

impl GossipNode {
    fn new(setup: RunSetup, is_updater: bool, interested: &Arc<[AgentId]>) -> Self {
        let mut received = PacketSet::new(if is_updater { setup.packets } else { 0 });
        if is_updater {
            for i in 0..setup.packets {
                received.insert(i);
            }
        }
        GossipNode {
            setup,
            is_updater,
            announced: false,
            received,
            rebroadcasting: is_updater,
            broadcast_from: 0,
            next_index: 0,
            pass_last: setup.packets.saturating_sub(1),
            pass_done: false,
            quiescence_timer: 0,
            resting: false,
            converged_flag: false,
            last_packet: None,
            last_request: 0,
            outstanding: if is_updater { interested.iter().copied().collect() } else { BTreeSet::new() },
            done: false,
        }
    }

    pub fn received(&self) -> &PacketSet {
        &self.received
    }

    /// Holds every packet of the announced patch.
    pub fn has_patch(&self) -> bool {
        self.received.total() == self.setup.packets && self.received.is_full()
    }

    pub fn is_rebroadcasting(&self) -> bool {
        self.rebroadcasting
    }

    pub fn converged_flag(&self) -> bool {
        self.converged_flag
    }

    /// Updater only: whether global convergence has been declared.
    pub fn is_done(&self) -> bool {
        self.done
    }

    fn is_idle(&self) -> bool {
        if self.is_updater && !self.announced {
            return false;
        }
        let broadcasting = self.rebroadcasting && !self.resting;
        let waiting = !self.received.is_full() && self.last_packet.is_some();
        !broadcasting && !waiting
    }

    fn control_step(&mut self, ctx: &mut StepContext<'_>) -> Result<(), ProtocolFault> {
        let now = ctx.step();
        if self.is_updater && !self.announced {
            self.announced = true;
            ctx.flood(Signal::UpdateAvailable {
                packets: self.setup.packets,
            });
            ctx.record(Event::UpdateAnnounced);
            self.check_done(ctx);
        }
        let mut heard_last_with_gaps = false;
        for frame in ctx.inbox() {
            if let Some(h) = frame.packet() {
                if self.received.is_full() {
                    continue;
                }
                if self.received.total() == 0 {
                    self.received = PacketSet::new(h.count);
                }
                self.received.insert(h.index);
                self.last_packet = Some(now);
                if self.received.is_full() {
                    ctx.record(Event::PatchApplied);
                    self.pass_last = h.count - 1;
                    self.rebroadcasting = true;
                    self.broadcast_from = now + 1;
                } else if h.index + 1 == h.count {
                    heard_last_with_gaps = true;
                }
                continue;
            }
            match frame.signal() {
                Some(Signal::UpdateAvailable { packets }) if self.received.total() == 0 && !self.is_updater => {
                    self.received = PacketSet::new(*packets);
                    if *packets == 0 {
                        self.pass_last = 0;
                        self.rebroadcasting = true;
                        self.broadcast_from = now + 1;
                    }
                }
                Some(Signal::RetransmitRequest { .. }) if self.rebroadcasting => {
                    // Owe the requester one more full pass. A resting node
                    // starts over; a busy one keeps cycling, so frequent
                    // requests cannot starve the tail of the sequence.
                    let total = self.received.total().max(1);
                    if self.resting {
                        self.next_index = 0;
                    }
                    self.pass_last = (self.next_index + total - 1) % total;
                    self.pass_done = false;
                    self.quiescence_timer = 0;
                    self.resting = false;
                }
                Some(Signal::Converged) if self.is_updater => {
                    self.outstanding.remove(&frame.origin());
                    self.check_done(ctx);
                }
                _ => {}
            }
        }

        if !self.received.is_full() && self.received.total() > 0 {
            let silent = self.last_packet.is_some_and(|t| {
                now >= t + self.setup.params.quiescence_steps && now >= self.last_request + self.setup.params.quiescence_steps
            });
            if heard_last_with_gaps || silent {
                ctx.send_signal(Signal::RetransmitRequest { missing: Arc::from([]) }, None);
                self.last_request = now;
            }
        }

        if self.rebroadcasting && !self.resting && !self.done && now >= self.broadcast_from {
            self.broadcast(ctx);
        }
        Ok(())
    }

    fn broadcast(&mut self, ctx: &mut StepContext<'_>) {
        let total = self.received.total();
        if self.pass_done {
            self.quiescence_timer += 1;
            if self.quiescence_timer >= self.setup.params.quiescence_steps {
                self.resting = true;
                if !self.converged_flag {
                    self.converged_flag = true;
                    if self.is_updater {
                        self.check_done(ctx);
                    } else {
                        ctx.flood(Signal::Converged);
                        ctx.record(Event::SubswarmConverged);
                    }
                }
                return;
            }
        }
        if total == 0 {
            self.pass_done = true;
            return;
        }
        ctx.send_packet(
            PacketHeader {
                index: self.next_index,
                count: total,
                burst_left: total - 1 - self.next_index,
            },
            None,
        );
        if self.next_index == self.pass_last && !self.pass_done {
            self.pass_done = true;
            self.quiescence_timer = 0;
        }
        self.next_index = (self.next_index + 1) % total;
    }

    fn check_done(&mut self, ctx: &mut StepContext<'_>) {
        if !self.done && self.outstanding.is_empty() {
            self.done = true;
            ctx.record(Event::Converged);
        }
    }
}

impl Controller for GossipAgent {
    fn control_step(&mut self, ctx: &mut StepContext<'_>) -> Result<(), ProtocolFault> {
        match self {
            GossipAgent::Node(n) => n.control_step(ctx),
            GossipAgent::Passive => Ok(()),
        }
    }

    fn is_idle(&self) -> bool {
        match self {
            GossipAgent::Node(n) => n.is_idle(),
            GossipAgent::Passive => true,
        }
    }
}

/// Builds one controller per agent, indexed like `agents`.
pub fn build_agents(agents: &[AgentDescriptor], setup: RunSetup) -> Vec<GossipAgent> {
    let interested: Arc<[AgentId]> = agents
        .iter()
        .filter(|a| a.needs_update && a.id != UPDATER_ID)
        .map(|a| a.id)
        .collect();
    agents
        .iter()
        .map(|a| {
            if a.id == UPDATER_ID {
                GossipAgent::Node(GossipNode::new(setup, true, &interested))
            } else if a.needs_update {
                GossipAgent::Node(GossipNode::new(setup, false, &interested))
            } else {
                GossipAgent::Passive
            }
        })
        .collect()
}
