use alloc::collections::BTreeSet;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::proto::{PacketSet, Poll, ReliableSender, RunSetup};
use crate::sim::{AgentId, Event, Frame, ProtocolFault, Signal, StepContext, Vec2, UPDATER_ID};

/// Where a compatible drone stands in the plan.
#[derive(Debug, Clone)]
pub enum Membership {
    /// Served directly by the Updater from slot `updater_slot`.
    Direct { updater_slot: Vec2 },
    /// Member of a sub-swarm.
    SubSwarm {
        /// Sorted member ids, leader included.
        members: Arc<[AgentId]>,
        leader: AgentId,
        /// Slot of this sub-swarm's leader around the Updater.
        updater_slot: Vec2,
        /// Pre-departure position of the original leader; followers gather
        /// around it and every leader distributes from it.
        rally: Vec2,
        /// This drone's slot around the rally point while following.
        gather_slot: Vec2,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DronePhase {
    /// No update announced yet.
    Waiting,
    /// Following: gathered near the rally point, listening to the leader.
    Following,
    /// Travelling to the slot around the Updater.
    ToSlot,
    /// In position, receiving from the Updater.
    Receiving,
    /// Holds the patch; reports completion on the next step.
    Completing,
    /// Leader flying back to the rally point.
    Returning,
    Distributing,
    AwaitComplete,
    Done,
    Aborted,
}

/// A compatible drone: leader, follower, or directly served.
#[derive(Debug, Clone)]
pub struct SyncDrone {
    setup: RunSetup,
    membership: Membership,
    leading: bool,
    leader: AgentId,
    phase: DronePhase,
    received: PacketSet,
    applied: bool,
    failed: BTreeSet<AgentId>,
    deadline: Option<u64>,
    complete_at: u64,
    sender: Option<ReliableSender>,
    audience: Vec<AgentId>,
    completes: BTreeSet<AgentId>,
}

impl SyncDrone {
    pub fn new(id: AgentId, setup: RunSetup, membership: Membership) -> Self {
        let leader = match &membership {
            Membership::Direct { .. } => UPDATER_ID,
            Membership::SubSwarm { leader, .. } => *leader,
        };
        SyncDrone {
            setup,
            leading: leader == id,
            leader,
            membership,
            phase: DronePhase::Waiting,
            received: PacketSet::new(0),
            applied: false,
            failed: BTreeSet::new(),
            deadline: None,
            complete_at: 0,
            sender: None,
            audience: Vec::new(),
            completes: BTreeSet::new(),
        }
    }

    pub fn phase(&self) -> DronePhase {
        self.phase
    }

    pub fn is_leader(&self) -> bool {
        self.leading
    }

    pub fn leader(&self) -> AgentId {
        self.leader
    }

    pub fn received(&self) -> &PacketSet {
        &self.received
    }

    pub fn applied(&self) -> bool {
        self.applied
    }

    pub(super) fn is_idle(&self) -> bool {
        match self.phase {
            DronePhase::Waiting | DronePhase::Done | DronePhase::Aborted => true,
            DronePhase::Following => self.deadline.is_none(),
            _ => false,
        }
    }

    fn is_direct(&self) -> bool {
        matches!(self.membership, Membership::Direct { .. })
    }

    fn updater_slot(&self) -> Vec2 {
        match &self.membership {
            Membership::Direct { updater_slot } | Membership::SubSwarm { updater_slot, .. } => *updater_slot,
        }
    }

    fn rally(&self) -> Vec2 {
        match &self.membership {
            Membership::SubSwarm { rally, .. } => *rally,
            Membership::Direct { updater_slot } => *updater_slot,
        }
    }

    /// Members still served by this drone as leader.
    fn followers(&self, me: AgentId) -> Vec<AgentId> {
        match &self.membership {
            Membership::SubSwarm { members, .. } => members
                .iter()
                .copied()
                .filter(|&m| m != me && !self.failed.contains(&m))
                .collect(),
            Membership::Direct { .. } => Vec::new(),
        }
    }

    pub(super) fn control_step(&mut self, ctx: &mut StepContext<'_>) -> Result<(), ProtocolFault> {
        if self.phase == DronePhase::Aborted {
            return Ok(());
        }
        for frame in ctx.inbox() {
            self.on_frame(frame, ctx);
            if self.phase == DronePhase::Aborted {
                return Ok(());
            }
        }
        self.advance(ctx)
    }

    fn on_frame(&mut self, frame: &Frame, ctx: &mut StepContext<'_>) {
        let me = ctx.id();
        if let Some(h) = frame.packet() {
            let from_source = if self.leading || self.is_direct() {
                frame.sender == UPDATER_ID && self.phase == DronePhase::Receiving
            } else {
                frame.sender == self.leader && !matches!(self.phase, DronePhase::Waiting)
            };
            if from_source {
                self.on_packet(h.index, frame.sender, ctx);
            }
            return;
        }
        let Some(signal) = frame.signal() else { return };
        match *signal {
            Signal::UpdateAvailable { packets } if self.phase == DronePhase::Waiting => {
                self.received = PacketSet::new(packets);
                if packets == 0 {
                    self.phase = DronePhase::Done;
                } else if self.leading || self.is_direct() {
                    ctx.move_to(self.updater_slot());
                    self.phase = DronePhase::ToSlot;
                } else {
                    if let Membership::SubSwarm { gather_slot, .. } = &self.membership {
                        ctx.move_to(*gather_slot);
                    }
                    self.phase = DronePhase::Following;
                }
            }
            Signal::Abort => self.abort(ctx),
            Signal::ReappointLeader { failed } => self.reappoint(failed, ctx),
            Signal::Ack { index } if frame.addressed_to == Some(me) => {
                if let Some(s) = &mut self.sender {
                    s.on_ack(frame.sender, index);
                }
            }
            Signal::Complete if frame.addressed_to == Some(me) => {
                self.completes.insert(frame.sender);
            }
            _ => {}
        }
    }

    fn on_packet(&mut self, index: u32, from: AgentId, ctx: &mut StepContext<'_>) {
        let now = ctx.step();
        self.received.insert(index);
        ctx.send_signal(Signal::Ack { index }, Some(from));
        if self.applied {
            return;
        }
        if self.received.is_full() {
            self.applied = true;
            ctx.record(Event::PatchApplied);
            self.deadline = None;
            if self.leading {
                let followers = self.followers(ctx.id());
                if followers.is_empty() {
                    self.converge(ctx);
                } else {
                    ctx.move_to(self.rally());
                    self.phase = DronePhase::Returning;
                }
            } else {
                self.complete_at = now + 1;
                self.phase = DronePhase::Completing;
            }
        } else {
            self.deadline = Some(now + self.setup.params.timeout_steps);
        }
    }

    fn advance(&mut self, ctx: &mut StepContext<'_>) -> Result<(), ProtocolFault> {
        let now = ctx.step();
        let me = ctx.id();
        match self.phase {
            DronePhase::ToSlot if !ctx.is_moving() && ctx.is_at(self.updater_slot()) => {
                ctx.send_signal(Signal::InPosition, Some(UPDATER_ID));
                ctx.record(Event::InPosition);
                self.deadline = Some(now + self.setup.travel_budget + self.setup.params.timeout_steps);
                self.phase = DronePhase::Receiving;
            }
            DronePhase::Receiving => {
                if self.deadline.is_some_and(|d| now >= d) {
                    ctx.record(Event::AbortRaised);
                    ctx.flood(Signal::Abort);
                    self.abort(ctx);
                }
            }
            DronePhase::Following => {
                if self.deadline.is_some_and(|d| now >= d) {
                    let failed = self.leader;
                    ctx.record(Event::ReappointRaised { failed });
                    ctx.flood(Signal::ReappointLeader { failed });
                    self.reappoint(failed, ctx);
                }
            }
            DronePhase::Completing if now >= self.complete_at => {
                ctx.send_signal(Signal::Complete, Some(self.leader));
                ctx.record(Event::CompleteSent);
                self.phase = DronePhase::Done;
            }
            DronePhase::Returning if !ctx.is_moving() && ctx.is_at(self.rally()) => {
                let audience = self.followers(me);
                ctx.record(Event::TransferStarted {
                    audience: audience.len() as u32,
                });
                self.sender = Some(ReliableSender::new(
                    audience,
                    self.received.total(),
                    self.setup.params.timeout_steps,
                    now,
                    self.setup.travel_budget,
                ));
                self.phase = DronePhase::Distributing;
                self.distribute(ctx)?;
            }
            DronePhase::Distributing => self.distribute(ctx)?,
            DronePhase::AwaitComplete => {
                let pending: Vec<AgentId> =
                    self.audience.iter().copied().filter(|a| !self.completes.contains(a)).collect();
                if pending.is_empty() {
                    self.converge(ctx);
                } else if self.deadline.is_some_and(|d| now >= d) {
                    for a in pending {
                        self.evict(a, ctx);
                    }
                    self.converge(ctx);
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn distribute(&mut self, ctx: &mut StepContext<'_>) -> Result<(), ProtocolFault> {
        for _ in 0..=crate::sim::FORMATION_CAPACITY {
            let Some(sender) = &mut self.sender else { return Ok(()) };
            match sender.poll(ctx) {
                Poll::Sent(_) => return Ok(()),
                Poll::TimedOut(missing) => {
                    for m in missing {
                        self.evict(m, ctx);
                    }
                }
                Poll::Done => {
                    self.audience = sender.audience().to_vec();
                    self.sender = None;
                    self.deadline = Some(ctx.step() + self.setup.params.timeout_steps);
                    self.phase = DronePhase::AwaitComplete;
                    return Ok(());
                }
            }
        }
        Err(ProtocolFault("distribution did not settle"))
    }

    fn evict(&mut self, follower: AgentId, ctx: &mut StepContext<'_>) {
        ctx.record(Event::Evicted { agent: follower });
        self.failed.insert(follower);
        if let Some(s) = &mut self.sender {
            s.remove(follower);
        }
    }

    fn converge(&mut self, ctx: &mut StepContext<'_>) {
        ctx.flood(Signal::Converged);
        ctx.record(Event::SubswarmConverged);
        self.deadline = None;
        self.phase = DronePhase::Done;
    }

    fn abort(&mut self, ctx: &mut StepContext<'_>) {
        ctx.record(Event::Aborted);
        ctx.stop();
        if !self.applied {
            self.received.clear();
        }
        self.sender = None;
        self.deadline = None;
        self.phase = DronePhase::Aborted;
    }

    /// Handles the announcement that `failed` no longer leads.
    fn reappoint(&mut self, failed: AgentId, ctx: &mut StepContext<'_>) {
        let me = ctx.id();
        let Membership::SubSwarm { members, gather_slot, .. } = &self.membership else {
            return;
        };
        if !members.contains(&failed) || !self.failed.insert(failed) {
            return;
        }
        if failed != self.leader {
            return;
        }
        let Some(next) = members.iter().copied().find(|m| !self.failed.contains(m)) else {
            return;
        };
        let gather_slot = *gather_slot;
        self.leader = next;
        self.deadline = None;
        if failed == me {
            // Presumed dead but alive: step down and follow the successor.
            self.leading = false;
            self.sender = None;
            if self.applied {
                self.phase = DronePhase::Done;
            } else {
                ctx.move_to(gather_slot);
                self.phase = DronePhase::Following;
            }
            return;
        }
        if next != me {
            return;
        }
        ctx.record(Event::LeaderAppointed { replaces: failed });
        self.leading = true;
        if self.applied {
            ctx.move_to(self.rally());
            self.phase = DronePhase::Returning;
        } else {
            ctx.move_to(self.updater_slot());
            self.phase = DronePhase::ToSlot;
        }
    }
}
