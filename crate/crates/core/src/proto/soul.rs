//! Auction-based baseline.
//!
//! The Updater acts as auctioneer and serves the compatible drones group by
//! group. A summoned group gathers around it and receives one full blast of
//! the patch. Members then bid for the packets they miss, and the Updater
//! rebroadcasts exactly the union of the bids. After a quiescence period
//! without bids it moves on to the next group.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{PacketSet, RunSetup};
use crate::sim::geometry::formation_offset;
use crate::sim::{
    AgentDescriptor, AgentId, Controller, Event, PacketHeader, ProtocolFault, Signal, StepContext, Vec2, UPDATER_ID,
};

/// Splits the sorted compatible ids into `ceil(n / group_size)` groups whose
/// sizes differ by at most one.
pub fn partition_groups(compatible: &[AgentId], group_size: usize) -> Vec<Vec<AgentId>> {
    let mut ids = compatible.to_vec();
    ids.sort_unstable();
    if ids.is_empty() || group_size == 0 {
        return Vec::new();
    }
    let k = ids.len().div_ceil(group_size);
    let base = ids.len() / k;
    let extra = ids.len() % k;
    let mut out = Vec::with_capacity(k);
    let mut rest = &ids[..];
    for j in 0..k {
        let (head, tail) = rest.split_at(base + usize::from(j < extra));
        out.push(head.to_vec());
        rest = tail;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuctioneerPhase {
    Announce,
    AwaitArrival,
    Blast,
    ServeRequests,
    Converged,
}

/// The Updater as auctioneer.
#[derive(Debug, Clone)]
pub struct SoulUpdater {
    setup: RunSetup,
    groups: Vec<Vec<AgentId>>,
    current_group: usize,
    phase: AuctioneerPhase,
    arrived: BTreeSet<AgentId>,
    arrival_deadline: u64,
    next_summons: u64,
    queue: VecDeque<u32>,
    queued: Vec<bool>,
    quiet_timer: u64,
}

impl SoulUpdater {
    pub fn new(setup: RunSetup, groups: Vec<Vec<AgentId>>) -> Self {
        SoulUpdater {
            setup,
            groups,
            current_group: 0,
            phase: AuctioneerPhase::Announce,
            arrived: BTreeSet::new(),
            arrival_deadline: 0,
            next_summons: 0,
            queue: VecDeque::new(),
            queued: alloc::vec![false; setup.packets as usize],
            quiet_timer: 0,
        }
    }

    pub fn phase(&self) -> AuctioneerPhase {
        self.phase
    }

    pub fn current_group(&self) -> usize {
        self.current_group
    }

    pub fn groups(&self) -> &[Vec<AgentId>] {
        &self.groups
    }

    fn summon(&mut self, ctx: &mut StepContext<'_>) {
        let now = ctx.step();
        if self.current_group >= self.groups.len() {
            ctx.record(Event::Converged);
            self.phase = AuctioneerPhase::Converged;
            return;
        }
        let group = self.current_group as u32;
        ctx.flood(Signal::GroupTurn { group });
        ctx.record(Event::GroupStarted { group });
        self.arrived.clear();
        self.arrival_deadline = now + self.setup.travel_budget + self.setup.params.timeout_steps;
        self.next_summons = now + self.setup.travel_budget.max(1);
        self.phase = AuctioneerPhase::AwaitArrival;
    }

    fn start_blast(&mut self) {
        self.queue = (0..self.setup.packets).collect();
        self.queued.iter_mut().for_each(|q| *q = true);
        self.phase = AuctioneerPhase::Blast;
    }

    fn control_step(&mut self, ctx: &mut StepContext<'_>) -> Result<(), ProtocolFault> {
        let now = ctx.step();
        match self.phase {
            AuctioneerPhase::Converged => return Ok(()),
            AuctioneerPhase::Announce => {
                ctx.flood(Signal::UpdateAvailable {
                    packets: self.setup.packets,
                });
                ctx.record(Event::UpdateAnnounced);
                if self.setup.packets == 0 {
                    self.current_group = self.groups.len();
                }
                self.summon(ctx);
                return Ok(());
            }
            _ => {}
        }

        let mut requested = false;
        for frame in ctx.inbox() {
            match frame.signal() {
                Some(Signal::AtLocation) if frame.addressed_to == Some(ctx.id()) => {
                    if self.groups[self.current_group].contains(&frame.sender) {
                        self.arrived.insert(frame.sender);
                    }
                }
                Some(Signal::RetransmitRequest { missing }) if frame.addressed_to == Some(ctx.id()) => {
                    if self.phase == AuctioneerPhase::AwaitArrival {
                        continue;
                    }
                    requested = true;
                    for &i in missing.iter() {
                        if let Some(q) = self.queued.get_mut(i as usize) {
                            if !*q {
                                *q = true;
                                self.queue.push_back(i);
                            }
                        }
                    }
                }
                _ => {}
            }
        }

        if self.phase == AuctioneerPhase::AwaitArrival {
            let group = &self.groups[self.current_group];
            if self.arrived.len() == group.len() || now >= self.arrival_deadline {
                self.start_blast();
            } else if now >= self.next_summons {
                // Moving drones may have split the flood's path; summon again.
                ctx.flood(Signal::GroupTurn {
                    group: self.current_group as u32,
                });
                self.next_summons = now + self.setup.travel_budget.max(1);
                return Ok(());
            } else {
                return Ok(());
            }
        }

        if let Some(index) = self.queue.pop_front() {
            self.queued[index as usize] = false;
            ctx.send_packet(
                PacketHeader {
                    index,
                    count: self.setup.packets,
                    burst_left: self.queue.len() as u32,
                },
                None,
            );
            self.quiet_timer = 0;
            if self.queue.is_empty() {
                self.phase = AuctioneerPhase::ServeRequests;
            }
            return Ok(());
        }

        if requested {
            self.quiet_timer = 0;
            return Ok(());
        }
        self.quiet_timer += 1;
        if self.quiet_timer >= self.setup.params.quiescence_steps {
            self.quiet_timer = 0;
            self.current_group += 1;
            self.summon(ctx);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BidderPhase {
    Idle,
    Travel,
    AtLocation,
    Receiving,
    Done,
}

/// A compatible drone bidding for the packets it misses.
#[derive(Debug, Clone)]
pub struct SoulDrone {
    setup: RunSetup,
    group_index: u32,
    slot: Vec2,
    home: Vec2,
    phase: BidderPhase,
    received: PacketSet,
    last_activity: u64,
    requests: u64,
}

impl SoulDrone {
    pub fn new(setup: RunSetup, group_index: u32, slot: Vec2, home: Vec2) -> Self {
        SoulDrone {
            setup,
            group_index,
            slot,
            home,
            phase: BidderPhase::Idle,
            received: PacketSet::new(setup.packets),
            last_activity: 0,
            requests: 0,
        }
    }

    pub fn phase(&self) -> BidderPhase {
        self.phase
    }

    pub fn group_index(&self) -> u32 {
        self.group_index
    }

    pub fn received(&self) -> &PacketSet {
        &self.received
    }

    pub fn requests_sent(&self) -> u64 {
        self.requests
    }

    fn is_idle(&self) -> bool {
        matches!(self.phase, BidderPhase::Idle | BidderPhase::Done)
    }

    fn request(&mut self, ctx: &mut StepContext<'_>) {
        let missing: Arc<[u32]> = self.received.missing().collect();
        ctx.send_signal(Signal::RetransmitRequest { missing }, Some(UPDATER_ID));
        self.requests += 1;
        self.last_activity = ctx.step();
    }

    fn control_step(&mut self, ctx: &mut StepContext<'_>) -> Result<(), ProtocolFault> {
        let now = ctx.step();
        let mut burst_ended = false;
        for frame in ctx.inbox() {
            if let Some(h) = frame.packet() {
                if frame.sender != UPDATER_ID || !matches!(self.phase, BidderPhase::AtLocation | BidderPhase::Receiving) {
                    continue;
                }
                self.phase = BidderPhase::Receiving;
                self.received.insert(h.index);
                self.last_activity = now;
                burst_ended = h.burst_left == 0;
                continue;
            }
            match frame.signal() {
                Some(Signal::GroupTurn { group }) if *group == self.group_index && self.phase == BidderPhase::Idle => {
                    ctx.move_to(self.slot);
                    self.phase = BidderPhase::Travel;
                }
                _ => {}
            }
        }

        match self.phase {
            BidderPhase::Travel if !ctx.is_moving() && ctx.is_at(self.slot) => {
                ctx.send_signal(Signal::AtLocation, Some(UPDATER_ID));
                ctx.record(Event::InPosition);
                self.last_activity = now;
                self.phase = BidderPhase::AtLocation;
            }
            // Nothing heard although the Updater must have started by now:
            // the blast may have been lost entirely.
            BidderPhase::AtLocation
                if now >= self.last_activity + self.setup.travel_budget + self.setup.params.timeout_steps =>
            {
                self.request(ctx);
            }
            BidderPhase::Receiving => {
                if self.received.is_full() {
                    ctx.record(Event::PatchApplied);
                    ctx.send_signal(Signal::Complete, Some(UPDATER_ID));
                    ctx.record(Event::CompleteSent);
                    ctx.move_to(self.home);
                    self.phase = BidderPhase::Done;
                } else if burst_ended || now >= self.last_activity + self.setup.params.request_timer_steps {
                    self.request(ctx);
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Controller of one agent under this strategy.
#[derive(Debug, Clone)]
pub enum SoulAgent {
    Updater(SoulUpdater),
    Drone(SoulDrone),
    Passive,
}

impl SoulAgent {
    pub fn drone(&self) -> Option<&SoulDrone> {
        match self {
            SoulAgent::Drone(d) => Some(d),
            _ => None,
        }
    }

    pub fn updater(&self) -> Option<&SoulUpdater> {
        match self {
            SoulAgent::Updater(u) => Some(u),
            _ => None,
        }
    }
}

impl Controller for SoulAgent {
    fn control_step(&mut self, ctx: &mut StepContext<'_>) -> Result<(), ProtocolFault> {
        match self {
            SoulAgent::Updater(u) => u.control_step(ctx),
            SoulAgent::Drone(d) => d.control_step(ctx),
            SoulAgent::Passive => Ok(()),
        }
    }

    fn is_idle(&self) -> bool {
        match self {
            SoulAgent::Updater(u) => u.phase == AuctioneerPhase::Converged,
            SoulAgent::Drone(d) => d.is_idle(),
            SoulAgent::Passive => true,
        }
    }
}

/// Builds one controller per agent, indexed like `agents`.
pub fn build_agents(agents: &[AgentDescriptor], setup: RunSetup) -> Vec<SoulAgent> {
    let compatible: Vec<AgentId> = agents
        .iter()
        .filter(|a| a.needs_update && a.id != UPDATER_ID)
        .map(|a| a.id)
        .collect();
    let groups = partition_groups(&compatible, setup.params.group_size);
    let mut out: Vec<SoulAgent> = agents
        .iter()
        .map(|_| SoulAgent::Passive)
        .collect();
    let center = agents[UPDATER_ID as usize].position;
    for (g, members) in groups.iter().enumerate() {
        for (k, &id) in members.iter().enumerate() {
            let slot = center + formation_offset(k, setup.comm_range);
            out[id as usize] = SoulAgent::Drone(SoulDrone::new(setup, g as u32, slot, agents[id as usize].position));
        }
    }
    out[UPDATER_ID as usize] = SoulAgent::Updater(SoulUpdater::new(setup, groups));
    out
}
