use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::mem;

use super::frame::{AgentId, Body, FloodTag, Frame, FrameKind, PacketHeader, Signal, SignalType};
use super::geometry::{move_towards, Vec2, ARRIVAL_EPSILON_M};
use super::placement::AgentDescriptor;
use super::{LatencyMode, WorldConfig};
use crate::rng::SimRng;

const CHANNEL_STREAM: u64 = 2;

/// Per-agent protocol logic, invoked once per control step.
pub trait Controller {
    fn control_step(&mut self, ctx: &mut StepContext<'_>) -> Result<(), ProtocolFault>;

    /// `true` if a step with an empty inbox would neither emit nor change
    /// state. The world skips such steps; it never skips an agent that has
    /// frames to read or has just arrived at its motion target.
    fn is_idle(&self) -> bool {
        false
    }
}

/// A controller reached a state its protocol rules out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ProtocolFault(pub &'static str);

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("agent {agent} failed at step {step}: {fault}")]
pub struct StepError {
    pub agent: AgentId,
    pub step: u64,
    pub fault: ProtocolFault,
}

/// Protocol milestones, recorded for metrics and trace tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    UpdateAnnounced,
    InPosition,
    TransferStarted { audience: u32 },
    PatchApplied,
    CompleteSent,
    Evicted { agent: AgentId },
    ReappointRaised { failed: AgentId },
    LeaderAppointed { replaces: AgentId },
    AbortRaised,
    Aborted,
    SubswarmConverged,
    GroupStarted { group: u32 },
    /// The update is complete for the whole swarm.
    Converged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventRecord {
    pub step: u64,
    pub agent: AgentId,
    pub event: Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLogEntry {
    pub step: u64,
    pub sender: AgentId,
    pub kind: FrameKind,
    pub signal: Option<SignalType>,
    pub payload_bytes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChannelTotals {
    pub packet_emissions: u64,
    pub signal_emissions: u64,
    pub packet_bytes: u64,
    pub signal_bytes: u64,
}

impl ChannelTotals {
    pub fn overhead_bytes(&self) -> u64 {
        self.packet_bytes + self.signal_bytes
    }
}

/// What a controller sees and can do during its step.
pub struct StepContext<'a> {
    id: AgentId,
    step: u64,
    position: Vec2,
    config: &'a WorldConfig,
    inbox: &'a [Frame],
    out: &'a mut Vec<Frame>,
    target: &'a mut Option<Vec2>,
    events: &'a mut Vec<EventRecord>,
    flood_seq: &'a mut u32,
}

impl<'a> StepContext<'a> {
    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn position(&self) -> Vec2 {
        self.position
    }

    pub fn config(&self) -> &WorldConfig {
        self.config
    }

    /// Frames readable this step, in emission order.
    pub fn inbox(&self) -> &'a [Frame] {
        self.inbox
    }

    pub fn send_packet(&mut self, header: PacketHeader, to: Option<AgentId>) {
        self.out.push(Frame {
            sender: self.id,
            addressed_to: to,
            payload_bytes: self.config.packet_size_bytes,
            body: Body::Packet(header),
            flood: None,
        });
    }

    /// Single-hop signal, broadcast when `to` is `None`.
    pub fn send_signal(&mut self, signal: Signal, to: Option<AgentId>) {
        self.out.push(Frame {
            sender: self.id,
            addressed_to: to,
            payload_bytes: signal.signal_type().wire_bytes(),
            body: Body::Signal(signal),
            flood: None,
        });
    }

    /// Signal relayed once by every agent that hears it.
    pub fn flood(&mut self, signal: Signal) {
        let seq = *self.flood_seq;
        *self.flood_seq += 1;
        self.out.push(Frame {
            sender: self.id,
            addressed_to: None,
            payload_bytes: signal.signal_type().wire_bytes(),
            body: Body::Signal(signal),
            flood: Some(FloodTag { origin: self.id, seq }),
        });
    }

    /// Starts (or retargets) straight-line motion; it continues on later steps
    /// until the target is reached.
    pub fn move_to(&mut self, target: Vec2) {
        *self.target = Some(target);
    }

    pub fn stop(&mut self) {
        *self.target = None;
    }

    pub fn is_moving(&self) -> bool {
        self.target.is_some()
    }

    pub fn is_at(&self, target: Vec2) -> bool {
        self.position.distance(target) <= ARRIVAL_EPSILON_M
    }

    pub fn record(&mut self, event: Event) {
        self.events.push(EventRecord {
            step: self.step,
            agent: self.id,
            event,
        });
    }
}

/// Uniform bucket grid with cells as large as the radio range.
#[derive(Debug, Default)]
struct Grid {
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl Grid {
    fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let cx = libm::floor((p.x - self.origin.x) / self.cell).max(0.0) as usize;
        let cy = libm::floor((p.y - self.origin.y) / self.cell).max(0.0) as usize;
        (cx.min(self.nx - 1), cy.min(self.ny - 1))
    }

    fn rebuild(&mut self, positions: &[Vec2], alive: &[bool], cell: f64) {
        let (mut lo, mut hi) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
        for (p, _) in positions.iter().zip(alive).filter(|(_, &a)| a) {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        if lo.x > hi.x {
            lo = Vec2::ORIGIN;
            hi = Vec2::ORIGIN;
        }
        self.origin = lo;
        self.cell = cell;
        self.nx = libm::floor((hi.x - lo.x) / cell) as usize + 1;
        self.ny = libm::floor((hi.y - lo.y) / cell) as usize + 1;
        let cells = self.nx * self.ny;
        self.starts.clear();
        self.starts.resize(cells + 1, 0);
        for (p, _) in positions.iter().zip(alive).filter(|(_, &a)| a) {
            let (cx, cy) = self.cell_of(*p);
            self.starts[cy * self.nx + cx + 1] += 1;
        }
        for c in 0..cells {
            self.starts[c + 1] += self.starts[c];
        }
        self.items.clear();
        self.items.resize(self.starts[cells] as usize, 0);
        let mut fill = self.starts.clone();
        for (i, (p, _)) in positions.iter().zip(alive).enumerate().filter(|(_, (_, &a))| a) {
            let (cx, cy) = self.cell_of(*p);
            let slot = &mut fill[cy * self.nx + cx];
            self.items[*slot as usize] = i as u32;
            *slot += 1;
        }
    }

    /// Calls `f` for every indexed agent in the 3x3 cell block around `p`.
    fn for_near(&self, p: Vec2, mut f: impl FnMut(usize)) {
        let (cx, cy) = self.cell_of(p);
        for y in cy.saturating_sub(1)..=(cy + 1).min(self.ny - 1) {
            for x in cx.saturating_sub(1)..=(cx + 1).min(self.nx - 1) {
                let c = y * self.nx + x;
                for &i in &self.items[self.starts[c] as usize..self.starts[c + 1] as usize] {
                    f(i as usize);
                }
            }
        }
    }
}

/// The simulated swarm: positions, radio and one controller per agent.
///
/// Agent ids are indices; agent 0 is conventionally the Updater.
pub struct World<C> {
    config: WorldConfig,
    step: u64,
    descriptors: Vec<AgentDescriptor>,
    positions: Vec<Vec2>,
    alive: Vec<bool>,
    controllers: Vec<C>,
    inbox: Vec<Vec<Frame>>,
    next_inbox: Vec<Vec<Frame>>,
    seen: Vec<BTreeSet<FloodTag>>,
    targets: Vec<Option<Vec2>>,
    woken: Vec<bool>,
    flood_seq: Vec<u32>,
    silences: Vec<(u64, AgentId)>,
    rng: SimRng,
    totals: ChannelTotals,
    agent_bytes: Vec<ChannelTotals>,
    events: Vec<EventRecord>,
    frame_log: Option<Vec<FrameLogEntry>>,
    grid: Grid,
    out: Vec<Frame>,
    scratch: Vec<usize>,
    running: Option<AgentId>,
}

impl<C: Controller> World<C> {
    /// `descriptors[i].id` must equal `i`; one controller per descriptor.
    pub fn new(config: WorldConfig, descriptors: Vec<AgentDescriptor>, controllers: Vec<C>) -> Self {
        assert_eq!(descriptors.len(), controllers.len(), "one controller per agent");
        assert!(
            descriptors.iter().enumerate().all(|(i, d)| d.id as usize == i),
            "agent ids must be their indices"
        );
        let n = descriptors.len();
        World {
            rng: SimRng::derive(config.seed, CHANNEL_STREAM),
            config,
            step: 0,
            positions: descriptors.iter().map(|d| d.position).collect(),
            descriptors,
            alive: vec![true; n],
            controllers,
            inbox: vec![Vec::new(); n],
            next_inbox: vec![Vec::new(); n],
            seen: vec![BTreeSet::new(); n],
            targets: vec![None; n],
            woken: vec![false; n],
            flood_seq: vec![0; n],
            silences: Vec::new(),
            totals: ChannelTotals::default(),
            agent_bytes: vec![ChannelTotals::default(); n],
            events: Vec::new(),
            frame_log: None,
            grid: Grid::default(),
            out: Vec::new(),
            scratch: Vec::new(),
            running: None,
        }
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    /// Index of the next step to run.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn descriptors(&self) -> &[AgentDescriptor] {
        &self.descriptors
    }

    pub fn position(&self, id: AgentId) -> Vec2 {
        self.positions[id as usize]
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn is_alive(&self, id: AgentId) -> bool {
        self.alive[id as usize]
    }

    pub fn controller(&self, id: AgentId) -> &C {
        &self.controllers[id as usize]
    }

    pub fn controllers(&self) -> &[C] {
        &self.controllers
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn totals(&self) -> ChannelTotals {
        self.totals
    }

    pub fn agent_totals(&self, id: AgentId) -> ChannelTotals {
        self.agent_bytes[id as usize]
    }

    /// Starts recording every emitted frame.
    pub fn enable_frame_log(&mut self) {
        self.frame_log.get_or_insert_with(Vec::new);
    }

    pub fn frame_log(&self) -> Option<&[FrameLogEntry]> {
        self.frame_log.as_deref()
    }

    /// Agent currently inside its controller, if a step was interrupted.
    pub fn running(&self) -> Option<(u64, AgentId)> {
        self.running.map(|id| (self.step, id))
    }

    /// Permanently silences `id` from the start of step `at`: it stops
    /// running, receiving, relaying and moving.
    pub fn silence_at(&mut self, id: AgentId, at: u64) {
        self.silences.push((at, id));
    }

    /// `true` when no frame awaits delivery, nobody moves and every live
    /// controller is idle.
    pub fn is_quiescent(&self) -> bool {
        (0..self.len()).all(|i| {
            !self.alive[i]
                || (self.inbox[i].is_empty()
                    && self.next_inbox[i].is_empty()
                    && self.targets[i].is_none()
                    && !self.woken[i]
                    && self.controllers[i].is_idle())
        })
    }

    /// Runs one control step.
    pub fn step(&mut self) -> Result<(), StepError> {
        let now = self.step;
        let alive = &mut self.alive;
        self.silences.retain(|&(at, id)| {
            if at <= now {
                alive[id as usize] = false;
                false
            } else {
                true
            }
        });
        self.grid.rebuild(&self.positions, &self.alive, self.config.comm_range_m);

        for i in 0..self.len() {
            if !self.alive[i] {
                self.inbox[i].clear();
                continue;
            }
            if self.inbox[i].is_empty() && !self.woken[i] && self.controllers[i].is_idle() {
                continue;
            }
            self.woken[i] = false;
            let inbox = mem::take(&mut self.inbox[i]);
            let mut out = mem::take(&mut self.out);
            out.extend(inbox.iter().filter(|f| f.flood.is_some()).map(|f| Frame {
                sender: i as AgentId,
                ..f.clone()
            }));

            self.running = Some(i as AgentId);
            let mut ctx = StepContext {
                id: i as AgentId,
                step: now,
                position: self.positions[i],
                config: &self.config,
                inbox: &inbox,
                out: &mut out,
                target: &mut self.targets[i],
                events: &mut self.events,
                flood_seq: &mut self.flood_seq[i],
            };
            self.controllers[i].control_step(&mut ctx).map_err(|fault| StepError {
                agent: i as AgentId,
                step: now,
                fault,
            })?;
            self.running = None;

            for frame in out.drain(..) {
                self.emit(i, frame);
            }
            self.out = out;
            let mut inbox = inbox;
            inbox.clear();
            debug_assert!(self.inbox[i].is_empty());
            self.inbox[i] = inbox;
        }

        let advance = self.config.step_advance_m();
        for i in 0..self.len() {
            if !self.alive[i] {
                continue;
            }
            if let Some(target) = self.targets[i] {
                let (p, arrived) = move_towards(self.positions[i], target, advance);
                self.positions[i] = p;
                if arrived {
                    self.targets[i] = None;
                    self.woken[i] = true;
                }
            }
        }

        self.step += 1;
        for i in 0..self.len() {
            mem::swap(&mut self.inbox[i], &mut self.next_inbox[i]);
        }
        Ok(())
    }

    fn emit(&mut self, sender: usize, frame: Frame) {
        let bytes = u64::from(frame.payload_bytes);
        let kind = frame.kind();
        for t in [&mut self.totals, &mut self.agent_bytes[sender]] {
            match kind {
                FrameKind::Packet => {
                    t.packet_emissions += 1;
                    t.packet_bytes += bytes;
                }
                FrameKind::Signal => {
                    t.signal_emissions += 1;
                    t.signal_bytes += bytes;
                }
            }
        }
        if let Some(log) = &mut self.frame_log {
            log.push(FrameLogEntry {
                step: self.step,
                sender: sender as AgentId,
                kind,
                signal: frame.signal().map(Signal::signal_type),
                payload_bytes: frame.payload_bytes,
            });
        }
        if let Some(tag) = frame.flood {
            self.seen[sender].insert(tag);
        }

        let from = self.positions[sender];
        let r2 = self.config.comm_range_m * self.config.comm_range_m;
        match frame.addressed_to {
            Some(to) => {
                let j = to as usize;
                if j != sender && j < self.len() && self.alive[j] && from.distance_sq(self.positions[j]) <= r2 {
                    self.deliver(sender, j, &frame);
                }
            }
            None => {
                let mut receivers = mem::take(&mut self.scratch);
                self.grid.for_near(from, |j| receivers.push(j));
                for &j in &receivers {
                    if j != sender && self.alive[j] && from.distance_sq(self.positions[j]) <= r2 {
                        self.deliver(sender, j, &frame);
                    }
                }
                receivers.clear();
                self.scratch = receivers;
            }
        }
    }

    fn deliver(&mut self, sender: usize, receiver: usize, frame: &Frame) {
        if frame.kind() == FrameKind::Packet && self.config.failure_rate > 0.0 && self.rng.chance(self.config.failure_rate) {
            return;
        }
        if let Some(tag) = frame.flood {
            if !self.seen[receiver].insert(tag) {
                return;
            }
        }
        let same_step = self.config.latency_mode == LatencyMode::Optimistic && receiver > sender;
        let queue = if same_step { &mut self.inbox[receiver] } else { &mut self.next_inbox[receiver] };
        queue.push(frame.clone());
    }
}
