use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use super::plan::SubSwarmPlan;
use crate::proto::{Poll, ReliableSender, RunSetup};
use crate::sim::{AgentId, Event, ProtocolFault, Signal, StepContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UnitState {
    /// Its representative still has to receive the patch from the Updater.
    Pending,
    /// The representative holds the patch and distributes it.
    Served,
    Done,
    Abandoned,
}

/// A sub-swarm, or a single drone in direct mode.
#[derive(Debug, Clone)]
struct Unit {
    /// Sorted member ids; the representative is the lowest member not known
    /// to have failed.
    members: Vec<AgentId>,
    rep: AgentId,
    state: UnitState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdaterPhase {
    Announce,
    /// Waiting until every initial representative is in position.
    Gather,
    Transfer,
    Converged,
    Aborted,
}

/// The Updater: announces the update, waits for the leaders to surround it,
/// streams the patch to them with stop-and-wait and collects their sub-swarms'
/// convergence. In direct mode it serves the drones itself.
#[derive(Debug, Clone)]
pub struct SyncUpdater {
    setup: RunSetup,
    direct: bool,
    units: Vec<Unit>,
    unit_of: BTreeMap<AgentId, usize>,
    phase: UpdaterPhase,
    ready: BTreeSet<AgentId>,
    awaiting: BTreeMap<AgentId, u64>,
    failed: BTreeSet<AgentId>,
    session: Option<ReliableSender>,
}

impl SyncUpdater {
    pub fn new(setup: RunSetup, plan: &SubSwarmPlan) -> Self {
        let direct = !plan.direct.is_empty();
        let units: Vec<Unit> = if direct {
            plan.direct
                .iter()
                .map(|&id| Unit {
                    members: vec![id],
                    rep: id,
                    state: UnitState::Pending,
                })
                .collect()
        } else {
            plan.subswarms
                .iter()
                .map(|s| {
                    let mut members: Vec<AgentId> = s.members().collect();
                    members.sort_unstable();
                    Unit {
                        members,
                        rep: s.leader,
                        state: UnitState::Pending,
                    }
                })
                .collect()
        };
        let unit_of = units
            .iter()
            .enumerate()
            .flat_map(|(u, unit)| unit.members.iter().map(move |&m| (m, u)))
            .collect();
        SyncUpdater {
            setup,
            direct,
            units,
            unit_of,
            phase: UpdaterPhase::Announce,
            ready: BTreeSet::new(),
            awaiting: BTreeMap::new(),
            failed: BTreeSet::new(),
            session: None,
        }
    }

    pub fn phase(&self) -> UpdaterPhase {
        self.phase
    }

    pub fn is_converged(&self) -> bool {
        self.phase == UpdaterPhase::Converged
    }

    /// Current representative (leader, or the drone itself in direct mode) of
    /// every unit that is still in play.
    pub fn representatives(&self) -> Vec<AgentId> {
        self.units
            .iter()
            .filter(|u| u.state != UnitState::Abandoned)
            .map(|u| u.rep)
            .collect()
    }

    pub(super) fn is_idle(&self) -> bool {
        matches!(self.phase, UpdaterPhase::Converged | UpdaterPhase::Aborted)
    }

    pub(super) fn control_step(&mut self, ctx: &mut StepContext<'_>) -> Result<(), ProtocolFault> {
        let now = ctx.step();
        match self.phase {
            UpdaterPhase::Converged | UpdaterPhase::Aborted => return Ok(()),
            UpdaterPhase::Announce => {
                ctx.flood(Signal::UpdateAvailable {
                    packets: self.setup.packets,
                });
                ctx.record(Event::UpdateAnnounced);
                if self.setup.packets == 0 {
                    self.units.iter_mut().for_each(|u| u.state = UnitState::Done);
                }
                let deadline = now + self.setup.travel_budget + self.setup.params.timeout_steps;
                self.awaiting = self
                    .units
                    .iter()
                    .filter(|u| u.state == UnitState::Pending)
                    .map(|u| (u.rep, deadline))
                    .collect();
                self.phase = UpdaterPhase::Gather;
                return self.check_converged(ctx);
            }
            UpdaterPhase::Gather | UpdaterPhase::Transfer => {}
        }

        for frame in ctx.inbox() {
            let Some(signal) = frame.signal() else { continue };
            match *signal {
                Signal::InPosition => {
                    let s = frame.sender;
                    if let Some(&u) = self.unit_of.get(&s) {
                        let unit = &mut self.units[u];
                        if unit.rep == s && matches!(unit.state, UnitState::Pending | UnitState::Served) {
                            unit.state = UnitState::Pending;
                            self.awaiting.remove(&s);
                            self.ready.insert(s);
                        }
                    }
                }
                Signal::Ack { index } => {
                    if let Some(session) = &mut self.session {
                        session.on_ack(frame.sender, index);
                    }
                }
                Signal::Converged if !self.direct => self.unit_finished(frame.origin()),
                Signal::Complete if self.direct => self.unit_finished(frame.sender),
                Signal::ReappointLeader { failed } if frame.origin() != ctx.id() => {
                    self.replace(failed, now);
                }
                Signal::Abort => {
                    ctx.record(Event::Aborted);
                    self.phase = UpdaterPhase::Aborted;
                    self.session = None;
                    return Ok(());
                }
                _ => {}
            }
        }

        let expired: Vec<AgentId> = self.awaiting.iter().filter(|(_, &d)| d <= now).map(|(&id, _)| id).collect();
        for rep in expired {
            self.timed_out(rep, ctx);
        }

        if self.phase == UpdaterPhase::Gather && self.awaiting.is_empty() {
            self.phase = UpdaterPhase::Transfer;
        }
        if self.phase == UpdaterPhase::Transfer {
            self.drive_session(ctx)?;
        }
        self.check_converged(ctx)
    }

    fn drive_session(&mut self, ctx: &mut StepContext<'_>) -> Result<(), ProtocolFault> {
        let now = ctx.step();
        if !self.ready.is_empty() {
            // Newcomers restart the transfer from the first packet together with
            // everyone still receiving.
            let mut audience: Vec<AgentId> = self.session.take().map(|s| s.audience().to_vec()).unwrap_or_default();
            audience.extend(core::mem::take(&mut self.ready));
            ctx.record(Event::TransferStarted {
                audience: audience.len() as u32,
            });
            self.session = Some(self.new_session(audience, now));
        }
        for _ in 0..=self.units.len() {
            let Some(session) = &mut self.session else { return Ok(()) };
            match session.poll(ctx) {
                Poll::Sent(_) => return Ok(()),
                Poll::Done => {
                    for rep in session.audience().to_vec() {
                        if let Some(&u) = self.unit_of.get(&rep) {
                            if self.units[u].rep == rep && self.units[u].state == UnitState::Pending {
                                self.units[u].state = UnitState::Served;
                            }
                        }
                    }
                    self.session = None;
                    return Ok(());
                }
                Poll::TimedOut(missing) => {
                    for rep in missing {
                        self.timed_out(rep, ctx);
                    }
                    if !self.direct {
                        // Restart for the leaders that remain.
                        if let Some(old) = self.session.take() {
                            let audience = old.audience().to_vec();
                            self.session = Some(self.new_session(audience, now));
                        }
                    }
                }
            }
        }
        Err(ProtocolFault("transfer session did not settle"))
    }

    fn new_session(&self, audience: Vec<AgentId>, now: u64) -> ReliableSender {
        ReliableSender::new(
            audience,
            self.setup.packets,
            self.setup.params.timeout_steps,
            now,
            0,
        )
    }

    fn unit_finished(&mut self, member: AgentId) {
        if let Some(&u) = self.unit_of.get(&member) {
            if self.units[u].state != UnitState::Abandoned {
                self.units[u].state = UnitState::Done;
                let rep = self.units[u].rep;
                self.awaiting.remove(&rep);
                self.ready.remove(&rep);
                if let Some(s) = &mut self.session {
                    s.remove(rep);
                }
            }
        }
    }

    /// A representative missed its deadline: evict it (direct mode) or
    /// appoint the next member as leader.
    fn timed_out(&mut self, rep: AgentId, ctx: &mut StepContext<'_>) {
        self.awaiting.remove(&rep);
        self.ready.remove(&rep);
        if let Some(s) = &mut self.session {
            s.remove(rep);
        }
        let Some(&u) = self.unit_of.get(&rep) else { return };
        if self.units[u].rep != rep || matches!(self.units[u].state, UnitState::Done | UnitState::Abandoned) {
            return;
        }
        if self.direct {
            ctx.record(Event::Evicted { agent: rep });
            self.units[u].state = UnitState::Abandoned;
            return;
        }
        ctx.record(Event::ReappointRaised { failed: rep });
        ctx.flood(Signal::ReappointLeader { failed: rep });
        self.replace(rep, ctx.step());
    }

    fn replace(&mut self, failed: AgentId, now: u64) {
        if !self.failed.insert(failed) {
            return;
        }
        self.awaiting.remove(&failed);
        self.ready.remove(&failed);
        if let Some(s) = &mut self.session {
            s.remove(failed);
        }
        let Some(&u) = self.unit_of.get(&failed) else { return };
        let unit = &mut self.units[u];
        if unit.rep != failed || matches!(unit.state, UnitState::Done | UnitState::Abandoned) {
            return;
        }
        match unit.members.iter().copied().find(|m| !self.failed.contains(m)) {
            Some(next) => {
                unit.rep = next;
                if unit.state == UnitState::Pending {
                    self.awaiting
                        .insert(next, now + self.setup.travel_budget + self.setup.params.timeout_steps);
                }
            }
            None => unit.state = UnitState::Abandoned,
        }
    }

    fn check_converged(&mut self, ctx: &mut StepContext<'_>) -> Result<(), ProtocolFault> {
        if self
            .units
            .iter()
            .all(|u| matches!(u.state, UnitState::Done | UnitState::Abandoned))
        {
            ctx.record(Event::Converged);
            self.phase = UpdaterPhase::Converged;
            self.session = None;
        }
        Ok(())
    }
}
