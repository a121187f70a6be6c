//! One measured run of a strategy in a freshly placed swarm.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::proto::gossip::{self, GossipAgent};
use crate::proto::soul::{self, SoulAgent};
use crate::proto::swarmsync::{self, gathered_connected, partition_subswarms, PlanError, SubSwarmPlan, SyncAgent};
use crate::proto::{ProtocolParams, RunSetup, Strategy};
use crate::sim::{
    place_swarm_with, AgentDescriptor, AgentId, ChannelTotals, ConfigError, Event, EventRecord, FrameLogEntry,
    PlacementError, StepError, TypeMix, World, WorldConfig,
};

/// Steps after which a run is abandoned as non-convergent.
pub const DEFAULT_STEP_CAP: u64 = 200_000;

/// Packets of a full-model update.
pub const DEFAULT_PATCH_PACKETS: u32 = 240;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub strategy: Strategy,
    /// Drones in the swarm, the Updater not included.
    pub swarm_size: usize,
    /// Packet loss probability. Overrides `world.failure_rate`.
    pub failure_rate: f64,
    pub patch_packets: u32,
    pub repetitions: u32,
    pub seed_base: u64,
    /// Radio and motion settings. `seed` and `failure_rate` are set per run.
    pub world: WorldConfig,
    pub params: ProtocolParams,
    pub mix: TypeMix,
    pub step_cap: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            strategy: Strategy::SwarmSync,
            swarm_size: 20,
            failure_rate: 0.0,
            patch_packets: DEFAULT_PATCH_PACKETS,
            repetitions: 10,
            seed_base: 0,
            world: WorldConfig::default(),
            params: ProtocolParams::default(),
            mix: TypeMix::default(),
            step_cap: DEFAULT_STEP_CAP,
        }
    }
}

impl ScenarioConfig {
    pub fn seed_for(&self, rep: u32) -> u64 {
        self.seed_base.wrapping_add(u64::from(rep))
    }

    /// World settings of repetition `rep`.
    pub fn world_for(&self, rep: u32) -> WorldConfig {
        WorldConfig {
            failure_rate: self.failure_rate,
            seed: self.seed_for(rep),
            ..self.world.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.swarm_size == 0 {
            return Err(ScenarioError::Invalid("swarm_size must be positive"));
        }
        if self.repetitions == 0 {
            return Err(ScenarioError::Invalid("repetitions must be at least 1"));
        }
        if self.params.max_concurrent == 0 || self.params.group_size == 0 {
            return Err(ScenarioError::Invalid("max_concurrent and group_size must be positive"));
        }
        if self.params.group_size > crate::sim::FORMATION_CAPACITY {
            return Err(ScenarioError::Invalid("group_size exceeds the 18 slots around the Updater"));
        }
        self.world_for(0).validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Converged,
    /// The update was aborted after the Updater was lost.
    Aborted,
    /// Nothing left to happen, yet convergence was never declared.
    Stalled,
    StepCap,
}

/// Measurements of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub strategy: Strategy,
    pub swarm_size: usize,
    pub failure_rate: f64,
    pub patch_packets: u32,
    pub rep: u32,
    pub seed: u64,
    /// Steps from the announcement (step 0) to declared convergence; the steps
    /// run so far if the run did not converge.
    pub convergence_steps: u64,
    pub steps_per_drone: f64,
    pub overhead_bytes: u64,
    pub overhead_per_drone_bytes: f64,
    pub packet_emissions: u64,
    pub signal_emissions: u64,
    pub evictions: u64,
    pub aborts: u64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid scenario: {0}")]
    Invalid(&'static str),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("run did not converge ({outcome:?} after {} steps)", record.convergence_steps)]
    NotConverged { outcome: RunOutcome, record: Box<MetricsRecord> },
}

enum Worlds {
    SwarmSync(World<SyncAgent>, SubSwarmPlan),
    Gossip(World<GossipAgent>),
    Soul(World<SoulAgent>),
}

macro_rules! with_world {
    ($w:expr, $v:ident => $e:expr) => {
        match $w {
            Worlds::SwarmSync($v, _) => $e,
            Worlds::Gossip($v) => $e,
            Worlds::Soul($v) => $e,
        }
    };
}

/// A run in progress, steppable for inspection and fault injection.
pub struct Scenario {
    config: ScenarioConfig,
    rep: u32,
    worlds: Worlds,
    scanned: usize,
    converged_at: Option<u64>,
    abort_raised: bool,
    outcome: Option<RunOutcome>,
}

impl Scenario {
    pub fn new(config: &ScenarioConfig, rep: u32) -> Result<Self, ScenarioError> {
        config.validate()?;
        let world = config.world_for(rep);
        let n = config.swarm_size;
        let setup = RunSetup {
            params: config.params,
            packets: config.patch_packets,
            travel_budget: world.travel_budget_steps(n),
            comm_range: world.comm_range_m,
        };
        let worlds = match config.strategy {
            Strategy::SwarmSync => {
                let max = config.params.max_concurrent;
                let mut plan_error = None;
                let placed = place_swarm_with(n, config.mix, &world, |agents| match partition_subswarms(agents, max) {
                    Ok(plan) => gathered_connected(agents, &plan, world.comm_range_m),
                    Err(e) => {
                        plan_error = Some(e);
                        true
                    }
                });
                if let Some(e) = plan_error {
                    return Err(e.into());
                }
                let agents = placed?;
                let plan = partition_subswarms(&agents, max)?;
                let controllers = swarmsync::build_agents(&agents, &plan, setup);
                Worlds::SwarmSync(World::new(world, agents, controllers), plan)
            }
            Strategy::Gossip => {
                let agents = place_swarm_with(n, config.mix, &world, |_| true)?;
                let controllers = gossip::build_agents(&agents, setup);
                Worlds::Gossip(World::new(world, agents, controllers))
            }
            Strategy::Soul => {
                let agents = place_swarm_with(n, config.mix, &world, |_| true)?;
                let controllers = soul::build_agents(&agents, setup);
                Worlds::Soul(World::new(world, agents, controllers))
            }
        };
        Ok(Scenario {
            config: config.clone(),
            rep,
            worlds,
            scanned: 0,
            converged_at: None,
            abort_raised: false,
            outcome: None,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        with_world!(&self.worlds, w => w.step_count())
    }

    pub fn descriptors(&self) -> &[AgentDescriptor] {
        with_world!(&self.worlds, w => w.descriptors())
    }

    pub fn events(&self) -> &[EventRecord] {
        with_world!(&self.worlds, w => w.events())
    }

    pub fn totals(&self) -> ChannelTotals {
        with_world!(&self.worlds, w => w.totals())
    }

    pub fn agent_totals(&self, id: AgentId) -> ChannelTotals {
        with_world!(&self.worlds, w => w.agent_totals(id))
    }

    pub fn enable_frame_log(&mut self) {
        with_world!(&mut self.worlds, w => w.enable_frame_log())
    }

    pub fn frame_log(&self) -> Option<&[FrameLogEntry]> {
        with_world!(&self.worlds, w => w.frame_log())
    }

    pub fn silence_at(&mut self, id: AgentId, at: u64) {
        with_world!(&mut self.worlds, w => w.silence_at(id, at))
    }

    pub fn is_alive(&self, id: AgentId) -> bool {
        with_world!(&self.worlds, w => w.is_alive(id))
    }

    /// Step and agent that were executing if a step was interrupted.
    pub fn running(&self) -> Option<(u64, AgentId)> {
        with_world!(&self.worlds, w => w.running())
    }

    /// Sub-swarm plan of a SwarmSync run.
    pub fn plan(&self) -> Option<&SubSwarmPlan> {
        match &self.worlds {
            Worlds::SwarmSync(_, plan) => Some(plan),
            _ => None,
        }
    }

    pub fn swarmsync_world(&self) -> Option<&World<SyncAgent>> {
        match &self.worlds {
            Worlds::SwarmSync(w, _) => Some(w),
            _ => None,
        }
    }

    pub fn gossip_world(&self) -> Option<&World<GossipAgent>> {
        match &self.worlds {
            Worlds::Gossip(w) => Some(w),
            _ => None,
        }
    }

    pub fn soul_world(&self) -> Option<&World<SoulAgent>> {
        match &self.worlds {
            Worlds::Soul(w) => Some(w),
            _ => None,
        }
    }

    /// Whether drone `id` holds every packet of the patch.
    pub fn holds_patch(&self, id: AgentId) -> bool {
        match &self.worlds {
            Worlds::SwarmSync(w, _) => w.controller(id).drone().is_some_and(|d| d.applied()),
            Worlds::Gossip(w) => w.controller(id).node().is_some_and(|n| n.has_patch()),
            Worlds::Soul(w) => w.controller(id).drone().is_some_and(|d| d.received().is_full()),
        }
    }

    /// Drones that need the update, were not evicted and lack part of the patch.
    pub fn incomplete_drones(&self) -> Vec<AgentId> {
        let evicted: Vec<AgentId> = self
            .events()
            .iter()
            .filter_map(|e| match e.event {
                Event::Evicted { agent } => Some(agent),
                _ => None,
            })
            .collect();
        self.descriptors()
            .iter()
            .filter(|d| d.needs_update && !evicted.contains(&d.id) && !self.holds_patch(d.id))
            .map(|d| d.id)
            .collect()
    }

    pub fn outcome(&self) -> Option<RunOutcome> {
        self.outcome
    }

    /// Runs one step and updates the outcome. Does nothing once decided.
    pub fn step(&mut self) -> Result<Option<RunOutcome>, ScenarioError> {
        if self.outcome.is_some() {
            return Ok(self.outcome);
        }
        with_world!(&mut self.worlds, w => w.step())?;
        let events = self.events();
        let mut converged_at = self.converged_at;
        let mut abort_raised = self.abort_raised;
        for e in &events[self.scanned..] {
            match e.event {
                Event::Converged if converged_at.is_none() => converged_at = Some(e.step),
                Event::AbortRaised => abort_raised = true,
                _ => {}
            }
        }
        self.scanned = events.len();
        self.converged_at = converged_at;
        self.abort_raised = abort_raised;

        let quiescent = with_world!(&self.worlds, w => w.is_quiescent());
        self.outcome = if self.converged_at.is_some() {
            Some(RunOutcome::Converged)
        } else if quiescent {
            Some(if self.abort_raised { RunOutcome::Aborted } else { RunOutcome::Stalled })
        } else if self.step_count() >= self.config.step_cap {
            Some(RunOutcome::StepCap)
        } else {
            None
        };
        Ok(self.outcome)
    }

    /// Steps until the outcome is decided.
    pub fn run(&mut self) -> Result<RunOutcome, ScenarioError> {
        loop {
            if let Some(outcome) = self.step()? {
                return Ok(outcome);
            }
        }
    }

    pub fn record(&self) -> MetricsRecord {
        let totals = self.totals();
        let n = self.config.swarm_size as f64;
        let steps = self.converged_at.unwrap_or_else(|| self.step_count());
        let count = |pred: fn(&Event) -> bool| self.events().iter().filter(|e| pred(&e.event)).count() as u64;
        MetricsRecord {
            strategy: self.config.strategy,
            swarm_size: self.config.swarm_size,
            failure_rate: self.config.failure_rate,
            patch_packets: self.config.patch_packets,
            rep: self.rep,
            seed: self.config.seed_for(self.rep),
            convergence_steps: steps,
            steps_per_drone: steps as f64 / n,
            overhead_bytes: totals.overhead_bytes(),
            overhead_per_drone_bytes: totals.overhead_bytes() as f64 / n,
            packet_emissions: totals.packet_emissions,
            signal_emissions: totals.signal_emissions,
            evictions: count(|e| matches!(e, Event::Evicted { .. })),
            aborts: count(|e| matches!(e, Event::AbortRaised)),
            converged: self.converged_at.is_some(),
        }
    }
}

/// Runs repetition `rep` of `config` to completion.
///
/// The seed of the run is `seed_base + rep`. A run that does not converge
/// yields [`ScenarioError::NotConverged`] with the metrics gathered so far.
pub fn run_scenario(config: &ScenarioConfig, rep: u32) -> Result<MetricsRecord, ScenarioError> {
    let mut scenario = Scenario::new(config, rep)?;
    let outcome = scenario.run()?;
    let record = scenario.record();
    match outcome {
        RunOutcome::Converged => Ok(record),
        outcome => Err(ScenarioError::NotConverged {
            outcome,
            record: Box::new(record),
        }),
    }
}
