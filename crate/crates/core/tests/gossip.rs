use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use swarmupdate_core::proto::gossip::{self, GossipAgent};
use swarmupdate_core::proto::{ProtocolParams, RunSetup};
use swarmupdate_core::sim::{AgentDescriptor, Event, FrameKind, UavType, Vec2, World, WorldConfig, UPDATER_ID};
use swarmupdate_core::{ScenarioConfig, Strategy};

fn setup(packets: u32) -> RunSetup {
    RunSetup {
        params: ProtocolParams::default(),
        packets,
        travel_budget: 50,
        comm_range: 3.0,
    }
}

fn pair(packets: u32, failure_rate: f64, seed: u64) -> World<GossipAgent> {
    let agents = vec![
        AgentDescriptor {
            id: UPDATER_ID,
            uav_type: UavType::Updater,
            position: Vec2::ORIGIN,
            needs_update: false,
        },
        AgentDescriptor {
            id: 1,
            uav_type: UavType::Eyebot,
            position: Vec2::new(1.0, 0.0),
            needs_update: true,
        },
    ];
    let controllers = gossip::build_agents(&agents, setup(packets));
    let config = WorldConfig {
        failure_rate,
        seed,
        ..WorldConfig::default()
    };
    let mut world = World::new(config, agents, controllers);
    world.enable_frame_log();
    world
}

fn completed(world: &World<GossipAgent>) -> bool {
    world.controller(1).node().unwrap().has_patch()
}

#[test]
fn lossless_receiver_fills_then_rebroadcasts() {
    let mut world = pair(4, 0.0, 1);
    for _ in 0..5 {
        world.step().unwrap();
    }
    // Packets sent at steps 0..=3 are read at steps 1..=4.
    let applied = world.events().iter().find(|e| e.event == Event::PatchApplied).unwrap();
    assert_eq!((applied.agent, applied.step), (1, 4));
    assert!(world.controller(1).node().unwrap().is_rebroadcasting());
    assert_eq!(world.agent_totals(1).packet_emissions, 0);
    world.step().unwrap();
    assert_eq!(world.agent_totals(1).packet_emissions, 1);
}

#[test]
fn quiescence_fires_after_exactly_twenty_quiet_steps() {
    let mut world = pair(4, 0.0, 1);
    while !world.controller(0).node().unwrap().is_done() {
        world.step().unwrap();
        assert!(world.step_count() < 200);
    }
    let log = world.frame_log().unwrap();
    let receiver_packets: Vec<u64> = log
        .iter()
        .filter(|f| f.sender == 1 && f.kind == FrameKind::Packet)
        .map(|f| f.step)
        .collect();
    // First pass: steps 5..=8. No request follows, so the timer fires 20 steps
    // after the pass ended and the node keeps cycling until then.
    let pass_end = receiver_packets[3];
    assert_eq!(pass_end, 8);
    let reported = world
        .events()
        .iter()
        .find(|e| e.agent == 1 && e.event == Event::SubswarmConverged)
        .unwrap();
    assert_eq!(reported.step, pass_end + 20);
    assert_eq!(*receiver_packets.last().unwrap(), pass_end + 19);
}

/// Full passes the sender needs before every one of `packets` independent
/// deliveries has succeeded once, minus the first pass.
fn oracle_rounds(packets: u32, failure_rate: f64, trials: u32) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    let mut total = 0u64;
    for _ in 0..trials {
        let mut worst = 0u64;
        for _ in 0..packets {
            let mut tries = 1u64;
            while (rng.next_u64() as f64 / u64::MAX as f64) < failure_rate {
                tries += 1;
            }
            worst = worst.max(tries);
        }
        total += worst - 1;
    }
    total as f64 / f64::from(trials)
}

#[test]
fn retransmission_rounds_follow_geometric_trials() {
    const PACKETS: u32 = 4;
    const SEEDS: u64 = 1000;
    let mut total = 0u64;
    for seed in 0..SEEDS {
        let mut world = pair(PACKETS, 0.5, seed);
        while !completed(&world) {
            world.step().unwrap();
            assert!(world.step_count() < 10_000);
        }
        let read_at = world.step_count() - 1;
        let sent_before = world
            .frame_log()
            .unwrap()
            .iter()
            .filter(|f| f.sender == 0 && f.kind == FrameKind::Packet && f.step < read_at)
            .count() as u64;
        total += sent_before.div_ceil(u64::from(PACKETS)) - 1;
    }
    let simulated = total as f64 / SEEDS as f64;
    let expected = oracle_rounds(PACKETS, 0.5, 100_000);
    // Closed form: E[max] = sum over k >= 0 of 1 - (1 - 2^-k)^4.
    let closed: f64 = (0..64).map(|k| 1.0 - (1.0 - 0.5f64.powi(k)).powi(4)).sum::<f64>() - 1.0;
    assert!((expected - closed).abs() < 0.02, "oracle {expected}, closed form {closed}");
    assert!((simulated - expected).abs() <= 1.0, "simulated {simulated}, oracle {expected}");
    assert!((simulated - expected).abs() <= 0.2, "simulated {simulated}, oracle {expected}");
}

#[test]
fn uninterested_drones_only_relay_signals() {
    let config = ScenarioConfig {
        strategy: Strategy::Gossip,
        swarm_size: 20,
        failure_rate: 0.25,
        seed_base: 4,
        ..ScenarioConfig::default()
    };
    let mut s = swarmupdate_core::Scenario::new(&config, 0).unwrap();
    assert_eq!(s.run().unwrap(), swarmupdate_core::RunOutcome::Converged);
    let mut relayed = 0;
    for d in s.descriptors().iter().filter(|d| d.uav_type == UavType::Footbot) {
        let t = s.agent_totals(d.id);
        assert_eq!(t.packet_bytes, 0);
        relayed += t.signal_bytes;
    }
    assert!(relayed > 0);
    assert!(s.incomplete_drones().is_empty());
}

#[test]
fn infection_never_recedes() {
    let config = ScenarioConfig {
        strategy: Strategy::Gossip,
        swarm_size: 60,
        failure_rate: 0.5,
        seed_base: 9,
        ..ScenarioConfig::default()
    };
    let mut s = swarmupdate_core::Scenario::new(&config, 0).unwrap();
    let mut infected = 0;
    while s.step().unwrap().is_none() {
        let now = s.descriptors().iter().filter(|d| d.needs_update && s.holds_patch(d.id)).count();
        assert!(now >= infected);
        infected = now;
    }
    let infected = s.descriptors().iter().filter(|d| d.needs_update && s.holds_patch(d.id)).count();
    assert_eq!(infected, s.descriptors().iter().filter(|d| d.needs_update).count());
}
