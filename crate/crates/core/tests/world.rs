use std::cell::RefCell;
use std::rc::Rc;

use swarmupdate_core::sim::{
    AgentDescriptor, Controller, FrameKind, LatencyMode, PacketHeader, ProtocolFault, Signal, StepContext, UavType,
    Vec2, World, WorldConfig,
};

type Script = Box<dyn FnMut(&mut StepContext<'_>)>;

struct Scripted {
    script: Script,
    idle: bool,
}

impl Controller for Scripted {
    fn control_step(&mut self, ctx: &mut StepContext<'_>) -> Result<(), ProtocolFault> {
        (self.script)(ctx);
        Ok(())
    }

    fn is_idle(&self) -> bool {
        self.idle
    }
}

fn agent(id: u32, x: f64) -> AgentDescriptor {
    AgentDescriptor {
        id,
        uav_type: if id == 0 { UavType::Updater } else { UavType::Eyebot },
        position: Vec2::new(x, 0.0),
        needs_update: id != 0,
    }
}

fn scripted(script: impl FnMut(&mut StepContext<'_>) + 'static) -> Scripted {
    Scripted {
        script: Box::new(script),
        idle: false,
    }
}

fn silent() -> Scripted {
    scripted(|_| {})
}

/// Records `(step, sender)` of every frame an agent reads.
fn listener(log: Rc<RefCell<Vec<(u64, u32)>>>) -> Scripted {
    scripted(move |ctx| {
        for f in ctx.inbox() {
            log.borrow_mut().push((ctx.step(), f.sender));
        }
    })
}

fn once_at_zero(signal: Signal) -> Scripted {
    scripted(move |ctx| {
        if ctx.step() == 0 {
            ctx.send_signal(signal.clone(), None);
        }
    })
}

#[test]
fn idle_world_is_quiescent() {
    let config = WorldConfig::default();
    let controllers = vec![
        Scripted {
            script: Box::new(|_| panic!("idle agents are not stepped")),
            idle: true,
        },
        Scripted {
            script: Box::new(|_| panic!("idle agents are not stepped")),
            idle: true,
        },
    ];
    let mut world = World::new(config, vec![agent(0, 0.0), agent(1, 1.0)], controllers);
    assert!(world.is_quiescent());
    for _ in 0..5 {
        world.step().unwrap();
    }
    assert_eq!(world.totals().overhead_bytes(), 0);
    assert_eq!(world.step_count(), 5);
}

fn read_step(mode: LatencyMode, sender: u32) -> u64 {
    let log = Rc::new(RefCell::new(Vec::new()));
    let config = WorldConfig {
        latency_mode: mode,
        ..WorldConfig::default()
    };
    let (c0, c1) = if sender == 0 {
        (once_at_zero(Signal::InPosition), listener(log.clone()))
    } else {
        (listener(log.clone()), once_at_zero(Signal::InPosition))
    };
    let mut world = World::new(config, vec![agent(0, 0.0), agent(1, 1.0)], vec![c0, c1]);
    for _ in 0..4 {
        world.step().unwrap();
    }
    let log = log.borrow();
    assert_eq!(log.len(), 1);
    log[0].0
}

#[test]
fn argos_latency_delays_every_frame_by_one_step() {
    assert_eq!(read_step(LatencyMode::ArgosFaithful, 0), 1);
    assert_eq!(read_step(LatencyMode::ArgosFaithful, 1), 1);
}

#[test]
fn optimistic_latency_delivers_to_later_agents_in_the_same_step() {
    assert_eq!(read_step(LatencyMode::Optimistic, 0), 0);
    // Agent 0 has already run when agent 1 sends.
    assert_eq!(read_step(LatencyMode::Optimistic, 1), 1);
}

#[test]
fn packet_loss_matches_failure_rate() {
    const SENT: u32 = 20_000;
    let received = Rc::new(RefCell::new(0u32));
    let signals = Rc::new(RefCell::new(0u32));
    let config = WorldConfig {
        failure_rate: 0.25,
        seed: 99,
        ..WorldConfig::default()
    };
    let sender = scripted(|ctx| {
        if ctx.step() < u64::from(SENT) {
            ctx.send_packet(
                PacketHeader {
                    index: ctx.step() as u32,
                    count: SENT,
                    burst_left: 0,
                },
                None,
            );
            ctx.send_signal(Signal::Ack { index: 0 }, None);
        }
    });
    let (r, s) = (received.clone(), signals.clone());
    let receiver = scripted(move |ctx| {
        for f in ctx.inbox() {
            match f.kind() {
                FrameKind::Packet => *r.borrow_mut() += 1,
                FrameKind::Signal => *s.borrow_mut() += 1,
            }
        }
    });
    let mut world = World::new(config, vec![agent(0, 0.0), agent(1, 2.0)], vec![sender, receiver]);
    for _ in 0..=SENT {
        world.step().unwrap();
    }
    let loss = 1.0 - f64::from(*received.borrow()) / f64::from(SENT);
    assert!((loss - 0.25).abs() <= 0.02, "observed loss {loss}");
    assert_eq!(*signals.borrow(), SENT, "signals are never lost");
    assert_eq!(world.totals().packet_emissions, u64::from(SENT));
}

#[test]
fn range_is_inclusive_and_sharp() {
    let log = Rc::new(RefCell::new(Vec::new()));
    let config = WorldConfig::default();
    let mut world = World::new(
        config,
        vec![agent(0, 0.0), agent(1, 3.0), agent(2, -3.01)],
        vec![once_at_zero(Signal::Complete), listener(log.clone()), listener(log.clone())],
    );
    for _ in 0..3 {
        world.step().unwrap();
    }
    assert_eq!(*log.borrow(), vec![(1, 0)]);
}

#[test]
fn addressed_frames_reach_only_the_addressee() {
    let log1 = Rc::new(RefCell::new(Vec::new()));
    let log2 = Rc::new(RefCell::new(Vec::new()));
    let sender = scripted(|ctx| {
        if ctx.step() == 0 {
            ctx.send_signal(Signal::Ack { index: 3 }, Some(2));
        }
    });
    let mut world = World::new(
        WorldConfig::default(),
        vec![agent(0, 0.0), agent(1, 1.0), agent(2, 2.0)],
        vec![sender, listener(log1.clone()), listener(log2.clone())],
    );
    world.step().unwrap();
    world.step().unwrap();
    assert!(log1.borrow().is_empty());
    assert_eq!(log2.borrow().len(), 1);
}

#[test]
fn floods_cross_a_chain_with_one_relay_each() {
    let log = Rc::new(RefCell::new(Vec::new()));
    let origin = scripted(|ctx| {
        if ctx.step() == 0 {
            ctx.flood(Signal::UpdateAvailable { packets: 3 });
        }
    });
    let mut world = World::new(
        WorldConfig::default(),
        vec![agent(0, 0.0), agent(1, 2.5), agent(2, 5.0), agent(3, 7.5)],
        vec![origin, silent(), silent(), listener(log.clone())],
    );
    world.enable_frame_log();
    for _ in 0..6 {
        world.step().unwrap();
    }
    // One hop per step under the default latency.
    assert_eq!(*log.borrow(), vec![(3, 2)]);
    // Origin plus one relay per agent; nobody relays twice.
    assert_eq!(world.totals().signal_emissions, 4);
    assert_eq!(world.totals().signal_bytes, 4 * 10);
}

#[test]
fn overhead_equals_the_frame_log() {
    let config = WorldConfig {
        failure_rate: 0.5,
        seed: 3,
        ..WorldConfig::default()
    };
    let chatter = |ctx: &mut StepContext<'_>| {
        let step = ctx.step();
        if step % 3 == 0 {
            ctx.send_packet(
                PacketHeader {
                    index: 0,
                    count: 1,
                    burst_left: 0,
                },
                None,
            );
        }
        if step % 5 == 0 {
            ctx.flood(Signal::Converged);
        }
        if step % 7 == 0 {
            ctx.send_signal(Signal::RetransmitRequest { missing: vec![1, 2].into() }, Some(0));
        }
    };
    let mut world = World::new(
        config,
        vec![agent(0, 0.0), agent(1, 1.0), agent(2, 2.0)],
        vec![scripted(chatter), scripted(chatter), scripted(chatter)],
    );
    world.enable_frame_log();
    for _ in 0..50 {
        world.step().unwrap();
    }
    let log = world.frame_log().unwrap();
    let from_log: u64 = log.iter().map(|e| u64::from(e.payload_bytes)).sum();
    assert_eq!(from_log, world.totals().overhead_bytes());
    let packets = log.iter().filter(|e| e.kind == FrameKind::Packet).count() as u64;
    assert_eq!(
        world.totals().overhead_bytes(),
        packets * 12_500 + world.totals().signal_bytes
    );
    let per_agent: u64 = (0..3).map(|i| world.agent_totals(i).overhead_bytes()).sum();
    assert_eq!(per_agent, world.totals().overhead_bytes());
}

#[test]
fn motion_never_exceeds_max_speed() {
    let target = Vec2::new(10.0, 4.0);
    let mover = scripted(move |ctx| {
        if ctx.step() == 0 {
            ctx.move_to(target);
        }
    });
    let mut world = World::new(WorldConfig::default(), vec![agent(0, 0.0), agent(1, 0.0)], vec![silent(), mover]);
    let mut last = world.position(1);
    let mut steps = 0;
    while world.position(1).distance(target) > 1e-9 {
        world.step().unwrap();
        let p = world.position(1);
        assert!(p.distance(last) <= 0.1 + 1e-12);
        last = p;
        steps += 1;
        assert!(steps < 1000);
    }
    // ceil(|(10, 4)| / 0.1) steps.
    assert_eq!(steps, (Vec2::new(10.0, 4.0).norm() / 0.1).ceil() as u32);
}

#[test]
fn silenced_agents_neither_run_nor_receive() {
    let log = Rc::new(RefCell::new(Vec::new()));
    let chatter = scripted(|ctx| ctx.send_signal(Signal::InPosition, None));
    let mut world = World::new(
        WorldConfig::default(),
        vec![agent(0, 0.0), agent(1, 1.0)],
        vec![chatter, listener(log.clone())],
    );
    world.silence_at(1, 3);
    for _ in 0..10 {
        world.step().unwrap();
    }
    assert_eq!(log.borrow().iter().map(|e| e.0).collect::<Vec<_>>(), vec![1, 2]);
    assert!(!world.is_alive(1));
}

#[test]
fn runs_are_reproducible() {
    let run = |seed| {
        let config = WorldConfig {
            failure_rate: 0.5,
            seed,
            ..WorldConfig::default()
        };
        let count = Rc::new(RefCell::new(Vec::new()));
        let sender = scripted(|ctx| {
            ctx.send_packet(
                PacketHeader {
                    index: ctx.step() as u32,
                    count: 100,
                    burst_left: 0,
                },
                None,
            )
        });
        let mut world = World::new(
            config,
            vec![agent(0, 0.0), agent(1, 1.0), agent(2, 2.0)],
            vec![sender, listener(count.clone()), listener(count.clone())],
        );
        for _ in 0..100 {
            world.step().unwrap();
        }
        let v = count.borrow().clone();
        v
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
}
