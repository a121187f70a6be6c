use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::frame::AgentId;
use super::geometry::Vec2;
use super::WorldConfig;
use crate::rng::SimRng;

pub const UPDATER_ID: AgentId = 0;
/// Placement gives up after this many rejected samples.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;
const PLACEMENT_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UavType {
    Updater,
    Footbot,
    Eyebot,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentDescriptor {
    pub id: AgentId,
    pub uav_type: UavType,
    pub position: Vec2,
    pub needs_update: bool,
}

/// Relative share of each drone type and which type the update targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TypeMix {
    pub footbots: u32,
    pub eyebots: u32,
    pub update_target: UavType,
}

impl Default for TypeMix {
    fn default() -> Self {
        TypeMix {
            footbots: 1,
            eyebots: 1,
            update_target: UavType::Eyebot,
        }
    }
}

impl TypeMix {
    /// Number of eyebots among `n` drones, rounding half up.
    pub fn eyebot_count(&self, n: usize) -> usize {
        let total = (self.footbots + self.eyebots) as usize;
        if total == 0 {
            return 0;
        }
        (n * self.eyebots as usize + total / 2) / total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PlacementError {
    #[error("a swarm needs at least one drone")]
    EmptySwarm,
    #[error("no connected placement of {n} drones in a {side:.1} m arena after {attempts} attempts; use a larger communication range or a smaller arena")]
    Unreachable { n: usize, side: f64, attempts: usize },
}

/// Places the Updater at the origin and `n` drones uniformly in the arena.
///
/// Samples are redrawn until both the whole communication graph and the graph
/// restricted to the Updater plus the drones needing the update are connected.
pub fn place_swarm(n: usize, mix: TypeMix, config: &WorldConfig) -> Result<Vec<AgentDescriptor>, PlacementError> {
    place_swarm_with(n, mix, config, |_| true)
}

/// [`place_swarm`] with an extra acceptance test on each connected sample.
pub fn place_swarm_with(
    n: usize,
    mix: TypeMix,
    config: &WorldConfig,
    mut accept: impl FnMut(&[AgentDescriptor]) -> bool,
) -> Result<Vec<AgentDescriptor>, PlacementError> {
    if n == 0 {
        return Err(PlacementError::EmptySwarm);
    }
    let mut rng = SimRng::derive(config.seed, PLACEMENT_STREAM);
    let eyebots = mix.eyebot_count(n);
    let mut types: Vec<UavType> = (0..n)
        .map(|i| if i < eyebots { UavType::Eyebot } else { UavType::Footbot })
        .collect();
    rng.shuffle(&mut types);

    let side = config.arena_side_for(n);
    let half = side / 2.0;
    let mut agents: Vec<AgentDescriptor> = Vec::with_capacity(n + 1);
    agents.push(AgentDescriptor {
        id: UPDATER_ID,
        uav_type: UavType::Updater,
        position: Vec2::ORIGIN,
        needs_update: false,
    });
    for (i, &t) in types.iter().enumerate() {
        agents.push(AgentDescriptor {
            id: i as AgentId + 1,
            uav_type: t,
            position: Vec2::ORIGIN,
            needs_update: t == mix.update_target,
        });
    }

    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        for a in agents.iter_mut().skip(1) {
            a.position = Vec2::new(rng.uniform(-half, half), rng.uniform(-half, half));
        }
        let all: Vec<Vec2> = agents.iter().map(|a| a.position).collect();
        let targeted: Vec<Vec2> = agents
            .iter()
            .filter(|a| a.id == UPDATER_ID || a.needs_update)
            .map(|a| a.position)
            .collect();
        if is_connected(&all, config.comm_range_m) && is_connected(&targeted, config.comm_range_m) && accept(&agents) {
            return Ok(agents);
        }
    }
    Err(PlacementError::Unreachable {
        n,
        side,
        attempts: MAX_PLACEMENT_ATTEMPTS,
    })
}

/// Whether the disk graph with edges at distance `<= range` is connected.
pub fn is_connected(points: &[Vec2], range: f64) -> bool {
    if points.is_empty() {
        return true;
    }
    let r2 = range * range;
    let mut seen = vec![false; points.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(i) = queue.pop_front() {
        for j in 0..points.len() {
            if !seen[j] && points[i].distance_sq(points[j]) <= r2 {
                seen[j] = true;
                reached += 1;
                queue.push_back(j);
            }
        }
    }
    reached == points.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_drone_is_in_range() {
        let agents = place_swarm(1, TypeMix::default(), &WorldConfig::default()).unwrap();
        assert_eq!(agents.len(), 2);
        assert_eq!(agents[0].position, Vec2::ORIGIN);
        assert!(agents[1].position.norm() <= 3.0);
        assert_eq!(agents[1].uav_type, UavType::Eyebot);
    }

    #[test]
    fn mix_is_exact() {
        let agents = place_swarm(20, TypeMix::default(), &WorldConfig::default()).unwrap();
        let eyebots = agents.iter().filter(|a| a.uav_type == UavType::Eyebot).count();
        assert_eq!(eyebots, 10);
        assert!(agents.iter().all(|a| a.needs_update == (a.uav_type == UavType::Eyebot)));
    }

    #[test]
    fn tiny_range_is_unreachable() {
        let config = WorldConfig {
            comm_range_m: 0.01,
            arena_side_m: Some(100.0),
            ..WorldConfig::default()
        };
        assert!(matches!(
            place_swarm(5, TypeMix::default(), &config),
            Err(PlacementError::Unreachable { n: 5, .. })
        ));
    }
}
