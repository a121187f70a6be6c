use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::sim::{AgentDescriptor, AgentId, UavType};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubSwarm {
    pub uav_type: UavType,
    pub leader: AgentId,
    pub followers: Vec<AgentId>,
}

impl SubSwarm {
    /// Leader followed by the followers.
    pub fn members(&self) -> impl Iterator<Item = AgentId> + '_ {
        core::iter::once(self.leader).chain(self.followers.iter().copied())
    }
}

/// How the compatible drones are organized for one update.
///
/// Either `direct` lists every compatible drone (at most N of them, served by
/// the Updater acting as their leader) and `subswarms` is empty, or the other
/// way round.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubSwarmPlan {
    pub subswarms: Vec<SubSwarm>,
    pub direct: Vec<AgentId>,
}

impl SubSwarmPlan {
    pub fn is_empty(&self) -> bool {
        self.subswarms.is_empty() && self.direct.is_empty()
    }

    pub fn leader_count(&self) -> usize {
        self.subswarms.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("{compatible} compatible drones exceed the two-level capacity of {capacity}")]
    Capacity { compatible: usize, capacity: usize },
    #[error("{leaders} sub-swarm leaders exceed the {max} slots around the Updater")]
    TooManyLeaders { leaders: usize, max: usize },
    #[error("at most 18 drones fit around one transmitter, {0} requested")]
    FormationTooLarge(usize),
}

/// Splits the drones that need the update into homogeneous sub-swarms.
///
/// Per type `t`, `ceil(|S_t| / (N + 1))` sub-swarms of near-equal size are
/// formed; their leaders are the lowest ids of that type and every other drone
/// joins the nearest leader that still has room.
pub fn partition_subswarms(agents: &[AgentDescriptor], n: usize) -> Result<SubSwarmPlan, PlanError> {
    if n > crate::sim::FORMATION_CAPACITY {
        return Err(PlanError::FormationTooLarge(n));
    }
    let mut by_type: BTreeMap<UavType, Vec<&AgentDescriptor>> = BTreeMap::new();
    for a in agents.iter().filter(|a| a.needs_update && a.uav_type != UavType::Updater) {
        by_type.entry(a.uav_type).or_default().push(a);
    }
    let compatible: usize = by_type.values().map(Vec::len).sum();
    if compatible > n * n {
        return Err(PlanError::Capacity {
            compatible,
            capacity: n * n,
        });
    }
    if compatible <= n {
        let mut direct: Vec<AgentId> = by_type.values().flatten().map(|a| a.id).collect();
        direct.sort_unstable();
        return Ok(SubSwarmPlan {
            subswarms: Vec::new(),
            direct,
        });
    }

    let mut subswarms = Vec::new();
    for (&uav_type, members) in &mut by_type {
        members.sort_by_key(|a| a.id);
        let k = members.len().div_ceil(n + 1);
        let (leaders, rest) = members.split_at(k);
        // Sizes differ by at most one; the first `extra` get the larger size.
        let base = members.len() / k;
        let extra = members.len() % k;
        let mut room: Vec<usize> = (0..k).map(|j| base + usize::from(j < extra) - 1).collect();
        let mut followers = vec![Vec::new(); k];
        for f in rest {
            let best = (0..k)
                .filter(|&j| room[j] > 0)
                .min_by(|&a, &b| {
                    let da = f.position.distance_sq(leaders[a].position);
                    let db = f.position.distance_sq(leaders[b].position);
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .expect("sub-swarm sizes sum to the type count");
            room[best] -= 1;
            followers[best].push(f.id);
        }
        for (l, fs) in leaders.iter().zip(followers) {
            subswarms.push(SubSwarm {
                uav_type,
                leader: l.id,
                followers: fs,
            });
        }
    }
    subswarms.sort_by_key(|s| s.leader);
    if subswarms.len() > n {
        return Err(PlanError::TooManyLeaders {
            leaders: subswarms.len(),
            max: n,
        });
    }
    Ok(SubSwarmPlan {
        subswarms,
        direct: Vec::new(),
    })
}
