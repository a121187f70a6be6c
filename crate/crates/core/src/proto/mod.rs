//! Update synchronization strategies.
//!
//! Each strategy provides one controller type for every agent of the world
//! (the Updater and all drones). Controllers only talk through frames.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub mod gossip;
mod reliable;
pub mod soul;
pub mod swarmsync;

pub use reliable::{Poll, ReliableSender};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    SwarmSync,
    Gossip,
    Soul,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::SwarmSync, Strategy::Gossip, Strategy::Soul];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::SwarmSync => "swarmsync",
            Strategy::Gossip => "gossip",
            Strategy::Soul => "soul",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown strategy `{0}` (expected swarmsync, gossip or soul)")]
pub struct UnknownStrategy(pub alloc::string::String);

impl FromStr for Strategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownStrategy(s.into()))
    }
}

/// Protocol tuning shared by the strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolParams {
    /// Steps of silence after which an awaited response counts as lost.
    pub timeout_steps: u64,
    /// Most drones served around one transmitter at a time (N).
    pub max_concurrent: usize,
    /// Steps without a retransmission request before a sender assumes its
    /// audience is done.
    pub quiescence_steps: u64,
    /// Largest group served at once by the auction strategy.
    pub group_size: usize,
    /// Steps an auction bidder waits for the end of a burst before bidding
    /// again on its own.
    pub request_timer_steps: u64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            timeout_steps: 200,
            max_concurrent: 18,
            quiescence_steps: 20,
            group_size: 18,
            request_timer_steps: 10,
        }
    }
}

/// Set of received packet indices out of a known total.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PacketSet {
    words: Vec<u64>,
    total: u32,
    held: u32,
}

impl PacketSet {
    pub fn new(total: u32) -> Self {
        PacketSet {
            words: vec![0; (total as usize).div_ceil(64)],
            total,
            held: 0,
        }
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn len(&self) -> u32 {
        self.held
    }

    pub fn is_empty(&self) -> bool {
        self.held == 0
    }

    pub fn is_full(&self) -> bool {
        self.held == self.total
    }

    pub fn contains(&self, index: u32) -> bool {
        index < self.total && self.words[(index / 64) as usize] & (1 << (index % 64)) != 0
    }

    /// Adds `index`; returns whether it was new. Out-of-range indices are ignored.
    pub fn insert(&mut self, index: u32) -> bool {
        if index >= self.total || self.contains(index) {
            return false;
        }
        self.words[(index / 64) as usize] |= 1 << (index % 64);
        self.held += 1;
        true
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
        self.held = 0;
    }

    pub fn missing(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.total).filter(|&i| !self.contains(i))
    }
}

/// Static facts every controller of a run is built with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSetup {
    pub params: ProtocolParams,
    /// Patch size in packets.
    pub packets: u32,
    /// Slack for deadlines that cover a journey across the arena.
    pub travel_budget: u64,
    pub comm_range: f64,
}
