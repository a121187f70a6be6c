use alloc::sync::Arc;

pub type AgentId = u32;

/// Control signals and their fixed on-air sizes in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SignalType {
    UpdateAvailable,
    InPosition,
    Ack,
    Complete,
    Converged,
    Abort,
    ReappointLeader,
    RetransmitRequest,
    GroupTurn,
    AtLocation,
}

impl SignalType {
    pub const ALL: [SignalType; 10] = [
        SignalType::UpdateAvailable,
        SignalType::InPosition,
        SignalType::Ack,
        SignalType::Complete,
        SignalType::Converged,
        SignalType::Abort,
        SignalType::ReappointLeader,
        SignalType::RetransmitRequest,
        SignalType::GroupTurn,
        SignalType::AtLocation,
    ];

    pub const fn wire_bytes(self) -> u32 {
        match self {
            SignalType::UpdateAvailable => 10,
            SignalType::InPosition => 2,
            SignalType::Ack => 1,
            SignalType::Complete => 3,
            SignalType::Converged => 3,
            SignalType::Abort => 2,
            SignalType::ReappointLeader => 4,
            SignalType::RetransmitRequest => 8,
            SignalType::GroupTurn => 5,
            SignalType::AtLocation => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Signal {
    UpdateAvailable { packets: u32 },
    InPosition,
    Ack { index: u32 },
    Complete,
    Converged,
    Abort,
    ReappointLeader { failed: AgentId },
    /// Missing packet indices; empty means "resend everything".
    RetransmitRequest { missing: Arc<[u32]> },
    GroupTurn { group: u32 },
    AtLocation,
}

impl Signal {
    pub fn signal_type(&self) -> SignalType {
        match self {
            Signal::UpdateAvailable { .. } => SignalType::UpdateAvailable,
            Signal::InPosition => SignalType::InPosition,
            Signal::Ack { .. } => SignalType::Ack,
            Signal::Complete => SignalType::Complete,
            Signal::Converged => SignalType::Converged,
            Signal::Abort => SignalType::Abort,
            Signal::ReappointLeader { .. } => SignalType::ReappointLeader,
            Signal::RetransmitRequest { .. } => SignalType::RetransmitRequest,
            Signal::GroupTurn { .. } => SignalType::GroupTurn,
            Signal::AtLocation => SignalType::AtLocation,
        }
    }
}

/// Header of a patch packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketHeader {
    pub index: u32,
    pub count: u32,
    /// Packets still to follow in the sender's current burst.
    pub burst_left: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Packet(PacketHeader),
    Signal(Signal),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Packet,
    Signal,
}

/// Identifies one network-wide flood so that every agent relays it once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FloodTag {
    pub origin: AgentId,
    pub seq: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub sender: AgentId,
    pub addressed_to: Option<AgentId>,
    pub payload_bytes: u32,
    pub body: Body,
    pub flood: Option<FloodTag>,
}

impl Frame {
    pub fn kind(&self) -> FrameKind {
        match self.body {
            Body::Packet(_) => FrameKind::Packet,
            Body::Signal(_) => FrameKind::Signal,
        }
    }

    pub fn signal(&self) -> Option<&Signal> {
        match &self.body {
            Body::Signal(s) => Some(s),
            Body::Packet(_) => None,
        }
    }

    pub fn packet(&self) -> Option<PacketHeader> {
        match self.body {
            Body::Packet(h) => Some(h),
            Body::Signal(_) => None,
        }
    }

    /// The agent that started the flood, or the sender for single-hop frames.
    pub fn origin(&self) -> AgentId {
        self.flood.map_or(self.sender, |f| f.origin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_sizes_fit_the_radio_frame() {
        for t in SignalType::ALL {
            assert!((1..=10).contains(&t.wire_bytes()), "{t:?}");
        }
        let total: u32 = SignalType::ALL.iter().map(|t| t.wire_bytes()).sum();
        assert_eq!(total, 40);
    }
}
