use alloc::vec::Vec;

use crate::sim::{AgentId, PacketHeader, StepContext};

/// Outcome of one [`ReliableSender::poll`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Poll {
    /// Packet `index` was (re)broadcast this step.
    Sent(u32),
    /// Every packet was acknowledged by every remaining recipient.
    Done,
    /// These recipients did not acknowledge the current packet in time.
    TimedOut(Vec<AgentId>),
}

/// Stop-and-wait broadcast of a packet sequence to a known audience.
///
/// The current packet is rebroadcast on every step until every recipient has
/// acknowledged it; only then does the next packet go out. Acknowledgements
/// take a round trip to come back, so with slow links a packet is sent more
/// than once even when nothing is lost.
#[derive(Debug, Clone)]
pub struct ReliableSender {
    audience: Vec<AgentId>,
    acked: Vec<bool>,
    packet: u32,
    count: u32,
    sent_once: bool,
    deadline: u64,
    timeout: u64,
}

impl ReliableSender {
    /// `first_slack` extends the first packet's deadline, for audiences that
    /// may still be travelling into range.
    pub fn new(mut audience: Vec<AgentId>, count: u32, timeout: u64, now: u64, first_slack: u64) -> Self {
        audience.sort_unstable();
        audience.dedup();
        ReliableSender {
            acked: alloc::vec![false; audience.len()],
            audience,
            packet: 0,
            count,
            sent_once: false,
            deadline: now + timeout + first_slack,
            timeout,
        }
    }

    pub fn audience(&self) -> &[AgentId] {
        &self.audience
    }

    pub fn current_packet(&self) -> u32 {
        self.packet
    }

    pub fn deadline(&self) -> u64 {
        self.deadline
    }

    pub fn on_ack(&mut self, from: AgentId, index: u32) {
        if index != self.packet {
            return;
        }
        if let Ok(i) = self.audience.binary_search(&from) {
            self.acked[i] = true;
        }
    }

    /// Drops a recipient; it is never waited for again.
    pub fn remove(&mut self, id: AgentId) {
        if let Ok(i) = self.audience.binary_search(&id) {
            self.audience.remove(i);
            self.acked.remove(i);
        }
    }

    fn all_acked(&self) -> bool {
        self.acked.iter().all(|&a| a)
    }

    pub fn poll(&mut self, ctx: &mut StepContext<'_>) -> Poll {
        let now = ctx.step();
        if self.audience.is_empty() || self.count == 0 {
            return Poll::Done;
        }
        if self.sent_once && self.all_acked() {
            self.packet += 1;
            if self.packet == self.count {
                return Poll::Done;
            }
            self.acked.iter_mut().for_each(|a| *a = false);
            self.deadline = now + self.timeout;
            return self.send(ctx);
        }
        if now >= self.deadline {
            let missing = self
                .audience
                .iter()
                .zip(&self.acked)
                .filter(|(_, &a)| !a)
                .map(|(&id, _)| id)
                .collect();
            return Poll::TimedOut(missing);
        }
        self.send(ctx)
    }

    fn send(&mut self, ctx: &mut StepContext<'_>) -> Poll {
        ctx.send_packet(
            PacketHeader {
                index: self.packet,
                count: self.count,
                burst_left: 0,
            },
            None,
        );
        self.sent_once = true;
        Poll::Sent(self.packet)
    }
}
