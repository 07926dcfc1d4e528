//! Inter-agent messaging: message kinds and their binary framing, private
//! segment opacification, the Chandy–Lamport snapshot participant, and the
//! simulated and TCP transports.

pub mod message;
pub mod opacify;
pub mod sim;
pub mod snapshot;
pub mod tcp;
pub mod wire;

use crate::error::Result;
use crate::model::AgentId;

pub use message::{CandidateRef, Message, Outcome, SnapshotId, Summary};
pub use opacify::{Opacifier, TokenMode};

/// Counters kept by a transport endpoint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct TrafficStats {
    pub messages_sent: u64,
    pub bytes_sent: u64,
    pub messages_received: u64,
}

/// One agent's endpoint. Delivery is reliable and FIFO per ordered pair of
/// agents; `poll` never blocks.
pub trait Transport {
    fn me(&self) -> AgentId;
    fn num_agents(&self) -> usize;
    fn send(&mut self, to: AgentId, msg: &Message) -> Result<()>;
    fn poll(&mut self) -> Result<Vec<(AgentId, Message)>>;
    fn stats(&self) -> TrafficStats;

    /// Sends `msg` to every other agent in `to`.
    fn broadcast(&mut self, to: &[AgentId], msg: &Message) -> Result<()> {
        for &j in to {
            if j != self.me() {
                self.send(j, msg)?;
            }
        }
        Ok(())
    }
}
