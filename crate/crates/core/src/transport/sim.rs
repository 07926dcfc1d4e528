//! A seeded in-process network with a logical clock. Messages are encoded to
//! bytes on send and decoded on delivery, so the simulated traffic matches
//! the TCP transport byte for byte.

use super::message::Message;
use super::wire::{decode_frame, encode_frame};
use super::{TrafficStats, Transport};
use crate::error::Result;
use crate::model::{agent_bit, AgentId, AgentSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cell::RefCell;
use std::collections::VecDeque;
use std::rc::Rc;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimParams {
    pub seed: u64,
    /// Extra delay in ticks, drawn uniformly from `0..=max_delay`.
    pub max_delay: u64,
    /// Probability that a channel delivers nothing in a given tick.
    pub stall: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            seed: 0,
            max_delay: 0,
            stall: 0.0,
        }
    }
}

#[derive(Debug)]
pub struct SimNetwork {
    n: usize,
    now: u64,
    /// Channel `from * n + to`: frames with their delivery tick.
    chans: Vec<VecDeque<(u64, Vec<u8>)>>,
    last: Vec<u64>,
    stats: Vec<TrafficStats>,
    dead: AgentSet,
    params: SimParams,
    rng: ChaCha8Rng,
}

impl SimNetwork {
    pub fn new(n: usize, params: SimParams) -> Self {
        SimNetwork {
            n,
            now: 0,
            chans: vec![VecDeque::new(); n * n],
            last: vec![0; n * n],
            stats: vec![TrafficStats::default(); n],
            dead: 0,
            params,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
        }
    }

    /// Endpoints for every agent sharing one network.
    pub fn endpoints(n: usize, params: SimParams) -> (Rc<RefCell<SimNetwork>>, Vec<SimEndpoint>) {
        let net = Rc::new(RefCell::new(SimNetwork::new(n, params)));
        let eps = (0..n)
            .map(|me| SimEndpoint {
                net: Rc::clone(&net),
                me,
            })
            .collect();
        (net, eps)
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn tick(&mut self) {
        self.now += 1;
    }

    pub fn is_dead(&self, agent: AgentId) -> bool {
        self.dead & agent_bit(agent) != 0
    }

    pub fn dead(&self) -> AgentSet {
        self.dead
    }

    pub fn stats(&self, agent: AgentId) -> TrafficStats {
        self.stats[agent]
    }

    pub fn total_stats(&self) -> TrafficStats {
        self.stats
            .iter()
            .fold(TrafficStats::default(), |a, s| TrafficStats {
                messages_sent: a.messages_sent + s.messages_sent,
                bytes_sent: a.bytes_sent + s.bytes_sent,
                messages_received: a.messages_received + s.messages_received,
            })
    }

    fn enqueue(&mut self, from: AgentId, to: AgentId, frame: Vec<u8>) {
        let c = from * self.n + to;
        let delay = if self.params.max_delay > 0 {
            self.rng.gen_range(0..=self.params.max_delay)
        } else {
            0
        };
        let at = self.last[c].max(self.now + 1 + delay);
        self.last[c] = at;
        self.chans[c].push_back((at, frame));
    }

    pub fn send(&mut self, from: AgentId, to: AgentId, msg: &Message) {
        if self.is_dead(from) {
            return;
        }
        let frame = encode_frame(from, msg);
        self.stats[from].messages_sent += 1;
        self.stats[from].bytes_sent += frame.len() as u64;
        if self.is_dead(to) {
            return;
        }
        self.enqueue(from, to, frame);
    }

    /// Delivers every due message addressed to `to`, channel by channel in
    /// sender order, FIFO within a channel.
    pub fn deliver(&mut self, to: AgentId) -> Result<Vec<(AgentId, Message)>> {
        let mut out = Vec::new();
        if self.is_dead(to) {
            return Ok(out);
        }
        for from in 0..self.n {
            let c = from * self.n + to;
            if self.chans[c].is_empty() {
                continue;
            }
            if self.params.stall > 0.0 && self.rng.gen_bool(self.params.stall) {
                continue;
            }
            while self.chans[c].front().is_some_and(|(at, _)| *at <= self.now) {
                let (_, frame) = self.chans[c].pop_front().unwrap();
                let (sender, msg) = decode_frame(&frame)?;
                debug_assert_eq!(sender, from);
                self.stats[to].messages_received += 1;
                out.push((from, msg));
            }
        }
        Ok(out)
    }

    /// Crashes `agent`. Messages it already sent are still delivered; every
    /// live agent then receives a failure notice on that agent's channel.
    pub fn kill(&mut self, agent: AgentId) {
        if self.is_dead(agent) {
            return;
        }
        self.dead |= agent_bit(agent);
        for j in 0..self.n {
            self.chans[j * self.n + agent].clear();
        }
        for j in 0..self.n {
            if j != agent && !self.is_dead(j) {
                let frame = encode_frame(agent, &Message::FailureNotice { failed: agent });
                self.enqueue(agent, j, frame);
            }
        }
    }

    /// Every undelivered message between live agents.
    pub fn in_flight(&self) -> Vec<(AgentId, AgentId, Message)> {
        let mut out = Vec::new();
        for from in 0..self.n {
            for to in 0..self.n {
                for (_, frame) in &self.chans[from * self.n + to] {
                    if let Ok((_, m)) = decode_frame(frame) {
                        out.push((from, to, m));
                    }
                }
            }
        }
        out
    }

    pub fn in_flight_len(&self) -> usize {
        self.chans.iter().map(VecDeque::len).sum()
    }
}

/// One agent's handle on a shared `SimNetwork`.
#[derive(Debug)]
pub struct SimEndpoint {
    net: Rc<RefCell<SimNetwork>>,
    me: AgentId,
}

impl Transport for SimEndpoint {
    fn me(&self) -> AgentId {
        self.me
    }

    fn num_agents(&self) -> usize {
        self.net.borrow().n
    }

    fn send(&mut self, to: AgentId, msg: &Message) -> Result<()> {
        self.net.borrow_mut().send(self.me, to, msg);
        Ok(())
    }

    fn poll(&mut self) -> Result<Vec<(AgentId, Message)>> {
        self.net.borrow_mut().deliver(self.me)
    }

    fn stats(&self) -> TrafficStats {
        self.net.borrow().stats(self.me)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::SnapshotId;

    fn marker(seq: u32) -> Message {
        Message::SnapshotMarker {
            id: SnapshotId { initiator: 0, seq },
        }
    }

    fn drain(
        net: &Rc<RefCell<SimNetwork>>,
        ep: &mut SimEndpoint,
        ticks: u64,
    ) -> Vec<(AgentId, Message)> {
        let mut got = Vec::new();
        for _ in 0..ticks {
            net.borrow_mut().tick();
            got.extend(ep.poll().unwrap());
        }
        got
    }

    #[test]
    fn fifo_under_random_delays() {
        let params = SimParams {
            seed: 7,
            max_delay: 5,
            stall: 0.3,
        };
        let (net, mut eps) = SimNetwork::endpoints(2, params);
        for s in 0..50 {
            eps[0].send(1, &marker(s)).unwrap();
        }
        let got = drain(&net, &mut eps[1], 500);
        let seqs: Vec<u32> = got
            .iter()
            .map(|(_, m)| match m {
                Message::SnapshotMarker { id } => id.seq,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(seqs, (0..50).collect::<Vec<_>>());
        let st = eps[0].stats();
        assert_eq!(st.messages_sent, 50);
        assert_eq!(eps[1].stats().messages_received, 50);
    }

    #[test]
    fn nothing_is_delivered_in_the_sending_tick() {
        let (net, mut eps) = SimNetwork::endpoints(2, SimParams::default());
        eps[0].send(1, &marker(0)).unwrap();
        assert!(eps[1].poll().unwrap().is_empty());
        assert_eq!(drain(&net, &mut eps[1], 1).len(), 1);
    }

    #[test]
    fn failure_notice_follows_in_flight_messages() {
        let (net, mut eps) = SimNetwork::endpoints(3, SimParams::default());
        eps[2].send(0, &marker(1)).unwrap();
        eps[0].send(2, &marker(2)).unwrap();
        net.borrow_mut().kill(2);
        assert_eq!(net.borrow().in_flight_len(), 3);
        let got = drain(&net, &mut eps[0], 3);
        assert_eq!(got.len(), 2);
        assert!(matches!(got[0].1, Message::SnapshotMarker { .. }));
        assert_eq!(got[1].1, Message::FailureNotice { failed: 2 });
        // Sends to the dead agent are dropped.
        eps[0].send(2, &marker(3)).unwrap();
        assert_eq!(net.borrow().in_flight_len(), 1);
    }
}
