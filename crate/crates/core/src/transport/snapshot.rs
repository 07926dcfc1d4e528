//! Chandy–Lamport snapshots over FIFO channels.
//!
//! The initiator records its local summary and sends a marker on every
//! outgoing channel. An agent receiving its first marker for a snapshot
//! records its local summary, relays markers, and from then on adds every
//! search node arriving on a channel to the record until that channel's
//! marker arrives. Completed records are reported to the initiator, which
//! merges them into a global summary of one consistent cut.

use super::message::{Message, SnapshotId, Summary};
use crate::model::{agent_bit, AgentId, AgentSet, Cost};
use std::collections::HashMap;

#[derive(Clone, Debug)]
struct Record {
    summary: Summary,
    /// Channels whose marker has not arrived yet.
    pending: AgentSet,
}

#[derive(Clone, Debug)]
struct Outstanding {
    id: SnapshotId,
    awaiting: AgentSet,
    acc: Summary,
    own_done: bool,
}

/// One agent's side of every snapshot it takes part in. Concurrent snapshots
/// are kept apart by id.
#[derive(Clone, Debug)]
pub struct SnapshotParticipant {
    me: AgentId,
    seq: u32,
    records: HashMap<SnapshotId, Record>,
    outstanding: Option<Outstanding>,
    completed: u64,
}

pub type Outbox = Vec<(AgentId, Message)>;

fn members(set: AgentSet) -> impl Iterator<Item = AgentId> {
    (0..64).filter(move |&k| set & agent_bit(k) != 0)
}

impl SnapshotParticipant {
    pub fn new(me: AgentId) -> Self {
        SnapshotParticipant {
            me,
            seq: 0,
            records: HashMap::new(),
            outstanding: None,
            completed: 0,
        }
    }

    /// Whether a snapshot this agent started is still running.
    pub fn outstanding(&self) -> bool {
        self.outstanding.is_some()
    }

    /// Number of snapshots this agent initiated that have been decided.
    pub fn completed(&self) -> u64 {
        self.completed
    }

    fn record(
        &mut self,
        id: SnapshotId,
        summary: Summary,
        live_others: AgentSet,
        pending: AgentSet,
        out: &mut Outbox,
    ) -> Option<Summary> {
        for k in members(live_others) {
            out.push((k, Message::SnapshotMarker { id }));
        }
        self.records.insert(id, Record { summary, pending });
        self.try_complete(id, out)
    }

    /// Starts a snapshot. Returns the global summary at once if there is no
    /// other live agent.
    pub fn initiate(
        &mut self,
        local: Summary,
        live_others: AgentSet,
        out: &mut Outbox,
    ) -> Option<Summary> {
        assert!(self.outstanding.is_none(), "one own snapshot at a time");
        let id = SnapshotId {
            initiator: self.me,
            seq: self.seq,
        };
        self.seq += 1;
        self.outstanding = Some(Outstanding {
            id,
            awaiting: live_others,
            acc: Summary::default(),
            own_done: false,
        });
        self.record(id, local, live_others, live_others, out)
    }

    /// Handles a marker. `local` is evaluated only if this is the first
    /// marker seen for the snapshot.
    pub fn on_marker(
        &mut self,
        from: AgentId,
        id: SnapshotId,
        local: impl FnOnce() -> Summary,
        live_others: AgentSet,
        out: &mut Outbox,
    ) -> Option<Summary> {
        if let Some(r) = self.records.get_mut(&id) {
            r.pending &= !agent_bit(from);
            return self.try_complete(id, out);
        }
        if id.initiator == self.me {
            // Our own snapshot already completed locally; a late marker.
            return None;
        }
        self.record(
            id,
            local(),
            live_others,
            live_others & !agent_bit(from),
            out,
        )
    }

    /// Accounts for a search node with f-value `f` arriving from `from`.
    pub fn on_node(&mut self, from: AgentId, f: Cost) {
        for r in self.records.values_mut() {
            if r.pending & agent_bit(from) != 0 {
                r.summary.add_in_flight(f);
            }
        }
    }

    pub fn on_report(
        &mut self,
        from: AgentId,
        id: SnapshotId,
        summary: &Summary,
    ) -> Option<Summary> {
        let o = self.outstanding.as_mut()?;
        if o.id != id || o.awaiting & agent_bit(from) == 0 {
            return None;
        }
        o.awaiting &= !agent_bit(from);
        o.acc.merge(summary);
        self.try_decide()
    }

    /// Stops waiting for a failed agent's markers and reports, and drops
    /// snapshots it initiated.
    pub fn on_failure(&mut self, failed: AgentId, out: &mut Outbox) -> Option<Summary> {
        self.records.retain(|id, _| id.initiator != failed);
        let ids: Vec<SnapshotId> = self.records.keys().copied().collect();
        let mut decided = None;
        for id in ids {
            if let Some(r) = self.records.get_mut(&id) {
                r.pending &= !agent_bit(failed);
            }
            decided = decided.or(self.try_complete(id, out));
        }
        if let Some(o) = self.outstanding.as_mut() {
            o.awaiting &= !agent_bit(failed);
        }
        decided.or_else(|| self.try_decide())
    }

    fn try_complete(&mut self, id: SnapshotId, out: &mut Outbox) -> Option<Summary> {
        if self.records.get(&id)?.pending != 0 {
            return None;
        }
        let r = self.records.remove(&id).unwrap();
        if id.initiator == self.me {
            let o = self.outstanding.as_mut()?;
            o.acc.merge(&r.summary);
            o.own_done = true;
            self.try_decide()
        } else {
            out.push((
                id.initiator,
                Message::SnapshotReport {
                    id,
                    summary: r.summary,
                },
            ));
            None
        }
    }

    fn try_decide(&mut self) -> Option<Summary> {
        let o = self.outstanding.as_ref()?;
        if !o.own_done || o.awaiting != 0 {
            return None;
        }
        let acc = o.acc;
        self.outstanding = None;
        self.completed += 1;
        Some(acc)
    }
}
