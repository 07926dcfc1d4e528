use crate::model::{ActionId, AgentId, AgentSet, Cost};
use crate::search::PackedState;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SnapshotId {
    pub initiator: AgentId,
    pub seq: u32,
}

/// A goal node held by `proposer` as node `node`. Ordered by cost, then
/// proposer id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CandidateRef {
    pub cost: Cost,
    pub proposer: AgentId,
    pub node: u64,
}

/// What a snapshot records: the least f over open nodes and in-flight
/// states, how many such nodes and unconfirmed candidates exist, and the
/// best unconfirmed candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub min_f: Cost,
    pub count: u64,
    pub best: Option<CandidateRef>,
}

impl Default for Summary {
    fn default() -> Self {
        Summary {
            min_f: Cost::MAX,
            count: 0,
            best: None,
        }
    }
}

impl Summary {
    pub fn merge(&mut self, other: &Summary) {
        self.min_f = self.min_f.min(other.min_f);
        self.count += other.count;
        self.best = match (self.best, other.best) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }

    pub fn add_in_flight(&mut self, f: Cost) {
        self.min_f = self.min_f.min(f);
        self.count += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Solved {
        cost: Cost,
        plan: Vec<ActionId>,
        /// f of every node on the solution path, from the initial state.
        f_trace: Vec<Cost>,
    },
    Unsolvable,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    /// A state with the sender's g and h. `node` is the sender's handle for
    /// trace-back.
    State {
        state: PackedState,
        g: Cost,
        h: Cost,
        participants: AgentSet,
        node: u64,
    },
    /// A goal state proposed as a solution by the sender.
    GoalCandidate {
        state: PackedState,
        g: Cost,
        participants: AgentSet,
        node: u64,
    },
    SnapshotMarker {
        id: SnapshotId,
    },
    SnapshotReport {
        id: SnapshotId,
        summary: Summary,
    },
    /// Continue the backward walk at the receiver's node `node`. `plan` and
    /// `f_trace` are accumulated from the goal backwards.
    TracebackRequest {
        node: u64,
        initiator: AgentId,
        plan: Vec<ActionId>,
        f_trace: Vec<Cost>,
    },
    TracebackSegment {
        plan: Vec<ActionId>,
        f_trace: Vec<Cost>,
    },
    Terminate {
        outcome: Outcome,
    },
    FailureNotice {
        failed: AgentId,
    },
    /// Reply to a goal candidate in satisficing mode.
    CandidateAck {
        node: u64,
        accept: bool,
    },
}

impl Message {
    pub fn kind(&self) -> u8 {
        match self {
            Message::State { .. } => 1,
            Message::GoalCandidate { .. } => 2,
            Message::SnapshotMarker { .. } => 3,
            Message::SnapshotReport { .. } => 4,
            Message::TracebackRequest { .. } => 5,
            Message::TracebackSegment { .. } => 6,
            Message::Terminate { .. } => 7,
            Message::FailureNotice { .. } => 8,
            Message::CandidateAck { .. } => 9,
        }
    }

    /// f of a search node carried by this message, if any.
    pub fn carried_f(&self) -> Option<Cost> {
        match self {
            Message::State { g, h, .. } => Some(g.saturating_add(*h)),
            Message::GoalCandidate { g, .. } => Some(*g),
            _ => None,
        }
    }
}
