//! State packing and open/closed bookkeeping shared by every search.

use crate::model::{Action, ActionId, AgentId, Classification, Cost, Privacy, State, VarId};
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::hash::Hash;

/// One agent's private variables, either in the clear or as an opaque token.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Segment {
    Plain(Box<[u32]>),
    Token([u8; 16]),
}

impl Segment {
    pub fn plain(&self) -> Option<&[u32]> {
        match self {
            Segment::Plain(v) => Some(v),
            Segment::Token(_) => None,
        }
    }
}

/// A full state split into public values and one private segment per agent.
/// Equality and hashing cover every slot, tokens included.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PackedState {
    pub public: Box<[u32]>,
    pub segments: Box<[Segment]>,
}

impl PackedState {
    pub fn segment(&self, agent: AgentId) -> &Segment {
        &self.segments[agent]
    }

    /// Public values followed by `agent`'s private values; the variable order
    /// of that agent's heuristic task. `None` if the segment is a token.
    pub fn local_view(&self, agent: AgentId) -> Option<Vec<u32>> {
        let own = self.segments[agent].plain()?;
        Some(self.public.iter().chain(own.iter()).copied().collect())
    }

    /// Number of bytes the wire encoding spends on this state.
    pub fn wire_len(&self) -> usize {
        8 + 4 * self.public.len()
            + self
                .segments
                .iter()
                .map(|s| match s {
                    Segment::Plain(v) => 5 + 4 * v.len(),
                    Segment::Token(_) => 17,
                })
                .sum::<usize>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    Public(usize),
    Private(AgentId, usize),
}

/// Maps variables to slots of a [`PackedState`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateLayout {
    slots: Vec<Slot>,
    public_vars: Vec<VarId>,
    private_vars: Vec<Vec<VarId>>,
}

impl StateLayout {
    pub fn new(cls: &Classification, num_agents: usize) -> Self {
        let mut slots = Vec::with_capacity(cls.var_privacy.len());
        let mut public_vars = Vec::new();
        let mut private_vars = vec![Vec::new(); num_agents];
        for (v, p) in cls.var_privacy.iter().enumerate() {
            match *p {
                Privacy::Public => {
                    slots.push(Slot::Public(public_vars.len()));
                    public_vars.push(v);
                }
                Privacy::Private(k) => {
                    slots.push(Slot::Private(k, private_vars[k].len()));
                    private_vars[k].push(v);
                }
            }
        }
        StateLayout {
            slots,
            public_vars,
            private_vars,
        }
    }

    pub fn slot(&self, var: VarId) -> Slot {
        self.slots[var]
    }

    pub fn num_agents(&self) -> usize {
        self.private_vars.len()
    }

    pub fn public_vars(&self) -> &[VarId] {
        &self.public_vars
    }

    pub fn private_vars(&self, agent: AgentId) -> &[VarId] {
        &self.private_vars[agent]
    }

    pub fn pack(&self, state: &[u32]) -> PackedState {
        PackedState {
            public: self.public_vars.iter().map(|&v| state[v]).collect(),
            segments: self
                .private_vars
                .iter()
                .map(|vars| Segment::Plain(vars.iter().map(|&v| state[v]).collect()))
                .collect(),
        }
    }

    /// Inverse of [`pack`](Self::pack); `None` if any segment is a token.
    pub fn unpack(&self, packed: &PackedState) -> Option<State> {
        let mut state = vec![0; self.slots.len()];
        for (i, &v) in self.public_vars.iter().enumerate() {
            state[v] = packed.public[i];
        }
        for (k, vars) in self.private_vars.iter().enumerate() {
            let seg = packed.segments[k].plain()?;
            for (i, &v) in vars.iter().enumerate() {
                state[v] = seg[i];
            }
        }
        Some(state)
    }

    /// Compiles one of `agent`'s actions against this layout.
    pub fn compile(&self, id: ActionId, action: &Action, public: bool) -> LocalAction {
        let map =
            |fs: &[crate::model::Fact]| fs.iter().map(|f| (self.slot(f.var), f.val)).collect();
        LocalAction {
            id,
            owner: action.owner,
            cost: action.cost,
            public,
            pre: map(&action.pre),
            eff: map(&action.eff),
        }
    }
}

/// An action whose facts address packed-state slots. Only valid on states
/// where the owner's segment is plain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalAction {
    pub id: ActionId,
    pub owner: AgentId,
    pub cost: Cost,
    pub public: bool,
    pre: Vec<(Slot, u32)>,
    eff: Vec<(Slot, u32)>,
}

fn read(s: &PackedState, slot: Slot) -> Option<u32> {
    match slot {
        Slot::Public(i) => Some(s.public[i]),
        Slot::Private(k, i) => s.segments[k].plain().map(|v| v[i]),
    }
}

impl LocalAction {
    pub fn applicable(&self, s: &PackedState) -> bool {
        self.pre
            .iter()
            .all(|&(slot, val)| read(s, slot) == Some(val))
    }

    pub fn apply(&self, s: &PackedState) -> PackedState {
        let mut out = s.clone();
        for &(slot, val) in &self.eff {
            match slot {
                Slot::Public(i) => out.public[i] = val,
                Slot::Private(k, i) => {
                    if let Segment::Plain(v) = &mut out.segments[k] {
                        v[i] = val;
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Order by h, then insertion order.
    #[default]
    Greedy,
    /// Order by f = g + h, then h, then insertion order.
    AStar,
}

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Open { seq: u64 },
    Closed { f: Cost },
    Dropped,
}

#[derive(Clone, Debug)]
pub struct Node<K, P> {
    pub key: K,
    pub g: Cost,
    pub h: Cost,
    pub parent: Option<NodeId>,
    pub payload: P,
    pub status: Status,
}

impl<K, P> Node<K, P> {
    pub fn f(&self) -> Cost {
        self.g.saturating_add(self.h)
    }

    pub fn is_open(&self) -> bool {
        matches!(self.status, Status::Open { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Insert {
    New(NodeId),
    /// An open node got a cheaper path.
    Improved(NodeId),
    /// A closed node got a path with smaller f and is open again.
    Reopened(NodeId),
    /// The existing node is at least as good.
    Discarded(NodeId),
}

impl Insert {
    pub fn id(self) -> NodeId {
        match self {
            Insert::New(i) | Insert::Improved(i) | Insert::Reopened(i) | Insert::Discarded(i) => i,
        }
    }

    pub fn accepted(self) -> bool {
        !matches!(self, Insert::Discarded(_))
    }
}

type HeapKey = Reverse<(Cost, Cost, u64, NodeId)>;

/// Open and closed lists over nodes keyed by `K`, with per-node payload `P`.
///
/// The heap uses lazy deletion: an entry is live only while its node is open
/// with the same sequence number.
#[derive(Clone, Debug)]
pub struct SearchSpace<K, P> {
    policy: Policy,
    nodes: Vec<Node<K, P>>,
    index: HashMap<K, NodeId>,
    heap: BinaryHeap<HeapKey>,
    next_seq: u64,
    open: usize,
}

impl<K: Clone + Eq + Hash, P> SearchSpace<K, P> {
    pub fn new(policy: Policy) -> Self {
        SearchSpace {
            policy,
            nodes: Vec::new(),
            index: HashMap::new(),
            heap: BinaryHeap::new(),
            next_seq: 0,
            open: 0,
        }
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn open_len(&self) -> usize {
        self.open
    }

    pub fn node(&self, id: NodeId) -> &Node<K, P> {
        &self.nodes[id]
    }

    pub fn payload_mut(&mut self, id: NodeId) -> &mut P {
        &mut self.nodes[id].payload
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node<K, P>)> {
        self.nodes.iter().enumerate()
    }

    pub fn lookup(&self, key: &K) -> Option<NodeId> {
        self.index.get(key).copied()
    }

    pub fn lookup_g(&self, key: &K) -> Option<Cost> {
        self.lookup(key).map(|i| self.nodes[i].g)
    }

    fn push_heap(&mut self, id: NodeId) {
        let seq = self.next_seq;
        self.next_seq += 1;
        let n = &mut self.nodes[id];
        n.status = Status::Open { seq };
        let key = match self.policy {
            Policy::AStar => (n.g.saturating_add(n.h), n.h, seq, id),
            Policy::Greedy => (n.h, 0, seq, id),
        };
        self.heap.push(Reverse(key));
    }

    /// Adds a path to `key` with cost `g` and estimate `h`.
    ///
    /// A new key becomes an open node. An open node is updated only by a
    /// strictly cheaper g. A closed node is reopened only if the new f is
    /// strictly smaller than its f when it was closed. The stored h of a
    /// known state never decreases.
    pub fn insert(
        &mut self,
        key: K,
        g: Cost,
        h: Cost,
        parent: Option<NodeId>,
        payload: P,
    ) -> Insert {
        let Some(&id) = self.index.get(&key) else {
            let id = self.nodes.len();
            self.nodes.push(Node {
                key: key.clone(),
                g,
                h,
                parent,
                payload,
                status: Status::Dropped,
            });
            self.index.insert(key, id);
            self.open += 1;
            self.push_heap(id);
            return Insert::New(id);
        };
        let n = &mut self.nodes[id];
        let h = h.max(n.h);
        match n.status {
            Status::Open { .. } if g < n.g => {
                n.g = g;
                n.h = h;
                n.parent = parent;
                n.payload = payload;
                self.push_heap(id);
                Insert::Improved(id)
            }
            Status::Closed { f } if g.saturating_add(h) < f => {
                n.g = g;
                n.h = h;
                n.parent = parent;
                n.payload = payload;
                self.open += 1;
                self.push_heap(id);
                Insert::Reopened(id)
            }
            _ => Insert::Discarded(id),
        }
    }

    fn clean_top(&mut self) -> Option<NodeId> {
        while let Some(&Reverse((_, _, seq, id))) = self.heap.peek() {
            if self.nodes[id].status == (Status::Open { seq }) {
                return Some(id);
            }
            self.heap.pop();
        }
        None
    }

    /// The node `pop` would return, without removing it.
    pub fn peek(&mut self) -> Option<NodeId> {
        self.clean_top()
    }

    /// Removes the minimal open node under the policy and closes it.
    /// `None` signals an exhausted open list.
    pub fn pop(&mut self) -> Option<NodeId> {
        let id = self.clean_top()?;
        self.heap.pop();
        let f = self.nodes[id].f();
        self.nodes[id].status = Status::Closed { f };
        self.open -= 1;
        Some(id)
    }

    /// Smallest f over open nodes.
    pub fn min_open_f(&mut self) -> Option<Cost> {
        match self.policy {
            Policy::AStar => self.clean_top().map(|id| self.nodes[id].f()),
            Policy::Greedy => self.nodes.iter().filter(|n| n.is_open()).map(Node::f).min(),
        }
    }

    /// Drops every open node matching `pred`; returns how many were dropped.
    pub fn drop_open_where(&mut self, mut pred: impl FnMut(&Node<K, P>) -> bool) -> usize {
        let mut dropped = 0;
        for n in self.nodes.iter_mut() {
            if n.is_open() && pred(n) {
                n.status = Status::Dropped;
                dropped += 1;
            }
        }
        self.open -= dropped;
        dropped
    }

    /// Checks that the index, the open count and the heap agree.
    pub fn audit(&self) -> Result<(), String> {
        if self.index.len() != self.nodes.len() {
            return Err("index size differs from node count".into());
        }
        for (k, &id) in &self.index {
            if self.nodes[id].key != *k {
                return Err(format!("index entry for node {id} points at another key"));
            }
        }
        let open = self.nodes.iter().filter(|n| n.is_open()).count();
        if open != self.open {
            return Err(format!("open count {} but {open} open nodes", self.open));
        }
        for (id, n) in self.nodes.iter().enumerate() {
            if let Status::Open { seq } = n.status {
                let live = self
                    .heap
                    .iter()
                    .any(|Reverse((_, _, s, i))| *s == seq && *i == id);
                if !live {
                    return Err(format!("open node {id} has no heap entry"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::figure_one;
    use crate::model::classify;

    fn space(policy: Policy) -> SearchSpace<u32, ()> {
        SearchSpace::new(policy)
    }

    fn pop_key(s: &mut SearchSpace<u32, ()>) -> Option<u32> {
        let id = s.pop()?;
        Some(s.node(id).key)
    }

    #[test]
    fn astar_pops_lowest_f() {
        let mut s = space(Policy::AStar);
        s.insert(1, 5, 0, None, ());
        s.insert(2, 3, 0, None, ());
        assert_eq!(pop_key(&mut s), Some(2));
        assert_eq!(pop_key(&mut s), Some(1));
        assert_eq!(s.pop(), None);
    }

    #[test]
    fn ties_prefer_low_h_then_fifo() {
        let mut s = space(Policy::AStar);
        s.insert(1, 2, 3, None, ());
        s.insert(2, 4, 1, None, ());
        s.insert(3, 4, 1, None, ());
        let order: Vec<u32> = std::iter::from_fn(|| pop_key(&mut s)).collect();
        assert_eq!(order, vec![2, 3, 1]);
    }

    #[test]
    fn greedy_ignores_g() {
        let mut s = space(Policy::Greedy);
        s.insert(1, 0, 5, None, ());
        s.insert(2, 100, 1, None, ());
        assert_eq!(pop_key(&mut s), Some(2));
    }

    #[test]
    fn reopen_only_on_strictly_smaller_f() {
        let mut s = space(Policy::AStar);
        let id = s.insert(7, 4, 2, None, ()).id();
        s.pop();
        assert_eq!(s.insert(7, 4, 2, None, ()), Insert::Discarded(id));
        assert_eq!(s.insert(7, 5, 0, None, ()), Insert::Discarded(id));
        assert_eq!(s.insert(7, 3, 2, None, ()), Insert::Reopened(id));
        assert_eq!(s.node(id).g, 3);
        assert_eq!(s.open_len(), 1);
        s.audit().unwrap();
    }

    #[test]
    fn duplicates_with_higher_g_discarded() {
        let mut s = space(Policy::AStar);
        let id = s.insert(1, 2, 0, None, ()).id();
        assert_eq!(s.insert(1, 3, 0, None, ()), Insert::Discarded(id));
        assert_eq!(s.insert(1, 1, 0, None, ()), Insert::Improved(id));
        assert_eq!(s.lookup_g(&1), Some(1));
        assert_eq!(s.open_len(), 1);
        s.pop();
        assert_eq!(s.pop(), None);
        s.audit().unwrap();
    }

    #[test]
    fn dropping_updates_open_count() {
        let mut s = space(Policy::Greedy);
        for k in 0..5 {
            s.insert(k, 0, k as Cost, None, ());
        }
        assert_eq!(s.drop_open_where(|n| n.key % 2 == 0), 3);
        assert_eq!(s.open_len(), 2);
        assert_eq!(s.min_open_f(), Some(1));
        s.audit().unwrap();
    }

    #[test]
    fn layout_round_trip_and_local_actions() {
        let t = figure_one();
        let cls = classify(&t).unwrap();
        let layout = StateLayout::new(&cls, 2);
        assert_eq!(layout.public_vars(), &[3]);
        assert_eq!(layout.private_vars(0), &[0, 1]);
        assert_eq!(layout.private_vars(1), &[2]);
        let s = vec![2, 2, 0, 0];
        let p = layout.pack(&s);
        assert_eq!(layout.unpack(&p).unwrap(), s);
        assert_eq!(p.local_view(0).unwrap(), vec![0, 2, 2]);
        let a5 = layout.compile(4, &t.actions[4], true);
        assert!(a5.applicable(&p));
        assert_eq!(layout.unpack(&a5.apply(&p)).unwrap(), vec![2, 2, 0, 1]);
    }
}
