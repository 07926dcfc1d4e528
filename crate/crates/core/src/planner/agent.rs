use super::{Mode, PlannerConfig, SendTiming};
use crate::error::{Error, Result};
use crate::heuristics::{
    build_heuristic_task, combine_received, pathmax, Estimate, Evaluator, INF,
};
use crate::model::{
    agent_bit, public_projection, ActionId, AgentId, AgentSet, Classification, Cost, Task,
};
use crate::search::{LocalAction, NodeId, PackedState, Policy, SearchSpace, Slot, StateLayout};
use crate::transport::snapshot::SnapshotParticipant;
use crate::transport::{CandidateRef, Message, Opacifier, Outcome, Summary};
use serde::Serialize;
use std::collections::HashMap;
use std::sync::Arc;

type Key = (PackedState, AgentSet);
type Outbox = Vec<(AgentId, Message)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Initial,
    Action(ActionId),
    /// Received from `from`, where it is node `node`.
    Received {
        from: AgentId,
        node: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Info {
    pub origin: Origin,
    /// Agents whose actions lie on the path to this node.
    pub participants: AgentSet,
    /// Reached by one of this agent's public actions.
    pub public: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AgentStats {
    pub expansions: u64,
    pub generated: u64,
    pub nodes: u64,
    pub states_sent: u64,
    pub states_received: u64,
    pub snapshots: u64,
}

/// Things a driver may want to observe.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    /// A snapshot initiated here confirmed a solution of this cost.
    Confirmed { cost: Cost },
}

#[derive(Clone, Copy, Debug)]
struct Held {
    cost: Cost,
    node: NodeId,
    participants: AgentSet,
}

/// One agent's planner state. Drive it by passing every delivered message to
/// [`handle`](Agent::handle) and calling [`work`](Agent::work) until it
/// returns `false`; send whatever both put in the outbox.
pub struct Agent {
    me: AgentId,
    n: usize,
    task: Arc<Task>,
    cfg: PlannerConfig,
    actions: Vec<LocalAction>,
    /// For each agent, the public preconditions of each of its public
    /// actions.
    relevance: Vec<Vec<Vec<(usize, u32)>>>,
    eval: Evaluator,
    opac: Opacifier,
    space: SearchSpace<Key, Info>,
    snap: SnapshotParticipant,
    dead: AgentSet,
    /// Own goal nodes not yet confirmed.
    held: Vec<Held>,
    /// Candidates announced by other agents: (proposer, node) to (cost,
    /// participants).
    known: HashMap<(AgentId, u64), (Cost, AgentSet)>,
    /// Satisficing: own candidate awaiting acknowledgements, and from whom.
    proposed: Option<Held>,
    awaiting_acks: AgentSet,
    /// Satisficing: least (cost, proposer) seen, with its participants.
    best_seen: Option<(Cost, AgentId, AgentSet)>,
    tracing: bool,
    activity: bool,
    outcome: Option<Outcome>,
    events: Vec<Event>,
    stats: AgentStats,
}

impl Agent {
    pub fn new(
        task: Arc<Task>,
        cls: &Classification,
        me: AgentId,
        cfg: PlannerConfig,
    ) -> Result<Self> {
        cfg.check()?;
        let n = task.num_agents();
        if me >= n {
            return Err(Error::Config(format!(
                "agent {me} out of range for {n} agents"
            )));
        }
        let layout = StateLayout::new(cls, n);
        let actions = task
            .actions_of(me)
            .map(|a| layout.compile(a, &task.actions[a], cls.is_public_action(a)))
            .collect();
        let mut relevance = vec![Vec::new(); n];
        for (id, a) in task.actions.iter().enumerate() {
            if a.owner != me && cls.is_public_action(id) {
                let proj = public_projection(&task, id, cls)?;
                let pre = proj
                    .pre
                    .iter()
                    .filter_map(|f| match layout.slot(f.var) {
                        Slot::Public(i) => Some((i, f.val)),
                        Slot::Private(..) => None,
                    })
                    .collect();
                relevance[a.owner].push(pre);
            }
        }
        let eval = Evaluator::new(cfg.heuristic, build_heuristic_task(&task, cls, me)?);
        let mut opac = Opacifier::new(me, cfg.tokens, cfg.seed);
        let init = opac.initial_view(&layout.pack(&task.init), cfg.seed);
        let policy = match cfg.mode {
            Mode::Satisficing => Policy::Greedy,
            Mode::Optimal => Policy::AStar,
        };
        let mut space = SearchSpace::new(policy);
        let h0 = eval.eval(&init.local_view(me).expect("own segment is plain"));
        if h0 != INF {
            let info = Info {
                origin: Origin::Initial,
                participants: 0,
                public: false,
            };
            space.insert((init, 0), 0, h0, None, info);
        }
        Ok(Agent {
            me,
            n,
            task,
            cfg,
            actions,
            relevance,
            eval,
            opac,
            space,
            snap: SnapshotParticipant::new(me),
            dead: 0,
            held: Vec::new(),
            known: HashMap::new(),
            proposed: None,
            awaiting_acks: 0,
            best_seen: None,
            tracing: false,
            activity: true,
            outcome: None,
            events: Vec::new(),
            stats: AgentStats::default(),
        })
    }

    pub fn me(&self) -> AgentId {
        self.me
    }

    pub fn outcome(&self) -> Option<&Outcome> {
        self.outcome.as_ref()
    }

    pub fn stats(&self) -> AgentStats {
        AgentStats {
            nodes: self.space.len() as u64,
            ..self.stats
        }
    }

    pub fn take_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }

    pub fn space(&self) -> &SearchSpace<Key, Info> {
        &self.space
    }

    /// Least f over open nodes and unconfirmed own candidates whose path
    /// avoids `excluded`.
    pub fn lower_bound(&self, excluded: AgentSet) -> Cost {
        let open = self
            .space
            .nodes()
            .filter(|(_, n)| n.is_open() && n.payload.participants & excluded == 0)
            .map(|(_, n)| n.f());
        let held = self
            .held
            .iter()
            .filter(|h| h.participants & excluded == 0)
            .map(|h| h.cost);
        open.chain(held).min().unwrap_or(Cost::MAX)
    }

    fn optimal(&self) -> bool {
        self.cfg.mode == Mode::Optimal && !self.cfg.exhaustive
    }

    fn live_others(&self) -> AgentSet {
        let all = if self.n >= 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        };
        all & !self.dead & !agent_bit(self.me)
    }

    fn broadcast(&self, msg: Message, out: &mut Outbox) {
        let live = self.live_others();
        for j in 0..self.n {
            if live & agent_bit(j) != 0 {
                out.push((j, msg.clone()));
            }
        }
    }

    fn key_participants(&self, p: AgentSet) -> AgentSet {
        if self.cfg.robustness {
            p
        } else {
            0
        }
    }

    fn local_summary(&mut self) -> Summary {
        let min_f = self.space.min_open_f().unwrap_or(Cost::MAX);
        let count = self.space.open_len() as u64 + self.held.len() as u64 + self.tracing as u64;
        let best = if self.optimal() {
            self.held
                .iter()
                .map(|h| CandidateRef {
                    cost: h.cost,
                    proposer: self.me,
                    node: h.node as u64,
                })
                .min()
        } else {
            None
        };
        Summary { min_f, count, best }
    }

    fn known_best(&self) -> Cost {
        let own = self.held.iter().map(|h| h.cost);
        let others = self.known.values().map(|&(c, _)| c);
        own.chain(others).min().unwrap_or(Cost::MAX)
    }

    fn should_expand(&mut self) -> bool {
        if self.tracing {
            return false;
        }
        let Some(f) = self.space.min_open_f() else {
            return false;
        };
        !self.optimal() || f < self.known_best()
    }

    /// Does one unit of local work: an expansion, or starting a snapshot
    /// once there is nothing left to expand. Returns `false` when idle.
    pub fn work(&mut self, out: &mut Outbox) -> Result<bool> {
        if self.outcome.is_some() {
            return Ok(false);
        }
        if self.should_expand() {
            self.expand(out);
            return Ok(true);
        }
        if self.activity && !self.snap.outstanding() && !self.tracing {
            self.activity = false;
            self.stats.snapshots += 1;
            let local = self.local_summary();
            let live = self.live_others();
            if let Some(s) = self.snap.initiate(local, live, out) {
                self.decide(s, out)?;
            }
            return Ok(true);
        }
        Ok(false)
    }

    fn expand(&mut self, out: &mut Outbox) {
        let id = self.space.pop().expect("open is non-empty");
        self.stats.expansions += 1;
        self.activity = true;
        let node = self.space.node(id);
        let (state, g, h) = (node.key.0.clone(), node.g, node.h);
        let Info {
            participants,
            public,
            ..
        } = node.payload;
        let local = state.local_view(self.me).expect("own segment is plain");
        if !self.cfg.exhaustive && self.eval.task().is_goal(&local) {
            self.on_goal(id, g, participants, out);
            return;
        }
        if public && self.cfg.timing == SendTiming::Lazy {
            self.send_state(id, &state, g, h, participants, out);
        }
        let parent_f = g.saturating_add(h);
        for i in 0..self.actions.len() {
            let a = &self.actions[i];
            if !a.applicable(&state) {
                continue;
            }
            let child = a.apply(&state);
            let cg = g.saturating_add(a.cost);
            let est = self
                .eval
                .eval(&child.local_view(self.me).expect("own segment is plain"));
            if est == INF {
                continue;
            }
            let ch = if self.cfg.mode == Mode::Optimal {
                pathmax(parent_f, cg, est)
            } else {
                est
            };
            let p = participants | agent_bit(self.me);
            let info = Info {
                origin: Origin::Action(a.id),
                participants: p,
                public: a.public,
            };
            let send_now = a.public && self.cfg.timing == SendTiming::Eager;
            self.stats.generated += 1;
            let key = (child, self.key_participants(p));
            let ins = self.space.insert(key, cg, ch, Some(id), info);
            if ins.accepted() && send_now {
                let n = self.space.node(ins.id());
                let (s, h) = (n.key.0.clone(), n.h);
                let goal = !self.cfg.exhaustive
                    && self.eval.task().is_goal(&s.local_view(self.me).unwrap());
                if !goal {
                    self.send_state(ins.id(), &s, cg, h, p, out);
                }
            }
        }
    }

    fn relevant(&self, j: AgentId, state: &PackedState) -> bool {
        self.relevance[j]
            .iter()
            .any(|pre| pre.iter().all(|&(i, v)| state.public[i] == v))
    }

    fn send_state(
        &mut self,
        id: NodeId,
        state: &PackedState,
        g: Cost,
        h: Cost,
        participants: AgentSet,
        out: &mut Outbox,
    ) {
        let live = self.live_others();
        let targets: Vec<AgentId> = (0..self.n)
            .filter(|&j| live & agent_bit(j) != 0 && self.relevant(j, state))
            .collect();
        if targets.is_empty() {
            return;
        }
        let opaque = self.opac.opacify(state);
        for j in targets {
            self.stats.states_sent += 1;
            out.push((
                j,
                Message::State {
                    state: opaque.clone(),
                    g,
                    h,
                    participants,
                    node: id as u64,
                },
            ));
        }
    }

    fn on_goal(&mut self, id: NodeId, g: Cost, participants: AgentSet, out: &mut Outbox) {
        let held = Held {
            cost: g,
            node: id,
            participants,
        };
        self.held.push(held);
        if self.optimal() {
            let state = self.opac.opacify(&self.space.node(id).key.0);
            self.broadcast(
                Message::GoalCandidate {
                    state,
                    g,
                    participants,
                    node: id as u64,
                },
                out,
            );
        } else {
            self.try_propose(out);
        }
    }

    /// Satisficing: proposes the cheapest held goal unless a candidate at
    /// least as good is already known.
    fn try_propose(&mut self, out: &mut Outbox) {
        if self.proposed.is_some() || self.tracing {
            return;
        }
        let Some(h) = self.held.iter().min_by_key(|h| (h.cost, h.node)).copied() else {
            return;
        };
        if self
            .best_seen
            .is_some_and(|(c, p, _)| (c, p) < (h.cost, self.me))
        {
            return;
        }
        self.best_seen = Some((h.cost, self.me, h.participants));
        self.proposed = Some(h);
        self.awaiting_acks = self.live_others();
        let state = self.opac.opacify(&self.space.node(h.node).key.0);
        self.broadcast(
            Message::GoalCandidate {
                state,
                g: h.cost,
                participants: h.participants,
                node: h.node as u64,
            },
            out,
        );
        self.maybe_trace_proposed(out);
    }

    fn maybe_trace_proposed(&mut self, out: &mut Outbox) {
        if let Some(h) = self.proposed {
            if self.awaiting_acks == 0 && !self.tracing {
                self.tracing = true;
                // Own node: cannot fail.
                let _ = self.trace(h.node as u64, self.me, Vec::new(), Vec::new(), out);
            }
        }
    }

    pub fn handle(&mut self, from: AgentId, msg: Message, out: &mut Outbox) -> Result<()> {
        if self.outcome.is_some() {
            return Ok(());
        }
        if self.dead & agent_bit(from) != 0 && !matches!(msg, Message::FailureNotice { .. }) {
            return Ok(());
        }
        match msg {
            Message::State {
                state,
                g,
                h,
                participants,
                node,
            } => {
                self.snap.on_node(from, g.saturating_add(h));
                self.activity = true;
                self.receive_state(from, state, g, h, participants, node)?;
            }
            Message::GoalCandidate {
                g,
                participants,
                node,
                ..
            } => {
                self.snap.on_node(from, g);
                self.activity = true;
                if participants & self.dead != 0 {
                    return Ok(());
                }
                if self.cfg.mode == Mode::Optimal {
                    self.known.insert((from, node), (g, participants));
                } else {
                    let accept = self.best_seen.is_none_or(|(c, p, _)| (g, from) <= (c, p));
                    if accept {
                        self.best_seen = Some((g, from, participants));
                    }
                    out.push((from, Message::CandidateAck { node, accept }));
                }
            }
            Message::CandidateAck { node, accept } => {
                let Some(h) = self.proposed else {
                    return Ok(());
                };
                if h.node as u64 != node {
                    return Ok(());
                }
                if accept {
                    self.awaiting_acks &= !agent_bit(from);
                    self.maybe_trace_proposed(out);
                } else {
                    self.proposed = None;
                    self.awaiting_acks = 0;
                }
            }
            Message::SnapshotMarker { id } => {
                let local = self.local_summary();
                let live = self.live_others();
                if let Some(s) = self.snap.on_marker(from, id, || local, live, out) {
                    self.decide(s, out)?;
                }
            }
            Message::SnapshotReport { id, summary } => {
                if let Some(s) = self.snap.on_report(from, id, &summary) {
                    self.decide(s, out)?;
                }
            }
            Message::TracebackRequest {
                node,
                initiator,
                plan,
                f_trace,
            } => self.trace(node, initiator, plan, f_trace, out)?,
            Message::TracebackSegment { plan, f_trace } => self.finish_trace(plan, f_trace, out),
            Message::Terminate { outcome } => self.outcome = Some(outcome),
            Message::FailureNotice { failed } => {
                if !self.cfg.robustness {
                    return Err(Error::Protocol {
                        agent: failed,
                        msg: "agent failed and robustness mode is off".into(),
                    });
                }
                self.on_failure(failed, out)?;
            }
        }
        Ok(())
    }

    fn receive_state(
        &mut self,
        from: AgentId,
        state: PackedState,
        g: Cost,
        h: Cost,
        participants: AgentSet,
        node: u64,
    ) -> Result<()> {
        self.stats.states_received += 1;
        if participants & self.dead != 0 {
            return Ok(());
        }
        if state.segments.len() != self.n {
            return Err(Error::Protocol {
                agent: from,
                msg: "state has the wrong number of segments".into(),
            });
        }
        let state = self.opac.deopacify(state)?;
        let local = state.local_view(self.me).ok_or_else(|| Error::Protocol {
            agent: from,
            msg: "own segment missing".into(),
        })?;
        let est = self.eval.estimate(&local);
        if est.is_infinite() {
            return Ok(());
        }
        let received = Estimate {
            value: h,
            admissible: self.cfg.heuristic.admissible(),
        };
        let hv = combine_received(est, received, self.cfg.combine).value;
        if hv == INF {
            return Ok(());
        }
        let info = Info {
            origin: Origin::Received { from, node },
            participants,
            public: false,
        };
        let key = (state, self.key_participants(participants));
        self.space.insert(key, g, hv, None, info);
        Ok(())
    }

    fn decide(&mut self, s: Summary, out: &mut Outbox) -> Result<()> {
        if self.outcome.is_some() {
            return Ok(());
        }
        if s.count == 0 {
            let outcome = Outcome::Unsolvable;
            self.broadcast(
                Message::Terminate {
                    outcome: outcome.clone(),
                },
                out,
            );
            self.outcome = Some(outcome);
            return Ok(());
        }
        if !self.optimal() || self.tracing {
            return Ok(());
        }
        let Some(best) = s.best else { return Ok(()) };
        if best.cost > s.min_f || self.dead & agent_bit(best.proposer) != 0 {
            return Ok(());
        }
        let participants = if best.proposer == self.me {
            self.held
                .iter()
                .find(|h| h.node as u64 == best.node)
                .map(|h| h.participants)
        } else {
            self.known.get(&(best.proposer, best.node)).map(|&(_, p)| p)
        };
        if participants.is_some_and(|p| p & self.dead != 0) {
            return Ok(());
        }
        self.tracing = true;
        self.events.push(Event::Confirmed { cost: best.cost });
        if best.proposer == self.me {
            self.trace(best.node, self.me, Vec::new(), Vec::new(), out)
        } else {
            out.push((
                best.proposer,
                Message::TracebackRequest {
                    node: best.node,
                    initiator: self.me,
                    plan: Vec::new(),
                    f_trace: Vec::new(),
                },
            ));
            Ok(())
        }
    }

    /// Walks parent pointers from `node`, appending actions and f-values,
    /// until the path leaves this agent.
    fn trace(
        &mut self,
        node: u64,
        initiator: AgentId,
        mut plan: Vec<ActionId>,
        mut f_trace: Vec<Cost>,
        out: &mut Outbox,
    ) -> Result<()> {
        let mut id = node as NodeId;
        loop {
            if id >= self.space.len() {
                return Err(Error::Protocol {
                    agent: initiator,
                    msg: format!("trace-back through unknown node {id}"),
                });
            }
            let n = self.space.node(id);
            match n.payload.origin {
                Origin::Action(a) => {
                    plan.push(a);
                    f_trace.push(n.f());
                    id = n.parent.expect("generated nodes have parents");
                }
                Origin::Initial => {
                    f_trace.push(n.f());
                    if initiator == self.me {
                        self.finish_trace(plan, f_trace, out);
                    } else {
                        out.push((initiator, Message::TracebackSegment { plan, f_trace }));
                    }
                    return Ok(());
                }
                Origin::Received { from, node } => {
                    out.push((
                        from,
                        Message::TracebackRequest {
                            node,
                            initiator,
                            plan,
                            f_trace,
                        },
                    ));
                    return Ok(());
                }
            }
        }
    }

    fn finish_trace(&mut self, mut plan: Vec<ActionId>, mut f_trace: Vec<Cost>, out: &mut Outbox) {
        if !self.tracing || self.outcome.is_some() {
            return;
        }
        if plan
            .iter()
            .any(|&a| self.dead & agent_bit(self.task.actions[a].owner) != 0)
        {
            return;
        }
        plan.reverse();
        f_trace.reverse();
        let cost = plan.iter().map(|&a| self.task.actions[a].cost).sum();
        let outcome = Outcome::Solved {
            cost,
            plan,
            f_trace,
        };
        self.broadcast(
            Message::Terminate {
                outcome: outcome.clone(),
            },
            out,
        );
        self.outcome = Some(outcome);
    }

    fn on_failure(&mut self, failed: AgentId, out: &mut Outbox) -> Result<()> {
        let bit = agent_bit(failed);
        if self.dead & bit != 0 {
            return Ok(());
        }
        self.dead |= bit;
        self.activity = true;
        self.space
            .drop_open_where(|n| n.payload.participants & bit != 0);
        self.held.retain(|h| h.participants & bit == 0);
        self.known
            .retain(|&(p, _), &mut (_, parts)| p != failed && parts & bit == 0);
        if self
            .best_seen
            .is_some_and(|(_, p, parts)| p == failed || parts & bit != 0)
        {
            self.best_seen = None;
        }
        if self.proposed.is_some_and(|h| h.participants & bit != 0) {
            self.proposed = None;
            self.awaiting_acks = 0;
        }
        self.awaiting_acks &= !bit;
        self.tracing = false;
        if let Some(s) = self.snap.on_failure(failed, out) {
            self.decide(s, out)?;
        }
        if self.cfg.mode == Mode::Satisficing && !self.cfg.exhaustive {
            self.maybe_trace_proposed(out);
            self.try_propose(out);
        }
        Ok(())
    }
}
