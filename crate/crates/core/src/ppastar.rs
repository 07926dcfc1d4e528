//! Centralized A* and path-pruning A* (PP-A*).
//!
//! PP-A* keeps, for every state, the set of last actions over all cheapest
//! known paths into it. A successor action is executed only if the pruning
//! method allows it after at least one of those last actions.

use crate::error::{Error, Result};
use crate::heuristics::{full_heuristic_task, Evaluator, HeuristicKind, INF};
use crate::model::{ActionId, AgentId, Classification, Cost, State, Task};
use crate::search::{Policy, SearchSpace};
use serde::Serialize;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchOutcome {
    Solved,
    Unsolvable,
    Timeout,
    Memory,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SearchResult {
    pub outcome: SearchOutcome,
    pub plan: Option<Vec<ActionId>>,
    pub cost: Option<Cost>,
    pub expansions: u64,
    pub generated: u64,
}

impl SearchResult {
    fn stopped(outcome: SearchOutcome, expansions: u64, generated: u64) -> Self {
        SearchResult {
            outcome,
            plan: None,
            cost: None,
            expansions,
            generated,
        }
    }
}

/// Resource bounds checked during search. The node budget stands in for a
/// memory limit.
#[derive(Clone, Copy, Debug, Default)]
pub struct Limits {
    pub deadline: Option<Instant>,
    pub max_nodes: Option<usize>,
}

impl Limits {
    fn exceeded(&self, nodes: usize, expansions: u64) -> Option<SearchOutcome> {
        if self.max_nodes.is_some_and(|m| nodes > m) {
            return Some(SearchOutcome::Memory);
        }
        if expansions.is_multiple_of(256) && self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Some(SearchOutcome::Timeout);
        }
        None
    }
}

/// Textbook A* over full states. Expansions count every node taken from the
/// open list, the goal node included.
pub fn astar(task: &Task, heuristic: HeuristicKind, limits: Limits) -> Result<SearchResult> {
    task.validate()?;
    let eval = Evaluator::new(heuristic, full_heuristic_task(task));
    let mut space: SearchSpace<State, Option<ActionId>> = SearchSpace::new(Policy::AStar);
    let mut expansions = 0;
    let mut generated = 0;
    let h0 = eval.eval(&task.init);
    if h0 == INF {
        return Ok(SearchResult::stopped(SearchOutcome::Unsolvable, 0, 0));
    }
    space.insert(task.init.clone(), 0, h0, None, None);
    while let Some(id) = space.pop() {
        expansions += 1;
        if let Some(out) = limits.exceeded(space.len(), expansions) {
            return Ok(SearchResult::stopped(out, expansions, generated));
        }
        let node = space.node(id);
        if task.is_goal(&node.key) {
            let g = node.g;
            let mut plan = Vec::new();
            let mut cur = id;
            while let Some(a) = space.node(cur).payload {
                plan.push(a);
                cur = space
                    .node(cur)
                    .parent
                    .expect("non-initial node has a parent");
            }
            plan.reverse();
            return Ok(SearchResult {
                outcome: SearchOutcome::Solved,
                plan: Some(plan),
                cost: Some(g),
                expansions,
                generated,
            });
        }
        let (state, g) = (node.key.clone(), node.g);
        for (a, action) in task.actions.iter().enumerate() {
            if !action.applicable(&state) {
                continue;
            }
            let mut child = state.clone();
            action.apply_in_place(&mut child);
            generated += 1;
            let h = eval.eval(&child);
            if h == INF {
                continue;
            }
            space.insert(child, g + action.cost, h, Some(id), Some(a));
        }
    }
    Ok(SearchResult::stopped(
        SearchOutcome::Unsolvable,
        expansions,
        generated,
    ))
}

/// The last action on a path; the initial state carries a virtual start
/// action after which everything is allowed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LastAction {
    Start,
    Action(ActionId),
}

/// A pruning rule that looks only at the previous action.
pub trait PruningMethod {
    fn allowed_after(&self, prev: LastAction, next: ActionId) -> bool;
}

pub struct AllowAll;

impl PruningMethod for AllowAll {
    fn allowed_after(&self, _: LastAction, _: ActionId) -> bool {
        true
    }
}

/// Partition-based pruning: after a private action of agent i, only actions
/// of agent i may follow.
pub struct PbPruning {
    owner: Vec<AgentId>,
    public: Vec<bool>,
}

impl PbPruning {
    pub fn new(task: &Task, cls: &Classification) -> Self {
        PbPruning {
            owner: task.actions.iter().map(|a| a.owner).collect(),
            public: cls.action_public.clone(),
        }
    }
}

impl PruningMethod for PbPruning {
    fn allowed_after(&self, prev: LastAction, next: ActionId) -> bool {
        match prev {
            LastAction::Start => true,
            LastAction::Action(p) => self.public[p] || self.owner[p] == self.owner[next],
        }
    }
}

pub fn pb_allowed(prev: LastAction, next: ActionId, task: &Task, cls: &Classification) -> bool {
    match prev {
        LastAction::Start => true,
        LastAction::Action(p) => {
            cls.is_public_action(p) || task.actions[p].owner == task.actions[next].owner
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PStatus {
    Open(u64),
    Closed,
}

struct PNode {
    state: State,
    g: Cost,
    h: Cost,
    /// Last actions of all known paths of cost `g`, sorted.
    last: Vec<LastAction>,
    /// `last` as it was at the most recent expansion.
    expanded_with: Vec<LastAction>,
    preds: Vec<(LastAction, Option<usize>)>,
    status: PStatus,
}

struct PPSearch<'a, R: PruningMethod> {
    task: &'a Task,
    rule: &'a R,
    nodes: Vec<PNode>,
    index: HashMap<State, usize>,
    heap: BinaryHeap<Reverse<(Cost, Cost, u64, usize)>>,
    seq: u64,
}

impl<R: PruningMethod> PPSearch<'_, R> {
    fn push(&mut self, id: usize) {
        let n = &mut self.nodes[id];
        n.status = PStatus::Open(self.seq);
        self.heap.push(Reverse((n.g + n.h, n.h, self.seq, id)));
        self.seq += 1;
    }

    fn allowed_by(&self, set: &[LastAction], next: ActionId) -> bool {
        set.iter().any(|&a| self.rule.allowed_after(a, next))
    }

    fn add_last(n: &mut PNode, a: LastAction, parent: Option<usize>) {
        if let Err(pos) = n.last.binary_search(&a) {
            n.last.insert(pos, a);
        }
        if !n.preds.contains(&(a, parent)) {
            n.preds.push((a, parent));
        }
    }

    fn insert(&mut self, state: State, g: Cost, h: Cost, via: LastAction, parent: Option<usize>) {
        let Some(&id) = self.index.get(&state) else {
            let id = self.nodes.len();
            self.index.insert(state.clone(), id);
            self.nodes.push(PNode {
                state,
                g,
                h,
                last: vec![via],
                expanded_with: Vec::new(),
                preds: vec![(via, parent)],
                status: PStatus::Closed,
            });
            self.push(id);
            return;
        };
        let old_g = self.nodes[id].g;
        if g < old_g {
            let n = &mut self.nodes[id];
            n.g = g;
            n.last = vec![via];
            n.preds = vec![(via, parent)];
            n.expanded_with.clear();
            self.push(id);
        } else if g == old_g {
            let known = self.nodes[id].last.contains(&via);
            let closed = self.nodes[id].status == PStatus::Closed;
            if closed && !known && self.newly_allowed(id, via) {
                Self::add_last(&mut self.nodes[id], via, parent);
                self.push(id);
            } else {
                Self::add_last(&mut self.nodes[id], via, parent);
            }
        }
    }

    /// Whether adding `via` to a closed node's last actions allows some
    /// applicable action that was pruned at its last expansion.
    fn newly_allowed(&self, id: usize, via: LastAction) -> bool {
        let n = &self.nodes[id];
        self.task.actions.iter().enumerate().any(|(b, action)| {
            action.applicable(&n.state)
                && self.rule.allowed_after(via, b)
                && !self.allowed_by(&n.expanded_with, b)
        })
    }

    /// Some pruning-respecting cheapest path into `id` whose last action
    /// allows `next`.
    fn path_to(
        &self,
        id: usize,
        next: Option<ActionId>,
        failed: &mut HashSet<(usize, Option<ActionId>)>,
    ) -> Option<Vec<ActionId>> {
        if failed.contains(&(id, next)) {
            return None;
        }
        let n = &self.nodes[id];
        for &(a, parent) in &n.preds {
            if next.is_some_and(|b| !self.rule.allowed_after(a, b)) {
                continue;
            }
            match (a, parent) {
                (LastAction::Start, None) => return Some(Vec::new()),
                (LastAction::Action(x), Some(p)) => {
                    if self.nodes[p].g + self.task.actions[x].cost != n.g {
                        continue;
                    }
                    if let Some(mut plan) = self.path_to(p, Some(x), failed) {
                        plan.push(x);
                        return Some(plan);
                    }
                }
                _ => {}
            }
        }
        failed.insert((id, next));
        None
    }
}

/// PP-A* with the given pruning method. With [`AllowAll`] it performs exactly
/// the expansions of [`astar`].
pub fn pp_astar<R: PruningMethod>(
    task: &Task,
    rule: &R,
    heuristic: HeuristicKind,
    limits: Limits,
) -> Result<SearchResult> {
    task.validate()?;
    let eval = Evaluator::new(heuristic, full_heuristic_task(task));
    let mut s = PPSearch {
        task,
        rule,
        nodes: Vec::new(),
        index: HashMap::new(),
        heap: BinaryHeap::new(),
        seq: 0,
    };
    let mut expansions = 0;
    let mut generated = 0;
    let h0 = eval.eval(&task.init);
    if h0 == INF {
        return Ok(SearchResult::stopped(SearchOutcome::Unsolvable, 0, 0));
    }
    s.insert(task.init.clone(), 0, h0, LastAction::Start, None);
    while let Some(Reverse((_, _, seq, id))) = s.heap.pop() {
        if s.nodes[id].status != PStatus::Open(seq) {
            continue;
        }
        s.nodes[id].status = PStatus::Closed;
        expansions += 1;
        if let Some(out) = limits.exceeded(s.nodes.len(), expansions) {
            return Ok(SearchResult::stopped(out, expansions, generated));
        }
        if task.is_goal(&s.nodes[id].state) {
            let plan = s.path_to(id, None, &mut HashSet::new()).ok_or_else(|| {
                Error::Internal("no pruning-respecting path into the goal node".into())
            })?;
            return Ok(SearchResult {
                outcome: SearchOutcome::Solved,
                cost: Some(s.nodes[id].g),
                plan: Some(plan),
                expansions,
                generated,
            });
        }
        let state = s.nodes[id].state.clone();
        let g = s.nodes[id].g;
        let last = s.nodes[id].last.clone();
        let before = std::mem::replace(&mut s.nodes[id].expanded_with, last.clone());
        for (b, action) in task.actions.iter().enumerate() {
            if !action.applicable(&state) || !s.allowed_by(&last, b) || s.allowed_by(&before, b) {
                continue;
            }
            let mut child = state.clone();
            action.apply_in_place(&mut child);
            generated += 1;
            let h = eval.eval(&child);
            if h == INF {
                continue;
            }
            s.insert(child, g + action.cost, h, LastAction::Action(b), Some(id));
        }
    }
    Ok(SearchResult::stopped(
        SearchOutcome::Unsolvable,
        expansions,
        generated,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::figure_one;
    use crate::ingest::{generate_instance, GeneratorParams};
    use crate::model::classify;
    use crate::oracle::{oracle_optimal_cost, OracleResult};
    use crate::validate::{validate_plan, Validation};

    #[test]
    fn goal_at_init_is_empty_plan() {
        let mut t = figure_one();
        t.goal.clear();
        let r = astar(&t, HeuristicKind::HMax, Limits::default()).unwrap();
        assert_eq!(r.plan, Some(vec![]));
        assert_eq!(r.cost, Some(0));
    }

    #[test]
    fn chain_of_three() {
        let t = generate_instance(&GeneratorParams::chain(1, 3, 1)).unwrap();
        let r = astar(&t, HeuristicKind::HMax, Limits::default()).unwrap();
        assert_eq!(r.cost, Some(3));
    }

    #[test]
    fn pb_rule() {
        let t = figure_one();
        let cls = classify(&t).unwrap();
        // a1 private to agent 0, a5 public, a6 owned by agent 1.
        assert!(pb_allowed(LastAction::Start, 5, &t, &cls));
        assert!(pb_allowed(LastAction::Action(4), 5, &t, &cls));
        assert!(!pb_allowed(LastAction::Action(0), 5, &t, &cls));
        assert!(pb_allowed(LastAction::Action(0), 1, &t, &cls));
        let pb = PbPruning::new(&t, &cls);
        assert!(!pb.allowed_after(LastAction::Action(0), 5));
    }

    #[test]
    fn figure_one_pruned_search() {
        let t = figure_one();
        let cls = classify(&t).unwrap();
        let a = astar(&t, HeuristicKind::Blind, Limits::default()).unwrap();
        let p = pp_astar(
            &t,
            &PbPruning::new(&t, &cls),
            HeuristicKind::Blind,
            Limits::default(),
        )
        .unwrap();
        assert_eq!(a.cost, Some(8));
        assert_eq!(p.cost, Some(8));
        assert!(p.expansions <= a.expansions);
        assert_eq!(
            validate_plan(&t, p.plan.as_ref().unwrap()),
            Validation::Valid(8)
        );
    }

    #[test]
    fn allow_all_matches_astar() {
        for seed in 0..6 {
            let t = generate_instance(&GeneratorParams::logistics(2, 2, 2, seed)).unwrap();
            let a = astar(&t, HeuristicKind::HMax, Limits::default()).unwrap();
            let p = pp_astar(&t, &AllowAll, HeuristicKind::HMax, Limits::default()).unwrap();
            assert_eq!(a, p, "seed {seed}");
        }
    }

    #[test]
    fn pruned_cost_matches_oracle() {
        for seed in 0..6 {
            let t = generate_instance(&GeneratorParams::logistics(2, 2, 2, seed)).unwrap();
            let cls = classify(&t).unwrap();
            let p = pp_astar(
                &t,
                &PbPruning::new(&t, &cls),
                HeuristicKind::HMax,
                Limits::default(),
            )
            .unwrap();
            let OracleResult::Cost(c) = oracle_optimal_cost(&t, 1_000_000) else {
                panic!("seed {seed} unsolved by oracle")
            };
            assert_eq!(p.cost, Some(c), "seed {seed}");
            assert_eq!(
                validate_plan(&t, p.plan.as_ref().unwrap()),
                Validation::Valid(c)
            );
        }
    }

    #[test]
    fn node_budget_reports_memory() {
        let t = generate_instance(&GeneratorParams::logistics(2, 2, 2, 0)).unwrap();
        let limits = Limits {
            max_nodes: Some(3),
            ..Limits::default()
        };
        assert_eq!(
            astar(&t, HeuristicKind::Blind, limits).unwrap().outcome,
            SearchOutcome::Memory
        );
    }
}
