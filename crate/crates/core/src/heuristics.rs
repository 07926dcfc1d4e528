//! Delete-relaxation heuristics evaluated over an agent's view of the task.

use crate::error::Result;
use crate::model::{
    public_projection, Action, ActionId, AgentId, Classification, Cost, Fact, Task, VarId,
};
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Value of an unreachable goal. Larger than any finite path cost.
pub const INF: Cost = Cost::MAX;

/// The part of a task one agent can see: public variables, its own private
/// variables, its own actions in full and the public projections of every
/// other agent's public actions.
///
/// Variables are renumbered locally: public variables first, then the owner's
/// private variables, each group in increasing global order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeuristicTask {
    pub owner: Option<AgentId>,
    /// Global id of each local variable.
    pub vars: Vec<VarId>,
    pub domain_sizes: Vec<usize>,
    pub actions: Vec<Action>,
    /// Global id of each local action.
    pub action_ids: Vec<ActionId>,
    pub goal: Vec<Fact>,
}

impl HeuristicTask {
    fn assemble(
        task: &Task,
        owner: Option<AgentId>,
        vars: Vec<VarId>,
        actions: Vec<(ActionId, Action)>,
    ) -> Self {
        let mut local = vec![usize::MAX; task.variables.len()];
        for (i, &v) in vars.iter().enumerate() {
            local[v] = i;
        }
        let remap = |fs: &[Fact]| -> Vec<Fact> {
            fs.iter().map(|f| Fact::new(local[f.var], f.val)).collect()
        };
        let (action_ids, actions) = actions
            .into_iter()
            .map(|(id, a)| {
                let pre = remap(&a.pre);
                let eff = remap(&a.eff);
                (id, Action { pre, eff, ..a })
            })
            .unzip();
        HeuristicTask {
            owner,
            domain_sizes: vars
                .iter()
                .map(|&v| task.variables[v].domain_size())
                .collect(),
            goal: remap(&task.goal),
            vars,
            actions,
            action_ids,
        }
    }

    /// Restricts a full state to the local variables.
    pub fn project(&self, state: &[u32]) -> Vec<u32> {
        self.vars.iter().map(|&v| state[v]).collect()
    }

    pub fn is_goal(&self, local: &[u32]) -> bool {
        self.goal.iter().all(|f| f.holds(local))
    }
}

/// The whole task as a heuristic task, for centralized search.
pub fn full_heuristic_task(task: &Task) -> HeuristicTask {
    HeuristicTask::assemble(
        task,
        None,
        (0..task.variables.len()).collect(),
        task.actions.iter().cloned().enumerate().collect(),
    )
}

pub fn build_heuristic_task(
    task: &Task,
    cls: &Classification,
    agent: AgentId,
) -> Result<HeuristicTask> {
    let vars: Vec<VarId> = cls
        .public_vars()
        .chain(cls.private_vars_of(agent))
        .collect();
    let mut actions = Vec::new();
    for (id, a) in task.actions.iter().enumerate() {
        if a.owner == agent {
            actions.push((id, a.clone()));
        } else if cls.is_public_action(id) {
            actions.push((id, public_projection(task, id, cls)?));
        }
    }
    Ok(HeuristicTask::assemble(task, Some(agent), vars, actions))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicKind {
    #[serde(rename = "hmax")]
    HMax,
    #[serde(rename = "hadd")]
    HAdd,
    #[serde(rename = "ff")]
    FF,
    GoalCount,
    Blind,
}

impl HeuristicKind {
    pub fn admissible(self) -> bool {
        matches!(self, HeuristicKind::HMax | HeuristicKind::Blind)
    }

    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::HMax => "hmax",
            HeuristicKind::HAdd => "hadd",
            HeuristicKind::FF => "ff",
            HeuristicKind::GoalCount => "goalcount",
            HeuristicKind::Blind => "blind",
        }
    }
}

impl std::str::FromStr for HeuristicKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "hmax" => HeuristicKind::HMax,
            "hadd" => HeuristicKind::HAdd,
            "ff" => HeuristicKind::FF,
            "goalcount" => HeuristicKind::GoalCount,
            "blind" => HeuristicKind::Blind,
            _ => return Err(format!("unknown heuristic `{s}`")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Estimate {
    pub value: Cost,
    pub admissible: bool,
}

impl Estimate {
    pub fn is_infinite(&self) -> bool {
        self.value == INF
    }
}

/// How a locally computed estimate is merged with one received from another
/// agent for the same state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinePolicy {
    #[default]
    Max,
    LocalOnly,
    ReceivedOnly,
}

pub fn combine_received(local: Estimate, received: Estimate, policy: CombinePolicy) -> Estimate {
    let admissible = local.admissible && received.admissible;
    if admissible {
        return Estimate {
            value: local.value.max(received.value),
            admissible,
        };
    }
    let value = match policy {
        CombinePolicy::Max => local.value.max(received.value),
        CombinePolicy::LocalOnly => local.value,
        CombinePolicy::ReceivedOnly => received.value,
    };
    Estimate { value, admissible }
}

/// Raises `child_h` so that the child's f is at least the parent's.
pub fn pathmax(parent_f: Cost, child_g: Cost, child_h: Cost) -> Cost {
    child_h.max(parent_f.saturating_sub(child_g))
}

/// A heuristic bound to one heuristic task, with the relaxed task
/// precompiled into fact indices.
#[derive(Clone, Debug)]
pub struct Evaluator {
    kind: HeuristicKind,
    htask: HeuristicTask,
    offsets: Vec<usize>,
    num_facts: usize,
    pre: Vec<Vec<usize>>,
    eff: Vec<Vec<usize>>,
    /// For each fact, the actions that require it.
    consumers: Vec<Vec<usize>>,
    goal: Vec<usize>,
    min_cost: Cost,
}

struct Relaxation {
    fact_cost: Vec<Cost>,
    supporter: Vec<usize>,
}

impl Evaluator {
    pub fn new(kind: HeuristicKind, htask: HeuristicTask) -> Self {
        let mut offsets = Vec::with_capacity(htask.domain_sizes.len());
        let mut num_facts = 0;
        for &d in &htask.domain_sizes {
            offsets.push(num_facts);
            num_facts += d;
        }
        let fid = |f: &Fact| offsets[f.var] + f.val as usize;
        let pre: Vec<Vec<usize>> = htask
            .actions
            .iter()
            .map(|a| a.pre.iter().map(fid).collect())
            .collect();
        let eff = htask
            .actions
            .iter()
            .map(|a| a.eff.iter().map(fid).collect())
            .collect();
        let mut consumers = vec![Vec::new(); num_facts];
        for (a, p) in pre.iter().enumerate() {
            for &f in p {
                consumers[f].push(a);
            }
        }
        let goal = htask.goal.iter().map(fid).collect();
        let min_cost = htask.actions.iter().map(|a| a.cost).min().unwrap_or(0);
        Evaluator {
            kind,
            htask,
            offsets,
            num_facts,
            pre,
            eff,
            consumers,
            goal,
            min_cost,
        }
    }

    pub fn kind(&self) -> HeuristicKind {
        self.kind
    }

    pub fn task(&self) -> &HeuristicTask {
        &self.htask
    }

    /// Evaluates a state given over the heuristic task's local variables.
    pub fn estimate(&self, local: &[u32]) -> Estimate {
        Estimate {
            value: self.eval(local),
            admissible: self.kind.admissible(),
        }
    }

    pub fn eval(&self, local: &[u32]) -> Cost {
        if self.htask.is_goal(local) {
            return 0;
        }
        match self.kind {
            HeuristicKind::Blind => self.min_cost,
            HeuristicKind::GoalCount => {
                self.htask.goal.iter().filter(|f| !f.holds(local)).count() as Cost
            }
            HeuristicKind::HMax => self.aggregate(&self.relax(local, true).fact_cost, true),
            HeuristicKind::HAdd => self.aggregate(&self.relax(local, false).fact_cost, false),
            HeuristicKind::FF => self.relaxed_plan_cost(local),
        }
    }

    /// Full-state convenience wrapper.
    pub fn eval_full(&self, state: &[u32]) -> Cost {
        self.eval(&self.htask.project(state))
    }

    fn aggregate(&self, fact_cost: &[Cost], max: bool) -> Cost {
        let mut acc: Cost = 0;
        for &g in &self.goal {
            let c = fact_cost[g];
            if c == INF {
                return INF;
            }
            acc = if max {
                acc.max(c)
            } else {
                acc.saturating_add(c)
            };
        }
        acc
    }

    /// Generalized Dijkstra over facts. Action cost is its own cost plus the
    /// max (or sum) over its preconditions.
    fn relax(&self, local: &[u32], max: bool) -> Relaxation {
        let n = self.num_facts;
        let mut fact_cost = vec![INF; n];
        let mut supporter = vec![usize::MAX; n];
        let mut unsat: Vec<usize> = self.pre.iter().map(Vec::len).collect();
        let mut pre_acc: Vec<Cost> = vec![0; self.pre.len()];
        let mut heap = BinaryHeap::new();
        for (v, &val) in local.iter().enumerate() {
            let f = self.offsets[v] + val as usize;
            fact_cost[f] = 0;
            heap.push(Reverse((0, f)));
        }
        let mut remaining_goals = self.goal.len();
        let mut is_goal = vec![false; n];
        for &g in &self.goal {
            is_goal[g] = true;
        }

        let fire = |a: usize,
                    base: Cost,
                    fact_cost: &mut Vec<Cost>,
                    supporter: &mut Vec<usize>,
                    heap: &mut BinaryHeap<Reverse<(Cost, usize)>>| {
            let c = base.saturating_add(self.htask.actions[a].cost);
            for &e in &self.eff[a] {
                if c < fact_cost[e] {
                    fact_cost[e] = c;
                    supporter[e] = a;
                    heap.push(Reverse((c, e)));
                } else if c == fact_cost[e] && a < supporter[e] {
                    supporter[e] = a;
                }
            }
        };
        for a in 0..self.pre.len() {
            if unsat[a] == 0 {
                fire(a, 0, &mut fact_cost, &mut supporter, &mut heap);
            }
        }
        while let Some(Reverse((c, f))) = heap.pop() {
            if c > fact_cost[f] {
                continue;
            }
            if is_goal[f] {
                is_goal[f] = false;
                remaining_goals -= 1;
                if remaining_goals == 0 {
                    break;
                }
            }
            for &a in &self.consumers[f] {
                pre_acc[a] = if max {
                    pre_acc[a].max(c)
                } else {
                    pre_acc[a].saturating_add(c)
                };
                unsat[a] -= 1;
                if unsat[a] == 0 {
                    fire(a, pre_acc[a], &mut fact_cost, &mut supporter, &mut heap);
                }
            }
        }
        Relaxation {
            fact_cost,
            supporter,
        }
    }

    fn relaxed_plan_cost(&self, local: &[u32]) -> Cost {
        let r = self.relax(local, false);
        if self.goal.iter().any(|&g| r.fact_cost[g] == INF) {
            return INF;
        }
        let mut in_plan = vec![false; self.pre.len()];
        let mut stack: Vec<usize> = self.goal.clone();
        let mut total: Cost = 0;
        while let Some(f) = stack.pop() {
            if r.fact_cost[f] == 0 && r.supporter[f] == usize::MAX {
                continue;
            }
            let a = r.supporter[f];
            if a == usize::MAX || in_plan[a] {
                continue;
            }
            in_plan[a] = true;
            total = total.saturating_add(self.htask.actions[a].cost);
            stack.extend(self.pre[a].iter().copied());
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::figure_one;
    use crate::model::{classify, Agent, Variable};

    fn chain3() -> Task {
        Task {
            variables: vec![Variable::with_size("v", 4)],
            init: vec![0],
            goal: vec![Fact::new(0, 3)],
            actions: (0..3)
                .map(|i| Action {
                    name: format!("s{i}"),
                    owner: 0,
                    pre: vec![Fact::new(0, i)],
                    eff: vec![Fact::new(0, i + 1)],
                    cost: 1,
                })
                .collect(),
            agents: vec![Agent::named("a")],
        }
    }

    fn eval(kind: HeuristicKind, t: &Task, s: &[u32]) -> Cost {
        Evaluator::new(kind, full_heuristic_task(t)).eval_full(s)
    }

    const ALL: [HeuristicKind; 5] = [
        HeuristicKind::HMax,
        HeuristicKind::HAdd,
        HeuristicKind::FF,
        HeuristicKind::GoalCount,
        HeuristicKind::Blind,
    ];

    #[test]
    fn zero_on_goal() {
        let t = chain3();
        for k in ALL {
            assert_eq!(eval(k, &t, &[3]), 0, "{k:?}");
        }
    }

    #[test]
    fn chain_values() {
        let t = chain3();
        assert_eq!(eval(HeuristicKind::HMax, &t, &[0]), 3);
        assert_eq!(eval(HeuristicKind::HAdd, &t, &[0]), 3);
        assert_eq!(eval(HeuristicKind::FF, &t, &[0]), 3);
        assert_eq!(eval(HeuristicKind::GoalCount, &t, &[0]), 1);
        assert_eq!(eval(HeuristicKind::Blind, &t, &[0]), 1);
    }

    #[test]
    fn max_versus_sum() {
        let t = Task {
            variables: vec![Variable::with_size("x", 2), Variable::with_size("y", 2)],
            init: vec![0, 0],
            goal: vec![Fact::new(0, 1), Fact::new(1, 1)],
            actions: vec![
                Action {
                    name: "x".into(),
                    owner: 0,
                    pre: vec![],
                    eff: vec![Fact::new(0, 1)],
                    cost: 1,
                },
                Action {
                    name: "y".into(),
                    owner: 0,
                    pre: vec![],
                    eff: vec![Fact::new(1, 1)],
                    cost: 1,
                },
            ],
            agents: vec![Agent::named("a")],
        };
        assert_eq!(eval(HeuristicKind::HMax, &t, &[0, 0]), 1);
        assert_eq!(eval(HeuristicKind::HAdd, &t, &[0, 0]), 2);
        assert_eq!(eval(HeuristicKind::FF, &t, &[0, 0]), 2);
    }

    #[test]
    fn unreachable_is_infinite_for_relaxations_only() {
        let mut t = chain3();
        t.actions.pop();
        for k in [HeuristicKind::HMax, HeuristicKind::HAdd, HeuristicKind::FF] {
            assert_eq!(eval(k, &t, &[0]), INF, "{k:?}");
        }
        assert_eq!(eval(HeuristicKind::GoalCount, &t, &[0]), 1);
        assert_eq!(eval(HeuristicKind::Blind, &t, &[0]), 1);
    }

    #[test]
    fn blind_is_zero_with_free_actions() {
        let mut t = chain3();
        t.actions[1].cost = 0;
        assert_eq!(eval(HeuristicKind::Blind, &t, &[0]), 0);
    }

    #[test]
    fn figure_one_projection_hides_other_agent() {
        let t = figure_one();
        let cls = classify(&t).unwrap();
        let h0 = build_heuristic_task(&t, &cls, 0).unwrap();
        // v4 public, then v1 and v2.
        assert_eq!(h0.vars, vec![3, 0, 1]);
        assert!(!h0.vars.contains(&2));
        // Own a1..a5 in full, a8 projected to its public part; a6 and a7 absent.
        assert_eq!(h0.action_ids, vec![0, 1, 2, 3, 4, 7]);
        let a8 = &h0.actions[5];
        assert_eq!(a8.pre, vec![Fact::new(0, 1)]);
        assert_eq!(a8.eff, vec![Fact::new(0, 2)]);
        let h1 = build_heuristic_task(&t, &cls, 1).unwrap();
        assert_eq!(h1.vars, vec![3, 2]);
        assert_eq!(h1.action_ids, vec![4, 5, 6, 7]);
        // Agent 0 sees v1, v2 and both public steps: 2 + 2 + 1 + 1 under hadd
        // would double count; hmax takes the longest chain.
        let e0 = Evaluator::new(HeuristicKind::HMax, h0);
        assert_eq!(e0.eval_full(&t.init), 4);
        let e1 = Evaluator::new(HeuristicKind::HMax, h1);
        assert_eq!(e1.eval_full(&t.init), 3);
    }

    #[test]
    fn single_agent_view_is_whole_task() {
        let t = chain3();
        let cls = classify(&t).unwrap();
        let h = build_heuristic_task(&t, &cls, 0).unwrap();
        let mut vars = h.vars.clone();
        vars.sort();
        assert_eq!(vars, vec![0]);
        assert_eq!(h.actions, full_heuristic_task(&t).actions);
    }

    #[test]
    fn combine_and_pathmax() {
        let adm = |v| Estimate {
            value: v,
            admissible: true,
        };
        let inadm = |v| Estimate {
            value: v,
            admissible: false,
        };
        assert_eq!(
            combine_received(adm(5), adm(7), CombinePolicy::LocalOnly),
            adm(7)
        );
        assert_eq!(combine_received(adm(4), adm(4), CombinePolicy::Max), adm(4));
        assert_eq!(
            combine_received(inadm(3), adm(9), CombinePolicy::Max),
            inadm(9)
        );
        assert_eq!(
            combine_received(inadm(3), adm(9), CombinePolicy::LocalOnly),
            inadm(3)
        );
        assert_eq!(
            combine_received(inadm(3), adm(9), CombinePolicy::ReceivedOnly),
            inadm(9)
        );
        assert_eq!(pathmax(10, 4, 3), 6);
        assert_eq!(pathmax(10, 4, 8), 8);
        assert_eq!(pathmax(3, 4, 0), 0);
    }
}
