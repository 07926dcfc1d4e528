//! Grounded multi-valued planning tasks with actions partitioned among agents.
//!
//! A [`Task`] holds finite-domain variables, a full initial assignment, a
//! partial goal assignment and costed actions. Every action is owned by exactly
//! one agent. [`classify`] derives which facts, variables and actions are
//! private to a single agent and which form the public interface between
//! agents.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub type VarId = usize;
pub type ActionId = usize;
pub type AgentId = usize;
pub type Cost = u64;

/// Hard cap on the roster size; agent sets are stored as 64-bit masks.
pub const MAX_AGENTS: usize = 64;

/// A full assignment, one value per variable.
pub type State = Vec<u32>;

/// A `⟨variable, value⟩` pair. Serialized as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(VarId, u32)", into = "(VarId, u32)")]
pub struct Fact {
    pub var: VarId,
    pub val: u32,
}

impl Fact {
    pub fn new(var: VarId, val: u32) -> Self {
        Fact { var, val }
    }

    pub fn holds(&self, state: &[u32]) -> bool {
        state[self.var] == self.val
    }
}

impl From<(VarId, u32)> for Fact {
    fn from((var, val): (VarId, u32)) -> Self {
        Fact { var, val }
    }
}

impl From<Fact> for (VarId, u32) {
    fn from(f: Fact) -> Self {
        (f.var, f.val)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variable {
    pub name: String,
    /// Value labels; the domain size is the number of labels.
    pub domain: Vec<String>,
}

impl Variable {
    pub fn with_size(name: impl Into<String>, size: usize) -> Self {
        Variable {
            name: name.into(),
            domain: (0..size).map(|v| v.to_string()).collect(),
        }
    }

    pub fn domain_size(&self) -> usize {
        self.domain.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Action {
    pub name: String,
    pub owner: AgentId,
    pub pre: Vec<Fact>,
    pub eff: Vec<Fact>,
    pub cost: Cost,
}

impl Action {
    pub fn applicable(&self, state: &[u32]) -> bool {
        self.pre.iter().all(|f| f.holds(state))
    }

    /// Overwrites the effect variables in place. The caller is responsible for
    /// checking applicability.
    pub fn apply_in_place(&self, state: &mut [u32]) {
        for f in &self.eff {
            state[f.var] = f.val;
        }
    }

    pub fn pre_value(&self, var: VarId) -> Option<u32> {
        self.pre.iter().find(|f| f.var == var).map(|f| f.val)
    }

    pub fn changes(&self, var: VarId) -> bool {
        self.eff.iter().any(|f| f.var == var)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Agent {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<String>,
}

impl Agent {
    pub fn named(name: impl Into<String>) -> Self {
        Agent {
            name: name.into(),
            address: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub variables: Vec<Variable>,
    pub init: State,
    pub goal: Vec<Fact>,
    pub actions: Vec<Action>,
    pub agents: Vec<Agent>,
}

impl Task {
    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn is_goal(&self, state: &[u32]) -> bool {
        self.goal.iter().all(|f| f.holds(state))
    }

    pub fn actions_of(&self, agent: AgentId) -> impl Iterator<Item = ActionId> + '_ {
        self.actions
            .iter()
            .enumerate()
            .filter(move |(_, a)| a.owner == agent)
            .map(|(i, _)| i)
    }

    /// Checks every structural invariant; parsers and loaders call this before
    /// handing a task out.
    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::malformed(None, "task has no agents"));
        }
        if self.agents.len() > MAX_AGENTS {
            return Err(Error::malformed(
                None,
                format!(
                    "{} agents exceed the limit of {MAX_AGENTS}",
                    self.agents.len()
                ),
            ));
        }
        for (i, v) in self.variables.iter().enumerate() {
            if v.domain.is_empty() {
                return Err(Error::malformed(
                    None,
                    format!("variable {i} has an empty domain"),
                ));
            }
        }
        if self.init.len() != self.variables.len() {
            return Err(Error::malformed(
                None,
                format!(
                    "initial state assigns {} values for {} variables",
                    self.init.len(),
                    self.variables.len()
                ),
            ));
        }
        for (var, &val) in self.init.iter().enumerate() {
            self.check_fact(None, Fact { var, val }, "initial state")?;
        }
        let mut seen = vec![false; self.variables.len()];
        for &f in &self.goal {
            self.check_fact(None, f, "goal")?;
            if std::mem::replace(&mut seen[f.var], true) {
                return Err(Error::malformed(
                    None,
                    format!("goal mentions variable {} twice", f.var),
                ));
            }
        }
        for (id, a) in self.actions.iter().enumerate() {
            if a.owner >= self.agents.len() {
                return Err(Error::malformed(
                    id,
                    format!("owner {} is not a valid agent", a.owner),
                ));
            }
            for (list, what) in [(&a.pre, "precondition"), (&a.eff, "effect")] {
                seen.iter_mut().for_each(|s| *s = false);
                for &f in list.iter() {
                    self.check_fact(Some(id), f, what)?;
                    if std::mem::replace(&mut seen[f.var], true) {
                        return Err(Error::malformed(
                            id,
                            format!("duplicate {what} variable {}", f.var),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_fact(&self, action: Option<ActionId>, f: Fact, what: &str) -> Result<()> {
        let Some(var) = self.variables.get(f.var) else {
            return Err(Error::malformed(
                action,
                format!("{what} refers to unknown variable {}", f.var),
            ));
        };
        if f.val as usize >= var.domain_size() {
            return Err(Error::malformed(
                action,
                format!("{what} value {} out of range for variable {}", f.val, f.var),
            ));
        }
        Ok(())
    }
}

/// Whether `action` is applicable in `state`.
pub fn applicable(task: &Task, action: ActionId, state: &[u32]) -> bool {
    task.actions[action].applicable(state)
}

/// Successor state; rejects inapplicable actions.
pub fn apply(task: &Task, action: ActionId, state: &[u32]) -> Result<State> {
    let a = &task.actions[action];
    if !a.applicable(state) {
        return Err(Error::NotApplicable { action });
    }
    let mut next = state.to_vec();
    a.apply_in_place(&mut next);
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Privacy {
    Public,
    Private(AgentId),
}

impl Privacy {
    pub fn is_public(self) -> bool {
        self == Privacy::Public
    }
}

/// Result of [`classify`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    /// Indexed `[var][val]`.
    pub fact_privacy: Vec<Vec<Privacy>>,
    /// A variable is private to `k` iff every one of its facts is.
    pub var_privacy: Vec<Privacy>,
    pub action_public: Vec<bool>,
    /// Goal facts that no action requires, achieves or destroys. They are
    /// classified public.
    pub goal_only_facts: Vec<Fact>,
}

impl Classification {
    pub fn fact(&self, f: Fact) -> Privacy {
        self.fact_privacy[f.var][f.val as usize]
    }

    pub fn is_public_fact(&self, f: Fact) -> bool {
        self.fact(f).is_public()
    }

    pub fn is_public_action(&self, a: ActionId) -> bool {
        self.action_public[a]
    }

    pub fn is_public_var(&self, v: VarId) -> bool {
        self.var_privacy[v].is_public()
    }

    pub fn public_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.var_privacy.len()).filter(|&v| self.is_public_var(v))
    }

    pub fn private_vars_of(&self, agent: AgentId) -> impl Iterator<Item = VarId> + '_ {
        (0..self.var_privacy.len()).filter(move |&v| self.var_privacy[v] == Privacy::Private(agent))
    }
}

/// Classifies facts, variables and actions as private or public.
///
/// An action touches a fact when it requires it, achieves it, or destroys it.
/// An effect on a variable achieves the assigned value and destroys every other
/// value of that variable, so it touches all facts of the variable. A fact is
/// private to `k` iff all actions touching it belong to `k`; goal facts are
/// always public. An action is private iff every fact it touches is private.
pub fn classify(task: &Task) -> Result<Classification> {
    task.validate()?;
    let nvars = task.variables.len();
    let mut touchers: Vec<Vec<u64>> = task
        .variables
        .iter()
        .map(|v| vec![0u64; v.domain_size()])
        .collect();
    for a in &task.actions {
        let bit = 1u64 << a.owner;
        for f in &a.pre {
            touchers[f.var][f.val as usize] |= bit;
        }
        for f in &a.eff {
            touchers[f.var].iter_mut().for_each(|t| *t |= bit);
        }
    }

    let mut is_goal = vec![vec![false; 0]; nvars];
    for (v, var) in task.variables.iter().enumerate() {
        is_goal[v] = vec![false; var.domain_size()];
    }
    for f in &task.goal {
        is_goal[f.var][f.val as usize] = true;
    }

    let mut fact_privacy: Vec<Vec<Privacy>> = Vec::with_capacity(nvars);
    let mut goal_only_facts = Vec::new();
    for v in 0..nvars {
        // Owner shared by every touched, non-goal fact of the variable, if any.
        let mut var_owner: Option<Option<AgentId>> = None;
        for (val, &t) in touchers[v].iter().enumerate() {
            if is_goal[v][val] || t == 0 {
                continue;
            }
            let single = (t.count_ones() == 1).then(|| t.trailing_zeros() as AgentId);
            var_owner = match var_owner {
                None => Some(single),
                Some(prev) if prev == single => Some(prev),
                Some(_) => Some(None),
            };
        }
        let row = touchers[v]
            .iter()
            .enumerate()
            .map(|(val, &t)| {
                if is_goal[v][val] {
                    if t == 0 {
                        goal_only_facts.push(Fact::new(v, val as u32));
                    }
                    Privacy::Public
                } else if t == 0 {
                    match var_owner {
                        Some(Some(k)) => Privacy::Private(k),
                        _ => Privacy::Public,
                    }
                } else if t.count_ones() == 1 {
                    Privacy::Private(t.trailing_zeros() as AgentId)
                } else {
                    Privacy::Public
                }
            })
            .collect();
        fact_privacy.push(row);
    }

    let var_privacy: Vec<Privacy> = fact_privacy
        .iter()
        .map(|row| {
            let first = row[0];
            if matches!(first, Privacy::Private(_)) && row.iter().all(|&p| p == first) {
                first
            } else {
                Privacy::Public
            }
        })
        .collect();

    let action_public = task
        .actions
        .iter()
        .map(|a| {
            let mine = Privacy::Private(a.owner);
            let pre_private = a
                .pre
                .iter()
                .all(|f| fact_privacy[f.var][f.val as usize] == mine);
            let eff_private = a.eff.iter().all(|f| var_privacy[f.var] == mine);
            !(pre_private && eff_private)
        })
        .collect();

    Ok(Classification {
        fact_privacy,
        var_privacy,
        action_public,
        goal_only_facts,
    })
}

/// Copy of a public action with its private preconditions and effects removed.
pub fn public_projection(task: &Task, action: ActionId, cls: &Classification) -> Result<Action> {
    if !cls.is_public_action(action) {
        return Err(Error::PrivateAction(action));
    }
    let a = &task.actions[action];
    Ok(Action {
        name: a.name.clone(),
        owner: a.owner,
        pre: a
            .pre
            .iter()
            .copied()
            .filter(|&f| cls.is_public_fact(f))
            .collect(),
        eff: a
            .eff
            .iter()
            .copied()
            .filter(|&f| cls.is_public_fact(f))
            .collect(),
        cost: a.cost,
    })
}

/// Bit mask with one bit per agent id.
pub type AgentSet = u64;

pub fn agent_bit(agent: AgentId) -> AgentSet {
    1u64 << agent
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::figure_one;

    fn act(owner: AgentId, pre: &[(usize, u32)], eff: &[(usize, u32)]) -> Action {
        Action {
            name: format!("a{owner}"),
            owner,
            pre: pre.iter().map(|&p| p.into()).collect(),
            eff: eff.iter().map(|&p| p.into()).collect(),
            cost: 1,
        }
    }

    fn two_var_task(actions: Vec<Action>, agents: usize) -> Task {
        Task {
            variables: vec![Variable::with_size("x", 3), Variable::with_size("y", 3)],
            init: vec![0, 0],
            goal: vec![Fact::new(1, 2)],
            actions,
            agents: (0..agents)
                .map(|i| Agent::named(format!("ag{i}")))
                .collect(),
        }
    }

    #[test]
    fn single_agent_only_goal_achievers_public() {
        let task = two_var_task(
            vec![act(0, &[(0, 0)], &[(0, 1)]), act(0, &[(0, 1)], &[(1, 2)])],
            1,
        );
        let cls = classify(&task).unwrap();
        assert_eq!(cls.action_public, vec![false, true]);
        assert!(cls.is_public_var(1));
        assert_eq!(cls.var_privacy[0], Privacy::Private(0));
    }

    #[test]
    fn figure_one_classification() {
        let task = figure_one();
        let cls = classify(&task).unwrap();
        let public: Vec<&str> = task
            .actions
            .iter()
            .enumerate()
            .filter(|(i, _)| cls.action_public[*i])
            .map(|(_, a)| a.name.as_str())
            .collect();
        assert_eq!(public, vec!["a5", "a8"]);
        for val in 0..3 {
            assert!(cls.is_public_fact(Fact::new(3, val)));
        }
        assert_eq!(cls.var_privacy[0], Privacy::Private(0));
        assert_eq!(cls.var_privacy[1], Privacy::Private(0));
        assert_eq!(cls.var_privacy[2], Privacy::Private(1));
        assert_eq!(cls.public_vars().collect::<Vec<_>>(), vec![3]);
    }

    #[test]
    fn duplicate_precondition_rejected_with_action_id() {
        let task = two_var_task(
            vec![act(0, &[], &[(0, 1)]), act(0, &[(0, 0), (0, 1)], &[(1, 2)])],
            1,
        );
        match classify(&task) {
            Err(Error::MalformedTask {
                action: Some(1), ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reader_of_one_value_makes_writer_public() {
        // Agent 0 writes x freely; agent 1 only reads x=2. Agent 0's writer can
        // destroy x=2, so it must be public even though x=0/x=1 stay private.
        let task = two_var_task(
            vec![
                act(0, &[(0, 0)], &[(0, 1)]),
                act(0, &[], &[(0, 2)]),
                act(1, &[(0, 2)], &[(1, 2)]),
            ],
            2,
        );
        let cls = classify(&task).unwrap();
        assert_eq!(cls.fact(Fact::new(0, 2)), Privacy::Public);
        assert!(cls.is_public_var(0));
        assert_eq!(cls.action_public, vec![true, true, true]);
    }

    #[test]
    fn goal_only_fact_is_public_and_flagged() {
        let task = Task {
            variables: vec![Variable::with_size("x", 2), Variable::with_size("c", 2)],
            init: vec![0, 1],
            goal: vec![Fact::new(1, 1)],
            actions: vec![act(0, &[(0, 0)], &[(0, 1)])],
            agents: vec![Agent::named("a")],
        };
        let cls = classify(&task).unwrap();
        assert_eq!(cls.goal_only_facts, vec![Fact::new(1, 1)]);
        assert!(cls.is_public_fact(Fact::new(1, 1)));
    }

    #[test]
    fn projection_drops_private_parts() {
        let task = figure_one();
        let cls = classify(&task).unwrap();
        let a5 = task.actions.iter().position(|a| a.name == "a5").unwrap();
        let p = public_projection(&task, a5, &cls).unwrap();
        assert_eq!(p.pre, vec![Fact::new(3, 0)]);
        assert_eq!(p.eff, vec![Fact::new(3, 1)]);
        assert_eq!(p.cost, task.actions[a5].cost);
        assert_eq!(p.owner, 0);
        assert!(matches!(
            public_projection(&task, 0, &cls),
            Err(Error::PrivateAction(0))
        ));
    }

    #[test]
    fn projection_of_all_public_action_is_identity() {
        let task = two_var_task(
            vec![act(0, &[(1, 0)], &[(1, 2)]), act(1, &[(1, 2)], &[(1, 1)])],
            2,
        );
        let cls = classify(&task).unwrap();
        assert_eq!(public_projection(&task, 0, &cls).unwrap(), task.actions[0]);
    }

    #[test]
    fn apply_semantics() {
        let task = figure_one();
        let a5 = task.actions.iter().position(|a| a.name == "a5").unwrap();
        assert!(apply(&task, a5, &[0, 0, 0, 0]).is_err());
        assert_eq!(apply(&task, a5, &[2, 2, 0, 0]).unwrap(), vec![2, 2, 0, 1]);
        let free = Action {
            name: "free".into(),
            owner: 0,
            pre: vec![],
            eff: vec![Fact::new(0, 1)],
            cost: 0,
        };
        assert!(free.applicable(&[0, 0, 0, 0]));
        assert!(free.applicable(&[2, 1, 0, 2]));
    }
}
