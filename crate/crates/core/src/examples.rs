//! Small hand-encoded tasks used by tests, docs and the CLI.

use crate::model::{Action, Agent, Fact, Task, Variable};

fn action(name: &str, owner: usize, pre: &[(usize, u32)], eff: &[(usize, u32)]) -> Action {
    Action {
        name: name.to_string(),
        owner,
        pre: pre.iter().map(|&p| p.into()).collect(),
        eff: eff.iter().map(|&p| p.into()).collect(),
        cost: 1,
    }
}

/// Two-agent task with four ternary variables. Agent 0 drives `v1` and `v2`
/// up to 2 and then raises the shared `v4` to 1; agent 1 drives `v3` up to 2
/// and then raises `v4` to the goal value 2. Only `a5` and `a8` are public.
pub fn figure_one() -> Task {
    Task {
        variables: (1..=4)
            .map(|i| Variable::with_size(format!("v{i}"), 3))
            .collect(),
        init: vec![0, 0, 0, 0],
        goal: vec![Fact::new(3, 2)],
        actions: vec![
            action("a1", 0, &[(0, 0)], &[(0, 1)]),
            action("a2", 0, &[(0, 1)], &[(0, 2)]),
            action("a3", 0, &[(1, 0)], &[(1, 1)]),
            action("a4", 0, &[(1, 1)], &[(1, 2)]),
            action("a5", 0, &[(0, 2), (1, 2), (3, 0)], &[(3, 1)]),
            action("a6", 1, &[(2, 0)], &[(2, 1)]),
            action("a7", 1, &[(2, 1)], &[(2, 2)]),
            action("a8", 1, &[(2, 2), (3, 1)], &[(3, 2)]),
        ],
        agents: vec![Agent::named("agent1"), Agent::named("agent2")],
    }
}
