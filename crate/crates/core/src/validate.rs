//! Plan validation by simulation from the initial state.

use crate::model::{applicable, apply, ActionId, Classification, Cost, Task};
use crate::oracle::reachable_states;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Validation {
    Valid(Cost),
    Invalid { step: usize, reason: String },
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validation::Valid(_))
    }

    pub fn cost(&self) -> Option<Cost> {
        match self {
            Validation::Valid(c) => Some(*c),
            Validation::Invalid { .. } => None,
        }
    }
}

/// Replays `plan` from the initial state. `step` in an invalid result is the
/// index of the offending action, or `plan.len()` when the goal fails.
pub fn validate_plan(task: &Task, plan: &[ActionId]) -> Validation {
    let mut state = task.init.clone();
    let mut cost: Cost = 0;
    for (step, &a) in plan.iter().enumerate() {
        let Some(action) = task.actions.get(a) else {
            return Validation::Invalid {
                step,
                reason: format!("unknown action id {a}"),
            };
        };
        if let Some(f) = action.pre.iter().find(|f| !f.holds(&state)) {
            return Validation::Invalid {
                step,
                reason: format!(
                    "`{}` requires {}={} but it is {}",
                    action.name, task.variables[f.var].name, f.val, state[f.var]
                ),
            };
        }
        action.apply_in_place(&mut state);
        cost = cost.saturating_add(action.cost);
    }
    match task.goal.iter().find(|f| !f.holds(&state)) {
        Some(f) => Validation::Invalid {
            step: plan.len(),
            reason: format!("goal {}={} not reached", task.variables[f.var].name, f.val),
        },
        None => Validation::Valid(cost),
    }
}

/// Checks the shape of plans found by forward search with message passing:
/// the actions up to and including the first public action share one owner,
/// and so does every run that starts after one public action and ends with
/// the next. Actions after the last public action share one owner too.
pub fn check_plan_shape(
    task: &Task,
    cls: &Classification,
    plan: &[ActionId],
) -> Result<(), String> {
    let mut start = 0;
    for i in 0..plan.len() {
        let last = i + 1 == plan.len();
        if cls.is_public_action(plan[i]) || last {
            let owner = task.actions[plan[i]].owner;
            if let Some(j) = (start..=i).find(|&j| task.actions[plan[j]].owner != owner) {
                return Err(format!(
                    "step {j} (`{}`) is by agent {} but the run ending at step {i} is by agent {owner}",
                    task.actions[plan[j]].name, task.actions[plan[j]].owner
                ));
            }
            start = i + 1;
        }
    }
    Ok(())
}

/// Checks on every reachable state that an action commutes with any action
/// of another agent when at least one of the two is private. Returns the
/// number of pairs checked, or `None` if more than `limit` states are
/// reachable.
pub fn check_commutation(
    task: &Task,
    cls: &Classification,
    limit: usize,
) -> Option<Result<u64, String>> {
    let states = reachable_states(task, limit)?;
    let mut pairs = 0;
    for s in &states {
        for a in 0..task.actions.len() {
            if !applicable(task, a, s) {
                continue;
            }
            let sa = apply(task, a, s).expect("applicable");
            for b in 0..task.actions.len() {
                let (oa, ob) = (task.actions[a].owner, task.actions[b].owner);
                if oa == ob
                    || (cls.is_public_action(a) && cls.is_public_action(b))
                    || !applicable(task, b, &sa)
                {
                    continue;
                }
                pairs += 1;
                let names =
                    || format!("`{}` then `{}`", task.actions[a].name, task.actions[b].name);
                if !applicable(task, b, s) {
                    return Some(Err(format!(
                        "{}: second action not applicable first",
                        names()
                    )));
                }
                let sb = apply(task, b, s).expect("applicable");
                if !applicable(task, a, &sb) {
                    return Some(Err(format!(
                        "{}: first action not applicable second",
                        names()
                    )));
                }
                if apply(task, b, &sa).ok() != apply(task, a, &sb).ok() {
                    return Some(Err(format!("{}: orders reach different states", names())));
                }
            }
        }
    }
    Some(Ok(pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::figure_one;

    #[test]
    fn empty_plan_on_satisfied_goal() {
        let mut t = figure_one();
        t.goal.clear();
        assert_eq!(validate_plan(&t, &[]), Validation::Valid(0));
    }

    #[test]
    fn figure_one_plan() {
        let t = figure_one();
        assert_eq!(
            validate_plan(&t, &[0, 1, 2, 3, 4, 5, 6, 7]),
            Validation::Valid(8)
        );
        assert!(
            !validate_plan(&t, &[5, 0, 6, 1, 2, 3, 4, 6, 7]).is_valid()
        );
    }

    #[test]
    fn shape_of_figure_one_plans() {
        let t = figure_one();
        let cls = crate::model::classify(&t).unwrap();
        assert!(check_plan_shape(&t, &cls, &[0, 1, 2, 3, 4, 5, 6, 7]).is_ok());
        // A run mixing agents before a public action.
        let err = check_plan_shape(&t, &cls, &[5, 0, 1, 2, 3, 4, 6, 7]).unwrap_err();
        assert!(err.contains("step 0"), "{err}");
    }

    #[test]
    fn figure_one_commutes() {
        let t = figure_one();
        let cls = crate::model::classify(&t).unwrap();
        let pairs = check_commutation(&t, &cls, 1000).unwrap().unwrap();
        assert!(pairs > 0);
    }

    #[test]
    fn reports_first_bad_step() {
        let t = figure_one();
        match validate_plan(&t, &[0, 3]) {
            Validation::Invalid { step, .. } => assert_eq!(step, 1),
            v => panic!("{v:?}"),
        }
        match validate_plan(&t, &[0]) {
            Validation::Invalid { step, reason } => {
                assert_eq!(step, 1);
                assert!(reason.contains("goal"));
            }
            v => panic!("{v:?}"),
        }
    }
}
