//! Brute-force ground truth: uniform-cost search over the explicit state
//! space. Shares no code with the heuristic search modules.

use crate::model::{Cost, State, Task};
use serde::Serialize;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

pub const DEFAULT_STATE_LIMIT: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleResult {
    Cost(Cost),
    Unsolvable,
    TooLarge,
}

fn successors<'a>(task: &'a Task, s: &'a [u32]) -> impl Iterator<Item = (State, Cost)> + 'a {
    task.actions
        .iter()
        .filter(|a| a.applicable(s))
        .map(move |a| {
            let mut t = s.to_vec();
            a.apply_in_place(&mut t);
            (t, a.cost)
        })
}

/// Optimal plan cost by Dijkstra; `TooLarge` once more than `state_limit`
/// distinct states have been discovered.
pub fn oracle_optimal_cost(task: &Task, state_limit: usize) -> OracleResult {
    let mut dist: HashMap<State, Cost> = HashMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(task.init.clone(), 0);
    heap.push(Reverse((0, task.init.clone())));
    while let Some(Reverse((d, s))) = heap.pop() {
        if dist.get(&s).is_some_and(|&best| best < d) {
            continue;
        }
        if task.is_goal(&s) {
            return OracleResult::Cost(d);
        }
        for (t, c) in successors(task, &s) {
            let nd = d + c;
            match dist.get_mut(&t) {
                Some(old) if *old <= nd => {}
                Some(old) => {
                    *old = nd;
                    heap.push(Reverse((nd, t)));
                }
                None => {
                    if dist.len() >= state_limit {
                        return OracleResult::TooLarge;
                    }
                    dist.insert(t.clone(), nd);
                    heap.push(Reverse((nd, t)));
                }
            }
        }
    }
    OracleResult::Unsolvable
}

/// All states reachable from the initial state in breadth-first order, or
/// `None` when there are more than `limit`.
pub fn reachable_states(task: &Task, limit: usize) -> Option<Vec<State>> {
    let mut seen: HashMap<State, ()> = HashMap::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::from([task.init.clone()]);
    seen.insert(task.init.clone(), ());
    while let Some(s) = queue.pop_front() {
        for (t, _) in successors(task, &s) {
            if !seen.contains_key(&t) {
                if seen.len() >= limit {
                    return None;
                }
                seen.insert(t.clone(), ());
                queue.push_back(t);
            }
        }
        order.push(s);
    }
    Some(order)
}

/// Optimal cost-to-go for every reachable state; dead ends are absent from the
/// map. `None` when the reachable space exceeds `limit`.
pub fn remaining_costs(task: &Task, limit: usize) -> Option<HashMap<State, Cost>> {
    let states = reachable_states(task, limit)?;
    let index: HashMap<&State, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut reverse: Vec<Vec<(usize, Cost)>> = vec![Vec::new(); states.len()];
    for (i, s) in states.iter().enumerate() {
        for (t, c) in successors(task, s) {
            reverse[index[&t]].push((i, c));
        }
    }
    let mut dist = vec![Cost::MAX; states.len()];
    let mut heap = BinaryHeap::new();
    for (i, s) in states.iter().enumerate() {
        if task.is_goal(s) {
            dist[i] = 0;
            heap.push(Reverse((0, i)));
        }
    }
    while let Some(Reverse((d, i))) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        for &(p, c) in &reverse[i] {
            if d + c < dist[p] {
                dist[p] = d + c;
                heap.push(Reverse((d + c, p)));
            }
        }
    }
    Some(
        states
            .into_iter()
            .zip(dist)
            .filter(|&(_, d)| d != Cost::MAX)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::figure_one;

    #[test]
    fn figure_one_costs_eight_with_31_states() {
        let t = figure_one();
        assert_eq!(oracle_optimal_cost(&t, 1000), OracleResult::Cost(8));
        assert_eq!(reachable_states(&t, 1000).unwrap().len(), 31);
        assert_eq!(remaining_costs(&t, 1000).unwrap()[&t.init], 8);
    }

    #[test]
    fn limit_reports_too_large() {
        assert_eq!(
            oracle_optimal_cost(&figure_one(), 5),
            OracleResult::TooLarge
        );
        assert!(reachable_states(&figure_one(), 5).is_none());
    }

    #[test]
    fn dead_ends_have_no_remaining_cost() {
        let mut t = figure_one();
        // Without a8 the goal is unreachable everywhere.
        t.actions.pop();
        assert_eq!(oracle_optimal_cost(&t, 1000), OracleResult::Unsolvable);
        assert!(remaining_costs(&t, 1000).unwrap().is_empty());
    }
}
