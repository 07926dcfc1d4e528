//! Runs all agents in one thread over a [`SimNetwork`].

use super::{Agent, Event, PlanReport, PlannerConfig};
use crate::error::{Error, Result};
use crate::model::{agent_bit, classify, AgentId, AgentSet, Cost, Task};
use crate::ppastar::{Limits, SearchOutcome};
use crate::transport::sim::{SimNetwork, SimParams};
use crate::transport::{Message, Outcome};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use std::time::Instant;

#[derive(Clone, Copy, Debug, Default)]
pub struct SimOptions {
    /// Seeds delivery delays, stalls and the order agents run in.
    pub seed: u64,
    pub max_delay: u64,
    pub stall: f64,
    /// Crash this agent at this tick.
    pub fail: Option<(AgentId, u64)>,
    pub limits: Limits,
    /// Check every confirmation against the global state.
    pub check_safety: bool,
}

/// Ticks with no work and nothing in flight before the run is declared
/// stuck.
const STALL_TICKS: u64 = 4;

fn flush(net: &mut SimNetwork, from: AgentId, out: &mut Vec<(AgentId, Message)>) {
    for (to, m) in out.drain(..) {
        net.send(from, to, &m);
    }
}

/// Least f over every live agent's open nodes and candidates and every
/// in-flight search node, ignoring paths through crashed agents.
fn global_bound(agents: &[Agent], net: &SimNetwork) -> Cost {
    let dead: AgentSet = net.dead();
    let held = agents
        .iter()
        .filter(|a| dead & agent_bit(a.me()) == 0)
        .map(|a| a.lower_bound(dead))
        .min()
        .unwrap_or(Cost::MAX);
    let flight = net
        .in_flight()
        .into_iter()
        .filter(|(_, to, m)| {
            dead & agent_bit(*to) == 0
                && match m {
                    Message::State { participants, .. }
                    | Message::GoalCandidate { participants, .. } => participants & dead == 0,
                    _ => false,
                }
        })
        .filter_map(|(_, _, m)| m.carried_f())
        .min()
        .unwrap_or(Cost::MAX);
    held.min(flight)
}

pub fn run_simulated(task: &Task, config: &PlannerConfig, opts: &SimOptions) -> Result<PlanReport> {
    let cls = classify(task)?;
    let n = task.num_agents();
    let shared = Arc::new(task.clone());
    let mut agents = (0..n)
        .map(|i| Agent::new(Arc::clone(&shared), &cls, i, *config))
        .collect::<Result<Vec<_>>>()?;
    let mut net = SimNetwork::new(
        n,
        SimParams {
            seed: opts.seed,
            max_delay: opts.max_delay,
            stall: opts.stall,
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(0x5eed));
    let mut order: Vec<AgentId> = (0..n).collect();
    let mut out = Vec::new();
    let mut confirmations = 0;
    let mut violations = 0;
    let mut quiet = 0;
    let finish = |outcome: SearchOutcome,
                  result: Option<&Outcome>,
                  agents: &[Agent],
                  net: &SimNetwork,
                  confirmations,
                  violations| {
        let mut r = PlanReport::assemble(
            outcome,
            result,
            agents.iter().map(Agent::stats).collect(),
            net.total_stats(),
        );
        r.ticks = net.now();
        r.confirmations = confirmations;
        r.safety_violations = violations;
        r
    };
    loop {
        net.tick();
        if let Some((k, at)) = opts.fail {
            if at == net.now() {
                net.kill(k);
            }
        }
        order.shuffle(&mut rng);
        let mut busy = false;
        for &i in &order {
            if net.is_dead(i) {
                continue;
            }
            for (from, msg) in net.deliver(i)? {
                busy = true;
                agents[i].handle(from, msg, &mut out)?;
            }
            busy |= agents[i].work(&mut out)?;
            for ev in agents[i].take_events() {
                let Event::Confirmed { cost } = ev;
                confirmations += 1;
                if opts.check_safety && global_bound(&agents, &net) < cost {
                    violations += 1;
                }
            }
            flush(&mut net, i, &mut out);
            if let Some(o) = agents[i].outcome() {
                let o = o.clone();
                let outcome = match o {
                    Outcome::Solved { .. } => SearchOutcome::Solved,
                    Outcome::Unsolvable => SearchOutcome::Unsolvable,
                };
                return Ok(finish(
                    outcome,
                    Some(&o),
                    &agents,
                    &net,
                    confirmations,
                    violations,
                ));
            }
        }
        let nodes: usize = agents.iter().map(|a| a.space().len()).sum();
        if opts.limits.max_nodes.is_some_and(|m| nodes > m) {
            return Ok(finish(
                SearchOutcome::Memory,
                None,
                &agents,
                &net,
                confirmations,
                violations,
            ));
        }
        if opts.limits.deadline.is_some_and(|d| Instant::now() >= d) {
            return Ok(finish(
                SearchOutcome::Timeout,
                None,
                &agents,
                &net,
                confirmations,
                violations,
            ));
        }
        if busy || net.in_flight_len() > 0 {
            quiet = 0;
        } else {
            quiet += 1;
            if quiet > STALL_TICKS {
                return Err(Error::Internal(format!(
                    "planner stalled at tick {}",
                    net.now()
                )));
            }
        }
    }
}
