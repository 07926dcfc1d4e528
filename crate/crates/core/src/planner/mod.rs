//! The distributed planner: one [`Agent`] per agent of the task, exchanging
//! states over a transport. Satisficing mode runs MAFS with greedy best-first
//! search; optimal mode runs MAD-A* and confirms a solution with a snapshot.

mod agent;
pub mod sim;
pub mod tcp;

pub use agent::{Agent, AgentStats, Event, Info, Origin};
pub use sim::{run_simulated, SimOptions};
pub use tcp::{run_agent_tcp, run_local_tcp, AgentRun};

use crate::heuristics::{CombinePolicy, HeuristicKind};
use crate::model::{ActionId, Cost};
use crate::ppastar::SearchOutcome;
use crate::transport::{TokenMode, TrafficStats};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Satisficing,
    #[default]
    Optimal,
}

/// When a state reached by a public action is sent to other agents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SendTiming {
    /// When the state is expanded.
    #[default]
    Lazy,
    /// When the state is generated.
    Eager,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub mode: Mode,
    pub heuristic: HeuristicKind,
    pub combine: CombinePolicy,
    pub timing: SendTiming,
    pub tokens: TokenMode,
    /// Keys nodes by the set of agents on their path, so the search can
    /// continue without a crashed agent.
    pub robustness: bool,
    /// Ignore goals and search until the space is exhausted.
    pub exhaustive: bool,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            mode: Mode::Optimal,
            heuristic: HeuristicKind::HMax,
            combine: CombinePolicy::Max,
            timing: SendTiming::Lazy,
            tokens: TokenMode::Deterministic,
            robustness: false,
            exhaustive: false,
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn satisficing(heuristic: HeuristicKind) -> Self {
        PlannerConfig {
            mode: Mode::Satisficing,
            heuristic,
            ..Default::default()
        }
    }

    pub fn optimal(heuristic: HeuristicKind) -> Self {
        PlannerConfig {
            mode: Mode::Optimal,
            heuristic,
            ..Default::default()
        }
    }

    pub fn check(&self) -> crate::Result<()> {
        if self.mode == Mode::Optimal && !self.exhaustive && !self.heuristic.admissible() {
            return Err(crate::Error::Config(format!(
                "optimal mode needs an admissible heuristic, not {}",
                self.heuristic.name()
            )));
        }
        Ok(())
    }
}

/// Result of a distributed run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PlanReport {
    pub outcome: SearchOutcome,
    pub plan: Option<Vec<ActionId>>,
    pub cost: Option<Cost>,
    /// f of every state on the plan's path, from the initial state.
    pub f_trace: Vec<Cost>,
    pub agents: Vec<AgentStats>,
    pub traffic: TrafficStats,
    /// Distinct search nodes over all agents, counting the shared initial
    /// node once.
    pub search_nodes: u64,
    pub expansions: u64,
    /// Logical clock ticks of a simulated run; zero over TCP.
    pub ticks: u64,
    /// Solutions confirmed by a snapshot.
    pub confirmations: u64,
    /// Confirmations at which some live open node, unconfirmed candidate
    /// or in-flight state had a lower f than the confirmed cost. Only
    /// counted when checking is enabled.
    pub safety_violations: u64,
}

impl PlanReport {
    pub(crate) fn assemble(
        outcome: SearchOutcome,
        result: Option<&crate::transport::Outcome>,
        agents: Vec<AgentStats>,
        traffic: TrafficStats,
    ) -> Self {
        let (plan, cost, f_trace) = match result {
            Some(crate::transport::Outcome::Solved {
                cost,
                plan,
                f_trace,
            }) => (Some(plan.clone()), Some(*cost), f_trace.clone()),
            _ => (None, None, Vec::new()),
        };
        let search_nodes = 1 + agents
            .iter()
            .map(|a| a.nodes.saturating_sub(1))
            .sum::<u64>();
        let expansions = agents.iter().map(|a| a.expansions).sum();
        PlanReport {
            outcome,
            plan,
            cost,
            f_trace,
            agents,
            traffic,
            search_nodes,
            expansions,
            ticks: 0,
            confirmations: 0,
            safety_violations: 0,
        }
    }
}
