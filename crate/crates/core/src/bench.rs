//! Benchmark runs: one report per (instance, algorithm, seed) cell, plus
//! aggregate rows.

use crate::error::{Error, Result};
use crate::heuristics::HeuristicKind;
use crate::ingest::{generate_instance, load_task_json, GeneratorParams};
use crate::model::{classify, ActionId, AgentId, Cost, Task};
use crate::planner::{run_local_tcp, run_simulated, Mode, PlanReport, PlannerConfig, SimOptions};
use crate::ppastar::{astar, pp_astar, Limits, PbPruning, SearchOutcome, SearchResult};
use crate::validate::{validate_plan, Validation};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Mafs,
    MadAstar,
    Astar,
    PpAstar,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mafs => "mafs",
            Algorithm::MadAstar => "mad-astar",
            Algorithm::Astar => "astar",
            Algorithm::PpAstar => "pp-astar",
        }
    }

    pub fn distributed(self) -> bool {
        matches!(self, Algorithm::Mafs | Algorithm::MadAstar)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mafs" => Ok(Algorithm::Mafs),
            "mad-astar" => Ok(Algorithm::MadAstar),
            "astar" => Ok(Algorithm::Astar),
            "pp-astar" => Ok(Algorithm::PpAstar),
            _ => Err(format!("unknown algorithm `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportKind {
    #[default]
    Sim,
    Tcp,
}

/// Estimated bytes per search node, used to turn a memory limit into a node
/// budget.
pub fn node_bytes(task: &Task) -> usize {
    160 + 8 * task.variables.len()
}

#[derive(Clone, Copy, Debug)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub heuristic: HeuristicKind,
    pub transport: TransportKind,
    pub seed: u64,
    pub timeout: Duration,
    pub memory_limit: usize,
    /// Simulated delivery delay in ticks.
    pub max_delay: u64,
    pub robustness: bool,
    /// Simulated transport only: crash this agent at this tick.
    pub fail: Option<(AgentId, u64)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algorithm: Algorithm::MadAstar,
            heuristic: HeuristicKind::HMax,
            transport: TransportKind::Sim,
            seed: 0,
            timeout: Duration::from_secs(60),
            memory_limit: 1 << 30,
            max_delay: 0,
            robustness: false,
            fail: None,
        }
    }
}

impl RunConfig {
    pub fn limits(&self, task: &Task) -> Limits {
        Limits {
            deadline: Some(Instant::now() + self.timeout),
            max_nodes: Some(self.memory_limit / node_bytes(task)),
        }
    }

    pub fn planner(&self) -> PlannerConfig {
        let mode = match self.algorithm {
            Algorithm::Mafs => Mode::Satisficing,
            _ => Mode::Optimal,
        };
        PlannerConfig {
            mode,
            heuristic: self.heuristic,
            seed: self.seed,
            robustness: self.robustness,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub instance: String,
    pub algorithm: Algorithm,
    pub heuristic: HeuristicKind,
    pub agents: usize,
    pub seed: u64,
    pub outcome: SearchOutcome,
    pub cost: Option<Cost>,
    pub wall_ms: f64,
    pub expansions: Vec<u64>,
    pub total_expansions: u64,
    pub messages_sent: u64,
    pub bytes_sent: u64,
    pub plan: Option<Vec<ActionId>>,
    /// Whether the plan replays to the goal at the reported cost.
    pub validated: Option<bool>,
}

impl RunReport {
    fn from_central(
        instance: &str,
        cfg: &RunConfig,
        task: &Task,
        r: SearchResult,
        wall: Duration,
    ) -> Self {
        RunReport {
            instance: instance.into(),
            algorithm: cfg.algorithm,
            heuristic: cfg.heuristic,
            agents: task.num_agents(),
            seed: cfg.seed,
            outcome: r.outcome,
            cost: r.cost,
            wall_ms: wall.as_secs_f64() * 1e3,
            expansions: vec![r.expansions],
            total_expansions: r.expansions,
            messages_sent: 0,
            bytes_sent: 0,
            plan: r.plan,
            validated: None,
        }
    }

    fn from_distributed(
        instance: &str,
        cfg: &RunConfig,
        task: &Task,
        r: PlanReport,
        wall: Duration,
    ) -> Self {
        RunReport {
            instance: instance.into(),
            algorithm: cfg.algorithm,
            heuristic: cfg.heuristic,
            agents: task.num_agents(),
            seed: cfg.seed,
            outcome: r.outcome,
            cost: r.cost,
            wall_ms: wall.as_secs_f64() * 1e3,
            expansions: r.agents.iter().map(|a| a.expansions).collect(),
            total_expansions: r.expansions,
            messages_sent: r.traffic.messages_sent,
            bytes_sent: r.traffic.bytes_sent,
            plan: r.plan,
            validated: None,
        }
    }

    /// Replays the plan and records whether it reaches the goal at the
    /// reported cost.
    pub fn revalidate(&mut self, task: &Task) {
        self.validated = self.plan.as_ref().map(|p| match validate_plan(task, p) {
            Validation::Valid(c) => Some(c) == self.cost,
            Validation::Invalid { .. } => false,
        });
    }
}

/// Runs one algorithm on one task. Timeouts and node budgets end up in the
/// report's outcome; other failures are errors.
pub fn run_one(instance: &str, task: &Task, cfg: &RunConfig) -> Result<RunReport> {
    let limits = cfg.limits(task);
    let start = Instant::now();
    let mut report = match cfg.algorithm {
        Algorithm::Astar => {
            let r = astar(task, cfg.heuristic, limits)?;
            RunReport::from_central(instance, cfg, task, r, start.elapsed())
        }
        Algorithm::PpAstar => {
            let cls = classify(task)?;
            let r = pp_astar(task, &PbPruning::new(task, &cls), cfg.heuristic, limits)?;
            RunReport::from_central(instance, cfg, task, r, start.elapsed())
        }
        Algorithm::Mafs | Algorithm::MadAstar => {
            let r = match cfg.transport {
                TransportKind::Sim => {
                    let opts = SimOptions {
                        seed: cfg.seed,
                        max_delay: cfg.max_delay,
                        fail: cfg.fail,
                        limits,
                        ..Default::default()
                    };
                    run_simulated(task, &cfg.planner(), &opts)?
                }
                TransportKind::Tcp => run_local_tcp(task, &cfg.planner(), limits)?,
            };
            RunReport::from_distributed(instance, cfg, task, r, start.elapsed())
        }
    };
    report.revalidate(task);
    Ok(report)
}

/// Where a suite instance comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    Generated { generate: GeneratorParams },
    File { file: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub id: String,
    #[serde(flatten)]
    pub source: InstanceSource,
}

impl InstanceSpec {
    pub fn load(&self) -> Result<Task> {
        match &self.source {
            InstanceSource::Generated { generate } => generate_instance(generate),
            InstanceSource::File { file } => load_task_json(&std::fs::read(file)?),
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_timeout() -> f64 {
    60.0
}

fn default_memory() -> usize {
    1 << 30
}

/// Instances × algorithms × seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub instances: Vec<InstanceSpec>,
    pub algorithms: Vec<Algorithm>,
    pub heuristic: HeuristicKind,
    /// Heuristic for `mafs` cells; defaults to `heuristic`.
    #[serde(default)]
    pub satisficing_heuristic: Option<HeuristicKind>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub transport: TransportKind,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_memory")]
    pub memory_limit: usize,
}

impl SuiteSpec {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        crate::ingest::json::from_json_with_path(bytes)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub solved: usize,
    pub geo_mean_ms: Option<f64>,
    pub total_messages: u64,
    pub total_expansions: u64,
}

/// Per instance and seed: A* against PP-A* expansions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dominance {
    pub instance: String,
    pub seed: u64,
    pub astar: u64,
    pub pp_astar: u64,
}

/// Per instance and seed: centralized A* time over distributed time, divided
/// by the number of agents.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Efficiency {
    pub instance: String,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub efficiency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub rows: Vec<RunReport>,
    pub summary: Vec<AlgorithmSummary>,
    pub dominance: Vec<Dominance>,
    pub efficiency: Vec<Efficiency>,
}

pub fn run_suite(spec: &SuiteSpec) -> Result<SuiteReport> {
    let mut rows = Vec::new();
    for inst in &spec.instances {
        let task = inst.load()?;
        for &seed in &spec.seeds {
            for &algorithm in &spec.algorithms {
                let heuristic = match algorithm {
                    Algorithm::Mafs => spec.satisficing_heuristic.unwrap_or(spec.heuristic),
                    _ => spec.heuristic,
                };
                let cfg = RunConfig {
                    algorithm,
                    heuristic,
                    transport: spec.transport,
                    seed,
                    timeout: Duration::from_secs_f64(spec.timeout_secs),
                    memory_limit: spec.memory_limit,
                    ..Default::default()
                };
                rows.push(run_one(&inst.id, &task, &cfg)?);
            }
        }
    }
    Ok(summarize(rows))
}

pub fn summarize(rows: Vec<RunReport>) -> SuiteReport {
    let mut algorithms: Vec<Algorithm> = Vec::new();
    for r in &rows {
        if !algorithms.contains(&r.algorithm) {
            algorithms.push(r.algorithm);
        }
    }
    let summary = algorithms
        .iter()
        .map(|&a| {
            let mine: Vec<&RunReport> = rows.iter().filter(|r| r.algorithm == a).collect();
            let solved: Vec<&&RunReport> = mine
                .iter()
                .filter(|r| r.outcome == SearchOutcome::Solved)
                .collect();
            let geo_mean_ms = (!solved.is_empty()).then(|| {
                (solved.iter().map(|r| r.wall_ms.max(1e-3).ln()).sum::<f64>() / solved.len() as f64)
                    .exp()
            });
            AlgorithmSummary {
                algorithm: a,
                solved: solved.len(),
                geo_mean_ms,
                total_messages: mine.iter().map(|r| r.messages_sent).sum(),
                total_expansions: mine.iter().map(|r| r.total_expansions).sum(),
            }
        })
        .collect();
    let find = |inst: &str, seed: u64, a: Algorithm| {
        rows.iter()
            .find(|r| r.instance == inst && r.seed == seed && r.algorithm == a)
    };
    let mut dominance = Vec::new();
    let mut efficiency = Vec::new();
    for r in rows.iter().filter(|r| r.algorithm == Algorithm::Astar) {
        if let Some(p) = find(&r.instance, r.seed, Algorithm::PpAstar) {
            if r.outcome == SearchOutcome::Solved && p.outcome == SearchOutcome::Solved {
                dominance.push(Dominance {
                    instance: r.instance.clone(),
                    seed: r.seed,
                    astar: r.total_expansions,
                    pp_astar: p.total_expansions,
                });
            }
        }
        for d in [Algorithm::Mafs, Algorithm::MadAstar] {
            if let Some(x) = find(&r.instance, r.seed, d) {
                if r.outcome == SearchOutcome::Solved
                    && x.outcome == SearchOutcome::Solved
                    && x.wall_ms > 0.0
                {
                    efficiency.push(Efficiency {
                        instance: r.instance.clone(),
                        seed: r.seed,
                        algorithm: d,
                        efficiency: r.wall_ms / x.wall_ms / x.agents as f64,
                    });
                }
            }
        }
    }
    SuiteReport {
        rows,
        summary,
        dominance,
        efficiency,
    }
}

impl SuiteReport {
    /// Aligned text table: one line per run, then the aggregate rows.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<20} {:<10} {:<9} {:>6} {:>4} {:<10} {:>6} {:>11} {:>12} {:>10} {:>12}",
            "instance",
            "algorithm",
            "heuristic",
            "agents",
            "seed",
            "outcome",
            "cost",
            "time (ms)",
            "expansions",
            "messages",
            "bytes"
        );
        for r in &self.rows {
            let outcome = serde_json::to_value(r.outcome)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default();
            let cost = r.cost.map(|c| c.to_string()).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{:<20} {:<10} {:<9} {:>6} {:>4} {:<10} {:>6} {:>11.1} {:>12} {:>10} {:>12}",
                r.instance,
                r.algorithm.name(),
                r.heuristic.name(),
                r.agents,
                r.seed,
                outcome,
                cost,
                r.wall_ms,
                r.total_expansions,
                r.messages_sent,
                r.bytes_sent
            );
        }
        let _ = writeln!(s);
        for a in &self.summary {
            let gm = a
                .geo_mean_ms
                .map(|g| format!("{g:.1}"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{:<10} solved {:>4}  geo-mean time {:>9} ms  expansions {:>12}  messages {:>10}",
                a.algorithm.name(),
                a.solved,
                gm,
                a.total_expansions,
                a.total_messages
            );
        }
        if !self.dominance.is_empty() {
            let fewer = self
                .dominance
                .iter()
                .filter(|d| d.pp_astar < d.astar)
                .count();
            let never_more = self.dominance.iter().all(|d| d.pp_astar <= d.astar);
            let _ = writeln!(
                s,
                "pp-astar expansions <= astar on all pairs: {never_more}; strictly fewer on {fewer}/{}",
                self.dominance.len()
            );
        }
        for e in &self.efficiency {
            let _ = writeln!(
                s,
                "efficiency {} seed {} {}: {:.3}",
                e.instance,
                e.seed,
                e.algorithm.name(),
                e.efficiency
            );
        }
        s
    }
}

/// Fails if any solved row does not replay.
pub fn check_rows(rows: &[RunReport]) -> Result<()> {
    for r in rows {
        if r.outcome == SearchOutcome::Solved && r.validated != Some(true) {
            return Err(Error::Internal(format!(
                "{} {} seed {}: plan does not validate",
                r.instance,
                r.algorithm.name(),
                r.seed
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::figure_one;

    #[test]
    fn figure_one_rows() {
        let task = figure_one();
        for a in [
            Algorithm::Astar,
            Algorithm::PpAstar,
            Algorithm::MadAstar,
            Algorithm::Mafs,
        ] {
            let cfg = RunConfig {
                algorithm: a,
                heuristic: if a == Algorithm::Mafs {
                    HeuristicKind::FF
                } else {
                    HeuristicKind::HMax
                },
                ..Default::default()
            };
            let r = run_one("fig1", &task, &cfg).unwrap();
            assert_eq!(r.outcome, SearchOutcome::Solved);
            assert_eq!(r.validated, Some(true));
            if a != Algorithm::Mafs {
                assert_eq!(r.cost, Some(8));
            }
            assert_eq!(r.expansions.len(), if a.distributed() { 2 } else { 1 });
        }
    }

    #[test]
    fn suite_spec_parses() {
        let spec = br#"{
            "instances": [{"id": "l0", "generate": {"domain": "logistics", "agents": 2, "locations": 3, "packages": 1, "seed": 0}}],
            "algorithms": ["astar", "pp-astar", "mad-astar"],
            "heuristic": "hmax",
            "seeds": [0, 1]
        }"#;
        let spec = SuiteSpec::from_json(spec).unwrap();
        let report = run_suite(&spec).unwrap();
        assert_eq!(report.rows.len(), 6);
        assert_eq!(report.dominance.len(), 2);
        assert!(report.dominance.iter().all(|d| d.pp_astar <= d.astar));
        check_rows(&report.rows).unwrap();
        assert!(report.to_text().contains("geo-mean"));
    }
}
