use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use maplan::bench::{
    check_rows, run_one, run_suite, Algorithm, RunConfig, RunReport, SuiteSpec, TransportKind,
};
use maplan::heuristics::HeuristicKind;
use maplan::ingest::{
    dump_task_json, generate_instance, load_task_json, parse_partition, parse_sas, CostModel,
    Domain, GeneratorParams, PartitionSpec, Placement,
};
use maplan::model::{classify, Privacy};
use maplan::oracle::{oracle_optimal_cost, OracleResult, DEFAULT_STATE_LIMIT};
use maplan::planner::run_agent_tcp;
use maplan::ppastar::{Limits, SearchOutcome};
use maplan::transport::Outcome;
use maplan::validate::{validate_plan, Validation};
use maplan::{ActionId, Task};
use serde::Serialize;
use std::io::{ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

#[derive(Parser)]
#[command(
    name = "maplan",
    version,
    about = "Multi-agent forward search planning"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a benchmark instance as task JSON.
    Gen(GenArgs),
    /// Print the privacy classification of a task.
    Classify {
        #[command(flatten)]
        input: TaskInput,
    },
    /// Plan with one algorithm.
    Plan(PlanArgs),
    /// Replay a plan and report its cost or the first failing step.
    Validate {
        #[command(flatten)]
        input: TaskInput,
        /// JSON array of action ids or names, or an object with a `plan` field.
        plan: PathBuf,
    },
    /// Optimal cost by uniform-cost search over the explicit state space.
    Oracle {
        #[command(flatten)]
        input: TaskInput,
        #[arg(long, default_value_t = DEFAULT_STATE_LIMIT)]
        state_limit: usize,
    },
    /// Run a benchmark suite.
    Bench {
        suite: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run one agent over TCP.
    ServeAgent(ServeArgs),
}

#[derive(Args)]
struct TaskInput {
    /// Task JSON, or a translator output file (`.sas`) with `--partition`.
    task: PathBuf,
    /// Partition file assigning actions to agents.
    #[arg(long)]
    partition: Option<PathBuf>,
}

impl TaskInput {
    fn load(&self) -> Result<Task> {
        let bytes = std::fs::read(&self.task)
            .with_context(|| format!("reading {}", self.task.display()))?;
        let is_sas = self.task.extension().is_some_and(|e| e == "sas")
            || bytes.starts_with(b"begin_version");
        let task = if is_sas {
            parse_sas(&bytes)?
        } else {
            load_task_json(&bytes)?
        };
        match &self.partition {
            Some(p) => Ok(parse_partition(
                &std::fs::read(p).with_context(|| format!("reading {}", p.display()))?,
                &task,
            )?),
            None if is_sas => bail!("a translator output file needs --partition"),
            None => Ok(task),
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Generator parameters as JSON; overrides the other flags.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value = "logistics")]
    domain: String,
    #[arg(long, default_value_t = 2)]
    agents: usize,
    #[arg(long, default_value_t = 3)]
    locations: usize,
    #[arg(long, default_value_t = 2)]
    packages: usize,
    #[arg(long, default_value_t = 0)]
    extra_depots: usize,
    #[arg(long)]
    random_costs: bool,
    #[arg(long)]
    unsolvable: bool,
    #[arg(long)]
    backup: bool,
    #[arg(long, default_value = "anywhere")]
    placement: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "mad-astar")]
    algorithm: Algorithm,
    /// hmax, hadd, ff, goalcount or blind. Defaults to ff for mafs and hmax
    /// otherwise.
    #[arg(long)]
    heuristic: Option<HeuristicKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    /// Bytes; turned into a search node budget.
    #[arg(long, default_value_t = 1 << 30)]
    memory_limit: usize,
    /// Keep planning without an agent that crashes.
    #[arg(long)]
    robustness: bool,
}

impl Common {
    fn heuristic(&self) -> HeuristicKind {
        self.heuristic.unwrap_or(match self.algorithm {
            Algorithm::Mafs => HeuristicKind::FF,
            _ => HeuristicKind::HMax,
        })
    }
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    input: TaskInput,
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "sim")]
    transport: String,
    /// Simulated transport: largest extra delivery delay in ticks.
    #[arg(long, default_value_t = 0)]
    max_delay: u64,
    /// Simulated transport: crash agent ID at tick T, given as ID@T.
    #[arg(long)]
    fail: Option<String>,
    /// Write the plan as JSON.
    #[arg(long)]
    plan_out: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    input: TaskInput,
    #[command(flatten)]
    common: Common,
    /// Partition-format file whose `address` fields give every agent's
    /// host:port. Defaults to the task's own agent addresses.
    #[arg(long)]
    roster: Option<PathBuf>,
    /// Name or id of the agent to run.
    #[arg(long)]
    agent: String,
    #[arg(long)]
    plan_out: Option<PathBuf>,
}

fn exit_code(outcome: SearchOutcome) -> ExitCode {
    ExitCode::from(match outcome {
        SearchOutcome::Solved => 0,
        SearchOutcome::Unsolvable => 10,
        SearchOutcome::Timeout => 20,
        SearchOutcome::Memory => 30,
    })
}

#[derive(Serialize)]
struct PlanFile<'a> {
    cost: Option<u64>,
    plan: &'a [ActionId],
    names: Vec<&'a str>,
}

fn write_plan(path: &Path, task: &Task, plan: &[ActionId], cost: Option<u64>) -> Result<()> {
    let file = PlanFile {
        cost,
        plan,
        names: plan
            .iter()
            .map(|&a| task.actions[a].name.as_str())
            .collect(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn read_plan(path: &Path, task: &Task) -> Result<Vec<ActionId>> {
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(path)?)?;
    let items = match &v {
        serde_json::Value::Array(a) => a,
        serde_json::Value::Object(o) => o
            .get("plan")
            .and_then(|p| p.as_array())
            .ok_or_else(|| anyhow!("plan object has no `plan` array"))?,
        _ => bail!("plan must be a JSON array or object"),
    };
    items
        .iter()
        .map(|x| match x {
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(|n| n as ActionId)
                .ok_or_else(|| anyhow!("bad action id {n}")),
            serde_json::Value::String(s) => task
                .actions
                .iter()
                .position(|a| &a.name == s)
                .ok_or_else(|| anyhow!("no action named `{s}`")),
            _ => bail!("plan entries must be ids or names"),
        })
        .collect()
}

fn gen(a: &GenArgs) -> Result<ExitCode> {
    let params = match &a.params {
        Some(p) => serde_json::from_slice(&std::fs::read(p)?)?,
        None => {
            let domain = match a.domain.as_str() {
                "logistics" => Domain::Logistics,
                "chain" => Domain::Chain,
                "random" => Domain::Random,
                d => bail!("unknown domain `{d}`"),
            };
            let placement = match a.placement.as_str() {
                "anywhere" => Placement::Anywhere,
                "depots" => Placement::Depots,
                "first-at-agent-zero" => Placement::FirstAtAgentZero,
                p => bail!("unknown placement `{p}`"),
            };
            GeneratorParams {
                domain,
                agents: a.agents,
                locations: a.locations,
                packages: a.packages,
                extra_depots: a.extra_depots,
                costs: if a.random_costs {
                    CostModel::Random
                } else {
                    CostModel::Unit
                },
                seed: a.seed,
                solvable: !a.unsolvable,
                backup: a.backup,
                placement,
            }
        }
    };
    let task = generate_instance(&params)?;
    let json = dump_task_json(&task);
    match &a.output {
        Some(p) => std::fs::write(p, json)?,
        None => emit(&json)?,
    }
    Ok(ExitCode::SUCCESS)
}

/// Writes a line to stdout. A closed pipe ends output quietly.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct ClassifyReport {
    public_facts: Vec<String>,
    private_facts: Vec<Vec<String>>,
    public_actions: Vec<String>,
    private_actions: Vec<Vec<String>>,
}

fn classify_cmd(input: &TaskInput) -> Result<ExitCode> {
    let task = input.load()?;
    let cls = classify(&task)?;
    let n = task.num_agents();
    let mut r = ClassifyReport {
        public_facts: Vec::new(),
        private_facts: vec![Vec::new(); n],
        public_actions: Vec::new(),
        private_actions: vec![Vec::new(); n],
    };
    for (v, var) in task.variables.iter().enumerate() {
        for (val, p) in cls.fact_privacy[v].iter().enumerate() {
            let name = format!("{}={}", var.name, var.domain[val]);
            match p {
                Privacy::Public => r.public_facts.push(name),
                Privacy::Private(k) => r.private_facts[*k].push(name),
            }
        }
    }
    for (i, a) in task.actions.iter().enumerate() {
        if cls.is_public_action(i) {
            r.public_actions.push(a.name.clone());
        } else {
            r.private_actions[a.owner].push(a.name.clone());
        }
    }
    emit(&serde_json::to_string_pretty(&r)?)?;
    Ok(ExitCode::SUCCESS)
}

fn print_report(r: &RunReport, json: bool) -> Result<()> {
    if json {
        return emit(&serde_json::to_string_pretty(r)?);
    }
    let outcome = serde_json::to_value(r.outcome)?;
    println!("outcome: {}", outcome.as_str().unwrap_or_default());
    if let Some(c) = r.cost {
        println!("cost: {c}");
    }
    println!("time: {:.1} ms", r.wall_ms);
    println!("expansions: {} {:?}", r.total_expansions, r.expansions);
    if r.algorithm.distributed() {
        println!("messages: {}  bytes: {}", r.messages_sent, r.bytes_sent);
    }
    if let Some(v) = r.validated {
        println!("validated: {v}");
    }
    Ok(())
}

fn plan_cmd(a: &PlanArgs) -> Result<ExitCode> {
    let task = a.input.load()?;
    let transport = match a.transport.as_str() {
        "sim" => TransportKind::Sim,
        "tcp" => TransportKind::Tcp,
        t => bail!("unknown transport `{t}`"),
    };
    let fail = a
        .fail
        .as_deref()
        .map(|s| -> Result<(usize, u64)> {
            let (k, t) = s
                .split_once('@')
                .ok_or_else(|| anyhow!("--fail expects ID@TICK"))?;
            Ok((k.parse()?, t.parse()?))
        })
        .transpose()?;
    let cfg = RunConfig {
        algorithm: a.common.algorithm,
        heuristic: a.common.heuristic(),
        transport,
        seed: a.common.seed,
        timeout: Duration::from_secs_f64(a.common.timeout),
        memory_limit: a.common.memory_limit,
        max_delay: a.max_delay,
        robustness: a.common.robustness,
        fail,
    };
    let id = a
        .input
        .task
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let r = run_one(&id, &task, &cfg)?;
    print_report(&r, a.json)?;
    if let (Some(path), Some(plan)) = (&a.plan_out, &r.plan) {
        write_plan(path, &task, plan, r.cost)?;
    }
    if r.validated == Some(false) {
        bail!("planner returned a plan that does not validate");
    }
    Ok(exit_code(r.outcome))
}

fn validate_cmd(input: &TaskInput, plan: &Path) -> Result<ExitCode> {
    let task = input.load()?;
    let plan = read_plan(plan, &task)?;
    match validate_plan(&task, &plan) {
        Validation::Valid(c) => {
            println!("valid, cost {c}");
            Ok(ExitCode::SUCCESS)
        }
        Validation::Invalid { step, reason } => {
            println!("invalid at step {step}: {reason}");
            Ok(ExitCode::from(1))
        }
    }
}

fn oracle_cmd(input: &TaskInput, limit: usize) -> Result<ExitCode> {
    let task = input.load()?;
    Ok(match oracle_optimal_cost(&task, limit) {
        OracleResult::Cost(c) => {
            println!("{c}");
            ExitCode::SUCCESS
        }
        OracleResult::Unsolvable => {
            println!("unsolvable");
            exit_code(SearchOutcome::Unsolvable)
        }
        OracleResult::TooLarge => {
            println!("too-large");
            exit_code(SearchOutcome::Memory)
        }
    })
}

fn bench_cmd(suite: &Path, json: Option<&Path>) -> Result<ExitCode> {
    let spec = SuiteSpec::from_json(
        &std::fs::read(suite).with_context(|| format!("reading {}", suite.display()))?,
    )?;
    let report = run_suite(&spec)?;
    emit(report.to_text().trim_end())?;
    if let Some(p) = json {
        std::fs::write(p, serde_json::to_string_pretty(&report)?)?;
    }
    check_rows(&report.rows)?;
    Ok(ExitCode::SUCCESS)
}

fn resolve(addr: &str) -> Result<SocketAddr> {
    addr.to_socket_addrs()?
        .next()
        .ok_or_else(|| anyhow!("`{addr}` resolves to no address"))
}

fn serve_cmd(a: &ServeArgs) -> Result<ExitCode> {
    let task = a.input.load()?;
    let roster: Vec<(String, Option<String>)> = match &a.roster {
        Some(p) => PartitionSpec::from_json(&std::fs::read(p)?)?
            .agents
            .into_iter()
            .map(|r| (r.name, r.address))
            .collect(),
        None => task
            .agents
            .iter()
            .map(|r| (r.name.clone(), r.address.clone()))
            .collect(),
    };
    if roster.len() != task.num_agents() {
        bail!(
            "roster lists {} agents, task has {}",
            roster.len(),
            task.num_agents()
        );
    }
    let me = match a.agent.parse::<usize>() {
        Ok(i) if i < roster.len() => i,
        _ => roster
            .iter()
            .position(|(name, _)| *name == a.agent)
            .ok_or_else(|| anyhow!("no agent `{}` in the roster", a.agent))?,
    };
    let addrs = roster
        .iter()
        .map(|(name, addr)| {
            resolve(
                addr.as_deref()
                    .ok_or_else(|| anyhow!("agent `{name}` has no address"))?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let listener =
        TcpListener::bind(addrs[me]).with_context(|| format!("binding {}", addrs[me]))?;
    let cfg = RunConfig {
        algorithm: a.common.algorithm,
        heuristic: a.common.heuristic(),
        seed: a.common.seed,
        robustness: a.common.robustness,
        ..Default::default()
    };
    if !cfg.algorithm.distributed() {
        bail!("serve-agent runs mafs or mad-astar");
    }
    let limits = Limits {
        deadline: Some(Instant::now() + Duration::from_secs_f64(a.common.timeout)),
        max_nodes: Some(a.common.memory_limit / maplan::bench::node_bytes(&task)),
    };
    let cls = classify(&task)?;
    let run = run_agent_tcp(
        Arc::new(task.clone()),
        &cls,
        me,
        &addrs,
        listener,
        &cfg.planner(),
        limits,
    )?;
    println!("{}", serde_json::to_string(&run)?);
    if let (Some(path), Some(Outcome::Solved { plan, cost, .. })) = (&a.plan_out, &run.result) {
        write_plan(path, &task, plan, Some(*cost))?;
    }
    Ok(exit_code(run.outcome))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Cmd::Gen(a) => gen(a),
        Cmd::Classify { input } => classify_cmd(input),
        Cmd::Plan(a) => plan_cmd(a),
        Cmd::Validate { input, plan } => validate_cmd(input, plan),
        Cmd::Oracle { input, state_limit } => oracle_cmd(input, *state_limit),
        Cmd::Bench { suite, json } => bench_cmd(suite, json.as_deref()),
        Cmd::ServeAgent(a) => serve_cmd(a),
    };
    match r {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
