//! Runs agents over TCP, either one per process or one thread each in the
//! current process.

use super::{Agent, AgentStats, PlanReport, PlannerConfig};
use crate::error::{Error, Result};
use crate::model::{classify, AgentId, Classification, Task};
use crate::ppastar::{Limits, SearchOutcome};
use crate::transport::tcp::{local_listeners, TcpTransport};
use crate::transport::{Message, Outcome, TrafficStats, Transport};
use serde::Serialize;
use std::net::{SocketAddr, TcpListener};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

const CONNECT_TIMEOUT: Duration = Duration::from_secs(10);
const FINISH_GRACE: Duration = Duration::from_secs(2);

/// What one agent process ends with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AgentRun {
    pub agent: AgentId,
    pub outcome: SearchOutcome,
    pub result: Option<Outcome>,
    pub stats: AgentStats,
    pub traffic: TrafficStats,
}

/// Runs agent `me` until the planners agree on an outcome or the limits are
/// hit. `addrs` lists every agent's address by id; `listener` must be bound
/// to `addrs[me]`.
pub fn run_agent_tcp(
    task: Arc<Task>,
    cls: &Classification,
    me: AgentId,
    addrs: &[SocketAddr],
    listener: TcpListener,
    config: &PlannerConfig,
    limits: Limits,
) -> Result<AgentRun> {
    if addrs.len() != task.num_agents() {
        return Err(Error::Config(format!(
            "{} addresses for {} agents",
            addrs.len(),
            task.num_agents()
        )));
    }
    let mut agent = Agent::new(task, cls, me, *config)?;
    let mut t = TcpTransport::establish(me, addrs, listener, CONNECT_TIMEOUT)?;
    let mut out = Vec::new();
    let mut idle = false;
    let outcome = loop {
        let msgs = if idle {
            t.wait(Duration::from_millis(5))?
        } else {
            t.poll()?
        };
        for (from, msg) in msgs {
            agent.handle(from, msg, &mut out)?;
        }
        // Bounded batch of work between polls.
        idle = true;
        for _ in 0..64 {
            if !agent.work(&mut out)? {
                break;
            }
            idle = false;
        }
        for (to, m) in out.drain(..) {
            t.send(to, &m)?;
        }
        if let Some(o) = agent.outcome() {
            break match o {
                Outcome::Solved { .. } => SearchOutcome::Solved,
                Outcome::Unsolvable => SearchOutcome::Unsolvable,
            };
        }
        if limits.deadline.is_some_and(|d| Instant::now() >= d) {
            break SearchOutcome::Timeout;
        }
        if limits.max_nodes.is_some_and(|m| agent.space().len() > m) {
            break SearchOutcome::Memory;
        }
    };
    let result = agent.outcome().cloned();
    // Pass the outcome on before closing, so that no peer mistakes the
    // closed connection for a crash.
    if let Some(o) = &result {
        let msg = Message::Terminate { outcome: o.clone() };
        for j in 0..t.num_agents() {
            if j != me {
                t.send(j, &msg)?;
            }
        }
    }
    let traffic = t.stats();
    t.finish(FINISH_GRACE);
    Ok(AgentRun {
        agent: me,
        outcome,
        result,
        stats: agent.stats(),
        traffic,
    })
}

/// Runs every agent on its own thread over localhost TCP.
pub fn run_local_tcp(task: &Task, config: &PlannerConfig, limits: Limits) -> Result<PlanReport> {
    let cls = Arc::new(classify(task)?);
    let n = task.num_agents();
    let shared = Arc::new(task.clone());
    let (listeners, addrs) = local_listeners(n)?;
    let handles: Vec<_> = listeners
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            let (task, cls, addrs, config) = (
                Arc::clone(&shared),
                Arc::clone(&cls),
                addrs.clone(),
                *config,
            );
            thread::spawn(move || run_agent_tcp(task, &cls, i, &addrs, l, &config, limits))
        })
        .collect();
    let mut runs = Vec::with_capacity(n);
    for h in handles {
        runs.push(
            h.join()
                .map_err(|_| Error::Internal("agent thread panicked".into()))??,
        );
    }
    let result = runs.iter().find_map(|r| r.result.clone());
    let outcome = match &result {
        Some(Outcome::Solved { .. }) => SearchOutcome::Solved,
        Some(Outcome::Unsolvable) => SearchOutcome::Unsolvable,
        None => runs[0].outcome,
    };
    let traffic = runs
        .iter()
        .fold(TrafficStats::default(), |a, r| TrafficStats {
            messages_sent: a.messages_sent + r.traffic.messages_sent,
            bytes_sent: a.bytes_sent + r.traffic.bytes_sent,
            messages_received: a.messages_received + r.traffic.messages_received,
        });
    Ok(PlanReport::assemble(
        outcome,
        result.as_ref(),
        runs.iter().map(|r| r.stats).collect(),
        traffic,
    ))
}
