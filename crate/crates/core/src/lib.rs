//! Multi-agent forward search planning over grounded tasks.
//!
//! The crate covers the task model and privacy classification, input formats,
//! delete-relaxation heuristics, the shared search bookkeeping, message
//! transports, the distributed MAFS / MAD-A* planner, centralized A* with
//! partition-based path pruning, and a Dijkstra oracle and plan validator for
//! checking results.

pub mod bench;
pub mod error;
pub mod examples;
pub mod heuristics;
pub mod ingest;
pub mod model;
pub mod oracle;
pub mod planner;
pub mod ppastar;
pub mod search;
pub mod transport;
pub mod validate;

pub use error::{Error, Result};
pub use model::{Action, ActionId, Agent, AgentId, Cost, Fact, State, Task, Variable};
