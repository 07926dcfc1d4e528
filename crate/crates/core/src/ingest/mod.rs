//! Task input and output: SAS+ translator files, partition files, the JSON
//! task format, and seeded instance generators.

pub mod generate;
pub mod json;
pub mod partition;
pub mod sas;

pub use generate::{generate_instance, CostModel, Domain, GeneratorParams, Placement};
pub use json::{dump_task_json, load_task_json};
pub use partition::{parse_partition, AgentRules, MatchRules, PartitionSpec};
pub use sas::parse_sas;
