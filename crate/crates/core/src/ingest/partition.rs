use crate::error::{Error, Result};
use crate::model::{Agent, AgentId, Task};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchRules {
    #[serde(default)]
    pub prefixes: Vec<String>,
    #[serde(default)]
    pub names: Vec<String>,
}

impl MatchRules {
    fn matches(&self, action: &str) -> bool {
        self.names.iter().any(|n| n == action)
            || self.prefixes.iter().any(|p| action.starts_with(p.as_str()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentRules {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<String>,
    #[serde(default)]
    pub actions: MatchRules,
}

/// Agent roster plus the rules assigning grounded actions to agents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub agents: Vec<AgentRules>,
}

impl PartitionSpec {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        super::json::from_json_with_path(bytes)
    }

    /// Roster of a task, for writing address files.
    pub fn roster_of(task: &Task) -> Self {
        PartitionSpec {
            agents: task
                .agents
                .iter()
                .enumerate()
                .map(|(id, a)| AgentRules {
                    name: a.name.clone(),
                    address: a.address.clone(),
                    actions: MatchRules {
                        prefixes: vec![],
                        names: task
                            .actions_of(id)
                            .map(|i| task.actions[i].name.clone())
                            .collect(),
                    },
                })
                .collect(),
        }
    }

    /// Assigns owners to every action of `task`; agent ids follow file order.
    pub fn apply(&self, task: &Task) -> Result<Task> {
        if self.agents.is_empty() {
            return Err(Error::Partition("partition lists no agents".into()));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if self.agents[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::Partition(format!(
                    "duplicate agent name `{}`",
                    a.name
                )));
            }
        }
        let mut unmatched = Vec::new();
        let mut owners = Vec::with_capacity(task.actions.len());
        for action in &task.actions {
            let hits: Vec<AgentId> = self
                .agents
                .iter()
                .enumerate()
                .filter(|(_, a)| a.actions.matches(&action.name))
                .map(|(i, _)| i)
                .collect();
            match hits.as_slice() {
                [] => {
                    unmatched.push(action.name.clone());
                    owners.push(0);
                }
                [one] => owners.push(*one),
                many => {
                    let names: Vec<&str> =
                        many.iter().map(|&i| self.agents[i].name.as_str()).collect();
                    return Err(Error::Partition(format!(
                        "action `{}` matched by several agents: {}",
                        action.name,
                        names.join(", ")
                    )));
                }
            }
        }
        if !unmatched.is_empty() {
            let total = unmatched.len();
            unmatched.truncate(10);
            return Err(Error::Partition(format!(
                "{total} unmatched action(s): {}{}",
                unmatched.join(", "),
                if total > 10 { ", ..." } else { "" }
            )));
        }
        let mut out = task.clone();
        for (a, owner) in out.actions.iter_mut().zip(owners) {
            a.owner = owner;
        }
        out.agents = self
            .agents
            .iter()
            .map(|a| Agent {
                name: a.name.clone(),
                address: a.address.clone(),
            })
            .collect();
        out.validate()?;
        Ok(out)
    }
}

/// Parses a partition file and assigns owners to the actions of `task`.
pub fn parse_partition(bytes: &[u8], task: &Task) -> Result<Task> {
    PartitionSpec::from_json(bytes)?.apply(task)
}
