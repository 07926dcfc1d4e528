//! Replacing an agent's private segment with an opaque token before a state
//! leaves the agent, and restoring it when the state comes back.

use crate::error::{Error, Result};
use crate::model::AgentId;
use crate::search::{PackedState, Segment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenMode {
    /// Private segments travel in the clear.
    Plain,
    /// The token is a keyed hash of the segment, so equal segments get equal
    /// tokens and duplicate detection still works at other agents.
    #[default]
    Deterministic,
    /// Every send draws a fresh salt; other agents cannot match tokens.
    MultiToken,
}

fn agent_key(seed: u64, agent: AgentId) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"maplan-opacifier-key");
    h.update(seed.to_be_bytes());
    h.update((agent as u64).to_be_bytes());
    h.finalize().into()
}

fn token(key: &[u8; 32], salt: u64, segment: &[u32]) -> [u8; 16] {
    let mut h = Sha256::new();
    h.update(key);
    h.update(salt.to_be_bytes());
    for v in segment {
        h.update(v.to_be_bytes());
    }
    h.finalize()[..16].try_into().unwrap()
}

/// The token for `agent`'s segment in the initial state. Every agent can
/// compute it from the shared seed, which lets all agents start from the same
/// packed initial state without a setup round.
pub fn initial_token(seed: u64, agent: AgentId, segment: &[u32]) -> [u8; 16] {
    token(&agent_key(seed, agent), 0, segment)
}

/// One agent's opacifier: its key and the table from issued tokens back to
/// private segments.
#[derive(Clone, Debug)]
pub struct Opacifier {
    agent: AgentId,
    mode: TokenMode,
    key: [u8; 32],
    table: HashMap<[u8; 16], Box<[u32]>>,
    rng: ChaCha8Rng,
}

impl Opacifier {
    pub fn new(agent: AgentId, mode: TokenMode, seed: u64) -> Self {
        Opacifier {
            agent,
            mode,
            key: agent_key(seed, agent),
            table: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ ((agent as u64) << 32) ^ 0x6f70_6163),
        }
    }

    pub fn mode(&self) -> TokenMode {
        self.mode
    }

    fn issue(&mut self, segment: &[u32], salt: u64) -> [u8; 16] {
        let t = token(&self.key, salt, segment);
        self.table.entry(t).or_insert_with(|| segment.into());
        t
    }

    /// Replaces the owner's plain segment with a token. Other segments and
    /// the public part are untouched.
    pub fn opacify(&mut self, state: &PackedState) -> PackedState {
        let Segment::Plain(seg) = &state.segments[self.agent] else {
            return state.clone();
        };
        let salt = match self.mode {
            TokenMode::Plain => return state.clone(),
            TokenMode::Deterministic => 0,
            TokenMode::MultiToken => self.rng.gen::<u64>() | 1,
        };
        let t = self.issue(&seg.clone(), salt);
        let mut out = state.clone();
        out.segments[self.agent] = Segment::Token(t);
        out
    }

    /// Restores the owner's segment from a token this opacifier issued.
    pub fn deopacify(&self, state: PackedState) -> Result<PackedState> {
        let Segment::Token(t) = &state.segments[self.agent] else {
            return Ok(state);
        };
        let seg = self.table.get(t).ok_or_else(|| Error::Protocol {
            agent: self.agent,
            msg: "unknown private-segment token".into(),
        })?;
        let mut out = state;
        out.segments[self.agent] = Segment::Plain(seg.clone());
        Ok(out)
    }

    /// The initial state as this agent stores it: its own segment in the
    /// clear, every other agent's segment as that agent's initial token.
    pub fn initial_view(&mut self, packed_init: &PackedState, seed: u64) -> PackedState {
        let mut out = packed_init.clone();
        if self.mode == TokenMode::Plain {
            return out;
        }
        for (k, seg) in packed_init.segments.iter().enumerate() {
            let Segment::Plain(values) = seg else {
                continue;
            };
            if k == self.agent {
                self.issue(&values.clone(), 0);
            } else {
                out.segments[k] = Segment::Token(initial_token(seed, k, values));
            }
        }
        out
    }
}
