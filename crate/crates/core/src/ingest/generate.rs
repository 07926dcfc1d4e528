//! Seeded generators for desk-scale multi-agent benchmark instances.

use crate::error::{Error, Result};
use crate::model::{Action, Agent, Cost, Fact, Task, Variable, MAX_AGENTS};
use crate::oracle::{oracle_optimal_cost, OracleResult};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// Trucks on private road maps joined by shared depots, moving packages.
    Logistics,
    /// A single counter stepped from 0 to `locations`, steps dealt round-robin.
    Chain,
    /// Random private/public variable structure, accepted only when its
    /// solvability matches the request.
    Random,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostModel {
    #[default]
    Unit,
    /// Uniform integer costs in `1..=10`.
    Random,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Package start and goal locations drawn from every location.
    #[default]
    Anywhere,
    /// Packages start and end at depots only.
    Depots,
    /// Like `Depots`, except package 0 starts on a private location of truck 0.
    FirstAtAgentZero,
}

fn default_true() -> bool {
    true
}

/// Parameters for [`generate_instance`].
///
/// Field meaning depends on the domain. Logistics: `locations` private
/// locations per truck, `packages` packages, `extra_depots` additional depots
/// beyond the chain that connects consecutive trucks. Chain: `locations` is the
/// chain length. Random: `locations` private variables per agent and
/// `packages` public variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub domain: Domain,
    pub agents: usize,
    #[serde(default)]
    pub locations: usize,
    #[serde(default)]
    pub packages: usize,
    #[serde(default)]
    pub extra_depots: usize,
    #[serde(default)]
    pub costs: CostModel,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub solvable: bool,
    /// Logistics only: the last truck serves exactly the depots of truck 0.
    #[serde(default)]
    pub backup: bool,
    #[serde(default)]
    pub placement: Placement,
}

impl GeneratorParams {
    pub fn logistics(agents: usize, locations: usize, packages: usize, seed: u64) -> Self {
        GeneratorParams {
            domain: Domain::Logistics,
            agents,
            locations,
            packages,
            extra_depots: 0,
            costs: CostModel::Unit,
            seed,
            solvable: true,
            backup: false,
            placement: Placement::Anywhere,
        }
    }

    pub fn chain(agents: usize, length: usize, seed: u64) -> Self {
        GeneratorParams {
            domain: Domain::Chain,
            locations: length,
            packages: 0,
            ..Self::logistics(agents, 0, 0, seed)
        }
    }

    pub fn random(agents: usize, private_vars: usize, public_vars: usize, seed: u64) -> Self {
        GeneratorParams {
            domain: Domain::Random,
            locations: private_vars,
            packages: public_vars,
            ..Self::logistics(agents, 0, 0, seed)
        }
    }

    pub fn with_costs(mut self, costs: CostModel) -> Self {
        self.costs = costs;
        self
    }

    pub fn unsolvable(mut self) -> Self {
        self.solvable = false;
        self
    }
}

fn draw_cost(rng: &mut ChaCha8Rng, model: CostModel) -> Cost {
    match model {
        CostModel::Unit => 1,
        CostModel::Random => rng.gen_range(1..=10),
    }
}

/// Builds a task from `params`; identical parameters give an identical task.
pub fn generate_instance(params: &GeneratorParams) -> Result<Task> {
    if params.agents == 0 || params.agents > MAX_AGENTS {
        return Err(Error::Generator(format!(
            "agent count {} out of range",
            params.agents
        )));
    }
    let task = match params.domain {
        Domain::Logistics => logistics(params)?,
        Domain::Chain => chain(params)?,
        Domain::Random => random(params)?,
    };
    task.validate()?;
    Ok(task)
}

fn chain(p: &GeneratorParams) -> Result<Task> {
    if p.locations == 0 {
        return Err(Error::Generator("chain length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = p.locations;
    // The unsolvable variant drops the final step.
    let steps = if p.solvable { n } else { n - 1 };
    let actions = (0..steps)
        .map(|i| Action {
            name: format!("step{i}"),
            owner: i % p.agents,
            pre: vec![Fact::new(0, i as u32)],
            eff: vec![Fact::new(0, i as u32 + 1)],
            cost: draw_cost(&mut rng, p.costs),
        })
        .collect();
    Ok(Task {
        variables: vec![Variable::with_size("counter", n + 1)],
        init: vec![0],
        goal: vec![Fact::new(0, n as u32)],
        actions,
        agents: (0..p.agents)
            .map(|i| Agent::named(format!("agent{i}")))
            .collect(),
    })
}

struct Map {
    /// Global location ids reachable by this truck's road network.
    nodes: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

fn logistics(p: &GeneratorParams) -> Result<Task> {
    if p.locations == 0 {
        return Err(Error::Generator(
            "each truck needs at least one private location".into(),
        ));
    }
    if p.packages == 0 {
        return Err(Error::Generator(
            "logistics needs at least one package".into(),
        ));
    }
    let regular = p.agents - usize::from(p.backup);
    if regular == 0 {
        return Err(Error::Generator(
            "backup truck needs a regular truck to mirror".into(),
        ));
    }
    if p.placement == Placement::FirstAtAgentZero && !p.backup {
        return Err(Error::Generator(
            "placement first-at-agent-zero requires a backup truck".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    let mut loc_names: Vec<String> = Vec::new();
    let mut private_locs: Vec<Vec<usize>> = Vec::new();
    for t in 0..p.agents {
        let locs = (0..p.locations)
            .map(|i| {
                loc_names.push(format!("loc{t}-{i}"));
                loc_names.len() - 1
            })
            .collect();
        private_locs.push(locs);
    }
    // Depot i joins trucks i and i + 1; extra depots join random pairs.
    let mut depot_trucks: Vec<Vec<usize>> = Vec::new();
    if regular == 1 {
        depot_trucks.push(vec![0]);
    }
    for i in 0..regular.saturating_sub(1) {
        depot_trucks.push(vec![i, i + 1]);
    }
    for _ in 0..p.extra_depots {
        let a = rng.gen_range(0..regular);
        let b = if regular > 1 {
            (a + rng.gen_range(1..regular)) % regular
        } else {
            a
        };
        let mut pair = vec![a, b];
        pair.dedup();
        depot_trucks.push(pair);
    }
    if p.backup {
        for trucks in depot_trucks.iter_mut() {
            if trucks.contains(&0) {
                trucks.push(p.agents - 1);
            }
        }
    }
    let depots: Vec<usize> = (0..depot_trucks.len())
        .map(|d| {
            loc_names.push(format!("depot{d}"));
            loc_names.len() - 1
        })
        .collect();

    let mut maps: Vec<Map> = Vec::new();
    for t in 0..p.agents {
        let locs = &private_locs[t];
        let mut edges = Vec::new();
        for i in 1..locs.len() {
            let j = rng.gen_range(0..i);
            edges.push((locs[j], locs[i]));
        }
        let mut nodes = locs.clone();
        for (d, trucks) in depot_trucks.iter().enumerate() {
            if trucks.contains(&t) {
                let anchor = locs[rng.gen_range(0..locs.len())];
                edges.push((anchor, depots[d]));
                nodes.push(depots[d]);
            }
        }
        maps.push(Map { nodes, edges });
    }

    // An isolated location no road reaches; a goal there is unreachable.
    let isolated = (!p.solvable).then(|| {
        loc_names.push("island".to_string());
        let id = loc_names.len() - 1;
        maps[0].nodes.push(id);
        id
    });

    let mut variables = Vec::new();
    let mut init = Vec::new();
    let truck_var = |t: usize| t;
    for (t, map) in maps.iter().enumerate() {
        variables.push(Variable {
            name: format!("at-truck{t}"),
            domain: map.nodes.iter().map(|&l| loc_names[l].clone()).collect(),
        });
        // Trucks start on a private location.
        init.push(rng.gen_range(0..p.locations) as u32);
    }
    let nlocs = loc_names.len();
    let pkg_domain: Vec<String> = loc_names
        .iter()
        .cloned()
        .chain((0..p.agents).map(|t| format!("in-truck{t}")))
        .collect();
    let pkg_var = |k: usize| p.agents + k;
    let in_truck = |t: usize| (nlocs + t) as u32;

    let reachable_locs: Vec<usize> = (0..nlocs).filter(|&l| Some(l) != isolated).collect();
    let mut goal = Vec::new();
    for k in 0..p.packages {
        variables.push(Variable {
            name: format!("at-pkg{k}"),
            domain: pkg_domain.clone(),
        });
        let pool: &[usize] = match p.placement {
            Placement::Anywhere => &reachable_locs,
            Placement::Depots | Placement::FirstAtAgentZero => &depots,
        };
        let start = if k == 0 && p.placement == Placement::FirstAtAgentZero {
            *private_locs[0].choose(&mut rng).unwrap()
        } else {
            *pool.choose(&mut rng).unwrap()
        };
        let end = match isolated {
            Some(island) if k == 0 => island,
            _ => loop {
                let l = *pool.choose(&mut rng).unwrap();
                if l != start || pool.len() == 1 {
                    break l;
                }
            },
        };
        init.push(start as u32);
        goal.push(Fact::new(pkg_var(k), end as u32));
    }

    let mut actions = Vec::new();
    for (t, map) in maps.iter().enumerate() {
        let local = |l: usize| map.nodes.iter().position(|&n| n == l).unwrap() as u32;
        for &(a, b) in &map.edges {
            for (from, to) in [(a, b), (b, a)] {
                actions.push(Action {
                    name: format!("drive-truck{t} {} {}", loc_names[from], loc_names[to]),
                    owner: t,
                    pre: vec![Fact::new(truck_var(t), local(from))],
                    eff: vec![Fact::new(truck_var(t), local(to))],
                    cost: draw_cost(&mut rng, p.costs),
                });
            }
        }
        for &l in &map.nodes {
            if Some(l) == isolated {
                continue;
            }
            for k in 0..p.packages {
                actions.push(Action {
                    name: format!("load-truck{t} pkg{k} {}", loc_names[l]),
                    owner: t,
                    pre: vec![
                        Fact::new(truck_var(t), local(l)),
                        Fact::new(pkg_var(k), l as u32),
                    ],
                    eff: vec![Fact::new(pkg_var(k), in_truck(t))],
                    cost: draw_cost(&mut rng, p.costs),
                });
                actions.push(Action {
                    name: format!("unload-truck{t} pkg{k} {}", loc_names[l]),
                    owner: t,
                    pre: vec![
                        Fact::new(truck_var(t), local(l)),
                        Fact::new(pkg_var(k), in_truck(t)),
                    ],
                    eff: vec![Fact::new(pkg_var(k), l as u32)],
                    cost: draw_cost(&mut rng, p.costs),
                });
            }
        }
    }

    Ok(Task {
        variables,
        init,
        goal,
        actions,
        agents: (0..p.agents)
            .map(|t| Agent::named(format!("truck{t}")))
            .collect(),
    })
}

const RANDOM_ATTEMPTS: u64 = 500;
const RANDOM_STATE_LIMIT: usize = 100_000;

fn random(p: &GeneratorParams) -> Result<Task> {
    if p.locations == 0 || p.packages == 0 {
        return Err(Error::Generator(
            "random tasks need private and public variables".into(),
        ));
    }
    for attempt in 0..RANDOM_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(
            p.seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(attempt),
        );
        let task = random_candidate(p, &mut rng);
        match oracle_optimal_cost(&task, RANDOM_STATE_LIMIT) {
            OracleResult::Cost(_) if p.solvable => return Ok(task),
            OracleResult::Unsolvable if !p.solvable => return Ok(task),
            _ => {}
        }
    }
    Err(Error::Generator(format!(
        "no random task with solvable={} found in {RANDOM_ATTEMPTS} attempts",
        p.solvable
    )))
}

fn random_candidate(p: &GeneratorParams, rng: &mut ChaCha8Rng) -> Task {
    const DOMAIN: usize = 3;
    let npub = p.packages;
    let mut variables: Vec<Variable> = (0..npub)
        .map(|i| Variable::with_size(format!("pub{i}"), DOMAIN))
        .collect();
    let mut own: Vec<Vec<usize>> = Vec::new();
    for a in 0..p.agents {
        own.push(
            (0..p.locations)
                .map(|i| {
                    variables.push(Variable::with_size(format!("priv{a}-{i}"), DOMAIN));
                    variables.len() - 1
                })
                .collect(),
        );
    }
    let init = vec![0; variables.len()];
    let mut actions = Vec::new();
    for (a, vars) in own.iter().enumerate() {
        for i in 0..2 * vars.len() {
            let v = vars[i % vars.len()];
            let from = rng.gen_range(0..DOMAIN) as u32;
            let to = (from + rng.gen_range(1..DOMAIN as u32)) % DOMAIN as u32;
            let mut pre = vec![Fact::new(v, from)];
            if vars.len() > 1 && rng.gen_bool(0.3) {
                let w = *vars
                    .iter()
                    .filter(|&&w| w != v)
                    .collect::<Vec<_>>()
                    .choose(rng)
                    .unwrap();
                pre.push(Fact::new(*w, rng.gen_range(0..DOMAIN) as u32));
            }
            actions.push(Action {
                name: format!("priv{a}-{i}"),
                owner: a,
                pre,
                eff: vec![Fact::new(v, to)],
                cost: draw_cost(rng, p.costs),
            });
        }
        for i in 0..2 {
            let pv = rng.gen_range(0..npub);
            let v = *vars.choose(rng).unwrap();
            let from = rng.gen_range(0..DOMAIN) as u32;
            let to = (from + rng.gen_range(1..DOMAIN as u32)) % DOMAIN as u32;
            actions.push(Action {
                name: format!("pub{a}-{i}"),
                owner: a,
                pre: vec![
                    Fact::new(v, rng.gen_range(0..DOMAIN) as u32),
                    Fact::new(pv, from),
                ],
                eff: vec![Fact::new(pv, to)],
                cost: draw_cost(rng, p.costs),
            });
        }
    }
    let ngoal = 1 + usize::from(npub > 1 && rng.gen_bool(0.5));
    let mut goal_vars: Vec<usize> = (0..npub).collect();
    goal_vars.shuffle(rng);
    let mut goal: Vec<Fact> = goal_vars[..ngoal]
        .iter()
        .map(|&v| Fact::new(v, rng.gen_range(1..DOMAIN) as u32))
        .collect();
    goal.sort();
    Task {
        variables,
        init,
        goal,
        actions,
        agents: (0..p.agents)
            .map(|i| Agent::named(format!("agent{i}")))
            .collect(),
    }
}
