//! HIV spread treated as a link-tracing design run by the virus: the
//! infected set is the virus's sample, transmission is Bernoulli tracing
//! with stage-specific rates, and attrition happens only through removal
//! from the population (or a cure).

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::Membership;
use crate::effects::EffectSource;
use crate::error::{Error, Result};
use crate::space::GroupId;
use crate::world::{NodeId, World};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Susceptible,
    Acute,
    Chronic,
    Late,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Infection {
    pub stage: Stage,
    pub stage_entered_at: u64,
    pub infected_at: u64,
    pub reinfections: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    pub beta_acute: f64,
    pub beta_chronic: f64,
    pub beta_late: f64,
    pub acute_mean: f64,
    pub chronic_mean: f64,
    pub late_mean: f64,
    pub mortality_mult_acute: f64,
    pub mortality_mult_chronic: f64,
    /// When unset, chosen so that the Late dwell under baseline mortality
    /// has mean `late_mean`.
    pub mortality_mult_late: Option<f64>,
    pub import_prob: f64,
    pub reinfection_mult: f64,
    pub initial_infected: usize,
    pub start_step: u64,
    /// Per-group transmission multiplier for links touching the group.
    pub group_link_mult: BTreeMap<usize, f64>,
}

impl Default for EpidemicParams {
    fn default() -> Self {
        EpidemicParams {
            beta_acute: 0.02,
            beta_chronic: 0.002,
            beta_late: 0.002,
            acute_mean: 8.0,
            chronic_mean: 520.0,
            late_mean: 104.0,
            mortality_mult_acute: 1.0,
            mortality_mult_chronic: 1.0,
            mortality_mult_late: None,
            import_prob: 0.0,
            reinfection_mult: 0.0,
            initial_infected: 0,
            start_step: 0,
            group_link_mult: BTreeMap::new(),
        }
    }
}

impl EpidemicParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        for (k, v) in [
            ("beta_acute", self.beta_acute),
            ("beta_chronic", self.beta_chronic),
            ("beta_late", self.beta_late),
            ("import_prob", self.import_prob),
            ("reinfection_mult", self.reinfection_mult),
        ] {
            if !unit(v) {
                return Err(Error::Config(format!("epi.{k} must lie in [0, 1]")));
            }
        }
        for (k, v) in [
            ("acute_mean", self.acute_mean),
            ("chronic_mean", self.chronic_mean),
            ("late_mean", self.late_mean),
        ] {
            if !(v >= 1.0) {
                return Err(Error::Config(format!("epi.{k} must be >= 1")));
            }
        }
        for (k, v) in [
            ("mortality_mult_acute", self.mortality_mult_acute),
            ("mortality_mult_chronic", self.mortality_mult_chronic),
            ("mortality_mult_late", self.mortality_mult_late.unwrap_or(1.0)),
        ] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::Config(format!("epi.{k} must be a finite value >= 1")));
            }
        }
        if self.group_link_mult.values().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("epi.group_link_mult values must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn beta(&self, stage: Stage) -> f64 {
        match stage {
            Stage::Susceptible => 0.0,
            Stage::Acute => self.beta_acute,
            Stage::Chronic => self.beta_chronic,
            Stage::Late => self.beta_late,
        }
    }

    /// Per-step exit probability of a stage (Late exits only by death).
    pub fn progression_prob(&self, stage: Stage) -> f64 {
        match stage {
            Stage::Acute => 1.0 / self.acute_mean,
            Stage::Chronic => 1.0 / self.chronic_mean,
            Stage::Susceptible | Stage::Late => 0.0,
        }
    }

    pub fn late_multiplier(&self, death_hazard: f64) -> f64 {
        match self.mortality_mult_late {
            Some(m) => m,
            None if death_hazard > 0.0 => (1.0 / (self.late_mean * death_hazard)).max(1.0),
            None => 1.0,
        }
    }

    fn link_mult(&self, a: GroupId, b: GroupId) -> f64 {
        if self.group_link_mult.is_empty() {
            return 1.0;
        }
        let get = |g: GroupId| self.group_link_mult.get(&g.index()).copied().unwrap_or(1.0);
        get(a).max(get(b))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfectionMode {
    Seed,
    Transmission,
    /// Resident returning with an infection.
    Import,
    /// Entered the population already infected.
    Immigration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfectionEvent {
    pub step: u64,
    pub node: NodeId,
    pub origin: Option<NodeId>,
    pub origin_stage: Option<Stage>,
    pub group: GroupId,
    pub degree: usize,
    /// Links to nodes outside the infected set as it stood just before the
    /// infection.
    pub degree_out: usize,
    pub mode: InfectionMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTransition {
    pub node: NodeId,
    pub from: Stage,
    pub to: Stage,
}

/// The virus's sample: infected living nodes and their stages.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpidemicState {
    pub infected: BTreeMap<NodeId, Infection>,
    pub seeded: bool,
}

impl Membership for EpidemicState {
    fn contains(&self, id: NodeId) -> bool {
        self.infected.contains_key(&id)
    }
    fn member_ids(&self) -> Vec<NodeId> {
        self.infected.keys().copied().collect()
    }
    fn size(&self) -> usize {
        self.infected.len()
    }
}

impl EpidemicState {
    pub fn stage(&self, id: NodeId) -> Stage {
        self.infected.get(&id).map_or(Stage::Susceptible, |i| i.stage)
    }

    pub fn stage_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for inf in self.infected.values() {
            match inf.stage {
                Stage::Acute => c[0] += 1,
                Stage::Chronic => c[1] += 1,
                Stage::Late => c[2] += 1,
                Stage::Susceptible => {}
            }
        }
        c
    }

    pub fn infect(&mut self, id: NodeId, now: u64) -> bool {
        if self.infected.contains_key(&id) {
            return false;
        }
        self.infected.insert(
            id,
            Infection {
                stage: Stage::Acute,
                stage_entered_at: now,
                infected_at: now,
                reinfections: 0,
            },
        );
        true
    }

    /// Drops a node (death, emigration or cure), returning its last state.
    pub fn forget(&mut self, id: NodeId) -> Option<Infection> {
        self.infected.remove(&id)
    }

    /// Mean over infected nodes of links to susceptible nodes.
    pub fn mean_degree_out(&self, world: &World) -> Option<f64> {
        if self.infected.is_empty() {
            return None;
        }
        let total: usize = self
            .infected
            .keys()
            .map(|id| world.neighbors(*id).iter().filter(|j| !self.contains(**j)).count())
            .sum();
        Some(total as f64 / self.infected.len() as f64)
    }
}

/// `beta(stage_origin) · out_mult · in_mult · link_mult`, with the
/// reinfection multiplier when the destination is already infected.
pub fn transmission_probability(
    params: &EpidemicParams,
    origin_stage: Stage,
    destination_infected: bool,
    out_mult: f64,
    in_mult: f64,
    link_mult: f64,
) -> f64 {
    let reinfect = if destination_infected { params.reinfection_mult } else { 1.0 };
    (params.beta(origin_stage) * out_mult * in_mult * reinfect * link_mult).clamp(0.0, 1.0)
}

pub fn stage_mortality_multiplier(params: &EpidemicParams, stage: Stage, death_hazard: f64) -> f64 {
    match stage {
        Stage::Susceptible => 1.0,
        Stage::Acute => params.mortality_mult_acute,
        Stage::Chronic => params.mortality_mult_chronic,
        Stage::Late => params.late_multiplier(death_hazard),
    }
}

fn infection_event(
    world: &World,
    epi: &EpidemicState,
    node: NodeId,
    origin: Option<NodeId>,
    origin_stage: Option<Stage>,
    mode: InfectionMode,
) -> InfectionEvent {
    let n = world.node(node).expect("infected node is alive");
    InfectionEvent {
        step: world.step,
        node,
        origin,
        origin_stage,
        group: n.group,
        degree: n.degree(),
        degree_out: n.neighbors.iter().filter(|j| !epi.contains(**j)).count(),
        mode,
    }
}

/// Seeds `initial_infected` uniformly chosen susceptibles the first time the
/// epidemic is stepped at or after `start_step`.
pub fn seed_infections<R: Rng + ?Sized>(
    world: &World,
    epi: &mut EpidemicState,
    params: &EpidemicParams,
    rng: &mut R,
) -> Vec<InfectionEvent> {
    if epi.seeded || world.step < params.start_step {
        return Vec::new();
    }
    epi.seeded = true;
    let pool: Vec<NodeId> = world.nodes.keys().filter(|id| !epi.contains(**id)).copied().collect();
    let amount = params.initial_infected.min(pool.len());
    let mut picked: Vec<NodeId> = index::sample(rng, pool.len(), amount).into_iter().map(|k| pool[k]).collect();
    picked.sort_unstable();
    let events: Vec<InfectionEvent> = picked
        .iter()
        .map(|id| infection_event(world, epi, *id, None, None, InfectionMode::Seed))
        .collect();
    for id in picked {
        epi.infect(id, world.step);
    }
    events
}

/// Each susceptible becomes Acute with `import_prob`. Nodes inserted this
/// step are labelled as infected immigrants.
pub fn step_importation<R: Rng + ?Sized>(
    world: &World,
    epi: &mut EpidemicState,
    params: &EpidemicParams,
    rng: &mut R,
) -> Vec<InfectionEvent> {
    if params.import_prob <= 0.0 || !epi.seeded {
        return Vec::new();
    }
    let now = world.step;
    let hits: Vec<NodeId> = world
        .nodes
        .keys()
        .filter(|id| !epi.contains(**id))
        .copied()
        .filter(|_| rng.random::<f64>() < params.import_prob)
        .collect();
    let events: Vec<InfectionEvent> = hits
        .iter()
        .map(|id| {
            let mode = if world.nodes[id].born_at == now {
                InfectionMode::Immigration
            } else {
                InfectionMode::Import
            };
            infection_event(world, epi, *id, None, None, mode)
        })
        .collect();
    for id in hits {
        epi.infect(id, now);
    }
    events
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransmissionOutcome {
    pub infections: Vec<InfectionEvent>,
    /// Already infected nodes hit again this step.
    pub reinfected: Vec<NodeId>,
}

/// Every infected→neighbor link is tried independently against the
/// start-of-step infected set. A node exposed several times is infected
/// once, credited to its lowest-id successful origin.
pub fn step_transmission<R: Rng + ?Sized>(
    world: &World,
    epi: &mut EpidemicState,
    params: &EpidemicParams,
    effects: &dyn EffectSource,
    rng: &mut R,
) -> TransmissionOutcome {
    let now = world.step;
    let mut first_origin: BTreeMap<NodeId, (NodeId, Stage)> = BTreeMap::new();
    let mut reinfected = BTreeSet::new();
    for (&i, inf) in &epi.infected {
        let beta = params.beta(inf.stage);
        if beta <= 0.0 {
            continue;
        }
        let origin = &world.nodes[&i];
        let out_mult = effects.multipliers(i).out_mult;
        for &j in &origin.neighbors {
            let dest_infected = epi.contains(j);
            if dest_infected && params.reinfection_mult <= 0.0 {
                continue;
            }
            let link_mult = params.link_mult(origin.group, world.nodes[&j].group);
            let p = transmission_probability(
                params,
                inf.stage,
                dest_infected,
                out_mult,
                effects.multipliers(j).in_mult,
                link_mult,
            );
            if p <= 0.0 || rng.random::<f64>() >= p {
                continue;
            }
            if dest_infected {
                reinfected.insert(j);
            } else {
                first_origin.entry(j).or_insert((i, inf.stage));
            }
        }
    }
    let infections: Vec<InfectionEvent> = first_origin
        .iter()
        .map(|(&j, &(i, stage))| infection_event(world, epi, j, Some(i), Some(stage), InfectionMode::Transmission))
        .collect();
    for e in &infections {
        epi.infect(e.node, now);
    }
    for j in &reinfected {
        if let Some(inf) = epi.infected.get_mut(j) {
            inf.reinfections += 1;
        }
    }
    TransmissionOutcome {
        infections,
        reinfected: reinfected.into_iter().collect(),
    }
}

/// Geometric stage progression. Nodes that entered their stage this step
/// wait until the next one, so the mean dwell equals the configured mean.
pub fn step_progression<R: Rng + ?Sized>(
    epi: &mut EpidemicState,
    params: &EpidemicParams,
    now: u64,
    rng: &mut R,
) -> Vec<StageTransition> {
    let mut out = Vec::new();
    for (&id, inf) in epi.infected.iter_mut() {
        if inf.stage_entered_at >= now {
            continue;
        }
        let p = params.progression_prob(inf.stage);
        if p <= 0.0 || rng.random::<f64>() >= p {
            continue;
        }
        let to = match inf.stage {
            Stage::Acute => Stage::Chronic,
            Stage::Chronic => Stage::Late,
            s => s,
        };
        out.push(StageTransition {
            node: id,
            from: inf.stage,
            to,
        });
        inf.stage = to;
        inf.stage_entered_at = now;
    }
    out
}
