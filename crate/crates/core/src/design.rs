//! Sampling designs: acquisition by link tracing or random selection,
//! attrition, activity and replacement dampening, and size feedback.
//!
//! All decisions inside one step read the sample as it stood at the start of
//! the step. Units selected during a step trace from the next step on, and
//! attrition and activity decay apply only to units that were already
//! members when the step began.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::GroupId;
use crate::world::{NodeId, World};

/// Anything that partitions the population into members and non-members.
pub trait Membership {
    fn contains(&self, id: NodeId) -> bool;
    /// Ascending.
    fn member_ids(&self) -> Vec<NodeId>;
    fn size(&self) -> usize;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TracingMode {
    Bernoulli,
    OneLink,
    FixedCount(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub mode: TracingMode,
    pub trace_prob: f64,
    pub random_prob: f64,
    pub attrition_prob: f64,
    /// Reselection multiplier given to a unit when it leaves by attrition.
    pub replacement: f64,
    pub activity_decay: f64,
    pub target_size: Option<f64>,
    pub feedback: f64,
    pub seeds: usize,
    pub start_step: u64,
}

impl Default for DesignSpec {
    fn default() -> Self {
        DesignSpec {
            mode: TracingMode::Bernoulli,
            trace_prob: 0.1,
            random_prob: 0.0,
            attrition_prob: 0.0,
            replacement: 1.0,
            activity_decay: 1.0,
            target_size: None,
            feedback: 0.0,
            seeds: 10,
            start_step: 0,
        }
    }
}

impl DesignSpec {
    pub fn validate(&self, name: &str) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        for (key, v) in [
            ("trace_prob", self.trace_prob),
            ("random_prob", self.random_prob),
            ("attrition_prob", self.attrition_prob),
            ("replacement", self.replacement),
            ("activity_decay", self.activity_decay),
        ] {
            if !unit(v) {
                return Err(Error::Config(format!("design.{name}.{key} must lie in [0, 1]")));
            }
        }
        if !(self.feedback >= 0.0) {
            return Err(Error::Config(format!("design.{name}.feedback must be >= 0")));
        }
        if let Some(t) = self.target_size {
            if !(t > 0.0) {
                return Err(Error::Config(format!("design.{name}.target_size must be > 0")));
            }
        }
        if let TracingMode::FixedCount(0) = self.mode {
            return Err(Error::Config(format!("design.{name}.mode fixed count must be >= 1")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub entered_at: u64,
    pub activity: f64,
    pub active: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleState {
    pub members: BTreeMap<NodeId, MemberRecord>,
    /// Only nodes that have left by attrition appear here; absent means 1.
    pub replacement: BTreeMap<NodeId, f64>,
}

impl Membership for SampleState {
    fn contains(&self, id: NodeId) -> bool {
        self.members.contains_key(&id)
    }
    fn member_ids(&self) -> Vec<NodeId> {
        self.members.keys().copied().collect()
    }
    fn size(&self) -> usize {
        self.members.len()
    }
}

impl SampleState {
    pub fn replacement_value(&self, id: NodeId) -> f64 {
        self.replacement.get(&id).copied().unwrap_or(1.0)
    }

    pub fn activity(&self, id: NodeId) -> f64 {
        self.members.get(&id).map_or(0.0, |m| m.activity)
    }

    /// Returns false if `id` was already a member.
    pub fn admit(&mut self, id: NodeId, now: u64) -> bool {
        if self.members.contains_key(&id) {
            return false;
        }
        self.members.insert(
            id,
            MemberRecord {
                entered_at: now,
                activity: 1.0,
                active: true,
            },
        );
        true
    }

    /// Design-driven departure; the unit stays in the population with its
    /// reselection value set to `replacement`.
    pub fn release(&mut self, id: NodeId, replacement: f64) -> bool {
        if self.members.remove(&id).is_none() {
            return false;
        }
        self.replacement.insert(id, replacement);
        true
    }

    /// Forgets a node that left the population.
    pub fn forget(&mut self, id: NodeId) -> bool {
        self.replacement.remove(&id);
        self.members.remove(&id).is_some()
    }

    pub fn set_active(&mut self, id: NodeId, active: bool) {
        if let Some(m) = self.members.get_mut(&id) {
            m.active = active;
            if !active {
                m.activity = 0.0;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    Seed,
    Trace,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: u64,
    pub origin: Option<NodeId>,
    pub destination: NodeId,
    pub group: GroupId,
    /// Degree of the destination when selected.
    pub degree: usize,
    /// Links from the destination to non-members of the start-of-step sample.
    pub degree_out: usize,
    pub mode: SelectionMode,
    /// Destination's reselection value before selection (1 if never sampled).
    pub prior_replacement: f64,
}

/// `exp(−ψ(n − n*)/n*)` clamped to `[0.01, 100]`; 1 without a target.
pub fn size_adjustment(n: usize, target: Option<f64>, feedback: f64) -> f64 {
    match target {
        Some(t) if feedback > 0.0 => (-feedback * (n as f64 - t) / t).exp().clamp(0.01, 100.0),
        _ => 1.0,
    }
}

fn spec_adjustment(spec: &DesignSpec, sample: &SampleState) -> f64 {
    size_adjustment(sample.size(), spec.target_size, spec.feedback)
}

/// `p · activity_i · replacement_j · size_adjustment`, clamped to `[0, 1]`.
pub fn tracing_probability(spec: &DesignSpec, sample: &SampleState, origin: NodeId, destination: NodeId) -> f64 {
    (spec.trace_prob * sample.activity(origin) * sample.replacement_value(destination) * spec_adjustment(spec, sample))
        .clamp(0.0, 1.0)
}

/// Member→non-member links, each undirected link once, ordered by
/// `(member, non-member)`.
pub fn surface_links(sample: &dyn Membership, world: &World) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    for i in sample.member_ids() {
        for &j in world.neighbors(i) {
            if !sample.contains(j) {
                out.push((i, j));
            }
        }
    }
    out
}

pub fn degree_out(world: &World, sample: &dyn Membership, id: NodeId) -> usize {
    world.neighbors(id).iter().filter(|j| !sample.contains(**j)).count()
}

fn event(
    world: &World,
    sample: &SampleState,
    origin: Option<NodeId>,
    destination: NodeId,
    mode: SelectionMode,
) -> TraceEvent {
    let node = world.node(destination).expect("selected node is alive");
    TraceEvent {
        step: world.step,
        origin,
        destination,
        group: node.group,
        degree: node.degree(),
        degree_out: degree_out(world, sample, destination),
        mode,
        prior_replacement: sample.replacement_value(destination),
    }
}

/// Seeds drawn uniformly without replacement from living non-members.
pub fn select_seeds<R: Rng + ?Sized>(count: usize, sample: &SampleState, world: &World, rng: &mut R) -> Vec<TraceEvent> {
    let pool: Vec<NodeId> = world.nodes.keys().filter(|id| !sample.contains(**id)).copied().collect();
    let amount = count.min(pool.len());
    let mut picked: Vec<NodeId> = index::sample(rng, pool.len(), amount).into_iter().map(|k| pool[k]).collect();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|id| event(world, sample, None, id, SelectionMode::Seed))
        .collect()
}

/// Conditional Bernoulli tracing: every surface link is tried independently.
/// Events are listed in discovery order; a destination reached more than
/// once keeps its lowest-id origin.
pub fn step_bernoulli_tracing<R: Rng + ?Sized>(
    spec: &DesignSpec,
    sample: &SampleState,
    world: &World,
    rng: &mut R,
) -> Vec<TraceEvent> {
    let mut reached = BTreeSet::new();
    let mut events = Vec::new();
    for (i, j) in surface_links(sample, world) {
        let p = tracing_probability(spec, sample, i, j);
        if p > 0.0 && rng.random::<f64>() < p && reached.insert(j) {
            events.push(event(world, sample, Some(i), j, SelectionMode::Trace));
        }
    }
    events
}

fn link_weight(sample: &SampleState, i: NodeId, j: NodeId) -> f64 {
    sample.activity(i) * sample.replacement_value(j)
}

/// At most one link per step: fires with probability `p · size_adjustment`,
/// then picks a surface link with weight `activity_i · replacement_j`.
pub fn step_one_link<R: Rng + ?Sized>(
    spec: &DesignSpec,
    sample: &SampleState,
    world: &World,
    rng: &mut R,
) -> Vec<TraceEvent> {
    let surface = surface_links(sample, world);
    if surface.is_empty() {
        return Vec::new();
    }
    let gate = (spec.trace_prob * spec_adjustment(spec, sample)).clamp(0.0, 1.0);
    if !(gate > 0.0 && rng.random::<f64>() < gate) {
        return Vec::new();
    }
    let weights: Vec<f64> = surface.iter().map(|&(i, j)| link_weight(sample, i, j)).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Vec::new();
    }
    let mut u = rng.random::<f64>() * total;
    let mut chosen = None;
    let mut last_positive = 0;
    for (k, w) in weights.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        last_positive = k;
        if u < *w {
            chosen = Some(k);
            break;
        }
        u -= w;
    }
    let chosen = chosen.unwrap_or(last_positive);
    let (i, j) = surface[chosen];
    vec![event(world, sample, Some(i), j, SelectionMode::Trace)]
}

/// Up to `k` distinct destinations, uniformly without replacement, from the
/// reachable non-members (positive-weight surface links). Fires with
/// probability `p · size_adjustment`.
pub fn step_fixed_count<R: Rng + ?Sized>(
    spec: &DesignSpec,
    sample: &SampleState,
    world: &World,
    k: usize,
    rng: &mut R,
) -> Vec<TraceEvent> {
    let mut origin_of: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for (i, j) in surface_links(sample, world) {
        if link_weight(sample, i, j) > 0.0 {
            origin_of.entry(j).or_insert(i);
        }
    }
    if origin_of.is_empty() {
        return Vec::new();
    }
    let gate = (spec.trace_prob * spec_adjustment(spec, sample)).clamp(0.0, 1.0);
    if !(gate > 0.0 && rng.random::<f64>() < gate) {
        return Vec::new();
    }
    let dests: Vec<(NodeId, NodeId)> = origin_of.into_iter().collect();
    let amount = k.min(dests.len());
    let mut picked: Vec<usize> = index::sample(rng, dests.len(), amount).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|idx| {
            let (j, i) = dests[idx];
            event(world, sample, Some(i), j, SelectionMode::Trace)
        })
        .collect()
}

/// Each living non-member independently with `r · replacement · size_adjustment`.
pub fn step_random_selection<R: Rng + ?Sized>(
    spec: &DesignSpec,
    sample: &SampleState,
    world: &World,
    rng: &mut R,
) -> Vec<TraceEvent> {
    if spec.random_prob <= 0.0 {
        return Vec::new();
    }
    let adj = spec_adjustment(spec, sample);
    let mut events = Vec::new();
    for &id in world.nodes.keys() {
        if sample.contains(id) {
            continue;
        }
        let p = (spec.random_prob * sample.replacement_value(id) * adj).clamp(0.0, 1.0);
        if p > 0.0 && rng.random::<f64>() < p {
            events.push(event(world, sample, None, id, SelectionMode::Random));
        }
    }
    events
}

/// Admits the destinations of `events` in order, dropping repeats. Returns
/// the events that produced a new member.
pub fn apply_selections(sample: &mut SampleState, events: Vec<TraceEvent>, now: u64) -> Vec<TraceEvent> {
    events.into_iter().filter(|e| sample.admit(e.destination, now)).collect()
}

/// Each member present since before `now` leaves with probability `a`;
/// leavers get reselection value `ρ`.
pub fn step_attrition<R: Rng + ?Sized>(spec: &DesignSpec, sample: &mut SampleState, now: u64, rng: &mut R) -> Vec<NodeId> {
    if spec.attrition_prob <= 0.0 {
        return Vec::new();
    }
    let leaving: Vec<NodeId> = sample
        .members
        .iter()
        .filter(|(_, m)| m.entered_at < now)
        .map(|(id, _)| *id)
        .filter(|_| rng.random::<f64>() < spec.attrition_prob)
        .collect();
    for id in &leaving {
        sample.release(*id, spec.replacement);
    }
    leaving
}

/// Multiplies activity by `δ` for members present since before `now`;
/// inactive members are pinned at 0.
pub fn step_activity_decay(spec: &DesignSpec, sample: &mut SampleState, now: u64) {
    for m in sample.members.values_mut() {
        if !m.active {
            m.activity = 0.0;
        } else if m.entered_at < now {
            m.activity *= spec.activity_decay;
        }
    }
}

/// A registered design: its parameters and evolving sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub name: String,
    pub spec: DesignSpec,
    pub state: SampleState,
    pub seeded: bool,
}

impl Design {
    pub fn new(name: impl Into<String>, spec: DesignSpec) -> Self {
        Design {
            name: name.into(),
            spec,
            state: SampleState::default(),
            seeded: false,
        }
    }

    /// One step: seeding (once), tracing, random selection, attrition,
    /// activity decay. Returns the selections that admitted a member.
    pub fn step<R: Rng + ?Sized>(&mut self, world: &World, rng: &mut R) -> Vec<TraceEvent> {
        let now = world.step;
        if now < self.spec.start_step {
            return Vec::new();
        }
        let mut events = Vec::new();
        if !self.seeded {
            self.seeded = true;
            events.extend(select_seeds(self.spec.seeds, &self.state, world, rng));
        }
        let sample = &self.state;
        events.extend(match self.spec.mode {
            TracingMode::Bernoulli => step_bernoulli_tracing(&self.spec, sample, world, rng),
            TracingMode::OneLink => step_one_link(&self.spec, sample, world, rng),
            TracingMode::FixedCount(k) => step_fixed_count(&self.spec, sample, world, k, rng),
        });
        events.extend(step_random_selection(&self.spec, sample, world, rng));
        let admitted = apply_selections(&mut self.state, events, now);
        step_attrition(&self.spec, &mut self.state, now, rng);
        step_activity_decay(&self.spec, &mut self.state, now);
        admitted
    }
}
