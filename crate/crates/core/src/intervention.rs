//! Seek-and-treat: random testing plus contact tracing from known
//! positives, with treatment and prevention effects fed back into the
//! epidemic, demography and link layers.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::demography::PopulationObserver;
use crate::design::Membership;
use crate::effects::{EffectSource, Multipliers};
use crate::epidemic::EpidemicState;
use crate::error::{Error, Result};
use crate::world::{NodeId, World};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectSet {
    pub art_out_mult: f64,
    pub art_mortality_mult: f64,
    pub prevention_in_mult: f64,
    pub vaccine_in_mult: f64,
    pub behavior_duration_mult: f64,
    pub behavior_formation_mult: f64,
    pub cure_prob: f64,
}

impl EffectSet {
    pub const NEUTRAL: EffectSet = EffectSet {
        art_out_mult: 1.0,
        art_mortality_mult: 1.0,
        prevention_in_mult: 1.0,
        vaccine_in_mult: 1.0,
        behavior_duration_mult: 1.0,
        behavior_formation_mult: 1.0,
        cure_prob: 0.0,
    };

    pub fn multipliers(&self) -> Multipliers {
        Multipliers {
            out_mult: self.art_out_mult,
            in_mult: self.prevention_in_mult * self.vaccine_in_mult,
            mortality_mult: self.art_mortality_mult,
            duration_mult: self.behavior_duration_mult,
            formation_mult: self.behavior_formation_mult,
        }
    }

    fn validate(&self, which: &str) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let ok = unit(self.art_out_mult)
            && self.art_mortality_mult > 0.0
            && self.art_mortality_mult <= 1.0
            && unit(self.prevention_in_mult)
            && unit(self.vaccine_in_mult)
            && self.behavior_duration_mult >= 1.0
            && self.behavior_duration_mult.is_finite()
            && unit(self.behavior_formation_mult)
            && unit(self.cure_prob);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("intervention effects for {which} are out of range")))
        }
    }
}

impl Default for EffectSet {
    fn default() -> Self {
        EffectSet::NEUTRAL
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub enabled: bool,
    pub random_test_prob: f64,
    pub trace_prob: f64,
    pub sensitivity: f64,
    pub dropout_prob: f64,
    pub start_step: u64,
    pub positive: EffectSet,
    pub negative: EffectSet,
}

impl Default for InterventionSpec {
    fn default() -> Self {
        InterventionSpec {
            enabled: false,
            random_test_prob: 0.002,
            trace_prob: 0.3,
            sensitivity: 1.0,
            dropout_prob: 0.0,
            start_step: 0,
            positive: EffectSet {
                art_out_mult: 0.1,
                ..EffectSet::NEUTRAL
            },
            negative: EffectSet::NEUTRAL,
        }
    }
}

impl InterventionSpec {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        for (k, v) in [
            ("random_test_prob", self.random_test_prob),
            ("trace_prob", self.trace_prob),
            ("sensitivity", self.sensitivity),
            ("dropout_prob", self.dropout_prob),
        ] {
            if !unit(v) {
                return Err(Error::Config(format!("intervention.{k} must lie in [0, 1]")));
            }
        }
        self.positive.validate("positives")?;
        self.negative.validate("negatives")
    }

    pub fn effects_for(&self, status: KnownStatus) -> EffectSet {
        match status {
            KnownStatus::Positive => self.positive,
            KnownStatus::Negative => self.negative,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnownStatus {
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enrollment {
    pub enrolled_at: u64,
    pub status: KnownStatus,
    pub effects: EffectSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reach {
    Random,
    Trace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentEvent {
    pub step: u64,
    pub node: NodeId,
    pub status: KnownStatus,
    pub infected: bool,
    pub reach: Reach,
    pub origin: Option<NodeId>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TreatmentState {
    pub enrolled: BTreeMap<NodeId, Enrollment>,
}

impl Membership for TreatmentState {
    fn contains(&self, id: NodeId) -> bool {
        self.enrolled.contains_key(&id)
    }
    fn member_ids(&self) -> Vec<NodeId> {
        self.enrolled.keys().copied().collect()
    }
    fn size(&self) -> usize {
        self.enrolled.len()
    }
}

impl EffectSource for TreatmentState {
    fn multipliers(&self, id: NodeId) -> Multipliers {
        effect_multipliers(id, self)
    }
}

impl PopulationObserver for TreatmentState {
    fn node_removed(&mut self, id: NodeId) {
        self.enrolled.remove(&id);
    }
}

impl TreatmentState {
    pub fn counts(&self) -> (usize, usize) {
        let pos = self
            .enrolled
            .values()
            .filter(|e| e.status == KnownStatus::Positive)
            .count();
        (pos, self.enrolled.len() - pos)
    }
}

/// Multipliers from the node's active effects; neutral when not enrolled.
pub fn effect_multipliers(id: NodeId, treat: &TreatmentState) -> Multipliers {
    treat
        .enrolled
        .get(&id)
        .map_or(Multipliers::NEUTRAL, |e| e.effects.multipliers())
}

/// Random testing of unenrolled nodes, tracing from enrolled positives,
/// then a test of every reached node. Reached nodes are enrolled with the
/// effects matching their test result.
pub fn step_seek_and_treat<R: Rng + ?Sized>(
    spec: &InterventionSpec,
    treat: &mut TreatmentState,
    world: &World,
    epi: &EpidemicState,
    rng: &mut R,
) -> Vec<EnrollmentEvent> {
    let now = world.step;
    let mut reached: BTreeMap<NodeId, (Reach, Option<NodeId>)> = BTreeMap::new();
    if spec.random_test_prob > 0.0 {
        for &id in world.nodes.keys() {
            if !treat.contains(id) && rng.random::<f64>() < spec.random_test_prob {
                reached.insert(id, (Reach::Random, None));
            }
        }
    }
    if spec.trace_prob > 0.0 {
        for (&i, e) in &treat.enrolled {
            if e.status != KnownStatus::Positive {
                continue;
            }
            for &j in world.neighbors(i) {
                if !treat.contains(j) && rng.random::<f64>() < spec.trace_prob {
                    reached.entry(j).or_insert((Reach::Trace, Some(i)));
                }
            }
        }
    }
    let mut events = Vec::with_capacity(reached.len());
    for (id, (reach, origin)) in reached {
        let infected = epi.contains(id);
        let status = if infected && rng.random::<f64>() < spec.sensitivity {
            KnownStatus::Positive
        } else {
            KnownStatus::Negative
        };
        treat.enrolled.insert(
            id,
            Enrollment {
                enrolled_at: now,
                status,
                effects: spec.effects_for(status),
            },
        );
        events.push(EnrollmentEvent {
            step: now,
            node: id,
            status,
            infected,
            reach,
            origin,
        });
    }
    events
}

/// Each node enrolled before `now` leaves with `dropout_prob`.
pub fn step_dropout<R: Rng + ?Sized>(
    spec: &InterventionSpec,
    treat: &mut TreatmentState,
    now: u64,
    rng: &mut R,
) -> Vec<NodeId> {
    if spec.dropout_prob <= 0.0 {
        return Vec::new();
    }
    let leaving: Vec<NodeId> = treat
        .enrolled
        .iter()
        .filter(|(_, e)| e.enrolled_at < now)
        .map(|(id, _)| *id)
        .filter(|_| rng.random::<f64>() < spec.dropout_prob)
        .collect();
    for id in &leaving {
        treat.enrolled.remove(id);
    }
    leaving
}

/// Each enrolled, still infected positive is cured with its `cure_prob`.
/// Cured nodes leave the infected set and continue as known negatives.
pub fn step_cure<R: Rng + ?Sized>(
    spec: &InterventionSpec,
    treat: &mut TreatmentState,
    epi: &mut EpidemicState,
    rng: &mut R,
) -> Vec<NodeId> {
    let mut cured = Vec::new();
    for (&id, e) in treat.enrolled.iter_mut() {
        if e.status != KnownStatus::Positive || e.effects.cure_prob <= 0.0 || !epi.contains(id) {
            continue;
        }
        if rng.random::<f64>() < e.effects.cure_prob {
            epi.forget(id);
            e.status = KnownStatus::Negative;
            e.effects = spec.negative;
            cured.push(id);
        }
    }
    cured
}
