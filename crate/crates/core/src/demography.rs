//! Births, deaths and migration with a density-regulated insertion rate.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::design::SampleState;
use crate::epidemic::EpidemicState;
use crate::error::{Error, Result};
use crate::space::{sample_near_center, GroupId, SpaceConfig};
use crate::world::{NodeId, NodeLifeRecord, RemovalCause, Sex, World};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemographyParams {
    pub death_hazard: f64,
    pub pop_target: usize,
    pub insertion_base: f64,
    pub feedback_strength: f64,
    pub emigration_hazard: f64,
}

impl Default for DemographyParams {
    fn default() -> Self {
        DemographyParams {
            death_hazard: 0.0005,
            pop_target: 1000,
            insertion_base: 0.5,
            feedback_strength: 100.0,
            emigration_hazard: 0.0,
        }
    }
}

impl DemographyParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.death_hazard) {
            return Err(Error::Config("demography.death_hazard must lie in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.emigration_hazard) {
            return Err(Error::Config("demography.emigration_hazard must lie in [0, 1)".into()));
        }
        if self.pop_target == 0 {
            return Err(Error::Config("demography.pop_target must be >= 1".into()));
        }
        if !(self.insertion_base >= 0.0 && self.feedback_strength >= 0.0) {
            return Err(Error::Config(
                "demography.insertion_base and demography.feedback_strength must be >= 0".into(),
            ));
        }
        let balance = (self.death_hazard + self.emigration_hazard) * self.pop_target as f64;
        if balance > 0.0 {
            let ratio = self.insertion_base / balance;
            if !(0.5..=2.0).contains(&ratio) {
                log::warn!(
                    "demography.insertion_base {} is far from the equilibrium value {balance}",
                    self.insertion_base
                );
            }
        }
        Ok(())
    }
}

/// Receives population removals so samples can drop the node.
pub trait PopulationObserver {
    fn node_removed(&mut self, id: NodeId);
}

impl PopulationObserver for SampleState {
    fn node_removed(&mut self, id: NodeId) {
        self.forget(id);
    }
}

impl PopulationObserver for EpidemicState {
    fn node_removed(&mut self, id: NodeId) {
        self.forget(id);
    }
}

/// Decides this step's removals in ascending id order. `hazard_mult` scales
/// the baseline death hazard per node (stage and treatment effects).
pub fn step_deaths<R: Rng + ?Sized>(
    world: &World,
    params: &DemographyParams,
    hazard_mult: &dyn Fn(NodeId) -> f64,
    rng: &mut R,
) -> Vec<(NodeId, RemovalCause)> {
    let emig = params.emigration_hazard;
    let mut out = Vec::new();
    for &id in world.nodes.keys() {
        let death = (params.death_hazard * hazard_mult(id)).clamp(0.0, 1.0);
        if death <= 0.0 && emig <= 0.0 {
            continue;
        }
        let u = rng.random::<f64>();
        if u < death {
            out.push((id, RemovalCause::Death));
        } else if u < death + (1.0 - death) * emig {
            out.push((id, RemovalCause::Emigration));
        }
    }
    out
}

/// Removes a node from the world and from every observer. An unknown id is
/// a caller bug: it panics in debug builds and is skipped with a warning
/// otherwise.
pub fn remove_node(
    world: &mut World,
    observers: &mut [&mut dyn PopulationObserver],
    id: NodeId,
    cause: RemovalCause,
) -> Option<NodeLifeRecord> {
    let Some(record) = world.remove_node(id, cause) else {
        debug_assert!(false, "remove_node called for unknown node {id:?}");
        log::warn!("remove_node called for unknown node {id:?}");
        return None;
    };
    for obs in observers.iter_mut() {
        obs.node_removed(id);
    }
    Some(record)
}

/// `λ0 · max(0, 1 + η(N* − N)/N*)`.
pub fn insertion_rate(n_now: usize, params: &DemographyParams) -> f64 {
    let target = params.pop_target as f64;
    params.insertion_base * (1.0 + params.feedback_strength * (target - n_now as f64) / target).max(0.0)
}

/// Draws a group with weight `max(1, target − current)`.
pub fn choose_group<R: Rng + ?Sized>(world: &World, sizes: &[usize], rng: &mut R) -> GroupId {
    let weights: Vec<f64> = world
        .groups
        .iter()
        .zip(sizes)
        .map(|(g, &s)| (g.target_size.saturating_sub(s)).max(1) as f64)
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return world.groups[k].id;
        }
        u -= w;
    }
    world.groups[weights.len() - 1].id
}

/// Poisson number of isolated newcomers, placed near their group's center.
pub fn step_insertions<R: Rng + ?Sized>(
    world: &mut World,
    params: &DemographyParams,
    space: &SpaceConfig,
    rng: &mut R,
) -> Vec<NodeId> {
    let rate = insertion_rate(world.population(), params);
    if rate <= 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(rate).expect("positive finite rate").sample(rng) as usize;
    let mut sizes = world.group_sizes();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let sex = if rng.random::<bool>() { Sex::M } else { Sex::F };
        let group = choose_group(world, &sizes, rng);
        sizes[group.index()] += 1;
        let center = world.groups[group.index()].center;
        let position = sample_near_center(center, space, rng);
        out.push(world.add_node(group, sex, position));
    }
    out
}
