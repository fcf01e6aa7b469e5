//! The tick loop and replicate orchestration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, ScenarioConfig};
use crate::demography::{self, PopulationObserver};
use crate::design::{Design, Membership};
use crate::epidemic::{self, EpidemicState};
use crate::error::{Error, Result};
use crate::intervention::{self, TreatmentState};
use crate::links;
use crate::metrics::{
    self, DesignRecord, EpidemicRecord, InterventionRecord, RemovalRecord, StepRecord, SCHEMA_VERSION,
};
use crate::rng::{self, Streams};
use crate::space::{self, sample_near_center};
use crate::world::{Sex, World};

/// Everything that evolves during a replicate. Serializing this is the
/// snapshot body.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Simulation {
    pub model: ModelConfig,
    pub world: World,
    pub epi: EpidemicState,
    pub treatment: TreatmentState,
    pub designs: Vec<Design>,
    pub streams: Streams,
    /// Checks world and sample invariants after every tick.
    #[serde(skip)]
    pub audit: bool,
}

impl Simulation {
    /// A fresh world at step 0: groups at random centers, each filled to its
    /// target with isolated nodes drawn from the stationary cloud.
    pub fn new(model: ModelConfig, base_seed: u64, replicate: u64) -> Result<Self> {
        model.validate()?;
        let mut streams = Streams::new(base_seed, replicate);
        let init = streams.get(rng::INIT);
        let groups = space::init_groups(&model.space, model.demography.pop_target, init);
        let mut world = World::new(model.space.region_side, groups);
        for g in 0..world.groups.len() {
            let (id, center, target) = {
                let gs = &world.groups[g];
                (gs.id, gs.center, gs.target_size)
            };
            for _ in 0..target {
                let sex = if rand::Rng::random::<bool>(init) { Sex::M } else { Sex::F };
                let position = sample_near_center(center, &model.space, init);
                world.add_node(id, sex, position);
            }
        }
        let designs = model
            .designs
            .iter()
            .map(|(name, spec)| Design::new(name.clone(), spec.clone()))
            .collect();
        Ok(Simulation {
            model,
            world,
            epi: EpidemicState::default(),
            treatment: TreatmentState::default(),
            designs,
            streams,
            audit: false,
        })
    }

    /// Replaces the model parameters, keeping state. Designs are matched by
    /// name; new names start empty, and a stored design missing from the
    /// new model is a mismatch.
    pub fn apply_model(&mut self, model: ModelConfig) -> Result<()> {
        model.validate()?;
        if model.space.n_groups != self.world.groups.len() {
            return Err(Error::Snapshot(format!(
                "snapshot has {} groups, config asks for {}",
                self.world.groups.len(),
                model.space.n_groups
            )));
        }
        if (model.space.region_side - self.world.region_side).abs() > 0.0 {
            return Err(Error::Snapshot("region_side differs from the snapshot".into()));
        }
        if let Some(d) = self.designs.iter().find(|d| !model.designs.iter().any(|(n, _)| *n == d.name)) {
            return Err(Error::Snapshot(format!("snapshot design '{}' is not in the config", d.name)));
        }
        let mut old = std::mem::take(&mut self.designs);
        for (name, spec) in &model.designs {
            match old.iter().position(|d| d.name == *name) {
                Some(k) => {
                    let mut d = old.swap_remove(k);
                    d.spec = spec.clone();
                    self.designs.push(d);
                }
                None => self.designs.push(Design::new(name.clone(), spec.clone())),
            }
        }
        self.model = model;
        Ok(())
    }

    /// Advances one step and records it.
    pub fn run_tick(&mut self) -> Result<StepRecord> {
        self.world.step += 1;
        let now = self.world.step;
        let m = &self.model;
        let mu = m.demography.death_hazard;

        // (1)-(2) social space
        let rng = self.streams.get(rng::SPACE);
        space::step_group_centers(&mut self.world.groups, &m.space, rng);
        space::step_node_positions(
            self.world.nodes.values_mut().map(|n| (&mut n.position, n.group)),
            &self.world.groups,
            &m.space,
            rng,
        );

        // (3)-(4) demography
        let rng = self.streams.get(rng::DEMOGRAPHY);
        let (epi, treat) = (&self.epi, &self.treatment);
        let hazard = |id| {
            epidemic::stage_mortality_multiplier(&m.epi, epi.stage(id), mu)
                * intervention::effect_multipliers(id, treat).mortality_mult
        };
        let leaving = demography::step_deaths(&self.world, &m.demography, &hazard, rng);
        let mut removals = Vec::with_capacity(leaving.len());
        for (id, cause) in leaving {
            let stage = self.epi.stage(id);
            let mut observers: Vec<&mut dyn PopulationObserver> = vec![&mut self.epi, &mut self.treatment];
            observers.extend(self.designs.iter_mut().map(|d| &mut d.state as &mut dyn PopulationObserver));
            demography::remove_node(&mut self.world, &mut observers, id, cause);
            removals.push(RemovalRecord { node: id, cause, stage });
        }
        let births = demography::step_insertions(&mut self.world, &m.demography, &m.space, rng).len();

        // (5)-(6) links
        let links_dissolved = links::step_dissolution(&mut self.world, now).len();
        let rng = self.streams.get(rng::LINKS);
        let links_formed = links::step_formation(&mut self.world, &m.links, &self.treatment, rng).len();

        // (7)-(9) epidemic
        let rng = self.streams.get(rng::EPIDEMIC);
        let mut infections = epidemic::seed_infections(&self.world, &mut self.epi, &m.epi, rng);
        infections.extend(epidemic::step_importation(&self.world, &mut self.epi, &m.epi, rng));
        let infected_degree_out_mean = self.epi.mean_degree_out(&self.world);
        let outcome = epidemic::step_transmission(&self.world, &mut self.epi, &m.epi, &self.treatment, rng);
        infections.extend(outcome.infections);
        let progressions = epidemic::step_progression(&mut self.epi, &m.epi, now, rng).len();

        // (10) intervention
        let spec = &m.intervention;
        let intervention = if spec.enabled {
            let mut rec = InterventionRecord::default();
            if now >= spec.start_step {
                let rng = self.streams.get(rng::INTERVENTION);
                rec.enrollments =
                    intervention::step_seek_and_treat(spec, &mut self.treatment, &self.world, &self.epi, rng);
                rec.dropouts = intervention::step_dropout(spec, &mut self.treatment, now, rng).len();
                rec.cures = intervention::step_cure(spec, &mut self.treatment, &mut self.epi, rng).len();
            }
            let (pos, neg) = self.treatment.counts();
            rec.enrolled_positive = pos;
            rec.enrolled_negative = neg;
            rec.surface = metrics::surface(&self.treatment, &self.world);
            Some(rec)
        } else {
            None
        };

        // (11) registered designs, each on its own stream
        let mut design_records = Vec::with_capacity(self.designs.len());
        for d in &mut self.designs {
            let rng = self.streams.get(&rng::design_stream(&d.name));
            let selections = d.step(&self.world, rng);
            if let Some(e) = selections.iter().find(|e| e.origin.is_some() && e.degree_out + 1 > e.degree) {
                return Err(Error::Contract(format!(
                    "design '{}' traced node {:?} with degree-out {} and degree {}",
                    d.name, e.destination, e.degree_out, e.degree
                )));
            }
            design_records.push(DesignRecord {
                name: d.name.clone(),
                volume: metrics::volume(&d.state),
                surface: metrics::surface(&d.state, &self.world),
                selections,
            });
        }

        if self.audit {
            self.check()?;
        }

        // (12) record
        let [acute, chronic, late] = self.epi.stage_counts();
        let incidence = infections.len();
        Ok(StepRecord {
            schema: SCHEMA_VERSION,
            step: now,
            population: self.world.population(),
            links: self.world.links.len(),
            mean_degree: self.world.mean_degree(),
            group_sizes: self.world.group_sizes(),
            births,
            links_formed,
            links_dissolved,
            removals,
            epidemic: EpidemicRecord {
                prevalence: self.epi.size(),
                incidence,
                acute,
                chronic,
                late,
                surface: metrics::surface(&self.epi, &self.world),
                infected_degree_out_mean,
                reinfections: outcome.reinfected.len(),
                progressions,
                infections,
            },
            intervention,
            designs: design_records,
        })
    }

    /// World invariants plus membership of every sample in the living set.
    pub fn check(&self) -> Result<()> {
        self.world.check_invariants().map_err(Error::Contract)?;
        let alive = |ids: Vec<_>, what: &str| -> Result<()> {
            match ids.into_iter().find(|id| !self.world.contains(*id)) {
                Some(id) => Err(Error::Contract(format!("{what} holds departed node {id:?}"))),
                None => Ok(()),
            }
        };
        alive(self.epi.member_ids(), "infected set")?;
        alive(self.treatment.member_ids(), "treatment set")?;
        for d in &self.designs {
            alive(d.state.member_ids(), &format!("design '{}'", d.name))?;
        }
        Ok(())
    }

    /// Runs until `world.step == until`, handing each record to `sink`.
    pub fn run_until(&mut self, until: u64, sink: &mut dyn FnMut(StepRecord) -> Result<()>) -> Result<()> {
        while self.world.step < until {
            let rec = self.run_tick()?;
            sink(rec)?;
        }
        Ok(())
    }

    /// Runs until `world.step == until`, keeping every record.
    pub fn collect_until(&mut self, until: u64) -> Result<Vec<StepRecord>> {
        let mut out = Vec::with_capacity(until.saturating_sub(self.world.step) as usize);
        self.run_until(until, &mut |r| {
            out.push(r);
            Ok(())
        })?;
        Ok(out)
    }
}

/// Builds replicate `r`'s starting state: a fresh world, or the shared
/// snapshot with the scenario's model and the replicate's own streams.
pub fn start_replicate(cfg: &ScenarioConfig, replicate: u64, snapshot: Option<&Simulation>) -> Result<Simulation> {
    match snapshot {
        None => Simulation::new(cfg.model.clone(), cfg.run.seed, replicate),
        Some(base) => {
            if base.world.step >= cfg.run.steps {
                return Err(Error::Config(format!(
                    "snapshot is at step {} but run.steps is {}",
                    base.world.step, cfg.run.steps
                )));
            }
            let mut sim = base.clone();
            sim.apply_model(cfg.model.clone())?;
            sim.check()?;
            sim.streams.reseed(cfg.run.seed, replicate);
            Ok(sim)
        }
    }
}

/// Runs replicates `0..R` in parallel. `run_one` receives a ready
/// simulation and its replicate index; results come back in index order,
/// so output never depends on scheduling.
pub fn run_replicates<T, F>(
    cfg: &ScenarioConfig,
    snapshot: Option<&Simulation>,
    run_one: F,
) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(Simulation, u64) -> Result<T> + Sync,
{
    (0..cfg.run.replicates)
        .into_par_iter()
        .map(|r| start_replicate(cfg, r, snapshot).and_then(|sim| run_one(sim, r)))
        .collect()
}

/// Sequential counterpart of [`run_replicates`].
pub fn run_replicates_sequential<T, F>(
    cfg: &ScenarioConfig,
    snapshot: Option<&Simulation>,
    run_one: F,
) -> Vec<Result<T>>
where
    F: Fn(Simulation, u64) -> Result<T>,
{
    (0..cfg.run.replicates)
        .map(|r| start_replicate(cfg, r, snapshot).and_then(|sim| run_one(sim, r)))
        .collect()
}
