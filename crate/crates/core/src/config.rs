//! Scenario configuration: INI sections named after the model layers, with
//! every key validated. Unknown sections or keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ini::Ini;
use serde::{Deserialize, Serialize};

use crate::demography::DemographyParams;
use crate::design::{DesignSpec, TracingMode};
use crate::epidemic::EpidemicParams;
use crate::error::{Error, Result};
use crate::intervention::InterventionSpec;
use crate::links::LinkParams;
use crate::space::SpaceConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub steps: u64,
    pub burn_in: u64,
    pub replicates: u64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub snapshot_in: Option<PathBuf>,
    pub snapshot_out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: "default".into(),
            steps: 2000,
            burn_in: 500,
            replicates: 1,
            seed: 1,
            output: None,
            snapshot_in: None,
            snapshot_out: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub space: SpaceConfig,
    pub links: LinkParams,
    pub demography: DemographyParams,
    pub epi: EpidemicParams,
    pub intervention: InterventionSpec,
    /// In registration order.
    pub designs: Vec<(String, DesignSpec)>,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        self.links.validate()?;
        self.demography.validate()?;
        self.epi.validate()?;
        self.intervention.validate()?;
        if self.demography.pop_target < self.space.n_groups {
            return Err(Error::Config("demography.pop_target must be >= space.n_groups".into()));
        }
        if let Some(g) = self.epi.group_link_mult.keys().find(|g| **g >= self.space.n_groups) {
            return Err(Error::Config(format!("epi.group_link_mult.{g} names a group that does not exist")));
        }
        let mut names: Vec<&str> = self.designs.iter().map(|(n, _)| n.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("design names must be unique".into()));
        }
        for (name, spec) in &self.designs {
            spec.validate(name)?;
        }
        Ok(())
    }

    pub fn design_mut(&mut self, name: &str) -> &mut DesignSpec {
        if let Some(k) = self.designs.iter().position(|(n, _)| n == name) {
            return &mut self.designs[k].1;
        }
        self.designs.push((name.to_string(), DesignSpec::default()));
        &mut self.designs.last_mut().expect("just pushed").1
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub run: RunConfig,
    pub model: ModelConfig,
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got '{value}'"))),
    }
}

fn optional_target(key: &str, value: &str) -> Result<Option<f64>> {
    match value.trim() {
        "" | "none" => Ok(None),
        v => num(key, v).map(Some),
    }
}

pub fn parse_mode(key: &str, value: &str) -> Result<TracingMode> {
    let v = value.trim().to_ascii_lowercase();
    match v.as_str() {
        "bernoulli" => return Ok(TracingMode::Bernoulli),
        "one_link" => return Ok(TracingMode::OneLink),
        _ => {}
    }
    let k = v
        .strip_prefix("fixed_count")
        .map(|rest| rest.trim_matches(|c| c == '(' || c == ')' || c == ':' || c == '='))
        .ok_or_else(|| Error::Config(format!("{key}: unknown tracing mode '{value}'")))?;
    Ok(TracingMode::FixedCount(num(key, k)?))
}

pub fn format_mode(mode: TracingMode) -> String {
    match mode {
        TracingMode::Bernoulli => "bernoulli".into(),
        TracingMode::OneLink => "one_link".into(),
        TracingMode::FixedCount(k) => format!("fixed_count({k})"),
    }
}

impl ScenarioConfig {
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = ScenarioConfig::default();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(Error::Config(format!("key '{k}' appears outside any section")));
                }
                continue;
            };
            for (key, value) in props.iter() {
                cfg.set_in(section, key, value)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_ini_str(&text).map_err(|e| match e {
            Error::Config(message) => Error::ConfigFile {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.steps <= self.run.burn_in {
            return Err(Error::Config("run.steps must exceed run.burn_in".into()));
        }
        if self.run.replicates == 0 {
            return Err(Error::Config("run.replicates must be >= 1".into()));
        }
        self.model.validate()
    }

    /// Sets a dotted key such as `links.sex_mix.fm` or `design.fast.trace_prob`.
    pub fn set(&mut self, dotted: &str, value: &str) -> Result<()> {
        let (section, key) = if let Some(rest) = dotted.strip_prefix("design.") {
            let (name, key) = rest
                .split_once('.')
                .ok_or_else(|| Error::Config(format!("'{dotted}' is missing a design key")))?;
            (format!("design.{name}"), key)
        } else {
            let (s, k) = dotted
                .split_once('.')
                .ok_or_else(|| Error::Config(format!("'{dotted}' is not a section.key path")))?;
            (s.to_string(), k)
        };
        self.set_in(&section, key, value)
    }

    fn set_in(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let full = format!("{section}.{key}");
        let f = |v: &str| num::<f64>(&full, v);
        let m = &mut self.model;
        match section {
            "run" => {
                let r = &mut self.run;
                match key {
                    "name" => r.name = value.trim().to_string(),
                    "steps" => r.steps = num(&full, value)?,
                    "burn_in" => r.burn_in = num(&full, value)?,
                    "replicates" => r.replicates = num(&full, value)?,
                    "seed" => r.seed = num(&full, value)?,
                    "output" => r.output = Some(PathBuf::from(value.trim())),
                    "snapshot_in" => r.snapshot_in = Some(PathBuf::from(value.trim())),
                    "snapshot_out" => r.snapshot_out = Some(PathBuf::from(value.trim())),
                    _ => return Err(unknown(&full)),
                }
            }
            "space" => {
                let s = &mut m.space;
                match key {
                    "region_side" => s.region_side = f(value)?,
                    "n_groups" => s.n_groups = num(&full, value)?,
                    "group_center_step_sd" => s.group_center_step_sd = f(value)?,
                    "node_reversion" => s.node_reversion = f(value)?,
                    "node_step_sd" => s.node_step_sd = f(value)?,
                    _ => return Err(unknown(&full)),
                }
            }
            "links" => {
                let l = &mut m.links;
                match key {
                    "base_prob" => l.base_prob = f(value)?,
                    "kernel_scale" => l.kernel_scale = f(value)?,
                    "sex_mix.ff" => l.sex_mix[0][0] = f(value)?,
                    "sex_mix.fm" => l.sex_mix[0][1] = f(value)?,
                    "sex_mix.mf" => l.sex_mix[1][0] = f(value)?,
                    "sex_mix.mm" => l.sex_mix[1][1] = f(value)?,
                    "degree_cap" => l.degree_cap = f(value)?,
                    "duration_mean" => l.duration_mean = f(value)?,
                    "duration_shape" => l.duration_shape = f(value)?,
                    "candidate_cutoff" => l.candidate_cutoff = f(value)?,
                    _ => return Err(unknown(&full)),
                }
            }
            "demography" => {
                let d = &mut m.demography;
                match key {
                    "death_hazard" => d.death_hazard = f(value)?,
                    "pop_target" => d.pop_target = num(&full, value)?,
                    "insertion_base" => d.insertion_base = f(value)?,
                    "feedback_strength" => d.feedback_strength = f(value)?,
                    "emigration_hazard" => d.emigration_hazard = f(value)?,
                    _ => return Err(unknown(&full)),
                }
            }
            "epi" => {
                let e = &mut m.epi;
                match key {
                    "beta_acute" => e.beta_acute = f(value)?,
                    "beta_chronic" => e.beta_chronic = f(value)?,
                    "beta_late" => e.beta_late = f(value)?,
                    "acute_mean" => e.acute_mean = f(value)?,
                    "chronic_mean" => e.chronic_mean = f(value)?,
                    "late_mean" => e.late_mean = f(value)?,
                    "mortality_mult_acute" => e.mortality_mult_acute = f(value)?,
                    "mortality_mult_chronic" => e.mortality_mult_chronic = f(value)?,
                    "mortality_mult_late" => e.mortality_mult_late = optional_target(&full, value)?,
                    "import_prob" => e.import_prob = f(value)?,
                    "reinfection_mult" => e.reinfection_mult = f(value)?,
                    "initial_infected" => e.initial_infected = num(&full, value)?,
                    "start_step" => e.start_step = num(&full, value)?,
                    other => match other.strip_prefix("group_link_mult.") {
                        Some(g) => {
                            let g: usize = num(&full, g)?;
                            e.group_link_mult.insert(g, f(value)?);
                        }
                        None => return Err(unknown(&full)),
                    },
                }
            }
            "intervention" => {
                let i = &mut m.intervention;
                match key {
                    "enabled" => i.enabled = boolean(&full, value)?,
                    "random_test_prob" => i.random_test_prob = f(value)?,
                    "trace_prob" => i.trace_prob = f(value)?,
                    "sensitivity" => i.sensitivity = f(value)?,
                    "dropout_prob" => i.dropout_prob = f(value)?,
                    "start_step" => i.start_step = num(&full, value)?,
                    "art_out_mult" => i.positive.art_out_mult = f(value)?,
                    "art_mortality_mult" => i.positive.art_mortality_mult = f(value)?,
                    "cure_prob" => i.positive.cure_prob = f(value)?,
                    "prevention_in_mult" => i.negative.prevention_in_mult = f(value)?,
                    "vaccine_in_mult" => i.negative.vaccine_in_mult = f(value)?,
                    "behavior_duration_mult" => {
                        let v = f(value)?;
                        i.positive.behavior_duration_mult = v;
                        i.negative.behavior_duration_mult = v;
                    }
                    "behavior_formation_mult" => {
                        let v = f(value)?;
                        i.positive.behavior_formation_mult = v;
                        i.negative.behavior_formation_mult = v;
                    }
                    _ => return Err(unknown(&full)),
                }
            }
            s if s.starts_with("design.") => {
                let name = &s["design.".len()..];
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(Error::Config(format!("invalid design name in section [{s}]")));
                }
                let d = m.design_mut(name);
                match key {
                    "mode" => d.mode = parse_mode(&full, value)?,
                    "trace_prob" => d.trace_prob = f(value)?,
                    "random_prob" => d.random_prob = f(value)?,
                    "attrition_prob" => d.attrition_prob = f(value)?,
                    "replacement" => d.replacement = f(value)?,
                    "activity_decay" => d.activity_decay = f(value)?,
                    "target_size" => d.target_size = optional_target(&full, value)?,
                    "feedback" => d.feedback = f(value)?,
                    "seeds" => d.seeds = num(&full, value)?,
                    "start_step" => d.start_step = num(&full, value)?,
                    _ => return Err(unknown(&full)),
                }
            }
            _ => return Err(Error::Config(format!("unknown section [{section}]"))),
        }
        Ok(())
    }

    /// Serializes every key back to INI text; parsing the result yields an
    /// equal config.
    pub fn to_ini_string(&self) -> String {
        let mut s = String::new();
        let r = &self.run;
        let _ = writeln!(s, "[run]\nname = {}\nsteps = {}\nburn_in = {}\nreplicates = {}\nseed = {}", r.name, r.steps, r.burn_in, r.replicates, r.seed);
        for (k, v) in [("output", &r.output), ("snapshot_in", &r.snapshot_in), ("snapshot_out", &r.snapshot_out)] {
            if let Some(p) = v {
                let _ = writeln!(s, "{k} = {}", p.display());
            }
        }
        let m = &self.model;
        let sp = &m.space;
        let _ = writeln!(
            s,
            "\n[space]\nregion_side = {:?}\nn_groups = {}\ngroup_center_step_sd = {:?}\nnode_reversion = {:?}\nnode_step_sd = {:?}",
            sp.region_side, sp.n_groups, sp.group_center_step_sd, sp.node_reversion, sp.node_step_sd
        );
        let l = &m.links;
        let _ = writeln!(
            s,
            "\n[links]\nbase_prob = {:?}\nkernel_scale = {:?}\nsex_mix.ff = {:?}\nsex_mix.fm = {:?}\nsex_mix.mf = {:?}\nsex_mix.mm = {:?}\ndegree_cap = {:?}\nduration_mean = {:?}\nduration_shape = {:?}\ncandidate_cutoff = {:?}",
            l.base_prob, l.kernel_scale, l.sex_mix[0][0], l.sex_mix[0][1], l.sex_mix[1][0], l.sex_mix[1][1],
            l.degree_cap, l.duration_mean, l.duration_shape, l.candidate_cutoff
        );
        let d = &m.demography;
        let _ = writeln!(
            s,
            "\n[demography]\ndeath_hazard = {:?}\npop_target = {}\ninsertion_base = {:?}\nfeedback_strength = {:?}\nemigration_hazard = {:?}",
            d.death_hazard, d.pop_target, d.insertion_base, d.feedback_strength, d.emigration_hazard
        );
        let e = &m.epi;
        let _ = writeln!(
            s,
            "\n[epi]\nbeta_acute = {:?}\nbeta_chronic = {:?}\nbeta_late = {:?}\nacute_mean = {:?}\nchronic_mean = {:?}\nlate_mean = {:?}\nmortality_mult_acute = {:?}\nmortality_mult_chronic = {:?}\nmortality_mult_late = {}\nimport_prob = {:?}\nreinfection_mult = {:?}\ninitial_infected = {}\nstart_step = {}",
            e.beta_acute, e.beta_chronic, e.beta_late, e.acute_mean, e.chronic_mean, e.late_mean,
            e.mortality_mult_acute, e.mortality_mult_chronic,
            e.mortality_mult_late.map_or("none".to_string(), |v| format!("{v:?}")),
            e.import_prob, e.reinfection_mult, e.initial_infected, e.start_step
        );
        for (g, v) in &e.group_link_mult {
            let _ = writeln!(s, "group_link_mult.{g} = {v:?}");
        }
        let i = &m.intervention;
        let _ = writeln!(
            s,
            "\n[intervention]\nenabled = {}\nrandom_test_prob = {:?}\ntrace_prob = {:?}\nsensitivity = {:?}\ndropout_prob = {:?}\nstart_step = {}\nart_out_mult = {:?}\nart_mortality_mult = {:?}\ncure_prob = {:?}\nprevention_in_mult = {:?}\nvaccine_in_mult = {:?}\nbehavior_duration_mult = {:?}\nbehavior_formation_mult = {:?}",
            i.enabled, i.random_test_prob, i.trace_prob, i.sensitivity, i.dropout_prob, i.start_step,
            i.positive.art_out_mult, i.positive.art_mortality_mult, i.positive.cure_prob,
            i.negative.prevention_in_mult, i.negative.vaccine_in_mult,
            i.positive.behavior_duration_mult, i.positive.behavior_formation_mult
        );
        for (name, d) in &m.designs {
            let _ = writeln!(
                s,
                "\n[design.{name}]\nmode = {}\ntrace_prob = {:?}\nrandom_prob = {:?}\nattrition_prob = {:?}\nreplacement = {:?}\nactivity_decay = {:?}\ntarget_size = {}\nfeedback = {:?}\nseeds = {}\nstart_step = {}",
                format_mode(d.mode), d.trace_prob, d.random_prob, d.attrition_prob, d.replacement, d.activity_decay,
                d.target_size.map_or("none".to_string(), |v| format!("{v:?}")),
                d.feedback, d.seeds, d.start_step
            );
        }
        s
    }
}

fn unknown(key: &str) -> Error {
    Error::Config(format!("unknown key '{key}'"))
}
