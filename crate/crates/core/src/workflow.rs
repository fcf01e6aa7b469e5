//! The four top-level workflows behind the command line.

use std::path::{Path, PathBuf};

use crate::config::ScenarioConfig;
use crate::engine::{self, Simulation};
use crate::error::{Error, Result};
use crate::metrics::{self, PathEnsemble, SUMMARY_PROBS};
use crate::output::{self, JsonlWriter, Row, SeriesLog};
use crate::snapshot;

/// Replicates that completed, plus the ones that failed with their errors.
#[derive(Debug)]
pub struct Outcome<T> {
    pub done: Vec<(u64, T)>,
    pub failed: Vec<(u64, Error)>,
}

impl<T> Outcome<T> {
    fn from_results(results: Vec<Result<T>>) -> Self {
        let mut done = Vec::new();
        let mut failed = Vec::new();
        for (r, res) in results.into_iter().enumerate() {
            match res {
                Ok(v) => done.push((r as u64, v)),
                Err(e) => {
                    log::error!("replicate {r} failed: {e}");
                    failed.push((r as u64, e));
                }
            }
        }
        Outcome { done, failed }
    }

    /// The first failure, if any, for the caller's exit status.
    pub fn into_result(self) -> Result<Vec<(u64, T)>> {
        match self.failed.into_iter().next() {
            Some((_, e)) => Err(e),
            None => Ok(self.done),
        }
    }
}

fn snapshot_out_path(base: &Path, replicate: u64, replicates: u64) -> PathBuf {
    if replicates == 1 {
        return base.to_path_buf();
    }
    let mut name = base.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".{replicate}"));
    base.with_file_name(name)
}

/// Runs one replicate to `steps`, streaming records to its JSONL file.
fn run_to_file(mut sim: Simulation, cfg: &ScenarioConfig, scenario: &str, out: &Path, replicate: u64) -> Result<(SeriesLog, Simulation)> {
    let mut writer = JsonlWriter::create(&output::steps_path(out, scenario, replicate))?;
    let mut log = SeriesLog::default();
    sim.run_until(cfg.run.steps, &mut |rec| {
        log.push(&rec);
        writer.write(&rec)
    })?;
    writer.finish()?;
    Ok((log, sim))
}

fn load_snapshot_in(cfg: &ScenarioConfig) -> Result<Option<Simulation>> {
    cfg.run.snapshot_in.as_deref().map(snapshot::load).transpose()
}

/// Runs every replicate of one scenario into `out` and returns their
/// summary rows. Does not write `summary.csv`.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path) -> Result<Outcome<Row>> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let start = load_snapshot_in(cfg)?;
    let scenario = cfg.run.name.as_str();
    let results = engine::run_replicates(cfg, start.as_ref(), |sim, r| {
        let (log, end) = run_to_file(sim, cfg, scenario, out, r)?;
        if let Some(p) = &cfg.run.snapshot_out {
            snapshot::save(&end, &snapshot_out_path(p, r, cfg.run.replicates))?;
        }
        Ok(output::summarize(scenario, r, cfg.run.seed, cfg.run.burn_in, &log))
    });
    Ok(Outcome::from_results(results))
}

pub fn simulate(cfg: &ScenarioConfig, out: &Path) -> Result<Outcome<Row>> {
    let outcome = run_scenario(cfg, out)?;
    let rows: Vec<Row> = outcome.done.iter().map(|(_, r)| r.clone()).collect();
    output::write_rows(&out.join("summary.csv"), &rows)?;
    Ok(outcome)
}

/// Runs `steps` ticks from a fresh world and saves the state.
pub fn burnin(cfg: &ScenarioConfig, steps: u64, snapshot_out: &Path) -> Result<Simulation> {
    cfg.model.validate()?;
    if steps == 0 {
        return Err(Error::Config("burn-in needs at least one step".into()));
    }
    let mut sim = Simulation::new(cfg.model.clone(), cfg.run.seed, 0)?;
    sim.run_until(steps, &mut |_| Ok(()))?;
    snapshot::save(&sim, snapshot_out)?;
    Ok(sim)
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '-' })
        .collect()
}

/// Re-runs the scenario once per value of a dotted parameter and writes a
/// single combined `summary.csv`.
pub fn sweep(cfg: &ScenarioConfig, param: &str, values: &[String], out: &Path) -> Result<Vec<Row>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut variants = Vec::with_capacity(values.len());
    for v in values {
        let mut c = cfg.clone();
        c.set(param, v)?;
        c.run.name = format!("{}-{}-{}", cfg.run.name, file_safe(param), file_safe(v));
        c.validate()?;
        variants.push((v, c));
    }
    let mut rows = Vec::new();
    let mut first_error = None;
    for (v, c) in &variants {
        let outcome = run_scenario(c, out)?;
        rows.extend(outcome.done.into_iter().map(|(_, mut row)| {
            row.put("param", param);
            row.put("value", v);
            row
        }));
        if first_error.is_none() {
            first_error = outcome.failed.into_iter().next().map(|(_, e)| e);
        }
    }
    output::write_rows(&out.join("summary.csv"), &rows)?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

/// Result of a paired comparison.
#[derive(Debug)]
pub struct Comparison {
    pub rows: Vec<Row>,
    pub variant_lower: u64,
    pub pairs: u64,
    pub sign_test_p: f64,
}

/// Both scenarios start every replicate from the same snapshot and the same
/// post-snapshot streams; they differ only by their model deltas.
pub fn compare(
    baseline: &ScenarioConfig,
    variant: &ScenarioConfig,
    snapshot_path: &Path,
    out: &Path,
    replicates: u64,
    seed: u64,
) -> Result<Comparison> {
    let mut base = baseline.clone();
    let mut var = variant.clone();
    for c in [&mut base, &mut var] {
        c.run.replicates = replicates;
        c.run.seed = seed;
        c.run.snapshot_in = None;
        c.run.snapshot_out = None;
        c.validate()?;
    }
    if base.run.steps != var.run.steps || base.run.burn_in != var.run.burn_in {
        return Err(Error::Config("baseline and variant must share run.steps and run.burn_in".into()));
    }
    if base.run.name == var.run.name {
        base.run.name = "baseline".into();
        var.run.name = "variant".into();
    }
    std::fs::create_dir_all(out)?;
    let snap = snapshot::load(snapshot_path)?;
    // Surface schema mismatches as a whole-run error rather than per replicate.
    engine::start_replicate(&base, 0, Some(&snap))?;
    engine::start_replicate(&var, 0, Some(&snap))?;

    let results = engine::run_replicates(&base, Some(&snap), |sim_b, r| {
        let sim_v = engine::start_replicate(&var, r, Some(&snap))?;
        let (log_b, _) = run_to_file(sim_b, &base, &base.run.name, out, r)?;
        let (log_v, _) = run_to_file(sim_v, &var, &var.run.name, out, r)?;
        Ok((log_b, log_v))
    });
    let pairs = Outcome::from_results(results).into_result()?;

    let burn = base.run.burn_in;
    let mut summary = Vec::new();
    let mut rows = Vec::new();
    let mut lower = 0u64;
    let mut diffs = Vec::new();
    for (r, (lb, lv)) in &pairs {
        summary.push(output::summarize(&base.run.name, *r, seed, burn, lb));
        summary.push(output::summarize(&var.run.name, *r, seed, burn, lv));
        let mb = metrics::mean(lb.after(&lb.prevalence, burn));
        let mv = metrics::mean(lv.after(&lv.prevalence, burn));
        let mut row = Row::default();
        row.put("replicate", r);
        row.put("baseline", &base.run.name);
        row.put("variant", &var.run.name);
        row.put_opt("baseline_prevalence_mean", mb);
        row.put_opt("variant_prevalence_mean", mv);
        let diff = mb.zip(mv).map(|(b, v)| v - b);
        row.put_opt("prevalence_difference", diff);
        let is_lower = diff.is_some_and(|d| d < 0.0);
        row.put("variant_lower", u8::from(is_lower));
        row.put_opt("baseline_population_mean", metrics::mean(lb.after(&lb.population, burn)));
        row.put_opt("variant_population_mean", metrics::mean(lv.after(&lv.population, burn)));
        row.put("sign_test_p", "");
        lower += u64::from(is_lower);
        diffs.extend(diff);
        rows.push(row);
    }
    let n = pairs.len() as u64;
    let p = metrics::sign_test_p(lower, n);
    let mut all = Row::default();
    all.put("replicate", "all");
    all.put("baseline", &base.run.name);
    all.put("variant", &var.run.name);
    all.put("baseline_prevalence_mean", "");
    all.put("variant_prevalence_mean", "");
    all.put_opt("prevalence_difference", metrics::mean(&diffs));
    all.put("variant_lower", lower);
    all.put("baseline_population_mean", "");
    all.put("variant_population_mean", "");
    all.put("sign_test_p", p);
    rows.push(all);

    output::write_rows(&out.join("summary.csv"), &summary)?;
    output::write_rows(&out.join("compare.csv"), &rows)?;
    for (name, pick) in [(&base.run.name, 0usize), (&var.run.name, 1)] {
        let paths: Vec<Vec<f64>> = pairs
            .iter()
            .map(|(_, (lb, lv))| if pick == 0 { lb.prevalence.clone() } else { lv.prevalence.clone() })
            .collect();
        if paths.len() >= 2 {
            let bands = metrics::path_quantiles(&PathEnsemble { paths }, &SUMMARY_PROBS)?;
            output::write_bands(&out.join(format!("bands_{name}.csv")), &pairs[0].1 .0.steps, &bands)?;
        }
    }
    Ok(Comparison {
        rows,
        variant_lower: lower,
        pairs: n,
        sign_test_p: p,
    })
}
