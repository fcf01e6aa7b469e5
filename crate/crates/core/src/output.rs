//! Output files: per-step JSON Lines, per-replicate summaries and paired
//! comparisons as CSV.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::design::SelectionMode;
use crate::error::Result;
use crate::metrics::{self, StepRecord, SUMMARY_PROBS};

/// Window, in steps, for the incidence dispersion index in summaries.
pub const DISPERSION_WINDOW: usize = 4;

pub fn steps_path(dir: &Path, scenario: &str, replicate: u64) -> PathBuf {
    dir.join(format!("steps_{scenario}_{replicate}.jsonl"))
}

pub struct JsonlWriter {
    out: BufWriter<File>,
}

impl JsonlWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(JsonlWriter {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn write(&mut self, rec: &StepRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, rec)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_jsonl(path: &Path) -> Result<Vec<StepRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| serde_json::from_str(l).map_err(Into::into))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DesignSeries {
    pub steps: Vec<u64>,
    pub volume: Vec<f64>,
    pub surface: Vec<f64>,
    /// Per trace selection: (step, degree at selection, population mean degree).
    pub traced: Vec<(u64, f64, f64)>,
}

/// The scalar series a summary needs, accumulated record by record so a run
/// need not be held in memory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesLog {
    pub steps: Vec<u64>,
    pub population: Vec<f64>,
    pub mean_degree: Vec<f64>,
    pub prevalence: Vec<f64>,
    pub incidence: Vec<f64>,
    pub designs: BTreeMap<String, DesignSeries>,
}

impl SeriesLog {
    pub fn push(&mut self, r: &StepRecord) {
        self.steps.push(r.step);
        self.population.push(r.population as f64);
        self.mean_degree.push(r.mean_degree);
        self.prevalence.push(r.epidemic.prevalence as f64);
        self.incidence.push(r.epidemic.incidence as f64);
        for d in &r.designs {
            let s = self.designs.entry(d.name.clone()).or_default();
            s.steps.push(r.step);
            s.volume.push(d.volume as f64);
            s.surface.push(d.surface as f64);
            s.traced.extend(
                d.selections
                    .iter()
                    .filter(|e| e.mode == SelectionMode::Trace)
                    .map(|e| (r.step, e.degree as f64, r.mean_degree)),
            );
        }
    }

    pub fn from_records(records: &[StepRecord]) -> Self {
        let mut log = SeriesLog::default();
        for r in records {
            log.push(r);
        }
        log
    }

    /// Values of `series` at steps strictly after `burn_in`.
    pub fn after<'a>(&self, series: &'a [f64], burn_in: u64) -> &'a [f64] {
        let start = self.steps.partition_point(|s| *s <= burn_in);
        &series[start.min(series.len())..]
    }
}

/// One CSV row as ordered (column, value) pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Row(pub Vec<(String, String)>);

impl Row {
    pub fn put(&mut self, key: impl Into<String>, value: impl ToString) {
        self.0.push((key.into(), value.to_string()));
    }

    pub fn put_opt(&mut self, key: impl Into<String>, value: Option<f64>) {
        self.put(key, value.map_or(String::new(), |v| v.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Summary of one replicate: post-burn-in equilibrium statistics.
pub fn summarize(scenario: &str, replicate: u64, seed: u64, burn_in: u64, log: &SeriesLog) -> Row {
    let mut row = Row::default();
    row.put("scenario", scenario);
    row.put("replicate", replicate);
    row.put("seed", seed);
    row.put("steps", log.steps.last().copied().unwrap_or(0));
    row.put("burn_in", burn_in);
    let pop = log.after(&log.population, burn_in);
    row.put_opt("population_mean", metrics::mean(pop));
    row.put_opt("population_sd", metrics::sd(pop));
    let trend = metrics::trend_test(pop);
    row.put_opt("population_trend_slope", trend.map(|t| t.slope));
    row.put_opt("population_trend_p", trend.map(|t| t.p_value));
    row.put_opt("mean_degree", metrics::mean(log.after(&log.mean_degree, burn_in)));
    let prev = log.after(&log.prevalence, burn_in);
    row.put_opt("prevalence_mean", metrics::mean(prev));
    row.put_opt("prevalence_sd", metrics::sd(prev));
    let mut sorted = prev.to_vec();
    sorted.sort_by(f64::total_cmp);
    for p in SUMMARY_PROBS {
        let q = (!sorted.is_empty()).then(|| metrics::quantile_sorted(&sorted, p));
        row.put_opt(format!("prevalence_q{:02}", (p * 100.0).round() as u32), q);
    }
    let inc = log.after(&log.incidence, burn_in);
    row.put_opt("incidence_mean", metrics::mean(inc));
    row.put_opt("incidence_dispersion", metrics::dispersion_index(inc, DISPERSION_WINDOW));
    for (name, d) in &log.designs {
        let start = d.steps.partition_point(|s| *s <= burn_in);
        let vol = &d.volume[start..];
        let sur = &d.surface[start..];
        row.put_opt(format!("{name}.volume_mean"), metrics::mean(vol));
        row.put_opt(format!("{name}.surface_mean"), metrics::mean(sur));
        let ratio: Vec<f64> = vol.iter().zip(sur).filter(|(v, _)| **v > 0.0).map(|(v, s)| s / v).collect();
        row.put_opt(format!("{name}.surface_per_volume_mean"), metrics::mean(&ratio));
        let traced: Vec<_> = d.traced.iter().filter(|t| t.0 > burn_in).collect();
        let n = traced.len() as f64;
        let (sel, popd) = traced.iter().fold((0.0, 0.0), |(a, b), t| (a + t.1, b + t.2));
        row.put(format!("{name}.traced"), traced.len());
        row.put_opt(format!("{name}.selected_degree_mean"), (n > 0.0).then(|| sel / n));
        row.put_opt(format!("{name}.population_degree_mean"), (n > 0.0).then(|| popd / n));
    }
    row
}

/// Writes rows under the union of their columns, in first-seen order.
pub fn write_rows(path: &Path, rows: &[Row]) -> Result<()> {
    let mut header: Vec<&str> = Vec::new();
    for r in rows {
        for (k, _) in &r.0 {
            if !header.contains(&k.as_str()) {
                header.push(k);
            }
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for r in rows {
        w.write_record(header.iter().map(|h| r.get(h).unwrap_or("")))?;
    }
    w.flush()?;
    Ok(())
}

/// Per-step quantile bands across replicates, one column per probability.
pub fn write_bands(path: &Path, steps: &[u64], bands: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["step".to_string()];
    header.extend(SUMMARY_PROBS.iter().map(|p| format!("q{:02}", (p * 100.0).round() as u32)));
    w.write_record(&header)?;
    for (t, step) in steps.iter().enumerate() {
        let mut rec = vec![step.to_string()];
        rec.extend(bands.iter().map(|b| b[t].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
