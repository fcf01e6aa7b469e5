//! Sample geometry, per-step records and the summary statistics computed
//! from them.
//!
//! Quantiles everywhere use linear interpolation between order statistics
//! (`h = (n − 1)p`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};

use crate::design::{Membership, TraceEvent};
use crate::epidemic::{InfectionEvent, InfectionMode, Stage};
use crate::error::{Error, Result};
use crate::intervention::EnrollmentEvent;
use crate::world::{NodeId, RemovalCause, World};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemovalRecord {
    pub node: NodeId,
    pub cause: RemovalCause,
    pub stage: Stage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub name: String,
    pub volume: usize,
    pub surface: usize,
    pub selections: Vec<TraceEvent>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpidemicRecord {
    pub prevalence: usize,
    pub incidence: usize,
    pub acute: usize,
    pub chronic: usize,
    pub late: usize,
    /// Links between infected and susceptible nodes.
    pub surface: usize,
    /// Mean links-to-susceptibles over infected nodes, taken just before
    /// transmission.
    pub infected_degree_out_mean: Option<f64>,
    pub reinfections: usize,
    pub progressions: usize,
    pub infections: Vec<InfectionEvent>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InterventionRecord {
    pub enrolled_positive: usize,
    pub enrolled_negative: usize,
    pub surface: usize,
    pub dropouts: usize,
    pub cures: usize,
    pub enrollments: Vec<EnrollmentEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub schema: u32,
    pub step: u64,
    pub population: usize,
    pub links: usize,
    pub mean_degree: f64,
    pub group_sizes: Vec<usize>,
    pub births: usize,
    pub links_formed: usize,
    pub links_dissolved: usize,
    pub removals: Vec<RemovalRecord>,
    pub epidemic: EpidemicRecord,
    pub intervention: Option<InterventionRecord>,
    pub designs: Vec<DesignRecord>,
}

impl StepRecord {
    pub fn design(&self, name: &str) -> Option<&DesignRecord> {
        self.designs.iter().find(|d| d.name == name)
    }
}

pub fn volume(sample: &dyn Membership) -> usize {
    sample.size()
}

/// Links from members to non-members, each counted once.
pub fn surface(sample: &dyn Membership, world: &World) -> usize {
    sample
        .member_ids()
        .into_iter()
        .map(|i| world.neighbors(i).iter().filter(|j| !sample.contains(**j)).count())
        .sum()
}

/// Links with both endpoints in the sample.
pub fn internal_links(sample: &dyn Membership, world: &World) -> usize {
    sample
        .member_ids()
        .into_iter()
        .map(|i| world.neighbors(i).iter().filter(|j| **j > i && sample.contains(**j)).count())
        .sum()
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Population standard deviation.
pub fn sd(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    Some((xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt())
}

/// Quantile of already sorted data by linear interpolation.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub quantiles: Vec<(f64, f64)>,
    pub histogram: Histogram,
}

pub const SUMMARY_PROBS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Histogram and summary of the values after the first `burn_in`.
pub fn equilibrium_histogram(series: &[f64], burn_in: usize, bins: usize) -> Result<EquilibriumSummary> {
    if series.len() <= burn_in {
        return Err(Error::InsufficientData(format!(
            "series of length {} has nothing after burn-in {burn_in}",
            series.len()
        )));
    }
    let bins = bins.max(1);
    let tail = &series[burn_in..];
    let mut sorted = tail.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 0.0 };
    let edges: Vec<f64> = (0..=bins)
        .map(|k| if width > 0.0 { lo + k as f64 * width } else { lo })
        .collect();
    let mut counts = vec![0usize; bins];
    for &v in tail {
        let k = if width > 0.0 {
            (((v - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[k] += 1;
    }
    Ok(EquilibriumSummary {
        n: tail.len(),
        mean: mean(tail).expect("nonempty"),
        sd: sd(tail).expect("nonempty"),
        quantiles: SUMMARY_PROBS.iter().map(|&p| (p, quantile_sorted(&sorted, p))).collect(),
        histogram: Histogram { edges, counts },
    })
}

/// Replicate paths of one scalar outcome.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub paths: Vec<Vec<f64>>,
}

/// One curve per probability, each with one value per step.
pub fn path_quantiles(ensemble: &PathEnsemble, probs: &[f64]) -> Result<Vec<Vec<f64>>> {
    let paths = &ensemble.paths;
    if paths.len() < 2 {
        return Err(Error::InsufficientData("path quantiles need at least two replicates".into()));
    }
    let len = paths[0].len();
    if paths.iter().any(|p| p.len() != len) {
        return Err(Error::InsufficientData("replicate paths have different lengths".into()));
    }
    let mut curves = vec![Vec::with_capacity(len); probs.len()];
    let mut col = Vec::with_capacity(paths.len());
    for t in 0..len {
        col.clear();
        col.extend(paths.iter().map(|p| p[t]));
        col.sort_by(f64::total_cmp);
        for (c, &p) in curves.iter_mut().zip(probs) {
            c.push(quantile_sorted(&col, p));
        }
    }
    Ok(curves)
}

/// Variance-to-mean ratio of counts summed over consecutive, non-overlapping
/// windows (a trailing partial window is dropped). `None` when there are
/// fewer than two windows or the mean is zero.
pub fn dispersion_index(series: &[f64], window: usize) -> Option<f64> {
    let window = window.max(1);
    let sums: Vec<f64> = series.chunks_exact(window).map(|c| c.iter().sum()).collect();
    if sums.len() < 2 {
        return None;
    }
    let m = mean(&sums)?;
    if m <= 0.0 {
        return None;
    }
    let var = sums.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (sums.len() - 1) as f64;
    Some(var / m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionDegreeStats {
    pub events: usize,
    pub mean_selected_degree: f64,
    /// Population mean degree at each event's step, averaged over events.
    pub mean_population_degree: f64,
}

pub fn selection_degree_stats(
    events: &[TraceEvent],
    population_mean_degree: &dyn Fn(u64) -> Option<f64>,
) -> Option<SelectionDegreeStats> {
    let mut sel = 0.0;
    let mut pop = 0.0;
    let mut n = 0usize;
    for e in events {
        let Some(m) = population_mean_degree(e.step) else {
            continue;
        };
        sel += e.degree as f64;
        pop += m;
        n += 1;
    }
    (n > 0).then(|| SelectionDegreeStats {
        events: n,
        mean_selected_degree: sel / n as f64,
        mean_population_degree: pop / n as f64,
    })
}

/// Convenience over a run log: trace-mode selections of `design`.
pub fn selection_degree_stats_from_log(records: &[StepRecord], design: &str) -> Option<SelectionDegreeStats> {
    let by_step: BTreeMap<u64, f64> = records.iter().map(|r| (r.step, r.mean_degree)).collect();
    let events: Vec<TraceEvent> = records
        .iter()
        .filter_map(|r| r.design(design))
        .flat_map(|d| d.selections.iter().cloned())
        .filter(|e| e.mode == crate::design::SelectionMode::Trace)
        .collect();
    selection_degree_stats(&events, &|s| by_step.get(&s).copied())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidenceDegreeOutStats {
    pub events: usize,
    pub mean_at_incidence: f64,
    /// Infected-set mean degree-out at each event's step, averaged over events.
    pub mean_over_infected: f64,
}

/// Compares transmission events' degree-out with the contemporaneous mean
/// over all infected nodes.
pub fn incidence_degree_out_stats(records: &[StepRecord]) -> Option<IncidenceDegreeOutStats> {
    let mut at = 0.0;
    let mut over = 0.0;
    let mut n = 0usize;
    for r in records {
        let Some(m) = r.epidemic.infected_degree_out_mean else {
            continue;
        };
        for e in &r.epidemic.infections {
            if e.mode == InfectionMode::Transmission {
                at += e.degree_out as f64;
                over += m;
                n += 1;
            }
        }
    }
    (n > 0).then(|| IncidenceDegreeOutStats {
        events: n,
        mean_at_incidence: at / n as f64,
        mean_over_infected: over / n as f64,
    })
}

/// For each consecutive, non-overlapping window of `k` selections, the
/// fraction belonging to the window's most common group.
pub fn same_group_fraction(events: &[TraceEvent], k: usize) -> Option<Vec<f64>> {
    if k < 2 || events.len() < k {
        return None;
    }
    Some(
        events
            .chunks_exact(k)
            .map(|w| {
                let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
                for e in w {
                    *counts.entry(e.group.0).or_default() += 1;
                }
                *counts.values().max().expect("nonempty window") as f64 / k as f64
            })
            .collect(),
    )
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x)?, mean(y)?);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() {
        return None;
    }
    pearson(&ranks(x), &ranks(y))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendTest {
    pub slope: f64,
    pub t: f64,
    pub p_value: f64,
    /// Sample size after the lag-one autocorrelation correction.
    pub effective_n: f64,
}

/// Two-sided t-test for a linear trend in a time series. The slope's
/// standard error and the degrees of freedom use the effective sample size
/// `n(1 − r₁)/(1 + r₁)`, with `r₁` the lag-one autocorrelation of the OLS
/// residuals.
pub fn trend_test(series: &[f64]) -> Option<TrendTest> {
    let n = series.len();
    if n < 4 {
        return None;
    }
    let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let mt = mean(&t)?;
    let my = mean(series)?;
    let stt: f64 = t.iter().map(|x| (x - mt) * (x - mt)).sum();
    let sty: f64 = t.iter().zip(series).map(|(x, y)| (x - mt) * (y - my)).sum();
    let slope = sty / stt;
    let resid: Vec<f64> = t.iter().zip(series).map(|(x, y)| y - my - slope * (x - mt)).collect();
    let ss: f64 = resid.iter().map(|e| e * e).sum();
    let r1 = if ss > 0.0 {
        (resid.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / ss).clamp(-0.99, 0.99)
    } else {
        0.0
    };
    let n_eff = (n as f64 * (1.0 - r1) / (1.0 + r1)).clamp(3.0, n as f64);
    let df = n_eff - 2.0;
    let s2 = ss / df;
    let se = (s2 / stt * n as f64 / n_eff).sqrt();
    if se == 0.0 {
        return Some(TrendTest {
            slope,
            t: 0.0,
            p_value: if slope == 0.0 { 1.0 } else { 0.0 },
            effective_n: n_eff,
        });
    }
    let tstat = slope / se;
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    let p = 2.0 * (1.0 - dist.cdf(tstat.abs()));
    Some(TrendTest {
        slope,
        t: tstat,
        p_value: p,
        effective_n: n_eff,
    })
}

/// One-sided sign test: `P(X >= successes)` for `X ~ Binomial(trials, 1/2)`.
pub fn sign_test_p(successes: u64, trials: u64) -> f64 {
    if successes == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, trials).expect("valid binomial");
    1.0 - b.cdf(successes - 1)
}
