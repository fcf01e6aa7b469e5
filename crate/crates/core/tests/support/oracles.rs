//! Independent checks of worked examples: closed forms evaluated here, exact
//! enumeration on tiny graphs, and Monte-Carlo frequencies compared at three
//! standard errors.

use std::collections::BTreeMap;

use dynsamp::config::ModelConfig;
use dynsamp::demography::{self, DemographyParams, PopulationObserver};
use dynsamp::design::{self, DesignSpec, SampleState, SelectionMode, TraceEvent, TracingMode};
use dynsamp::engine::Simulation;
use dynsamp::epidemic::{self, EpidemicParams, EpidemicState, Stage};
use dynsamp::intervention::{self, EffectSet, Enrollment, InterventionSpec, KnownStatus, TreatmentState};
use dynsamp::links::{self, LinkParams};
use dynsamp::metrics::{self, PathEnsemble};
use dynsamp::rng::stream;
use dynsamp::space::{self, GroupId, GroupState, Point, SpaceConfig};
use dynsamp::effects::NoEffects;
use dynsamp::world::{Link, NodeId, Sex, World};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

pub type Check = fn() -> Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || format!("{name}: got {got}, want {want} ± {tol}"))
}

/// `hits/trials` within three binomial standard errors of `p`.
fn within_3se(name: &str, hits: u64, trials: u64, p: f64) -> Result<(), String> {
    let f = hits as f64 / trials as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    ensure((f - p).abs() <= 3.0 * se, || {
        format!("{name}: frequency {f} vs {p} (3 SE = {})", 3.0 * se)
    })
}

fn forever() -> Link {
    Link {
        formed_at: 0,
        expires_at: u64::MAX,
    }
}

/// `n` nodes in one group at the center, with the given links.
pub fn graph(n: usize, edges: &[(u64, u64)]) -> World {
    let groups = vec![GroupState {
        id: GroupId(0),
        center: Point::new(0.5, 0.5),
        target_size: n.max(1),
    }];
    let mut w = World::new(1.0, groups);
    for k in 0..n {
        let sex = if k % 2 == 0 { Sex::F } else { Sex::M };
        w.add_node(GroupId(0), sex, Point::new(0.5, 0.5));
    }
    for &(a, b) in edges {
        assert!(w.add_link(NodeId(a), NodeId(b), forever()));
    }
    w
}

fn sample_of(ids: &[u64]) -> SampleState {
    let mut s = SampleState::default();
    for &i in ids {
        s.admit(NodeId(i), 0);
    }
    s
}

// ---------------------------------------------------------------- space

pub fn group_split() -> Result<(), String> {
    let t = space::split_targets(100, 3);
    ensure(t.iter().sum::<usize>() == 100, || format!("targets {t:?} do not sum to 100"))?;
    let spread = t.iter().max().unwrap() - t.iter().min().unwrap();
    ensure(spread <= 1, || format!("targets {t:?} spread {spread}"))?;
    let mut sorted = t.clone();
    sorted.sort_unstable();
    ensure(sorted == vec![33, 33, 34], || format!("targets {t:?}"))
}

pub fn center_step_sd() -> Result<(), String> {
    let cfg = SpaceConfig {
        region_side: 1.0e6,
        group_center_step_sd: 0.01,
        ..SpaceConfig::default()
    };
    let mut groups = vec![GroupState {
        id: GroupId(0),
        center: Point::new(5.0e5, 5.0e5),
        target_size: 1,
    }];
    let mut rng = stream(1, 0, "oracle.center");
    let mut sq = 0.0;
    let steps = 100_000;
    for _ in 0..steps {
        let before = groups[0].center;
        space::step_group_centers(&mut groups, &cfg, &mut rng);
        let c = groups[0].center;
        sq += (c.x - before.x).powi(2) + (c.y - before.y).powi(2);
    }
    let sd = (sq / (2.0 * steps as f64)).sqrt();
    close("center step sd", sd, 0.01, 0.02 * 0.01)
}

pub fn node_stationary_variance() -> Result<(), String> {
    let cfg = SpaceConfig {
        region_side: 1.0e6,
        group_center_step_sd: 0.0,
        node_reversion: 0.1,
        node_step_sd: 0.01,
        ..SpaceConfig::default()
    };
    let center = Point::new(5.0e5, 5.0e5);
    let groups = vec![GroupState {
        id: GroupId(0),
        center,
        target_size: 1,
    }];
    let mut rng = stream(2, 0, "oracle.node");
    let mut pts = vec![center; 10];
    for _ in 0..200 {
        space::step_node_positions(pts.iter_mut().map(|p| (p, GroupId(0))), &groups, &cfg, &mut rng);
    }
    let mut sq = 0.0;
    let mut n = 0.0;
    for _ in 0..100_000 {
        space::step_node_positions(pts.iter_mut().map(|p| (p, GroupId(0))), &groups, &cfg, &mut rng);
        for p in &pts {
            sq += (p.x - center.x).powi(2) + (p.y - center.y).powi(2);
            n += 2.0;
        }
    }
    let want = 0.01f64.powi(2) / (1.0 - 0.9f64.powi(2));
    close("stationary variance", sq / n, want, 0.05 * want)
}

pub fn distance_symmetry() -> Result<(), String> {
    let mut rng = stream(3, 0, "oracle.distance");
    for _ in 0..1000 {
        let a = Point::new(rng.random(), rng.random());
        let b = Point::new(rng.random(), rng.random());
        ensure(space::distance(a, b) == space::distance(b, a), || format!("asymmetric at {a:?} {b:?}"))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- links

pub fn formation_formula() -> Result<(), String> {
    let params = LinkParams {
        base_prob: 0.1,
        kernel_scale: 0.05,
        sex_mix: [[1.0; 2]; 2],
        degree_cap: 10.0,
        ..LinkParams::default()
    };
    let d = 0.05;
    let got = links::formation_probability_raw(&params, d * d, (Sex::F, Sex::M), (0, 0));
    close("formation probability", got, 0.1 * (-0.5f64).exp(), 1e-12)?;
    close("formation probability value", got, 0.06065, 1e-5)
}

pub fn grid_matches_brute_force() -> Result<(), String> {
    let mut rng = stream(4, 0, "oracle.grid");
    let groups = vec![GroupState {
        id: GroupId(0),
        center: Point::new(0.5, 0.5),
        target_size: 500,
    }];
    let mut w = World::new(1.0, groups);
    for _ in 0..500 {
        w.add_node(GroupId(0), Sex::F, Point::new(rng.random(), rng.random()));
    }
    for _ in 0..300 {
        let a = NodeId(rng.random_range(0..500));
        let b = NodeId(rng.random_range(0..500));
        w.add_link(a, b, forever());
    }
    for cutoff in [0.01, 0.05, 0.12, 0.7] {
        let got = links::candidate_pairs(&w, cutoff);
        let ids: Vec<&dynsamp::world::Node> = w.nodes.values().collect();
        let mut want = Vec::new();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                if space::distance(a.position, b.position) <= cutoff && !w.is_linked(a.id, b.id) {
                    want.push((a.id, b.id));
                }
            }
        }
        ensure(got == want, || format!("cutoff {cutoff}: {} grid pairs vs {} brute force", got.len(), want.len()))?;
    }
    Ok(())
}

pub fn formation_frequency() -> Result<(), String> {
    let params = LinkParams {
        base_prob: 0.3,
        kernel_scale: 0.05,
        candidate_cutoff: 0.2,
        ..LinkParams::default()
    };
    let groups = vec![GroupState {
        id: GroupId(0),
        center: Point::new(0.5, 0.5),
        target_size: 2,
    }];
    let mut w = World::new(1.0, groups);
    let a = w.add_node(GroupId(0), Sex::F, Point::new(0.5, 0.5));
    let b = w.add_node(GroupId(0), Sex::M, Point::new(0.54, 0.5));
    let p = links::formation_probability(&w, a, b, &params).map_err(|e| e.to_string())?;
    let mut rng = stream(5, 0, "oracle.formation");
    let trials = 100_000;
    let mut hits = 0;
    for _ in 0..trials {
        if !links::step_formation(&mut w, &params, &NoEffects, &mut rng).is_empty() {
            hits += 1;
            w.remove_link(a, b);
        }
    }
    within_3se("formation", hits, trials, p)
}

pub fn duration_mean_exponential() -> Result<(), String> {
    let params = LinkParams {
        duration_mean: 50.0,
        duration_shape: 1.0,
        ..LinkParams::default()
    };
    let mut rng = stream(6, 0, "oracle.duration");
    let n = 100_000;
    let total: u64 = (0..n).map(|_| links::draw_duration(&params, 1.0, &mut rng)).sum();
    // E[ceil(X)] for X ~ Exp(mean 50) is 1/(1 - e^(-1/50)).
    let exact = 1.0 / (1.0 - (-1.0f64 / 50.0).exp());
    close("exact ceiling mean", exact, 50.5, 0.01)?;
    close("duration mean", total as f64 / n as f64, 50.5, 0.02 * 50.5)
}

pub fn duration_shape_variance() -> Result<(), String> {
    let var = |shape: f64, seed: u64| {
        let params = LinkParams {
            duration_mean: 50.0,
            duration_shape: shape,
            ..LinkParams::default()
        };
        let mut rng = stream(seed, 0, "oracle.duration");
        let xs: Vec<f64> = (0..100_000).map(|_| links::draw_duration(&params, 1.0, &mut rng) as f64).collect();
        metrics::sd(&xs).unwrap().powi(2)
    };
    let (v1, v4) = (var(1.0, 7), var(4.0, 8));
    ensure(v4 < v1, || format!("k=4 variance {v4} not below k=1 variance {v1}"))
}

pub fn dissolution_recount() -> Result<(), String> {
    let mut w = graph(5, &[]);
    let mut rng = stream(9, 0, "oracle.dissolve");
    for a in 0..5u64 {
        for b in a + 1..5 {
            let expires_at = rng.random_range(1..6);
            w.add_link(NodeId(a), NodeId(b), Link { formed_at: 0, expires_at });
        }
    }
    let before: BTreeMap<NodeId, usize> = w.nodes.keys().map(|id| (*id, w.degree(*id))).collect();
    let mut expiring: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (k, l) in &w.links {
        if l.expires_at <= 3 {
            *expiring.entry(k.0).or_default() += 1;
            *expiring.entry(k.1).or_default() += 1;
        }
    }
    links::step_dissolution(&mut w, 3);
    for (id, d) in before {
        let lost = expiring.get(&id).copied().unwrap_or(0);
        ensure(w.degree(id) == d - lost, || format!("{id:?}: degree {} after, {d} before, {lost} expired", w.degree(id)))?;
    }
    w.check_invariants()
}

// ---------------------------------------------------------------- demography

pub fn death_frequency() -> Result<(), String> {
    let w = graph(1000, &[]);
    let params = DemographyParams {
        death_hazard: 0.002,
        emigration_hazard: 0.0,
        ..DemographyParams::default()
    };
    let mut rng = stream(10, 0, "oracle.death");
    let mut hits = 0;
    for _ in 0..100 {
        hits += demography::step_deaths(&w, &params, &|_: NodeId| 1.0, &mut rng).len() as u64;
    }
    within_3se("death", hits, 100_000, 0.002)
}

pub fn insertion_feedback_zero() -> Result<(), String> {
    let params = DemographyParams {
        pop_target: 500,
        insertion_base: 0.7,
        feedback_strength: 1.0,
        ..DemographyParams::default()
    };
    close("insertion rate at 2N*", demography::insertion_rate(1000, &params), 0.0, 0.0)
}

pub fn group_assignment_ratio() -> Result<(), String> {
    let groups = vec![
        GroupState {
            id: GroupId(0),
            center: Point::new(0.25, 0.5),
            target_size: 10,
        },
        GroupState {
            id: GroupId(1),
            center: Point::new(0.75, 0.5),
            target_size: 10,
        },
    ];
    let w = World::new(1.0, groups);
    let sizes = [1, 9];
    let mut rng = stream(11, 0, "oracle.groups");
    let trials = 10_000;
    let hits = (0..trials).filter(|_| demography::choose_group(&w, &sizes, &mut rng) == GroupId(0)).count();
    within_3se("group assignment", hits as u64, trials, 0.9)
}

pub fn removal_clears_all_samples() -> Result<(), String> {
    let mut w = graph(3, &[(0, 1), (1, 2)]);
    let mut a = sample_of(&[0, 1]);
    let mut b = sample_of(&[1, 2]);
    let mut epi = EpidemicState::default();
    epi.infect(NodeId(1), 0);
    let mut obs: Vec<&mut dyn PopulationObserver> = vec![&mut a, &mut b, &mut epi];
    demography::remove_node(&mut w, &mut obs, NodeId(1), dynsamp::world::RemovalCause::Death);
    let gone = |s: &SampleState| !s.members.contains_key(&NodeId(1));
    ensure(gone(&a) && gone(&b) && epi.infected.is_empty(), || "node 1 still listed".into())?;
    ensure(a.members.len() == 1 && b.members.len() == 1, || "other members disturbed".into())?;
    w.check_invariants()
}

// ---------------------------------------------------------------- designs

pub fn tracing_product() -> Result<(), String> {
    let spec = DesignSpec {
        trace_prob: 0.4,
        ..DesignSpec::default()
    };
    let mut s = sample_of(&[0]);
    s.members.get_mut(&NodeId(0)).unwrap().activity = 0.5;
    s.replacement.insert(NodeId(1), 0.5);
    close("p_ij", design::tracing_probability(&spec, &s, NodeId(0), NodeId(1)), 0.1, 1e-15)
}

pub fn size_feedback_value() -> Result<(), String> {
    close("size adjustment", design::size_adjustment(200, Some(100.0), 1.0), 0.3679, 1e-4)
}

pub fn bernoulli_two_links() -> Result<(), String> {
    let w = graph(3, &[(0, 2), (1, 2)]);
    let s = sample_of(&[0, 1]);
    let spec = DesignSpec {
        trace_prob: 0.5,
        ..DesignSpec::default()
    };
    let mut rng = stream(12, 0, "oracle.bernoulli");
    let trials = 100_000;
    let hits = (0..trials)
        .filter(|_| !design::step_bernoulli_tracing(&spec, &s, &w, &mut rng).is_empty())
        .count();
    within_3se("two-link selection", hits as u64, trials, 0.75)
}

pub fn one_link_weights() -> Result<(), String> {
    let w = graph(4, &[(0, 2), (1, 3)]);
    let mut s = sample_of(&[0, 1]);
    s.members.get_mut(&NodeId(1)).unwrap().activity = 0.5;
    let spec = DesignSpec {
        mode: TracingMode::OneLink,
        trace_prob: 1.0,
        ..DesignSpec::default()
    };
    let mut rng = stream(13, 0, "oracle.onelink");
    let trials = 10_000;
    let mut hits = 0;
    for _ in 0..trials {
        let ev = design::step_one_link(&spec, &s, &w, &mut rng);
        ensure(ev.len() == 1, || "one-link step did not fire".into())?;
        hits += u64::from(ev[0].destination == NodeId(2));
    }
    within_3se("weighted choice", hits, trials, 2.0 / 3.0)
}

pub fn fixed_count_uniform() -> Result<(), String> {
    let w = graph(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]);
    let s = sample_of(&[0]);
    let spec = DesignSpec {
        mode: TracingMode::FixedCount(2),
        trace_prob: 1.0,
        ..DesignSpec::default()
    };
    let mut rng = stream(14, 0, "oracle.fixed");
    let trials = 10_000;
    let mut counts = [0u64; 6];
    for _ in 0..trials {
        let ev = design::step_fixed_count(&spec, &s, &w, 2, &mut rng);
        ensure(ev.len() == 2, || format!("fixed count drew {}", ev.len()))?;
        for e in ev {
            counts[e.destination.0 as usize] += 1;
        }
    }
    for (j, c) in counts.iter().enumerate().skip(1) {
        within_3se(&format!("destination {j}"), *c, trials, 0.4)?;
    }
    Ok(())
}

pub fn random_selection_mean() -> Result<(), String> {
    let w = graph(1000, &[]);
    let s = SampleState::default();
    let spec = DesignSpec {
        random_prob: 0.01,
        ..DesignSpec::default()
    };
    let mut rng = stream(15, 0, "oracle.random");
    let steps = 10_000;
    let total: usize = (0..steps).map(|_| design::step_random_selection(&spec, &s, &w, &mut rng).len()).sum();
    let mean = total as f64 / steps as f64;
    let se = (1000.0 * 0.01 * 0.99 / steps as f64).sqrt();
    close("random selections per step", mean, 10.0, 3.0 * se)
}

pub fn attrition_frequency() -> Result<(), String> {
    let spec = DesignSpec {
        attrition_prob: 0.1,
        replacement: 0.3,
        ..DesignSpec::default()
    };
    let ids: Vec<u64> = (0..100).collect();
    let mut rng = stream(16, 0, "oracle.attrition");
    let mut hits = 0;
    for _ in 0..1000 {
        let mut s = sample_of(&ids);
        let gone = design::step_attrition(&spec, &mut s, 1, &mut rng);
        hits += gone.len() as u64;
        for id in gone {
            ensure(s.replacement_value(id) == 0.3, || "leaver lacks dampened value".into())?;
        }
    }
    within_3se("attrition", hits, 100_000, 0.1)
}

pub fn activity_decay_power() -> Result<(), String> {
    let spec = DesignSpec {
        activity_decay: 0.9,
        ..DesignSpec::default()
    };
    let mut s = sample_of(&[0]);
    for now in 1..=10 {
        design::step_activity_decay(&spec, &mut s, now);
    }
    close("activity", s.activity(NodeId(0)), 0.9f64.powi(10), 1e-12)?;
    close("activity value", s.activity(NodeId(0)), 0.3487, 1e-4)
}

// ---------------------------------------------------------------- epidemic

pub fn art_transmission_product() -> Result<(), String> {
    let params = EpidemicParams {
        beta_chronic: 0.002,
        ..EpidemicParams::default()
    };
    close(
        "ART chronic probability",
        epidemic::transmission_probability(&params, Stage::Chronic, false, 0.1, 1.0, 1.0),
        0.0002,
        1e-15,
    )
}

pub fn two_acute_neighbors() -> Result<(), String> {
    let w = graph(3, &[(0, 1), (0, 2)]);
    let params = EpidemicParams {
        beta_acute: 0.1,
        reinfection_mult: 0.0,
        ..EpidemicParams::default()
    };
    let mut epi = EpidemicState::default();
    epi.infect(NodeId(1), 0);
    epi.infect(NodeId(2), 0);
    let mut rng = stream(17, 0, "oracle.transmission");
    let trials = 100_000;
    let mut hits = 0;
    for _ in 0..trials {
        let out = epidemic::step_transmission(&w, &mut epi, &params, &NoEffects, &mut rng);
        if !out.infections.is_empty() {
            hits += 1;
            epi.forget(NodeId(0));
        }
    }
    within_3se("two acute exposures", hits, trials, 0.19)
}

pub fn acute_dwell_mean() -> Result<(), String> {
    let params = EpidemicParams {
        acute_mean: 8.0,
        ..EpidemicParams::default()
    };
    let mut epi = EpidemicState::default();
    let n = 10_000u64;
    for i in 0..n {
        epi.infect(NodeId(i), 0);
    }
    let mut rng = stream(18, 0, "oracle.dwell");
    let mut total = 0u64;
    let mut left = n;
    let mut now = 0;
    while left > 0 {
        now += 1;
        for t in epidemic::step_progression(&mut epi, &params, now, &mut rng) {
            if t.from == Stage::Acute {
                total += now;
                left -= 1;
                epi.forget(t.node);
            }
        }
    }
    close("acute dwell", total as f64 / n as f64, 8.0, 0.03 * 8.0)
}

pub fn importation_mean() -> Result<(), String> {
    let w = graph(10_000, &[]);
    let params = EpidemicParams {
        import_prob: 1e-4,
        ..EpidemicParams::default()
    };
    let mut epi = EpidemicState {
        seeded: true,
        ..EpidemicState::default()
    };
    let mut rng = stream(19, 0, "oracle.import");
    let steps = 10_000;
    let mut total = 0usize;
    for _ in 0..steps {
        let ev = epidemic::step_importation(&w, &mut epi, &params, &mut rng);
        total += ev.len();
        for e in ev {
            epi.forget(e.node);
        }
    }
    let se = (1e4 * 1e-4 * (1.0 - 1e-4) / steps as f64).sqrt();
    close("imports per step", total as f64 / steps as f64, 1.0, 3.0 * se)
}

pub fn late_mortality_products() -> Result<(), String> {
    let params = EpidemicParams {
        mortality_mult_late: Some(20.0),
        ..EpidemicParams::default()
    };
    let mu = 0.0005;
    let base = mu * epidemic::stage_mortality_multiplier(&params, Stage::Late, mu);
    close("late hazard", base, 0.01, 1e-15)?;
    let treated = EffectSet {
        art_mortality_mult: 0.25,
        ..EffectSet::NEUTRAL
    };
    let mult = epidemic::stage_mortality_multiplier(&params, Stage::Late, mu) * treated.multipliers().mortality_mult;
    close("treated late multiple of baseline", mult, 5.0, 1e-12)
}

// ---------------------------------------------------------------- interventions

pub fn test_sensitivity() -> Result<(), String> {
    let w = graph(1, &[]);
    let mut epi = EpidemicState::default();
    epi.infect(NodeId(0), 0);
    let spec = InterventionSpec {
        enabled: true,
        random_test_prob: 1.0,
        trace_prob: 0.0,
        sensitivity: 0.8,
        ..InterventionSpec::default()
    };
    let mut rng = stream(20, 0, "oracle.sensitivity");
    let trials = 10_000;
    let mut hits = 0;
    for _ in 0..trials {
        let mut treat = TreatmentState::default();
        let ev = intervention::step_seek_and_treat(&spec, &mut treat, &w, &epi, &mut rng);
        ensure(ev.len() == 1, || "test not performed".into())?;
        hits += u64::from(ev[0].status == KnownStatus::Positive);
    }
    within_3se("positive classification", hits, trials, 0.8)
}

pub fn prevention_composition() -> Result<(), String> {
    let e = EffectSet {
        prevention_in_mult: 0.5,
        vaccine_in_mult: 0.5,
        ..EffectSet::NEUTRAL
    };
    close("in_mult", e.multipliers().in_mult, 0.25, 0.0)
}

fn enrolled(status: KnownStatus, effects: EffectSet) -> Enrollment {
    Enrollment {
        enrolled_at: 0,
        status,
        effects,
    }
}

pub fn dropout_frequency() -> Result<(), String> {
    let spec = InterventionSpec {
        enabled: true,
        dropout_prob: 0.05,
        ..InterventionSpec::default()
    };
    let mut rng = stream(21, 0, "oracle.dropout");
    let mut hits = 0;
    for _ in 0..1000 {
        let mut treat = TreatmentState::default();
        for i in 0..100 {
            treat.enrolled.insert(NodeId(i), enrolled(KnownStatus::Negative, spec.negative));
        }
        hits += intervention::step_dropout(&spec, &mut treat, 1, &mut rng).len() as u64;
    }
    within_3se("dropout", hits, 100_000, 0.05)
}

pub fn cure_frequency() -> Result<(), String> {
    let spec = InterventionSpec {
        enabled: true,
        positive: EffectSet {
            cure_prob: 0.01,
            ..EffectSet::NEUTRAL
        },
        ..InterventionSpec::default()
    };
    let mut rng = stream(22, 0, "oracle.cure");
    let mut hits = 0;
    for _ in 0..1000 {
        let mut treat = TreatmentState::default();
        let mut epi = EpidemicState::default();
        for i in 0..100 {
            treat.enrolled.insert(NodeId(i), enrolled(KnownStatus::Positive, spec.positive));
            epi.infect(NodeId(i), 0);
        }
        let cured = intervention::step_cure(&spec, &mut treat, &mut epi, &mut rng);
        for id in &cured {
            ensure(!epi.infected.contains_key(id), || "cured node still infected".into())?;
            ensure(treat.enrolled[id].status == KnownStatus::Negative, || "cured node not negative".into())?;
        }
        hits += cured.len() as u64;
    }
    within_3se("cure", hits, 100_000, 0.01)
}

// ---------------------------------------------------------------- metrics

pub fn equilibrium_ar1_sd() -> Result<(), String> {
    let phi: f64 = 0.8;
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rng = stream(23, 0, "oracle.ar1");
    let mut x = 0.0;
    let burn = 1000;
    let series: Vec<f64> = (0..burn + 100_000)
        .map(|_| {
            x = phi * x + noise.sample(&mut rng);
            x
        })
        .collect();
    let s = metrics::equilibrium_histogram(&series, burn, 40).map_err(|e| e.to_string())?;
    let want = 1.0 / (1.0 - phi * phi).sqrt();
    close("AR(1) sd", s.sd, want, 0.1 * want)
}

pub fn quantile_midpoint() -> Result<(), String> {
    let e = PathEnsemble {
        paths: vec![vec![0.0], vec![10.0]],
    };
    let q = metrics::path_quantiles(&e, &[0.5]).map_err(|e| e.to_string())?;
    close("median of {0, 10}", q[0][0], 5.0, 0.0)
}

pub fn dispersion_poisson() -> Result<(), String> {
    let pois = Poisson::new(3.0).unwrap();
    let mut rng = stream(24, 0, "oracle.poisson");
    let counts: Vec<f64> = (0..10_000).map(|_| pois.sample(&mut rng)).collect();
    let d = metrics::dispersion_index(&counts, 1).ok_or("undefined index")?;
    close("Poisson dispersion", d, 1.0, 0.1)
}

pub fn dispersion_bursty() -> Result<(), String> {
    let series: Vec<f64> = (0..100).map(|i| if i % 5 == 0 { 10.0 } else { 0.0 }).collect();
    let d = metrics::dispersion_index(&series, 1).ok_or("undefined index")?;
    // 20 tens and 80 zeros: mean 2, sample variance (20·64 + 80·4)/99.
    let want = (20.0 * 64.0 + 80.0 * 4.0) / 99.0 / 2.0;
    close("bursty dispersion", d, want, 1e-12)?;
    ensure(d > 1.0, || format!("dispersion {d} not above 1"))
}

/// One Bernoulli step from a uniformly chosen seed on a star: exact
/// enumeration of the selection-weighted mean degree against a
/// Monte-Carlo run of the design code.
pub fn star_selection_bias() -> Result<(), String> {
    let leaves = 4u64;
    let edges: Vec<(u64, u64)> = (1..=leaves).map(|l| (0, l)).collect();
    let w = graph(leaves as usize + 1, &edges);
    let n = leaves + 1;
    let p: f64 = 0.5;
    // Enumerate seeds; each surface link is traced independently.
    let mut expected_degree_sum = 0.0;
    let mut expected_count = 0.0;
    for seed in 0..n {
        let nbrs = w.neighbors(NodeId(seed));
        for mask in 0u32..(1 << nbrs.len()) {
            let k = mask.count_ones() as i32;
            let prob = p.powi(k) * (1.0 - p).powi(nbrs.len() as i32 - k) / n as f64;
            for (b, j) in nbrs.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    expected_degree_sum += prob * w.degree(*j) as f64;
                    expected_count += prob;
                }
            }
        }
    }
    let exact = expected_degree_sum / expected_count;
    let unweighted = w.nodes.keys().map(|id| w.degree(*id) as f64).sum::<f64>() / n as f64;
    ensure(exact > unweighted, || format!("weighted {exact} not above unweighted {unweighted}"))?;

    let spec = DesignSpec {
        trace_prob: p,
        ..DesignSpec::default()
    };
    let mut rng = stream(25, 0, "oracle.star");
    let mut deg = 0.0;
    let mut count = 0.0;
    for _ in 0..100_000 {
        let seed = rng.random_range(0..n);
        let s = sample_of(&[seed]);
        for e in design::step_bernoulli_tracing(&spec, &s, &w, &mut rng) {
            deg += e.degree as f64;
            count += 1.0;
        }
    }
    close("simulated weighted degree", deg / count, exact, 0.02)
}

/// Path 0-1-2-3, seeded at 0, certain transmission: one new case per step,
/// recounted against the infected set before each step.
pub fn path_wave_degree_out() -> Result<(), String> {
    let w = graph(4, &[(0, 1), (1, 2), (2, 3)]);
    let params = EpidemicParams {
        beta_acute: 1.0,
        beta_chronic: 1.0,
        beta_late: 1.0,
        reinfection_mult: 0.0,
        ..EpidemicParams::default()
    };
    let mut epi = EpidemicState::default();
    epi.infect(NodeId(0), 0);
    let mut rng = stream(26, 0, "oracle.wave");
    let mut seq = Vec::new();
    for _ in 0..3 {
        let out = epidemic::step_transmission(&w, &mut epi, &params, &NoEffects, &mut rng);
        ensure(out.infections.len() == 1, || format!("wave produced {} cases", out.infections.len()))?;
        let e = &out.infections[0];
        let mut before = epi.clone();
        before.forget(e.node);
        let recount = w.neighbors(e.node).iter().filter(|j| !before.infected.contains_key(j)).count();
        ensure(recount == e.degree_out, || format!("recount {recount} vs logged {}", e.degree_out))?;
        seq.push(e.degree_out);
    }
    ensure(seq == vec![1, 1, 0], || format!("degree-out sequence {seq:?}"))
}

fn planted_event(step: u64, group: u32) -> TraceEvent {
    TraceEvent {
        step,
        origin: Some(NodeId(0)),
        destination: NodeId(step),
        group: GroupId(group),
        degree: 1,
        degree_out: 0,
        mode: SelectionMode::Trace,
        prior_replacement: 1.0,
    }
}

pub fn planted_modal_fraction() -> Result<(), String> {
    let events: Vec<TraceEvent> = (0..100)
        .map(|i| planted_event(i, if i % 10 < 7 { 3 } else { (i % 10) as u32 }))
        .collect();
    let f = metrics::same_group_fraction(&events, 10).ok_or("no windows")?;
    ensure(f.len() == 10, || format!("{} windows", f.len()))?;
    for x in f {
        close("window fraction", x, 0.7, 0.0)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- engine

fn engine_model() -> ModelConfig {
    let mut m = ModelConfig::default();
    m.demography.pop_target = 300;
    m.space.n_groups = 6;
    m.epi.initial_infected = 10;
    m.epi.start_step = 30;
    m
}

fn selections(records: &[dynsamp::metrics::StepRecord], name: &str) -> Vec<TraceEvent> {
    records
        .iter()
        .filter_map(|r| r.design(name))
        .flat_map(|d| d.selections.clone())
        .collect()
}

pub fn solo_vs_joint_designs() -> Result<(), String> {
    let spec_a = DesignSpec {
        trace_prob: 0.1,
        seeds: 3,
        start_step: 40,
        ..DesignSpec::default()
    };
    let spec_b = DesignSpec {
        mode: TracingMode::OneLink,
        trace_prob: 0.5,
        attrition_prob: 0.05,
        seeds: 2,
        start_step: 20,
        ..DesignSpec::default()
    };
    let run = |designs: Vec<(String, DesignSpec)>| {
        let mut m = engine_model();
        m.designs = designs;
        let mut sim = Simulation::new(m, 5, 0).unwrap();
        sim.collect_until(150).unwrap()
    };
    let (a, b) = (("a".to_string(), spec_a), ("b".to_string(), spec_b));
    let joint_ab = run(vec![a.clone(), b.clone()]);
    let joint_ba = run(vec![b.clone(), a.clone()]);
    let solo_a = run(vec![a]);
    let solo_b = run(vec![b]);
    for (name, solo) in [("a", &solo_a), ("b", &solo_b)] {
        let s = selections(solo, name);
        ensure(!s.is_empty(), || format!("design {name} made no selections"))?;
        ensure(selections(&joint_ab, name) == s, || format!("design {name} differs in joint run"))?;
        ensure(selections(&joint_ba, name) == s, || format!("design {name} differs after reordering"))?;
    }
    Ok(())
}

pub fn replicate_streams_differ() -> Result<(), String> {
    let mut m = engine_model();
    m.designs.push((
        "d".into(),
        DesignSpec {
            seeds: 5,
            start_step: 0,
            ..DesignSpec::default()
        },
    ));
    let mut base = Simulation::new(m, 9, 0).unwrap();
    base.collect_until(50).unwrap();
    let first = |r: u64| {
        let mut sim = base.clone();
        sim.streams.reseed(9, r);
        sim.designs[0] = dynsamp::design::Design::new("d", sim.designs[0].spec.clone());
        let rec = sim.run_tick().unwrap();
        rec.designs[0].selections.iter().map(|e| e.destination).collect::<Vec<_>>()
    };
    let (r0, r1) = (first(0), first(1));
    ensure(!r0.is_empty() && r0 != r1, || format!("replicates 0 and 1 both selected {r0:?}"))
}

pub fn neutral_intervention_identity() -> Result<(), String> {
    let m = engine_model();
    let mut neutral = m.clone();
    neutral.intervention = InterventionSpec {
        enabled: true,
        random_test_prob: 0.05,
        trace_prob: 0.5,
        sensitivity: 0.9,
        dropout_prob: 0.01,
        start_step: 40,
        positive: EffectSet::NEUTRAL,
        negative: EffectSet::NEUTRAL,
    };
    let mut a = Simulation::new(m, 4, 0).unwrap();
    let mut b = Simulation::new(neutral, 4, 0).unwrap();
    let ra = a.collect_until(200).unwrap();
    let rb = b.collect_until(200).unwrap();
    let enrolled = rb.iter().filter_map(|r| r.intervention.as_ref()).map(|i| i.enrollments.len()).sum::<usize>();
    ensure(enrolled > 0, || "neutral intervention enrolled nobody".into())?;
    for (x, y) in ra.iter().zip(&rb) {
        let same = x.population == y.population
            && x.links == y.links
            && x.mean_degree.to_bits() == y.mean_degree.to_bits()
            && x.removals == y.removals
            && x.epidemic == y.epidemic;
        ensure(same, || format!("paths diverge at step {}", x.step))?;
    }
    ensure(a.world == b.world && a.epi == b.epi, || "final states differ".into())
}

pub fn all() -> Vec<(&'static str, Check)> {
    vec![
        ("group_split", group_split as Check),
        ("center_step_sd", center_step_sd),
        ("node_stationary_variance", node_stationary_variance),
        ("distance_symmetry", distance_symmetry),
        ("formation_formula", formation_formula),
        ("grid_matches_brute_force", grid_matches_brute_force),
        ("formation_frequency", formation_frequency),
        ("duration_mean_exponential", duration_mean_exponential),
        ("duration_shape_variance", duration_shape_variance),
        ("dissolution_recount", dissolution_recount),
        ("death_frequency", death_frequency),
        ("insertion_feedback_zero", insertion_feedback_zero),
        ("group_assignment_ratio", group_assignment_ratio),
        ("removal_clears_all_samples", removal_clears_all_samples),
        ("tracing_product", tracing_product),
        ("size_feedback_value", size_feedback_value),
        ("bernoulli_two_links", bernoulli_two_links),
        ("one_link_weights", one_link_weights),
        ("fixed_count_uniform", fixed_count_uniform),
        ("random_selection_mean", random_selection_mean),
        ("attrition_frequency", attrition_frequency),
        ("activity_decay_power", activity_decay_power),
        ("art_transmission_product", art_transmission_product),
        ("two_acute_neighbors", two_acute_neighbors),
        ("acute_dwell_mean", acute_dwell_mean),
        ("importation_mean", importation_mean),
        ("late_mortality_products", late_mortality_products),
        ("test_sensitivity", test_sensitivity),
        ("prevention_composition", prevention_composition),
        ("dropout_frequency", dropout_frequency),
        ("cure_frequency", cure_frequency),
        ("equilibrium_ar1_sd", equilibrium_ar1_sd),
        ("quantile_midpoint", quantile_midpoint),
        ("dispersion_poisson", dispersion_poisson),
        ("dispersion_bursty", dispersion_bursty),
        ("star_selection_bias", star_selection_bias),
        ("path_wave_degree_out", path_wave_degree_out),
        ("planted_modal_fraction", planted_modal_fraction),
        ("solo_vs_joint_designs", solo_vs_joint_designs),
        ("replicate_streams_differ", replicate_streams_differ),
        ("neutral_intervention_identity", neutral_intervention_identity),
    ]
}
