//! Link formation from distance, sex and degree, and dissolution at
//! durations drawn when the link forms.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::effects::EffectSource;
use crate::error::{Error, Result};
use crate::space::{distance_sq, Point};
use crate::world::{Link, LinkKey, Node, NodeId, Sex, World};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub base_prob: f64,
    pub kernel_scale: f64,
    /// Indexed `[sex_i][sex_j]` with F = 0, M = 1.
    pub sex_mix: [[f64; 2]; 2],
    pub degree_cap: f64,
    pub duration_mean: f64,
    pub duration_shape: f64,
    pub candidate_cutoff: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            base_prob: 0.02,
            kernel_scale: 0.02,
            sex_mix: [[0.05, 1.0], [1.0, 0.05]],
            degree_cap: 6.0,
            duration_mean: 50.0,
            duration_shape: 1.0,
            candidate_cutoff: 0.12,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.base_prob) {
            return Err(Error::Config("links.base_prob must lie in [0, 1]".into()));
        }
        if !self.sex_mix.iter().flatten().all(|v| unit(*v)) {
            return Err(Error::Config("links.sex_mix entries must lie in [0, 1]".into()));
        }
        if !(self.kernel_scale > 0.0 && self.duration_mean > 0.0 && self.duration_shape > 0.0) {
            return Err(Error::Config(
                "links.kernel_scale, links.duration_mean and links.duration_shape must be > 0".into(),
            ));
        }
        if !(self.degree_cap > 0.0) {
            return Err(Error::Config("links.degree_cap must be > 0".into()));
        }
        if !(self.candidate_cutoff >= 0.0) {
            return Err(Error::Config("links.candidate_cutoff must be >= 0".into()));
        }
        if self.candidate_cutoff < 3.0 * self.kernel_scale {
            log::warn!(
                "links.candidate_cutoff {} is below 3 * kernel_scale; formation kernel is truncated",
                self.candidate_cutoff
            );
        }
        Ok(())
    }

    pub fn degree_factor(&self, degree: usize) -> f64 {
        (1.0 - degree as f64 / self.degree_cap).max(0.0)
    }
}

/// Core kernel: `p0 · exp(−d²/2σ²) · mix · g(deg_i) · g(deg_j)`.
pub fn formation_probability_raw(
    params: &LinkParams,
    dist_sq: f64,
    sexes: (Sex, Sex),
    degrees: (usize, usize),
) -> f64 {
    let gi = params.degree_factor(degrees.0);
    let gj = params.degree_factor(degrees.1);
    if gi == 0.0 || gj == 0.0 {
        return 0.0;
    }
    let s2 = params.kernel_scale * params.kernel_scale;
    let kernel = (-dist_sq / (2.0 * s2)).exp();
    let g = gi * gj;
    (params.base_prob * kernel * params.sex_mix[sexes.0.index()][sexes.1.index()] * g).clamp(0.0, 1.0)
}

/// Formation probability of the currently unlinked pair `i-j`.
pub fn formation_probability(world: &World, i: NodeId, j: NodeId, params: &LinkParams) -> Result<f64> {
    if i == j {
        return Err(Error::Contract(format!("formation probability requested for self pair {i:?}")));
    }
    let (a, b) = match (world.node(i), world.node(j)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Contract(format!("unknown node in pair {i:?}-{j:?}"))),
    };
    if world.is_linked(i, j) {
        return Err(Error::Contract(format!("pair {i:?}-{j:?} is already linked")));
    }
    Ok(formation_probability_raw(
        params,
        distance_sq(a.position, b.position),
        (a.sex, b.sex),
        (a.degree(), b.degree()),
    ))
}

/// Uniform cell list over the square region, cell side at least the query
/// radius so a 3×3 block of cells covers every neighbor.
struct CellGrid {
    per_axis: usize,
    cell_side: f64,
    starts: Vec<u32>,
    items: Vec<u32>,
}

const MAX_CELLS_PER_AXIS: usize = 256;

impl CellGrid {
    fn build(points: &[Point], region_side: f64, cutoff: f64) -> Self {
        let per_axis = if cutoff > 0.0 {
            let n = (region_side / cutoff).floor();
            if n.is_finite() {
                (n as usize).clamp(1, MAX_CELLS_PER_AXIS)
            } else {
                1
            }
        } else {
            MAX_CELLS_PER_AXIS
        };
        let cell_side = region_side / per_axis as f64;
        let mut grid = CellGrid {
            per_axis,
            cell_side,
            starts: vec![0; per_axis * per_axis + 1],
            items: vec![0; points.len()],
        };
        let cells: Vec<usize> = points.iter().map(|p| grid.cell_of(*p)).collect();
        for &c in &cells {
            grid.starts[c + 1] += 1;
        }
        for c in 0..per_axis * per_axis {
            grid.starts[c + 1] += grid.starts[c];
        }
        let mut fill = grid.starts.clone();
        for (idx, &c) in cells.iter().enumerate() {
            grid.items[fill[c] as usize] = idx as u32;
            fill[c] += 1;
        }
        grid
    }

    fn axis(&self, v: f64) -> usize {
        ((v / self.cell_side) as usize).min(self.per_axis - 1)
    }

    fn cell_of(&self, p: Point) -> usize {
        self.axis(p.y) * self.per_axis + self.axis(p.x)
    }

    fn cell(&self, cx: usize, cy: usize) -> &[u32] {
        let c = cy * self.per_axis + cx;
        &self.items[self.starts[c] as usize..self.starts[c + 1] as usize]
    }
}

/// Index pairs `(a, b)` with `a < b` into `nodes`, unlinked and within
/// `cutoff`, together with their squared distance. Sorted by `(a, b)`.
pub(crate) fn candidate_index_pairs(nodes: &[&Node], region_side: f64, cutoff: f64) -> Vec<(u32, u32, f64)> {
    let points: Vec<Point> = nodes.iter().map(|n| n.position).collect();
    let grid = CellGrid::build(&points, region_side, cutoff);
    let cut2 = cutoff * cutoff;
    let mut out = Vec::new();
    let mut local = Vec::new();
    for (a, node) in nodes.iter().enumerate() {
        let p = points[a];
        let (cx, cy) = (grid.axis(p.x), grid.axis(p.y));
        local.clear();
        for y in cy.saturating_sub(1)..=(cy + 1).min(grid.per_axis - 1) {
            for x in cx.saturating_sub(1)..=(cx + 1).min(grid.per_axis - 1) {
                for &b in grid.cell(x, y) {
                    if (b as usize) <= a {
                        continue;
                    }
                    let d2 = distance_sq(p, points[b as usize]);
                    if d2 <= cut2 && node.neighbors.binary_search(&nodes[b as usize].id).is_err() {
                        local.push((b, d2));
                    }
                }
            }
        }
        local.sort_unstable_by_key(|(b, _)| *b);
        out.extend(local.iter().map(|&(b, d2)| (a as u32, b, d2)));
    }
    out
}

/// Every unordered unlinked pair at distance `<= cutoff`, ascending.
pub fn candidate_pairs(world: &World, cutoff: f64) -> Vec<(NodeId, NodeId)> {
    let nodes: Vec<&Node> = world.nodes.values().collect();
    candidate_index_pairs(&nodes, world.region_side, cutoff)
        .into_iter()
        .map(|(a, b, _)| (nodes[a as usize].id, nodes[b as usize].id))
        .collect()
}

/// Duration in whole steps: `ceil(mult · Gamma(k, τ/k))`, at least 1.
pub fn draw_duration<R: Rng + ?Sized>(params: &LinkParams, mult: f64, rng: &mut R) -> u64 {
    let gamma = Gamma::new(params.duration_shape, params.duration_mean / params.duration_shape)
        .expect("validated duration parameters");
    let raw = gamma.sample(rng) * mult;
    (raw.ceil() as u64).max(1)
}

/// One formation sweep. Probabilities use degrees as of the start of the
/// step; links are inserted after every pair has been tried.
pub fn step_formation<R: Rng + ?Sized>(
    world: &mut World,
    params: &LinkParams,
    effects: &dyn EffectSource,
    rng: &mut R,
) -> Vec<LinkKey> {
    let now = world.step;
    let mut formed: Vec<(NodeId, NodeId, Link)> = Vec::new();
    if params.base_prob > 0.0 {
        let nodes: Vec<&Node> = world.nodes.values().collect();
        let gamma = Gamma::new(params.duration_shape, params.duration_mean / params.duration_shape)
            .expect("validated duration parameters");
        let mults: Vec<_> = nodes.iter().map(|n| effects.multipliers(n.id)).collect();
        for (a, b, d2) in candidate_index_pairs(&nodes, world.region_side, params.candidate_cutoff) {
            let (ni, nj) = (nodes[a as usize], nodes[b as usize]);
            let (mi, mj) = (mults[a as usize], mults[b as usize]);
            let p = formation_probability_raw(params, d2, (ni.sex, nj.sex), (ni.degree(), nj.degree()))
                * mi.formation_mult
                * mj.formation_mult;
            if p <= 0.0 || rng.random::<f64>() >= p {
                continue;
            }
            let mult = mi.duration_mult * mj.duration_mult;
            let steps = ((gamma.sample(rng) * mult).ceil() as u64).max(1);
            formed.push((
                ni.id,
                nj.id,
                Link {
                    formed_at: now,
                    expires_at: now + steps,
                },
            ));
        }
    }
    formed
        .into_iter()
        .filter_map(|(i, j, link)| world.add_link(i, j, link).then_some(LinkKey::new(i, j)))
        .collect()
}

/// Removes every link with `expires_at <= now`.
pub fn step_dissolution(world: &mut World, now: u64) -> Vec<LinkKey> {
    let expired: Vec<LinkKey> = world
        .links
        .iter()
        .filter(|(_, l)| l.expires_at <= now)
        .map(|(k, _)| *k)
        .collect();
    for k in &expired {
        world.remove_link(k.0, k.1);
    }
    expired
}
