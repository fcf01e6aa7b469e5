//! Social space: drifting group centers and mean-reverting node positions
//! in a square region with reflecting edges.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(pub u32);

impl GroupId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub region_side: f64,
    pub n_groups: usize,
    pub group_center_step_sd: f64,
    /// Fraction of the offset from the group center removed each step.
    pub node_reversion: f64,
    pub node_step_sd: f64,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        SpaceConfig {
            region_side: 1.0,
            n_groups: 20,
            group_center_step_sd: 0.009,
            node_reversion: 0.6,
            node_step_sd: 0.01,
        }
    }
}

impl SpaceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.region_side > 0.0 && self.region_side.is_finite()) {
            return Err(Error::Config("space.region_side must be > 0".into()));
        }
        if self.n_groups == 0 {
            return Err(Error::Config("space.n_groups must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.node_reversion) {
            return Err(Error::Config("space.node_reversion must lie in [0, 1]".into()));
        }
        if self.node_reversion == 0.0 && self.node_step_sd > 0.0 {
            return Err(Error::Config("space.node_reversion = 0 requires space.node_step_sd = 0".into()));
        }
        if !(self.group_center_step_sd >= 0.0 && self.node_step_sd >= 0.0) {
            return Err(Error::Config("space step standard deviations must be >= 0".into()));
        }
        Ok(())
    }

    /// Per-coordinate stationary standard deviation of a node around a fixed
    /// center under the AR(1) update.
    pub fn node_stationary_sd(&self) -> f64 {
        if self.node_step_sd == 0.0 {
            return 0.0;
        }
        let keep = 1.0 - self.node_reversion;
        self.node_step_sd / (1.0 - keep * keep).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupState {
    pub id: GroupId,
    pub center: Point,
    pub target_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodePosition {
    pub position: Point,
    pub group: GroupId,
}

/// Folds a coordinate back into `[0, side]`, mirroring at both edges as many
/// times as needed.
pub fn reflect(v: f64, side: f64) -> f64 {
    let period = 2.0 * side;
    let r = v.rem_euclid(period);
    if r > side {
        period - r
    } else {
        r
    }
}

pub fn in_region(p: Point, side: f64) -> bool {
    (0.0..=side).contains(&p.x) && (0.0..=side).contains(&p.y)
}

/// Splits `pop_target` over groups so sizes differ by at most one; the first
/// `pop_target % n_groups` groups carry the extra member.
pub fn split_targets(pop_target: usize, n_groups: usize) -> Vec<usize> {
    let base = pop_target / n_groups;
    let extra = pop_target % n_groups;
    (0..n_groups).map(|g| base + usize::from(g < extra)).collect()
}

pub fn init_groups<R: Rng + ?Sized>(cfg: &SpaceConfig, pop_target: usize, rng: &mut R) -> Vec<GroupState> {
    split_targets(pop_target, cfg.n_groups)
        .into_iter()
        .enumerate()
        .map(|(g, target_size)| {
            let center = Point::new(
                rng.random::<f64>() * cfg.region_side,
                rng.random::<f64>() * cfg.region_side,
            );
            GroupState {
                id: GroupId(g as u32),
                center,
                target_size,
            }
        })
        .collect()
}

fn gaussian(sd: f64) -> Option<Normal<f64>> {
    (sd > 0.0).then(|| Normal::new(0.0, sd).expect("finite sd"))
}

pub fn step_group_centers<R: Rng + ?Sized>(groups: &mut [GroupState], cfg: &SpaceConfig, rng: &mut R) {
    let Some(noise) = gaussian(cfg.group_center_step_sd) else {
        return;
    };
    for g in groups.iter_mut() {
        let dx = noise.sample(rng);
        let dy = noise.sample(rng);
        g.center.x = reflect(g.center.x + dx, cfg.region_side);
        g.center.y = reflect(g.center.y + dy, cfg.region_side);
    }
}

/// One AR(1) step of every node toward its group center. Nodes are visited
/// in iterator order, which fixes the draw order.
pub fn step_node_positions<'a, R, I>(nodes: I, groups: &[GroupState], cfg: &SpaceConfig, rng: &mut R)
where
    R: Rng + ?Sized,
    I: IntoIterator<Item = (&'a mut Point, GroupId)>,
{
    let kappa = cfg.node_reversion;
    let noise = gaussian(cfg.node_step_sd);
    // Written as a pull from the current position so that κ = 0 and κ = 1
    // are exact in floating point.
    let pull = |x: f64, c: f64| if kappa == 1.0 { c } else { x + kappa * (c - x) };
    for (pos, group) in nodes {
        let c = groups[group.index()].center;
        let (ex, ey) = match &noise {
            Some(n) => (n.sample(rng), n.sample(rng)),
            None => (0.0, 0.0),
        };
        pos.x = reflect(pull(pos.x, c.x) + ex, cfg.region_side);
        pos.y = reflect(pull(pos.y, c.y) + ey, cfg.region_side);
    }
}

/// Draws a position from the stationary cloud around a group center.
pub fn sample_near_center<R: Rng + ?Sized>(center: Point, cfg: &SpaceConfig, rng: &mut R) -> Point {
    match gaussian(cfg.node_stationary_sd()) {
        Some(n) => Point::new(
            reflect(center.x + n.sample(rng), cfg.region_side),
            reflect(center.y + n.sample(rng), cfg.region_side),
        ),
        None => center,
    }
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

pub fn distance_sq(a: Point, b: Point) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}
