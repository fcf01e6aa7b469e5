//! Per-node multipliers that interventions apply to the other layers.

use crate::world::NodeId;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Multipliers {
    /// Onward transmission from the node.
    pub out_mult: f64,
    /// Susceptibility of the node.
    pub in_mult: f64,
    pub mortality_mult: f64,
    pub duration_mult: f64,
    pub formation_mult: f64,
}

impl Multipliers {
    pub const NEUTRAL: Multipliers = Multipliers {
        out_mult: 1.0,
        in_mult: 1.0,
        mortality_mult: 1.0,
        duration_mult: 1.0,
        formation_mult: 1.0,
    };
}

impl Default for Multipliers {
    fn default() -> Self {
        Multipliers::NEUTRAL
    }
}

pub trait EffectSource {
    fn multipliers(&self, id: NodeId) -> Multipliers;
}

/// Every node neutral.
pub struct NoEffects;

impl EffectSource for NoEffects {
    fn multipliers(&self, _: NodeId) -> Multipliers {
        Multipliers::NEUTRAL
    }
}
