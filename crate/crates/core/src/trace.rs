use serde::{Deserialize, Serialize};

use crate::energy::EnergyValue;
use crate::numerics::Matrix;

/// Descent-condition record for one iterate.
///
/// `certified` is the conjunction of every condition the descent guarantee
/// needs; only certified steps are required to descend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct RegionFlags {
    /// Step size within the smoothness bound.
    pub step_ok: bool,
    /// Noise ratio below `delta_bound`.
    pub delta_ok: bool,
    pub delta_bound: f64,
    /// Similarity value and whether it clears `-kappa`; absent without the indicator.
    pub similarity: Option<f64>,
    pub similarity_ok: Option<bool>,
    /// Geometric region membership where a region test applies.
    pub in_region: Option<bool>,
    pub feasible: bool,
    pub certified: bool,
}

/// Per-iterate record of a stack or algorithm run; every list has `steps + 1` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Trace {
    pub iterates: Vec<Matrix>,
    pub energies: Vec<EnergyValue>,
    /// Noise ratio at each iterate; `None` where the ratio is undefined.
    pub deltas: Vec<Option<f64>>,
    pub region_flags: Vec<RegionFlags>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn push(&mut self, y: Matrix, energy: EnergyValue, delta: Option<f64>, flags: RegionFlags) {
        self.iterates.push(y);
        self.energies.push(energy);
        self.deltas.push(delta);
        self.region_flags.push(flags);
    }

    pub fn last(&self) -> Option<&Matrix> {
        self.iterates.last()
    }

    /// Transitions `k -> k+1` whose start was certified but whose energy rose by more than `tol`.
    pub fn conditional_violations(&self, tol: f64) -> Vec<usize> {
        (0..self.len().saturating_sub(1))
            .filter(|&k| {
                let (a, b) = (&self.energies[k], &self.energies[k + 1]);
                self.region_flags[k].certified
                    && match (a.total, b.total) {
                        (Some(ea), Some(eb)) => eb > ea + tol,
                        _ => false,
                    }
            })
            .collect()
    }
}
