//! Alternating inexact minimization on smooth strongly convex pairs, with the
//! noise term, descent constants and region tests that certify each step.

mod algorithms;
mod quadratic;
mod regions;

pub use algorithms::{
    algorithm2_preimage, algorithm2_turn, proximal_objective, run_algorithm1, run_algorithm2, AimSteps, StepMode,
};
pub use quadratic::{optimal_points, quadratic_constants, QuadraticObjective, Side, SmoothnessProfile};
pub use regions::{
    apollonian_contains, bound_C, bound_Cprime, d_similarity, distance_ratio, noise_bound_factor, noise_delta,
    region_S_contains, region_T_contains, NoiseDelta, RegionSpec,
};
