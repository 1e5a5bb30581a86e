//! Claim generators with known ground truth.

pub mod densities;
pub mod micro;
pub mod rng;
pub mod scenario;

pub use densities::UnitDensity;
pub use micro::{
    micro_snapshot, simulate_micro, valuation_days, Incident, MicroClaim, MicroConfig,
    MicroEventLog, MicroSnapshot, Policy, PolicyType,
};
pub use rng::{derive_seed, substream};
pub use scenario::{
    is_boundary_scenario, simulate_scenario, true_reserve_fraction, CostLaw, ScenarioSample,
    ScenarioSpec, ScenarioTruth, SCENARIO_IDS,
};
