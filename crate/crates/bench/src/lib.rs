//! Benchmark fixtures.

use ccl_core::sim::{simulate_scenario, ScenarioSpec};
use ccl_core::{km_weighted, ClaimDataset, SurvivalEstimate};

/// A simulated sample with its survival estimate, reused across iterations.
pub struct Fixture {
    pub dataset: ClaimDataset,
    pub survival: SurvivalEstimate,
}

/// Scenario `id` with `n` claims and a fixed seed.
pub fn scenario_fixture(id: u8, n: usize) -> Fixture {
    let spec = ScenarioSpec::numbered(id, n, 0x5eed).expect("valid scenario");
    let dataset = simulate_scenario(&spec).expect("simulation").dataset;
    let survival = km_weighted(&dataset).expect("survival");
    Fixture { dataset, survival }
}
