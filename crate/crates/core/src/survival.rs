//! Cost-weighted Aalen cumulative hazard and Kaplan–Meier survival in reversed
//! development time.

use crate::error::{Error, Result};
use crate::exposure::Exposure;
use crate::model::ClaimDataset;
use crate::step::StepFunction;

/// Cost-weighted cumulative hazard. Each jump is the amount paid at a reversed
/// time divided by the amount at risk there (ties pooled).
#[derive(Debug, Clone, PartialEq)]
pub struct CumHazardEstimate {
    step: StepFunction,
    increments: Vec<f64>,
}

impl CumHazardEstimate {
    pub fn step(&self) -> &StepFunction {
        &self.step
    }

    pub fn jump_times(&self) -> &[f64] {
        self.step.jump_times()
    }

    /// Hazard increments, one per distinct reversed delay.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.step.eval(s)
    }
}

/// Cost-weighted product-limit survival function.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalEstimate {
    step: StepFunction,
}

impl SurvivalEstimate {
    pub fn from_hazard(hazard: &CumHazardEstimate) -> Self {
        let mut s = 1.0;
        let values = hazard
            .increments
            .iter()
            .map(|d| {
                s *= 1.0 - d;
                s
            })
            .collect();
        let step = StepFunction::from_values(1.0, hazard.jump_times().to_vec(), values)
            .expect("hazard jump times are strictly increasing");
        Self { step }
    }

    pub fn step(&self) -> &StepFunction {
        &self.step
    }

    pub fn jump_times(&self) -> &[f64] {
        self.step.jump_times()
    }

    pub fn value(&self, s: f64) -> f64 {
        self.step.eval(s)
    }

    /// `Ŝ(s-)`, the weight given to a payment at `s`.
    pub fn left_limit(&self, s: f64) -> f64 {
        self.step.left_limit(s)
    }

    /// `(s, value)` rows for export.
    pub fn rows(&self) -> Vec<(f64, f64)> {
        self.step.rows()
    }
}

/// Cost-weighted Aalen-type cumulative hazard of the reversed delays.
pub fn aalen_weighted(dataset: &ClaimDataset) -> Result<CumHazardEstimate> {
    if !dataset.is_normalized() {
        return Err(Error::NotNormalized);
    }
    if !dataset.records().iter().any(|r| r.amount > 0.0) {
        return Err(Error::NoPositiveAmount);
    }
    let exposure = Exposure::from_dataset(dataset);

    let mut jumps: Vec<(f64, f64)> = dataset
        .records()
        .iter()
        .map(|r| (1.0 - r.delay, r.amount))
        .collect();
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut times = Vec::new();
    let mut increments = Vec::new();
    let mut i = 0;
    while i < jumps.len() {
        let s = jumps[i].0;
        let mut mass = 0.0;
        while i < jumps.len() && jumps[i].0 == s {
            mass += jumps[i].1;
            i += 1;
        }
        let at_risk = exposure.value_at(s);
        let inc = if mass > 0.0 {
            if at_risk <= 0.0 || mass > at_risk * (1.0 + 1e-12) {
                return Err(Error::DegenerateRiskSet {
                    time: s,
                    mass,
                    exposure: at_risk,
                });
            }
            (mass / at_risk).min(1.0)
        } else {
            0.0
        };
        times.push(s);
        increments.push(inc);
    }
    let step = StepFunction::from_jumps(0.0, times, &increments)?;
    Ok(CumHazardEstimate { step, increments })
}

/// Cost-weighted Kaplan–Meier survival `Π_{s' <= s} (1 - ΔÂ(s'))`.
pub fn km_weighted(dataset: &ClaimDataset) -> Result<SurvivalEstimate> {
    Ok(SurvivalEstimate::from_hazard(&aalen_weighted(dataset)?))
}
