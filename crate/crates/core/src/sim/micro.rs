//! Mobile-phone insurance micro model on a 360-day calendar.
//!
//! Day `0` is the first underwriting day. Policies are written on days
//! `0..underwriting_days`, each covers the following 360 days, and only the
//! first incident of a policy is claimed. An event dated day `d` happens during
//! `[d, d + 1)`.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::model::{ClaimDataset, ClaimRecord};

use super::rng::substream;

pub const DAYS_PER_YEAR: u32 = 360;
pub const DAYS_PER_MONTH: u32 = 30;

const TYPE_PROBS: [f64; 3] = [0.25, 0.45, 0.30];
const BRAND_PROBS: [f64; 4] = [0.45, 0.30, 0.15, 0.10];
const BRAND_PRICES: [f64; 4] = [600.0, 550.0, 300.0, 150.0];
const MODEL_PROBS: [f64; 4] = [0.05, 0.10, 0.35, 0.50];
const MODEL_FACTOR: f64 = 1.15;

const BREAKAGE_RATE: f64 = 0.15;
const OXIDATION_RATE: f64 = 0.05;
const THEFT_RATE_PER_MODEL: f64 = 0.05;

const REPORT_SHAPE: (f64, f64) = (0.4, 10.0);
const PAYMENT_SHAPE: (f64, f64) = (7.0, 7.0);
const PAYMENT_OFFSET: u32 = 10;
const PAYMENT_SPAN: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyType {
    Breakage,
    BreakageOxidation,
    BreakageOxidationTheft,
}

impl PolicyType {
    pub fn covers(self, incident: Incident) -> bool {
        match incident {
            Incident::Breakage => true,
            Incident::Oxidation => self != PolicyType::Breakage,
            Incident::Theft => self == PolicyType::BreakageOxidationTheft,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Incident {
    Breakage,
    Oxidation,
    Theft,
}

impl Incident {
    pub const ALL: [Incident; 3] = [Incident::Breakage, Incident::Oxidation, Incident::Theft];

    /// Yearly hazard for a phone of the given model index.
    pub fn yearly_rate(self, model: u8) -> f64 {
        match self {
            Incident::Breakage => BREAKAGE_RATE,
            Incident::Oxidation => OXIDATION_RATE,
            Incident::Theft => THEFT_RATE_PER_MODEL * f64::from(model),
        }
    }

    /// Beta parameters of the paid share of the phone price.
    pub fn severity(self) -> (f64, f64) {
        match self {
            Incident::Breakage => (2.0, 5.0),
            Incident::Oxidation => (5.0, 3.0),
            Incident::Theft => (5.0, 0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Policy {
    pub day: u32,
    pub kind: PolicyType,
    /// Brand index 0..4.
    pub brand: u8,
    /// Model index 0..4.
    pub model: u8,
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MicroClaim {
    /// Index into [`MicroEventLog::policies`].
    pub policy: usize,
    pub incident: Incident,
    pub incident_day: u32,
    pub report_day: u32,
    pub payment_day: u32,
    pub amount: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MicroConfig {
    /// Expected policies written per day.
    pub intensity: f64,
    pub underwriting_days: u32,
}

impl Default for MicroConfig {
    fn default() -> Self {
        Self {
            intensity: 700.0,
            underwriting_days: 2 * DAYS_PER_YEAR,
        }
    }
}

impl MicroConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.intensity.is_finite() && self.intensity > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "micro intensity must be positive, got {}",
                self.intensity
            )));
        }
        if self.underwriting_days == 0 {
            return Err(Error::InvalidArgument(
                "underwriting period is empty".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MicroEventLog {
    pub config: MicroConfig,
    pub policies: Vec<Policy>,
    /// Sorted by policy.
    pub claims: Vec<MicroClaim>,
}

pub fn phone_price(brand: u8, model: u8) -> f64 {
    BRAND_PRICES[usize::from(brand)] * MODEL_FACTOR.powi(i32::from(model))
}

/// Cumulative probabilities of `ceil(k X)` on `1..=k` for `X ~ Beta(a, b)`.
///
/// This is the daily discretization of the beta hazard: the chance of day `j`
/// given survival to it equals the continuous hazard integrated over the day.
fn day_table(shape: (f64, f64), days: u32) -> Vec<f64> {
    let law = Beta::new(shape.0, shape.1).expect("fixed beta parameters");
    let mut cdf: Vec<f64> = (1..=days)
        .map(|k| law.cdf(f64::from(k) / f64::from(days)))
        .collect();
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

fn report_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| day_table(REPORT_SHAPE, DAYS_PER_YEAR))
}

fn payment_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| day_table(PAYMENT_SHAPE, PAYMENT_SPAN))
}

/// Draw in `1..=table.len()`.
fn draw_day<R: Rng + ?Sized>(table: &[f64], rng: &mut R) -> u32 {
    let x: f64 = rng.random();
    let k = table.partition_point(|&c| c <= x).min(table.len() - 1);
    k as u32 + 1
}

fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let mut x: f64 = rng.random();
    for (k, p) in probs.iter().enumerate() {
        if x < *p {
            return k;
        }
        x -= p;
    }
    probs.len() - 1
}

/// Simulates one run of the micro model. Each underwriting day draws from its
/// own stream, so the log does not depend on thread scheduling.
pub fn simulate_micro(seed: u64, config: &MicroConfig) -> Result<MicroEventLog> {
    config.validate()?;
    let poisson = rand_distr::Poisson::new(config.intensity)
        .map_err(|e| Error::InvalidArgument(format!("poisson intensity: {e}")))?;
    let days: Vec<(Vec<Policy>, Vec<(usize, MicroClaim)>)> = (0..config.underwriting_days)
        .into_par_iter()
        .map(|day| {
            let mut rng = substream(seed, &[u64::from(day)]);
            let count = poisson.sample(&mut rng) as usize;
            let mut policies = Vec::with_capacity(count);
            let mut claims = Vec::new();
            for k in 0..count {
                let policy = draw_policy(day, &mut rng);
                if let Some(claim) = draw_claim(&policy, &mut rng) {
                    claims.push((k, claim));
                }
                policies.push(policy);
            }
            (policies, claims)
        })
        .collect();
    let mut policies = Vec::new();
    let mut claims = Vec::new();
    for (day_policies, day_claims) in days {
        let offset = policies.len();
        claims.extend(day_claims.into_iter().map(|(k, mut c)| {
            c.policy = offset + k;
            c
        }));
        policies.extend(day_policies);
    }
    Ok(MicroEventLog {
        config: *config,
        policies,
        claims,
    })
}

fn draw_policy<R: Rng + ?Sized>(day: u32, rng: &mut R) -> Policy {
    let kind = match categorical(&TYPE_PROBS, rng) {
        0 => PolicyType::Breakage,
        1 => PolicyType::BreakageOxidation,
        _ => PolicyType::BreakageOxidationTheft,
    };
    let brand = categorical(&BRAND_PROBS, rng) as u8;
    let model = categorical(&MODEL_PROBS, rng) as u8;
    Policy {
        day,
        kind,
        brand,
        model,
        price: phone_price(brand, model),
    }
}

fn draw_claim<R: Rng + ?Sized>(policy: &Policy, rng: &mut R) -> Option<MicroClaim> {
    let rates = Incident::ALL.map(|i| {
        if policy.kind.covers(i) {
            i.yearly_rate(policy.model)
        } else {
            0.0
        }
    });
    let total: f64 = rates.iter().sum();
    let wait: f64 = rng.sample::<f64, _>(Exp1) / total;
    let offset = (wait * f64::from(DAYS_PER_YEAR)).ceil().max(1.0);
    if offset > f64::from(DAYS_PER_YEAR) {
        return None;
    }
    let probs = rates.map(|r| r / total);
    let incident = Incident::ALL[categorical(&probs, rng)];
    let incident_day = policy.day + offset as u32;
    let report_day = incident_day + draw_day(report_table(), rng);
    let payment_day = report_day + PAYMENT_OFFSET + draw_day(payment_table(), rng);
    let (a, b) = incident.severity();
    let share: f64 = rand_distr::Beta::new(a, b)
        .expect("fixed beta parameters")
        .sample(rng);
    Some(MicroClaim {
        policy: 0,
        incident,
        incident_day,
        report_day,
        payment_day,
        amount: policy.price * share,
    })
}

/// Month-end valuation days from the end of month 9 to the end of month 29:
/// September of the first underwriting year through May two years later.
pub fn valuation_days() -> Vec<u32> {
    (9..=29).map(|m| m * DAYS_PER_MONTH).collect()
}

#[derive(Debug, Clone)]
pub struct MicroSnapshot {
    /// Normalized claims paid before the valuation day.
    pub dataset: ClaimDataset,
    /// Payments still due for incidents before the valuation day.
    pub outstanding: f64,
    pub valuation_day: u32,
}

/// Claims known at the start of `valuation_day`.
///
/// Accident time is the incident day and the delay is the whole number of
/// days to payment, so a claim paid on the last observed day has
/// `accident + delay = valuation_day - 1` and a nonempty risk window.
pub fn micro_snapshot(log: &MicroEventLog, valuation_day: u32) -> Result<MicroSnapshot> {
    let first = log.claims.iter().map(|c| c.incident_day).min();
    match first {
        Some(d) if d < valuation_day => {}
        _ => {
            return Err(Error::InvalidArgument(format!(
                "valuation day {valuation_day} precedes the first incident"
            )))
        }
    }
    let mut records = Vec::new();
    let mut outstanding = 0.0;
    for c in &log.claims {
        if c.incident_day >= valuation_day {
            continue;
        }
        if c.payment_day < valuation_day {
            records.push(ClaimRecord::new(
                f64::from(c.incident_day),
                f64::from(c.payment_day - c.incident_day),
                c.amount,
            ));
        } else {
            outstanding += c.amount;
        }
    }
    let dataset = ClaimDataset::new(records, f64::from(valuation_day))?.normalized();
    Ok(MicroSnapshot {
        dataset,
        outstanding,
        valuation_day,
    })
}
