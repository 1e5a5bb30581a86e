//! Claim data model and the reversed-time view used by every estimator.
//!
//! A claim is a triplet `(accident, delay, amount)` observed only when
//! `accident + delay <= horizon`. Reversing development time,
//! `reversed = horizon - delay`, turns that right-truncation into left-truncation:
//! claim `i` is at risk on the window `accident < s <= reversed`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exposure::Exposure;

/// One paid claim in original units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub accident: f64,
    pub delay: f64,
    pub amount: f64,
}

impl ClaimRecord {
    pub fn new(accident: f64, delay: f64, amount: f64) -> Self {
        Self {
            accident,
            delay,
            amount,
        }
    }

    /// The record with accident time and delay exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.delay, self.accident, self.amount)
    }
}

/// Validated set of truncated claim observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimDataset {
    records: Vec<ClaimRecord>,
    horizon: f64,
    unit_scale: f64,
}

impl ClaimDataset {
    /// Builds a dataset, rejecting the first record that is negative, non-finite
    /// or lies beyond the truncation line `accident + delay <= horizon`.
    pub fn new(records: Vec<ClaimRecord>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidHorizon(horizon));
        }
        for (index, r) in records.iter().enumerate() {
            validate_record(index, r, horizon)?;
        }
        Ok(Self {
            records,
            horizon,
            unit_scale: 1.0,
        })
    }

    pub fn records(&self) -> &[ClaimRecord] {
        &self.records
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Length of one normalized time unit in original units.
    pub fn unit_scale(&self) -> f64 {
        self.unit_scale
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.horizon == 1.0
    }

    /// Sum of all paid amounts.
    pub fn total_amount(&self) -> f64 {
        self.records.iter().map(|r| r.amount).sum()
    }

    /// Largest observed accident time.
    pub fn max_accident(&self) -> f64 {
        self.records.iter().map(|r| r.accident).fold(0.0, f64::max)
    }

    /// Rescales all times by the horizon so that the horizon becomes 1.
    ///
    /// `unit_scale` of the result is the original horizon (times any previous
    /// scale), so estimates can be reported back in original units.
    pub fn normalized(&self) -> ClaimDataset {
        if self.is_normalized() {
            return self.clone();
        }
        let horizon = self.horizon;
        let records = self
            .records
            .iter()
            .map(|r| {
                let accident = (r.accident / horizon).min(1.0);
                // keep the truncation line exact after rounding
                let delay = (r.delay / horizon).min(1.0 - accident);
                ClaimRecord::new(accident, delay, r.amount)
            })
            .collect();
        ClaimDataset {
            records,
            horizon: 1.0,
            unit_scale: self.unit_scale * horizon,
        }
    }

    /// Dataset with the roles of accident time and delay exchanged.
    ///
    /// Estimating the delay density of the swapped data estimates the accident
    /// density of the original data.
    pub fn swapped(&self) -> ClaimDataset {
        ClaimDataset {
            records: self.records.iter().map(ClaimRecord::swapped).collect(),
            horizon: self.horizon,
            unit_scale: self.unit_scale,
        }
    }

    /// Dataset restricted to the records for which `keep` returns true.
    pub fn filtered(&self, mut keep: impl FnMut(usize, &ClaimRecord) -> bool) -> ClaimDataset {
        ClaimDataset {
            records: self
                .records
                .iter()
                .enumerate()
                .filter(|(i, r)| keep(*i, r))
                .map(|(_, r)| *r)
                .collect(),
            horizon: self.horizon,
            unit_scale: self.unit_scale,
        }
    }

    /// Same records with every amount multiplied by `factor`.
    pub fn scaled_amounts(&self, factor: f64) -> ClaimDataset {
        ClaimDataset {
            records: self
                .records
                .iter()
                .map(|r| ClaimRecord::new(r.accident, r.delay, r.amount * factor))
                .collect(),
            horizon: self.horizon,
            unit_scale: self.unit_scale,
        }
    }

    /// Reversed delay `horizon - delay` of record `index`.
    pub fn reversed(&self, index: usize) -> f64 {
        self.horizon - self.records[index].delay
    }

    /// Number of records at risk at reversed time `s`.
    pub fn exposure_count(&self, s: f64) -> f64 {
        self.records
            .iter()
            .filter(|r| at_risk(r, self.horizon, s))
            .count() as f64
    }

    /// Total amount of the records at risk at reversed time `s`.
    pub fn weighted_exposure(&self, s: f64) -> f64 {
        self.records
            .iter()
            .filter(|r| at_risk(r, self.horizon, s))
            .map(|r| r.amount)
            .sum()
    }

    /// Exact integral of the (count or amount weighted) exposure over `[a, b]`.
    pub fn exposure_integral(&self, a: f64, b: f64, weighted: bool) -> Result<f64> {
        Exposure::from_dataset(self).integral(a, b, weighted)
    }
}

fn at_risk(r: &ClaimRecord, horizon: f64, s: f64) -> bool {
    r.accident < s && s <= horizon - r.delay
}

fn validate_record(index: usize, r: &ClaimRecord, horizon: f64) -> Result<()> {
    let fields = [
        ("accident", r.accident),
        ("delay", r.delay),
        ("amount", r.amount),
    ];
    for (name, value) in fields {
        if !value.is_finite() {
            return Err(Error::InvalidRecord {
                index,
                reason: format!("{name} is not finite"),
            });
        }
        if value < 0.0 {
            return Err(Error::InvalidRecord {
                index,
                reason: format!("{name} is negative ({value})"),
            });
        }
    }
    let total = r.accident + r.delay;
    if total > horizon {
        return Err(Error::TruncationViolated {
            index,
            total,
            horizon,
        });
    }
    Ok(())
}

/// Validates and normalizes raw records in one step.
pub fn normalize(records: Vec<ClaimRecord>, horizon: f64) -> Result<ClaimDataset> {
    Ok(ClaimDataset::new(records, horizon)?.normalized())
}

/// Reversed development time `horizon - t`.
pub fn reversed_delay(t: f64, horizon: f64) -> Result<f64> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidHorizon(horizon));
    }
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::InvalidArgument(format!(
            "delay {t} outside [0, {horizon}]"
        )));
    }
    Ok(horizon - t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(u: f64, t: f64, z: f64) -> ClaimDataset {
        ClaimDataset::new(vec![ClaimRecord::new(u, t, z)], 1.0).unwrap()
    }

    #[test]
    fn normalize_rescales_times_only() {
        let d = normalize(vec![ClaimRecord::new(365.0, 365.0, 10.0)], 3650.0).unwrap();
        let r = d.records()[0];
        assert!((r.accident - 0.1).abs() < 1e-15);
        assert!((r.delay - 0.1).abs() < 1e-15);
        assert_eq!(r.amount, 10.0);
        assert_eq!(d.horizon(), 1.0);
        assert_eq!(d.unit_scale(), 3650.0);
    }

    #[test]
    fn normalize_identity_case() {
        let d = normalize(vec![ClaimRecord::new(0.0, 0.0, 0.0)], 1.0).unwrap();
        assert_eq!(d.records()[0], ClaimRecord::new(0.0, 0.0, 0.0));
        assert_eq!(d.unit_scale(), 1.0);
    }

    #[test]
    fn truncation_violation_names_record() {
        let records = vec![
            ClaimRecord::new(1.0, 1.0, 1.0),
            ClaimRecord::new(6.0, 6.0, 1.0),
        ];
        match normalize(records, 10.0) {
            Err(Error::TruncationViolated { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            normalize(vec![], 0.0),
            Err(Error::InvalidHorizon(_))
        ));
        assert!(matches!(
            normalize(vec![ClaimRecord::new(0.0, -1.0, 1.0)], 1.0),
            Err(Error::InvalidRecord { index: 0, .. })
        ));
    }

    #[test]
    fn normalized_boundary_records_stay_on_the_line() {
        let d = normalize(vec![ClaimRecord::new(0.7, 0.3 * 3.0, 1.0)], 1.6).unwrap();
        let r = d.records()[0];
        assert!(r.accident + r.delay <= 1.0);
    }

    #[test]
    fn reversed_delay_cases() {
        assert!((reversed_delay(0.3, 1.0).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(reversed_delay(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(reversed_delay(0.5, 1.0).unwrap(), 0.5);
        assert!(reversed_delay(1.5, 1.0).is_err());
        assert!(reversed_delay(-0.1, 1.0).is_err());
    }

    #[test]
    fn exposure_window_is_open_left_closed_right() {
        let d = one(0.2, 0.3, 5.0);
        assert_eq!(d.exposure_count(0.5), 1.0);
        assert_eq!(d.exposure_count(0.1), 0.0);
        assert_eq!(d.exposure_count(0.8), 0.0);
        assert_eq!(d.exposure_count(0.2), 0.0);
        assert_eq!(d.exposure_count(0.7), 1.0);
        assert_eq!(d.weighted_exposure(0.5), 5.0);
        assert_eq!(d.weighted_exposure(0.9), 0.0);
    }

    #[test]
    fn exposure_counts_ties() {
        let d = ClaimDataset::new(vec![ClaimRecord::new(0.0, 0.0, 1.0); 3], 1.0).unwrap();
        assert_eq!(d.exposure_count(0.5), 3.0);
    }

    #[test]
    fn exposure_integral_examples() {
        assert_eq!(
            one(0.0, 0.0, 2.0)
                .exposure_integral(0.0, 1.0, true)
                .unwrap(),
            2.0
        );
        let d = one(0.25, 0.25, 4.0);
        assert!((d.exposure_integral(0.0, 1.0, true).unwrap() - 2.0).abs() < 1e-15);
        assert!((d.exposure_integral(0.0, 1.0, false).unwrap() - 0.5).abs() < 1e-15);
        let empty = ClaimDataset::new(vec![], 1.0).unwrap();
        assert_eq!(empty.exposure_integral(0.0, 1.0, true).unwrap(), 0.0);
        assert!(d.exposure_integral(0.6, 0.4, true).is_err());
    }

    #[test]
    fn swap_twice_is_identity() {
        let d = ClaimDataset::new(
            vec![
                ClaimRecord::new(0.1, 0.3, 2.0),
                ClaimRecord::new(0.5, 0.2, 1.0),
            ],
            1.0,
        )
        .unwrap();
        assert_eq!(d.swapped().swapped(), d);
    }
}
