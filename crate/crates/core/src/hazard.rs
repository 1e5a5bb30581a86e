//! Histogram estimator of the cost-weighted reversed hazard.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exposure::Exposure;
use crate::model::ClaimDataset;

/// Hazard values on `m` equal bins of reversed time. Bin `l` is
/// `(l/m, (l+1)/m]`, with `s = 0` placed in the first bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramHazard {
    bins: usize,
    values: Vec<f64>,
    empty: Vec<bool>,
}

impl HistogramHazard {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn width(&self) -> f64 {
        1.0 / self.bins as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Left edges `l / m`.
    pub fn edges(&self) -> Vec<f64> {
        (0..self.bins)
            .map(|l| l as f64 / self.bins as f64)
            .collect()
    }

    /// Bins with no exposure, reported as zero hazard.
    pub fn empty_bins(&self) -> Vec<usize> {
        (0..self.bins).filter(|&l| self.empty[l]).collect()
    }
}

/// Index of the reversed-time bin containing `s`.
pub fn reversed_bin(s: f64, m: usize) -> usize {
    let x = (s * m as f64 - 1e-9).ceil();
    (x.max(1.0) as usize - 1).min(m - 1)
}

pub fn histogram_hazard(dataset: &ClaimDataset, m: usize) -> Result<HistogramHazard> {
    if m == 0 {
        return Err(Error::InvalidArgument("bin count must be positive".into()));
    }
    if !dataset.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let mut mass = vec![0.0; m];
    for r in dataset.records() {
        mass[reversed_bin(1.0 - r.delay, m)] += r.amount;
    }
    let exposure = Exposure::from_dataset(dataset);
    let mut values = vec![0.0; m];
    let mut empty = vec![false; m];
    for l in 0..m {
        let lo = l as f64 / m as f64;
        let hi = (l + 1) as f64 / m as f64;
        let denom = exposure.integral(lo, hi, true)?;
        if denom > 0.0 {
            values[l] = mass[l] / denom;
        } else {
            if mass[l] > 0.0 {
                return Err(Error::DegenerateRiskSet {
                    time: lo,
                    mass: mass[l],
                    exposure: denom,
                });
            }
            empty[l] = true;
        }
    }
    Ok(HistogramHazard {
        bins: m,
        values,
        empty,
    })
}

/// Development factors `1 + w * α̂(l)` with `w` the bin width, i.e. the
/// hazard integrated over each bin. With one bin this is `1 + α̂`.
pub fn development_factors(hist: &HistogramHazard) -> Vec<f64> {
    let w = hist.width();
    hist.values.iter().map(|a| 1.0 + w * a).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClaimRecord;

    #[test]
    fn single_claim_one_bin() {
        let d = ClaimDataset::new(vec![ClaimRecord::new(0.0, 0.5, 2.0)], 1.0).unwrap();
        let h = histogram_hazard(&d, 1).unwrap();
        assert_eq!(h.values(), &[2.0]);
        assert_eq!(development_factors(&h), vec![3.0]);
    }

    #[test]
    fn empty_bins_are_zero() {
        let d = ClaimDataset::new(vec![ClaimRecord::new(0.0, 0.9, 1.0)], 1.0).unwrap();
        let h = histogram_hazard(&d, 4).unwrap();
        assert_eq!(h.values()[1..], [0.0, 0.0, 0.0]);
        assert_eq!(h.empty_bins(), vec![1, 2, 3]);
        assert!(histogram_hazard(&d, 0).is_err());
    }

    #[test]
    fn bin_edges_are_left_open() {
        assert_eq!(reversed_bin(0.0, 4), 0);
        assert_eq!(reversed_bin(0.25, 4), 0);
        assert_eq!(reversed_bin(0.2500001, 4), 1);
        assert_eq!(reversed_bin(1.0, 4), 3);
        assert_eq!(reversed_bin(0.3, 10), 2);
    }
}
