//! Error metrics for the simulation studies and checks of the chain-ladder
//! assumptions on observed data.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::density::DensityEstimate;
use crate::error::{Error, Result};
use crate::model::ClaimDataset;
use crate::triangle::{aggregate_triangle, row_dev_factors, AggregationMode};

/// `∫ (f̂ - f)²` by the trapezoid rule on the estimate's grid.
pub fn ise(est: &DensityEstimate, truth: impl Fn(f64) -> f64) -> f64 {
    let g = est.grid();
    let sq: Vec<f64> = g
        .iter()
        .zip(est.values())
        .map(|(&x, &v)| (v - truth(x)).powi(2))
        .collect();
    g.windows(2)
        .zip(sq.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// `((estimate - truth) / truth)²`.
pub fn squared_relative_error(estimate: f64, truth: f64) -> Result<f64> {
    if truth == 0.0 {
        return Err(Error::InvalidArgument("relative error against zero".into()));
    }
    Ok(((estimate - truth) / truth).powi(2))
}

pub fn mse(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch(estimates.len(), truths.len()));
    }
    if estimates.is_empty() {
        return Err(Error::InvalidArgument(
            "mean squared error of no values".into(),
        ));
    }
    let total: f64 = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| (e - t).powi(2))
        .sum();
    Ok(total / estimates.len() as f64)
}

/// Median of the values; NaN for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

/// Mean and sample standard deviation; NaN where undefined.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// OLS fit of development factors on accident row for one delay bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeTest {
    pub column: usize,
    pub rows: usize,
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub bins: usize,
    pub tests: Vec<SlopeTest>,
}

impl IndependenceReport {
    /// Columns whose slope is significant at `level`.
    pub fn rejections(&self, level: f64) -> Vec<usize> {
        self.tests
            .iter()
            .filter(|t| t.p_value < level)
            .map(|t| t.column)
            .collect()
    }
}

/// Regresses the row-wise development factors `α(r, s)` on `r` for every
/// delay bin `s` in `columns` and tests for a zero slope.
///
/// The fit is weighted by the cumulative value `C[r][s]`, since a factor's
/// variance falls with the mass behind it. Rows whose factor reaches the last
/// calendar diagonal are left out: with continuous times that cell is only
/// half observed, which biases the latest factor of every column downwards.
pub fn independence_diagnostic(
    dataset: &ClaimDataset,
    bins: usize,
    columns: std::ops::Range<usize>,
    mode: AggregationMode,
) -> Result<IndependenceReport> {
    let tri = aggregate_triangle(dataset, bins, mode)?;
    let cum = tri.cumulative();
    let mut tests = Vec::new();
    for s in columns {
        if s + 1 >= bins {
            return Err(Error::InvalidArgument(format!(
                "delay bin {s} has no successor in a {bins}-bin triangle"
            )));
        }
        let f = row_dev_factors(&tri, s);
        let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
        for (&r, &v) in f.rows.iter().zip(&f.values) {
            if r + s + 2 < bins {
                x.push(r as f64);
                y.push(v);
                w.push(cum[r][s]);
            }
        }
        tests.push(slope_test(s, &x, &y, &w)?);
    }
    Ok(IndependenceReport { bins, tests })
}

/// Weighted least squares slope with its classical t test.
fn slope_test(column: usize, x: &[f64], y: &[f64], w: &[f64]) -> Result<SlopeTest> {
    let n = x.len();
    if n < 3 {
        return Err(Error::Diagnostic(format!(
            "delay bin {column} has {n} usable rows, need 3"
        )));
    }
    let nf = n as f64;
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, c)| c * a).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(b, c)| c * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, c)| c * (a - mx).powi(2)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, b), c)| c * (a - mx) * (b - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, b), c)| c * (b - intercept - slope * a).powi(2))
        .sum();
    let std_error = (rss / (nf - 2.0) / sxx).sqrt();
    let scale = y
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let span = (sxx / sw).sqrt();
    let (t_stat, p_value) = if std_error * sxx.sqrt() <= 1e-12 * scale * sw.sqrt() {
        // exact fit: the slope is either zero or perfectly determined
        if (slope * span).abs() <= 1e-12 * scale {
            (0.0, 1.0)
        } else {
            (slope.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = slope / std_error;
        let dist = StudentsT::new(0.0, 1.0, nf - 2.0)
            .map_err(|e| Error::Diagnostic(format!("t distribution: {e}")))?;
        (t, (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
    };
    Ok(SlopeTest {
        column,
        rows: n,
        slope,
        intercept,
        std_error,
        t_stat,
        p_value,
    })
}

/// Cost-versus-delay curve of one accident bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuarterCurve {
    pub bin: usize,
    /// Observations sorted by delay.
    pub points: Vec<(f64, f64)>,
    /// Mean amount `c_k`.
    pub constant: f64,
    /// Interpolant divided by `c_k` on the report grid.
    pub normalized: Vec<f64>,
    /// Fewer than two distinct delays, or no positive amount.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicativityReport {
    pub grid: Vec<f64>,
    pub curves: Vec<QuarterCurve>,
    /// Largest gap between any two unflagged normalized curves.
    pub sup_distance: f64,
}

/// Per accident bin, the amounts against delay with a piecewise linear
/// interpolant normalized by the bin's mean amount, for visual comparison.
pub fn multiplicativity_diagnostic(
    dataset: &ClaimDataset,
    bins: usize,
    grid_points: usize,
) -> Result<MultiplicativityReport> {
    if bins == 0 || grid_points < 2 {
        return Err(Error::InvalidArgument(
            "need at least one bin and two grid points".into(),
        ));
    }
    if !dataset.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let grid: Vec<f64> = (0..grid_points)
        .map(|k| k as f64 / (grid_points - 1) as f64)
        .collect();
    let mut groups: Vec<Vec<(f64, f64)>> = vec![Vec::new(); bins];
    for r in dataset.records() {
        let b = ((r.accident * bins as f64 + 1e-9).floor() as usize).min(bins - 1);
        groups[b].push((r.delay, r.amount));
    }
    let curves: Vec<QuarterCurve> = groups
        .into_iter()
        .enumerate()
        .map(|(bin, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let knots = merge_ties(&points);
            let constant = if points.is_empty() {
                0.0
            } else {
                points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64
            };
            let flagged = knots.len() < 2 || !(constant > 0.0);
            let normalized = if constant > 0.0 {
                grid.iter()
                    .map(|&t| interpolate(&knots, t) / constant)
                    .collect()
            } else {
                vec![0.0; grid.len()]
            };
            QuarterCurve {
                bin,
                points,
                constant,
                normalized,
                flagged,
            }
        })
        .collect();
    let live: Vec<&QuarterCurve> = curves.iter().filter(|c| !c.flagged).collect();
    let mut sup_distance: f64 = 0.0;
    for k in 0..grid.len() {
        let (lo, hi) = live
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                (lo.min(c.normalized[k]), hi.max(c.normalized[k]))
            });
        if hi >= lo {
            sup_distance = sup_distance.max(hi - lo);
        }
    }
    Ok(MultiplicativityReport {
        grid,
        curves,
        sup_distance,
    })
}

/// Sorted points with tied delays replaced by their mean amount.
fn merge_ties(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for &(t, z) in points {
        match out.last_mut() {
            Some(last) if last.0 == t => {
                last.1 += z;
                last.2 += 1;
            }
            _ => out.push((t, z, 1)),
        }
    }
    out.into_iter().map(|(t, z, c)| (t, z / c as f64)).collect()
}

/// Linear interpolation, constant beyond the end knots.
fn interpolate(knots: &[(f64, f64)], t: f64) -> f64 {
    match knots {
        [] => 0.0,
        [only] => only.1,
        _ => {
            let k = knots.partition_point(|p| p.0 <= t);
            if k == 0 {
                knots[0].1
            } else if k == knots.len() {
                knots[k - 1].1
            } else {
                let (a, b) = (knots[k - 1], knots[k]);
                a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandwidth::BandwidthSpec;
    use crate::density::{uniform_grid, Degree, Orientation, Target};
    use crate::model::ClaimRecord;
    use proptest::prelude::*;

    fn estimate(f: impl Fn(f64) -> f64, points: usize) -> DensityEstimate {
        let grid = uniform_grid(points);
        let values = grid.iter().map(|&x| f(x)).collect();
        DensityEstimate::from_values(
            grid,
            values,
            Degree::LocalLinear,
            BandwidthSpec::fixed(0.1),
            Orientation::Natural,
            Target::T,
        )
        .unwrap()
    }

    #[test]
    fn ise_examples() {
        let f = |x: f64| 3.0 * (1.0 - x).powi(2);
        assert_eq!(ise(&estimate(f, 101), f), 0.0);
        assert!((ise(&estimate(|x| f(x) + 1.0, 101), f) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ise_converges_to_refined_quadrature() {
        let est = estimate(|x| (7.0 * x).sin() + 1.0, 20_001);
        let truth = |x: f64| 2.0 * x;
        // closed form of ∫ (sin 7x + 1 - 2x)² on [0, 1]
        let gl = crate::quad::GaussLegendre::new(20);
        let exact =
            gl.integrate_composite(0.0, 1.0, 200, |x| ((7.0 * x).sin() + 1.0 - 2.0 * x).powi(2));
        assert!((ise(&est, truth) - exact).abs() < 1e-6);
    }

    #[test]
    fn relative_errors() {
        assert_eq!(squared_relative_error(3.0, 3.0).unwrap(), 0.0);
        assert_eq!(squared_relative_error(6.0, 3.0).unwrap(), 1.0);
        assert!((squared_relative_error(0.9, 1.0).unwrap() - 0.01).abs() < 1e-15);
        assert!(squared_relative_error(1.0, 0.0).is_err());
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0], &[0.0]).unwrap(), 1.0);
        assert!(mse(&[1.0], &[]).is_err());
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    proptest! {
        #[test]
        fn mse_matches_loop(pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let mut total = 0.0;
            for k in 0..a.len() {
                total += (a[k] - b[k]) * (a[k] - b[k]);
            }
            let expect = total / a.len() as f64;
            let got = mse(&a, &b).unwrap();
            prop_assert!((got - expect).abs() <= 1e-12 * expect.max(1.0));
            let mut ra = a.clone();
            let mut rb = b.clone();
            ra.reverse();
            rb.reverse();
            prop_assert!((mse(&ra, &rb).unwrap() - got).abs() <= 1e-12 * got.max(1.0));
            prop_assert!(got >= 0.0);
        }
    }

    #[test]
    fn slope_test_edge_cases() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let w = [1.0; 4];
        let flat = slope_test(0, &x, &[1.5, 1.5, 1.5, 1.5], &w).unwrap();
        assert_eq!(flat.p_value, 1.0);
        assert!(flat.slope.abs() < 1e-15);
        let line = slope_test(0, &x, &[1.0, 1.5, 2.0, 2.5], &w).unwrap();
        assert!((line.slope - 0.5).abs() < 1e-12);
        assert!(line.p_value < 1e-12);
        let noisy = slope_test(0, &x, &[1.0, 1.4, 0.9, 1.2], &w).unwrap();
        assert!(noisy.p_value > 0.05 && noisy.p_value < 1.0);
        assert!(slope_test(0, &x[..2], &[1.0, 2.0], &w[..2]).is_err());
    }

    #[test]
    fn slope_test_weights_the_rows() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 1.0, 1.0, 1.0, 3.0];
        let even = slope_test(0, &x, &y, &[1.0; 5]).unwrap();
        let light = slope_test(0, &x, &y, &[1.0, 1.0, 1.0, 1.0, 1e-9]).unwrap();
        assert!(even.slope > 0.3);
        assert!(light.slope.abs() < 1e-8);
        let scaled = slope_test(0, &x, &y, &[7.0; 5]).unwrap();
        assert!((scaled.t_stat - even.t_stat).abs() < 1e-12 * even.t_stat.abs());
    }

    #[test]
    fn independence_on_a_constant_triangle() {
        // each accident bin holds the same delay profile, so row factors are equal
        let mut records = Vec::new();
        for r in 0..5 {
            for s in 0..(5 - r) {
                records.push(ClaimRecord::new(
                    r as f64 / 5.0 + 0.01,
                    s as f64 / 5.0 + 0.01,
                    (s + 1) as f64,
                ));
            }
        }
        let d = ClaimDataset::new(records, 1.0).unwrap();
        let rep = independence_diagnostic(&d, 5, 0..1, AggregationMode::Amount).unwrap();
        assert_eq!(rep.tests[0].rows, 3);
        assert!((rep.tests[0].p_value - 1.0).abs() < 1e-9);
        assert!(rep.rejections(0.05).is_empty());
        // the diagonal row is dropped, leaving column 2 with one row
        assert!(independence_diagnostic(&d, 5, 2..3, AggregationMode::Amount).is_err());
    }

    #[test]
    fn multiplicative_curves_overlay() {
        let m1 = |t: f64| 0.5 + t;
        let mut records = Vec::new();
        for q in 0..3 {
            for k in 0..5 {
                let t = 0.05 * k as f64;
                records.push(ClaimRecord::new(0.25 * q as f64 + 0.01, t, m1(t)));
            }
        }
        records.push(ClaimRecord::new(0.8, 0.1, 2.0));
        let d = ClaimDataset::new(records, 1.0).unwrap();
        let rep = multiplicativity_diagnostic(&d, 4, 11).unwrap();
        assert!(rep.sup_distance < 1e-12);
        assert!(rep.curves[3].flagged);
        assert!(!rep.curves[0].flagged);
        assert!(rep.curves[3]
            .normalized
            .iter()
            .all(|v| (*v - 1.0).abs() < 1e-15));
    }
}
