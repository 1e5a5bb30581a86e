//! Bandwidth specifications and leave-one-out cross-validation.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{exposure_floor, Degree};
use crate::error::{Error, Result};
use crate::exposure::Exposure;
use crate::kernel::Kernel;
use crate::model::ClaimDataset;
use crate::moments::{MomentData, MomentEngine, Moments};
use crate::quad::GaussLegendre;
use crate::survival::SurvivalEstimate;

/// Bandwidth `h` on the half-open interval `[start, end)` of natural time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseBand {
    pub start: f64,
    pub end: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum BandwidthSpec {
    /// Cross-validated global bandwidth; `selected` is filled in after selection.
    Cv {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        candidates: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        selected: Option<f64>,
    },
    Fixed {
        h: f64,
    },
    Piecewise {
        bands: Vec<PiecewiseBand>,
    },
}

impl Default for BandwidthSpec {
    fn default() -> Self {
        BandwidthSpec::Cv {
            candidates: None,
            selected: None,
        }
    }
}

impl BandwidthSpec {
    pub fn fixed(h: f64) -> Self {
        BandwidthSpec::Fixed { h }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |h: f64| h.is_finite() && h > 0.0;
        match self {
            BandwidthSpec::Fixed { h } if !positive(*h) => Err(Error::InvalidArgument(format!(
                "bandwidth must be positive, got {h}"
            ))),
            BandwidthSpec::Fixed { .. } => Ok(()),
            BandwidthSpec::Cv {
                candidates,
                selected,
            } => {
                if let Some(c) = candidates {
                    if c.is_empty() || !c.iter().all(|h| positive(*h)) {
                        return Err(Error::InvalidArgument(
                            "candidate bandwidths must be positive and nonempty".into(),
                        ));
                    }
                }
                if let Some(h) = selected {
                    if !positive(*h) {
                        return Err(Error::InvalidArgument(format!(
                            "bandwidth must be positive, got {h}"
                        )));
                    }
                }
                Ok(())
            }
            BandwidthSpec::Piecewise { bands } => {
                if bands.is_empty() {
                    return Err(Error::InvalidArgument(
                        "piecewise bandwidth has no bands".into(),
                    ));
                }
                let mut at = 0.0;
                for b in bands {
                    if !positive(b.h) {
                        return Err(Error::InvalidArgument(format!(
                            "bandwidth must be positive, got {}",
                            b.h
                        )));
                    }
                    if b.start != at || !(b.end > b.start) {
                        return Err(Error::InvalidArgument(format!(
                            "piecewise bands must partition [0, 1]; band [{}, {}) does not continue at {at}",
                            b.start, b.end
                        )));
                    }
                    at = b.end;
                }
                if at != 1.0 {
                    return Err(Error::InvalidArgument(format!(
                        "piecewise bands end at {at}, not 1"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Copy of a CV spec with its selected bandwidth recorded.
    pub fn with_selected(&self, h: f64) -> Self {
        match self {
            BandwidthSpec::Cv { candidates, .. } => BandwidthSpec::Cv {
                candidates: candidates.clone(),
                selected: Some(h),
            },
            other => other.clone(),
        }
    }

    /// Bandwidths in normalized units from values given in original units.
    pub fn rescaled(&self, unit: f64) -> Self {
        match self {
            BandwidthSpec::Fixed { h } => BandwidthSpec::Fixed { h: h / unit },
            BandwidthSpec::Cv {
                candidates,
                selected,
            } => BandwidthSpec::Cv {
                candidates: candidates
                    .as_ref()
                    .map(|c| c.iter().map(|h| h / unit).collect()),
                selected: selected.map(|h| h / unit),
            },
            BandwidthSpec::Piecewise { bands } => BandwidthSpec::Piecewise {
                bands: bands
                    .iter()
                    .map(|b| PiecewiseBand {
                        start: b.start,
                        end: b.end,
                        h: b.h / unit,
                    })
                    .collect(),
            },
        }
    }
}

/// Bandwidth that governs natural-time point `t`.
pub fn resolve_bandwidth(spec: &BandwidthSpec, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("point {t} outside [0, 1]")));
    }
    match spec {
        BandwidthSpec::Fixed { h } => Ok(*h),
        BandwidthSpec::Cv {
            selected: Some(h), ..
        } => Ok(*h),
        BandwidthSpec::Cv { selected: None, .. } => Err(Error::InvalidArgument(
            "cross-validated bandwidth has not been selected yet".into(),
        )),
        BandwidthSpec::Piecewise { bands } => bands
            .iter()
            .find(|b| b.start <= t && t < b.end)
            .or_else(|| bands.iter().find(|b| t == b.end && b.end == 1.0))
            .map(|b| b.h)
            .ok_or_else(|| Error::InvalidArgument(format!("point {t} not covered by any band"))),
    }
}

/// 30 log-spaced candidates on `[2 n^{-4/5}, 0.5]`.
pub fn default_candidates(n: usize) -> Vec<f64> {
    let hi: f64 = 0.5;
    let lo = (2.0 * (n.max(1) as f64).powf(-0.8)).min(hi);
    if lo >= hi {
        return vec![hi];
    }
    let k = 30;
    (0..k)
        .map(|i| {
            if i == k - 1 {
                hi
            } else {
                (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (k - 1) as f64).exp()
            }
        })
        .collect()
}

/// How the integral `∫ f̂² W` in the CV score is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvQuadrature {
    /// `Exact` for small samples, `Uniform` otherwise.
    Auto,
    /// Gauss–Legendre between all breakpoints of the integrand.
    Exact,
    /// Piecewise linear interpolation of `f̂` on a fine uniform grid,
    /// integrated exactly against the exposure.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub kernel: Kernel,
    pub quadrature: CvQuadrature,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            kernel: Kernel::default(),
            quadrature: CvQuadrature::Auto,
        }
    }
}

const EXACT_MAX_N: usize = 200;

/// Components of one cross-validation score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvScore {
    pub h: f64,
    /// `∫ f̂² W`.
    pub fit: f64,
    /// `Σ_i f̂_[i](s_i) Ŝ(s_i-) z_i`.
    pub loo: f64,
    /// `fit - 2 loo`, or `+∞` for a rejected candidate.
    pub score: f64,
    /// Leave-one-out evaluations that were undefined and set to zero.
    pub undefined: usize,
}

fn point_estimate(m: &Moments, degree: Degree, floor: f64) -> Option<f64> {
    match degree {
        Degree::LocalConstant => m.local_constant(floor),
        Degree::LocalLinear => m.local_linear(floor),
    }
}

/// Leave-one-out moments, with values lost to cancellation treated as zero.
fn loo_point(full: &Moments, own: &Moments, degree: Degree, floor: f64) -> Option<f64> {
    let m = full.minus(own);
    let rel = 1e-10;
    if m.a[0] <= (rel * full.a[0]).max(floor) {
        return None;
    }
    if degree == Degree::LocalLinear && m.a[2] <= rel * full.a[2] {
        return None;
    }
    point_estimate(&m, degree, floor).filter(|v| v.is_finite())
}

/// Leave-one-out estimate at `t` without record `i`, keeping the full-data
/// survival weights. Returns `(value, undefined)`.
pub fn loo_estimate(
    dataset: &ClaimDataset,
    survival: &SurvivalEstimate,
    i: usize,
    h: f64,
    degree: Degree,
    t: f64,
) -> Result<(f64, bool)> {
    if i >= dataset.len() {
        return Err(Error::InvalidArgument(format!(
            "record {i} out of range for {} records",
            dataset.len()
        )));
    }
    let engine = MomentEngine::new(dataset, survival, Kernel::default(), h)?;
    let full = engine.at(t);
    let own = engine.own(i, t);
    Ok(
        match loo_point(&full, &own, degree, exposure_floor(dataset)) {
            Some(v) => (v, false),
            None => (0.0, true),
        },
    )
}

/// Cross-validation score `∫ f̂² W - 2 Σ_i f̂_[i](s_i) Ŝ(s_i-) z_i`, where
/// `f̂_[i]` also drops any payment tied with `s_i`.
pub fn cv_score(
    dataset: &ClaimDataset,
    survival: &SurvivalEstimate,
    h: f64,
    degree: Degree,
) -> Result<f64> {
    Ok(cv_score_with(dataset, survival, h, degree, &CvOptions::default())?.score)
}

pub fn cv_score_with(
    dataset: &ClaimDataset,
    survival: &SurvivalEstimate,
    h: f64,
    degree: Degree,
    options: &CvOptions,
) -> Result<CvScore> {
    let data = Arc::new(MomentData::new(dataset, survival)?);
    let floor = exposure_floor(dataset);
    Ok(cv_scores(&data, h, &[degree], floor, options)?[0])
}

/// Scores for several degrees sharing one set of moment evaluations.
fn cv_scores(
    data: &Arc<MomentData>,
    h: f64,
    degrees: &[Degree],
    floor: f64,
    options: &CvOptions,
) -> Result<Vec<CvScore>> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth {h} outside (0, 1]"
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let engine = MomentEngine::from_data(Arc::clone(data), options.kernel, h)?;

    let mut order: Vec<usize> = (0..engine.len())
        .filter(|&i| engine.payment_weight(i) > 0.0)
        .collect();
    order.sort_by(|&a, &b| engine.payment_time(a).total_cmp(&engine.payment_time(b)));
    let mut times: Vec<f64> = order.iter().map(|&i| engine.payment_time(i)).collect();
    times.dedup();
    let at_times = engine.sweep(&times);

    // payments tied at one time are left out together; with distinct times
    // this is ordinary leave-one-out
    let nd = degrees.len();
    let mut loo = vec![0.0; nd];
    let mut defined = vec![0usize; nd];
    let mut undefined = vec![0usize; nd];
    let mut start = 0;
    for (k, &s) in times.iter().enumerate() {
        let end = start + order[start..].partition_point(|&i| engine.payment_time(i) <= s);
        let group = &order[start..end];
        start = end;
        let own = group
            .iter()
            .map(|&i| engine.own(i, s))
            .reduce(|a, b| a.plus(&b))
            .expect("nonempty tie group");
        let weight: f64 = group.iter().map(|&i| engine.payment_weight(i)).sum();
        for (d, &degree) in degrees.iter().enumerate() {
            match loo_point(&at_times[k], &own, degree, floor) {
                Some(v) => {
                    loo[d] += v * weight;
                    defined[d] += group.len();
                }
                None => undefined[d] += group.len(),
            }
        }
    }

    let exact = match options.quadrature {
        CvQuadrature::Exact => true,
        CvQuadrature::Uniform => false,
        CvQuadrature::Auto => data.len() <= EXACT_MAX_N,
    };
    let fits = if exact {
        fit_exact(&engine, degrees, floor)
    } else {
        fit_uniform(&engine, degrees, floor)
    };
    Ok((0..nd)
        .map(|d| {
            let score = fits[d] - 2.0 * loo[d];
            CvScore {
                h,
                fit: fits[d],
                loo: loo[d],
                score: if defined[d] == 0 || !score.is_finite() {
                    f64::INFINITY
                } else {
                    score
                },
                undefined: undefined[d],
            }
        })
        .collect())
}

fn squared_estimate(m: &Moments, degree: Degree, floor: f64) -> f64 {
    point_estimate(m, degree, floor)
        .filter(|v| v.is_finite())
        .map_or(0.0, |v| v * v)
}

fn fit_exact(engine: &MomentEngine, degrees: &[Degree], floor: f64) -> Vec<f64> {
    let h = engine.bandwidth();
    let exposure: &Exposure = engine.exposure();
    let mut cuts = vec![0.0, 1.0];
    for &b in exposure.breaks() {
        cuts.extend([b, b - h, b + h]);
    }
    for i in 0..engine.len() {
        let s = engine.payment_time(i);
        cuts.extend([s - h, s + h]);
    }
    cuts.retain(|x| (0.0..=1.0).contains(x));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let gl = GaussLegendre::new(20);
    let mut totals = vec![0.0; degrees.len()];
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let level = exposure.value_at(0.5 * (a + b));
        if level <= 0.0 {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, wt) in gl.nodes().iter().zip(gl.weights()) {
            let m = engine.at(mid + half * x);
            for (total, &degree) in totals.iter_mut().zip(degrees) {
                *total += level * half * wt * squared_estimate(&m, degree, floor);
            }
        }
    }
    totals
}

fn fit_uniform(engine: &MomentEngine, degrees: &[Degree], floor: f64) -> Vec<f64> {
    let h = engine.bandwidth();
    let cells = ((16.0 / h).ceil() as usize).clamp(2048, 32768);
    let [a, b, c] = engine.exposure().cell_moments(cells);
    let nodes: Vec<f64> = (0..=cells).map(|k| k as f64 / cells as f64).collect();
    let moments = engine.sweep(&nodes);
    degrees
        .iter()
        .map(|&degree| {
            let f: Vec<f64> = moments
                .iter()
                .map(|m| {
                    point_estimate(m, degree, floor)
                        .filter(|v| v.is_finite())
                        .unwrap_or(0.0)
                })
                .collect();
            (0..cells)
                .map(|k| {
                    let f0 = f[k];
                    let d = f[k + 1] - f0;
                    f0 * f0 * a[k] + 2.0 * f0 * d * b[k] + d * d * c[k]
                })
                .sum()
        })
        .collect()
}

/// Result of a bandwidth search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvSelection {
    pub h: f64,
    pub table: Vec<CvScore>,
}

impl CvSelection {
    /// `(h, score)` pairs in increasing `h`.
    pub fn scores(&self) -> Vec<(f64, f64)> {
        self.table.iter().map(|c| (c.h, c.score)).collect()
    }
}

/// Picks the candidate with the smallest score; ties go to the larger `h`.
pub fn pick_minimum(scores: &[(f64, f64)]) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for &(h, q) in scores {
        if !q.is_finite() {
            continue;
        }
        best = match best {
            Some((bh, bq)) if q > bq || (q == bq && h < bh) => Some((bh, bq)),
            _ => Some((h, q)),
        };
    }
    best.map(|b| b.0).ok_or(Error::NoFiniteScore)
}

pub fn select_bandwidth(
    dataset: &ClaimDataset,
    survival: &SurvivalEstimate,
    candidates: &[f64],
    degree: Degree,
) -> Result<CvSelection> {
    select_bandwidth_with(dataset, survival, candidates, degree, &CvOptions::default())
}

pub fn select_bandwidth_with(
    dataset: &ClaimDataset,
    survival: &SurvivalEstimate,
    candidates: &[f64],
    degree: Degree,
    options: &CvOptions,
) -> Result<CvSelection> {
    let mut out = select_bandwidths(dataset, survival, candidates, &[degree], options)?;
    Ok(out.remove(0))
}

/// One selection per degree, evaluating the shared moments once per candidate.
pub fn select_bandwidths(
    dataset: &ClaimDataset,
    survival: &SurvivalEstimate,
    candidates: &[f64],
    degrees: &[Degree],
    options: &CvOptions,
) -> Result<Vec<CvSelection>> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate grid".into()));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let data = Arc::new(MomentData::new(dataset, survival)?);
    let floor = exposure_floor(dataset);
    let rows = sorted
        .par_iter()
        .map(|&h| cv_scores(&data, h, degrees, floor, options))
        .collect::<Result<Vec<_>>>()?;
    (0..degrees.len())
        .map(|d| {
            let table: Vec<CvScore> = rows.iter().map(|r| r[d]).collect();
            let scores: Vec<(f64, f64)> = table.iter().map(|c| (c.h, c.score)).collect();
            Ok(CvSelection {
                h: pick_minimum(&scores)?,
                table,
            })
        })
        .collect()
}
