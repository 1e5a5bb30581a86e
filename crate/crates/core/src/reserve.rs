//! Reserve fraction and cash-flow projections from the two marginal densities.
//!
//! With `f_T` and `f_U` read as piecewise linear interpolants of their grid
//! values (clipped at zero), every region integral reduces to
//! `∫ f_U(u) [F_T(c_b - u) - F_T(c_a - u)] du`, whose integrand is a cubic
//! between consecutive breakpoints. Simpson's rule on those pieces is exact.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthSpec;
use crate::density::{DensityEstimate, Orientation};
use crate::error::{Error, Result};
use crate::model::ClaimDataset;
use crate::triangle::ChainLadderForecast;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    LL,
    LC,
    CL,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::LL => "LL",
            Method::LC => "LC",
            Method::CL => "CL",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LL" => Ok(Method::LL),
            "LC" => Ok(Method::LC),
            "CL" => Ok(Method::CL),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// Bandwidths used for the two margins (in normalized units).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bandwidths {
    pub t: Option<BandwidthSpec>,
    pub u: Option<BandwidthSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReserveReport {
    pub total_paid: f64,
    pub fraction: f64,
    pub reserve: f64,
    /// Outstanding payments per future calendar period.
    pub cashflow_future: Vec<f64>,
    /// Outstanding payments per accident period.
    pub cashflow_accident: Vec<f64>,
    pub method: Method,
    /// Period length in original time units.
    pub period_length: f64,
    pub bandwidths: Bandwidths,
}

impl ReserveReport {
    /// Report for a completed chain-ladder rectangle; periods are the triangle bins.
    pub fn from_chain_ladder(cl: &ChainLadderForecast, total_paid: f64, unit_scale: f64) -> Self {
        let m = cl.cashflow_accident.len();
        Self {
            total_paid,
            fraction: if total_paid > 0.0 {
                cl.reserve / total_paid
            } else {
                0.0
            },
            reserve: cl.reserve,
            cashflow_future: cl.cashflow_future.clone(),
            cashflow_accident: cl.cashflow_accident.clone(),
            method: Method::CL,
            period_length: unit_scale / m as f64,
            bandwidths: Bandwidths { t: None, u: None },
        }
    }
}

/// Piecewise linear density on a grid with its exact antiderivative.
struct Interp<'a> {
    x: &'a [f64],
    f: Vec<f64>,
    cdf: Vec<f64>,
}

impl<'a> Interp<'a> {
    fn new(est: &'a DensityEstimate) -> Self {
        let x = est.grid();
        let f: Vec<f64> = est.values().iter().map(|v| v.max(0.0)).collect();
        let mut cdf = Vec::with_capacity(x.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for k in 1..x.len() {
            acc += 0.5 * (x[k] - x[k - 1]) * (f[k] + f[k - 1]);
            cdf.push(acc);
        }
        Self { x, f, cdf }
    }

    fn total(&self) -> f64 {
        self.cdf[self.cdf.len() - 1]
    }

    fn cell(&self, v: f64) -> usize {
        self.x
            .partition_point(|&p| p <= v)
            .clamp(1, self.x.len() - 1)
            - 1
    }

    fn density(&self, v: f64) -> f64 {
        let n = self.x.len();
        if v < self.x[0] || v > self.x[n - 1] {
            return 0.0;
        }
        let k = self.cell(v);
        let w = (v - self.x[k]) / (self.x[k + 1] - self.x[k]);
        self.f[k] * (1.0 - w) + self.f[k + 1] * w
    }

    fn cdf(&self, v: f64) -> f64 {
        let n = self.x.len();
        if v <= self.x[0] {
            return 0.0;
        }
        if v >= self.x[n - 1] {
            return self.total();
        }
        let k = self.cell(v);
        let dx = self.x[k + 1] - self.x[k];
        let d = v - self.x[k];
        self.cdf[k] + self.f[k] * d + (self.f[k + 1] - self.f[k]) * d * d / (2.0 * dx)
    }
}

fn check_natural(est: &DensityEstimate) -> Result<()> {
    if est.orientation() != Orientation::Natural {
        return Err(Error::InvalidArgument(
            "reserving needs natural-time density estimates".into(),
        ));
    }
    Ok(())
}

/// `∫_{ua}^{ub} f_U(u) [F_T(cb - u) - F_T(ca - u)] du`.
fn band_integral(ft: &Interp, fu: &Interp, ua: f64, ub: f64, ca: f64, cb: f64) -> f64 {
    if ub <= ua {
        return 0.0;
    }
    let mut cuts: Vec<f64> = vec![ua, ub];
    let inside = |v: f64| v > ua && v < ub;
    cuts.extend(fu.x.iter().copied().filter(|&v| inside(v)));
    for c in [ca, cb] {
        cuts.extend(ft.x.iter().map(|&t| c - t).filter(|&v| inside(v)));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let g = |u: f64| fu.density(u) * (ft.cdf(cb - u) - ft.cdf(ca - u));
    cuts.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            (b - a) / 6.0 * (g(a) + 4.0 * g(0.5 * (a + b)) + g(b))
        })
        .sum()
}

/// Observed mass `∬_{t+u<=1} f_T f_U`.
fn observed_mass(ft: &Interp, fu: &Interp) -> f64 {
    band_integral(ft, fu, 0.0, 1.0, -1.0, 1.0)
}

/// `∬_{t+u>1} f_T f_U / ∬_{t+u<=1} f_T f_U` for natural-time estimates, with
/// negative values clipped to zero.
pub fn reserve_fraction(ft: &DensityEstimate, fu: &DensityEstimate) -> Result<f64> {
    check_natural(ft)?;
    check_natural(fu)?;
    let (it, iu) = (Interp::new(ft), Interp::new(fu));
    let den = observed_mass(&it, &iu);
    if !(den > 0.0) {
        return Err(Error::DegenerateDensity(den));
    }
    let num = band_integral(&it, &iu, 0.0, 1.0, 1.0, 2.0);
    Ok(num / den)
}

/// Future mass of the region `u ∈ [ua, ub]`, `t + u ∈ (ca, cb]`, relative to the
/// observed mass; multiply by the total paid to get an amount.
pub fn region_mass(
    ft: &DensityEstimate,
    fu: &DensityEstimate,
    accident: (f64, f64),
    diagonal: (f64, f64),
) -> Result<f64> {
    check_natural(ft)?;
    check_natural(fu)?;
    let (ua, ub) = accident;
    let (ca, cb) = diagonal;
    if !(0.0..=1.0).contains(&ua) || !(0.0..=1.0).contains(&ub) || ua > ub {
        return Err(Error::InvalidArgument(format!(
            "accident band [{ua}, {ub}] not inside [0, 1]"
        )));
    }
    if ca < 1.0 || cb < ca {
        return Err(Error::InvalidArgument(format!(
            "diagonal band ({ca}, {cb}] is outside the future triangle"
        )));
    }
    let (it, iu) = (Interp::new(ft), Interp::new(fu));
    let den = observed_mass(&it, &iu);
    if !(den > 0.0) {
        return Err(Error::DegenerateDensity(den));
    }
    Ok(band_integral(&it, &iu, ua, ub, ca, cb) / den)
}

/// Reserve, fraction and cash flows by future period and accident period.
/// `period` is the cash-flow period length in normalized time.
pub fn reserve_estimate(
    dataset: &ClaimDataset,
    ft: &DensityEstimate,
    fu: &DensityEstimate,
    period: f64,
    method: Method,
) -> Result<ReserveReport> {
    if !dataset.is_normalized() {
        return Err(Error::NotNormalized);
    }
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "period length must be positive, got {period}"
        )));
    }
    check_natural(ft)?;
    check_natural(fu)?;
    let total_paid = dataset.total_amount();
    let periods = ((1.0 / period) - 1e-9).ceil().max(1.0) as usize;
    let bandwidths = Bandwidths {
        t: Some(ft.bandwidth().clone()),
        u: Some(fu.bandwidth().clone()),
    };
    let period_length = period * dataset.unit_scale();
    if total_paid == 0.0 {
        return Ok(ReserveReport {
            total_paid,
            fraction: 0.0,
            reserve: 0.0,
            cashflow_future: vec![0.0; periods],
            cashflow_accident: vec![0.0; periods],
            method,
            period_length,
            bandwidths,
        });
    }
    let (it, iu) = (Interp::new(ft), Interp::new(fu));
    let den = observed_mass(&it, &iu);
    if !(den > 0.0) {
        return Err(Error::DegenerateDensity(den));
    }
    let fraction = band_integral(&it, &iu, 0.0, 1.0, 1.0, 2.0) / den;
    let edge = |k: usize| (k as f64 * period).min(1.0);
    let scale = total_paid / den;
    let cashflow_future = (0..periods)
        .map(|k| scale * band_integral(&it, &iu, 0.0, 1.0, 1.0 + edge(k), 1.0 + edge(k + 1)))
        .collect();
    let cashflow_accident = (0..periods)
        .map(|k| scale * band_integral(&it, &iu, edge(k), edge(k + 1), 1.0, 2.0))
        .collect();
    Ok(ReserveReport {
        total_paid,
        fraction,
        reserve: fraction * total_paid,
        cashflow_future,
        cashflow_accident,
        method,
        period_length,
        bandwidths,
    })
}
