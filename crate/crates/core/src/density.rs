//! Local constant and local linear estimators of the cost-weighted delay
//! density, computed in reversed time and mirrored back.

use serde::{Deserialize, Serialize};

use crate::bandwidth::{resolve_bandwidth, BandwidthSpec};
use crate::error::{Error, Result};
use crate::exposure::Exposure;
use crate::kernel::Kernel;
use crate::model::ClaimDataset;
use crate::moments::{MomentEngine, Moments};
use crate::survival::{km_weighted, SurvivalEstimate};

pub const DEFAULT_GRID_SIZE: usize = 1000;

/// Polynomial degree of the local fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Degree {
    #[serde(rename = "lc")]
    LocalConstant,
    #[serde(rename = "ll")]
    LocalLinear,
}

impl Degree {
    pub fn order(self) -> usize {
        match self {
            Degree::LocalConstant => 0,
            Degree::LocalLinear => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Reversed,
    Natural,
}

/// Which margin a density estimate describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    T,
    U,
}

/// How the denominator integrals `a_j` are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Denominator {
    /// Closed-form integration against the piecewise constant exposure.
    Exact,
    /// Composite Simpson rule with this many subintervals over the kernel window.
    Quadrature { cells: usize },
}

impl Default for Denominator {
    fn default() -> Self {
        Denominator::Exact
    }
}

/// Density values on a grid of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEstimate {
    grid: Vec<f64>,
    values: Vec<f64>,
    degree: Degree,
    bandwidth: BandwidthSpec,
    orientation: Orientation,
    target: Target,
    flagged: Vec<usize>,
}

impl DensityEstimate {
    /// Estimate from raw parts; used for reference densities and imports.
    pub fn from_values(
        grid: Vec<f64>,
        values: Vec<f64>,
        degree: Degree,
        bandwidth: BandwidthSpec,
        orientation: Orientation,
        target: Target,
    ) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::LengthMismatch(grid.len(), values.len()));
        }
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "grid must have at least two strictly increasing points".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "density values must be finite".into(),
            ));
        }
        Ok(Self {
            grid,
            values,
            degree,
            bandwidth,
            orientation,
            target,
            flagged: Vec::new(),
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    pub fn bandwidth(&self) -> &BandwidthSpec {
        &self.bandwidth
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn target(&self) -> Target {
        self.target
    }

    /// Grid indices where the estimator was undefined and set to zero.
    pub fn flagged(&self) -> &[usize] {
        &self.flagged
    }

    /// Linear interpolation between grid points; zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x < g[0] || x > g[g.len() - 1] {
            return 0.0;
        }
        let k = g.partition_point(|&p| p <= x).clamp(1, g.len() - 1);
        let (x0, x1) = (g[k - 1], g[k]);
        let w = (x - x0) / (x1 - x0);
        self.values[k - 1] * (1.0 - w) + self.values[k] * w
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
            .sum()
    }

    /// Same estimate with every value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `(x, value)` rows for export.
    pub fn rows(&self) -> Vec<(f64, f64)> {
        self.grid
            .iter()
            .copied()
            .zip(self.values.iter().copied())
            .collect()
    }
}

/// `G` equally spaced points `k / (G - 1)` on `[0, 1]`.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    assert!(points >= 2, "grid needs at least two points");
    let last = (points - 1) as f64;
    (0..points).map(|k| k as f64 / last).collect()
}

/// `a_j(t) = ∫ K_h(t - s) (t - s)^j W(s) ds` by an exact sweep over the records.
pub fn aj_moment(dataset: &ClaimDataset, t: f64, h: f64, j: usize, kernel: &Kernel) -> Result<f64> {
    if j > 2 {
        return Err(Error::InvalidArgument(format!(
            "moment order {j} not in 0..=2"
        )));
    }
    check_bandwidth(h)?;
    let scale = h.powi(j as i32);
    Ok(dataset
        .records()
        .iter()
        .map(|r| {
            let entry = (t - r.accident) / h;
            let exit = (t - (dataset.horizon() - r.delay)) / h;
            r.amount * (kernel.partial_moment(j, entry) - kernel.partial_moment(j, exit))
        })
        .sum::<f64>()
        * scale)
}

/// `G_j(t) = Σ_i K_h(t - s_i) (t - s_i)^j Ŝ(s_i-) z_i`.
pub fn g_moment(
    dataset: &ClaimDataset,
    survival: &SurvivalEstimate,
    t: f64,
    h: f64,
    j: usize,
    kernel: &Kernel,
) -> Result<f64> {
    if j > 1 {
        return Err(Error::InvalidArgument(format!(
            "moment order {j} not in 0..=1"
        )));
    }
    check_bandwidth(h)?;
    Ok(dataset
        .records()
        .iter()
        .map(|r| {
            let s = dataset.horizon() - r.delay;
            kernel.eval_h(t - s, h) * (t - s).powi(j as i32) * survival.left_limit(s) * r.amount
        })
        .sum())
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {h}"
        )))
    }
}

/// Numerical tolerance below which `a_0` counts as zero.
pub(crate) fn exposure_floor(dataset: &ClaimDataset) -> f64 {
    1e-12 * dataset.total_amount()
}

/// Options shared by the density estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityOptions {
    pub kernel: Kernel,
    pub denominator: Denominator,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            kernel: Kernel::default(),
            denominator: Denominator::Exact,
        }
    }
}

fn quadrature_a(exposure: &Exposure, kernel: &Kernel, t: f64, h: f64, cells: usize) -> [f64; 3] {
    let n = cells.max(2).next_multiple_of(2);
    let dx = 2.0 * h / n as f64;
    let mut a = [0.0; 3];
    for k in 0..=n {
        let x = t - h + k as f64 * dx;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let d = t - x;
        let f = w * kernel.eval_h(d, h) * exposure.value_at(x);
        a[0] += f;
        a[1] += f * d;
        a[2] += f * d * d;
    }
    a.map(|v| v * dx / 3.0)
}

/// Reversed-time estimate at `points` with one bandwidth per point.
fn estimate_reversed(
    dataset: &ClaimDataset,
    survival: &SurvivalEstimate,
    bandwidths: &[f64],
    points: &[f64],
    degree: Degree,
    options: &DensityOptions,
) -> Result<(Vec<f64>, Vec<usize>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for &h in bandwidths {
        check_bandwidth(h)?;
    }
    let floor = exposure_floor(dataset);
    let mut values = vec![0.0; points.len()];
    let mut flagged = Vec::new();
    let mut distinct: Vec<f64> = bandwidths.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let exposure = match options.denominator {
        Denominator::Exact => None,
        Denominator::Quadrature { .. } => Some(Exposure::from_dataset(dataset)),
    };
    for h in distinct {
        let engine = MomentEngine::new(dataset, survival, options.kernel, h)?;
        for (k, &t) in points.iter().enumerate() {
            if bandwidths[k] != h {
                continue;
            }
            let mut m = engine.at(t);
            if let (Some(e), Denominator::Quadrature { cells }) = (&exposure, options.denominator) {
                m = Moments {
                    a: quadrature_a(e, &options.kernel, t, h, cells),
                    g: m.g,
                };
            }
            let v = match degree {
                Degree::LocalConstant => m.local_constant(floor),
                Degree::LocalLinear => m.local_linear(floor),
            };
            match v {
                Some(v) if v.is_finite() => values[k] = v,
                _ => flagged.push(k),
            }
        }
    }
    flagged.sort_unstable();
    Ok((values, flagged))
}

/// Local constant estimate `G_0 / a_0` in reversed time.
pub fn local_constant(
    dataset: &ClaimDataset,
    survival: &SurvivalEstimate,
    h: f64,
    grid: &[f64],
) -> Result<DensityEstimate> {
    estimate_with(
        dataset,
        survival,
        &BandwidthSpec::fixed(h),
        grid,
        Degree::LocalConstant,
        &DensityOptions::default(),
        Target::T,
    )
}

/// Local linear estimate in reversed time.
pub fn local_linear(
    dataset: &ClaimDataset,
    survival: &SurvivalEstimate,
    h: f64,
    grid: &[f64],
) -> Result<DensityEstimate> {
    estimate_with(
        dataset,
        survival,
        &BandwidthSpec::fixed(h),
        grid,
        Degree::LocalLinear,
        &DensityOptions::default(),
        Target::T,
    )
}

/// Reversed-time estimate with a resolved bandwidth specification. Piecewise
/// bandwidths are looked up at the natural-time point `1 - s`.
pub fn estimate_with(
    dataset: &ClaimDataset,
    survival: &SurvivalEstimate,
    bandwidth: &BandwidthSpec,
    grid: &[f64],
    degree: Degree,
    options: &DensityOptions,
    target: Target,
) -> Result<DensityEstimate> {
    if !dataset.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let hs = grid
        .iter()
        .map(|&s| resolve_bandwidth(bandwidth, (1.0 - s).clamp(0.0, 1.0)))
        .collect::<Result<Vec<f64>>>()?;
    let (values, flagged) = estimate_reversed(dataset, survival, &hs, grid, degree, options)?;
    if degree == Degree::LocalLinear && flagged.len() == grid.len() {
        return Err(Error::AllSingular);
    }
    let mut est = DensityEstimate::from_values(
        grid.to_vec(),
        values,
        degree,
        bandwidth.clone(),
        Orientation::Reversed,
        target,
    )?;
    est.flagged = flagged;
    Ok(est)
}

/// Mirrors an estimate about `1/2`, switching between reversed and natural time.
pub fn reverse_density(est: &DensityEstimate) -> DensityEstimate {
    let g = &est.grid;
    let n = g.len();
    let symmetric = (0..n).all(|k| (g[k] + g[n - 1 - k] - 1.0).abs() < 1e-12);
    let grid = if symmetric {
        g.clone()
    } else {
        g.iter().rev().map(|x| 1.0 - x).collect()
    };
    let values = est.values.iter().rev().copied().collect();
    let mut flagged: Vec<usize> = est.flagged.iter().map(|k| n - 1 - k).collect();
    flagged.sort_unstable();
    DensityEstimate {
        grid,
        values,
        degree: est.degree,
        bandwidth: est.bandwidth.clone(),
        orientation: match est.orientation {
            Orientation::Reversed => Orientation::Natural,
            Orientation::Natural => Orientation::Reversed,
        },
        target: est.target,
        flagged,
    }
}

/// Natural-time estimate of the delay density `f_T`.
pub fn estimate_for_t(
    dataset: &ClaimDataset,
    bandwidth: &BandwidthSpec,
    grid: &[f64],
    degree: Degree,
    options: &DensityOptions,
) -> Result<DensityEstimate> {
    let survival = km_weighted(dataset)?;
    let rev = estimate_with(
        dataset,
        &survival,
        bandwidth,
        grid,
        degree,
        options,
        Target::T,
    )?;
    Ok(reverse_density(&rev))
}

/// Natural-time estimate of the accident density `f_U`, obtained by running the
/// delay estimator on the swapped data.
pub fn estimate_for_u(
    dataset: &ClaimDataset,
    bandwidth: &BandwidthSpec,
    grid: &[f64],
    degree: Degree,
    options: &DensityOptions,
) -> Result<DensityEstimate> {
    let swapped = dataset.swapped();
    let survival = km_weighted(&swapped)?;
    let rev = estimate_with(
        &swapped,
        &survival,
        bandwidth,
        grid,
        degree,
        options,
        Target::U,
    )?;
    Ok(reverse_density(&rev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClaimRecord;

    fn dataset(rows: &[(f64, f64, f64)]) -> ClaimDataset {
        ClaimDataset::new(
            rows.iter()
                .map(|&(u, t, z)| ClaimRecord::new(u, t, z))
                .collect(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn single_claim_local_constant() {
        let d = dataset(&[(0.0, 0.5, 3.0)]);
        let s = km_weighted(&d).unwrap();
        let est = local_constant(&d, &s, 0.1, &[0.5, 0.9]).unwrap();
        assert!((est.values()[0] - 15.0).abs() < 1e-12);
        assert_eq!(est.values()[1], 0.0);
    }

    #[test]
    fn single_claim_moments() {
        let d = dataset(&[(0.0, 0.5, 3.0)]);
        let s = km_weighted(&d).unwrap();
        let k = Kernel::default();
        assert!((g_moment(&d, &s, 0.5, 0.1, 0, &k).unwrap() - 7.5 * 3.0).abs() < 1e-12);
        assert_eq!(g_moment(&d, &s, 0.5, 0.1, 1, &k).unwrap(), 0.0);
        assert!((aj_moment(&d, 0.5, 0.1, 0, &k).unwrap() - 1.5).abs() < 1e-12);
        assert!(aj_moment(&d, 0.5, 0.1, 3, &k).is_err());
        assert!(aj_moment(&d, 0.5, 0.0, 0, &k).is_err());
    }

    #[test]
    fn reversal_round_trip() {
        let grid = uniform_grid(11);
        let values: Vec<f64> = grid.iter().map(|x| x * x).collect();
        let est = DensityEstimate::from_values(
            grid.clone(),
            values,
            Degree::LocalConstant,
            BandwidthSpec::fixed(0.1),
            Orientation::Reversed,
            Target::T,
        )
        .unwrap();
        let nat = reverse_density(&est);
        assert_eq!(nat.orientation(), Orientation::Natural);
        assert!((nat.value_at(0.7) - est.value_at(0.3)).abs() < 1e-12);
        assert_eq!(reverse_density(&nat), est);
    }

    #[test]
    fn quadrature_denominator_tracks_exact() {
        let d = dataset(&[(0.0, 0.5, 3.0), (0.2, 0.1, 1.0), (0.4, 0.3, 2.0)]);
        let s = km_weighted(&d).unwrap();
        let grid = uniform_grid(21);
        let exact = estimate_with(
            &d,
            &s,
            &BandwidthSpec::fixed(0.2),
            &grid,
            Degree::LocalConstant,
            &DensityOptions::default(),
            Target::T,
        )
        .unwrap();
        let quad = estimate_with(
            &d,
            &s,
            &BandwidthSpec::fixed(0.2),
            &grid,
            Degree::LocalConstant,
            &DensityOptions {
                denominator: Denominator::Quadrature { cells: 2048 },
                ..Default::default()
            },
            Target::T,
        )
        .unwrap();
        for (a, b) in exact.values().iter().zip(quad.values()) {
            assert!((a - b).abs() < 1e-3 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }
}
