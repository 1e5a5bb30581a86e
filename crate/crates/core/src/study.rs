//! End-to-end pipelines: bandwidth selection, density fits, reserves, and the
//! replicated simulation studies built on them.

use rayon::prelude::*;
use serde::Serialize;

use crate::bandwidth::{
    default_candidates, select_bandwidths, BandwidthSpec, CvOptions, CvQuadrature, CvSelection,
};
use crate::density::{
    estimate_with, reverse_density, uniform_grid, Degree, Denominator, DensityEstimate,
    DensityOptions, Target, DEFAULT_GRID_SIZE,
};
use crate::diagnostics::{mean_sd, median, mse, squared_relative_error};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::model::ClaimDataset;
use crate::reserve::{reserve_fraction, Method};
use crate::sim::micro::{
    micro_snapshot, simulate_micro, valuation_days, MicroConfig, DAYS_PER_MONTH,
};
use crate::sim::rng::derive_seed;
use crate::sim::scenario::{simulate_scenario, ScenarioSpec};
use crate::survival::km_weighted;
use crate::triangle::{aggregate_triangle, chain_ladder_forecast, AggregationMode};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub kernel: Kernel,
    pub grid_points: usize,
    /// Triangle size for chain ladder on scenario data.
    pub triangle_bins: usize,
    pub cv_quadrature: CvQuadrature,
    /// Candidate bandwidths; the default grid for the sample size if absent.
    pub candidates: Option<Vec<f64>>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            kernel: Kernel::default(),
            grid_points: DEFAULT_GRID_SIZE,
            triangle_bins: 20,
            cv_quadrature: CvQuadrature::Auto,
            candidates: None,
        }
    }
}

impl StudyOptions {
    fn cv(&self) -> CvOptions {
        CvOptions {
            kernel: self.kernel,
            quadrature: self.cv_quadrature,
        }
    }

    fn density(&self) -> DensityOptions {
        DensityOptions {
            kernel: self.kernel,
            denominator: Denominator::Exact,
        }
    }
}

/// A natural-time density fit and, for cross-validated bandwidths, the search.
#[derive(Debug, Clone)]
pub struct DensityFit {
    pub estimate: DensityEstimate,
    pub selection: Option<CvSelection>,
}

fn oriented(dataset: &ClaimDataset, target: Target) -> ClaimDataset {
    match target {
        Target::T => dataset.clone(),
        Target::U => dataset.swapped(),
    }
}

/// Fits the density of `target` at each degree with the bandwidth `spec`.
/// An unselected CV spec is resolved by one shared search over its
/// candidates (or the default grid).
pub fn fit_densities(
    dataset: &ClaimDataset,
    target: Target,
    degrees: &[Degree],
    spec: &BandwidthSpec,
    options: &StudyOptions,
) -> Result<Vec<DensityFit>> {
    spec.validate()?;
    if !dataset.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let data = oriented(dataset, target);
    let survival = km_weighted(&data)?;
    let grid = uniform_grid(options.grid_points);
    let selections: Vec<Option<CvSelection>> = match spec {
        BandwidthSpec::Cv {
            candidates,
            selected: None,
        } => {
            let cands = candidates
                .clone()
                .or_else(|| options.candidates.clone())
                .unwrap_or_else(|| default_candidates(data.len()));
            select_bandwidths(&data, &survival, &cands, degrees, &options.cv())?
                .into_iter()
                .map(Some)
                .collect()
        }
        _ => vec![None; degrees.len()],
    };
    degrees
        .iter()
        .zip(selections)
        .map(|(&degree, selection)| {
            let used = match &selection {
                Some(sel) => spec.with_selected(sel.h),
                None => spec.clone(),
            };
            let rev = estimate_with(
                &data,
                &survival,
                &used,
                &grid,
                degree,
                &options.density(),
                target,
            )?;
            Ok(DensityFit {
                estimate: reverse_density(&rev),
                selection,
            })
        })
        .collect()
}

/// Reserve fraction from a chain ladder on an `m x m` amount triangle.
pub fn chain_ladder_fraction(dataset: &ClaimDataset, m: usize) -> Result<f64> {
    let tri = aggregate_triangle(dataset, m, AggregationMode::Amount)?;
    let cl = chain_ladder_forecast(&tri)?;
    let paid = dataset.total_amount();
    if !(paid > 0.0) {
        return Err(Error::NoPositiveAmount);
    }
    Ok(cl.reserve / paid)
}

/// Reserve fractions of the requested methods, each `None` when its
/// estimator breaks down. Kernel methods use cross-validated bandwidths.
pub fn reserve_fractions(
    dataset: &ClaimDataset,
    methods: &[Method],
    triangle_bins: usize,
    options: &StudyOptions,
) -> Vec<(Method, Option<f64>)> {
    let degrees: Vec<Degree> = methods
        .iter()
        .filter_map(|m| match m {
            Method::LL => Some(Degree::LocalLinear),
            Method::LC => Some(Degree::LocalConstant),
            Method::CL => None,
        })
        .collect();
    let kernel = if degrees.is_empty() {
        None
    } else {
        let spec = BandwidthSpec::default();
        let ft = fit_densities(dataset, Target::T, &degrees, &spec, options);
        let fu = fit_densities(dataset, Target::U, &degrees, &spec, options);
        Some((ft, fu))
    };
    methods
        .iter()
        .map(|&method| {
            let value = match method {
                Method::CL => chain_ladder_fraction(dataset, triangle_bins).ok(),
                _ => {
                    let degree = if method == Method::LL {
                        Degree::LocalLinear
                    } else {
                        Degree::LocalConstant
                    };
                    let k = degrees
                        .iter()
                        .position(|d| *d == degree)
                        .expect("degree listed");
                    match &kernel {
                        Some((Ok(ft), Ok(fu))) => {
                            reserve_fraction(&ft[k].estimate, &fu[k].estimate).ok()
                        }
                        _ => None,
                    }
                }
            };
            (method, value.filter(|v| v.is_finite()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRecord {
    pub scenario: u8,
    pub n: usize,
    pub method: Method,
    pub run: usize,
    /// `None` marks an invalid estimate.
    pub err2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchSummary {
    pub scenario: u8,
    pub n: usize,
    pub method: Method,
    pub median: f64,
    pub mean: f64,
    pub sd: f64,
    pub invalid_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub records: Vec<BenchRecord>,
}

impl BenchResult {
    /// Statistics of the valid err² values per `(scenario, n, method)`, in
    /// order of first appearance.
    pub fn summaries(&self) -> Vec<BenchSummary> {
        let mut keys: Vec<(u8, usize, Method)> = Vec::new();
        for r in &self.records {
            let key = (r.scenario, r.n, r.method);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys.into_iter()
            .map(|(scenario, n, method)| {
                let cell: Vec<&BenchRecord> = self
                    .records
                    .iter()
                    .filter(|r| r.scenario == scenario && r.n == n && r.method == method)
                    .collect();
                let valid: Vec<f64> = cell.iter().filter_map(|r| r.err2).collect();
                let (mean, sd) = mean_sd(&valid);
                BenchSummary {
                    scenario,
                    n,
                    method,
                    median: median(&valid),
                    mean,
                    sd,
                    invalid_count: cell.len() - valid.len(),
                }
            })
            .collect()
    }

    pub fn summary(&self, scenario: u8, n: usize, method: Method) -> Option<BenchSummary> {
        self.summaries()
            .into_iter()
            .find(|s| s.scenario == scenario && s.n == n && s.method == method)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPlan {
    pub scenarios: Vec<u8>,
    pub sizes: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub options: StudyOptions,
}

/// Seed of run `run` in cell `(scenario, n)`.
pub fn run_seed(root: u64, scenario: u8, n: usize, run: usize) -> u64 {
    derive_seed(root, &[u64::from(scenario), n as u64, run as u64])
}

/// err² of every method for one simulated run.
pub fn scenario_run(
    scenario: u8,
    n: usize,
    run: usize,
    plan: &ScenarioPlan,
) -> Result<Vec<BenchRecord>> {
    let spec = ScenarioSpec::numbered(scenario, n, run_seed(plan.seed, scenario, n, run))?;
    let sample = simulate_scenario(&spec)?;
    let truth = sample.truth.reserve_fraction();
    let fractions = reserve_fractions(
        &sample.dataset,
        &plan.methods,
        plan.options.triangle_bins,
        &plan.options,
    );
    fractions
        .into_iter()
        .map(|(method, f)| {
            let err2 = match f {
                Some(f) => Some(squared_relative_error(f, truth)?),
                None => None,
            };
            Ok(BenchRecord {
                scenario,
                n,
                method,
                run,
                err2,
            })
        })
        .collect()
}

/// Runs every `(scenario, n, run)` job in parallel and returns the records
/// in plan order.
pub fn run_scenario_bench(plan: &ScenarioPlan) -> Result<BenchResult> {
    if plan.methods.is_empty() || plan.runs == 0 {
        return Err(Error::InvalidArgument(
            "bench needs methods and runs".into(),
        ));
    }
    let jobs: Vec<(u8, usize, usize)> = plan
        .scenarios
        .iter()
        .flat_map(|&s| {
            plan.sizes
                .iter()
                .flat_map(move |&n| (0..plan.runs).map(move |r| (s, n, r)))
        })
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(s, n, r)| scenario_run(s, n, r, plan))
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<BenchRecord> = per_job.into_iter().flatten().collect();
    // method-major within a cell so per-cell rows are contiguous
    records.sort_by_key(|r| {
        (
            plan.scenarios.iter().position(|&s| s == r.scenario),
            plan.sizes.iter().position(|&n| n == r.n),
            plan.methods.iter().position(|&m| m == r.method),
            r.run,
        )
    });
    Ok(BenchResult { records })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MicroRecord {
    pub run: usize,
    pub valuation_day: u32,
    pub method: Method,
    /// `None` marks an invalid estimate.
    pub estimate: Option<f64>,
    pub truth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseRow {
    pub valuation_day: u32,
    pub method: Method,
    pub mse: f64,
    pub mean_estimate: f64,
    pub median_truth: f64,
    pub invalid_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MicroBenchResult {
    pub records: Vec<MicroRecord>,
    /// Policies written in each run.
    pub policy_counts: Vec<usize>,
}

impl MicroBenchResult {
    /// MSE over runs with a valid estimate, per valuation day and method.
    pub fn mse_series(&self) -> Vec<MseRow> {
        let mut keys: Vec<(u32, Method)> = Vec::new();
        for r in &self.records {
            if !keys.contains(&(r.valuation_day, r.method)) {
                keys.push((r.valuation_day, r.method));
            }
        }
        keys.into_iter()
            .map(|(day, method)| {
                let cell: Vec<&MicroRecord> = self
                    .records
                    .iter()
                    .filter(|r| r.valuation_day == day && r.method == method)
                    .collect();
                let valid: Vec<(f64, f64)> = cell
                    .iter()
                    .filter_map(|r| r.estimate.map(|e| (e, r.truth)))
                    .collect();
                let (est, truth): (Vec<f64>, Vec<f64>) = valid.iter().copied().unzip();
                let truths: Vec<f64> = cell.iter().map(|r| r.truth).collect();
                MseRow {
                    valuation_day: day,
                    method,
                    mse: mse(&est, &truth).unwrap_or(f64::NAN),
                    mean_estimate: mean_sd(&est).0,
                    median_truth: median(&truths),
                    invalid_count: cell.len() - valid.len(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroPlan {
    pub runs: usize,
    pub seed: u64,
    pub config: MicroConfig,
    pub methods: Vec<Method>,
    pub valuation_days: Vec<u32>,
    pub options: StudyOptions,
}

impl MicroPlan {
    pub fn new(runs: usize, seed: u64) -> Self {
        Self {
            runs,
            seed,
            config: MicroConfig::default(),
            methods: vec![Method::LL, Method::LC, Method::CL],
            valuation_days: valuation_days(),
            options: StudyOptions::default(),
        }
    }
}

/// Reserve estimates at every valuation day of every run. Chain ladder uses
/// monthly bins, one per elapsed month.
pub fn run_micro_bench(plan: &MicroPlan) -> Result<MicroBenchResult> {
    if plan.runs == 0 || plan.methods.is_empty() {
        return Err(Error::InvalidArgument(
            "bench needs methods and runs".into(),
        ));
    }
    let mut records = Vec::new();
    let mut policy_counts = Vec::new();
    for run in 0..plan.runs {
        let log = simulate_micro(derive_seed(plan.seed, &[run as u64]), &plan.config)?;
        policy_counts.push(log.policies.len());
        let per_day = plan
            .valuation_days
            .par_iter()
            .map(|&day| {
                let snap = micro_snapshot(&log, day)?;
                let months = (day / DAYS_PER_MONTH).max(2) as usize;
                let paid = snap.dataset.total_amount();
                let fractions =
                    reserve_fractions(&snap.dataset, &plan.methods, months, &plan.options);
                Ok(fractions
                    .into_iter()
                    .map(|(method, f)| MicroRecord {
                        run,
                        valuation_day: day,
                        method,
                        estimate: f.map(|f| f * paid),
                        truth: snap.outstanding,
                    })
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        records.extend(per_day.into_iter().flatten());
    }
    Ok(MicroBenchResult {
        records,
        policy_counts,
    })
}
