//! Subcommand pipelines. Each returns its files in memory so nothing is
//! written unless the whole run succeeds.

use anyhow::{Context, Result};
use ccl_core::diagnostics::{independence_diagnostic, multiplicativity_diagnostic};
use ccl_core::reserve::{reserve_estimate, Method, ReserveReport};
use ccl_core::sim::{
    simulate_micro, simulate_scenario, true_reserve_fraction, valuation_days, MicroEventLog,
    ScenarioSpec,
};
use ccl_core::study::{
    fit_densities, run_micro_bench, run_scenario_bench, DensityFit, MicroPlan, ScenarioPlan,
    StudyOptions,
};
use ccl_core::{
    aggregate_triangle, chain_ladder_forecast, cv_score_with, km_weighted, row_dev_factors,
    AggregationMode, BandwidthSpec, ClaimDataset, CvOptions, Degree, Kernel, Target,
};
use serde::Serialize;

use crate::config::{BenchConfig, Command, RunConfig, SimulateConfig};
use crate::ingest::ingest_claims;
use crate::output::{json_file, OutputFile, Table};

pub fn run(command: Command, config: &RunConfig) -> Result<Vec<OutputFile>> {
    config.validate(command).context("invalid config")?;
    match command {
        Command::Estimate => run_estimate(config),
        Command::Reserve => run_reserve(config),
        Command::Simulate => run_simulate(config),
        Command::Bench => run_bench(config),
        Command::Diagnose => run_diagnose(config),
    }
}

fn load(config: &RunConfig) -> Result<ClaimDataset> {
    let data = config.data()?;
    ingest_claims(&data.path, data.schema, data.horizon, data.origin).context("stage `ingest`")
}

fn study_options(config: &RunConfig) -> StudyOptions {
    StudyOptions {
        kernel: Kernel::new(config.estimate.kernel),
        grid_points: config.estimate.grid_points,
        triangle_bins: config.estimate.triangle_bins,
        ..StudyOptions::default()
    }
}

fn degree(method: Method) -> Option<Degree> {
    match method {
        Method::LL => Some(Degree::LocalLinear),
        Method::LC => Some(Degree::LocalConstant),
        Method::CL => None,
    }
}

enum Fitted {
    Kernel { ft: DensityFit, fu: DensityFit },
    ChainLadder(ccl_core::ChainLadderForecast),
}

/// Estimation stage shared by `estimate` and `reserve`.
fn estimate_stage(config: &RunConfig, data: &ClaimDataset) -> Result<(Fitted, Vec<OutputFile>)> {
    let unit = data.unit_scale();
    let e = &config.estimate;
    let Some(degree) = degree(e.method) else {
        let tri = aggregate_triangle(data, e.triangle_bins, AggregationMode::Amount)
            .context("stage `triangle`")?;
        let cl = chain_ladder_forecast(&tri).context("stage `chain ladder`")?;
        let mut t = Table::new(&["row", "col", "value"]);
        for (r, c, v) in tri.cells() {
            t.row(&[r.into(), c.into(), v.into()]);
        }
        let mut rect = Table::new(&["row", "col", "incremental", "cumulative"]);
        for (r, row) in cl.cumulative.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                rect.row(&[r.into(), c.into(), cl.incremental[r][c].into(), (*v).into()]);
            }
        }
        let mut factors = Table::new(&["col", "factor"]);
        for (c, f) in cl.factors.iter().enumerate() {
            factors.row(&[c.into(), (*f).into()]);
        }
        let files = vec![
            t.into_file("triangle.csv"),
            rect.into_file("rectangle.csv"),
            factors.into_file("factors.csv"),
        ];
        return Ok((Fitted::ChainLadder(cl), files));
    };

    let options = study_options(config);
    let fit = |target: Target, spec: &BandwidthSpec, stage: &'static str| -> Result<DensityFit> {
        let spec = spec.rescaled(unit);
        let mut fits = fit_densities(data, target, &[degree], &spec, &options).context(stage)?;
        Ok(fits.remove(0))
    };
    let ft = fit(Target::T, &e.bandwidth_t, "stage `density T`")?;
    let fu = fit(Target::U, &e.bandwidth_u, "stage `density U`")?;

    let density_csv = |fit: &DensityFit, name: &str| {
        let mut t = Table::new(&["t", "value"]);
        for (x, v) in fit.estimate.rows() {
            t.row(&[(x * unit).into(), (v / unit).into()]);
        }
        t.into_file(name)
    };
    let survival = km_weighted(data).context("stage `survival`")?;
    let mut s = Table::new(&["s", "survival"]);
    for (x, v) in survival.rows() {
        s.row(&[(x * unit).into(), v.into()]);
    }

    let mut scores = Table::new(&[
        "target",
        "h",
        "fit",
        "loo",
        "score",
        "undefined",
        "selected",
    ]);
    let cv = CvOptions {
        kernel: options.kernel,
        ..CvOptions::default()
    };
    let spec_of = |target: &str| {
        if target == "T" {
            &e.bandwidth_t
        } else {
            &e.bandwidth_u
        }
    };
    for (fit, target, rows) in [(&ft, "T", data.clone()), (&fu, "U", data.swapped())] {
        let table = match (&fit.selection, fit.estimate.bandwidth()) {
            (Some(sel), _) => sel.table.iter().map(|c| (*c, c.h == sel.h)).collect(),
            (
                None,
                BandwidthSpec::Fixed { h }
                | BandwidthSpec::Cv {
                    selected: Some(h), ..
                },
            ) => {
                let km = km_weighted(&rows).context("stage `survival`")?;
                let c = cv_score_with(&rows, &km, *h, degree, &cv).context("stage `cv score`")?;
                vec![(c, true)]
            }
            (None, _) => Vec::new(),
        };
        for (c, chosen) in table {
            scores.row(&[
                target.into(),
                original_h(c.h, spec_of(target), unit).into(),
                c.fit.into(),
                c.loo.into(),
                c.score.into(),
                c.undefined.into(),
                usize::from(chosen).into(),
            ]);
        }
    }
    let files = vec![
        density_csv(&ft, "density_t.csv"),
        density_csv(&fu, "density_u.csv"),
        s.into_file("survival.csv"),
        scores.into_file("cv_scores.csv"),
    ];
    Ok((Fitted::Kernel { ft, fu }, files))
}

/// A normalized bandwidth in data units, reusing the configured value when
/// `h` came from one so that it prints exactly as written.
fn original_h(h: f64, configured: &BandwidthSpec, unit: f64) -> f64 {
    let values: Vec<f64> = match configured {
        BandwidthSpec::Fixed { h } => vec![*h],
        BandwidthSpec::Cv {
            candidates,
            selected,
        } => candidates
            .iter()
            .flatten()
            .chain(selected)
            .copied()
            .collect(),
        BandwidthSpec::Piecewise { bands } => bands.iter().map(|b| b.h).collect(),
    };
    values
        .into_iter()
        .find(|v| v / unit == h)
        .unwrap_or(h * unit)
}

fn original_spec(fitted: &BandwidthSpec, configured: &BandwidthSpec, unit: f64) -> BandwidthSpec {
    match (fitted, configured) {
        (
            BandwidthSpec::Cv {
                selected: Some(h), ..
            },
            BandwidthSpec::Cv { candidates, .. },
        ) => BandwidthSpec::Cv {
            candidates: candidates.clone(),
            selected: Some(original_h(*h, configured, unit)),
        },
        _ => configured.clone(),
    }
}

pub fn run_estimate(config: &RunConfig) -> Result<Vec<OutputFile>> {
    let data = load(config)?;
    Ok(estimate_stage(config, &data)?.1)
}

pub fn run_reserve(config: &RunConfig) -> Result<Vec<OutputFile>> {
    let data = load(config)?;
    let unit = data.unit_scale();
    let (fitted, mut files) = estimate_stage(config, &data)?;
    let mut report = match fitted {
        Fitted::ChainLadder(cl) => ReserveReport::from_chain_ladder(&cl, data.total_amount(), unit),
        Fitted::Kernel { ft, fu } => {
            let period = config.estimate.period.map_or(0.1, |p| p / unit);
            reserve_estimate(
                &data,
                &ft.estimate,
                &fu.estimate,
                period,
                config.estimate.method,
            )
            .context("stage `reserve`")?
        }
    };
    let e = &config.estimate;
    report.bandwidths.t = report
        .bandwidths
        .t
        .map(|b| original_spec(&b, &e.bandwidth_t, unit));
    report.bandwidths.u = report
        .bandwidths
        .u
        .map(|b| original_spec(&b, &e.bandwidth_u, unit));
    if let Some(p) = e.period.filter(|_| report.method != Method::CL) {
        report.period_length = p;
    }
    for (name, flows) in [
        ("cashflow_future.csv", &report.cashflow_future),
        ("cashflow_accident.csv", &report.cashflow_accident),
    ] {
        let mut t = Table::new(&["period", "start", "amount"]);
        for (k, v) in flows.iter().enumerate() {
            t.row(&[
                (k + 1).into(),
                (k as f64 * report.period_length).into(),
                (*v).into(),
            ]);
        }
        files.push(t.into_file(name));
    }
    files.push(json_file("reserve.json", &report)?);
    Ok(files)
}

#[derive(Serialize)]
struct ScenarioTruthFile {
    scenario: u8,
    n: usize,
    seed: u64,
    attempts: u64,
    reserve_fraction: f64,
    total_paid: f64,
    reserve: f64,
}

#[derive(Serialize)]
struct MicroSummaryFile {
    seed: u64,
    policies: usize,
    claims: usize,
    valuation_day: Option<u32>,
    outstanding: Option<f64>,
}

pub fn run_simulate(config: &RunConfig) -> Result<Vec<OutputFile>> {
    match config
        .simulate
        .as_ref()
        .context("config has no [simulate] section")?
    {
        SimulateConfig::Scenario { scenario, n } => {
            let spec = ScenarioSpec::numbered(*scenario, *n, config.seed)?;
            let sample = simulate_scenario(&spec).context("stage `simulate`")?;
            let mut claims = Table::new(&["accident", "delay", "amount"]);
            for r in sample.dataset.records() {
                claims.row(&[r.accident.into(), r.delay.into(), r.amount.into()]);
            }
            let fraction = true_reserve_fraction(&spec);
            let paid = sample.dataset.total_amount();
            let truth = ScenarioTruthFile {
                scenario: *scenario,
                n: *n,
                seed: config.seed,
                attempts: sample.attempts,
                reserve_fraction: fraction,
                total_paid: paid,
                reserve: fraction * paid,
            };
            Ok(vec![
                claims.into_file("claims.csv"),
                json_file("truth.json", &truth)?,
            ])
        }
        SimulateConfig::Micro {
            model,
            valuation_day,
        } => {
            let log = simulate_micro(config.seed, model).context("stage `simulate`")?;
            let mut files = micro_log_files(&log);
            let mut outstanding = None;
            if let Some(v) = *valuation_day {
                let mut t = Table::new(&["accident", "delay", "amount"]);
                let mut due = 0.0;
                for c in log.claims.iter().filter(|c| c.incident_day < v) {
                    if c.payment_day < v {
                        t.row(&[
                            c.incident_day.into(),
                            (c.payment_day - c.incident_day).into(),
                            c.amount.into(),
                        ]);
                    } else {
                        due += c.amount;
                    }
                }
                outstanding = Some(due);
                files.push(t.into_file("claims.csv"));
            }
            let summary = MicroSummaryFile {
                seed: config.seed,
                policies: log.policies.len(),
                claims: log.claims.len(),
                valuation_day: *valuation_day,
                outstanding,
            };
            files.push(json_file("summary.json", &summary)?);
            Ok(files)
        }
    }
}

fn micro_log_files(log: &MicroEventLog) -> Vec<OutputFile> {
    let mut policies = Table::new(&["policy", "day", "kind", "brand", "model", "price"]);
    for (i, p) in log.policies.iter().enumerate() {
        policies.row(&[
            i.into(),
            p.day.into(),
            label(&p.kind).into(),
            p.brand.into(),
            p.model.into(),
            p.price.into(),
        ]);
    }
    let mut claims = Table::new(&[
        "policy",
        "incident",
        "incident_day",
        "report_day",
        "payment_day",
        "amount",
    ]);
    for c in &log.claims {
        claims.row(&[
            c.policy.into(),
            label(&c.incident).into(),
            c.incident_day.into(),
            c.report_day.into(),
            c.payment_day.into(),
            c.amount.into(),
        ]);
    }
    vec![
        policies.into_file("policies.csv"),
        claims.into_file("events.csv"),
    ]
}

/// Serialized name of a unit enum variant.
fn label(v: &impl Serialize) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

pub fn run_bench(config: &RunConfig) -> Result<Vec<OutputFile>> {
    let options = study_options(config);
    match config
        .bench
        .as_ref()
        .context("config has no [bench] section")?
    {
        BenchConfig::Scenario {
            scenarios,
            sizes,
            runs,
            methods,
        } => {
            let plan = ScenarioPlan {
                scenarios: scenarios.clone(),
                sizes: sizes.clone(),
                runs: *runs,
                seed: config.seed,
                methods: methods.clone(),
                options,
            };
            let result = run_scenario_bench(&plan).context("stage `bench`")?;
            let mut runs_t = Table::new(&["scenario", "n", "method", "run", "err2"]);
            for r in &result.records {
                runs_t.row(&[
                    r.scenario.into(),
                    r.n.into(),
                    r.method.to_string().into(),
                    r.run.into(),
                    r.err2.into(),
                ]);
            }
            let mut summary = Table::new(&[
                "scenario",
                "n",
                "method",
                "median",
                "mean",
                "sd",
                "invalid_count",
            ]);
            for s in result.summaries() {
                summary.row(&[
                    s.scenario.into(),
                    s.n.into(),
                    s.method.to_string().into(),
                    s.median.into(),
                    s.mean.into(),
                    s.sd.into(),
                    s.invalid_count.into(),
                ]);
            }
            Ok(vec![
                runs_t.into_file("bench.csv"),
                summary.into_file("bench_summary.csv"),
            ])
        }
        BenchConfig::Micro {
            runs,
            model,
            valuation_days: days,
            methods,
        } => {
            let mut plan = MicroPlan::new(*runs, config.seed);
            plan.config = *model;
            plan.methods = methods.clone();
            plan.valuation_days = days.clone().unwrap_or_else(valuation_days);
            plan.options = options;
            let result = run_micro_bench(&plan).context("stage `bench`")?;
            let mut records = Table::new(&["run", "valuation_day", "method", "estimate", "truth"]);
            for r in &result.records {
                records.row(&[
                    r.run.into(),
                    r.valuation_day.into(),
                    r.method.to_string().into(),
                    r.estimate.into(),
                    r.truth.into(),
                ]);
            }
            let mut mse = Table::new(&[
                "valuation_day",
                "method",
                "mse",
                "mean_estimate",
                "median_truth",
                "invalid_count",
            ]);
            for row in result.mse_series() {
                mse.row(&[
                    row.valuation_day.into(),
                    row.method.to_string().into(),
                    row.mse.into(),
                    row.mean_estimate.into(),
                    row.median_truth.into(),
                    row.invalid_count.into(),
                ]);
            }
            let mut counts = Table::new(&["run", "policies"]);
            for (run, c) in result.policy_counts.iter().enumerate() {
                counts.row(&[run.into(), (*c).into()]);
            }
            Ok(vec![
                records.into_file("micro_bench.csv"),
                mse.into_file("micro_mse.csv"),
                counts.into_file("micro_policies.csv"),
            ])
        }
    }
}

#[derive(Serialize)]
struct DiagnoseSummary {
    bins: usize,
    rejections_at_5pct: Vec<usize>,
    tested_columns: usize,
    sup_distance: f64,
    flagged_curves: Vec<usize>,
}

pub fn run_diagnose(config: &RunConfig) -> Result<Vec<OutputFile>> {
    let data = load(config)?;
    let d = &config.diagnose;
    let columns = match d.columns {
        Some((a, b)) => a..b + 1,
        None => {
            // leading columns with enough rows off the diagonal for a slope test
            let tri = aggregate_triangle(&data, d.bins, d.mode).context("stage `triangle`")?;
            let usable = (0..d.bins - 1)
                .take_while(|&s| {
                    let f = row_dev_factors(&tri, s);
                    f.rows.iter().filter(|&&r| r + s + 2 < d.bins).count() >= 3
                })
                .count();
            0..usable
        }
    };
    let ind =
        independence_diagnostic(&data, d.bins, columns, d.mode).context("stage `independence`")?;
    let mult = multiplicativity_diagnostic(&data, d.bins, d.grid_points)
        .context("stage `multiplicativity`")?;
    let mut tests = Table::new(&[
        "column",
        "rows",
        "slope",
        "intercept",
        "std_error",
        "t_stat",
        "p_value",
    ]);
    for t in &ind.tests {
        tests.row(&[
            t.column.into(),
            t.rows.into(),
            t.slope.into(),
            t.intercept.into(),
            t.std_error.into(),
            t.t_stat.into(),
            t.p_value.into(),
        ]);
    }
    let mut curves = Table::new(&["bin", "x", "normalized"]);
    for c in &mult.curves {
        for (x, v) in mult.grid.iter().zip(&c.normalized) {
            curves.row(&[c.bin.into(), (*x).into(), (*v).into()]);
        }
    }
    let summary = DiagnoseSummary {
        bins: d.bins,
        rejections_at_5pct: ind.rejections(0.05),
        tested_columns: ind.tests.len(),
        sup_distance: mult.sup_distance,
        flagged_curves: mult
            .curves
            .iter()
            .filter(|c| c.flagged)
            .map(|c| c.bin)
            .collect(),
    };
    Ok(vec![
        tests.into_file("independence.csv"),
        curves.into_file("multiplicativity.csv"),
        json_file("diagnose.json", &summary)?,
    ])
}
