//! Run configuration read from a TOML file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ccl_core::reserve::Method;
use ccl_core::sim::{MicroConfig, SCENARIO_IDS};
use ccl_core::{AggregationMode, BandwidthSpec, KernelKind};
use chrono::NaiveDate;
use serde::Deserialize;

use crate::ingest::Schema;

pub const DEFAULT_OUTPUT: &str = "ccl-out";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub estimate: EstimateConfig,
    pub simulate: Option<SimulateConfig>,
    pub bench: Option<BenchConfig>,
    #[serde(default)]
    pub diagnose: DiagnoseConfig,
}

/// Claims file and its time units.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    /// Truncation horizon in the file's time unit (days for the date schema).
    pub horizon: f64,
    #[serde(default)]
    pub schema: Schema,
    /// Day zero for the date schema; the earliest accident date if absent.
    pub origin: Option<NaiveDate>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateConfig {
    pub method: Method,
    pub kernel: KernelKind,
    /// Bandwidth of the delay density, in the data's time unit.
    pub bandwidth_t: BandwidthSpec,
    /// Bandwidth of the accident density, in the data's time unit.
    pub bandwidth_u: BandwidthSpec,
    pub grid_points: usize,
    pub triangle_bins: usize,
    /// Cash-flow period in the data's time unit; a tenth of the horizon if absent.
    pub period: Option<f64>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            method: Method::LL,
            kernel: KernelKind::Epanechnikov,
            bandwidth_t: BandwidthSpec::default(),
            bandwidth_u: BandwidthSpec::default(),
            grid_points: ccl_core::density::DEFAULT_GRID_SIZE,
            triangle_bins: 20,
            period: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SimulateConfig {
    Scenario {
        scenario: u8,
        n: usize,
    },
    Micro {
        #[serde(default)]
        model: MicroConfig,
        /// Also write the claims known at the start of this day.
        valuation_day: Option<u32>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BenchConfig {
    Scenario {
        #[serde(default = "all_scenarios")]
        scenarios: Vec<u8>,
        #[serde(default = "default_sizes")]
        sizes: Vec<usize>,
        #[serde(default = "default_scenario_runs")]
        runs: usize,
        #[serde(default = "all_methods")]
        methods: Vec<Method>,
    },
    Micro {
        #[serde(default = "default_micro_runs")]
        runs: usize,
        #[serde(default)]
        model: MicroConfig,
        valuation_days: Option<Vec<u32>>,
        #[serde(default = "all_methods")]
        methods: Vec<Method>,
    },
}

fn all_scenarios() -> Vec<u8> {
    SCENARIO_IDS.to_vec()
}

fn default_sizes() -> Vec<usize> {
    vec![100, 1000, 10_000]
}

fn default_scenario_runs() -> usize {
    200
}

fn default_micro_runs() -> usize {
    50
}

fn all_methods() -> Vec<Method> {
    vec![Method::LL, Method::LC, Method::CL]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseConfig {
    pub bins: usize,
    pub mode: AggregationMode,
    /// Development columns tested for a trend; all testable columns if absent.
    pub columns: Option<(usize, usize)>,
    pub grid_points: usize,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self {
            bins: 20,
            mode: AggregationMode::Amount,
            columns: None,
            grid_points: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Estimate,
    Reserve,
    Simulate,
    Bench,
    Diagnose,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
    }

    pub fn data(&self) -> Result<&DataConfig> {
        self.data.as_ref().context("config has no [data] section")
    }

    /// Checks every setting `command` will use before anything runs.
    pub fn validate(&self, command: Command) -> Result<()> {
        match command {
            Command::Estimate | Command::Reserve => {
                self.validate_data()?;
                self.validate_estimate()?;
            }
            Command::Diagnose => {
                self.validate_data()?;
                let d = &self.diagnose;
                if d.bins < 3 {
                    bail!("diagnose.bins must be at least 3, got {}", d.bins);
                }
                if d.grid_points < 2 {
                    bail!("diagnose.grid_points must be at least 2");
                }
                if let Some((a, b)) = d.columns {
                    if a >= b || b > d.bins - 2 {
                        bail!("diagnose.columns must satisfy first < last <= bins - 2");
                    }
                }
            }
            Command::Simulate => match &self.simulate {
                None => bail!("config has no [simulate] section"),
                Some(SimulateConfig::Scenario { scenario, n }) => {
                    check_scenario(*scenario)?;
                    if *n == 0 {
                        bail!("simulate.n must be positive");
                    }
                }
                Some(SimulateConfig::Micro {
                    model,
                    valuation_day,
                }) => {
                    model.validate()?;
                    if valuation_day == &Some(0) {
                        bail!("simulate.valuation_day must be positive");
                    }
                }
            },
            Command::Bench => {
                match &self.bench {
                    None => bail!("config has no [bench] section"),
                    Some(BenchConfig::Scenario {
                        scenarios,
                        sizes,
                        runs,
                        methods,
                    }) => {
                        if scenarios.is_empty() || sizes.is_empty() || methods.is_empty() {
                            bail!("bench scenarios, sizes and methods must be nonempty");
                        }
                        for &s in scenarios {
                            check_scenario(s)?;
                        }
                        if sizes.contains(&0) || *runs == 0 {
                            bail!("bench sizes and runs must be positive");
                        }
                    }
                    Some(BenchConfig::Micro {
                        runs,
                        model,
                        valuation_days,
                        methods,
                    }) => {
                        model.validate()?;
                        if *runs == 0 || methods.is_empty() {
                            bail!("bench runs and methods must be nonempty");
                        }
                        if let Some(days) = valuation_days {
                            if days.is_empty() || days.contains(&0) {
                                bail!("bench valuation_days must be positive and nonempty");
                            }
                        }
                    }
                }
                self.validate_estimate()?;
            }
        }
        Ok(())
    }

    fn validate_data(&self) -> Result<()> {
        let data = self.data()?;
        if !(data.horizon.is_finite() && data.horizon > 0.0) {
            bail!("data.horizon must be positive, got {}", data.horizon);
        }
        if !data.path.is_file() {
            bail!("claims file {} does not exist", data.path.display());
        }
        if data.origin.is_some() && data.schema == Schema::Numeric {
            bail!("data.origin only applies to the date schema");
        }
        Ok(())
    }

    fn validate_estimate(&self) -> Result<()> {
        let e = &self.estimate;
        e.bandwidth_t.validate().context("estimate.bandwidth_t")?;
        e.bandwidth_u.validate().context("estimate.bandwidth_u")?;
        if e.grid_points < 2 {
            bail!(
                "estimate.grid_points must be at least 2, got {}",
                e.grid_points
            );
        }
        if e.triangle_bins < 2 {
            bail!(
                "estimate.triangle_bins must be at least 2, got {}",
                e.triangle_bins
            );
        }
        if let Some(p) = e.period {
            if !(p.is_finite() && p > 0.0) {
                bail!("estimate.period must be positive, got {p}");
            }
        }
        Ok(())
    }
}

fn check_scenario(id: u8) -> Result<()> {
    if !SCENARIO_IDS.contains(&id) {
        bail!("scenario {id} not in 1..=8");
    }
    Ok(())
}
