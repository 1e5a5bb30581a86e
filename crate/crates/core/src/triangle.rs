//! Aggregated run-off triangles and the classical chain-ladder baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ClaimDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    Amount,
    Count,
}

/// Incremental run-off triangle; row `r` holds delay bins `0..m-r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedTriangle {
    m: usize,
    rows: Vec<Vec<f64>>,
}

impl BinnedTriangle {
    /// Triangle from incremental rows, row `r` having `m - r` entries.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::InvalidArgument("empty triangle".into()));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != m - r {
                return Err(Error::LengthMismatch(row.len(), m - r));
            }
            if let Some(s) = row.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "cell ({r}, {s}) is negative or not finite"
                )));
            }
        }
        Ok(Self { m, rows })
    }

    /// Triangle from `(row, column, value)` cells; missing cells are zero.
    pub fn from_cells(m: usize, cells: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = (0..m).map(|r| vec![0.0; m - r]).collect();
        for &(r, s, x) in cells {
            if r + s >= m {
                return Err(Error::ForbiddenCell { row: r, col: s });
            }
            rows[r][s] += x;
        }
        Self::from_rows(rows)
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn get(&self, r: usize, s: usize) -> Option<f64> {
        self.rows.get(r).and_then(|row| row.get(s)).copied()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn total(&self) -> f64 {
        self.rows.iter().flatten().sum()
    }

    /// `(row, column, value)` for every observed cell.
    pub fn cells(&self) -> Vec<(usize, usize, f64)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().enumerate().map(move |(s, x)| (r, s, *x)))
            .collect()
    }

    /// Cumulative row sums over the observed part.
    pub fn cumulative(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|x| {
                        acc += x;
                        acc
                    })
                    .collect()
            })
            .collect()
    }
}

fn bin_of(x: f64, m: usize) -> usize {
    ((x * m as f64 + 1e-9).floor().max(0.0) as usize).min(m - 1)
}

/// Aggregates claims into an `m x m` triangle by accident and delay bins.
pub fn aggregate_triangle(
    dataset: &ClaimDataset,
    m: usize,
    mode: AggregationMode,
) -> Result<BinnedTriangle> {
    if m < 2 {
        return Err(Error::InvalidArgument(
            "triangle needs at least 2 bins".into(),
        ));
    }
    if !dataset.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let mut rows: Vec<Vec<f64>> = (0..m).map(|r| vec![0.0; m - r]).collect();
    for r in dataset.records() {
        let row = bin_of(r.accident, m);
        let mut col = bin_of(r.delay, m);
        if row + col >= m {
            if r.accident + r.delay > 1.0 + 1e-12 || row + col > m {
                return Err(Error::ForbiddenCell { row, col });
            }
            // a corner claim on the truncation line belongs to the last diagonal
            col = m - 1 - row;
        }
        rows[row][col] += match mode {
            AggregationMode::Amount => r.amount,
            AggregationMode::Count => 1.0,
        };
    }
    Ok(BinnedTriangle { m, rows })
}

/// Completed chain-ladder rectangle with its reserve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainLadderForecast {
    /// Pooled factors `F_0..F_{m-2}`.
    pub factors: Vec<f64>,
    /// Cumulative `m x m` rectangle.
    pub cumulative: Vec<Vec<f64>>,
    /// Incremental `m x m` rectangle.
    pub incremental: Vec<Vec<f64>>,
    pub reserve: f64,
    /// Forecast payments on each future diagonal `r + s = m - 1 + k`, `k = 1..m-1`.
    pub cashflow_future: Vec<f64>,
    /// Outstanding amount of each accident row.
    pub cashflow_accident: Vec<f64>,
}

pub fn chain_ladder_forecast(tri: &BinnedTriangle) -> Result<ChainLadderForecast> {
    let m = tri.m;
    let mut cumulative = tri.cumulative();
    let mut factors = Vec::with_capacity(m.saturating_sub(1));
    for s in 0..m.saturating_sub(1) {
        let (mut num, mut den) = (0.0, 0.0);
        for row in cumulative.iter().take(m - 1 - s) {
            num += row[s + 1];
            den += row[s];
        }
        if !(den > 0.0) {
            return Err(Error::ChainLadderBreakdown { column: s });
        }
        factors.push(num / den);
    }
    for (r, row) in cumulative.iter_mut().enumerate() {
        for s in (m - r)..m {
            let prev = row[s - 1];
            row.push(prev * factors[s - 1]);
        }
    }
    let incremental: Vec<Vec<f64>> = cumulative
        .iter()
        .map(|row| {
            let mut prev = 0.0;
            row.iter()
                .map(|c| {
                    let x = c - prev;
                    prev = *c;
                    x
                })
                .collect()
        })
        .collect();
    let mut cashflow_future = vec![0.0; m.saturating_sub(1)];
    let mut cashflow_accident = vec![0.0; m];
    for r in 0..m {
        for s in (m - r)..m {
            let x = incremental[r][s];
            cashflow_future[r + s - m] += x;
            cashflow_accident[r] += x;
        }
    }
    let reserve = cashflow_accident.iter().sum();
    Ok(ChainLadderForecast {
        factors,
        cumulative,
        incremental,
        reserve,
        cashflow_future,
        cashflow_accident,
    })
}

/// Per-row development ratios `C[r][s+1] / C[r][s]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowFactors {
    pub column: usize,
    pub rows: Vec<usize>,
    pub values: Vec<f64>,
    /// Rows skipped because `C[r][s]` is zero.
    pub omitted: Vec<usize>,
}

/// Row-wise development factors from delay bin `s` to `s + 1`, for all rows
/// where bin `s + 1` is observed.
pub fn row_dev_factors(tri: &BinnedTriangle, s: usize) -> RowFactors {
    let cum = tri.cumulative();
    let mut out = RowFactors {
        column: s,
        rows: Vec::new(),
        values: Vec::new(),
        omitted: Vec::new(),
    };
    for (r, row) in cum.iter().enumerate() {
        if r + s + 1 >= tri.m {
            break;
        }
        if row[s] > 0.0 {
            out.rows.push(r);
            out.values.push(row[s + 1] / row[s]);
        } else {
            out.omitted.push(r);
        }
    }
    out
}
