//! Piecewise-constant exposure processes in reversed time.

use crate::error::{Error, Result};
use crate::model::ClaimDataset;

/// Aggregate risk set `s -> sum_j z_j I(u_j < s <= T_j^R)` (and its count
/// analogue) stored as a step function that is constant on `(b_k, b_{k+1}]`.
///
/// Ties in entry or exit times are merged into one breakpoint. Whenever no
/// record is at risk the weighted value is stored as an exact zero.
#[derive(Debug, Clone)]
pub struct Exposure {
    breaks: Vec<f64>,
    counts: Vec<u64>,
    weights: Vec<f64>,
}

impl Exposure {
    pub fn from_dataset(dataset: &ClaimDataset) -> Self {
        let horizon = dataset.horizon();
        let mut events: Vec<(f64, i64, f64)> = Vec::with_capacity(2 * dataset.len());
        for r in dataset.records() {
            events.push((r.accident, 1, r.amount));
            events.push((horizon - r.delay, -1, -r.amount));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut breaks = Vec::new();
        let mut counts = Vec::new();
        let mut weights = Vec::new();
        let mut count: i64 = 0;
        let mut weight = Neumaier::default();
        let mut i = 0;
        while i < events.len() {
            let pos = events[i].0;
            while i < events.len() && events[i].0 == pos {
                count += events[i].1;
                weight.add(events[i].2);
                i += 1;
            }
            debug_assert!(count >= 0);
            if count == 0 {
                weight = Neumaier::default();
            }
            breaks.push(pos);
            counts.push(count as u64);
            weights.push(weight.value().max(0.0));
        }
        Self {
            breaks,
            counts,
            weights,
        }
    }

    /// Sorted distinct breakpoints `{u_i} ∪ {T_i^R}`.
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Weighted value on `(breaks[k], breaks[k+1]]`.
    pub fn piece_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted exposure at `s`.
    pub fn value_at(&self, s: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b < s);
        if idx == 0 {
            0.0
        } else {
            self.weights[idx - 1]
        }
    }

    /// Number of records at risk at `s`.
    pub fn count_at(&self, s: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b < s);
        if idx == 0 {
            0.0
        } else {
            self.counts[idx - 1] as f64
        }
    }

    /// Weighted exposure just to the right of `x`.
    pub fn right_value(&self, x: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b <= x);
        if idx == 0 {
            0.0
        } else {
            self.weights[idx - 1]
        }
    }

    /// Exact integral over `[a, b]` by a sweep over the breakpoints.
    pub fn integral(&self, a: f64, b: f64, weighted: bool) -> Result<f64> {
        if a > b {
            return Err(Error::ReversedInterval(a, b));
        }
        let value = |k: usize| {
            if weighted {
                self.weights[k]
            } else {
                self.counts[k] as f64
            }
        };
        let mut k = self.breaks.partition_point(|&x| x <= a);
        let mut left = a;
        let mut total = 0.0;
        while left < b {
            let right = if k < self.breaks.len() {
                self.breaks[k].min(b)
            } else {
                b
            };
            if k > 0 {
                total += value(k - 1) * (right - left);
            }
            left = right;
            k += 1;
        }
        Ok(total)
    }

    /// For `cells` equal cells on `[0, 1]` returns `∫_cell W(x) ξ^p dx` for
    /// `p = 0, 1, 2`, where `ξ = (x - x_c) / Δ` is the position inside the cell.
    pub(crate) fn cell_moments(&self, cells: usize) -> [Vec<f64>; 3] {
        let width = 1.0 / cells as f64;
        let mut a = vec![0.0; cells];
        let mut bm = vec![0.0; cells];
        let mut cm = vec![0.0; cells];
        let mut k = 0;
        for c in 0..cells {
            let x0 = c as f64 * width;
            let x1 = if c + 1 == cells {
                1.0
            } else {
                (c + 1) as f64 * width
            };
            while k < self.breaks.len() && self.breaks[k] <= x0 {
                k += 1;
            }
            let mut left = x0;
            let mut j = k;
            loop {
                let right = if j < self.breaks.len() {
                    self.breaks[j].min(x1)
                } else {
                    x1
                };
                if j > 0 && right > left {
                    let w = self.weights[j - 1];
                    if w > 0.0 {
                        let l = (left - x0) / width;
                        let r = (right - x0) / width;
                        a[c] += w * (right - left);
                        bm[c] += w * width * 0.5 * (r * r - l * l);
                        cm[c] += w * width * (r * r * r - l * l * l) / 3.0;
                    }
                }
                if right >= x1 {
                    break;
                }
                left = right;
                j += 1;
            }
        }
        [a, bm, cm]
    }
}

/// Compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
