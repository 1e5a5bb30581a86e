//! Fast evaluation of the kernel moments `a_j(t)` and `G_j(t)`.
//!
//! Points are grouped into blocks of width `h`. Within a block, prefix sums of
//! `w * ((x - c_b) / h)^q` are stored, so any window sum of a polynomial in
//! `(t - x) / h` is a binomial re-expansion around the block centre. A window of
//! half-width `h` touches at most three blocks, making each query
//! `O(log n)` regardless of how many points it covers.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exposure::Exposure;
use crate::kernel::Kernel;
use crate::model::ClaimDataset;
use crate::survival::SurvivalEstimate;

const NM: usize = 10;

#[derive(Debug, Clone)]
struct Track {
    h: f64,
    nblocks: usize,
    pos: Vec<f64>,
    block_start: Vec<usize>,
    cum: Vec<[f64; NM]>,
    totals: Vec<[f64; NM]>,
}

impl Track {
    fn new(points: &[(f64, f64)], h: f64) -> Self {
        let nblocks = (1.0 / h).floor() as usize + 1;
        let block = |x: f64| ((x / h).floor().max(0.0) as usize).min(nblocks - 1);
        let n = points.len();
        let mut pos = Vec::with_capacity(n);
        let mut block_start = vec![n; nblocks + 1];
        let mut cum = Vec::with_capacity(n);
        let mut totals = vec![[0.0; NM]; nblocks];
        let mut current = usize::MAX;
        let mut acc = [0.0; NM];
        for (i, &(x, w)) in points.iter().enumerate() {
            let b = block(x);
            if b != current {
                if current != usize::MAX {
                    totals[current] = acc;
                }
                for slot in block_start.iter_mut().take(b + 1) {
                    if *slot == n {
                        *slot = i;
                    }
                }
                acc = [0.0; NM];
                current = b;
            }
            pos.push(x);
            cum.push(acc);
            let y = (x - (b as f64 + 0.5) * h) / h;
            let mut p = w;
            for slot in acc.iter_mut() {
                *slot += p;
                p *= y;
            }
        }
        if current != usize::MAX {
            totals[current] = acc;
        }
        Self {
            h,
            nblocks,
            pos,
            block_start,
            cum,
            totals,
        }
    }

    fn block(&self, x: f64) -> usize {
        ((x / self.h).floor().max(0.0) as usize).min(self.nblocks - 1)
    }

    /// Power sums `S_p = Σ w ((t - x) / h)^p`, `p < out.len()`, over the points
    /// with index in `[lo, hi)`, accumulated into `out`.
    fn power_sums(&self, t: f64, lo: usize, hi: usize, out: &mut [f64]) {
        if lo >= hi {
            return;
        }
        let d = out.len();
        let b0 = self.block(self.pos[lo]);
        let b1 = self.block(self.pos[hi - 1]);
        for b in b0..=b1 {
            let start = self.block_start[b];
            let end = self.block_start[b + 1];
            let a = lo.max(start);
            let e = hi.min(end);
            if a >= e {
                continue;
            }
            let top = if e == end {
                &self.totals[b]
            } else {
                &self.cum[e]
            };
            let base = &self.cum[a];
            let mut m = [0.0; NM];
            for q in 0..d {
                // (t - x) / h = delta - y, so alternate signs absorb the minus
                let v = top[q] - base[q];
                m[q] = if q % 2 == 0 { v } else { -v };
            }
            let delta = (t - (b as f64 + 0.5) * self.h) / self.h;
            let mut dp = [1.0; NM];
            for q in 1..d {
                dp[q] = dp[q - 1] * delta;
            }
            for p in 0..d {
                let row = &BINOM[p];
                let mut acc = 0.0;
                for q in 0..=p {
                    acc += row[q] * dp[p - q] * m[q];
                }
                out[p] += acc;
            }
        }
    }

    /// Moves `range` forward to the points in `[a, b]` (or `(a, b)` if `open`)
    /// for windows that only move right.
    fn advance(&self, range: &mut (usize, usize), a: f64, b: f64, open: bool) {
        let n = self.pos.len();
        let (lo, hi) = range;
        if open {
            while *lo < n && self.pos[*lo] <= a {
                *lo += 1;
            }
            while *hi < n && self.pos[*hi] < b {
                *hi += 1;
            }
        } else {
            while *lo < n && self.pos[*lo] < a {
                *lo += 1;
            }
            while *hi < n && self.pos[*hi] <= b {
                *hi += 1;
            }
        }
    }

    /// Index range of points with position in `[a, b]` (or `(a, b)` if `open`).
    fn range(&self, a: f64, b: f64, open: bool) -> (usize, usize) {
        if open {
            (
                self.pos.partition_point(|&x| x <= a),
                self.pos.partition_point(|&x| x < b),
            )
        } else {
            (
                self.pos.partition_point(|&x| x < a),
                self.pos.partition_point(|&x| x <= b),
            )
        }
    }
}

const BINOM: [[f64; NM]; NM] = binomials();

const fn binomials() -> [[f64; NM]; NM] {
    let mut t = [[0.0; NM]; NM];
    let mut n = 0;
    while n < NM {
        t[n][0] = 1.0;
        let mut k = 1;
        while k <= n {
            t[n][k] = t[n - 1][k - 1] + if k < n { t[n - 1][k] } else { 0.0 };
            k += 1;
        }
        n += 1;
    }
    t
}

fn dot(poly: &[f64], sums: &[f64]) -> f64 {
    poly.iter().zip(sums).map(|(c, s)| c * s).sum()
}

/// Kernel moments of one dataset at one bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `a_0, a_1, a_2`.
    pub a: [f64; 3],
    /// `G_0, G_1`.
    pub g: [f64; 2],
}

impl Moments {
    /// `G_0 / a_0`, or `None` when `a_0 <= floor`.
    pub fn local_constant(&self, floor: f64) -> Option<f64> {
        (self.a[0] > floor).then(|| self.g[0].max(0.0) / self.a[0])
    }

    /// `(a_2 G_0 - a_1 G_1) / (a_0 a_2 - a_1^2)`, or `None` at singular points.
    pub fn local_linear(&self, floor: f64) -> Option<f64> {
        let [a0, a1, a2] = self.a;
        if !(a0 > floor && a2 > 0.0) {
            return None;
        }
        let det = a0 * a2 - a1 * a1;
        if !(det > 1e-12 * a0 * a2) {
            return None;
        }
        Some((a2 * self.g[0] - a1 * self.g[1]) / det)
    }

    pub fn minus(&self, other: &Moments) -> Moments {
        Moments {
            a: [
                self.a[0] - other.a[0],
                self.a[1] - other.a[1],
                self.a[2] - other.a[2],
            ],
            g: [self.g[0] - other.g[0], self.g[1] - other.g[1]],
        }
    }

    pub fn plus(&self, other: &Moments) -> Moments {
        Moments {
            a: [
                self.a[0] + other.a[0],
                self.a[1] + other.a[1],
                self.a[2] + other.a[2],
            ],
            g: [self.g[0] + other.g[0], self.g[1] + other.g[1]],
        }
    }
}

/// Sorted per-record data shared by engines at different bandwidths.
#[derive(Debug, Clone)]
pub struct MomentData {
    exposure: Exposure,
    records: Vec<(f64, f64, f64, f64)>,
    payments: Vec<(f64, f64)>,
    entries: Vec<(f64, f64)>,
    exits: Vec<(f64, f64)>,
}

fn merged(mut points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for (x, w) in points {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out
}

impl MomentData {
    pub fn new(dataset: &ClaimDataset, survival: &SurvivalEstimate) -> Result<Self> {
        if !dataset.is_normalized() {
            return Err(Error::NotNormalized);
        }
        let records: Vec<(f64, f64, f64, f64)> = dataset
            .records()
            .iter()
            .map(|r| {
                let s = 1.0 - r.delay;
                (r.accident, s, r.amount, survival.left_limit(s) * r.amount)
            })
            .collect();
        Ok(Self {
            exposure: Exposure::from_dataset(dataset),
            payments: merged(records.iter().map(|r| (r.1, r.3)).collect()),
            entries: merged(records.iter().map(|r| (r.0, r.2)).collect()),
            exits: merged(records.iter().map(|r| (r.1, r.2)).collect()),
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Block-prefix evaluator for `a_j(t)` and `G_j(t)` with `O(1)` leave-one-out
/// corrections.
#[derive(Debug, Clone)]
pub struct MomentEngine {
    h: f64,
    kernel: Kernel,
    data: Arc<MomentData>,
    payments: Track,
    entries: Track,
    exits: Track,
    mu: [f64; 3],
    g_polys: [Vec<f64>; 2],
    a_polys: [Vec<f64>; 3],
    g_len: usize,
    a_len: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Cursor {
    payments: (usize, usize),
    entries: (usize, usize),
    exits: (usize, usize),
    exposure: usize,
}

impl MomentEngine {
    pub fn new(
        dataset: &ClaimDataset,
        survival: &SurvivalEstimate,
        kernel: Kernel,
        h: f64,
    ) -> Result<Self> {
        Self::from_data(Arc::new(MomentData::new(dataset, survival)?), kernel, h)
    }

    pub fn from_data(data: Arc<MomentData>, kernel: Kernel, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive, got {h}"
            )));
        }
        let g_polys = [kernel.weighted_poly(0), kernel.weighted_poly(1)];
        let a_polys = [
            kernel.partial_moment_poly(0),
            kernel.partial_moment_poly(1),
            kernel.partial_moment_poly(2),
        ];
        Ok(Self {
            h,
            kernel,
            payments: Track::new(&data.payments, h),
            entries: Track::new(&data.entries, h),
            exits: Track::new(&data.exits, h),
            data,
            mu: [kernel.moment(0), kernel.moment(1), kernel.moment(2)],
            g_len: g_polys.iter().map(Vec::len).max().unwrap_or(1),
            a_len: a_polys.iter().map(Vec::len).max().unwrap_or(1),
            g_polys,
            a_polys,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.data.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.records.is_empty()
    }

    /// Reversed payment time of record `i`.
    pub fn payment_time(&self, i: usize) -> f64 {
        self.data.records[i].1
    }

    /// `Ŝ(s_i-) z_i` of record `i`.
    pub fn payment_weight(&self, i: usize) -> f64 {
        self.data.records[i].3
    }

    pub fn exposure(&self) -> &Exposure {
        &self.data.exposure
    }

    pub fn at(&self, t: f64) -> Moments {
        let h = self.h;
        let cursor = Cursor {
            payments: self.payments.range(t - h, t + h, false),
            entries: self.entries.range(t - h, t + h, true),
            exits: self.exits.range(t - h, t + h, true),
            exposure: self.exposure().breaks().partition_point(|&b| b <= t - h),
        };
        self.evaluate(t, &cursor)
    }

    /// Moments at every point of a nondecreasing sequence.
    pub fn sweep(&self, ts: &[f64]) -> Vec<Moments> {
        if ts.windows(2).any(|w| !(w[0] <= w[1])) {
            return ts.iter().map(|&t| self.at(t)).collect();
        }
        let h = self.h;
        let breaks = self.exposure().breaks();
        let mut c = Cursor::default();
        ts.iter()
            .map(|&t| {
                self.payments.advance(&mut c.payments, t - h, t + h, false);
                self.entries.advance(&mut c.entries, t - h, t + h, true);
                self.exits.advance(&mut c.exits, t - h, t + h, true);
                while c.exposure < breaks.len() && breaks[c.exposure] <= t - h {
                    c.exposure += 1;
                }
                self.evaluate(t, &c)
            })
            .collect()
    }

    fn evaluate(&self, t: f64, c: &Cursor) -> Moments {
        let h = self.h;
        let mut gs = [0.0; NM];
        self.payments
            .power_sums(t, c.payments.0, c.payments.1, &mut gs[..self.g_len]);
        let mut ins = [0.0; NM];
        self.entries
            .power_sums(t, c.entries.0, c.entries.1, &mut ins[..self.a_len]);
        let mut outs = [0.0; NM];
        self.exits
            .power_sums(t, c.exits.0, c.exits.1, &mut outs[..self.a_len]);
        for (i, o) in ins.iter_mut().zip(outs) {
            *i -= o;
        }
        let w_left = if c.exposure == 0 {
            0.0
        } else {
            self.exposure().piece_weights()[c.exposure - 1]
        };
        let mut a = [0.0; 3];
        let mut scale = 1.0;
        for j in 0..3 {
            a[j] = scale * (self.mu[j] * w_left + dot(&self.a_polys[j], &ins));
            scale *= h;
        }
        Moments {
            a,
            g: [dot(&self.g_polys[0], &gs) / h, dot(&self.g_polys[1], &gs)],
        }
    }

    /// Contribution of record `i` alone to the moments at `t`.
    pub fn own(&self, i: usize, t: f64) -> Moments {
        let h = self.h;
        let (u, s, z, w) = self.data.records[i];
        let v = (t - s) / h;
        let k = self.kernel.eval(v);
        let vu = (t - u) / h;
        let mut a = [0.0; 3];
        let mut scale = 1.0;
        for (j, slot) in a.iter_mut().enumerate() {
            *slot =
                scale * z * (self.kernel.partial_moment(j, vu) - self.kernel.partial_moment(j, v));
            scale *= h;
        }
        Moments {
            a,
            g: [k * w / h, k * v * w],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelKind;
    use crate::model::ClaimRecord;
    use crate::survival::km_weighted;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(n: usize, seed: u64) -> ClaimDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let t: f64 = rng.random::<f64>() * (1.0 - u);
                ClaimRecord::new(u, t, rng.random::<f64>() * 3.0)
            })
            .collect();
        ClaimDataset::new(records, 1.0).unwrap()
    }

    fn brute(d: &ClaimDataset, s: &SurvivalEstimate, k: &Kernel, h: f64, t: f64) -> Moments {
        let mut m = Moments {
            a: [0.0; 3],
            g: [0.0; 2],
        };
        for r in d.records() {
            let e = 1.0 - r.delay;
            let v = (t - e) / h;
            let w = s.left_limit(e) * r.amount;
            m.g[0] += k.eval(v) / h * w;
            m.g[1] += k.eval(v) / h * (t - e) * w;
            for j in 0..3 {
                m.a[j] += h.powi(j as i32)
                    * r.amount
                    * (k.partial_moment(j, (t - r.accident) / h) - k.partial_moment(j, v));
            }
        }
        m
    }

    #[test]
    fn matches_per_record_sums() {
        for (seed, h) in [(1, 0.05), (2, 0.3), (3, 0.013), (4, 0.5), (5, 1.7)] {
            let d = random_dataset(300, seed);
            let s = km_weighted(&d).unwrap();
            for kind in [
                KernelKind::Epanechnikov,
                KernelKind::Triweight,
                KernelKind::Uniform,
            ] {
                let k = Kernel::new(kind);
                let eng = MomentEngine::new(&d, &s, k, h).unwrap();
                for q in 0..=50 {
                    let t = q as f64 / 50.0;
                    let fast = eng.at(t);
                    let slow = brute(&d, &s, &k, h, t);
                    for j in 0..3 {
                        let tol = 1e-10 * (1.0 + slow.a[j].abs());
                        assert!((fast.a[j] - slow.a[j]).abs() < tol, "a{j} t={t} h={h}");
                    }
                    for j in 0..2 {
                        let tol = 1e-10 * (1.0 + slow.g[j].abs());
                        assert!((fast.g[j] - slow.g[j]).abs() < tol, "g{j} t={t} h={h}");
                    }
                }
            }
        }
    }

    #[test]
    fn sweep_matches_point_queries() {
        let d = random_dataset(500, 11);
        let s = km_weighted(&d).unwrap();
        let eng = MomentEngine::new(&d, &s, Kernel::default(), 0.07).unwrap();
        let ts: Vec<f64> = (0..=400).map(|k| k as f64 / 400.0).collect();
        for (t, m) in ts.iter().zip(eng.sweep(&ts)) {
            assert_eq!(m, eng.at(*t));
        }
        let mut payments: Vec<f64> = (0..d.len()).map(|i| eng.payment_time(i)).collect();
        payments.sort_by(f64::total_cmp);
        for (t, m) in payments.iter().zip(eng.sweep(&payments)) {
            assert_eq!(m, eng.at(*t));
        }
    }

    #[test]
    fn own_contributions_sum_to_total() {
        let d = random_dataset(40, 9);
        let s = km_weighted(&d).unwrap();
        let eng = MomentEngine::new(&d, &s, Kernel::default(), 0.2).unwrap();
        let t = 0.37;
        let total = eng.at(t);
        let mut acc = [0.0; 5];
        for i in 0..d.len() {
            let o = eng.own(i, t);
            acc[0] += o.a[0];
            acc[1] += o.a[1];
            acc[2] += o.a[2];
            acc[3] += o.g[0];
            acc[4] += o.g[1];
        }
        let want = [total.a[0], total.a[1], total.a[2], total.g[0], total.g[1]];
        for (x, y) in acc.iter().zip(want) {
            assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn tied_positions_on_block_edges() {
        let records = (0..20)
            .map(|i| ClaimRecord::new(0.1 * (i % 5) as f64, 0.1 * (i % 4) as f64, 1.0 + i as f64))
            .collect();
        let d = ClaimDataset::new(records, 1.0).unwrap();
        let s = km_weighted(&d).unwrap();
        let k = Kernel::default();
        let eng = MomentEngine::new(&d, &s, k, 0.1).unwrap();
        for q in 0..=20 {
            let t = q as f64 / 20.0;
            let fast = eng.at(t);
            let slow = brute(&d, &s, &k, 0.1, t);
            for j in 0..3 {
                assert!((fast.a[j] - slow.a[j]).abs() < 1e-10 * (1.0 + slow.a[j].abs()));
            }
            assert!((fast.g[0] - slow.g[0]).abs() < 1e-10 * (1.0 + slow.g[0].abs()));
        }
    }
}
