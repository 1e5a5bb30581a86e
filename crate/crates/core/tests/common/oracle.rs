//! Brute-force reference implementations: direct loops over the records and
//! composite Gauss–Legendre quadrature with nodes computed from scratch.

#![allow(dead_code)]

use ccl_core::{ClaimDataset, ClaimRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reversed-time view of one record: exposure on `(u, s]`, payment at `s`.
#[derive(Debug, Clone, Copy)]
pub struct Rec {
    pub u: f64,
    pub s: f64,
    pub z: f64,
}

pub fn reversed(dataset: &ClaimDataset) -> Vec<Rec> {
    dataset
        .records()
        .iter()
        .map(|r| Rec {
            u: r.accident,
            s: dataset.horizon() - r.delay,
            z: r.amount,
        })
        .collect()
}

/// Random normalized dataset with `2..=max_n` records and no ties.
pub fn random_dataset(rng: &mut ChaCha8Rng, max_n: usize) -> ClaimDataset {
    let n = rng.random_range(2..=max_n);
    let records = (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(0.0..0.95);
            let t = rng.random_range(0.02..0.999) * (1.0 - u);
            let z = rng.random_range(0.1..3.0);
            ClaimRecord::new(u, t, z)
        })
        .collect();
    ClaimDataset::new(records, 1.0).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn weighted_exposure(recs: &[Rec], x: f64) -> f64 {
    recs.iter()
        .filter(|r| r.u < x && x <= r.s)
        .map(|r| r.z)
        .sum()
}

fn payment_mass(recs: &[Rec], x: f64) -> f64 {
    recs.iter().filter(|r| r.s == x).map(|r| r.z).sum()
}

fn distinct_payments(recs: &[Rec]) -> Vec<f64> {
    let mut s: Vec<f64> = recs.iter().map(|r| r.s).collect();
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

/// `Â(x) = Σ_{s' <= x} ΔN(s') / W(s')`.
pub fn aalen(recs: &[Rec], x: f64) -> f64 {
    distinct_payments(recs)
        .into_iter()
        .filter(|&s| s <= x)
        .map(|s| payment_mass(recs, s) / weighted_exposure(recs, s))
        .sum()
}

/// `Ŝ(x)` as a product over payments at or before `x`.
pub fn km(recs: &[Rec], x: f64) -> f64 {
    distinct_payments(recs)
        .into_iter()
        .filter(|&s| s <= x)
        .map(|s| 1.0 - payment_mass(recs, s) / weighted_exposure(recs, s))
        .product()
}

/// `Ŝ(x-)`.
pub fn km_left(recs: &[Rec], x: f64) -> f64 {
    distinct_payments(recs)
        .into_iter()
        .filter(|&s| s < x)
        .map(|s| 1.0 - payment_mass(recs, s) / weighted_exposure(recs, s))
        .product()
}

/// Histogram hazard on `m` left-open bins from interval overlaps.
pub fn histogram(recs: &[Rec], m: usize) -> Vec<f64> {
    (0..m)
        .map(|l| {
            let lo = l as f64 / m as f64;
            let hi = (l + 1) as f64 / m as f64;
            let mass: f64 = recs
                .iter()
                .filter(|r| (r.s > lo || (l == 0 && r.s == 0.0)) && r.s <= hi)
                .map(|r| r.z)
                .sum();
            let exposure: f64 = recs
                .iter()
                .map(|r| r.z * (r.s.min(hi) - r.u.max(lo)).max(0.0))
                .sum();
            if exposure > 0.0 {
                mass / exposure
            } else {
                0.0
            }
        })
        .collect()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Composite rule: each gap between sorted `breaks` split into `pieces`.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    breaks: &[f64],
    pieces: usize,
    rule: &[(f64, f64)],
) -> f64 {
    let mut b: Vec<f64> = breaks.to_vec();
    b.sort_by(f64::total_cmp);
    b.dedup();
    let mut total = 0.0;
    for w in b.windows(2) {
        let step = (w[1] - w[0]) / pieces as f64;
        for p in 0..pieces {
            let lo = w[0] + p as f64 * step;
            let mid = lo + 0.5 * step;
            total += rule
                .iter()
                .map(|&(x, wt)| wt * f(mid + 0.5 * step * x))
                .sum::<f64>()
                * 0.5
                * step;
        }
    }
    total
}

pub fn epanechnikov(v: f64) -> f64 {
    if v.abs() <= 1.0 {
        0.75 * (1.0 - v * v)
    } else {
        0.0
    }
}

fn kh(x: f64, h: f64) -> f64 {
    epanechnikov(x / h) / h
}

/// `a_j(t)` by quadrature of each record's clipped exposure window.
pub fn a_moment(recs: &[Rec], t: f64, h: f64, j: i32) -> f64 {
    let rule = gauss_legendre(8);
    recs.iter()
        .map(|r| {
            let lo = r.u.max(t - h);
            let hi = r.s.min(t + h);
            if hi <= lo {
                return 0.0;
            }
            let mid = t.clamp(lo, hi);
            r.z * integrate(|x| kh(t - x, h) * (t - x).powi(j), &[lo, mid, hi], 1, &rule)
        })
        .sum()
}

/// `G_j(t)` with payment weights `weight(i)`.
pub fn g_moment(recs: &[Rec], weight: &dyn Fn(usize) -> f64, t: f64, h: f64, j: i32) -> f64 {
    recs.iter()
        .enumerate()
        .map(|(i, r)| kh(t - r.s, h) * (t - r.s).powi(j) * weight(i))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deg {
    Constant,
    Linear,
}

/// Thresholds shared with the estimators: `a_0` above `1e-12 Σz`, and for
/// the linear fit `a_2 > 0` and `det > 1e-12 a_0 a_2`.
pub fn estimate(
    recs: &[Rec],
    weight: &dyn Fn(usize) -> f64,
    t: f64,
    h: f64,
    deg: Deg,
    floor: f64,
) -> Option<f64> {
    let a0 = a_moment(recs, t, h, 0);
    let g0 = g_moment(recs, weight, t, h, 0);
    if a0 <= floor {
        return None;
    }
    match deg {
        Deg::Constant => Some(g0.max(0.0) / a0),
        Deg::Linear => {
            let a1 = a_moment(recs, t, h, 1);
            let a2 = a_moment(recs, t, h, 2);
            let g1 = g_moment(recs, weight, t, h, 1);
            let det = a0 * a2 - a1 * a1;
            if !(a2 > 0.0 && det > 1e-12 * a0 * a2) {
                return None;
            }
            Some((a2 * g0 - a1 * g1) / det)
        }
    }
}

pub fn floor(recs: &[Rec]) -> f64 {
    1e-12 * recs.iter().map(|r| r.z).sum::<f64>()
}

/// Estimate from the records other than `i`, with the full-data survival.
pub fn loo(recs: &[Rec], i: usize, t: f64, h: f64, deg: Deg) -> Option<f64> {
    let weights: Vec<f64> = recs.iter().map(|r| km_left(recs, r.s) * r.z).collect();
    let rest: Vec<Rec> = recs
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != i)
        .map(|(_, r)| *r)
        .collect();
    let rest_w: Vec<f64> = weights
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != i)
        .map(|(_, w)| *w)
        .collect();
    let (full_a0, full_a2) = (a_moment(recs, t, h, 0), a_moment(recs, t, h, 2));
    let a0 = a_moment(&rest, t, h, 0);
    if a0 <= (1e-10 * full_a0).max(floor(recs)) {
        return None;
    }
    if deg == Deg::Linear && a_moment(&rest, t, h, 2) <= 1e-10 * full_a2 {
        return None;
    }
    estimate(&rest, &|k| rest_w[k], t, h, deg, floor(recs))
}

/// Cross-validation score `∫ f̂² W - 2 Σ_i f̂_[i](s_i) Ŝ(s_i-) z_i` on
/// tie-free data.
pub fn cv_score(recs: &[Rec], h: f64, deg: Deg) -> f64 {
    let weights: Vec<f64> = recs.iter().map(|r| km_left(recs, r.s) * r.z).collect();
    let fl = floor(recs);
    let f = |x: f64| estimate(recs, &|k| weights[k], x, h, deg, fl).unwrap_or(0.0);
    let mut breaks = vec![0.0, 1.0];
    for r in recs {
        for b in [r.u, r.s, r.u - h, r.u + h, r.s - h, r.s + h] {
            if (0.0..=1.0).contains(&b) {
                breaks.push(b);
            }
        }
    }
    let rule = gauss_legendre(12);
    let fit = integrate(
        |x| f(x).powi(2) * weighted_exposure(recs, x),
        &breaks,
        8,
        &rule,
    );
    let values: Vec<Option<f64>> = (0..recs.len())
        .map(|i| loo(recs, i, recs[i].s, h, deg))
        .collect();
    if values.iter().all(Option::is_none) {
        return f64::INFINITY;
    }
    let loo_sum: f64 = values
        .iter()
        .zip(&weights)
        .map(|(v, w)| v.unwrap_or(0.0) * w)
        .sum();
    fit - 2.0 * loo_sum
}

/// `|a - b| <= tol * scale`, with `scale` at least `|b|`.
pub fn close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * scale.max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Worst scaled discrepancy per estimator family over one dataset.
#[derive(Debug, Default, Clone)]
pub struct Discrepancy {
    pub entries: Vec<(&'static str, f64)>,
}

impl Discrepancy {
    /// Records the worst `|a - b| / max(|b|, scale)`, where `scale` is at
    /// least the largest `|b|` in `pairs`.
    fn record(&mut self, name: &'static str, pairs: &[(f64, f64)], scale: f64) {
        let scale = pairs
            .iter()
            .map(|p| p.1.abs())
            .fold(scale.max(f64::MIN_POSITIVE), f64::max);
        let worst = pairs
            .iter()
            .map(|&(a, b)| match a == b {
                true => 0.0,
                false => (a - b).abs() / scale.max(b.abs()),
            })
            .fold(0.0, f64::max);
        self.merge(name, worst);
    }

    fn merge(&mut self, name: &'static str, value: f64) {
        match self.entries.iter_mut().find(|e| e.0 == name) {
            Some(e) => e.1 = e.1.max(value),
            None => self.entries.push((name, value)),
        }
    }

    pub fn absorb(&mut self, other: &Discrepancy) {
        for &(name, v) in &other.entries {
            self.merge(name, v);
        }
    }

    pub fn worst(&self, name: &str) -> f64 {
        self.entries
            .iter()
            .find(|e| e.0 == name)
            .map_or(f64::INFINITY, |e| e.1)
    }
}

pub const FAMILIES: [&str; 9] = [
    "aalen",
    "kaplan-meier",
    "histogram",
    "a_j",
    "G_j",
    "local-constant",
    "local-linear",
    "cv-score",
    "loo",
];

/// Compares every estimator on `dataset` with the brute-force versions.
/// Undefined estimates on either side count as 0, and a mismatch in which
/// points are undefined counts as an infinite discrepancy.
pub fn compare(dataset: &ClaimDataset, h: f64) -> Discrepancy {
    use ccl_core::{
        aalen_weighted, aj_moment, cv_score as cv_core, g_moment as g_core, histogram_hazard,
        km_weighted, local_constant, local_linear, loo_estimate, Degree, Kernel,
    };

    let recs = reversed(dataset);
    let mut out = Discrepancy::default();
    let hazard = aalen_weighted(dataset).unwrap();
    let survival = km_weighted(dataset).unwrap();

    let mut probes: Vec<f64> = recs.iter().map(|r| r.s).collect();
    probes.extend(recs.iter().map(|r| r.s - 1e-7));
    probes.extend((0..=20).map(|k| k as f64 / 20.0));
    out.record(
        "aalen",
        &probes
            .iter()
            .map(|&x| (hazard.eval(x), aalen(&recs, x)))
            .collect::<Vec<_>>(),
        0.0,
    );
    let mut km_pairs: Vec<(f64, f64)> = probes
        .iter()
        .map(|&x| (survival.value(x), km(&recs, x)))
        .collect();
    km_pairs.extend(
        recs.iter()
            .map(|r| (survival.left_limit(r.s), km_left(&recs, r.s))),
    );
    out.record("kaplan-meier", &km_pairs, 0.0);

    for m in [1, 7, 20] {
        let core = histogram_hazard(dataset, m).unwrap();
        let pairs: Vec<(f64, f64)> = core
            .values()
            .iter()
            .copied()
            .zip(histogram(&recs, m))
            .collect();
        out.record("histogram", &pairs, 0.0);
    }

    let kernel = Kernel::default();
    let weights: Vec<f64> = recs.iter().map(|r| km_left(&recs, r.s) * r.z).collect();
    let grid: Vec<f64> = (0..=40).map(|k| k as f64 / 40.0).collect();
    let mut a_pairs = Vec::new();
    let mut g_pairs = Vec::new();
    for &t in &grid {
        for j in 0..3 {
            a_pairs.push((
                aj_moment(dataset, t, h, j, &kernel).unwrap(),
                a_moment(&recs, t, h, j as i32),
            ));
        }
        for j in 0..2 {
            g_pairs.push((
                g_core(dataset, &survival, t, h, j, &kernel).unwrap(),
                g_moment(&recs, &|k| weights[k], t, h, j as i32),
            ));
        }
    }
    out.record("a_j", &a_pairs, 0.0);
    out.record("G_j", &g_pairs, 0.0);

    let fl = floor(&recs);
    let mut density_scale = 0.0f64;
    for (name, deg) in [
        ("local-constant", Deg::Constant),
        ("local-linear", Deg::Linear),
    ] {
        let est = match deg {
            Deg::Constant => local_constant(dataset, &survival, h, &grid),
            Deg::Linear => local_linear(dataset, &survival, h, &grid),
        }
        .unwrap();
        let mut pairs = Vec::new();
        for (k, &t) in grid.iter().enumerate() {
            let oracle = estimate(&recs, &|i| weights[i], t, h, deg, fl);
            let flagged = est.flagged().contains(&k);
            if flagged != oracle.is_none() {
                out.merge(name, f64::INFINITY);
            }
            pairs.push((est.values()[k], oracle.unwrap_or(0.0)));
        }
        density_scale = pairs.iter().fold(density_scale, |m, p| m.max(p.1.abs()));
        out.record(name, &pairs, 0.0);
    }

    for (deg, core_deg) in [
        (Deg::Constant, Degree::LocalConstant),
        (Deg::Linear, Degree::LocalLinear),
    ] {
        let core = cv_core(dataset, &survival, h, core_deg).unwrap();
        out.record("cv-score", &[(core, cv_score(&recs, h, deg))], 0.0);

        let mut pairs = Vec::new();
        for i in (0..recs.len()).step_by(3) {
            for t in [recs[i].s, 0.5, recs[i].u + 0.5 * h] {
                let (v, undefined) = loo_estimate(dataset, &survival, i, h, core_deg, t).unwrap();
                let oracle = loo(&recs, i, t, h, deg);
                if undefined != oracle.is_none() {
                    out.merge("loo", f64::INFINITY);
                }
                pairs.push((v, oracle.unwrap_or(0.0)));
            }
        }
        out.record("loo", &pairs, density_scale);
    }
    out
}

/// Runs [`compare`] over `count` random datasets with at most `max_n` records.
pub fn compare_random(count: usize, max_n: usize, seed: u64) -> Discrepancy {
    let mut r = rng(seed);
    let mut total = Discrepancy::default();
    for _ in 0..count {
        let dataset = random_dataset(&mut r, max_n);
        let h = r.random_range(0.05..0.5);
        total.absorb(&compare(&dataset, h));
    }
    total
}
