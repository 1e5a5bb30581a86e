//! Exact identities of the estimators, each returning a description of the
//! first violation.

#![allow(dead_code)]

use ccl_core::{
    aalen_weighted, aj_moment, histogram_hazard, kernel_epanechnikov, km_weighted, local_constant,
    local_linear, reserve_fraction, reverse_density, uniform_grid, BandwidthSpec, ClaimDataset,
    ClaimRecord, Degree, DensityEstimate, Kernel, Orientation, Target,
};

use super::oracle::{gauss_legendre, integrate, reversed, weighted_exposure};

pub type Check = Result<(), String>;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// One claim paid at reversed time `s`: `Ŝ(s-) = 1` and `Ŝ(s) = 0`.
pub fn single_claim_step(s: f64, z: f64) -> Check {
    let d = ClaimDataset::new(vec![ClaimRecord::new(0.0, 1.0 - s, z)], 1.0)
        .map_err(|e| e.to_string())?;
    let km = km_weighted(&d).map_err(|e| e.to_string())?;
    let s = d.reversed(0);
    if km.left_limit(s) != 1.0 || km.value(s) != 0.0 || km.value(s * 0.5) != 1.0 {
        return Err(format!(
            "single claim at {s}: S(s-) = {}, S(s) = {}",
            km.left_limit(s),
            km.value(s)
        ));
    }
    Ok(())
}

/// Uniform `f_T` and `f_U` give a future triangle equal to the observed one.
pub fn uniform_fraction(points: usize) -> Check {
    let grid = uniform_grid(points);
    let flat = |target| {
        DensityEstimate::from_values(
            grid.clone(),
            vec![1.0; grid.len()],
            Degree::LocalConstant,
            BandwidthSpec::fixed(0.1),
            Orientation::Natural,
            target,
        )
    };
    let ft = flat(Target::T).map_err(|e| e.to_string())?;
    let fu = flat(Target::U).map_err(|e| e.to_string())?;
    let fraction = reserve_fraction(&ft, &fu).map_err(|e| e.to_string())?;
    if (fraction - 1.0).abs() > 1e-6 {
        return Err(format!("uniform reserve fraction {fraction}"));
    }
    Ok(())
}

/// Reversing time twice restores estimates and data exactly.
pub fn double_reversal(dataset: &ClaimDataset, h: f64) -> Check {
    if dataset.swapped().swapped() != *dataset {
        return Err("swapping twice changed the data".into());
    }
    let km = km_weighted(dataset).map_err(|e| e.to_string())?;
    let grid = uniform_grid(101);
    let est = local_linear(dataset, &km, h, &grid).map_err(|e| e.to_string())?;
    let back = reverse_density(&reverse_density(&est));
    if back != est {
        return Err("reversing an estimate twice changed it".into());
    }
    let once = reverse_density(&est);
    let n = grid.len();
    for (k, &t) in grid.iter().enumerate() {
        let mirrored = once.grid()[n - 1 - k];
        if (mirrored - (1.0 - t)).abs() > 1e-15 || once.values()[n - 1 - k] != est.values()[k] {
            return Err(format!("reversed estimate at {} differs", 1.0 - t));
        }
    }
    Ok(())
}

/// `Â`, `Ŝ`, `α̂_H` and, if `densities`, `f̂` do not change when every amount
/// is multiplied by `c`.
pub fn scale_invariance(
    dataset: &ClaimDataset,
    c: f64,
    h: f64,
    tol: f64,
    densities: bool,
) -> Check {
    let scaled = dataset.scaled_amounts(c);
    let err = |e: ccl_core::Error| e.to_string();
    let (a0, a1) = (
        aalen_weighted(dataset).map_err(err)?,
        aalen_weighted(&scaled).map_err(err)?,
    );
    let (s0, s1) = (
        km_weighted(dataset).map_err(err)?,
        km_weighted(&scaled).map_err(err)?,
    );
    let probes: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).collect();
    let mut worst = 0.0f64;
    for &x in &probes {
        worst = worst.max(rel(a0.eval(x), a1.eval(x)));
        worst = worst.max(rel(s0.value(x), s1.value(x)));
    }
    for m in [1, 5, 20] {
        let (h0, h1) = (
            histogram_hazard(dataset, m).map_err(err)?,
            histogram_hazard(&scaled, m).map_err(err)?,
        );
        for (x, y) in h0.values().iter().zip(h1.values()) {
            worst = worst.max(rel(*x, *y));
        }
    }
    let grid = uniform_grid(101);
    let pairs = match densities {
        false => vec![],
        true => vec![
            (
                local_constant(dataset, &s0, h, &grid),
                local_constant(&scaled, &s1, h, &grid),
            ),
            (
                local_linear(dataset, &s0, h, &grid),
                local_linear(&scaled, &s1, h, &grid),
            ),
        ],
    };
    for (e0, e1) in pairs {
        let (e0, e1) = (e0.map_err(err)?, e1.map_err(err)?);
        let scale = e0.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in e0.values().iter().zip(e1.values()) {
            worst = worst.max((x - y).abs() / scale.max(f64::MIN_POSITIVE));
        }
    }
    if worst > tol {
        return Err(format!(
            "scaling amounts by {c} moved an estimate by {worst:e}"
        ));
    }
    Ok(())
}

/// `μ_2 = 0.2` and `R = ∫K² = 0.6` for the Epanechnikov kernel.
pub fn epanechnikov_constants() -> Check {
    let k = kernel_epanechnikov();
    if (k.moment(2) - 0.2).abs() > 1e-10 || (k.roughness() - 0.6).abs() > 1e-10 {
        return Err(format!("mu2 = {}, R = {}", k.moment(2), k.roughness()));
    }
    Ok(())
}

/// Moments `∫ K̄(t - s) (t - s)^p W(s) ds / n` of the equivalent kernel
/// `K̄(x) = n (a_2 - a_1 x) K_h(x) / (a_0 a_2 - a_1²)` for `p = 0, 1, 2`,
/// with the `a_j` from the estimator and the integral by quadrature.
pub fn equivalent_kernel_moments(
    dataset: &ClaimDataset,
    t: f64,
    h: f64,
) -> Result<[f64; 3], String> {
    let kernel = Kernel::default();
    let a: Vec<f64> = (0..3)
        .map(|j| aj_moment(dataset, t, h, j, &kernel))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let det = a[0] * a[2] - a[1] * a[1];
    if !(det > 0.0) {
        return Err(format!("singular moments at {t}"));
    }
    let recs = reversed(dataset);
    let mut breaks = vec![t - h, t, t + h];
    for r in &recs {
        breaks.extend([r.u, r.s]);
    }
    breaks.retain(|b| (t - h..=t + h).contains(b));
    let rule = gauss_legendre(10);
    let mut out = [0.0; 3];
    for (p, o) in out.iter_mut().enumerate() {
        *o = integrate(
            |s| {
                let x = t - s;
                (a[2] - a[1] * x) / det
                    * kernel.eval_h(x, h)
                    * x.powi(p as i32)
                    * weighted_exposure(&recs, s)
            },
            &breaks,
            1,
            &rule,
        );
    }
    Ok(out)
}

/// The equivalent kernel integrates to one and has zero first moment.
pub fn equivalent_kernel_identities(dataset: &ClaimDataset, t: f64, h: f64, tol: f64) -> Check {
    let [m0, m1, _] = equivalent_kernel_moments(dataset, t, h)?;
    if (m0 - 1.0).abs() > tol || m1.abs() > tol * h {
        return Err(format!(
            "equivalent kernel moments at t = {t}, h = {h}: {m0}, {m1}"
        ));
    }
    Ok(())
}

/// Positive second moment of the equivalent kernel. This needs the exposure
/// to be roughly balanced around `t`; a window that only catches the tail of
/// one claim's exposure can make it negative.
pub fn equivalent_kernel_positive(dataset: &ClaimDataset, t: f64, h: f64) -> Check {
    let [_, _, m2] = equivalent_kernel_moments(dataset, t, h)?;
    if !(m2 > 0.0) {
        return Err(format!(
            "equivalent kernel second moment {m2} at t = {t}, h = {h}"
        ));
    }
    Ok(())
}
