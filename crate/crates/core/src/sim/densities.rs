//! Densities on the unit interval used by the scenario generator.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{Beta, Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::quad::GaussLegendre;

/// A probability law on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum UnitDensity {
    Uniform,
    Beta {
        a: f64,
        b: f64,
    },
    /// Degenerate law; its `pdf` is zero everywhere.
    PointMass(f64),
    /// Weighted mixture; weights must sum to one.
    Mixture(Vec<(f64, UnitDensity)>),
    /// `(weight, mean, sd)` normal components, truncated to `[0, 1]` as a whole.
    TruncatedNormalMix(Vec<(f64, f64, f64)>),
}

/// Beta(1, 3).
pub fn decreasing_beta() -> UnitDensity {
    UnitDensity::Beta { a: 1.0, b: 3.0 }
}

/// 0.6 Beta(2, 10) + 0.4 Beta(8, 3).
pub fn beta_mixture() -> UnitDensity {
    UnitDensity::Mixture(vec![
        (0.6, UnitDensity::Beta { a: 2.0, b: 10.0 }),
        (0.4, UnitDensity::Beta { a: 8.0, b: 3.0 }),
    ])
}

/// 0.5 N(0.35, 0.12²) + 0.5 N(0.7, 0.08²) truncated to `[0, 1]`.
pub fn truncated_mixed_normal() -> UnitDensity {
    UnitDensity::TruncatedNormalMix(vec![(0.5, 0.35, 0.12), (0.5, 0.7, 0.08)])
}

/// 0.25 Uniform + 0.75 Beta(6, 1): most of the mass sits near `u = 1`, where
/// only short delays can be observed.
pub fn boundary_challenge() -> UnitDensity {
    UnitDensity::Mixture(vec![
        (0.25, UnitDensity::Uniform),
        (0.75, UnitDensity::Beta { a: 6.0, b: 1.0 }),
    ])
}

fn beta(a: f64, b: f64) -> Beta {
    Beta::new(a, b).expect("validated beta parameters")
}

fn normal(mean: f64, sd: f64) -> Normal {
    Normal::new(mean, sd).expect("validated normal parameters")
}

fn truncation_mass(components: &[(f64, f64, f64)]) -> f64 {
    components
        .iter()
        .map(|&(w, m, s)| {
            let n = normal(m, s);
            w * (n.cdf(1.0) - n.cdf(0.0))
        })
        .sum()
}

impl UnitDensity {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            UnitDensity::Uniform => Ok(()),
            UnitDensity::Beta { a, b } => {
                if a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0 {
                    Ok(())
                } else {
                    bad(format!("invalid beta parameters ({a}, {b})"))
                }
            }
            UnitDensity::PointMass(p) => {
                if (0.0..=1.0).contains(p) {
                    Ok(())
                } else {
                    bad(format!("point mass {p} outside [0, 1]"))
                }
            }
            UnitDensity::Mixture(parts) => {
                check_weights(parts.iter().map(|p| p.0))?;
                parts.iter().try_for_each(|(_, d)| d.validate())
            }
            UnitDensity::TruncatedNormalMix(parts) => {
                check_weights(parts.iter().map(|p| p.0))?;
                if parts
                    .iter()
                    .any(|&(_, m, s)| !(m.is_finite() && s.is_finite() && s > 0.0))
                {
                    return bad("normal components need finite mean and positive sd".into());
                }
                if !(truncation_mass(parts) > 1e-12) {
                    return bad("normal mixture has no mass on [0, 1]".into());
                }
                Ok(())
            }
        }
    }

    /// Density with respect to Lebesgue measure on `[0, 1]`, zero outside.
    pub fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match self {
            UnitDensity::Uniform => 1.0,
            UnitDensity::Beta { a, b } => beta(*a, *b).pdf(x),
            UnitDensity::PointMass(_) => 0.0,
            UnitDensity::Mixture(parts) => parts.iter().map(|(w, d)| w * d.pdf(x)).sum(),
            UnitDensity::TruncatedNormalMix(parts) => {
                let raw: f64 = parts.iter().map(|&(w, m, s)| w * normal(m, s).pdf(x)).sum();
                raw / truncation_mass(parts)
            }
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match self {
            UnitDensity::Uniform => x,
            UnitDensity::Beta { a, b } => beta(*a, *b).cdf(x),
            UnitDensity::PointMass(p) => f64::from(u8::from(x >= *p)),
            UnitDensity::Mixture(parts) => parts.iter().map(|(w, d)| w * d.cdf(x)).sum(),
            UnitDensity::TruncatedNormalMix(parts) => {
                let raw: f64 = parts
                    .iter()
                    .map(|&(w, m, s)| {
                        let n = normal(m, s);
                        w * (n.cdf(x) - n.cdf(0.0))
                    })
                    .sum();
                raw / truncation_mass(parts)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            UnitDensity::Uniform => rng.random(),
            UnitDensity::Beta { a, b } => rand_distr::Beta::new(*a, *b)
                .expect("validated beta parameters")
                .sample(rng),
            UnitDensity::PointMass(p) => *p,
            UnitDensity::Mixture(parts) => {
                pick(parts.iter().map(|p| p.0), rng).map_or(0.0, |k| parts[k].1.sample(rng))
            }
            UnitDensity::TruncatedNormalMix(parts) => loop {
                let Some(k) = pick(parts.iter().map(|p| p.0), rng) else {
                    return 0.0;
                };
                let (_, m, s) = parts[k];
                let z: f64 = StandardNormal.sample(rng);
                let x = m + s * z;
                if (0.0..=1.0).contains(&x) {
                    return x;
                }
            },
        }
    }

    /// `∫ f dP` over `(a, b]`; an `a` below zero also captures mass at zero.
    /// The continuous part uses one Gauss–Legendre panel, so callers split
    /// wide intervals themselves.
    pub fn integrate(&self, gl: &GaussLegendre, a: f64, b: f64, f: &impl Fn(f64) -> f64) -> f64 {
        match self {
            UnitDensity::PointMass(p) => {
                if a < *p && *p <= b {
                    f(*p)
                } else {
                    0.0
                }
            }
            UnitDensity::Mixture(parts) => parts
                .iter()
                .map(|(w, d)| w * d.integrate(gl, a, b, f))
                .sum(),
            _ => {
                let (lo, hi) = (a.max(0.0), b.min(1.0));
                if hi <= lo {
                    return 0.0;
                }
                gl.integrate(lo, hi, |x| f(x) * self.pdf(x))
            }
        }
    }

    /// Atoms of the law as `(location, probability)`.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            UnitDensity::PointMass(p) => vec![(*p, 1.0)],
            UnitDensity::Mixture(parts) => parts
                .iter()
                .flat_map(|(w, d)| d.atoms().into_iter().map(move |(x, q)| (x, w * q)))
                .collect(),
            _ => Vec::new(),
        }
    }
}

fn check_weights(weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for w in weights {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "invalid mixture weight {w}"
            )));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "mixture weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

fn pick<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, rng: &mut R) -> Option<usize> {
    let weights: Vec<f64> = weights.collect();
    let mut x = rng.random::<f64>() * weights.iter().sum::<f64>();
    for (k, w) in weights.iter().enumerate() {
        if x < *w {
            return Some(k);
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0)
}
