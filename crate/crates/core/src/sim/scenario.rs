//! The eight-scenario study: independent `(T, U)` truncated to the unit
//! triangle, with gamma (shape one) claim costs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClaimDataset, ClaimRecord};
use crate::quad::GaussLegendre;

use super::densities::{
    beta_mixture, boundary_challenge, decreasing_beta, truncated_mixed_normal, UnitDensity,
};

/// Mean cost `θ(t, u) = g(t) k(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostLaw {
    /// `(t + 0.75)((u - 0.25)² + 1)`
    Moderate,
    /// `t (u² - u + 1)`
    Heavy,
    /// `1`
    Unit,
}

impl CostLaw {
    pub fn delay_factor(self, t: f64) -> f64 {
        match self {
            CostLaw::Moderate => t + 0.75,
            CostLaw::Heavy => t,
            CostLaw::Unit => 1.0,
        }
    }

    pub fn accident_factor(self, u: f64) -> f64 {
        match self {
            CostLaw::Moderate => (u - 0.25).powi(2) + 1.0,
            CostLaw::Heavy => u * u - u + 1.0,
            CostLaw::Unit => 1.0,
        }
    }

    pub fn mean(self, t: f64, u: f64) -> f64 {
        self.delay_factor(t) * self.accident_factor(u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    /// Numbered scenario this spec was built from, if any.
    pub id: Option<u8>,
    pub delay: UnitDensity,
    pub accident: UnitDensity,
    pub cost: CostLaw,
    pub n: usize,
    pub seed: u64,
}

pub const SCENARIO_IDS: [u8; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

/// Scenarios 3, 4, 7 and 8 use the boundary-challenge accident density.
pub fn is_boundary_scenario(id: u8) -> bool {
    matches!(id, 3 | 4 | 7 | 8)
}

impl ScenarioSpec {
    /// Scenario `id` in 1..=8: delay law (ids 1–4 decreasing beta, 5–8 beta
    /// mixture), accident law (pairs alternate between truncated mixed normal
    /// and boundary challenge), cost law (odd moderate, even heavy).
    pub fn numbered(id: u8, n: usize, seed: u64) -> Result<Self> {
        if !(1..=8).contains(&id) {
            return Err(Error::InvalidArgument(format!(
                "scenario id {id} not in 1..=8"
            )));
        }
        let k = id - 1;
        let delay = if k < 4 {
            decreasing_beta()
        } else {
            beta_mixture()
        };
        let accident = if k % 4 < 2 {
            truncated_mixed_normal()
        } else {
            boundary_challenge()
        };
        let cost = if k % 2 == 0 {
            CostLaw::Moderate
        } else {
            CostLaw::Heavy
        };
        Ok(Self {
            id: Some(id),
            delay,
            accident,
            cost,
            n,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("scenario needs n >= 1".into()));
        }
        self.delay.validate()?;
        self.accident.validate()
    }

    pub fn truth(&self) -> ScenarioTruth {
        ScenarioTruth::new(self.delay.clone(), self.accident.clone(), self.cost)
    }
}

/// Known laws behind a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTruth {
    delay: UnitDensity,
    accident: UnitDensity,
    cost: CostLaw,
    delay_norm: f64,
    accident_norm: f64,
}

const PANELS: usize = 256;

impl ScenarioTruth {
    pub fn new(delay: UnitDensity, accident: UnitDensity, cost: CostLaw) -> Self {
        let gl = GaussLegendre::new(20);
        let delay_norm = expectation(&delay, &gl, &|t| cost.delay_factor(t));
        let accident_norm = expectation(&accident, &gl, &|u| cost.accident_factor(u));
        Self {
            delay,
            accident,
            cost,
            delay_norm,
            accident_norm,
        }
    }

    pub fn delay_density(&self, t: f64) -> f64 {
        self.delay.pdf(t)
    }

    pub fn accident_density(&self, u: f64) -> f64 {
        self.accident.pdf(u)
    }

    /// Cost-weighted delay density `E[Z | T = t] f_T(t) / E[Z]`.
    pub fn weighted_delay_density(&self, t: f64) -> f64 {
        self.cost.delay_factor(t) * self.delay.pdf(t) / self.delay_norm
    }

    /// Cost-weighted accident density `E[Z | U = u] f_U(u) / E[Z]`.
    pub fn weighted_accident_density(&self, u: f64) -> f64 {
        self.cost.accident_factor(u) * self.accident.pdf(u) / self.accident_norm
    }

    /// Cost-weighted mass of `t + u > 1` over that of `t + u <= 1`, on the
    /// unit square.
    ///
    /// Because the cost factorizes, this is
    /// `∫ k(u) [G(1) - G(1-u)] dF_U / ∫ k(u) G(1-u) dF_U` with
    /// `G(x) = ∫_0^x g dF_T`; the outer integral uses composite Gauss–Legendre
    /// and `G` is accumulated exactly between consecutive outer nodes.
    pub fn reserve_fraction(&self) -> f64 {
        let gl = GaussLegendre::new(20);
        let inner = GaussLegendre::new(8);
        let g = |t: f64| self.cost.delay_factor(t);
        let mut nodes = outer_nodes(&self.accident, &gl);
        nodes.sort_by(|a, b| b.0.total_cmp(&a.0));
        // descending u means ascending 1 - u
        let mut cum = 0.0;
        let mut prev = -1.0;
        let (mut num, mut den) = (0.0, 0.0);
        let total = cumulative(&self.delay, &inner, -1.0, 1.0, &g);
        for (u, w) in nodes {
            let x = 1.0 - u;
            if x > prev {
                cum += cumulative(&self.delay, &inner, prev, x, &g);
                prev = x;
            }
            let k = self.cost.accident_factor(u) * w;
            num += k * (total - cum);
            den += k * cum;
        }
        num / den
    }
}

fn expectation(d: &UnitDensity, gl: &GaussLegendre, f: &impl Fn(f64) -> f64) -> f64 {
    let mut total = d.integrate(gl, -1.0, 0.0, f);
    for k in 0..PANELS {
        let a = k as f64 / PANELS as f64;
        total += d.integrate(gl, a, (k + 1) as f64 / PANELS as f64, f);
    }
    total
}

/// `∫_{(a, b]} f dP`, refined so that no Gauss–Legendre panel is wider than
/// `1 / PANELS`.
fn cumulative(d: &UnitDensity, gl: &GaussLegendre, a: f64, b: f64, f: &impl Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    let mut lo = a;
    if lo < 0.0 {
        total += d.integrate(gl, lo, 0.0, f);
        lo = 0.0;
    }
    let hi = b.min(1.0);
    if hi <= lo {
        return total;
    }
    let pieces = ((hi - lo) * PANELS as f64).ceil().max(1.0) as usize;
    let step = (hi - lo) / pieces as f64;
    for k in 0..pieces {
        let x0 = lo + k as f64 * step;
        let x1 = if k + 1 == pieces { hi } else { x0 + step };
        total += d.integrate(gl, x0, x1, f);
    }
    total
}

/// Quadrature nodes `(x, w)` with `Σ w f(x) ≈ ∫ f dP`.
fn outer_nodes(d: &UnitDensity, gl: &GaussLegendre) -> Vec<(f64, f64)> {
    let mut out = d.atoms();
    let continuous_weight = 1.0 - out.iter().map(|a| a.1).sum::<f64>();
    if continuous_weight <= 1e-15 {
        return out;
    }
    let h = 1.0 / PANELS as f64;
    for k in 0..PANELS {
        let mid = (k as f64 + 0.5) * h;
        for (x, w) in gl.nodes().iter().zip(gl.weights()) {
            let u = mid + 0.5 * h * x;
            out.push((u, 0.5 * h * w * d.pdf(u)));
        }
    }
    out
}

/// True cost-weighted reserve fraction of a scenario.
pub fn true_reserve_fraction(spec: &ScenarioSpec) -> f64 {
    spec.truth().reserve_fraction()
}

#[derive(Debug, Clone)]
pub struct ScenarioSample {
    pub dataset: ClaimDataset,
    pub truth: ScenarioTruth,
    pub attempts: u64,
}

const MIN_ACCEPTANCE: f64 = 1e-4;
const ACCEPTANCE_CHECK: u64 = 100_000;

/// Draws `(T, U)` until `n` pairs satisfy `t + u <= 1`, each with a cost
/// `Z ~ θ(T, U) Exp(1)`.
pub fn simulate_scenario(spec: &ScenarioSpec) -> Result<ScenarioSample> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::with_capacity(spec.n);
    let mut attempts = 0u64;
    while records.len() < spec.n {
        attempts += 1;
        if attempts >= ACCEPTANCE_CHECK && attempts % ACCEPTANCE_CHECK == 0 {
            let rate = records.len() as f64 / attempts as f64;
            if rate < MIN_ACCEPTANCE {
                return Err(Error::LowAcceptance(rate));
            }
        }
        let t = spec.delay.sample(&mut rng);
        let u = spec.accident.sample(&mut rng);
        if t + u > 1.0 {
            continue;
        }
        let e: f64 = rng.sample(Exp1);
        records.push(ClaimRecord::new(u, t, spec.cost.mean(t, u) * e));
    }
    Ok(ScenarioSample {
        dataset: ClaimDataset::new(records, 1.0)?,
        truth: spec.truth(),
        attempts,
    })
}
