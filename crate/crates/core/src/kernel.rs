//! Symmetric polynomial kernels supported on `[-1, 1]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest polynomial degree of any supported kernel.
pub(crate) const MAX_DEGREE: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Epanechnikov,
    Biweight,
    Triweight,
    Uniform,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            KernelKind::Epanechnikov => "epanechnikov",
            KernelKind::Biweight => "biweight",
            KernelKind::Triweight => "triweight",
            KernelKind::Uniform => "uniform",
        };
        f.write_str(name)
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Ok(KernelKind::Epanechnikov),
            "biweight" | "quartic" => Ok(KernelKind::Biweight),
            "triweight" => Ok(KernelKind::Triweight),
            "uniform" | "box" => Ok(KernelKind::Uniform),
            other => Err(Error::InvalidArgument(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Kernel `K(v) = sum_k c_k v^k` on `|v| <= 1`, zero outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    kind: KernelKind,
    coeffs: [f64; MAX_DEGREE + 1],
}

impl Default for Kernel {
    fn default() -> Self {
        kernel_epanechnikov()
    }
}

/// `K(v) = 0.75 (1 - v^2)` on `[-1, 1]`.
pub fn kernel_epanechnikov() -> Kernel {
    Kernel::new(KernelKind::Epanechnikov)
}

impl Kernel {
    pub fn new(kind: KernelKind) -> Self {
        let mut coeffs = [0.0; MAX_DEGREE + 1];
        match kind {
            KernelKind::Epanechnikov => {
                coeffs[0] = 0.75;
                coeffs[2] = -0.75;
            }
            KernelKind::Biweight => {
                let c = 15.0 / 16.0;
                coeffs[0] = c;
                coeffs[2] = -2.0 * c;
                coeffs[4] = c;
            }
            KernelKind::Triweight => {
                let c = 35.0 / 32.0;
                coeffs[0] = c;
                coeffs[2] = -3.0 * c;
                coeffs[4] = 3.0 * c;
                coeffs[6] = -c;
            }
            KernelKind::Uniform => coeffs[0] = 0.5,
        }
        Self { kind, coeffs }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(Self::new(name.parse()?))
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn support_radius(&self) -> f64 {
        1.0
    }

    pub fn eval(&self, v: f64) -> f64 {
        if v.abs() > 1.0 {
            return 0.0;
        }
        horner(&self.coeffs, v)
    }

    /// Rescaled kernel `K_h(x) = K(x / h) / h`.
    pub fn eval_h(&self, x: f64, h: f64) -> f64 {
        self.eval(x / h) / h
    }

    /// `mu_j = ∫ K(v) v^j dv`.
    pub fn moment(&self, j: usize) -> f64 {
        self.partial_moment(j, 1.0)
    }

    /// `∫ K(v)^2 dv`.
    pub fn roughness(&self) -> f64 {
        let mut total = 0.0;
        for (a, ca) in self.coeffs.iter().enumerate() {
            for (b, cb) in self.coeffs.iter().enumerate() {
                if (a + b) % 2 == 0 {
                    total += ca * cb * 2.0 / (a + b + 1) as f64;
                }
            }
        }
        total
    }

    /// `Φ_j(v) = ∫_{-1}^{v} K(y) y^j dy` with `v` clamped to `[-1, 1]`.
    pub fn partial_moment(&self, j: usize, v: f64) -> f64 {
        let v = v.clamp(-1.0, 1.0);
        let mut total = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let p = (k + j + 1) as i32;
            let lower = if p % 2 == 0 { 1.0 } else { -1.0 };
            total += c * (v.powi(p) - lower) / p as f64;
        }
        total
    }

    /// Coefficients of `K(v) v^j` as a polynomial in `v`.
    pub(crate) fn weighted_poly(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; MAX_DEGREE + 1 + j];
        for (k, c) in self.coeffs.iter().enumerate() {
            out[k + j] = *c;
        }
        trim(out)
    }

    /// Coefficients of `Φ_j(v)` as a polynomial in `v` (valid on `[-1, 1]`).
    pub(crate) fn partial_moment_poly(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; MAX_DEGREE + j + 2];
        for (k, c) in self.coeffs.iter().enumerate() {
            let p = k + j + 1;
            let lower = if p % 2 == 0 { 1.0 } else { -1.0 };
            out[p] += c / p as f64;
            out[0] -= c * lower / p as f64;
        }
        trim(out)
    }
}

fn trim(mut poly: Vec<f64>) -> Vec<f64> {
    while poly.len() > 1 && poly[poly.len() - 1] == 0.0 {
        poly.pop();
    }
    poly
}

pub(crate) fn horner(coeffs: &[f64], v: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * v + c)
}
