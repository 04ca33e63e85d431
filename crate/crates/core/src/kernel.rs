//! Bounded translation-invariant kernels on ℝ^d.
//!
//! Both built-in families are characteristic on ℝ^d, normalized so that
//! `g(x, x) = 1`, and decay to 0 as `‖x − y‖ → ∞`. Over the unbounded domain
//! this gives supremum `ḡ = 1` and range `g̃ = sup − inf = 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `exp(−‖x − y‖² / γ²)`
    GaussianRbf,
    /// `exp(−‖x − y‖ / γ)`
    Laplacian,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::GaussianRbf => f.write_str("gaussian-rbf"),
            KernelFamily::Laplacian => f.write_str("laplacian"),
        }
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-rbf" => Ok(KernelFamily::GaussianRbf),
            "laplacian" => Ok(KernelFamily::Laplacian),
            other => Err(Error::input(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// Supremum `ḡ` and range `g̃` of a kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelBounds {
    pub g_bar: f64,
    pub g_tilde: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    bandwidth: f64,
    dimension: usize,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64, dimension: usize) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::input(format!(
                "kernel bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        if dimension == 0 {
            return Err(Error::input("kernel dimension must be at least 1"));
        }
        Ok(KernelSpec {
            family,
            bandwidth,
            dimension,
        })
    }

    pub fn gaussian(bandwidth: f64, dimension: usize) -> Result<Self> {
        Self::new(KernelFamily::GaussianRbf, bandwidth, dimension)
    }

    pub fn laplacian(bandwidth: f64, dimension: usize) -> Result<Self> {
        Self::new(KernelFamily::Laplacian, bandwidth, dimension)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Evaluates `g(x, y)`, checking both points against the kernel dimension.
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.eval(x, y))
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Unchecked evaluation for the hot loops; callers guarantee dimensions.
    #[inline]
    pub(crate) fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        match self.family {
            KernelFamily::GaussianRbf => (-sq / (self.bandwidth * self.bandwidth)).exp(),
            KernelFamily::Laplacian => (-sq.sqrt() / self.bandwidth).exp(),
        }
    }

    /// `ḡ` and `g̃` over all of ℝ^d. The infimum is the limit 0, so `g̃ = ḡ`.
    pub fn bounds(&self) -> KernelBounds {
        KernelBounds {
            g_bar: 1.0,
            g_tilde: 1.0,
        }
    }
}
