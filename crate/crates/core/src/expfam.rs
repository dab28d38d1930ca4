//! Exponential-family observation models with canonical links.
//!
//! Bernoulli (logit link), Poisson (log link) and Normal (identity link). All
//! densities are keyed by the canonical parameter `theta`; the Normal also
//! carries a standard deviation as its dispersion. Bernoulli and Poisson use a
//! fixed dispersion of one.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Largest count accepted in data.
pub const MAX_COUNT: f64 = 2_147_483_647.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Binary,
    Count,
    Continuous,
}

impl VariableKind {
    pub const ALL: [VariableKind; 3] = [
        VariableKind::Continuous,
        VariableKind::Binary,
        VariableKind::Count,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariableKind::Binary => "binary",
            VariableKind::Count => "count",
            VariableKind::Continuous => "continuous",
        }
    }

    /// Whether `y` is a legal value for this kind.
    pub fn contains(self, y: f64) -> bool {
        match self {
            VariableKind::Binary => y == 0.0 || y == 1.0,
            VariableKind::Count => y.is_finite() && y >= 0.0 && y.fract() == 0.0 && y <= MAX_COUNT,
            VariableKind::Continuous => y.is_finite(),
        }
    }

    pub fn check(self, y: f64) -> Result<()> {
        if self.contains(y) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "value {y} is outside the {} domain",
                self.as_str()
            )))
        }
    }
}

impl std::str::FromStr for VariableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" | "bernoulli" => Ok(VariableKind::Binary),
            "count" | "poisson" => Ok(VariableKind::Count),
            "continuous" | "normal" | "gaussian" => Ok(VariableKind::Continuous),
            other => Err(Error::Config(format!("unknown variable kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for VariableKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Canonical parameter plus dispersion (standard deviation for Normal cells).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalParam {
    pub theta: f64,
    pub dispersion: f64,
}

impl CanonicalParam {
    pub fn new(theta: f64, dispersion: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::Domain(format!("canonical parameter {theta} is not finite")));
        }
        if !(dispersion > 0.0 && dispersion.is_finite()) {
            return Err(Error::Domain(format!(
                "dispersion must be positive and finite, got {dispersion}"
            )));
        }
        Ok(Self { theta, dispersion })
    }

    /// Unit-dispersion parameter, for Bernoulli and Poisson cells.
    pub fn unit(theta: f64) -> Result<Self> {
        Self::new(theta, 1.0)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function `1 / (1 + e^-x)`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse canonical link.
pub fn mean_from_theta(kind: VariableKind, theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::Domain(format!("canonical parameter {theta} is not finite")));
    }
    Ok(match kind {
        VariableKind::Binary => logistic(theta),
        VariableKind::Count => theta.exp(),
        VariableKind::Continuous => theta,
    })
}

/// `log p(y | theta, dispersion)`.
pub fn log_density(kind: VariableKind, y: f64, param: CanonicalParam) -> Result<f64> {
    kind.check(y)?;
    Ok(log_density_unchecked(kind, y, param.theta, param.dispersion))
}

/// Hot-path variant of [`log_density`]; the caller guarantees `y` is in the
/// domain of `kind` and that `sd > 0`.
#[inline]
pub(crate) fn log_density_unchecked(kind: VariableKind, y: f64, theta: f64, sd: f64) -> f64 {
    match kind {
        VariableKind::Binary => y * theta - softplus(theta),
        VariableKind::Count => y * theta - theta.exp() - ln_factorial(y),
        VariableKind::Continuous => {
            let r = (y - theta) / sd;
            -LN_SQRT_2PI - sd.ln() - 0.5 * r * r
        }
    }
}

#[inline]
fn ln_factorial(y: f64) -> f64 {
    if y < 2.0 {
        0.0
    } else {
        ln_gamma(y + 1.0)
    }
}

/// Draw from the distribution implied by `(kind, param)`.
pub fn sample<R: Rng + ?Sized>(kind: VariableKind, param: CanonicalParam, rng: &mut R) -> Result<f64> {
    let param = CanonicalParam::new(param.theta, param.dispersion)?;
    let mean = mean_from_theta(kind, param.theta)?;
    match kind {
        VariableKind::Binary => Ok(if rng.random::<f64>() < mean { 1.0 } else { 0.0 }),
        VariableKind::Count => {
            if !mean.is_finite() || mean > MAX_COUNT {
                return Err(Error::Domain(format!("Poisson mean {mean} exceeds the count range")));
            }
            if mean < 1e-300 {
                return Ok(0.0);
            }
            let dist = Poisson::new(mean).map_err(|e| Error::Domain(format!("Poisson({mean}): {e}")))?;
            Ok(dist.sample(rng).min(MAX_COUNT))
        }
        VariableKind::Continuous => {
            let dist = Normal::new(mean, param.dispersion)
                .map_err(|e| Error::Domain(format!("Normal({mean}, {}): {e}", param.dispersion)))?;
            Ok(dist.sample(rng))
        }
    }
}
