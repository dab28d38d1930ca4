use ndarray::{ArrayView1, ArrayView2};
use statrs::function::gamma::ln_gamma;

use super::dataset::CombinedDataset;
use super::state::{ChannelLayout, LinearLoadings, ModelState};
use crate::error::{Error, Result};
use crate::expfam::{log_density, CanonicalParam};

/// Probit probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before
/// taking logs.
pub const PROB_CLAMP: f64 = 1e-15;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

pub(crate) fn log_std_normal(x: f64) -> f64 {
    -LN_SQRT_2PI - 0.5 * x * x
}

pub(crate) fn log_half_normal(x: f64) -> f64 {
    if x > 0.0 && x.is_finite() {
        std::f64::consts::LN_2 + log_std_normal(x)
    } else {
        f64::NEG_INFINITY
    }
}

pub(crate) fn log_inv_gamma(x: f64, shape: f64, scale: f64) -> f64 {
    if x > 0.0 && x.is_finite() {
        shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
    } else {
        f64::NEG_INFINITY
    }
}

/// Canonical parameter of an observation channel for one unit under the GP
/// model.
pub fn canonical_gp(state: &ModelState, unit: usize, channel: usize) -> Result<CanonicalParam> {
    let layout = &state.layout;
    if channel >= layout.p() {
        return Err(Error::Shape(format!(
            "channel {channel} is not an observation channel (p = {})",
            layout.p()
        )));
    }
    if unit >= state.n() {
        return Err(Error::Shape(format!("unit {unit} out of range (n = {})", state.n())));
    }
    let intercept = if layout.has_intercept(channel) {
        state.lambda0[channel]
    } else {
        0.0
    };
    let dispersion = if layout.has_sigma(channel) {
        state.sigma[channel]
    } else {
        1.0
    };
    CanonicalParam::new(intercept + state.channels[channel].f[unit], dispersion)
}

/// Canonical parameter of the linear model, with unit dispersion. The
/// likelihood attaches `sigma` for continuous channels.
pub fn canonical_linear(load: &LinearLoadings, z: ArrayView1<'_, f64>, channel: usize) -> Result<CanonicalParam> {
    if channel >= load.lambda0.len() {
        return Err(Error::Shape(format!("channel {channel} has no intercept")));
    }
    if z.len() != load.d() {
        return Err(Error::Shape(format!(
            "latent vector has length {} but loadings have {} columns",
            z.len(),
            load.d()
        )));
    }
    let theta = load.lambda0[channel] + load.lambda.row(channel).dot(&z);
    CanonicalParam::unit(theta)
}

/// `(Phi(f), 1 - Phi(f))`
pub fn missing_prob(f_m: f64) -> (f64, f64) {
    let r = f_m / std::f64::consts::SQRT_2;
    (0.5 * libm::erfc(-r), 0.5 * libm::erfc(r))
}

/// `m ln Phi(f) + (1 - m) ln(1 - Phi(f))` with clamped probabilities.
pub fn probit_term(m: u8, f_m: f64) -> f64 {
    let (p1, p0) = missing_prob(f_m);
    let p = if m == 1 { p1 } else { p0 };
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln()
}

fn check_state(data: &CombinedDataset, layout: &ChannelLayout, n: usize) -> Result<()> {
    if n != data.n() {
        return Err(Error::Shape(format!("state has {n} units, data has {}", data.n())));
    }
    if layout.p() != data.p() {
        return Err(Error::Shape(format!(
            "state has {} observation channels, data has {} variables",
            layout.p(),
            data.p()
        )));
    }
    Ok(())
}

fn observed_channel_sum(
    data: &CombinedDataset,
    channel: usize,
    param: impl Fn(usize) -> Result<CanonicalParam>,
) -> Result<f64> {
    let kind = data.specs()[channel].kind;
    let mut total = 0.0;
    for i in 0..data.n() {
        if let Some(y) = data.value(i, channel) {
            total += log_density(kind, y, param(i)?)?;
        }
    }
    Ok(total)
}

/// Log-likelihood contribution of one channel. Channel `p` is the probit
/// missingness channel.
pub fn loglik_channel(data: &CombinedDataset, state: &ModelState, channel: usize) -> Result<f64> {
    check_state(data, &state.layout, state.n())?;
    if Some(channel) == state.layout.missing_channel() {
        let f = &state.channels[channel].f;
        return Ok(data.m().iter().zip(f).map(|(&m, &fm)| probit_term(m, fm)).sum());
    }
    observed_channel_sum(data, channel, |i| canonical_gp(state, i, channel))
}

/// Observed-data log-likelihood ignoring the missingness mechanism.
pub fn loglik_mar(data: &CombinedDataset, state: &ModelState) -> Result<f64> {
    check_state(data, &state.layout, state.n())?;
    (0..data.p()).map(|j| loglik_channel(data, state, j)).sum()
}

/// [`loglik_mar`] plus the probit log-likelihood of the pattern indicators.
pub fn loglik_nmar(data: &CombinedDataset, state: &ModelState) -> Result<f64> {
    let mc = state
        .layout
        .missing_channel()
        .ok_or_else(|| Error::Config("state has no missingness channel".into()))?;
    Ok(loglik_mar(data, state)? + loglik_channel(data, state, mc)?)
}

/// Log prior density of a GP state; `-inf` outside the support.
pub fn log_prior(state: &ModelState) -> f64 {
    let layout = &state.layout;
    let mut lp: f64 = state.z.iter().map(|&v| log_std_normal(v)).sum();
    for ch in &state.channels {
        lp += ch.eta.iter().map(|&v| log_std_normal(v)).sum::<f64>();
        lp += log_half_normal(ch.tau1);
    }
    for (g, &t2) in state.tau2.iter().enumerate() {
        if state.channels.iter().any(|c| c.group == g) {
            lp += log_inv_gamma(t2, 5.0, 5.0);
        }
    }
    for j in 0..layout.p() {
        if layout.samples_intercept(j) {
            lp += log_std_normal(state.lambda0[j]);
        }
        if layout.has_sigma(j) {
            lp += log_half_normal(state.sigma[j]);
        }
    }
    lp
}

fn check_linear(data: &CombinedDataset, z: ArrayView2<'_, f64>, load: &LinearLoadings, sigma: &[f64]) -> Result<()> {
    if z.nrows() != data.n() {
        return Err(Error::Shape(format!("{} latent rows for {} units", z.nrows(), data.n())));
    }
    if load.lambda0.len() != data.p() || sigma.len() != data.p() {
        return Err(Error::Shape(format!(
            "expected {} intercepts and dispersions",
            data.p()
        )));
    }
    Ok(())
}

/// Observed-data log-likelihood of the linear model.
pub fn loglik_linear_mar(
    data: &CombinedDataset,
    z: ArrayView2<'_, f64>,
    load: &LinearLoadings,
    sigma: &[f64],
) -> Result<f64> {
    check_linear(data, z, load, sigma)?;
    let mut total = 0.0;
    for (j, spec) in data.specs().iter().enumerate() {
        let sd = if spec.kind == crate::expfam::VariableKind::Continuous {
            sigma[j]
        } else {
            1.0
        };
        total += observed_channel_sum(data, j, |i| {
            let theta = canonical_linear(load, z.row(i), j)?.theta;
            CanonicalParam::new(theta, sd)
        })?;
    }
    Ok(total)
}

/// [`loglik_linear_mar`] plus the probit term with argument `z_i' lambda_(p+1)`.
pub fn loglik_linear_nmar(
    data: &CombinedDataset,
    z: ArrayView2<'_, f64>,
    load: &LinearLoadings,
    sigma: &[f64],
) -> Result<f64> {
    let base = loglik_linear_mar(data, z, load, sigma)?;
    if load.lambda.nrows() != data.p() + 1 {
        return Err(Error::Config("loadings have no missingness row".into()));
    }
    let row = load.lambda.row(data.p());
    let probit: f64 = data
        .m()
        .iter()
        .enumerate()
        .map(|(i, &m)| probit_term(m, row.dot(&z.row(i))))
        .sum();
    Ok(base + probit)
}

/// Log prior of the linear model: standard normal latents, loadings and
/// intercepts; half-normal dispersions.
pub fn log_prior_linear(z: ArrayView2<'_, f64>, load: &LinearLoadings, sigma: &[f64], layout: &ChannelLayout) -> f64 {
    let mut lp: f64 = z.iter().map(|&v| log_std_normal(v)).sum();
    lp += load.lambda.iter().map(|&v| log_std_normal(v)).sum::<f64>();
    lp += load.lambda0.iter().map(|&v| log_std_normal(v)).sum::<f64>();
    for j in layout.continuous_channels() {
        lp += log_half_normal(sigma[j]);
    }
    lp
}
