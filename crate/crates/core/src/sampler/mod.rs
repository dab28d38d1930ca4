//! Random-walk Metropolis-Hastings for the GP and linear data-combination
//! models.
//!
//! One iteration runs, in order: latent positions (step 1), kernel
//! hyperparameters with the whitened latent functions (steps 2-3), continuous
//! dispersions (step 5), imputation of hidden cells (step 6) and outcome
//! intercepts against the completed data (step 4). Steps 1, 2-3 and 5 use the
//! observed-cell likelihood, with the hidden cells integrated out; step 6
//! then redraws the hidden cells from their full conditional, so the order
//! is a valid partially collapsed Gibbs scheme.

mod adapt;
mod augmented;
mod gp;
mod linear;

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{
    probit_term, ChannelLayout, CombinedDataset, LinearLoadings, ModelState, ModelVariant, VariableSpec,
};
use crate::rng::{stream, Rng};

pub use linear::LinearState;

use augmented::Augmented;
use gp::GpEngine;
use linear::LinearEngine;

/// Random-walk proposal variances per parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepVariances {
    pub z: f64,
    pub eta: f64,
    pub tau1: f64,
    /// Variance of the walk on `ln tau2`.
    pub log_tau2: f64,
    pub lambda0: f64,
    pub sigma: f64,
    /// Loading rows of the linear model.
    pub loadings: f64,
}

impl Default for StepVariances {
    fn default() -> Self {
        Self {
            z: 0.01,
            eta: 0.01,
            tau1: 0.04,
            log_tau2: 0.04,
            lambda0: 0.01,
            sigma: 0.0025,
            loadings: 0.01,
        }
    }
}

/// How kernel hyperparameters are shared across GP channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KernelTying {
    /// Every channel has its own `(tau1, tau2)`.
    PerChannel,
    /// Every channel has its own `tau1`; all channels share one `tau2`.
    #[default]
    SharedLengthScale,
}

impl std::str::FromStr for KernelTying {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-channel" => Ok(KernelTying::PerChannel),
            "shared-length-scale" | "shared" => Ok(KernelTying::SharedLengthScale),
            other => Err(Error::Config(format!("unknown kernel tying `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub step_var: StepVariances,
    /// Tune step sizes during burn-in.
    pub adapt: bool,
    pub adapt_target: f64,
    pub seed: u64,
    pub tying: KernelTying,
    /// Size of the coordinate blocks in the `eta` updates.
    pub eta_block: usize,
    /// Start latent positions at principal-component scores of the covariates.
    pub warm_start: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 3000,
            thin: 5,
            step_var: StepVariances::default(),
            adapt: true,
            adapt_target: 0.3,
            seed: 0,
            tying: KernelTying::default(),
            eta_block: 25,
            warm_start: false,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thinning interval must be at least 1".into()));
        }
        if !(self.adapt_target > 0.0 && self.adapt_target < 1.0) {
            return Err(Error::Config("adaptation target must lie in (0, 1)".into()));
        }
        if self.eta_block == 0 {
            return Err(Error::Config("eta block size must be at least 1".into()));
        }
        let v = &self.step_var;
        for (name, x) in [
            ("z", v.z),
            ("eta", v.eta),
            ("tau1", v.tau1),
            ("log_tau2", v.log_tau2),
            ("lambda0", v.lambda0),
            ("sigma", v.sigma),
            ("loadings", v.loadings),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::Config(format!("step variance for {name} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Number of retained draws, `floor((iterations - burn_in) / thin)`.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// A snapshot of either chain type.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainState {
    Gp(ModelState),
    Linear(LinearState),
}

impl ChainState {
    /// Canonical parameter of observation channel `j` for unit `i`, or the
    /// probit argument when `j` is the missingness channel.
    pub fn theta(&self, i: usize, j: usize) -> f64 {
        match self {
            ChainState::Gp(s) => {
                let b = if s.layout.has_intercept(j) { s.lambda0[j] } else { 0.0 };
                b + s.channels[j].f[i]
            }
            ChainState::Linear(s) => s.theta(i, j),
        }
    }

    pub fn dispersion(&self, j: usize) -> f64 {
        match self {
            ChainState::Gp(s) => {
                if s.layout.has_sigma(j) {
                    s.sigma[j]
                } else {
                    1.0
                }
            }
            ChainState::Linear(s) => s.sd(j),
        }
    }

    pub fn layout(&self) -> &ChannelLayout {
        match self {
            ChainState::Gp(s) => &s.layout,
            ChainState::Linear(s) => &s.layout,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            ChainState::Gp(s) => s.n(),
            ChainState::Linear(s) => s.n(),
        }
    }
}

/// Output of one chain.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub variant: ModelVariant,
    /// Hidden `(unit, variable)` cells, in the order used by `imputations`.
    pub missing_cells: Vec<(usize, usize)>,
    /// 1-based iteration number of each retained draw.
    pub iterations: Vec<usize>,
    pub states: Vec<ChainState>,
    pub imputations: Vec<Vec<f64>>,
    /// Observed-data log-likelihood after every iteration.
    pub loglik_trace: Vec<f64>,
    /// Post-burn-in acceptance rate per parameter block.
    pub acceptance_rates: BTreeMap<String, f64>,
    /// Rejected proposals caused by numerical failures.
    pub warnings: Vec<String>,
}

/// Metropolis acceptance for a symmetric proposal.
pub fn mh_accept<R: rand::Rng + ?Sized>(log_post_new: f64, log_post_old: f64, rng: &mut R) -> bool {
    if log_post_new.is_nan() || log_post_new == f64::NEG_INFINITY {
        return false;
    }
    if log_post_old == f64::NEG_INFINITY {
        return true;
    }
    let diff = log_post_new - log_post_old;
    if diff >= 0.0 {
        return true;
    }
    rng.random::<f64>() < diff.exp()
}

/// Posterior mean of each hidden cell across retained draws.
pub fn point_predict(draws: &PosteriorDraws) -> Result<Vec<f64>> {
    if draws.imputations.is_empty() {
        return Err(Error::Empty("no retained draws".into()));
    }
    let k = draws.imputations.len() as f64;
    let mut mean = vec![0.0; draws.missing_cells.len()];
    for draw in &draws.imputations {
        for (m, v) in mean.iter_mut().zip(draw) {
            *m += v;
        }
    }
    Ok(mean.into_iter().map(|v| v / k).collect())
}

/// Principal-component scores of the standardized covariates, scaled to
/// unit variance. Dimensions beyond the covariate count are zero.
pub fn pca_scores(data: &CombinedDataset, d: usize) -> Array2<f64> {
    let x = data.covariates();
    let (n, q) = x.dim();
    let mut out = Array2::zeros((n, d));
    if n < 2 || q == 0 {
        return out;
    }
    let mut std = x.clone();
    for mut col in std.columns_mut() {
        let mean = col.mean().unwrap_or(0.0);
        let sd = col.std(1.0);
        col.mapv_inplace(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 });
    }
    let cov = std.t().dot(&std) / (n as f64 - 1.0);
    let (vals, vecs) = linalg::symmetric_eigen(cov.as_slice().expect("standard layout"), q);
    for k in 0..d.min(q) {
        if !(vals[k] > 1e-12) {
            break;
        }
        let scale = 1.0 / vals[k].sqrt();
        for i in 0..n {
            out[[i, k]] = scale * (0..q).map(|c| std[[i, c]] * vecs[c * q + k]).sum::<f64>();
        }
    }
    out
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn initial_positions(data: &CombinedDataset, d: usize, cfg: &McmcConfig, rng: &mut Rng) -> Array2<f64> {
    if cfg.warm_start {
        pca_scores(data, d)
    } else {
        Array2::from_shape_simple_fn((data.n(), d), || 0.1 * normal(rng))
    }
}

/// Default starting state of a chain.
pub fn initial_state(
    data: &CombinedDataset,
    variant: ModelVariant,
    d: usize,
    cfg: &McmcConfig,
    rng: &mut Rng,
) -> Result<ChainState> {
    if d == 0 {
        return Err(Error::Config("latent dimension must be at least 1".into()));
    }
    let layout = ChannelLayout::for_data(data, variant.is_nmar());
    let aug = Augmented::new(data);
    let p = layout.p();
    let sigma: Vec<f64> = (0..p)
        .map(|j| if layout.has_sigma(j) { aug.observed_sd(j) } else { 1.0 })
        .collect();
    let z = initial_positions(data, d, cfg, rng);
    let c = layout.n_channels();
    let n = data.n();
    if variant.is_gp() {
        let (groups, n_groups) = match cfg.tying {
            KernelTying::PerChannel => ((0..c).collect(), c),
            KernelTying::SharedLengthScale => (vec![0; c], 1),
        };
        let eta = (0..c)
            .map(|_| Array1::from_shape_simple_fn(n, || normal(rng)))
            .collect();
        let lambda0 = (0..p)
            .map(|j| if layout.samples_intercept(j) { 0.0 } else { aug.link_of_mean(j) })
            .collect();
        let st = ModelState::from_eta(layout, z, vec![1.0; c], groups, vec![1.0; n_groups], eta, lambda0, sigma)?;
        Ok(ChainState::Gp(st))
    } else {
        let lambda = Array2::from_shape_simple_fn((c, d), || 0.1 * normal(rng));
        let loadings = LinearLoadings::new(lambda, Array1::zeros(p))?;
        Ok(ChainState::Linear(LinearState {
            z,
            loadings,
            sigma,
            layout,
        }))
    }
}

enum Engine {
    Gp(Box<GpEngine>),
    Linear(Box<LinearEngine>),
}

impl Engine {
    fn sweep(&mut self, rng: &mut Rng, adapt: Option<f64>) -> Result<()> {
        match self {
            Engine::Gp(e) => e.sweep(rng, adapt),
            Engine::Linear(e) => e.sweep(rng, adapt),
        }
    }

    fn loglik(&self) -> f64 {
        match self {
            Engine::Gp(e) => e.loglik(),
            Engine::Linear(e) => e.loglik(),
        }
    }

    fn snapshot(&self) -> ChainState {
        match self {
            Engine::Gp(e) => ChainState::Gp(e.st.clone()),
            Engine::Linear(e) => ChainState::Linear(e.st.clone()),
        }
    }

    fn imputed(&self) -> Vec<f64> {
        match self {
            Engine::Gp(e) => e.aug.imputed(),
            Engine::Linear(e) => e.aug.imputed(),
        }
    }
}

/// Run one chain from the default starting state.
pub fn run_chain(data: &CombinedDataset, variant: ModelVariant, d: usize, cfg: &McmcConfig) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, 0);
    let init = initial_state(data, variant, d, cfg, &mut rng)?;
    run_chain_with(data, variant, cfg, init, rng)
}

/// Run one chain from a caller-supplied starting state.
pub fn run_chain_from(
    data: &CombinedDataset,
    variant: ModelVariant,
    cfg: &McmcConfig,
    init: ChainState,
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    run_chain_with(data, variant, cfg, init, stream(cfg.seed, 0))
}

fn run_chain_with(
    data: &CombinedDataset,
    variant: ModelVariant,
    cfg: &McmcConfig,
    init: ChainState,
    mut rng: Rng,
) -> Result<PosteriorDraws> {
    if init.layout() != &ChannelLayout::for_data(data, variant.is_nmar()) || init.n() != data.n() {
        return Err(Error::Config(format!("starting state does not match the data layout of {variant}")));
    }
    let aug = Augmented::new(data);
    let mut engine = match (init, variant.is_gp()) {
        (ChainState::Gp(st), true) => {
            let e = GpEngine::new(st, aug, cfg).map_err(|e| Error::Init(e.to_string()))?;
            if !e.log_posterior().is_finite() {
                return Err(gp::init_report(&e));
            }
            Engine::Gp(Box::new(e))
        }
        (ChainState::Linear(st), false) => {
            let e = LinearEngine::new(st, aug, cfg);
            if !e.log_posterior().is_finite() {
                return Err(linear::init_report(&e));
            }
            Engine::Linear(Box::new(e))
        }
        _ => return Err(Error::Config(format!("starting state has the wrong type for {variant}"))),
    };

    let missing_cells = data.missing_cells();
    let mut draws = PosteriorDraws {
        variant,
        missing_cells,
        iterations: Vec::with_capacity(cfg.retained()),
        states: Vec::with_capacity(cfg.retained()),
        imputations: Vec::with_capacity(cfg.retained()),
        loglik_trace: Vec::with_capacity(cfg.iterations),
        acceptance_rates: BTreeMap::new(),
        warnings: Vec::new(),
    };
    for t in 1..=cfg.iterations {
        let adapt = (cfg.adapt && t <= cfg.burn_in).then_some(cfg.adapt_target);
        engine.sweep(&mut rng, adapt)?;
        let ll = engine.loglik();
        if !ll.is_finite() {
            return Err(Error::Numerical(format!("log-likelihood became {ll} at iteration {t}")));
        }
        draws.loglik_trace.push(ll);
        if t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0 {
            draws.iterations.push(t);
            draws.states.push(engine.snapshot());
            draws.imputations.push(engine.imputed());
        }
    }
    match &engine {
        Engine::Gp(e) => {
            draws.acceptance_rates = adapt::acceptance_by_block(e.slots());
            draws.warnings = e.warnings.clone();
        }
        Engine::Linear(e) => draws.acceptance_rates = adapt::acceptance_by_block(e.slots()),
    }
    Ok(draws)
}

impl PosteriorDraws {
    /// Observed-data log-likelihood at the posterior mean of the canonical
    /// parameters (and of the dispersions).
    pub fn loglik_at_posterior_mean(&self, data: &CombinedDataset) -> Result<f64> {
        let first = self.states.first().ok_or_else(|| Error::Empty("no retained draws".into()))?;
        let layout = first.layout().clone();
        let (n, p) = (data.n(), data.p());
        let c = layout.n_channels();
        let k = self.states.len() as f64;
        let mut theta = vec![0.0; n * c];
        let mut sd = vec![0.0; p];
        for s in &self.states {
            for i in 0..n {
                for j in 0..c {
                    theta[i * c + j] += s.theta(i, j) / k;
                }
            }
            for (j, v) in sd.iter_mut().enumerate() {
                *v += s.dispersion(j) / k;
            }
        }
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..p {
                if let Some(y) = data.value(i, j) {
                    let param = crate::expfam::CanonicalParam::new(theta[i * c + j], sd[j])?;
                    total += crate::expfam::log_density(layout.kinds[j], y, param)?;
                }
            }
            if let Some(mc) = layout.missing_channel() {
                total += probit_term(data.m()[i], theta[i * c + mc]);
            }
        }
        Ok(total)
    }

    /// Write one row per retained draw: iteration, log-likelihood,
    /// intercepts, kernel hyperparameters and dispersions.
    pub fn write_trace(&self, path: &Path, specs: &[VariableSpec]) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let Some(first) = self.states.first() else {
            w.write_record(["iteration", "loglik"])?;
            w.flush().map_err(|e| Error::io(path, e))?;
            return Ok(());
        };
        let layout = first.layout();
        let name = |j: usize| specs.get(j).map(|s| s.name.as_str()).unwrap_or("m");
        let mut header = vec!["iteration".to_string(), "loglik".to_string()];
        let intercepts: Vec<usize> = match first {
            ChainState::Gp(_) => layout.outcome_channels(),
            ChainState::Linear(_) => (0..layout.p()).collect(),
        };
        header.extend(intercepts.iter().map(|&j| format!("lambda0_{}", name(j))));
        if let ChainState::Gp(s) = first {
            header.extend((0..s.channels.len()).map(|j| format!("tau1_{}", name(j))));
            header.extend((0..s.tau2.len()).map(|g| format!("tau2_{g}")));
        }
        let sig = layout.continuous_channels();
        header.extend(sig.iter().map(|&j| format!("sigma_{}", name(j))));
        w.write_record(&header)?;
        for (t, s) in self.iterations.iter().zip(&self.states) {
            let mut row = vec![t.to_string(), self.loglik_trace[t - 1].to_string()];
            match s {
                ChainState::Gp(s) => {
                    row.extend(intercepts.iter().map(|&j| s.lambda0[j].to_string()));
                    row.extend(s.channels.iter().map(|c| c.tau1.to_string()));
                    row.extend(s.tau2.iter().map(|v| v.to_string()));
                    row.extend(sig.iter().map(|&j| s.sigma[j].to_string()));
                }
                ChainState::Linear(s) => {
                    row.extend(intercepts.iter().map(|&j| s.loadings.lambda0[j].to_string()));
                    row.extend(sig.iter().map(|&j| s.sigma[j].to_string()));
                }
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Write the posterior-mean imputation of every hidden cell, with the
    /// individual draws appended as extra columns when `per_draw` is set.
    pub fn write_imputations(&self, path: &Path, specs: &[VariableSpec], per_draw: bool) -> Result<()> {
        let mean = point_predict(self)?;
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut header = vec!["unit".to_string(), "variable".to_string(), "kind".to_string(), "mean".to_string()];
        if per_draw {
            header.extend(self.iterations.iter().map(|t| format!("draw_{t}")));
        }
        w.write_record(&header)?;
        for (c, &(i, j)) in self.missing_cells.iter().enumerate() {
            let mut row = vec![i.to_string(), specs[j].name.clone(), specs[j].kind.to_string(), mean[c].to_string()];
            if per_draw {
                row.extend(self.imputations.iter().map(|d| d[c].to_string()));
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Io {
            path: path.into(),
            source: std::io::Error::other(format!("{other:?}")),
        },
    }
}

/// Geweke convergence z-score comparing the mean of the first `first`
/// fraction of a trace with the mean of the last `last` fraction. Variances
/// use non-overlapping batch means to allow for autocorrelation.
pub fn geweke_z(trace: &[f64], first: f64, last: f64) -> Result<f64> {
    if !(first > 0.0 && last > 0.0 && first + last <= 1.0) {
        return Err(Error::Config("Geweke fractions must be positive and sum to at most 1".into()));
    }
    let n = trace.len();
    let na = (first * n as f64).floor() as usize;
    let nb = (last * n as f64).floor() as usize;
    if na < 4 || nb < 4 {
        return Err(Error::Empty(format!("trace of length {n} is too short for a Geweke test")));
    }
    let a = &trace[..na];
    let b = &trace[n - nb..];
    let (ma, va) = batch_mean_var(a);
    let (mb, vb) = batch_mean_var(b);
    let se = (va + vb).sqrt();
    if se == 0.0 {
        return Ok(if ma == mb { 0.0 } else { f64::INFINITY });
    }
    Ok((ma - mb) / se)
}

/// Mean and the batch-means estimate of the variance of the mean.
fn batch_mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let batches = (n as f64).sqrt().floor().max(2.0) as usize;
    let size = n / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| x[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let bm = means.iter().sum::<f64>() / batches as f64;
    let var_b = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    (mean, var_b / batches as f64)
}

#[cfg(test)]
mod tests;
