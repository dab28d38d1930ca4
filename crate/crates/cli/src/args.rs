//! Flag definitions. Every flag is optional so that values can be layered:
//! command line, then the matching `[section]` of `--config`, then defaults.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

/// `a.or(b)` for every listed field.
macro_rules! layer {
    ($a:ident, $b:ident; $($f:ident),* $(,)?) => {
        $( $a.$f = $a.$f.take().or($b.$f); )*
    };
}

/// Generator settings shared by `simulate` and `benchmark`.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SimArgs {
    /// Number of units.
    #[arg(long)]
    pub n: Option<usize>,
    /// Continuous covariates.
    #[arg(long)]
    pub n_cont: Option<usize>,
    /// Binary covariates.
    #[arg(long)]
    pub n_bin: Option<usize>,
    /// Count covariates.
    #[arg(long)]
    pub n_count: Option<usize>,
    /// Kinds of the outcomes observed when m = 1, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub outcome1: Option<Vec<String>>,
    /// Kinds of the outcomes observed when m = 0, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub outcome2: Option<Vec<String>>,
    /// Intercept of every generated channel.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda0: Option<f64>,
    /// Kernel amplitude of the generating functions.
    #[arg(long)]
    pub tau1: Option<f64>,
    /// Squared length-scale of the generating functions.
    #[arg(long)]
    pub tau2: Option<f64>,
    /// Noise standard deviation of continuous variables.
    #[arg(long)]
    pub sigma: Option<f64>,
}

impl SimArgs {
    pub fn layer(&mut self, file: SimArgs) {
        layer!(self, file; n, n_cont, n_bin, n_count, outcome1, outcome2, lambda0, tau1, tau2, sigma);
    }
}

/// Missingness-function settings of the latent split.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct MissingArgs {
    /// Standard deviation of the noise added before taking the sign.
    #[arg(long)]
    pub missing_noise: Option<f64>,
    /// Kernel amplitude of the missingness function.
    #[arg(long)]
    pub missing_tau1: Option<f64>,
    /// Squared length-scale of the missingness function.
    #[arg(long)]
    pub missing_tau2: Option<f64>,
}

impl MissingArgs {
    pub fn layer(&mut self, file: MissingArgs) {
        layer!(self, file; missing_noise, missing_tau1, missing_tau2);
    }
}

/// Chain settings.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct McmcArgs {
    /// Total iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Iterations discarded before draws are kept.
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Keep every `thin`-th draw after burn-in.
    #[arg(long)]
    pub thin: Option<usize>,
    /// Kernel sharing across channels: shared-length-scale or per-channel.
    #[arg(long)]
    pub tying: Option<String>,
    /// Start latent positions at principal-component scores.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub warm_start: Option<bool>,
    /// Turn off step-size adaptation during burn-in.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_adapt: Option<bool>,
}

impl McmcArgs {
    pub fn layer(&mut self, file: McmcArgs) {
        layer!(self, file; iters, burnin, thin, tying, warm_start, no_adapt);
    }

    pub fn any_set(&self) -> bool {
        self.iters.is_some()
            || self.burnin.is_some()
            || self.thin.is_some()
            || self.tying.is_some()
            || self.warm_start.is_some()
            || self.no_adapt.is_some()
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimArgs,
    /// Latent dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn layer(&mut self, mut file: SimulateArgs) {
        self.sim.layer(std::mem::take(&mut file.sim));
        layer!(self, file; d, seed, out);
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SplitArgs {
    /// nmar (sign of a latent GP function plus noise) or logistic.
    #[arg(long)]
    pub mode: Option<String>,
    /// Complete single-source CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Schema file with one `name,kind,role` line per column.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Truth file written by `simulate`; required by the nmar mode.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Covariate driving the logistic mode.
    #[arg(long)]
    pub covariate: Option<String>,
    /// Logistic mode: put exactly half of the units in each pattern.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub equal: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    pub missing: MissingArgs,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SplitArgs {
    pub fn layer(&mut self, mut file: SplitArgs) {
        self.missing.layer(std::mem::take(&mut file.missing));
        layer!(self, file; mode, data, schema, truth, covariate, equal, seed, out);
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct FitArgs {
    /// Two-source CSV with an `m` column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Schema file with one `name,kind,role` line per column.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// gpdcm-nmar, gpdcm-mar, lvm-nmar, lvm-mar or mm.
    #[arg(long)]
    pub model: Option<String>,
    /// Latent dimension.
    #[arg(long)]
    pub d: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub mcmc: McmcArgs,
    /// Also write every retained imputation draw.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub per_draw: Option<bool>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl FitArgs {
    pub fn layer(&mut self, mut file: FitArgs) {
        self.mcmc.layer(std::mem::take(&mut file.mcmc));
        layer!(self, file; data, schema, model, d, per_draw, seed, out);
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct ImputeArgs {
    /// Two-source CSV the imputations belong to.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Schema file with one `name,kind,role` line per column.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// `imputations.csv` written by `fit`.
    #[arg(long)]
    pub imputations: Option<PathBuf>,
    /// Output directory for `completed.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ImputeArgs {
    pub fn layer(&mut self, file: ImputeArgs) {
        layer!(self, file; data, schema, imputations, out);
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SelectDArgs {
    /// Two-source CSV with an `m` column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Schema file with one `name,kind,role` line per column.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// gpdcm-nmar, gpdcm-mar, lvm-nmar or lvm-mar.
    #[arg(long)]
    pub model: Option<String>,
    /// Candidate dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<usize>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub mcmc: McmcArgs,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SelectDArgs {
    pub fn layer(&mut self, mut file: SelectDArgs) {
        self.mcmc.layer(std::mem::take(&mut file.mcmc));
        layer!(self, file; data, schema, model, candidates, seed, jobs, out);
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct BenchmarkArgs {
    /// Number of simulated datasets.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Methods to compare, comma separated; matching always runs.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub missing: MissingArgs,
    /// nmar or independent (fair coin per unit).
    #[arg(long)]
    pub split: Option<String>,
    /// Latent dimension of every fit and of the generator.
    #[arg(long)]
    pub d: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub mcmc: McmcArgs,
    /// Score binary cells with 0/1 predictions instead of probabilities.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub threshold_binary: Option<bool>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl BenchmarkArgs {
    pub fn layer(&mut self, mut file: BenchmarkArgs) {
        self.sim.layer(std::mem::take(&mut file.sim));
        self.missing.layer(std::mem::take(&mut file.missing));
        self.mcmc.layer(std::mem::take(&mut file.mcmc));
        layer!(self, file; reps, methods, split, d, threshold_binary, seed, jobs, out);
    }
}
