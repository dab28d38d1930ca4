//! Imputation scoring, CAIC-based choice of the latent dimension and the
//! multi-replication benchmark.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::match_impute;
use crate::datagen::{generate_single_source, split_nmar, split_with_missingness_function, SimConfig, Split};
use crate::error::{Error, Result};
use crate::expfam::VariableKind;
use crate::model::{ChannelLayout, CombinedDataset, ModelVariant};
use crate::rng::{derive_seed, stream};
use crate::sampler::{point_predict, run_chain, McmcConfig};

/// Mean squared error over paired values.
pub fn mse(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::Shape(format!("{} truths for {} predictions", truth.len(), predicted.len())));
    }
    if truth.is_empty() {
        return Err(Error::Empty("no cells to score".into()));
    }
    Ok(truth.iter().zip(predicted).map(|(t, p)| (t - p).powi(2)).sum::<f64>() / truth.len() as f64)
}

/// A method's MSE relative to matching.
pub fn mse_ratio(method_mse: f64, mm_mse: f64) -> Result<f64> {
    if mm_mse == 0.0 {
        return Err(Error::DegenerateBaseline);
    }
    Ok(method_mse / mm_mse)
}

/// `-2 loglik + nu (ln n + 1)`
pub fn caic(loglik: f64, nu: usize, n: usize) -> f64 {
    -2.0 * loglik + nu as f64 * ((n as f64).ln() + 1.0)
}

/// Parameter count used in the CAIC penalty.
///
/// GP variants: `n d + 2 c + (outcome intercepts) + (continuous sigmas)`,
/// with `c` channels including the missingness channel under NMAR.
/// Linear variants: `n d + c d + p + (continuous sigmas)`.
pub fn effective_params(variant: ModelVariant, n: usize, d: usize, layout: &ChannelLayout) -> Result<usize> {
    if d == 0 {
        return Err(Error::Config("latent dimension must be at least 1".into()));
    }
    let c = layout.n_channels();
    let sigmas = layout.continuous_channels().len();
    Ok(if variant.is_gp() {
        n * d + 2 * c + layout.outcome_channels().len() + sigmas
    } else {
        n * d + c * d + layout.p() + sigmas
    })
}

/// One fitted candidate dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaicRow {
    pub d: usize,
    pub loglik: f64,
    pub nu: usize,
    pub caic: f64,
    /// CAIC divided by the reference row's CAIC.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaicTable {
    pub variant: ModelVariant,
    pub rows: Vec<CaicRow>,
    /// Dimension the ratios are standardized by: `d = 1` when fitted,
    /// otherwise the smallest candidate.
    pub reference: usize,
    pub chosen: usize,
}

/// Dimension with the lowest CAIC; ties go to the smallest `d`.
pub fn argmin_d(rows: &[(usize, f64)]) -> Option<usize> {
    rows.iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(d, _)| d)
}

fn table_from(variant: ModelVariant, mut rows: Vec<CaicRow>) -> Option<CaicTable> {
    rows.sort_by_key(|r| r.d);
    let first = rows.first()?;
    let reference = rows.iter().find(|r| r.d == 1).unwrap_or(first);
    let (reference, base) = (reference.d, reference.caic);
    for r in &mut rows {
        r.ratio = r.caic / base;
    }
    let chosen = argmin_d(&rows.iter().map(|r| (r.d, r.caic)).collect::<Vec<_>>())?;
    Some(CaicTable {
        variant,
        rows,
        reference,
        chosen,
    })
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if jobs > 0 {
        b = b.num_threads(jobs);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Fit each candidate dimension and pick the one with the lowest CAIC,
/// evaluated at the posterior mean of the canonical parameters.
///
/// Candidate `d` runs with seed `derive_seed(cfg.seed, [d])`. `jobs = 0`
/// uses every available core.
pub fn select_d(
    data: &CombinedDataset,
    variant: ModelVariant,
    candidates: &[usize],
    cfg: &McmcConfig,
    jobs: usize,
) -> Result<CaicTable> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidate dimensions".into()));
    }
    let mut ds = candidates.to_vec();
    ds.sort_unstable();
    ds.dedup();
    if ds[0] == 0 {
        return Err(Error::Config("latent dimension must be at least 1".into()));
    }
    let layout = ChannelLayout::for_data(data, variant.is_nmar());
    let fits: Vec<(usize, Result<CaicRow>)> = pool(jobs)?.install(|| {
        ds.par_iter()
            .map(|&d| {
                let run = || -> Result<CaicRow> {
                    let c = McmcConfig {
                        seed: derive_seed(cfg.seed, &[d as u64]),
                        ..cfg.clone()
                    };
                    let draws = run_chain(data, variant, d, &c)?;
                    let loglik = draws.loglik_at_posterior_mean(data)?;
                    let nu = effective_params(variant, data.n(), d, &layout)?;
                    Ok(CaicRow {
                        d,
                        loglik,
                        nu,
                        caic: caic(loglik, nu, data.n()),
                        ratio: f64::NAN,
                    })
                };
                (d, run())
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    let mut messages = Vec::new();
    for (d, r) in fits {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                failed.push(d);
                messages.push(format!("d = {d}: {e}"));
            }
        }
    }
    if !failed.is_empty() {
        let partial = table_from(variant, rows)
            .map(|t| format!("\npartial table:\n{}", format_caic_table(&t)))
            .unwrap_or_default();
        return Err(Error::PartialSelection {
            failed,
            message: format!("{}{partial}", messages.join("; ")),
        });
    }
    Ok(table_from(variant, rows).expect("at least one candidate"))
}

/// Console layout: one row per dimension with the standardized CAIC.
pub fn format_caic_table(t: &CaicTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>3}  {:>14}  {:>6}  {:>14}  {:>8}", "d", "loglik", "nu", "CAIC", "ratio");
    for r in &t.rows {
        let mark = if r.d == t.chosen { "  *" } else { "" };
        let _ = writeln!(
            out,
            "{:>3}  {:>14.3}  {:>6}  {:>14.3}  {:>8.3}{mark}",
            r.d, r.loglik, r.nu, r.caic, r.ratio
        );
    }
    out
}

/// `caic.csv`: d, method, caic, ratio, plus the log-likelihood and penalty.
pub fn write_caic_csv(t: &CaicTable, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["d", "method", "caic", "ratio", "loglik", "nu"])?;
    for r in &t.rows {
        w.write_record([
            r.d.to_string(),
            t.variant.to_string(),
            format!("{:?}", r.caic),
            format!("{:?}", r.ratio),
            format!("{:?}", r.loglik),
            r.nu.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// ---- benchmark ----

/// Matching or one of the model-based variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Mm,
    Model(ModelVariant),
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Mm,
        Method::Model(ModelVariant::LvmMar),
        Method::Model(ModelVariant::LvmNmar),
        Method::Model(ModelVariant::GpdcmMar),
        Method::Model(ModelVariant::GpdcmNmar),
    ];

    fn index(self) -> u64 {
        Method::ALL.iter().position(|&m| m == self).expect("listed") as u64
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mm => "mm",
            Method::Model(v) => v.as_str(),
        }
    }

    /// Row label and missing-data mechanism for report tables.
    pub fn label(self) -> (&'static str, &'static str) {
        match self {
            Method::Mm => ("MM", "MAR"),
            Method::Model(ModelVariant::LvmMar) => ("LVM (EFAM)", "MAR"),
            Method::Model(ModelVariant::LvmNmar) => ("LVM", "NMAR"),
            Method::Model(ModelVariant::GpdcmMar) => ("GPDCM", "MAR"),
            Method::Model(ModelVariant::GpdcmNmar) => ("GPDCM", "NMAR"),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("mm") {
            Ok(Method::Mm)
        } else {
            s.parse()
                .map(Method::Model)
                .map_err(|_| Error::Config(format!("unknown method `{s}` (expected mm, gpdcm-nmar, gpdcm-mar, lvm-nmar or lvm-mar)")))
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.as_str().to_string()
    }
}

/// How the benchmark splits each generated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Sign of a GP missingness function over the generating positions plus noise.
    Nmar,
    /// Fair coin flips, independent of everything else.
    Independent,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nmar" => Ok(SplitMode::Nmar),
            "independent" | "mcar" => Ok(SplitMode::Independent),
            _ => Err(Error::Config(format!("unknown split mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub mcmc: McmcConfig,
    /// Latent dimension of every model-based fit.
    pub d: usize,
    pub seed: u64,
    pub split: SplitMode,
    /// Score binary cells of model-based methods with 0/1 predictions
    /// (threshold 0.5) instead of predictive probabilities.
    pub threshold_binary: bool,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            mcmc: McmcConfig {
                iterations: 2000,
                burn_in: 1000,
                thin: 5,
                ..McmcConfig::default()
            },
            d: 2,
            seed: 0,
            split: SplitMode::Nmar,
            threshold_binary: false,
            jobs: 0,
        }
    }
}

/// MSE of one method on the hidden cells of one outcome kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Score {
    pub method: Method,
    pub kind: VariableKind,
    pub mse: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub scores: Vec<Score>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub replication: usize,
    pub method: Option<Method>,
    pub message: String,
}

/// Mean and standard deviation of the MSE ratio for a method and outcome kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub method: Method,
    pub kind: VariableKind,
    pub mean: f64,
    /// Sample standard deviation; `NaN` with fewer than two replications.
    pub sd: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub methods: Vec<Method>,
    pub requested: usize,
    pub replications: Vec<Replication>,
    pub failures: Vec<Failure>,
    pub summary: Vec<Summary>,
}

fn kind_order(k: VariableKind) -> u8 {
    match k {
        VariableKind::Continuous => 0,
        VariableKind::Binary => 1,
        VariableKind::Count => 2,
    }
}

/// Mean and sample standard deviation per (method, kind), from the raw scores.
pub fn aggregate(methods: &[Method], replications: &[Replication]) -> Vec<Summary> {
    let mut acc: BTreeMap<(usize, u8), (Method, VariableKind, Vec<f64>)> = BTreeMap::new();
    for r in replications {
        for s in &r.scores {
            let Some(mi) = methods.iter().position(|&m| m == s.method) else { continue };
            acc.entry((mi, kind_order(s.kind)))
                .or_insert_with(|| (s.method, s.kind, Vec::new()))
                .2
                .push(s.ratio);
        }
    }
    acc.into_values()
        .map(|(method, kind, v)| {
            let k = v.len() as f64;
            let mean = v.iter().sum::<f64>() / k;
            let sd = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
            } else {
                f64::NAN
            };
            Summary {
                method,
                kind,
                mean,
                sd,
                count: v.len(),
            }
        })
        .collect()
}

fn split_for(sim: &SimConfig, cfg: &BenchmarkConfig, rep_seed: u64) -> Result<Split> {
    let (data, truth) = generate_single_source(sim, &mut stream(rep_seed, 0))?;
    let mut rng = stream(rep_seed, 1);
    match cfg.split {
        SplitMode::Nmar => split_nmar(&data, &truth, sim, &mut rng),
        SplitMode::Independent => {
            // a flat missingness function with unit noise is a fair coin
            let mut last = None;
            for attempt in 1..=crate::datagen::MAX_SPLIT_ATTEMPTS {
                match split_with_missingness_function(&data, &vec![0.0; data.n()], 1.0, &mut rng) {
                    Ok(mut s) => {
                        s.missing_f = None;
                        s.attempts = attempt;
                        return Ok(s);
                    }
                    Err(e @ Error::DegeneratePattern { .. }) => last = Some(e),
                    Err(e) => return Err(e),
                }
            }
            Err(last.expect("at least one attempt"))
        }
    }
}

/// Predictions for every hidden cell (row-major) from one method.
fn predict(method: Method, split: &Split, cfg: &BenchmarkConfig, rep_seed: u64) -> Result<Vec<f64>> {
    match method {
        Method::Mm => Ok(match_impute(&split.data)?.imputed),
        Method::Model(v) => {
            let mc = McmcConfig {
                seed: derive_seed(rep_seed, &[2 + method.index()]),
                ..cfg.mcmc.clone()
            };
            let draws = run_chain(&split.data, v, cfg.d, &mc)?;
            let mut pred = point_predict(&draws)?;
            if cfg.threshold_binary {
                for (c, &(_, j)) in draws.missing_cells.iter().enumerate() {
                    if split.data.specs()[j].kind == VariableKind::Binary {
                        pred[c] = if pred[c] >= 0.5 { 1.0 } else { 0.0 };
                    }
                }
            }
            Ok(pred)
        }
    }
}

/// Score one replication. Matching always runs since every ratio is
/// relative to it.
fn replicate(
    sim: &SimConfig,
    methods: &[Method],
    cfg: &BenchmarkConfig,
    index: usize,
) -> std::result::Result<Replication, Failure> {
    let seed = derive_seed(cfg.seed, &[index as u64]);
    let fail = |method: Option<Method>, e: Error| Failure {
        replication: index,
        method,
        message: e.to_string(),
    };
    let split = split_for(sim, cfg, seed).map_err(|e| fail(None, e))?;
    let specs = split.data.specs();
    let truth: Vec<f64> = split.hidden.iter().map(|c| c.value).collect();
    let mut kinds: Vec<VariableKind> = split.hidden.iter().map(|c| specs[c.variable].kind).collect();
    kinds.sort_by_key(|&k| kind_order(k));
    kinds.dedup();

    let by_kind = |pred: &[f64], kind: VariableKind| -> Result<f64> {
        let (t, p): (Vec<f64>, Vec<f64>) = split
            .hidden
            .iter()
            .zip(pred)
            .filter(|(c, _)| specs[c.variable].kind == kind)
            .map(|(c, &p)| (c.value, p))
            .unzip();
        mse(&t, &p)
    };

    let mm_pred = predict(Method::Mm, &split, cfg, seed).map_err(|e| fail(Some(Method::Mm), e))?;
    let mm: Vec<f64> = kinds
        .iter()
        .map(|&k| by_kind(&mm_pred, k))
        .collect::<Result<_>>()
        .map_err(|e| fail(Some(Method::Mm), e))?;

    let mut scores = Vec::new();
    for &method in methods {
        let pred = if method == Method::Mm {
            mm_pred.clone()
        } else {
            predict(method, &split, cfg, seed).map_err(|e| fail(Some(method), e))?
        };
        debug_assert_eq!(pred.len(), truth.len());
        for (k, &kind) in kinds.iter().enumerate() {
            let m = by_kind(&pred, kind).map_err(|e| fail(Some(method), e))?;
            let ratio = mse_ratio(m, mm[k]).map_err(|e| fail(Some(method), e))?;
            scores.push(Score {
                method,
                kind,
                mse: m,
                ratio,
            });
        }
    }
    Ok(Replication { index, seed, scores })
}

/// Generate, split, fit and score `reps` replications.
///
/// Replication `r` draws everything from `derive_seed(cfg.seed, [r])`, so
/// results do not depend on the number of workers. A failing replication is
/// recorded and left out of the summary.
pub fn run_benchmark(sim: &SimConfig, methods: &[Method], reps: usize, cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if reps == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    if methods.is_empty() {
        return Err(Error::Config("no methods selected".into()));
    }
    sim.validate()?;
    cfg.mcmc.validate()?;
    let mut ms: Vec<Method> = methods.to_vec();
    ms.sort();
    ms.dedup();
    let results: Vec<std::result::Result<Replication, Failure>> =
        pool(cfg.jobs)?.install(|| (0..reps).into_par_iter().map(|r| replicate(sim, &ms, cfg, r)).collect());
    let mut replications = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rep) => replications.push(rep),
            Err(f) => failures.push(f),
        }
    }
    let summary = aggregate(&ms, &replications);
    Ok(BenchmarkReport {
        methods: ms,
        requested: reps,
        replications,
        failures,
        summary,
    })
}

fn fmt3(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.3}")
    }
}

impl BenchmarkReport {
    pub fn summary_for(&self, method: Method, kind: VariableKind) -> Option<&Summary> {
        self.summary.iter().find(|s| s.method == method && s.kind == kind)
    }

    /// `benchmark.csv`: replication, method, outcome_kind, mse, ratio.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["replication", "method", "outcome_kind", "mse", "ratio"])?;
        for r in &self.replications {
            for s in &r.scores {
                w.write_record([
                    r.index.to_string(),
                    s.method.to_string(),
                    s.kind.to_string(),
                    format!("{:?}", s.mse),
                    format!("{:?}", s.ratio),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Table of mean and SD of the MSE ratio per method and outcome kind.
    /// Matching's SD prints as `-`.
    pub fn format_table(&self) -> String {
        let mut kinds: Vec<VariableKind> = self.summary.iter().map(|s| s.kind).collect();
        kinds.sort_by_key(|&k| kind_order(k));
        kinds.dedup();
        let mut out = String::new();
        let _ = write!(out, "{:<12}{:<11}", "Method", "Mechanism");
        for k in &kinds {
            let name = match k {
                VariableKind::Continuous => "Continuous",
                VariableKind::Binary => "Binary",
                VariableKind::Count => "Count",
            };
            let _ = write!(out, "{name:<16}");
        }
        let _ = write!(out, "\n{:<23}", "");
        for _ in &kinds {
            let _ = write!(out, "{:<8}{:<8}", "Mean", "SD");
        }
        out.push('\n');
        for &m in &self.methods {
            let (label, mech) = m.label();
            let _ = write!(out, "{label:<12}{mech:<11}");
            for &k in &kinds {
                let (mean, sd) = self
                    .summary_for(m, k)
                    .map(|s| (s.mean, if m == Method::Mm { f64::NAN } else { s.sd }))
                    .unwrap_or((f64::NAN, f64::NAN));
                let _ = write!(out, "{:<8}{:<8}", fmt3(mean), fmt3(sd));
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "replications: {} of {} succeeded, {} failed",
            self.replications.len(),
            self.requested,
            self.failures.len()
        );
        for f in &self.failures {
            let who = f.method.map(|m| m.to_string()).unwrap_or_else(|| "data".into());
            let _ = writeln!(out, "  replication {} ({who}): {}", f.replication, f.message);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::StepVariances;
    use proptest::prelude::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 1.0], &[0.5, 0.5]).unwrap(), 0.25);
        let t = [0.3, -1.2, 2.0, 0.0, 5.5, 1.1, -0.4, 0.9, 3.3, -2.2];
        let p = [0.1, -1.0, 2.5, 0.2, 5.0, 1.0, -0.5, 1.9, 3.0, -2.0];
        let mut oracle = 0.0;
        for k in 0..10 {
            oracle += (t[k] - p[k]) * (t[k] - p[k]);
        }
        assert!((mse(&t, &p).unwrap() - oracle / 10.0).abs() < 1e-15);
        assert!(mse(&[], &[]).is_err());
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(mse_ratio(0.37, 0.37).unwrap(), 1.0);
        assert_eq!(mse_ratio(0.0, 0.37).unwrap(), 0.0);
        assert!((mse_ratio(0.126 * 0.37, 0.37).unwrap() - 0.126).abs() < 1e-15);
        assert!(matches!(mse_ratio(1.0, 0.0), Err(Error::DegenerateBaseline)));
    }

    #[test]
    fn caic_examples() {
        assert_eq!(caic(0.0, 1, 1), 1.0);
        assert_eq!(caic(-100.0, 0, 57), 200.0);
        let oracle = 100.0 + 3.0 * (100f64.ln() + 1.0);
        assert!((caic(-50.0, 3, 100) - oracle).abs() < 1e-10);
        assert!((caic(-50.0, 3, 100) - 116.815_510_557_964_27).abs() < 1e-10);
    }

    fn layout(p_cov: usize, nmar: bool) -> ChannelLayout {
        use crate::model::{Role, VariableSpec};
        let mut specs: Vec<VariableSpec> = (0..p_cov)
            .map(|k| VariableSpec::new(format!("x{k}"), VariableKind::Binary, Role::Covariate))
            .collect();
        specs.push(VariableSpec::new("a", VariableKind::Continuous, Role::Outcome1));
        specs.push(VariableSpec::new("b", VariableKind::Binary, Role::Outcome2));
        ChannelLayout::from_specs(&specs, nmar)
    }

    #[test]
    fn effective_param_rule() {
        let l = layout(9, true);
        // 11 variables + missingness channel, 2 outcome intercepts, 1 sigma
        assert_eq!(effective_params(ModelVariant::GpdcmNmar, 200, 1, &l).unwrap(), 200 + 24 + 2 + 1);
        assert_eq!(effective_params(ModelVariant::LvmNmar, 200, 1, &l).unwrap(), 200 + 12 + 11 + 1);
        assert!(effective_params(ModelVariant::GpdcmNmar, 200, 0, &l).is_err());
        for v in ModelVariant::ALL {
            let l = layout(9, v.is_nmar());
            for d in 1..5 {
                let a = effective_params(v, 200, d, &l).unwrap();
                let b = effective_params(v, 200, 2 * d, &l).unwrap();
                assert!(b >= a + 200);
            }
        }
    }

    #[test]
    fn argmin_matches_scan() {
        assert_eq!(argmin_d(&[(3, 5.0)]), Some(3));
        assert_eq!(argmin_d(&[(1, 5.0), (2, 4.0), (3, 4.0), (4, 6.0)]), Some(2));
        assert_eq!(argmin_d(&[]), None);
        let mut rng = stream(1, 0);
        for _ in 0..200 {
            let rows: Vec<(usize, f64)> = (1..=6)
                .map(|d| (d, (rand::Rng::random_range(&mut rng, 0..4) as f64)))
                .collect();
            let mut best = rows[0];
            for &r in &rows[1..] {
                if r.1 < best.1 {
                    best = r;
                }
            }
            assert_eq!(argmin_d(&rows), Some(best.0));
        }
    }

    #[test]
    fn table_standardizes_at_one() {
        let row = |d: usize, caic: f64| CaicRow {
            d,
            loglik: 0.0,
            nu: 0,
            caic,
            ratio: f64::NAN,
        };
        let t = table_from(ModelVariant::GpdcmNmar, vec![row(3, 90.0), row(1, 100.0), row(2, 80.0)]).unwrap();
        assert_eq!(t.rows.iter().map(|r| r.d).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(t.rows[0].ratio, 1.0);
        assert_eq!(t.rows[1].ratio, 0.8);
        assert_eq!((t.chosen, t.reference), (2, 1));
        let t = table_from(ModelVariant::LvmMar, vec![row(4, 50.0), row(2, 25.0)]).unwrap();
        assert_eq!((t.reference, t.rows[0].ratio), (2, 1.0));
    }

    proptest! {
        #[test]
        fn caic_monotone(ll in -1e4f64..1e4, nu in 0usize..500, n in 1usize..10_000) {
            prop_assert!(caic(ll, nu + 1, n) > caic(ll, nu, n));
            prop_assert!(caic(ll + 1.0, nu, n) < caic(ll, nu, n));
        }

        #[test]
        fn mse_nonnegative_and_scale_free(v in proptest::collection::vec(-1e3f64..1e3, 1..20), s in 0.1f64..10.0) {
            let zeros = vec![0.0; v.len()];
            let e = mse(&v, &zeros).unwrap();
            prop_assert!(e >= 0.0);
            prop_assert_eq!(e == 0.0, v.iter().all(|&x| x == 0.0));
            if e > 0.0 {
                let r = mse_ratio(0.5 * e, e).unwrap();
                prop_assert!((mse_ratio(0.5 * e * s, e * s).unwrap() - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }

    fn tiny_sim() -> SimConfig {
        SimConfig {
            n: 24,
            ..SimConfig::default()
        }
    }

    fn short() -> BenchmarkConfig {
        BenchmarkConfig {
            mcmc: McmcConfig {
                iterations: 40,
                burn_in: 20,
                thin: 5,
                step_var: StepVariances::default(),
                ..McmcConfig::default()
            },
            seed: 5,
            jobs: 1,
            ..BenchmarkConfig::default()
        }
    }

    #[test]
    fn matching_alone_scores_one() {
        let r = run_benchmark(&tiny_sim(), &[Method::Mm], 3, &short()).unwrap();
        assert_eq!(r.replications.len(), 3);
        for rep in &r.replications {
            assert!(rep.scores.iter().all(|s| s.ratio == 1.0));
        }
        assert!(r.summary.iter().all(|s| s.mean == 1.0 && s.sd == 0.0));
        assert!(r.format_table().contains("MM          MAR        1.000   -"));
    }

    #[test]
    fn benchmark_is_reproducible_and_worker_independent() {
        let methods = Method::ALL;
        let a = run_benchmark(&tiny_sim(), &methods, 2, &short()).unwrap();
        let b = run_benchmark(&tiny_sim(), &methods, 2, &short()).unwrap();
        let c = run_benchmark(&tiny_sim(), &methods, 2, &BenchmarkConfig { jobs: 3, ..short() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.summary, aggregate(&a.methods, &a.replications));
        // re-aggregate by hand for one cell
        let raw: Vec<f64> = a
            .replications
            .iter()
            .flat_map(|r| r.scores.iter())
            .filter(|s| s.method == Method::Model(ModelVariant::GpdcmNmar) && s.kind == VariableKind::Continuous)
            .map(|s| s.ratio)
            .collect();
        let s = a.summary_for(Method::Model(ModelVariant::GpdcmNmar), VariableKind::Continuous).unwrap();
        assert_eq!(s.mean, raw.iter().sum::<f64>() / raw.len() as f64);
        for rep in &a.replications {
            for sc in &rep.scores {
                let mm = rep.scores.iter().find(|x| x.method == Method::Mm && x.kind == sc.kind).unwrap();
                assert_eq!(sc.ratio, sc.mse / mm.mse);
            }
        }
    }

    #[test]
    fn failing_replications_are_counted() {
        // a single unit can never have both patterns
        let sim = SimConfig { n: 1, ..SimConfig::default() };
        let r = run_benchmark(&sim, &[Method::Mm], 2, &short()).unwrap();
        assert_eq!(r.failures.len(), 2);
        assert!(r.summary.is_empty());
        assert!(r.format_table().contains("0 of 2 succeeded, 2 failed"));
        assert!(run_benchmark(&sim, &[Method::Mm], 0, &short()).is_err());
    }

    #[test]
    fn select_d_tabulates_candidates() {
        let cfg = short();
        let (data, truth) = generate_single_source(&tiny_sim(), &mut stream(1, 0)).unwrap();
        let split = split_nmar(&data, &truth, &tiny_sim(), &mut stream(1, 1)).unwrap();
        let t = select_d(&split.data, ModelVariant::LvmNmar, &[3, 1, 2], &cfg.mcmc, 1).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.rows[0].ratio, 1.0);
        let scan = argmin_d(&t.rows.iter().map(|r| (r.d, r.caic)).collect::<Vec<_>>()).unwrap();
        assert_eq!(t.chosen, scan);
        let single = select_d(&split.data, ModelVariant::GpdcmNmar, &[2], &cfg.mcmc, 1).unwrap();
        assert_eq!(single.chosen, 2);
        assert!(select_d(&split.data, ModelVariant::GpdcmNmar, &[], &cfg.mcmc, 1).is_err());
        assert!(select_d(&split.data, ModelVariant::GpdcmNmar, &[0, 1], &cfg.mcmc, 1).is_err());
        let again = select_d(&split.data, ModelVariant::LvmNmar, &[1, 2, 3], &cfg.mcmc, 2).unwrap();
        assert_eq!(t, again);
    }
}
