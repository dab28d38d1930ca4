use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use gpdcm::baselines::match_impute;
use gpdcm::datagen::{self, SimConfig};
use gpdcm::evalsuite::{self, BenchmarkConfig, Method, SplitMode};
use gpdcm::expfam::VariableKind;
use gpdcm::gp_core::KernelHyper;
use gpdcm::model::{CombinedDataset, CompleteDataset, ModelVariant};
use gpdcm::rng::stream;
use gpdcm::sampler::{run_chain, McmcConfig};

use crate::args::*;
use crate::manifest::{now, RunManifest};
use crate::{io_error, usage};

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| usage(format!("missing required flag --{flag}")))
}

fn out_dir(out: Option<PathBuf>, default: &str) -> Result<PathBuf> {
    let dir = out.unwrap_or_else(|| PathBuf::from(default));
    std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    Ok(dir)
}

fn kinds(names: &Option<Vec<String>>, default: Vec<VariableKind>) -> Result<Vec<VariableKind>> {
    match names {
        None => Ok(default),
        Some(v) => v.iter().map(|s| s.trim().parse().map_err(anyhow::Error::from)).collect(),
    }
}

fn hyper(tau1: Option<f64>, tau2: Option<f64>) -> Result<KernelHyper> {
    let def = KernelHyper::default();
    Ok(KernelHyper::new(tau1.unwrap_or(def.tau1), tau2.unwrap_or(def.tau2))?)
}

fn sim_config(s: &SimArgs, m: &MissingArgs, d: Option<usize>, seed: u64) -> Result<SimConfig> {
    let def = SimConfig::default();
    let cfg = SimConfig {
        n: s.n.unwrap_or(def.n),
        d: d.unwrap_or(def.d),
        n_cont_cov: s.n_cont.unwrap_or(def.n_cont_cov),
        n_bin_cov: s.n_bin.unwrap_or(def.n_bin_cov),
        n_count_cov: s.n_count.unwrap_or(def.n_count_cov),
        outcome1_kinds: kinds(&s.outcome1, def.outcome1_kinds)?,
        outcome2_kinds: kinds(&s.outcome2, def.outcome2_kinds)?,
        lambda0: s.lambda0.unwrap_or(def.lambda0),
        tau: hyper(s.tau1, s.tau2)?,
        channel_tau: Vec::new(),
        missing_tau: hyper(m.missing_tau1, m.missing_tau2)?,
        sigma: s.sigma.unwrap_or(def.sigma),
        missing_noise: m.missing_noise.unwrap_or(def.missing_noise),
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn mcmc_config(a: &McmcArgs, seed: u64, def: McmcConfig) -> Result<McmcConfig> {
    let cfg = McmcConfig {
        iterations: a.iters.unwrap_or(def.iterations),
        burn_in: a.burnin.unwrap_or(def.burn_in),
        thin: a.thin.unwrap_or(def.thin),
        adapt: !a.no_adapt.unwrap_or(!def.adapt),
        seed,
        tying: match &a.tying {
            Some(t) => t.parse()?,
            None => def.tying,
        },
        warm_start: a.warm_start.unwrap_or(def.warm_start),
        ..def
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_combined(data: Option<PathBuf>, schema: Option<PathBuf>) -> Result<CombinedDataset> {
    let schema = datagen::load_schema(&need(schema, "schema")?)?;
    Ok(datagen::load_csv(&need(data, "data")?, &schema)?)
}

fn rel(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let started = now();
    let seed = a.seed.unwrap_or(0);
    let cfg = sim_config(&a.sim, &MissingArgs::default(), a.d, seed)?;
    let dir = out_dir(a.out.clone(), "gpdcm-simulate")?;
    let (data, truth) = datagen::generate_single_source(&cfg, &mut stream(seed, 0))?;
    let outputs = vec![rel(&dir, "data.csv"), rel(&dir, "schema.txt"), rel(&dir, "truth.csv")];
    datagen::save_complete_csv(&data, &outputs[0])?;
    datagen::save_schema(data.specs(), &outputs[1])?;
    datagen::save_truth(&truth, data.specs(), &outputs[2])?;
    println!("simulated {} units x {} variables into {}", data.n(), data.p(), dir.display());
    let mut m = RunManifest::new("simulate", Some(seed), json!({ "args": a, "resolved": cfg }), started);
    m.outputs = outputs;
    m.write(&rel(&dir, "manifest.json"))
}

pub fn split(a: SplitArgs) -> Result<()> {
    let started = now();
    let seed = a.seed.unwrap_or(0);
    let mode = a.mode.clone().unwrap_or_else(|| "nmar".into());
    let schema_path = need(a.schema.clone(), "schema")?;
    let specs = datagen::load_schema(&schema_path)?;
    let data: CompleteDataset = datagen::load_complete_csv(&need(a.data.clone(), "data")?, &specs)?;
    // stream 1 of the seed: `simulate --seed s` then `split --seed s` gives
    // the same split as benchmark replication seed `s`
    let mut rng = stream(seed, 1);
    let resolved;
    let s = match mode.as_str() {
        "nmar" => {
            if a.covariate.is_some() || a.equal.is_some() {
                return Err(usage("--covariate and --equal apply to --mode logistic"));
            }
            let sim = sim_config(&SimArgs::default(), &a.missing, None, seed)?;
            let truth = datagen::load_truth(&need(a.truth.clone(), "truth")?, &specs, sim.lambda0)?;
            resolved = json!({ "mode": mode, "missing_tau": sim.missing_tau, "missing_noise": sim.missing_noise });
            datagen::split_nmar(&data, &truth, &sim, &mut rng)?
        }
        "logistic" => {
            if a.truth.is_some() || a.missing.missing_noise.is_some() {
                return Err(usage("--truth and --missing-noise apply to --mode nmar"));
            }
            let name = need(a.covariate.clone(), "covariate")?;
            let col = data
                .column_index(&name)
                .ok_or_else(|| usage(format!("no variable named `{name}` in the schema")))?;
            let equal = a.equal.unwrap_or(false);
            resolved = json!({ "mode": mode, "covariate": name, "equal": equal });
            datagen::split_logistic(&data, col, equal, &mut rng)?
        }
        other => return Err(usage(format!("unknown split mode `{other}`; use nmar or logistic"))),
    };
    let dir = out_dir(a.out.clone(), "gpdcm-split")?;
    let outputs = vec![rel(&dir, "data.csv"), rel(&dir, "hidden.csv"), rel(&dir, "schema.txt")];
    datagen::save_csv(&s.data, &outputs[0])?;
    datagen::save_hidden(&s.hidden, &specs, &outputs[1])?;
    datagen::save_schema(&specs, &outputs[2])?;
    let (ones, zeros) = s.data.pattern_counts();
    let redraws = match s.attempts {
        1 => String::new(),
        k => format!(" after {k} draws"),
    };
    println!("split into {ones} units with m = 1 and {zeros} with m = 0{redraws}");
    let mut m = RunManifest::new("split", Some(seed), json!({ "args": a, "resolved": resolved }), started);
    m.outputs = outputs;
    m.write(&rel(&dir, "manifest.json"))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn fit(a: FitArgs) -> Result<()> {
    let started = now();
    let model = need(a.model.clone(), "model")?;
    let method: Method = model.parse().map_err(|e| usage(format!("{e}")))?;
    let data = load_combined(a.data.clone(), a.schema.clone())?;
    let specs = data.specs().to_vec();
    let dir = out_dir(a.out.clone(), "gpdcm-fit")?;
    let imputations = rel(&dir, "imputations.csv");

    let variant = match method {
        Method::Mm => {
            if a.mcmc.any_set() || a.d.is_some() || a.seed.is_some() || a.per_draw.is_some() {
                return Err(usage("--model mm takes no sampler flags (--d, --iters, --burnin, --thin, --seed, ...)"));
            }
            let r = match_impute(&data)?;
            let donors = rel(&dir, "donors.csv");
            write_rows(
                &imputations,
                &["unit", "variable", "kind", "mean"],
                r.cells.iter().zip(&r.imputed).map(|(&(i, j), v)| {
                    vec![i.to_string(), specs[j].name.clone(), specs[j].kind.to_string(), v.to_string()]
                }),
            )?;
            write_rows(
                &donors,
                &["unit", "donor"],
                r.donor_index.iter().enumerate().map(|(i, d)| vec![i.to_string(), d.to_string()]),
            )?;
            println!("matched {} units, imputed {} cells", data.n(), r.cells.len());
            let mut m = RunManifest::new("fit", None, json!({ "args": a, "resolved": { "model": "mm" } }), started);
            m.outputs = vec![imputations, donors];
            return m.write(&rel(&dir, "manifest.json"));
        }
        Method::Model(v) => v,
    };

    let seed = a.seed.unwrap_or(0);
    let d = a.d.unwrap_or(2);
    let cfg = mcmc_config(&a.mcmc, seed, McmcConfig::default())?;
    let draws = run_chain(&data, variant, d, &cfg)?;
    let trace = rel(&dir, "trace.csv");
    let acceptance = rel(&dir, "acceptance.csv");
    draws.write_trace(&trace, &specs)?;
    draws.write_imputations(&imputations, &specs, a.per_draw.unwrap_or(false))?;
    write_rows(
        &acceptance,
        &["block", "rate"],
        draws.acceptance_rates.iter().map(|(k, v)| vec![k.clone(), v.to_string()]),
    )?;
    println!("{variant}, d = {d}: kept {} draws of {} iterations", draws.states.len(), cfg.iterations);
    for (k, v) in &draws.acceptance_rates {
        println!("  acceptance {k:<8} {v:.3}");
    }
    if !draws.warnings.is_empty() {
        eprintln!("{} proposals rejected for numerical reasons; first: {}", draws.warnings.len(), draws.warnings[0]);
    }
    let mut m = RunManifest::new(
        "fit",
        Some(seed),
        json!({ "args": a, "resolved": { "model": variant.as_str(), "d": d, "mcmc": cfg } }),
        started,
    );
    m.outputs = vec![trace, imputations, acceptance];
    m.write(&rel(&dir, "manifest.json"))
}

/// Point value written into a completed dataset: the posterior mean for
/// continuous cells, rounded to the nearest admissible value otherwise.
fn completed_value(kind: VariableKind, mean: f64) -> f64 {
    match kind {
        VariableKind::Continuous => mean,
        VariableKind::Binary => f64::from(u8::from(mean >= 0.5)),
        VariableKind::Count => mean.max(0.0).round(),
    }
}

pub fn impute(a: ImputeArgs) -> Result<()> {
    let started = now();
    let data = load_combined(a.data.clone(), a.schema.clone())?;
    let path = need(a.imputations.clone(), "imputations")?;
    let specs = data.specs();
    let mut values = data.values().to_owned();
    let mut rdr = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| usage(format!("{}: no `{name}` column", path.display())))
    };
    let (cu, cv, cm) = (col("unit")?, col("variable")?, col("mean")?);
    let mut filled = 0usize;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |msg: String| gpdcm::Error::Parse {
            row: row + 1,
            column: String::new(),
            message: msg,
        };
        let unit: usize = rec[cu].parse().map_err(|_| bad(format!("unit `{}`", &rec[cu])))?;
        let j = specs
            .iter()
            .position(|s| s.name == rec[cv])
            .ok_or_else(|| bad(format!("unknown variable `{}`", &rec[cv])))?;
        let mean: f64 = rec[cm].parse().map_err(|_| bad(format!("value `{}`", &rec[cm])))?;
        if unit >= data.n() || data.is_observed(unit, j) || !values[[unit, j]].is_nan() {
            return Err(bad(format!("cell ({unit}, {}) is not an open missing cell", &rec[cv])).into());
        }
        values[[unit, j]] = completed_value(specs[j].kind, mean);
        filled += 1;
    }
    let open = data.missing_cells().len();
    if filled != open {
        return Err(usage(format!("{} fills {filled} of {open} missing cells", path.display())));
    }
    let completed = CompleteDataset::new(specs.to_vec(), values)?;
    let dir = out_dir(a.out.clone(), "gpdcm-impute")?;
    let out = rel(&dir, "completed.csv");
    datagen::save_complete_csv(&completed, &out)?;
    println!("filled {filled} cells into {}", out.display());
    let mut m = RunManifest::new("impute", None, json!({ "args": a }), started);
    m.outputs = vec![out];
    m.write(&rel(&dir, "manifest.json"))
}

pub fn select_d(a: SelectDArgs) -> Result<()> {
    let started = now();
    let model = need(a.model.clone(), "model")?;
    let variant: ModelVariant = model.parse().map_err(|e| usage(format!("{e}")))?;
    let data = load_combined(a.data.clone(), a.schema.clone())?;
    let candidates = a.candidates.clone().unwrap_or_else(|| vec![1, 2, 3, 4]);
    let seed = a.seed.unwrap_or(0);
    let jobs = a.jobs.unwrap_or(0);
    let cfg = mcmc_config(&a.mcmc, seed, McmcConfig::default())?;
    let table = evalsuite::select_d(&data, variant, &candidates, &cfg, jobs)?;
    let dir = out_dir(a.out.clone(), "gpdcm-select-d")?;
    let out = rel(&dir, "caic.csv");
    evalsuite::write_caic_csv(&table, &out)?;
    print!("{}", evalsuite::format_caic_table(&table));
    println!("chosen d = {} (ratios relative to d = {})", table.chosen, table.reference);
    let mut m = RunManifest::new(
        "select-d",
        Some(seed),
        json!({ "args": a, "resolved": { "model": variant.as_str(), "candidates": candidates, "mcmc": cfg } }),
        started,
    );
    m.outputs = vec![out];
    m.write(&rel(&dir, "manifest.json"))
}

pub fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let started = now();
    let seed = a.seed.unwrap_or(0);
    let reps = a.reps.unwrap_or(300);
    if reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let methods: Vec<Method> = match &a.methods {
        None => Method::ALL.to_vec(),
        Some(v) => v
            .iter()
            .map(|s| s.trim().parse().map_err(|e| usage(format!("{e}"))))
            .collect::<Result<_>>()?,
    };
    let def = BenchmarkConfig::default();
    let d = a.d.unwrap_or(def.d);
    let sim = sim_config(&a.sim, &a.missing, Some(d), seed)?;
    let split: SplitMode = match &a.split {
        Some(s) => s.parse().map_err(|e| usage(format!("{e}")))?,
        None => def.split,
    };
    let cfg = BenchmarkConfig {
        mcmc: mcmc_config(&a.mcmc, seed, def.mcmc.clone())?,
        d,
        seed,
        split,
        threshold_binary: a.threshold_binary.unwrap_or(false),
        jobs: a.jobs.unwrap_or(0),
    };
    let report = evalsuite::run_benchmark(&sim, &methods, reps, &cfg)?;
    let dir = out_dir(a.out.clone(), "gpdcm-benchmark")?;
    let raw = rel(&dir, "benchmark.csv");
    let summary = rel(&dir, "summary.csv");
    let table = rel(&dir, "table.txt");
    report.write_csv(&raw)?;
    write_rows(
        &summary,
        &["method", "outcome_kind", "mean", "sd", "count"],
        report.summary.iter().map(|s| {
            vec![
                s.method.to_string(),
                s.kind.to_string(),
                format!("{:?}", s.mean),
                format!("{:?}", s.sd),
                s.count.to_string(),
            ]
        }),
    )?;
    let text = report.format_table();
    std::fs::write(&table, &text).map_err(|e| io_error(&table, e))?;
    print!("{text}");
    // the worker count does not change any output, so it stays out of the
    // resolved settings
    let mut resolved = json!({ "reps": reps, "methods": report.methods, "sim": sim, "benchmark": cfg });
    resolved["benchmark"].as_object_mut().expect("object").remove("jobs");
    let mut m = RunManifest::new("benchmark", Some(seed), json!({ "args": a, "resolved": resolved }), started);
    m.outputs = vec![raw, summary, table];
    m.write(&rel(&dir, "manifest.json"))
}
