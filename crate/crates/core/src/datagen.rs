//! Synthetic single-source data, two-source splitters and the CSV formats
//! shared with the command-line tool.
//!
//! Files:
//! - data CSV: one column per variable plus an `m` column; hidden cells are
//!   empty fields. Complete data omits `m`.
//! - schema sidecar: one `name,kind,role` line per variable; blank lines and
//!   lines starting with `#` are skipped.
//! - truth CSV: generating latent positions `z1..zd` and latent functions
//!   `f_<name>` per unit.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::{logistic, sample, CanonicalParam, VariableKind};
use crate::gp_core::{cholesky_jittered, gram_matrix, latent_function, KernelHyper, LatentPositions};
use crate::model::{CombinedDataset, CompleteDataset, HiddenCells, Role, VariableSpec};
use crate::rng::Rng;

/// Settings of the synthetic generator. Defaults give 200 units, ten
/// covariates (four continuous, three binary, three count), a continuous
/// outcome observed when `m = 1` and a binary outcome observed when `m = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n: usize,
    pub d: usize,
    pub n_cont_cov: usize,
    pub n_bin_cov: usize,
    pub n_count_cov: usize,
    /// Outcomes observed when `m = 1`.
    pub outcome1_kinds: Vec<VariableKind>,
    /// Outcomes observed when `m = 0`.
    pub outcome2_kinds: Vec<VariableKind>,
    pub lambda0: f64,
    /// Kernel of every observation channel.
    pub tau: KernelHyper,
    /// Optional per-variable kernels, in schema order (covariates, outcome
    /// 1, outcome 2). Overrides `tau` when non-empty.
    pub channel_tau: Vec<KernelHyper>,
    /// Kernel of the missingness function used by the NMAR split.
    pub missing_tau: KernelHyper,
    /// Noise standard deviation of continuous variables.
    pub sigma: f64,
    /// Standard deviation of the noise added to the missingness function
    /// before taking its sign. One matches a probit selection model.
    pub missing_noise: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 200,
            d: 2,
            n_cont_cov: 4,
            n_bin_cov: 3,
            n_count_cov: 3,
            outcome1_kinds: vec![VariableKind::Continuous],
            outcome2_kinds: vec![VariableKind::Binary],
            lambda0: 1.0,
            tau: KernelHyper::default(),
            channel_tau: Vec::new(),
            missing_tau: KernelHyper::default(),
            sigma: 0.5,
            missing_noise: 1.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.d < 1 {
            return Err(Error::Config("d must be at least 1".into()));
        }
        if self.outcome1_kinds.is_empty() || self.outcome2_kinds.is_empty() {
            return Err(Error::Config("each data source needs at least one outcome".into()));
        }
        if !self.channel_tau.is_empty() && self.channel_tau.len() != self.specs().len() {
            return Err(Error::Config(format!(
                "{} channel kernels for {} variables",
                self.channel_tau.len(),
                self.specs().len()
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config("sigma must be positive".into()));
        }
        if !(self.missing_noise >= 0.0 && self.missing_noise.is_finite()) {
            return Err(Error::Config("missing_noise must be non-negative".into()));
        }
        if !self.lambda0.is_finite() {
            return Err(Error::Config("lambda0 must be finite".into()));
        }
        Ok(())
    }

    /// Variable names: `x1..xq` for covariates (continuous, then binary, then
    /// count), `y1`, `y1_2`, ... for outcome 1 and `y2`, `y2_2`, ... for
    /// outcome 2.
    pub fn specs(&self) -> Vec<VariableSpec> {
        let mut specs = Vec::new();
        let covs = [
            (self.n_cont_cov, VariableKind::Continuous),
            (self.n_bin_cov, VariableKind::Binary),
            (self.n_count_cov, VariableKind::Count),
        ];
        for (count, kind) in covs {
            for _ in 0..count {
                let name = format!("x{}", specs.len() + 1);
                specs.push(VariableSpec::new(name, kind, Role::Covariate));
            }
        }
        for (side, kinds, role) in [
            (1, &self.outcome1_kinds, Role::Outcome1),
            (2, &self.outcome2_kinds, Role::Outcome2),
        ] {
            for (k, &kind) in kinds.iter().enumerate() {
                let name = if k == 0 { format!("y{side}") } else { format!("y{side}_{}", k + 1) };
                specs.push(VariableSpec::new(name, kind, role));
            }
        }
        specs
    }

    fn hyper(&self, j: usize) -> KernelHyper {
        self.channel_tau.get(j).copied().unwrap_or(self.tau)
    }
}

/// Generating latent positions and latent functions.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub z: Array2<f64>,
    /// `n x p` latent function values, one column per variable.
    pub f: Array2<f64>,
    pub lambda0: f64,
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// One GP draw over `z` by Cholesky whitening.
fn gp_draw(z: &LatentPositions, hyper: KernelHyper, rng: &mut Rng) -> Result<Array1<f64>> {
    let fac = cholesky_jittered(gram_matrix(z, hyper).view())?;
    let eta = Array1::from_shape_simple_fn(z.n(), || normal(rng));
    latent_function(fac.l(), eta.view())
}

/// Draw `z_i ~ N(0, I)`, a GP function per variable and every cell from its
/// exponential-family distribution with `theta = lambda0 + f`.
pub fn generate_single_source(cfg: &SimConfig, rng: &mut Rng) -> Result<(CompleteDataset, SimTruth)> {
    cfg.validate()?;
    let specs = cfg.specs();
    let (n, p) = (cfg.n, specs.len());
    let z = LatentPositions::new(Array2::from_shape_simple_fn((n, cfg.d), || normal(rng)))?;
    let mut f = Array2::zeros((n, p));
    let mut values = Array2::zeros((n, p));
    for (j, s) in specs.iter().enumerate() {
        let fj = gp_draw(&z, cfg.hyper(j), rng)?;
        let sd = if s.kind == VariableKind::Continuous { cfg.sigma } else { 1.0 };
        for i in 0..n {
            f[[i, j]] = fj[i];
            values[[i, j]] = sample(s.kind, CanonicalParam::new(cfg.lambda0 + fj[i], sd)?, rng)?;
        }
    }
    let data = CompleteDataset::new(specs, values)?;
    Ok((
        data,
        SimTruth {
            z: z.into_inner(),
            f,
            lambda0: cfg.lambda0,
        },
    ))
}

/// A two-source dataset with the cells it hides.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub data: CombinedDataset,
    pub hidden: HiddenCells,
    /// Missingness function used by a latent split.
    pub missing_f: Option<Vec<f64>>,
    /// Number of draws needed to avoid an empty pattern.
    pub attempts: usize,
}

fn split_with(data: &CompleteDataset, m: Vec<u8>) -> Result<(CombinedDataset, HiddenCells)> {
    let n = m.len();
    let ones = m.iter().filter(|&&v| v == 1).count();
    if n > 0 && (ones == 0 || ones == n) {
        return Err(Error::DegeneratePattern {
            n,
            pattern: u8::from(ones == n),
        });
    }
    data.mask(&m)
}

/// Set `m_i = 1{f_i + noise * e_i > 0}` with `e_i ~ N(0, 1)` and mask the
/// outcome block each unit does not observe.
pub fn split_with_missingness_function(
    data: &CompleteDataset,
    missing_f: &[f64],
    noise: f64,
    rng: &mut Rng,
) -> Result<Split> {
    if missing_f.len() != data.n() {
        return Err(Error::Shape(format!(
            "missingness function has {} values for {} units",
            missing_f.len(),
            data.n()
        )));
    }
    let m = missing_f.iter().map(|&f| u8::from(f + noise * normal(rng) > 0.0)).collect();
    let (combined, hidden) = split_with(data, m)?;
    Ok(Split {
        data: combined,
        hidden,
        missing_f: Some(missing_f.to_vec()),
        attempts: 1,
    })
}

/// Maximum number of redraws before a degenerate split is reported.
pub const MAX_SPLIT_ATTEMPTS: usize = 100;

/// Draw a missingness function from the GP over the generating positions and
/// split on the sign of `f + e`. An empty pattern triggers a fresh draw.
pub fn split_nmar(data: &CompleteDataset, truth: &SimTruth, cfg: &SimConfig, rng: &mut Rng) -> Result<Split> {
    if truth.z.nrows() != data.n() {
        return Err(Error::Shape(format!(
            "truth has {} units, data has {}",
            truth.z.nrows(),
            data.n()
        )));
    }
    let z = LatentPositions::new(truth.z.clone())?;
    let mut last = None;
    for attempt in 1..=MAX_SPLIT_ATTEMPTS {
        let f = gp_draw(&z, cfg.missing_tau, rng)?;
        match split_with_missingness_function(data, f.as_slice().expect("contiguous"), cfg.missing_noise, rng) {
            Ok(mut s) => {
                s.attempts = attempt;
                return Ok(s);
            }
            Err(e @ Error::DegeneratePattern { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Split with `m_i ~ Bernoulli(1 / (1 + exp(-x_i)))` for covariate column
/// `covariate`. With `equal`, exactly `n / 2` units get `m = 1`: those with
/// the largest `x_i + l_i`, `l_i` standard logistic, which is the same
/// latent form as the Bernoulli draw thresholded at its median.
pub fn split_logistic(data: &CompleteDataset, covariate: usize, equal: bool, rng: &mut Rng) -> Result<Split> {
    let spec = data
        .specs()
        .get(covariate)
        .ok_or_else(|| Error::Config(format!("no variable at column {covariate}")))?;
    if spec.role != Role::Covariate {
        return Err(Error::Config(format!("`{}` is not a covariate", spec.name)));
    }
    let x = data.values().column(covariate).to_owned();
    let mut last = None;
    for attempt in 1..=MAX_SPLIT_ATTEMPTS {
        let m = if equal {
            let keys: Vec<f64> = x
                .iter()
                .map(|&xi| {
                    let u: f64 = rand::Rng::random_range(rng, f64::EPSILON..1.0);
                    xi + (u / (1.0 - u)).ln()
                })
                .collect();
            let mut order: Vec<usize> = (0..x.len()).collect();
            order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
            let mut m = vec![0u8; x.len()];
            for &i in &order[..x.len() / 2] {
                m[i] = 1;
            }
            m
        } else {
            x.iter()
                .map(|&xi| u8::from(rand::Rng::random::<f64>(rng) < logistic(xi)))
                .collect()
        };
        match split_with(data, m) {
            Ok((combined, hidden)) => {
                return Ok(Split {
                    data: combined,
                    hidden,
                    missing_f: None,
                    attempts: attempt,
                })
            }
            Err(e @ Error::DegeneratePattern { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

// ---- files ----

/// Shortest text that parses back to the same `f64`; integral values are
/// written without a decimal point.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn open_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn header_error(message: String) -> Error {
    Error::Parse {
        row: 0,
        column: String::new(),
        message,
    }
}

/// Column position of every schema variable, plus `m` when `with_m`.
fn column_map(headers: &csv::StringRecord, schema: &[VariableSpec], with_m: bool) -> Result<(Vec<usize>, Option<usize>)> {
    let mut pos = vec![None; schema.len()];
    let mut m_col = None;
    for (c, h) in headers.iter().enumerate() {
        if with_m && h == "m" {
            if m_col.replace(c).is_some() {
                return Err(header_error("column `m` appears twice".into()));
            }
            continue;
        }
        match schema.iter().position(|s| s.name == h) {
            Some(j) if pos[j].is_none() => pos[j] = Some(c),
            Some(_) => return Err(header_error(format!("column `{h}` appears twice"))),
            None => return Err(header_error(format!("unknown column `{h}`"))),
        }
    }
    let pos = pos
        .into_iter()
        .zip(schema)
        .map(|(p, s)| p.ok_or_else(|| header_error(format!("missing column `{}`", s.name))))
        .collect::<Result<Vec<_>>>()?;
    if with_m && m_col.is_none() {
        return Err(header_error("missing column `m`".into()));
    }
    Ok((pos, m_col))
}

fn parse_cell(text: &str, row: usize, column: &str) -> Result<f64> {
    if text.is_empty() {
        return Ok(f64::NAN);
    }
    let v: f64 = text.parse().map_err(|_| Error::Parse {
        row,
        column: column.into(),
        message: format!("`{text}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column: column.into(),
            message: format!("`{text}` is not finite"),
        });
    }
    Ok(v)
}

fn read_table(path: &Path, schema: &[VariableSpec], with_m: bool) -> Result<(Array2<f64>, Vec<u8>)> {
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers()?.clone();
    let (pos, m_col) = column_map(&headers, schema, with_m)?;
    let mut rows = Vec::new();
    let mut m = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        for (j, s) in schema.iter().enumerate() {
            rows.push(parse_cell(rec.get(pos[j]).unwrap_or(""), row, &s.name)?);
        }
        if let Some(c) = m_col {
            let text = rec.get(c).unwrap_or("");
            let mi = match text {
                "0" => 0,
                "1" => 1,
                _ => {
                    return Err(Error::Parse {
                        row,
                        column: "m".into(),
                        message: format!("`{text}` is not 0 or 1"),
                    })
                }
            };
            m.push(mi);
        }
    }
    let n = rows.len() / schema.len().max(1);
    let values = Array2::from_shape_vec((n, schema.len()), rows).expect("rows x columns");
    Ok((values, m))
}

/// Read a two-source data CSV against `schema`.
pub fn load_csv(path: &Path, schema: &[VariableSpec]) -> Result<CombinedDataset> {
    let (values, m) = read_table(path, schema, true)?;
    CombinedDataset::new(schema.to_vec(), values, m)
}

pub fn save_csv(data: &CombinedDataset, path: &Path) -> Result<()> {
    let mut w = open_writer(path)?;
    let mut header: Vec<&str> = data.specs().iter().map(|s| s.name.as_str()).collect();
    header.push("m");
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut row: Vec<String> = (0..data.p()).map(|j| format_value(data.value(i, j).unwrap_or(f64::NAN))).collect();
        row.push(data.m()[i].to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a complete (single-source) data CSV; every cell is required.
pub fn load_complete_csv(path: &Path, schema: &[VariableSpec]) -> Result<CompleteDataset> {
    let (values, _) = read_table(path, schema, false)?;
    for ((i, j), v) in values.indexed_iter() {
        if v.is_nan() {
            return Err(Error::Parse {
                row: i + 1,
                column: schema[j].name.clone(),
                message: "complete data cannot have empty cells".into(),
            });
        }
    }
    CompleteDataset::new(schema.to_vec(), values)
}

pub fn save_complete_csv(data: &CompleteDataset, path: &Path) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record(data.specs().iter().map(|s| s.name.as_str()))?;
    for row in data.values().rows() {
        w.write_record(row.iter().map(|&v| format_value(v)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parse a schema sidecar.
pub fn parse_schema(text: &str) -> Result<Vec<VariableSpec>> {
    let mut specs = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            row: k + 1,
            column: "schema".into(),
            message,
        };
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        let [name, kind, role] = parts[..] else {
            return Err(err(format!("expected `name,kind,role`, got `{line}`")));
        };
        let kind = kind.parse().map_err(|e: Error| err(e.to_string()))?;
        let role = role.parse().map_err(|e: Error| err(e.to_string()))?;
        specs.push(VariableSpec::new(name, kind, role));
    }
    Ok(specs)
}

pub fn load_schema(path: &Path) -> Result<Vec<VariableSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_schema(&text)
}

pub fn format_schema(specs: &[VariableSpec]) -> String {
    let mut out = String::from("# name,kind,role\n");
    for s in specs {
        out.push_str(&format!("{},{},{}\n", s.name, s.kind, s.role));
    }
    out
}

pub fn save_schema(specs: &[VariableSpec], path: &Path) -> Result<()> {
    std::fs::write(path, format_schema(specs)).map_err(|e| Error::io(path, e))
}

pub fn save_truth(truth: &SimTruth, specs: &[VariableSpec], path: &Path) -> Result<()> {
    let mut w = open_writer(path)?;
    let mut header: Vec<String> = (1..=truth.z.ncols()).map(|k| format!("z{k}")).collect();
    header.extend(specs.iter().map(|s| format!("f_{}", s.name)));
    w.write_record(&header)?;
    for (zr, fr) in truth.z.rows().into_iter().zip(truth.f.rows()) {
        w.write_record(zr.iter().chain(fr.iter()).map(|&v| format_value(v)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a truth CSV; `lambda0` is not stored and comes from the caller.
pub fn load_truth(path: &Path, specs: &[VariableSpec], lambda0: f64) -> Result<SimTruth> {
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers()?.clone();
    let d = headers.iter().take_while(|h| h.starts_with('z')).count();
    let expected: Vec<String> = (1..=d)
        .map(|k| format!("z{k}"))
        .chain(specs.iter().map(|s| format!("f_{}", s.name)))
        .collect();
    if d == 0 || headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(header_error(format!("truth header should be `{}`", expected.join(","))));
    }
    let mut z = Vec::new();
    let mut f = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, text) in rec.iter().enumerate() {
            let v = parse_cell(text, r + 1, &expected[c])?;
            if v.is_nan() {
                return Err(Error::Parse {
                    row: r + 1,
                    column: expected[c].clone(),
                    message: "empty cell".into(),
                });
            }
            if c < d {
                z.push(v);
            } else {
                f.push(v);
            }
        }
    }
    let n = z.len() / d;
    Ok(SimTruth {
        z: Array2::from_shape_vec((n, d), z).expect("n x d"),
        f: Array2::from_shape_vec((n, specs.len()), f).expect("n x p"),
        lambda0,
    })
}

pub fn save_hidden(hidden: &HiddenCells, specs: &[VariableSpec], path: &Path) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record(["unit", "variable", "value"])?;
    for c in hidden.iter() {
        w.write_record([c.unit.to_string(), specs[c.variable].name.clone(), format_value(c.value)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_hidden(path: &Path, specs: &[VariableSpec]) -> Result<HiddenCells> {
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(["unit", "variable", "value"]) {
        return Err(header_error("hidden-cell header should be `unit,variable,value`".into()));
    }
    let mut cells = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        let unit = rec[0].parse().map_err(|_| Error::Parse {
            row,
            column: "unit".into(),
            message: format!("`{}` is not a unit index", &rec[0]),
        })?;
        let variable = specs.iter().position(|s| s.name == rec[1]).ok_or_else(|| Error::Parse {
            row,
            column: "variable".into(),
            message: format!("unknown variable `{}`", &rec[1]),
        })?;
        let value = parse_cell(&rec[2], row, "value")?;
        cells.push(crate::model::HiddenCell { unit, variable, value });
    }
    Ok(HiddenCells(cells))
}
