//! CSV ingestion, result files, run manifests and the fit / cross-validation
//! commands.
//!
//! Every float written here uses 17 significant digits so that reading a file
//! back gives the identical `f64`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::diagnostics::{run_loocv, summarize, PredictionMetrics, Summary};
use crate::error::{HblError, Result};
use crate::eta_approx::ValidationRow;
use crate::experiments::{MultimodalResult, SensitivityResult, StudyRow, TimingRow};
use crate::gibbs::{run_chain, FitConfig, SamplerKind};
use crate::influence::InfluenceGrid;
use crate::model::{Dataset, EtaMode, LambdaMode, PosteriorSamples};

/// Version string recorded in every manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Chain lengths used for real-data fits; `cv` scales both by a factor.
pub const REAL_DATA_ITERATIONS: usize = 15_000;
pub const REAL_DATA_BURN_IN: usize = 5_000;

/// Above this many total sweeps `cv` logs a warning before starting.
const CV_WARN_SWEEPS: usize = 50_000_000;

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| HblError::Parse {
        row,
        column: column.to_string(),
        message: format!("'{cell}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(HblError::Parse {
            row,
            column: column.to_string(),
            message: format!("non-finite value '{cell}'"),
        });
    }
    Ok(v)
}

/// Reads a rectangular numeric CSV with a header row. `y` is the column named
/// `response`; every other column becomes a predictor, in header order.
/// Rows in errors are 1-based data rows (the header is row 0).
pub fn load_csv(path: &Path, response: &str) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let y_col = header
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| HblError::MissingColumn(response.to_string()))?;
    let mut y = Vec::new();
    let mut x = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(HblError::Parse {
                row: i + 1,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let v = parse_cell(cell, i + 1, &header[j])?;
            if j == y_col {
                y.push(v);
            } else {
                x.push(v);
            }
        }
    }
    let n = y.len();
    let p = header.len() - 1;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != y_col)
        .map(|(_, h)| h.clone())
        .collect();
    Dataset::with_names(
        DVector::from_vec(y),
        DMatrix::from_row_slice(n, p, &x),
        response.to_string(),
        names,
    )
}

/// Writes `y` first, then the predictors, under their recorded names.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut header = vec![data.response_name.clone()];
    header.extend(data.column_names.iter().cloned());
    let mut table = Table::new(header);
    for i in 0..data.n() {
        let mut row = vec![data.y[i]];
        row.extend(data.x.row(i).iter());
        table.push_numeric(&row);
    }
    table.write(path)
}

/// A header plus string cells; the common shape of every emitted CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: Vec<S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_numeric(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| fmt_f64(v)).collect());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Table> {
        let mut reader = csv::Reader::from_path(path)?;
        let header = reader.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            rows.push(record?.iter().map(String::from).collect());
        }
        Ok(Table { header, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HblError::MissingColumn(name.to_string()))
    }

    /// Numeric values of one column.
    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[j].trim().parse().map_err(|_| HblError::Parse {
                    row: i + 1,
                    column: name.to_string(),
                    message: format!("'{}' is not a number", r[j]),
                })
            })
            .collect()
    }

    /// All cells parsed as numbers, as an `rows x columns` matrix.
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        let mut values = Vec::with_capacity(self.rows.len() * self.header.len());
        for (i, r) in self.rows.iter().enumerate() {
            for (j, cell) in r.iter().enumerate() {
                values.push(parse_cell(cell, i + 1, &self.header[j])?);
            }
        }
        Ok(DMatrix::from_row_slice(
            self.rows.len(),
            self.header.len(),
            &values,
        ))
    }
}

/// Post-burn-in draws, one column per parameter.
pub fn write_samples(path: &Path, samples: &PosteriorSamples) -> Result<()> {
    let mut table = Table::new(samples.names.clone());
    for row in samples.draws.row_iter() {
        table.push(row.iter().map(|&v| fmt_f64(v)).collect());
    }
    table.write(path)
}

pub fn read_samples(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let table = Table::read(path)?;
    let m = table.to_matrix()?;
    Ok((table.header, m))
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let mut table = Table::new(vec!["parameter", "mean", "median", "lower", "upper", "ess"]);
    for s in &summary.params {
        let mut row = vec![s.name.clone()];
        row.extend([s.mean, s.median, s.lower, s.upper, s.ess].map(fmt_f64));
        table.push(row);
    }
    table.write(path)
}

/// Ordered key-value record of a run, written as `key = value` lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.set("command", command);
        m.set("version", VERSION);
        m
    }

    /// Adds or replaces `key`.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// SHA-256 over every entry except the hash itself.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries.iter().filter(|(k, _)| k != "config_hash") {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Records the hash of the current entries, then writes the file.
    pub fn write(&mut self, path: &Path) -> Result<()> {
        let hash = self.config_hash();
        self.set("config_hash", hash);
        let text: String = self
            .entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path)?;
        let mut m = Manifest::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once(" = ").ok_or_else(|| HblError::Parse {
                row: i + 1,
                column: String::new(),
                message: format!("expected 'key = value', found '{line}'"),
            })?;
            m.entries.push((k.to_string(), v.to_string()));
        }
        Ok(m)
    }

    /// Every field of a chain configuration.
    pub fn record_fit_config(&mut self, config: &FitConfig) {
        self.set("method", config.sampler_kind.label());
        self.set("seed", config.seed);
        self.set("stream_id", config.stream_id);
        self.set("iterations", config.iterations);
        self.set("burn_in", config.burn_in);
        self.set("thin", config.thin);
        self.set("stored_draws", config.stored_draws());
        let h = &config.hyper;
        self.set("a", fmt_f64(h.a));
        self.set("b", fmt_f64(h.b));
        self.set("c", fmt_f64(h.c));
        self.set("d", fmt_f64(h.d));
        self.set(
            "eta",
            match h.eta_mode {
                EtaMode::Learned => "learn".to_string(),
                EtaMode::Fixed(v) => fmt_f64(v),
            },
        );
        self.set(
            "lambda",
            match h.lambda_mode {
                LambdaMode::Learned => "learn".to_string(),
                LambdaMode::Fixed(v) => fmt_f64(v),
            },
        );
        self.set("fp_max_iter", h.fp_max_iter);
        self.set("fp_tol", fmt_f64(h.fp_tol));
        self.set("store_full_state", config.store_full_state);
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Inputs of [`fit_command`].
#[derive(Debug, Clone)]
pub struct FitRequest {
    pub data: PathBuf,
    pub response: String,
    /// Center and scale `y` and every column before fitting.
    pub standardize: bool,
    pub config: FitConfig,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub samples: PosteriorSamples,
    pub summary: Summary,
    pub manifest: Manifest,
}

/// Loads the data, runs one chain and writes `samples.csv`, `summary.csv`
/// and `manifest.txt` into the output directory.
pub fn fit_command(req: &FitRequest) -> Result<FitOutcome> {
    let raw = load_csv(&req.data, &req.response)?;
    let data = if req.standardize {
        raw.standardize()?
    } else {
        raw
    };
    let samples = run_chain(&data, &req.config)?;
    let summary = summarize(&samples)?;
    ensure_dir(&req.out_dir)?;
    write_samples(&req.out_dir.join("samples.csv"), &samples)?;
    write_summary(&req.out_dir.join("summary.csv"), &summary)?;

    let mut manifest = Manifest::new("fit");
    manifest.set("data", req.data.display());
    manifest.set("response", &req.response);
    manifest.set("standardize", req.standardize);
    manifest.set("n", data.n());
    manifest.set("p", data.p());
    manifest.record_fit_config(&req.config);
    let fp = samples.fixed_point;
    manifest.set("fixed_point_calls", fp.calls);
    manifest.set("fixed_point_converged", fp.converged);
    let rate = if fp.calls > 0 {
        fp.converged as f64 / fp.calls as f64
    } else {
        f64::NAN
    };
    manifest.set("fixed_point_convergence_rate", fmt_f64(rate));
    manifest.write(&req.out_dir.join("manifest.txt"))?;
    Ok(FitOutcome {
        samples,
        summary,
        manifest,
    })
}

/// Inputs of [`cv_command`].
#[derive(Debug, Clone)]
pub struct CvRequest {
    pub data: PathBuf,
    pub response: String,
    pub standardize: bool,
    pub methods: Vec<SamplerKind>,
    /// Template for every fold; iterations and burn-in are replaced by the
    /// real-data lengths times `length_factor`.
    pub config: FitConfig,
    pub length_factor: f64,
    pub out_dir: PathBuf,
}

impl CvRequest {
    /// Chain settings of one method after scaling.
    pub fn fold_config(&self, method: SamplerKind) -> Result<FitConfig> {
        if !(self.length_factor.is_finite() && self.length_factor > 0.0) {
            return Err(HblError::InvalidConfig(format!(
                "chain length factor must be positive, got {}",
                self.length_factor
            )));
        }
        let mut cfg = self.config.clone();
        cfg.sampler_kind = method;
        cfg.iterations =
            ((REAL_DATA_ITERATIONS as f64 * self.length_factor).round() as usize).max(2);
        cfg.burn_in = (REAL_DATA_BURN_IN as f64 * self.length_factor).round() as usize;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Leave-one-out cross-validation of every requested method; writes
/// `cv.csv` (one row per method) and `manifest.txt`.
pub fn cv_command(req: &CvRequest) -> Result<Vec<(SamplerKind, PredictionMetrics)>> {
    let raw = load_csv(&req.data, &req.response)?;
    let data = if req.standardize {
        raw.standardize()?
    } else {
        raw
    };
    let mut results = Vec::new();
    for &method in &req.methods {
        let cfg = req.fold_config(method)?;
        let sweeps = data.n() * cfg.iterations;
        if sweeps > CV_WARN_SWEEPS {
            log::warn!(
                "{}: {} folds x {} iterations = {sweeps} sweeps",
                method.label(),
                data.n(),
                cfg.iterations
            );
        }
        results.push((method, run_loocv(&data, &cfg)?));
    }
    ensure_dir(&req.out_dir)?;
    write_cv(&req.out_dir.join("cv.csv"), &results)?;
    let mut manifest = Manifest::new("cv");
    manifest.set("data", req.data.display());
    manifest.set("response", &req.response);
    manifest.set("standardize", req.standardize);
    manifest.set("n", data.n());
    manifest.set("p", data.p());
    manifest.set("length_factor", fmt_f64(req.length_factor));
    manifest.set(
        "methods",
        req.methods
            .iter()
            .map(|m| m.label())
            .collect::<Vec<_>>()
            .join(","),
    );
    manifest.record_fit_config(
        &req.fold_config(req.methods.first().copied().unwrap_or(SamplerKind::Hbl))?,
    );
    manifest.write(&req.out_dir.join("manifest.txt"))?;
    Ok(results)
}

pub fn write_cv(path: &Path, results: &[(SamplerKind, PredictionMetrics)]) -> Result<()> {
    let mut table = Table::new(vec!["method", "mspe", "mape", "mhpe", "medspe"]);
    for (m, r) in results {
        let mut row = vec![m.label().to_string()];
        row.extend([r.mspe, r.mape, r.mhpe, r.medspe].map(fmt_f64));
        table.push(row);
    }
    table.write(path)
}

pub fn write_study(path: &Path, rows: &[StudyRow]) -> Result<()> {
    let mut table = Table::new(vec![
        "model",
        "n",
        "method",
        "rmse",
        "al",
        "cp",
        "completed",
        "failed",
    ]);
    for r in rows {
        let mut row = vec![
            r.model_id.to_string(),
            r.n.to_string(),
            r.method.label().to_string(),
        ];
        row.extend([r.rmse, r.al, r.cp].map(fmt_f64));
        row.push(r.completed.to_string());
        row.push(r.failed.to_string());
        table.push(row);
    }
    table.write(path)
}

/// One row per completed replication with its posterior median of `eta`.
pub fn write_eta_medians(path: &Path, rows: &[StudyRow]) -> Result<()> {
    let mut table = Table::new(vec!["model", "n", "method", "replication", "eta_median"]);
    for r in rows {
        for (k, &v) in r.eta_medians.iter().enumerate() {
            table.push(vec![
                r.model_id.to_string(),
                r.n.to_string(),
                r.method.label().to_string(),
                k.to_string(),
                fmt_f64(v),
            ]);
        }
    }
    table.write(path)
}

pub fn write_validation(path: &Path, rows: &[ValidationRow]) -> Result<()> {
    let mut table = Table::new(vec![
        "n",
        "prior",
        "max_tv",
        "max_kl",
        "max_reverse_kl",
        "mean_tv",
        "mean_kl",
        "mean_reverse_kl",
    ]);
    for r in rows {
        let mut row = vec![r.n.to_string()];
        row.extend(
            [
                r.prior,
                r.max_tv,
                r.max_kl,
                r.max_reverse_kl,
                r.mean_tv,
                r.mean_kl,
                r.mean_reverse_kl,
            ]
            .map(fmt_f64),
        );
        table.push(row);
    }
    table.write(path)
}

pub fn write_influence(path: &Path, grid: &InfluenceGrid) -> Result<()> {
    let mut table = Table::new(vec!["x", "z", "eta", "if_beta0", "if_beta1"]);
    for r in grid.rows() {
        table.push_numeric(&r);
    }
    table.write(path)
}

/// `demo_data.csv`, per-prior draws and smoothed density grids, and
/// `demo_modes.csv` with the mode counts.
pub fn write_multimodal(dir: &Path, result: &MultimodalResult) -> Result<()> {
    ensure_dir(dir)?;
    write_dataset(&dir.join("demo_data.csv"), &result.data)?;
    let mut modes = Table::new(vec!["prior", "mode_count", "beta1", "beta2", "density"]);
    for (label, post) in [
        ("unconditional", &result.unconditional),
        ("conditional", &result.conditional),
    ] {
        let mut draws = Table::new(vec!["beta1", "beta2", "log_rho"]);
        for i in 0..post.beta1.len() {
            draws.push_numeric(&[post.beta1[i], post.beta2[i], post.log_rho[i]]);
        }
        draws.write(&dir.join(format!("demo_draws_{label}.csv")))?;
        let g = &post.grid;
        let mut grid = Table::new(vec!["beta1", "beta2", "density"]);
        for (i, &b1) in g.x_axis.iter().enumerate() {
            for (j, &b2) in g.y_axis.iter().enumerate() {
                grid.push_numeric(&[b1, b2, g.density[i][j]]);
            }
        }
        grid.write(&dir.join(format!("demo_grid_{label}.csv")))?;
        for (b1, b2) in g.modes() {
            let i = g.x_axis.iter().position(|&v| v == b1).unwrap_or(0);
            let j = g.y_axis.iter().position(|&v| v == b2).unwrap_or(0);
            modes.push(vec![
                label.to_string(),
                post.mode_count.to_string(),
                fmt_f64(b1),
                fmt_f64(b2),
                fmt_f64(g.density[i][j]),
            ]);
        }
    }
    modes.write(&dir.join("demo_modes.csv"))
}

pub fn write_timing(path: &Path, rows: &[TimingRow]) -> Result<()> {
    let mut table = Table::new(vec!["method", "p", "seconds"]);
    for r in rows {
        table.push(vec![
            r.method.label().to_string(),
            r.p.to_string(),
            fmt_f64(r.seconds),
        ]);
    }
    table.write(path)
}

/// Long format: one row per (setting, point), each carrying the observed
/// and true values at that point.
pub fn write_sensitivity(path: &Path, result: &SensitivityResult) -> Result<()> {
    let mut table = Table::new(vec!["varied", "value", "t", "y", "truth", "yhat"]);
    for curve in &result.curves {
        for i in 0..result.t.len() {
            let mut row = vec![curve.varied.label().to_string()];
            row.extend(
                [
                    curve.value,
                    result.t[i],
                    result.y[i],
                    result.truth[i],
                    curve.yhat[i],
                ]
                .map(fmt_f64),
            );
            table.push(row);
        }
    }
    table.write(path)
}
