use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use consfield::analysis::{conservativity_report, ReportOptions};
use consfield::autoencoder::{default_probes, train, Activation, AeParams, TrainConfig, TrainHistory};
use consfield::data::{gen_synthetic, grid2d, load_idx_with, synthetic_digits_at, BoxBounds, Dataset, ManifoldKind};
use consfield::experiments::{
    curl_scan_with, digits_beta_sweep, extraction, BetaSweepConfig, CurlScanConfig, ExtractionConfig, ExtractionReport,
};
use consfield::fields::{ae_dynamics_field, ae_reconstruction_field, BetaRecord, VectorField};
use consfield::numerics::{Rng, Vector};

use crate::config::{parse, Manifest};
use crate::svg::{line_plot, quiver, Series};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Line,
    Circle,
    Spiral,
    Digits,
    Idx,
    Grid,
}

/// Where training points come from. `samples` caps IDX files as well.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    pub kind: DataKind,
    pub samples: usize,
    pub noise: f64,
    /// Digit image side (8 down-scaled, 28 full).
    pub side: usize,
    pub path: Option<PathBuf>,
    pub grid: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec {
            kind: DataKind::Spiral,
            samples: 1000,
            noise: 0.02,
            side: 8,
            path: None,
            grid: 32,
            lo: -1.0,
            hi: 1.0,
        }
    }
}

impl DataSpec {
    pub fn load(&self, rng: &mut Rng) -> Result<Dataset, CliError> {
        let mut ds = match self.kind {
            DataKind::Line => gen_synthetic(ManifoldKind::Line, self.samples, self.noise, rng)?,
            DataKind::Circle => gen_synthetic(ManifoldKind::Circle, self.samples, self.noise, rng)?,
            DataKind::Spiral => gen_synthetic(ManifoldKind::Spiral, self.samples, self.noise, rng)?,
            DataKind::Digits => {
                if self.side == 0 || self.side > 28 {
                    return Err(CliError::Config(format!("data.side must be in 1..=28, got {}", self.side)));
                }
                synthetic_digits_at(self.samples, self.side, rng)
            }
            DataKind::Idx => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| CliError::Config("data.kind = \"idx\" needs data.path".into()))?;
                let mut ds = load_idx_with(path, (self.side < 28).then_some(self.side))?;
                ds.truncate(self.samples);
                ds
            }
            DataKind::Grid => {
                let bounds = BoxBounds::new(vec![self.lo; 2], vec![self.hi; 2])?;
                grid2d(&bounds, self.grid)?
            }
        };
        if ds.is_empty() {
            return Err(CliError::Config("dataset is empty".into()));
        }
        ds.seed = None;
        Ok(ds)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub hidden: usize,
    pub activation: Activation,
    pub tied: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            hidden: 64,
            activation: Activation::Sigmoid,
            tied: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub data: DataSpec,
    pub model: ModelSpec,
    pub train: TrainConfig,
    /// Training points used as symmetricity probes.
    pub probes: usize,
    pub seed: u64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            data: DataSpec {
                kind: DataKind::Digits,
                samples: 2000,
                ..DataSpec::default()
            },
            model: ModelSpec::default(),
            train: TrainConfig {
                epochs: 100,
                batch_size: 16,
                learning_rate: 5e-4,
                ..TrainConfig::default()
            },
            probes: 256,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Dynamics,
    Reconstruction,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSpec {
    /// Probes drawn uniformly from `[lo, hi]^D`.
    pub probes: usize,
    pub lo: f64,
    pub hi: f64,
    pub field: FieldKind,
    pub sym_tol: f64,
    pub curl_tol: f64,
    pub seed: u64,
}

impl Default for ReportSpec {
    fn default() -> Self {
        let opts = ReportOptions::default();
        ReportSpec {
            probes: 256,
            lo: -1.0,
            hi: 1.0,
            field: FieldKind::Dynamics,
            sym_tol: opts.sym_tol,
            curl_tol: opts.curl_tol,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSpec {
    pub data: DataSpec,
    pub seed: u64,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn out_dir(manifest: &Manifest, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = flag.or_else(|| manifest.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| CliError::Output(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn history_series(history: &TrainHistory, pick: impl Fn(&consfield::autoencoder::EpochRecord) -> Option<f64>) -> Vec<(f64, f64)> {
    history
        .records
        .iter()
        .filter_map(|r| pick(r).map(|v| (r.epoch as f64, v)))
        .collect()
}

fn grid_quiver(title: &str, field: &dyn VectorField, bounds: &BoxBounds, n: usize) -> String {
    let points = bounds.grid2d(n);
    let vectors: Vec<Vector> = points.iter().map(|x| field.eval(x)).collect();
    let spacing = (0..2).map(|k| (bounds.hi[k] - bounds.lo[k]) / (n.max(2) - 1) as f64).fold(f64::INFINITY, f64::min);
    quiver(title, &points, &vectors, spacing)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))
}

pub fn cmd_train(manifest: Manifest, out: Option<PathBuf>) -> Result<Vec<PathBuf>, CliError> {
    let dir = out_dir(&manifest, out)?;
    let spec: TrainSpec = parse(manifest.table)?;
    let mut rng = Rng::new(spec.seed);
    let data = spec.data.load(&mut rng.fork())?.points;
    let d = data[0].len();
    let p0 = AeParams::init(d, spec.model.hidden, spec.model.activation, spec.model.tied, &mut rng.fork());
    let mut probes = default_probes(&data, &mut rng.fork());
    probes.truncate(spec.probes);
    let cfg = TrainConfig {
        seed: rng.next_u64(),
        ..spec.train.clone()
    };
    let (p, history) = train(&p0, &data, &cfg, &probes)?;

    let plot = line_plot(
        "Jacobian symmetricity during training",
        "epoch",
        "mean sym",
        &[Series {
            name: "sym_mean",
            points: history_series(&history, |r| Some(r.sym_mean)),
        }],
    );
    Ok(vec![
        write(&dir, "params.json", &p.to_json()?)?,
        write(&dir, "history.csv", &history.to_csv())?,
        write(&dir, "sym_history.svg", &plot)?,
    ])
}

pub fn cmd_curl_scan(manifest: Manifest, out: Option<PathBuf>, start: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let dir = out_dir(&manifest, out)?;
    let cfg: CurlScanConfig = parse(manifest.table)?;
    let start = start.map(load_params).transpose()?;
    if let Some(p) = &start {
        if p.dim() != 2 {
            return Err(CliError::Config(format!("curl-scan needs a 2D model, got D = {}", p.dim())));
        }
    }
    let r = curl_scan_with(&cfg, start.as_ref())?;

    let mut curl_csv = String::from("epoch,curl_mean\n");
    for rec in &r.history.records {
        curl_csv.push_str(&format!("{},{}\n", rec.epoch, rec.curl_mean.unwrap_or(f64::NAN)));
    }
    let plot = line_plot(
        "Curl magnitude during training",
        "epoch",
        "mean |curl|",
        &[Series {
            name: "curl_mean",
            points: history_series(&r.history, |rec| rec.curl_mean),
        }],
    );
    Ok(vec![
        write(&dir, "params_initial.json", &r.initial.to_json()?)?,
        write(&dir, "params.json", &r.trained.to_json()?)?,
        write(&dir, "history.csv", &r.history.to_csv())?,
        write(&dir, "curl.csv", &curl_csv)?,
        write(&dir, "curl_grid_initial.csv", &r.initial_curl.to_csv())?,
        write(&dir, "curl_grid_final.csv", &r.final_curl.to_csv())?,
        write(
            &dir,
            "field_initial.svg",
            &grid_quiver("Initial field r(x) - x", &ae_dynamics_field(&r.initial), &r.bounds, cfg.grid),
        )?,
        write(
            &dir,
            "field_final.svg",
            &grid_quiver("Trained field r(x) - x", &ae_dynamics_field(&r.trained), &r.bounds, cfg.grid),
        )?,
        write(&dir, "curl_history.svg", &plot)?,
    ])
}

pub fn cmd_extract(manifest: Manifest, out: Option<PathBuf>) -> Result<Vec<PathBuf>, CliError> {
    let dir = out_dir(&manifest, out)?;
    let cfg: ExtractionConfig = parse(manifest.table)?;
    let r = extraction(&cfg)?;
    let bounds = BoxBounds::cube(2, -cfg.half_width, cfg.half_width);
    let report: &ExtractionReport = &r.report;
    Ok(vec![
        write(&dir, "params.json", &r.params.to_json()?)?,
        write(&dir, "samples.csv", &r.samples.to_csv())?,
        write(&dir, "history.csv", &r.history.to_csv())?,
        write(&dir, "report.json", &to_json(report)?)?,
        write(&dir, "field_source.svg", &grid_quiver("Source field", &cfg.source.field(), &bounds, cfg.grid))?,
        write(
            &dir,
            "field_learned.svg",
            &grid_quiver("Learned conservative field", &ae_dynamics_field(&r.params), &bounds, cfg.grid),
        )?,
    ])
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    config: &'a BetaSweepConfig,
    teacher_final_loss: f64,
    teacher_final_sym: f64,
    records: &'a [BetaRecord],
    worst_step_drop: f64,
}

pub fn cmd_beta_sweep(manifest: Manifest, out: Option<PathBuf>) -> Result<Vec<PathBuf>, CliError> {
    let dir = out_dir(&manifest, out)?;
    let cfg: BetaSweepConfig = parse(manifest.table)?;
    let run = digits_beta_sweep(&cfg)?;
    let last = run.teacher_history.last();
    let summary = SweepSummary {
        config: &cfg,
        teacher_final_loss: last.map_or(f64::NAN, |r| r.loss),
        teacher_final_sym: last.map_or(f64::NAN, |r| r.sym_mean),
        records: &run.result.records,
        worst_step_drop: run.result.worst_step_drop(),
    };
    let plot = line_plot(
        "Energy discrimination along the interpolation",
        "beta",
        "fraction E(clean) > E(corrupted)",
        &[Series {
            name: "fraction",
            points: run.result.records.iter().map(|r| (r.beta, r.fraction)).collect(),
        }],
    );
    Ok(vec![
        write(&dir, "table2.csv", &run.result.to_csv())?,
        write(&dir, "summary.json", &to_json(&summary)?)?,
        write(&dir, "params_trained.json", &run.trained.to_json()?)?,
        write(&dir, "params_random.json", &run.random.to_json()?)?,
        write(&dir, "table2.svg", &plot)?,
    ])
}

fn load_params(path: &Path) -> Result<AeParams, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read params file {}: {e}", path.display())))?;
    AeParams::from_json(&text).map_err(|e| CliError::Config(format!("invalid params file {}: {e}", path.display())))
}

/// Returns the written paths and the report JSON for printing.
pub fn cmd_report(manifest: Manifest, out: Option<PathBuf>, params: &Path) -> Result<(Vec<PathBuf>, String), CliError> {
    let dir = out_dir(&manifest, out)?;
    let spec: ReportSpec = parse(manifest.table)?;
    if spec.probes == 0 {
        return Err(CliError::Config("report needs at least one probe".into()));
    }
    let p = load_params(params)?;
    let bounds = BoxBounds::new(vec![spec.lo; p.dim()], vec![spec.hi; p.dim()])?;
    let mut rng = Rng::new(spec.seed);
    let probes: Vec<Vector> = (0..spec.probes).map(|_| bounds.sample(&mut rng)).collect();
    let opts = ReportOptions {
        sym_tol: spec.sym_tol,
        curl_tol: spec.curl_tol,
        seed: rng.next_u64(),
        ..ReportOptions::default()
    };
    let report = match spec.field {
        FieldKind::Dynamics => conservativity_report(&ae_dynamics_field(&p), &probes, &opts)?,
        FieldKind::Reconstruction => conservativity_report(&ae_reconstruction_field(&p), &probes, &opts)?,
    };
    let json = report.to_json()?;
    Ok((vec![write(&dir, "report.json", &json)?], json))
}

pub fn cmd_gen_data(manifest: Manifest, out: Option<PathBuf>) -> Result<Vec<PathBuf>, CliError> {
    let dir = out_dir(&manifest, out)?;
    let spec: GenSpec = parse(manifest.table)?;
    let mut rng = Rng::new(spec.seed);
    let mut ds = spec.data.load(&mut rng)?;
    ds.seed = Some(spec.seed);
    let mut written = vec![write(&dir, "data.csv", &ds.to_csv())?];
    if let Some(labels) = &ds.labels {
        let mut csv = String::from("label\n");
        for l in labels {
            csv.push_str(&format!("{l}\n"));
        }
        written.push(write(&dir, "labels.csv", &csv)?);
    }
    Ok(written)
}
