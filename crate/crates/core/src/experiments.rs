//! End-to-end experiment pipelines with desk-scale defaults.
//!
//! Each pipeline is a pure function of its config: identical configs give
//! bit-identical results, so the CSV exports can be compared byte for byte.

use serde::{Deserialize, Serialize};

use crate::analysis::{curl_grid, CurlGrid};
use crate::autoencoder::{default_probes, train, Activation, AeParams, TrainConfig, TrainHistory};
use crate::data::{gen_synthetic, synthetic_digits_at, CANVAS_SIDE, BoxBounds, Corruption, ManifoldKind};
use crate::error::{Error, Result};
use crate::fields::{
    ae_dynamics_field, analytic_gradient_sink, analytic_rotation, analytic_spiral_sink, beta_sweep,
    extract_conservative, BetaSweepResult, FieldSampleSet, LinearField, SweepSetup, VectorField,
};
use crate::numerics::{norm, Rng, Vector};

/// Training on 2D manifold data while watching the curl of the learned field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurlScanConfig {
    pub manifold: ManifoldKind,
    pub samples: usize,
    pub noise: f64,
    pub hidden: usize,
    pub activation: Activation,
    pub tied: bool,
    pub grid: usize,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for CurlScanConfig {
    fn default() -> Self {
        CurlScanConfig {
            manifold: ManifoldKind::Spiral,
            samples: 1000,
            noise: 0.02,
            hidden: 64,
            activation: Activation::Relu,
            tied: false,
            grid: 24,
            train: TrainConfig {
                epochs: 300,
                batch_size: 32,
                learning_rate: 1e-3,
                ..TrainConfig::default()
            },
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CurlScanResult {
    pub data: Vec<Vector>,
    pub initial: AeParams,
    pub trained: AeParams,
    pub history: TrainHistory,
    pub bounds: BoxBounds,
    pub initial_curl: CurlGrid,
    pub final_curl: CurlGrid,
}

impl CurlScanResult {
    pub fn initial_curl_mean(&self) -> f64 {
        self.history.first().and_then(|r| r.curl_mean).unwrap_or(f64::NAN)
    }

    pub fn final_curl_mean(&self) -> f64 {
        self.history.last().and_then(|r| r.curl_mean).unwrap_or(f64::NAN)
    }
}

pub fn curl_scan(cfg: &CurlScanConfig) -> Result<CurlScanResult> {
    curl_scan_with(cfg, None)
}

/// [`curl_scan`] starting from the given model instead of a fresh one.
pub fn curl_scan_with(cfg: &CurlScanConfig, start: Option<&AeParams>) -> Result<CurlScanResult> {
    if let Some(p) = start {
        if p.dim() != 2 {
            return Err(Error::shape("curl_scan (model dimension)", 2, p.dim()));
        }
    }
    let mut rng = Rng::new(cfg.seed);
    let data = gen_synthetic(cfg.manifold, cfg.samples, cfg.noise, &mut rng.fork())?.points;
    let fresh = AeParams::init(2, cfg.hidden, cfg.activation, cfg.tied, &mut rng.fork());
    let initial = start.cloned().unwrap_or(fresh);
    let probes = default_probes(&data, &mut rng.fork());
    let train_cfg = TrainConfig {
        seed: rng.next_u64(),
        ..cfg.train.clone()
    };
    let (trained, history) = train(&initial, &data, &train_cfg, &probes)?;
    let bounds = BoxBounds::bounding(&data).expect("non-empty data");
    let initial_curl = curl_grid(&ae_dynamics_field(&initial), &bounds, cfg.grid)?;
    let final_curl = curl_grid(&ae_dynamics_field(&trained), &bounds, cfg.grid)?;
    Ok(CurlScanResult {
        data,
        initial,
        trained,
        history,
        bounds,
        initial_curl,
        final_curl,
    })
}

/// Untied training on digits with and without the weight-length constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymmetryConfig {
    pub samples: usize,
    /// Image side; 8 is the down-scaled corpus, 28 the full canvas.
    pub side: usize,
    pub hidden: usize,
    pub activation: Activation,
    pub weight_length: f64,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for SymmetryConfig {
    fn default() -> Self {
        SymmetryConfig {
            samples: 2000,
            side: 8,
            hidden: 64,
            activation: Activation::Sigmoid,
            weight_length: 1.0,
            train: TrainConfig {
                epochs: 100,
                batch_size: 16,
                learning_rate: 5e-4,
                ..TrainConfig::default()
            },
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SymmetryResult {
    pub unconstrained: (AeParams, TrainHistory),
    pub constrained: (AeParams, TrainHistory),
}

impl SymmetryResult {
    pub fn final_sym(&self) -> (f64, f64) {
        let last = |h: &TrainHistory| h.last().map_or(f64::NAN, |r| r.sym_mean);
        (last(&self.unconstrained.1), last(&self.constrained.1))
    }
}

fn check_side(side: usize) -> Result<()> {
    if side == 0 || side > CANVAS_SIDE {
        return Err(Error::InvalidInput(format!("image side must be in 1..={CANVAS_SIDE}, got {side}")));
    }
    Ok(())
}

/// Both runs share data, initialization and minibatch order.
pub fn symmetry_direction(cfg: &SymmetryConfig) -> Result<SymmetryResult> {
    check_side(cfg.side)?;
    let mut rng = Rng::new(cfg.seed);
    let data = synthetic_digits_at(cfg.samples, cfg.side, &mut rng.fork()).points;
    let p0 = AeParams::init(data[0].len(), cfg.hidden, cfg.activation, false, &mut rng.fork());
    let probes = default_probes(&data, &mut rng.fork());
    let base = TrainConfig {
        seed: rng.next_u64(),
        weight_length: None,
        ..cfg.train.clone()
    };
    let constrained_cfg = TrainConfig {
        weight_length: Some(cfg.weight_length),
        ..base.clone()
    };
    let unconstrained = train(&p0, &data, &base, &probes)?;
    let constrained = train(&p0, &data, &constrained_cfg, &probes)?;
    Ok(SymmetryResult {
        unconstrained,
        constrained,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceField {
    SpiralSink,
    Rotation,
    GradientSink,
}

impl SourceField {
    pub fn field(self) -> LinearField {
        match self {
            SourceField::SpiralSink => analytic_spiral_sink(),
            SourceField::Rotation => analytic_rotation(),
            SourceField::GradientSink => analytic_gradient_sink(),
        }
    }
}

impl std::str::FromStr for SourceField {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "spiral-sink" => Ok(SourceField::SpiralSink),
            "rotation" => Ok(SourceField::Rotation),
            "gradient-sink" => Ok(SourceField::GradientSink),
            other => Err(format!("unknown source field `{other}`")),
        }
    }
}

/// Region covered by the extraction grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// The full `[-a, a]²` lattice.
    #[default]
    Square,
    /// Lattice nodes with `‖x‖ ≤ a`.
    Disc,
}

impl std::str::FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "square" => Ok(Domain::Square),
            "disc" => Ok(Domain::Disc),
            other => Err(format!("unknown domain `{other}` (expected square or disc)")),
        }
    }
}

/// Regression of a tied auto-encoder onto an analytic displacement field
/// sampled on a regular grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    pub source: SourceField,
    pub grid: usize,
    pub half_width: f64,
    pub domain: Domain,
    pub hidden: usize,
    pub activation: Activation,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            source: SourceField::SpiralSink,
            grid: 32,
            half_width: 1.0,
            domain: Domain::Square,
            hidden: 200,
            activation: Activation::Relu,
            train: TrainConfig {
                epochs: 200,
                batch_size: 32,
                learning_rate: 1e-3,
                ..TrainConfig::default()
            },
            seed: 0,
        }
    }
}

/// Vectors shorter than this are left out of the cosine average.
pub const COSINE_MIN_NORM: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    /// Mean cosine between the learned dynamics and the source's gradient part.
    pub mean_cosine: f64,
    pub mean_abs_curl: f64,
    pub source_mean_abs_curl: f64,
    /// Mean ‖learned dynamics‖ / mean ‖source field‖.
    pub magnitude_ratio: f64,
    /// Mean ‖learned − gradient part‖ / mean ‖gradient part‖.
    pub relative_error: f64,
    pub final_loss: f64,
}

#[derive(Clone, Debug)]
pub struct ExtractionResult {
    pub samples: FieldSampleSet,
    pub params: AeParams,
    pub history: TrainHistory,
    pub report: ExtractionReport,
}

pub fn extraction(cfg: &ExtractionConfig) -> Result<ExtractionResult> {
    if cfg.grid < 2 {
        return Err(Error::InvalidInput(format!("extraction grid needs n >= 2, got {}", cfg.grid)));
    }
    let source = cfg.source.field();
    let bounds = BoxBounds::cube(2, -cfg.half_width, cfg.half_width);
    let mut grid = bounds.grid2d(cfg.grid);
    if cfg.domain == Domain::Disc {
        grid.retain(|x| norm(x) <= cfg.half_width * (1.0 + 1e-12));
    }
    let samples = FieldSampleSet::from_points(&source, grid.clone(), true)?;
    let mut rng = Rng::new(cfg.seed);
    let (params, history) = extract_conservative(&samples, cfg.hidden, cfg.activation, &cfg.train, &mut rng)?;

    let learned = ae_dynamics_field(&params);
    let reference = source.symmetric_part();
    let (mut cos_sum, mut cos_n) = (0.0, 0usize);
    let (mut learned_mag, mut source_mag, mut ref_mag, mut err) = (0.0, 0.0, 0.0, 0.0);
    for x in &grid {
        let l = learned.eval(x);
        let s = source.eval(x);
        let g = reference.eval(x);
        let (nl, ng) = (norm(&l), norm(&g));
        if ng >= COSINE_MIN_NORM {
            cos_sum += if nl > 0.0 { crate::numerics::dot(&l, &g) / (nl * ng) } else { 0.0 };
            cos_n += 1;
        }
        learned_mag += nl;
        source_mag += norm(&s);
        ref_mag += ng;
        err += norm(&crate::numerics::sub(&l, &g));
    }
    // sums over the same grid, so ratios of sums are ratios of means
    let count = grid.len() as f64;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { a / count };
    let report = ExtractionReport {
        mean_cosine: if cos_n == 0 { f64::NAN } else { cos_sum / cos_n as f64 },
        mean_abs_curl: curl_grid(&learned, &bounds, cfg.grid)?.mean_abs,
        source_mean_abs_curl: curl_grid(&source, &bounds, cfg.grid)?.mean_abs,
        magnitude_ratio: ratio(learned_mag, source_mag),
        relative_error: ratio(err, ref_mag),
        final_loss: history.last().map_or(f64::NAN, |r| r.loss),
    };
    Ok(ExtractionResult {
        samples,
        params,
        history,
        report,
    })
}

/// Interpolation between a random untied model and a tied model trained on
/// digits, scored by clean-versus-corrupted energy discrimination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaSweepConfig {
    pub betas: Vec<f64>,
    pub train_samples: usize,
    /// Image side; 8 is the down-scaled corpus, 28 the full canvas.
    pub side: usize,
    pub pairs: usize,
    pub corruption: Corruption,
    /// Salt-and-pepper replacement probability, or the Bernoulli parameter.
    pub corruption_level: f64,
    pub hidden: usize,
    pub activation: Activation,
    /// Half-width of the uniform initialization of the random endpoint.
    pub random_scale: f64,
    pub teacher: TrainConfig,
    pub samples_per_field: usize,
    pub student_hidden: usize,
    pub student: TrainConfig,
    pub seed: u64,
}

impl Default for BetaSweepConfig {
    fn default() -> Self {
        BetaSweepConfig {
            betas: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            train_samples: 2000,
            side: 8,
            pairs: 500,
            corruption: Corruption::SaltPepper,
            corruption_level: 0.25,
            hidden: 64,
            activation: Activation::Sigmoid,
            random_scale: 1.0,
            teacher: TrainConfig {
                epochs: 50,
                batch_size: 32,
                learning_rate: 1e-3,
                ..TrainConfig::default()
            },
            samples_per_field: 2000,
            student_hidden: 64,
            student: TrainConfig {
                epochs: 50,
                batch_size: 32,
                learning_rate: 1e-3,
                ..TrainConfig::default()
            },
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BetaSweepRun {
    pub random: AeParams,
    pub trained: AeParams,
    pub teacher_history: TrainHistory,
    pub result: BetaSweepResult,
}

pub fn digits_beta_sweep(cfg: &BetaSweepConfig) -> Result<BetaSweepRun> {
    check_side(cfg.side)?;
    if cfg.pairs < 1 {
        return Err(Error::InvalidInput("need at least one clean/corrupted pair".into()));
    }
    let mut rng = Rng::new(cfg.seed);
    let data = synthetic_digits_at(cfg.train_samples, cfg.side, &mut rng.fork()).points;
    let mut pair_rng = rng.fork();
    let clean = synthetic_digits_at(cfg.pairs, cfg.side, &mut pair_rng).points;
    let corrupted: Vec<Vector> = clean
        .iter()
        .map(|x| cfg.corruption.apply(x, cfg.corruption_level, &mut pair_rng))
        .collect();
    let d = data[0].len();

    let t0 = AeParams::init(d, cfg.hidden, cfg.activation, true, &mut rng.fork());
    let teacher_cfg = TrainConfig {
        seed: rng.next_u64(),
        ..cfg.teacher.clone()
    };
    let probes = default_probes(&data, &mut rng.fork());
    let (trained, teacher_history) = train(&t0, &data, &teacher_cfg, &probes)?;
    let random = AeParams::init_scaled(d, cfg.hidden, cfg.activation, false, cfg.random_scale, &mut rng.fork());

    let bounds = BoxBounds::cube(d, 0.0, 1.0);
    let setup = SweepSetup {
        betas: &cfg.betas,
        bounds: &bounds,
        samples_per_field: cfg.samples_per_field,
        hidden: cfg.student_hidden,
        activation: cfg.activation,
        train: &cfg.student,
        clean: &clean,
        corrupted: &corrupted,
        seed: rng.next_u64(),
    };
    let result = beta_sweep(&random, &trained, &setup)?;
    Ok(BetaSweepRun {
        random,
        trained,
        teacher_history,
        result,
    })
}
