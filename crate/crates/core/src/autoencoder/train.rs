use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::loss::{batch_loss_and_grad, objective, AeGrads};
use super::AeParams;
use crate::analysis::mean_symmetricity;
use crate::data::BoxBounds;
use crate::error::{Error, Result};
use crate::numerics::{Rng, Vector};

/// Side length of the curl probe grid used for 2D models.
pub const CURL_GRID_SIZE: usize = 24;
/// Number of training points used as symmetricity probes by default.
pub const DEFAULT_PROBE_COUNT: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    SgdMomentum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight ε of the contractive penalty `ε‖∂r/∂x‖²_F`.
    pub contraction: f64,
    /// Std-dev of the Gaussian input corruption; 0 disables denoising.
    pub denoise_sigma: f64,
    /// Target squared norm α of every encoder column, if constrained.
    pub weight_length: Option<f64>,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            contraction: 0.0,
            denoise_sigma: 0.0,
            weight_length: None,
            seed: 0,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.contraction >= 0.0) {
            return bad(format!("contraction must be non-negative, got {}", self.contraction));
        }
        if !(self.denoise_sigma >= 0.0) {
            return bad(format!("denoise_sigma must be non-negative, got {}", self.denoise_sigma));
        }
        if let Some(alpha) = self.weight_length {
            if !(alpha > 0.0) {
                return bad(format!("weight_length must be positive, got {alpha}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub sym_mean: f64,
    pub curl_mean: Option<f64>,
}

/// Per-epoch diagnostics. Record 0 describes the model before the first update.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn first(&self) -> Option<&EpochRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV with header `epoch,loss,sym_mean,curl_mean`; `curl_mean` is empty
    /// when the model is not two-dimensional.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,sym_mean,curl_mean\n");
        for r in &self.records {
            let curl = r.curl_mean.map(|c| c.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", r.epoch, r.loss, r.sym_mean, curl);
        }
        out
    }
}

enum OptimizerState {
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
    SgdMomentum { velocity: Vec<f64> },
}

struct Optimizer {
    state: OptimizerState,
    lr: f64,
}

impl Optimizer {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    const MOMENTUM: f64 = 0.9;

    fn new(kind: OptimizerKind, n: usize, lr: f64) -> Self {
        let state = match kind {
            OptimizerKind::Adam => OptimizerState::Adam {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
            OptimizerKind::SgdMomentum => OptimizerState::SgdMomentum { velocity: vec![0.0; n] },
        };
        Optimizer { state, lr }
    }

    fn step(&mut self, p: &mut AeParams, g: &AeGrads) {
        let lr = self.lr;
        let grads = g.blocks();
        let mut offset = 0;
        match &mut self.state {
            OptimizerState::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - Self::BETA1.powi(*t);
                let c2 = 1.0 - Self::BETA2.powi(*t);
                for (block, gblock) in p.blocks_mut().into_iter().zip(grads) {
                    for (k, (w, &gk)) in block.iter_mut().zip(gblock).enumerate() {
                        let i = offset + k;
                        m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * gk;
                        v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * gk * gk;
                        *w -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
                    }
                    offset += gblock.len();
                }
            }
            OptimizerState::SgdMomentum { velocity } => {
                for (block, gblock) in p.blocks_mut().into_iter().zip(grads) {
                    for (k, (w, &gk)) in block.iter_mut().zip(gblock).enumerate() {
                        let vel = &mut velocity[offset + k];
                        *vel = Self::MOMENTUM * *vel - lr * gk;
                        *w += *vel;
                    }
                    offset += gblock.len();
                }
            }
        }
    }
}

/// Picks up to [`DEFAULT_PROBE_COUNT`] training points as symmetricity probes.
pub fn default_probes(data: &[Vector], rng: &mut Rng) -> Vec<Vector> {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    rng.shuffle(&mut idx);
    idx.truncate(DEFAULT_PROBE_COUNT);
    idx.into_iter().map(|i| data[i].clone()).collect()
}

/// Auto-encoder training: minimizes the configured loss with clean targets.
pub fn train(p0: &AeParams, data: &[Vector], cfg: &TrainConfig, probes: &[Vector]) -> Result<(AeParams, TrainHistory)> {
    fit(p0, data, data, cfg, probes)
}

/// Minibatch regression of `r(inputs[n])` onto `targets[n]`.
pub fn fit(
    p0: &AeParams,
    inputs: &[Vector],
    targets: &[Vector],
    cfg: &TrainConfig,
    probes: &[Vector],
) -> Result<(AeParams, TrainHistory)> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::InvalidInput("training data must be non-empty".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::shape("fit (targets)", inputs.len(), targets.len()));
    }
    for x in inputs.iter().chain(targets).chain(probes) {
        p0.check_input(x, "fit")?;
    }

    let mut p = p0.clone();
    if let Some(alpha) = cfg.weight_length {
        p.project_weight_length(alpha)?;
    }
    let curl_box = (p.dim() == 2).then(|| BoxBounds::bounding(inputs)).flatten();

    let mut rng = Rng::new(cfg.seed);
    let mut optimizer = Optimizer::new(cfg.optimizer, p.num_params(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history = TrainHistory::default();
    history.records.push(diagnose(&p, 0, inputs, targets, cfg, probes, curl_box.as_ref())?);

    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| inputs[i].as_slice()).collect();
            let ts: Vec<&[f64]> = chunk.iter().map(|&i| targets[i].as_slice()).collect();
            let (loss, grads) = batch_loss_and_grad(&p, &xs, &ts, cfg.contraction, cfg.denoise_sigma, &mut rng);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch, loss });
            }
            optimizer.step(&mut p, &grads);
            if let Some(alpha) = cfg.weight_length {
                p.project_weight_length(alpha)?;
            }
        }
        history.records.push(diagnose(&p, epoch, inputs, targets, cfg, probes, curl_box.as_ref())?);
    }
    Ok((p, history))
}

fn diagnose(
    p: &AeParams,
    epoch: usize,
    inputs: &[Vector],
    targets: &[Vector],
    cfg: &TrainConfig,
    probes: &[Vector],
    curl_box: Option<&BoxBounds>,
) -> Result<EpochRecord> {
    let loss = objective(p, inputs, targets, cfg.contraction)?;
    if !loss.is_finite() || !p.is_finite() {
        return Err(Error::Divergence { epoch, batch: 0, loss });
    }
    let sym_mean = mean_symmetricity(probes.iter().map(|x| p.jacobian_unchecked(x)));
    let curl_mean = curl_box.map(|bx| {
        let grid = bx.grid2d(CURL_GRID_SIZE);
        let total: f64 = grid
            .iter()
            .map(|x| {
                let j = p.jacobian_unchecked(x);
                (j[(1, 0)] - j[(0, 1)]).abs()
            })
            .sum();
        total / grid.len() as f64
    });
    Ok(EpochRecord {
        epoch,
        loss,
        sym_mean,
        curl_mean,
    })
}
