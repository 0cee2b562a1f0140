//! Vector fields and learned extraction of their conservative part.
//!
//! A tied auto-encoder can only represent conservative fields, so regressing
//! one onto samples of an arbitrary field returns (approximately) the
//! least-squares closest gradient field. [`beta_sweep`] runs that regression
//! along a path of auto-encoders that starts at a random, non-conservative
//! model and ends at a tied model trained on data, and scores each learned
//! energy by how often it prefers clean data over corrupted data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::autoencoder::{fit, Activation, AeParams, TrainConfig, TrainHistory};
use crate::data::BoxBounds;
use crate::error::{Error, Result};
use crate::numerics::{finite_diff_jacobian, Matrix, Rng, Vector, DEFAULT_FD_STEP};

/// A map `R^D -> R^D`.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> Vector;

    /// Exact Jacobian `∂f_i/∂x_j`, when the field knows it.
    fn analytic_jacobian(&self, _x: &[f64]) -> Option<Matrix> {
        None
    }

    fn has_analytic_jacobian(&self) -> bool {
        false
    }
}

/// Analytic Jacobian when available, otherwise central differences.
pub fn field_jacobian(f: &dyn VectorField, x: &[f64]) -> Result<Matrix> {
    if x.len() != f.dim() {
        return Err(Error::shape("field_jacobian", f.dim(), x.len()));
    }
    match f.analytic_jacobian(x) {
        Some(j) => Ok(j),
        None => finite_diff_jacobian(|p| f.eval(p), x, DEFAULT_FD_STEP),
    }
}

/// `f(x) = A x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearField {
    pub matrix: Matrix,
}

impl LinearField {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::shape("LinearField", "square matrix", format!("{:?}", matrix.shape())));
        }
        Ok(LinearField { matrix })
    }

    fn from_2x2(a: [[f64; 2]; 2]) -> Self {
        LinearField {
            matrix: Matrix::from_rows(&[a[0].to_vec(), a[1].to_vec()]).expect("2x2"),
        }
    }

    /// The field obtained from the symmetric part of `A`.
    pub fn symmetric_part(&self) -> LinearField {
        let s = self.matrix.add(&self.matrix.transpose()).expect("square").scale(0.5);
        LinearField { matrix: s }
    }

    pub fn antisymmetric_part(&self) -> LinearField {
        let k = self.matrix.sub(&self.matrix.transpose()).expect("square").scale(0.5);
        LinearField { matrix: k }
    }
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.matrix.rows()
    }

    fn eval(&self, x: &[f64]) -> Vector {
        self.matrix.matvec(x).expect("dimension checked by caller")
    }

    fn analytic_jacobian(&self, _x: &[f64]) -> Option<Matrix> {
        Some(self.matrix.clone())
    }

    fn has_analytic_jacobian(&self) -> bool {
        true
    }
}

/// The spiralling sink `F(x, y) = (-x + y, -x - y)`.
pub fn analytic_spiral_sink() -> LinearField {
    LinearField::from_2x2([[-1.0, 1.0], [-1.0, -1.0]])
}

/// Pure rotation `F(x, y) = (-y, x)`, divergence free with curl 2.
pub fn analytic_rotation() -> LinearField {
    LinearField::from_2x2([[0.0, -1.0], [1.0, 0.0]])
}

/// `F(x, y) = (-x, -y) = ∇(-‖x‖²/2)`.
pub fn analytic_gradient_sink() -> LinearField {
    LinearField::from_2x2([[-1.0, 0.0], [0.0, -1.0]])
}

/// Field backed by a closure, Jacobian by finite differences.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64]) -> Vector + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64]) -> Vector + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Vector {
        (self.f)(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AeFieldKind {
    /// `x ↦ r(x)`
    Reconstruction,
    /// `x ↦ r(x) - x`
    Dynamics,
}

/// An auto-encoder viewed as a vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct AeField {
    pub params: AeParams,
    pub kind: AeFieldKind,
}

pub fn ae_reconstruction_field(p: &AeParams) -> AeField {
    AeField {
        params: p.clone(),
        kind: AeFieldKind::Reconstruction,
    }
}

pub fn ae_dynamics_field(p: &AeParams) -> AeField {
    AeField {
        params: p.clone(),
        kind: AeFieldKind::Dynamics,
    }
}

impl VectorField for AeField {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn eval(&self, x: &[f64]) -> Vector {
        let mut r = self.params.reconstruct_unchecked(x);
        if self.kind == AeFieldKind::Dynamics {
            r.iter_mut().zip(x).for_each(|(ri, xi)| *ri -= xi);
        }
        r
    }

    fn analytic_jacobian(&self, x: &[f64]) -> Option<Matrix> {
        let mut j = self.params.jacobian_unchecked(x);
        if self.kind == AeFieldKind::Dynamics {
            for i in 0..j.rows() {
                j[(i, i)] -= 1.0;
            }
        }
        Some(j)
    }

    fn has_analytic_jacobian(&self) -> bool {
        true
    }
}

/// `(1 - β) θ0 + β θK` entrywise, always untied. `β = 1` is the `θK` endpoint.
pub fn interpolate_params(theta0: &AeParams, theta_k: &AeParams, beta: f64) -> Result<AeParams> {
    if theta0.w().shape() != theta_k.w().shape() {
        return Err(Error::shape(
            "interpolate_params",
            format!("{:?}", theta0.w().shape()),
            format!("{:?}", theta_k.w().shape()),
        ));
    }
    if theta0.activation() != theta_k.activation() {
        return Err(Error::InvalidInput(format!(
            "cannot interpolate {} and {} models",
            theta0.activation(),
            theta_k.activation()
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidInput(format!("beta must lie in [0, 1], got {beta}")));
    }
    let mix = |a: &[f64], b: &[f64]| -> Vector {
        if beta == 0.0 {
            a.to_vec()
        } else if beta == 1.0 {
            b.to_vec()
        } else {
            a.iter().zip(b).map(|(x, y)| (1.0 - beta) * x + beta * y).collect()
        }
    };
    let (d, h) = theta0.w().shape();
    let w = Matrix::from_vec(d, h, mix(theta0.w().as_slice(), theta_k.w().as_slice()))?;
    let r = Matrix::from_vec(d, h, mix(theta0.r().as_slice(), theta_k.r().as_slice()))?;
    AeParams::new(
        w,
        Some(r),
        mix(theta0.b(), theta_k.b()),
        mix(theta0.c(), theta_k.c()),
        theta0.activation(),
    )
}

/// Input/output pairs sampled from a field.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSampleSet {
    pub inputs: Vec<Vector>,
    pub outputs: Vec<Vector>,
    pub bounds: BoxBounds,
    pub seed: Option<u64>,
    /// Outputs are displacements `f(x)` rather than reconstructions; the
    /// regression target is then `x + f(x)`.
    pub displacement: bool,
}

impl FieldSampleSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    /// Pairs taken from a fixed list of points (e.g. a grid).
    pub fn from_points(f: &dyn VectorField, points: Vec<Vector>, displacement: bool) -> Result<Self> {
        let bounds = BoxBounds::bounding(&points).ok_or_else(|| Error::InvalidInput("no sample points".into()))?;
        let mut outputs = Vec::with_capacity(points.len());
        for x in &points {
            if x.len() != f.dim() {
                return Err(Error::shape("FieldSampleSet::from_points", f.dim(), x.len()));
            }
            let y = f.eval(x);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("field is not finite at {x:?}")));
            }
            outputs.push(y);
        }
        Ok(FieldSampleSet {
            inputs: points,
            outputs,
            bounds,
            seed: None,
            displacement,
        })
    }

    pub fn as_displacement(mut self) -> Self {
        self.displacement = true;
        self
    }

    /// Reconstruction targets: `y` as stored, or `x + y` for displacement sets.
    pub fn regression_targets(&self) -> Vec<Vector> {
        if self.displacement {
            self.inputs
                .iter()
                .zip(&self.outputs)
                .map(|(x, y)| x.iter().zip(y).map(|(a, b)| a + b).collect())
                .collect()
        } else {
            self.outputs.clone()
        }
    }

    /// CSV `x_1..x_D,y_1..y_D`.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).chain((1..=d).map(|i| format!("y_{i}"))).collect();
        let mut out = header.join(",");
        out.push('\n');
        for (x, y) in self.inputs.iter().zip(&self.outputs) {
            let row: Vec<String> = x.iter().chain(y).map(f64::to_string).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    /// Parses [`FieldSampleSet::to_csv`] output; the box is the bounding box of the inputs.
    pub fn from_csv(text: &str, displacement: bool) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::InvalidInput("empty sample CSV".into()))?;
        let cols = header.split(',').count();
        if cols == 0 || cols % 2 != 0 {
            return Err(Error::InvalidInput(format!("sample CSV needs 2D columns, got {cols}")));
        }
        let d = cols / 2;
        let (mut inputs, mut outputs) = (Vec::new(), Vec::new());
        for (n, line) in lines.enumerate() {
            let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::InvalidInput(format!("sample CSV row {}: {e}", n + 1)))?;
            if vals.len() != cols {
                return Err(Error::shape("sample CSV row", cols, vals.len()));
            }
            inputs.push(vals[..d].to_vec());
            outputs.push(vals[d..].to_vec());
        }
        let bounds = BoxBounds::bounding(&inputs).ok_or_else(|| Error::InvalidInput("sample CSV has no rows".into()))?;
        Ok(FieldSampleSet {
            inputs,
            outputs,
            bounds,
            seed: None,
            displacement,
        })
    }
}

/// `n` points uniform in `bounds`, paired with `f`. Points where `f` is not
/// finite are redrawn, up to `10 n` draws in total.
pub fn sample_field(f: &dyn VectorField, bounds: &BoxBounds, n: usize, rng: &mut Rng) -> Result<FieldSampleSet> {
    if n < 1 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    if bounds.dim() != f.dim() {
        return Err(Error::shape("sample_field", f.dim(), bounds.dim()));
    }
    let (mut inputs, mut outputs) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut attempts = 0;
    while inputs.len() < n {
        if attempts == 10 * n {
            return Err(Error::InvalidInput(format!(
                "field non-finite too often: {} of {n} samples after {attempts} draws",
                inputs.len()
            )));
        }
        attempts += 1;
        let x = bounds.sample(rng);
        let y = f.eval(&x);
        if y.iter().all(|v| v.is_finite()) {
            inputs.push(x);
            outputs.push(y);
        }
    }
    Ok(FieldSampleSet {
        inputs,
        outputs,
        bounds: bounds.clone(),
        seed: None,
        displacement: false,
    })
}

/// Regresses a freshly initialized tied auto-encoder onto the sample set.
///
/// The result is conservative by construction; the training history's loss
/// is the mean squared residual against the regression targets.
pub fn extract_conservative(
    samples: &FieldSampleSet,
    hidden: usize,
    activation: Activation,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<(AeParams, TrainHistory)> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("sample set is empty".into()));
    }
    let p0 = AeParams::init(samples.dim(), hidden, activation, true, rng);
    let targets = samples.regression_targets();
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    rng.shuffle(&mut idx);
    let probes: Vec<Vector> = idx.iter().take(64).map(|&i| samples.inputs[i].clone()).collect();
    let cfg = TrainConfig {
        seed: rng.next_u64(),
        ..cfg.clone()
    };
    fit(&p0, &samples.inputs, &targets, &cfg, &probes)
}

/// Fraction of pairs with `E(clean_i) > E(corrupted_i)` under a tied model.
pub fn discrimination_fraction(p: &AeParams, clean: &[Vector], corrupted: &[Vector]) -> Result<f64> {
    if !p.is_tied() {
        return Err(Error::Contract("discrimination needs a tied model with a closed-form energy".into()));
    }
    if clean.len() != corrupted.len() {
        return Err(Error::shape("discrimination_fraction", clean.len(), corrupted.len()));
    }
    if clean.is_empty() {
        return Err(Error::InvalidInput("no pairs to compare".into()));
    }
    let mut wins = 0usize;
    for (x, x_bad) in clean.iter().zip(corrupted) {
        if p.energy(x)? > p.energy(x_bad)? {
            wins += 1;
        }
    }
    Ok(wins as f64 / clean.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaRecord {
    pub beta: f64,
    pub loss: f64,
    pub fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BetaSweepResult {
    pub records: Vec<BetaRecord>,
}

impl BetaSweepResult {
    /// CSV `beta,loss,fraction`, one row per β in ascending order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("beta,loss,fraction\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{}", r.beta, r.loss, r.fraction);
        }
        out
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.fraction).collect()
    }

    /// Largest drop of the fraction between consecutive β values (0 if monotone).
    pub fn worst_step_drop(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| (w[0].fraction - w[1].fraction).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Everything a β sweep needs besides the two endpoint models.
#[derive(Clone, Debug)]
pub struct SweepSetup<'a> {
    pub betas: &'a [f64],
    pub bounds: &'a BoxBounds,
    pub samples_per_field: usize,
    pub hidden: usize,
    pub activation: Activation,
    pub train: &'a TrainConfig,
    pub clean: &'a [Vector],
    pub corrupted: &'a [Vector],
    pub seed: u64,
}

/// For each β: interpolate the endpoints, sample the reconstruction field
/// uniformly in the box, extract its conservative part with a tied model,
/// and score that model's energy on clean vs corrupted pairs.
///
/// Legs are independent (seeded by their position in the sorted β list) and
/// run on the current rayon pool; results come back in β order.
pub fn beta_sweep(theta0: &AeParams, theta_k: &AeParams, setup: &SweepSetup<'_>) -> Result<BetaSweepResult> {
    let mut betas = setup.betas.to_vec();
    if betas.is_empty() {
        return Err(Error::InvalidInput("no beta values given".into()));
    }
    if betas.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(Error::InvalidInput("beta values must lie in [0, 1]".into()));
    }
    betas.sort_by(f64::total_cmp);
    if setup.clean.len() != setup.corrupted.len() {
        return Err(Error::shape("beta_sweep pairs", setup.clean.len(), setup.corrupted.len()));
    }

    let records: Result<Vec<BetaRecord>> = betas
        .par_iter()
        .enumerate()
        .map(|(leg, &beta)| {
            let mut rng = Rng::stream(setup.seed, leg as u64);
            let field = ae_reconstruction_field(&interpolate_params(theta0, theta_k, beta)?);
            let samples = sample_field(&field, setup.bounds, setup.samples_per_field, &mut rng)?;
            let (learned, history) = extract_conservative(&samples, setup.hidden, setup.activation, setup.train, &mut rng)?;
            let loss = history.last().map_or(f64::NAN, |r| r.loss);
            let fraction = discrimination_fraction(&learned, setup.clean, setup.corrupted)?;
            Ok(BetaRecord { beta, loss, fraction })
        })
        .collect();
    Ok(BetaSweepResult { records: records? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::symmetricity;
    use crate::numerics::{finite_diff_jacobian, max_abs_diff};

    #[test]
    fn spiral_sink_values() {
        let f = analytic_spiral_sink();
        assert_eq!(f.eval(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(f.eval(&[1.0, 0.0]), vec![-1.0, -1.0]);
        let j = f.analytic_jacobian(&[0.3, 0.2]).unwrap();
        assert_eq!(j, Matrix::from_rows(&[vec![-1.0, 1.0], vec![-1.0, -1.0]]).unwrap());
    }

    #[test]
    fn spiral_sink_splits_into_gradient_and_rotation() {
        let f = analytic_spiral_sink();
        assert_eq!(f.symmetric_part(), analytic_gradient_sink());
        let rot = f.antisymmetric_part();
        assert_eq!(rot.matrix, Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap());
    }

    #[test]
    fn ae_field_jacobians_match_finite_differences() {
        let mut rng = Rng::new(1);
        for act in Activation::ALL {
            let p = AeParams::init_scaled(3, 5, act, false, 0.9, &mut rng);
            for field in [ae_reconstruction_field(&p), ae_dynamics_field(&p)] {
                let x = vec![0.31, -0.57, 0.83];
                let fd = finite_diff_jacobian(|q| field.eval(q), &x, DEFAULT_FD_STEP).unwrap();
                assert!(field.analytic_jacobian(&x).unwrap().max_abs_diff(&fd) < 1e-6);
            }
        }
    }

    #[test]
    fn zero_encoder_gives_constant_reconstruction() {
        let mut rng = Rng::new(2);
        let mut p = AeParams::init(2, 3, Activation::Sigmoid, false, &mut rng);
        *p.w_mut() = Matrix::zeros(2, 3);
        *p.b_mut() = vec![0.2, -0.1, 0.4];
        *p.c_mut() = vec![1.0, -1.0];
        let f = ae_reconstruction_field(&p);
        let expected = p.reconstruct(&[0.0, 0.0]).unwrap();
        for x in [[1.0, 2.0], [-3.0, 0.5]] {
            assert!(max_abs_diff(&f.eval(&x), &expected) < 1e-15);
        }
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let mut rng = Rng::new(3);
        let a = AeParams::init(3, 4, Activation::Relu, false, &mut rng);
        let b = AeParams::init(3, 4, Activation::Relu, true, &mut rng);
        assert_eq!(interpolate_params(&a, &b, 1.0).unwrap(), b.untied());
        assert_eq!(interpolate_params(&a, &b, 0.0).unwrap(), a);
        let mid = interpolate_params(&a, &b, 0.5).unwrap();
        for (m, (x, y)) in mid.w().as_slice().iter().zip(a.w().as_slice().iter().zip(b.w().as_slice())) {
            assert!((m - 0.5 * (x + y)).abs() < 1e-15);
        }
        assert!(!mid.is_tied());
        let c = AeParams::init(3, 5, Activation::Relu, false, &mut rng);
        assert!(interpolate_params(&a, &c, 0.5).is_err());
        let s = AeParams::init(3, 4, Activation::Sigmoid, false, &mut rng);
        assert!(interpolate_params(&a, &s, 0.5).is_err());
    }

    #[test]
    fn sampling_cases() {
        let constant = FnField::new(2, |_: &[f64]| vec![3.0, -1.0]);
        let bx = BoxBounds::cube(2, -1.0, 1.0);
        let s = sample_field(&constant, &bx, 20, &mut Rng::new(4)).unwrap();
        assert!(s.outputs.iter().all(|y| y == &vec![3.0, -1.0]));
        assert!(s.inputs.iter().all(|x| bx.contains(x)));
        assert!(sample_field(&constant, &bx, 0, &mut Rng::new(4)).is_err());
        let again = sample_field(&constant, &bx, 20, &mut Rng::new(4)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn sampling_rejects_and_redraws_non_finite_values() {
        let half_nan = FnField::new(1, |x: &[f64]| if x[0] < 0.0 { vec![f64::NAN] } else { vec![x[0]] });
        let s = sample_field(&half_nan, &BoxBounds::cube(1, -1.0, 1.0), 50, &mut Rng::new(5)).unwrap();
        assert!(s.inputs.iter().all(|x| x[0] >= 0.0));
        let never = FnField::new(1, |_: &[f64]| vec![f64::INFINITY]);
        assert!(sample_field(&never, &BoxBounds::cube(1, 0.0, 1.0), 5, &mut Rng::new(5)).is_err());
    }

    #[test]
    fn sample_csv_round_trip() {
        let s = sample_field(&analytic_spiral_sink(), &BoxBounds::cube(2, -1.0, 1.0), 7, &mut Rng::new(6)).unwrap();
        let text = s.to_csv();
        assert!(text.starts_with("x_1,x_2,y_1,y_2\n"));
        let back = FieldSampleSet::from_csv(&text, false).unwrap();
        assert_eq!(back.inputs, s.inputs);
        assert_eq!(back.outputs, s.outputs);
    }

    #[test]
    fn displacement_targets_add_inputs() {
        let s = FieldSampleSet::from_points(&analytic_spiral_sink(), vec![vec![1.0, 0.0]], true).unwrap();
        assert_eq!(s.regression_targets(), vec![vec![0.0, -1.0]]);
    }

    #[test]
    fn discrimination_cases() {
        let mut rng = Rng::new(7);
        let p = AeParams::init(4, 3, Activation::Sigmoid, true, &mut rng);
        let clean: Vec<Vector> = (0..10).map(|_| (0..4).map(|_| rng.uniform(0.0, 1.0)).collect()).collect();
        assert_eq!(discrimination_fraction(&p, &clean, &clean).unwrap(), 0.0);
        assert!(discrimination_fraction(&p.untied(), &clean, &clean).is_err());
        assert!(discrimination_fraction(&p, &clean, &clean[..3]).is_err());
    }

    #[test]
    fn extraction_returns_symmetric_tied_model() {
        let grid = BoxBounds::cube(2, -1.0, 1.0).grid2d(8);
        let samples = FieldSampleSet::from_points(&analytic_spiral_sink(), grid.clone(), true).unwrap();
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let (p, _) = extract_conservative(&samples, 10, Activation::Relu, &cfg, &mut Rng::new(8)).unwrap();
        assert!(p.is_tied());
        for x in &grid {
            let j = p.jacobian(x).unwrap();
            if j.frobenius() > 0.0 {
                assert!(symmetricity(&j).unwrap() >= 1.0 - 1e-9);
            }
        }
    }
}
