//! Squared reconstruction loss with optional contractive penalty and input
//! corruption, with exact gradients.
//!
//! For the one-hidden-layer model the Jacobian norm has the closed form
//! `‖R D_a Wᵀ‖²_F = aᵀ (RᵀR ∘ WᵀW) a` with `a = h'(u)`, so the penalty and
//! its gradient only need two `H×H` Gram matrices per batch.

use super::{AeParams, TrainConfig};
use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix, Rng, Vector};

/// Gradients laid out like [`AeParams`]; `r` is `None` for tied models,
/// whose decoder gradient is folded into `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct AeGrads {
    pub w: Matrix,
    pub r: Option<Matrix>,
    pub b: Vector,
    pub c: Vector,
}

impl AeGrads {
    pub fn zeros_like(p: &AeParams) -> Self {
        let (d, h) = p.w().shape();
        AeGrads {
            w: Matrix::zeros(d, h),
            r: (!p.is_tied()).then(|| Matrix::zeros(d, h)),
            b: vec![0.0; h],
            c: vec![0.0; d],
        }
    }

    /// Same block order as [`AeParams::blocks`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out = vec![self.w.as_slice()];
        if let Some(r) = &self.r {
            out.push(r.as_slice());
        }
        out.push(&self.b);
        out.push(&self.c);
        out
    }
}

/// Entrywise product of the two Gram matrices `RᵀR ∘ WᵀW`, plus each factor.
struct Grams {
    dec: Matrix,
    enc: Matrix,
    product: Matrix,
}

impl Grams {
    fn new(p: &AeParams) -> Self {
        let enc = gram(p.w());
        let dec = if p.is_tied() { enc.clone() } else { gram(p.r()) };
        let h = enc.rows();
        let product = Matrix::from_fn(h, h, |k, l| enc[(k, l)] * dec[(k, l)]);
        Grams { dec, enc, product }
    }
}

/// `AᵀA` for a `D×H` matrix.
fn gram(a: &Matrix) -> Matrix {
    let h = a.cols();
    let mut out = Matrix::zeros(h, h);
    for i in 0..a.rows() {
        let row = a.row(i);
        for k in 0..h {
            let rk = row[k];
            if rk == 0.0 {
                continue;
            }
            for (o, &rl) in out.row_mut(k).iter_mut().zip(row) {
                *o += rk * rl;
            }
        }
    }
    out
}

fn check_batch(p: &AeParams, inputs: &[Vector], targets: &[Vector]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::InvalidInput("batch must be non-empty".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::shape("loss batch (targets)", inputs.len(), targets.len()));
    }
    for (x, t) in inputs.iter().zip(targets) {
        p.check_input(x, "loss batch (input)")?;
        p.check_input(t, "loss batch (target)")?;
    }
    Ok(())
}

/// Mean auto-encoding loss `‖r(x̃) - x‖² + ε‖∂r/∂x‖²_F` and its gradient.
///
/// With `denoise_sigma > 0` the encoder sees `x + σ·N(0, I)` while the
/// target stays clean. A non-finite loss is reported as divergence at
/// epoch 0, batch 0; the trainer rewrites the position.
pub fn loss_and_grad(p: &AeParams, batch: &[Vector], cfg: &TrainConfig, rng: &mut Rng) -> Result<(f64, AeGrads)> {
    regression_loss_and_grad(p, batch, batch, cfg, rng)
}

/// Regression variant: mean `‖r(x̃_n) - y_n‖² + ε‖∂r/∂x‖²_F` over pairs.
pub fn regression_loss_and_grad(
    p: &AeParams,
    inputs: &[Vector],
    targets: &[Vector],
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<(f64, AeGrads)> {
    check_batch(p, inputs, targets)?;
    let xs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let ts: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    let (loss, grads) = batch_loss_and_grad(p, &xs, &ts, cfg.contraction, cfg.denoise_sigma, rng);
    if !loss.is_finite() {
        return Err(Error::Divergence { epoch: 0, batch: 0, loss });
    }
    Ok((loss, grads))
}

/// Mean objective on uncorrupted inputs, without gradients.
pub fn objective(p: &AeParams, inputs: &[Vector], targets: &[Vector], contraction: f64) -> Result<f64> {
    check_batch(p, inputs, targets)?;
    let act = p.activation();
    let grams = (contraction > 0.0).then(|| Grams::new(p));
    let mut total = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        let u = p.pre_activation(x);
        let hid: Vector = u.iter().map(|&v| act.apply(v)).collect();
        let rec = p.decode(&hid);
        total += rec.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        if let Some(g) = &grams {
            let slope: Vector = u.iter().map(|&v| act.derivative(v)).collect();
            total += contraction * quadratic_form(&g.product, &slope);
        }
    }
    Ok(total / inputs.len() as f64)
}

fn quadratic_form(m: &Matrix, a: &[f64]) -> f64 {
    (0..a.len()).map(|k| a[k] * dot(m.row(k), a)).sum()
}

pub(crate) fn batch_loss_and_grad(
    p: &AeParams,
    inputs: &[&[f64]],
    targets: &[&[f64]],
    contraction: f64,
    denoise_sigma: f64,
    rng: &mut Rng,
) -> (f64, AeGrads) {
    let (d, h) = p.w().shape();
    let act = p.activation();
    let dec = p.r();
    let grams = (contraction > 0.0).then(|| Grams::new(p));

    let mut grads = AeGrads::zeros_like(p);
    let mut dec_grad = Matrix::zeros(d, h);
    let mut slope_outer = grams.as_ref().map(|_| Matrix::zeros(h, h));
    let mut loss = 0.0;
    let mut noisy = vec![0.0; d];

    for (x, t) in inputs.iter().zip(targets) {
        let x_in: &[f64] = if denoise_sigma > 0.0 {
            for (n, &xi) in noisy.iter_mut().zip(x.iter()) {
                *n = xi + denoise_sigma * rng.normal();
            }
            &noisy
        } else {
            x
        };

        let u = p.pre_activation(x_in);
        let hid: Vector = u.iter().map(|&v| act.apply(v)).collect();
        let slope: Vector = u.iter().map(|&v| act.derivative(v)).collect();
        let rec = p.decode(&hid);

        let mut de = vec![0.0; d];
        for i in 0..d {
            let e = rec[i] - t[i];
            loss += e * e;
            de[i] = 2.0 * e;
        }

        // decoder, output bias, and backprop into the hidden layer
        let mut du = vec![0.0; h];
        for i in 0..d {
            let dei = de[i];
            grads.c[i] += dei;
            if dei == 0.0 {
                continue;
            }
            for ((g, &hk), (duk, &rik)) in dec_grad.row_mut(i).iter_mut().zip(&hid).zip(du.iter_mut().zip(dec.row(i))) {
                *g += dei * hk;
                *duk += dei * rik;
            }
        }
        for (duk, s) in du.iter_mut().zip(&slope) {
            *duk *= s;
        }

        if let (Some(g), Some(outer)) = (&grams, slope_outer.as_mut()) {
            let ga: Vector = (0..h).map(|k| dot(g.product.row(k), &slope)).collect();
            loss += contraction * dot(&slope, &ga);
            for k in 0..h {
                du[k] += 2.0 * contraction * ga[k] * act.second_derivative(u[k]);
                let sk = slope[k];
                if sk != 0.0 {
                    for (o, &sl) in outer.row_mut(k).iter_mut().zip(&slope) {
                        *o += sk * sl;
                    }
                }
            }
        }

        for (gb, &duk) in grads.b.iter_mut().zip(&du) {
            *gb += duk;
        }
        for (i, &xi) in x_in.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (g, &duk) in grads.w.row_mut(i).iter_mut().zip(&du) {
                *g += xi * duk;
            }
        }
    }

    // ∂/∂R of ε Σ aᵀ(RᵀR ∘ WᵀW)a = 2ε R (S ∘ WᵀW), S = Σ a aᵀ; symmetric for W.
    if let (Some(g), Some(outer)) = (&grams, &slope_outer) {
        let dec_weight = Matrix::from_fn(h, h, |k, l| outer[(k, l)] * g.enc[(k, l)]);
        let enc_weight = Matrix::from_fn(h, h, |k, l| outer[(k, l)] * g.dec[(k, l)]);
        let dec_pen = dec.matmul(&dec_weight).expect("square Gram");
        let enc_pen = p.w().matmul(&enc_weight).expect("square Gram");
        for (gv, pv) in dec_grad.as_mut_slice().iter_mut().zip(dec_pen.as_slice()) {
            *gv += 2.0 * contraction * pv;
        }
        for (gv, pv) in grads.w.as_mut_slice().iter_mut().zip(enc_pen.as_slice()) {
            *gv += 2.0 * contraction * pv;
        }
    }

    let inv = 1.0 / inputs.len() as f64;
    match grads.r.as_mut() {
        Some(r) => {
            for (gv, dv) in r.as_mut_slice().iter_mut().zip(dec_grad.as_slice()) {
                *gv = dv * inv;
            }
            grads.w.as_mut_slice().iter_mut().for_each(|v| *v *= inv);
        }
        None => {
            for (gv, dv) in grads.w.as_mut_slice().iter_mut().zip(dec_grad.as_slice()) {
                *gv = (*gv + dv) * inv;
            }
        }
    }
    grads.b.iter_mut().for_each(|v| *v *= inv);
    grads.c.iter_mut().for_each(|v| *v *= inv);
    (loss * inv, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::Activation;

    fn cfg(contraction: f64) -> TrainConfig {
        TrainConfig {
            contraction,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn perfect_reconstruction_has_zero_loss_and_gradient() {
        let p = AeParams::new(Matrix::identity(3), None, vec![0.0; 3], vec![0.0; 3], Activation::Linear).unwrap();
        let batch = vec![vec![0.1, 0.2, 0.3], vec![-1.0, 2.0, 0.5]];
        let (loss, g) = loss_and_grad(&p, &batch, &cfg(0.0), &mut Rng::new(0)).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.blocks().iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn contractive_penalty_equals_jacobian_norm() {
        let mut rng = Rng::new(1);
        for act in Activation::ALL {
            for tied in [true, false] {
                let mut p = AeParams::init_scaled(4, 5, act, tied, 0.7, &mut rng);
                p.b_mut().iter_mut().for_each(|v| *v = rng.uniform(-0.3, 0.3));
                let x: Vector = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
                let plain = objective(&p, &[x.clone()], &[x.clone()], 0.0).unwrap();
                let with = objective(&p, &[x.clone()], &[x.clone()], 1.0).unwrap();
                let jf = p.jacobian(&x).unwrap().frobenius_sq();
                assert!((with - plain - jf).abs() < 1e-12 * (1.0 + jf));
            }
        }
    }

    #[test]
    fn objective_matches_loss_and_grad_without_noise() {
        let mut rng = Rng::new(2);
        let p = AeParams::init(3, 4, Activation::Sigmoid, false, &mut rng);
        let batch: Vec<Vector> = (0..5).map(|_| (0..3).map(|_| rng.normal()).collect()).collect();
        let (loss, _) = loss_and_grad(&p, &batch, &cfg(0.1), &mut rng).unwrap();
        let obj = objective(&p, &batch, &batch, 0.1).unwrap();
        assert!((loss - obj).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_and_divergence() {
        let p = AeParams::init(2, 2, Activation::Linear, true, &mut Rng::new(3));
        assert!(matches!(loss_and_grad(&p, &[], &cfg(0.0), &mut Rng::new(0)), Err(Error::InvalidInput(_))));
        let huge = vec![vec![1e200, 1e200]];
        let mut q = p.clone();
        q.w_mut().as_mut_slice().iter_mut().for_each(|v| *v = 1e200);
        assert!(matches!(loss_and_grad(&q, &huge, &cfg(0.0), &mut Rng::new(0)), Err(Error::Divergence { .. })));
    }

    #[test]
    fn denoising_is_reproducible_per_seed() {
        let mut rng = Rng::new(4);
        let p = AeParams::init(3, 3, Activation::Relu, false, &mut rng);
        let batch: Vec<Vector> = (0..4).map(|_| (0..3).map(|_| rng.normal()).collect()).collect();
        let noisy = TrainConfig {
            denoise_sigma: 0.3,
            ..TrainConfig::default()
        };
        let a = loss_and_grad(&p, &batch, &noisy, &mut Rng::new(7)).unwrap();
        let b = loss_and_grad(&p, &batch, &noisy, &mut Rng::new(7)).unwrap();
        assert_eq!(a, b);
        let clean = loss_and_grad(&p, &batch, &cfg(0.0), &mut Rng::new(7)).unwrap();
        assert_ne!(a.0, clean.0);
    }
}
