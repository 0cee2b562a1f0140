//! Oracles shared by the integration suites.
#![allow(dead_code)]

use consfield::autoencoder::{loss_and_grad, objective, Activation, AeParams, TrainConfig};
use consfield::numerics::{Rng, Vector};

/// Central difference refined by one Richardson step, `O(h⁴)` truncation.
pub fn richardson<F: Fn(f64) -> f64>(f: F, h: f64) -> f64 {
    let d = |s: f64| (f(s) - f(-s)) / (2.0 * s);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Largest `|analytic − numeric| / (1e-8 + |numeric|)` over every parameter entry.
pub fn max_gradient_error(p: &AeParams, batch: &[Vector], contraction: f64) -> f64 {
    let cfg = TrainConfig {
        contraction,
        ..TrainConfig::default()
    };
    let (_, grads) = loss_and_grad(p, batch, &cfg, &mut Rng::new(0)).unwrap();
    let analytic: Vec<f64> = grads.blocks().concat();
    let sizes: Vec<usize> = p.blocks().iter().map(|b| b.len()).collect();
    assert_eq!(analytic.len(), sizes.iter().sum::<usize>());

    let mut worst: f64 = 0.0;
    let mut flat = 0;
    for (block, &len) in sizes.iter().enumerate() {
        for k in 0..len {
            let numeric = richardson(
                |s| {
                    let mut q = p.clone();
                    q.blocks_mut()[block][k] += s;
                    objective(&q, batch, batch, contraction).unwrap()
                },
                1e-3,
            );
            let err = (analytic[flat] - numeric).abs() / (1e-8 + numeric.abs());
            worst = worst.max(err);
            flat += 1;
        }
    }
    worst
}

/// Random model and batch; for relu every pre-activation keeps a margin of
/// `0.05` from the kink so finite differences never straddle it.
pub fn random_case(act: Activation, tied: bool, rng: &mut Rng) -> (AeParams, Vec<Vector>) {
    loop {
        let d = 1 + rng.index(6);
        let h = 1 + rng.index(8);
        let mut p = AeParams::init_scaled(d, h, act, tied, 0.8, rng);
        p.b_mut().iter_mut().for_each(|v| *v = rng.uniform(-0.5, 0.5));
        p.c_mut().iter_mut().for_each(|v| *v = rng.uniform(-0.5, 0.5));
        let batch: Vec<Vector> = (0..4).map(|_| (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
        if act != Activation::Relu || batch.iter().all(|x| clear_of_kinks(&p, x, 0.05)) {
            return (p, batch);
        }
    }
}

pub fn clear_of_kinks(p: &AeParams, x: &[f64], margin: f64) -> bool {
    p.hidden_pre_activation(x).unwrap().iter().all(|u| u.abs() > margin)
}

pub fn random_point(d: usize, half_width: f64, rng: &mut Rng) -> Vector {
    (0..d).map(|_| rng.uniform(-half_width, half_width)).collect()
}
