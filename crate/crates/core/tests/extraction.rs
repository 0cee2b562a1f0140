mod common;

use consfield::analysis::symmetricity;
use consfield::autoencoder::{Activation, AeParams, TrainConfig};
use consfield::data::BoxBounds;
use consfield::experiments::{extraction, Domain, ExtractionConfig, SourceField};
use consfield::fields::{
    ae_reconstruction_field, beta_sweep, extract_conservative, sample_field, LinearField, SweepSetup, VectorField,
};
use consfield::numerics::{Matrix, Rng, Vector};

#[test]
fn realizable_target_is_recovered() {
    let mut rng = Rng::new(21);
    let teacher = AeParams::init_scaled(3, 6, Activation::Sigmoid, true, 1.5, &mut rng);
    let samples = sample_field(&ae_reconstruction_field(&teacher), &BoxBounds::cube(3, -1.0, 1.0), 400, &mut rng).unwrap();
    let cfg = TrainConfig {
        epochs: 300,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let (p, history) = extract_conservative(&samples, 6, Activation::Sigmoid, &cfg, &mut rng).unwrap();
    let (first, last) = (history.first().unwrap().loss, history.last().unwrap().loss);
    assert!(last < 1e-3 * first, "loss {first} -> {last}");
    assert!(p.is_tied());
    for x in &samples.inputs[..50] {
        assert!(symmetricity(&p.jacobian(x).unwrap()).unwrap() >= 1.0 - 1e-9);
    }
}

#[test]
fn linear_model_learns_the_symmetric_part() {
    // A = S + K with S positive definite, so the tied linear map W Wᵀ can reach S
    let a = Matrix::from_rows(&[vec![1.0, 0.6, -0.3], vec![-0.2, 0.8, 0.4], vec![0.5, -0.2, 1.2]]).unwrap();
    let s = a.add(&a.transpose()).unwrap().scale(0.5);
    let field = LinearField::new(a.clone()).unwrap();
    let mut rng = Rng::new(22);
    let samples = sample_field(&field, &BoxBounds::cube(3, -1.0, 1.0), 600, &mut rng).unwrap();
    let cfg = TrainConfig {
        epochs: 300,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let (p, _) = extract_conservative(&samples, 3, Activation::Linear, &cfg, &mut rng).unwrap();
    let wwt = p.w().matmul(&p.w().transpose()).unwrap();
    let gap = wwt.sub(&s).unwrap().frobenius();
    assert!(gap <= 0.1 * a.frobenius(), "‖WWᵀ − S‖ = {gap}");
}

#[test]
fn spiral_sink_gradient_part_is_recovered() {
    let r = extraction(&ExtractionConfig::default()).unwrap();
    assert!(r.report.mean_cosine >= 0.95, "{:?}", r.report);
    assert!(r.report.mean_abs_curl <= 0.2);
    assert!((r.report.source_mean_abs_curl - 2.0).abs() < 1e-9);
}

#[test]
fn conservative_source_is_reproduced() {
    let cfg = ExtractionConfig {
        source: SourceField::GradientSink,
        ..ExtractionConfig::default()
    };
    let r = extraction(&cfg).unwrap();
    assert!(r.report.relative_error <= 0.05, "{:?}", r.report);
}

#[test]
fn rotation_is_rejected_on_a_disc() {
    let cfg = ExtractionConfig {
        source: SourceField::Rotation,
        domain: Domain::Disc,
        ..ExtractionConfig::default()
    };
    let r = extraction(&cfg).unwrap();
    assert!(r.report.magnitude_ratio <= 0.2, "{:?}", r.report);
}

/// Least-squares gradient field `∇φ` with `φ` a polynomial of total degree
/// `deg`, fitted to `targets` at `points`; returns the fitted vectors.
fn polynomial_gradient_projection(points: &[Vector], targets: &[Vector], deg: i32) -> Vec<Vector> {
    let mut powers = Vec::new();
    for a in 0..=deg {
        for b in 0..=deg - a {
            if a + b > 0 {
                powers.push((a, b));
            }
        }
    }
    let grad = |(a, b): (i32, i32), x: f64, y: f64| -> [f64; 2] {
        let gx = if a > 0 { f64::from(a) * x.powi(a - 1) * y.powi(b) } else { 0.0 };
        let gy = if b > 0 { f64::from(b) * x.powi(a) * y.powi(b - 1) } else { 0.0 };
        [gx, gy]
    };
    let n = powers.len();
    let mut normal = vec![vec![0.0; n + 1]; n];
    for (p, t) in points.iter().zip(targets) {
        let g: Vec<[f64; 2]> = powers.iter().map(|&pw| grad(pw, p[0], p[1])).collect();
        for i in 0..n {
            for j in 0..n {
                normal[i][j] += g[i][0] * g[j][0] + g[i][1] * g[j][1];
            }
            normal[i][n] += g[i][0] * t[0] + g[i][1] * t[1];
        }
    }
    // Gaussian elimination with partial pivoting
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| normal[a][col].abs().total_cmp(&normal[b][col].abs())).unwrap();
        normal.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = normal[row][col] / normal[col][col];
                for k in col..=n {
                    normal[row][k] -= f * normal[col][k];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..n).map(|i| normal[i][n] / normal[i][i]).collect();
    points
        .iter()
        .map(|p| {
            let mut v = vec![0.0, 0.0];
            for (c, &pw) in coef.iter().zip(&powers) {
                let g = grad(pw, p[0], p[1]);
                v[0] += c * g[0];
                v[1] += c * g[1];
            }
            v
        })
        .collect()
}

#[test]
fn rotation_on_a_square_matches_the_least_squares_projection() {
    // On a square the rotation's flux through the boundary does not vanish,
    // so its closest gradient field is not small; the learned field should
    // sit at that optimum rather than at zero.
    let r = extraction(&ExtractionConfig {
        source: SourceField::Rotation,
        ..ExtractionConfig::default()
    })
    .unwrap();
    let displacement: Vec<Vector> = r.samples.outputs.clone();
    let fitted = polynomial_gradient_projection(&r.samples.inputs, &displacement, 8);
    let count = fitted.len() as f64;
    let norm = |v: &Vector| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let oracle_mse = fitted.iter().zip(&displacement).map(|(f, t)| {
        (f[0] - t[0]).powi(2) + (f[1] - t[1]).powi(2)
    }).sum::<f64>() / count;
    let oracle_ratio = fitted.iter().map(norm).sum::<f64>() / displacement.iter().map(norm).sum::<f64>();
    assert!(oracle_ratio > 0.25 && oracle_ratio < 0.4, "oracle ratio {oracle_ratio}");

    let learned_mse = r.report.final_loss;
    assert!(learned_mse >= 0.98 * oracle_mse, "{learned_mse} vs {oracle_mse}");
    assert!(learned_mse <= 1.1 * oracle_mse, "{learned_mse} vs {oracle_mse}");
    assert!(r.report.magnitude_ratio <= oracle_ratio + 0.05);
}

#[test]
fn small_beta_sweep_properties() {
    let mut rng = Rng::new(23);
    let d = 6;
    let data: Vec<Vector> = (0..200)
        .map(|_| {
            let t = rng.uniform(0.0, 1.0);
            (0..d).map(|k| if k % 2 == 0 { t } else { 1.0 - t }).collect()
        })
        .collect();
    let teacher_cfg = TrainConfig { epochs: 60, learning_rate: 3e-3, ..TrainConfig::default() };
    let t0 = AeParams::init(d, 8, Activation::Sigmoid, true, &mut rng);
    let (trained, _) = consfield::autoencoder::train(&t0, &data, &teacher_cfg, &data[..20]).unwrap();
    let random = AeParams::init_scaled(d, 8, Activation::Sigmoid, false, 1.0, &mut rng);
    let clean: Vec<Vector> = data[..50].to_vec();
    let corrupted: Vec<Vector> = clean.iter().map(|x| consfield::data::salt_pepper(x, 0.5, &mut rng)).collect();
    let bounds = BoxBounds::cube(d, 0.0, 1.0);
    let student = TrainConfig { epochs: 20, ..TrainConfig::default() };
    let setup = SweepSetup {
        betas: &[1.0, 0.0, 0.5],
        bounds: &bounds,
        samples_per_field: 300,
        hidden: 8,
        activation: Activation::Sigmoid,
        train: &student,
        clean: &clean,
        corrupted: &corrupted,
        seed: 5,
    };
    let a = beta_sweep(&random, &trained, &setup).unwrap();
    let b = beta_sweep(&random, &trained, &setup).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    let betas: Vec<f64> = a.records.iter().map(|r| r.beta).collect();
    assert_eq!(betas, vec![0.0, 0.5, 1.0]);
    assert!(a.records.iter().all(|r| (0.0..=1.0).contains(&r.fraction)));
    assert!(a.records[2].loss < a.records[0].loss);

    let bad = SweepSetup { betas: &[1.5], ..setup.clone() };
    assert!(beta_sweep(&random, &trained, &bad).is_err());
    let untied_field = ae_reconstruction_field(&random);
    assert_eq!(untied_field.dim(), d);
}
