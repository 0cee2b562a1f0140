//! One-hidden-layer auto-encoder `r(x) = R h(Wᵀx + b) + c`.

mod activation;
mod loss;
mod params;
mod train;

pub use activation::{sigmoid, softplus, Activation};
pub use loss::{loss_and_grad, objective, regression_loss_and_grad, AeGrads};
pub use params::{weight_length_project, AeParams};
pub use train::{
    default_probes, fit, train, EpochRecord, OptimizerKind, TrainConfig, TrainHistory, CURL_GRID_SIZE,
    DEFAULT_PROBE_COUNT,
};

/// Free-function forms of the model's core maps.
pub fn reconstruct(p: &AeParams, x: &[f64]) -> crate::Result<crate::numerics::Vector> {
    p.reconstruct(x)
}

pub fn jacobian(p: &AeParams, x: &[f64]) -> crate::Result<crate::numerics::Matrix> {
    p.jacobian(x)
}

pub fn energy(p: &AeParams, x: &[f64]) -> crate::Result<f64> {
    p.energy(x)
}
