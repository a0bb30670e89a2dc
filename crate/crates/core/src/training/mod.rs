//! Mini-batch training with per-epoch observation/query re-splits.

mod optim;
mod trainer;

pub use optim::{global_norm, Optimizer, OptimizerConfig, OptimizerKind};
pub use trainer::{
    batch_gradients, epoch_observation_graph, fit, fit_with, train_epoch, EpochRecord, EpochStats,
    FitResult, TrainConfig, TrainItem, TrainReport,
};

use crate::error::{Error, Result};

/// Summed binary cross-entropy of sigmoid(`logits`) against a one-hot
/// target at `answer`.
pub fn bce_loss(logits: &[f64], answer: usize) -> Result<f64> {
    if answer >= logits.len() {
        return Err(Error::InvalidInput(format!(
            "answer {answer} outside {} logits",
            logits.len()
        )));
    }
    Ok(crate::autograd::bce_with_logits(logits, answer))
}

/// Gradient of [`bce_loss`] with respect to the logits.
pub fn bce_grad(logits: &[f64], answer: usize) -> Vec<f64> {
    logits
        .iter()
        .enumerate()
        .map(|(i, &z)| crate::autograd::sigmoid(z) - f64::from(u8::from(i == answer)))
        .collect()
}
