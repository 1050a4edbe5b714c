//! Losses, the Adam optimizer, the training loop and checkpoint files.
//!
//! The objective is the mean absolute error between predicted and
//! annotated scores, plus (optionally) `lambda` times the mean absolute
//! error between the attention map's mean and the perceptual distance of
//! the two input frames.

mod adam;
mod checkpoint;
mod config_file;
mod loss;
mod train;

pub use adam::{Adam, BETA1, BETA2, EPSILON};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TrainingMeta};
pub use config_file::TrainFile;
pub use loss::{auxiliary_loss, difficulty_loss, perceptual_proxy, LossBreakdown};
pub use train::{
    build_loss, predict_samples, prepare_samples, resume, train, train_samples, LossVars, Sample,
    TrainHyper, HISTORY_CAP,
};
