//! Loss, the WVAD training loop and two-stage WEVAD training.
//!
//! All training is mini-batch Adam on per-channel binary cross-entropy.
//! Shuffling and initialization derive from the configured seed only, so a
//! rerun with the same seed and data reproduces every parameter bit for bit.

mod config;
mod fit;
mod loss;
mod wevad;

pub use config::{TrainConfig, TrainSettings};
pub use fit::{
    attempt_seed, init_wvad, train_wvad, train_wvad_with, EpochStats, Observer, TrainReport,
    COLLAPSE_FRACTION, SATURATION_MARGIN,
};
pub use loss::{bce_loss, bce_with_grad};
pub use wevad::{
    encoder_rms, node_seed, train_stage1, train_stage2, train_wevad, train_wevad_with, NodeModel, Progress,
    WevadReport,
};
