//! The detector networks.
//!
//! A [`WvadModel`] maps a waveform to per-frame scores in three stages:
//! an encoder of four stride-1 convolution blocks producing two channels at
//! the sample rate, a framing block (one strided convolution with the label
//! frame as kernel and the label hop as stride), and three sigmoid decoder
//! blocks with shrinking kernels that refine the frame-rate scores.
//! An [`EnsembleModel`] replaces the single encoder with several frozen ones
//! whose outputs are concatenated along the channel axis.
//!
//! Score channel 0 is non-speech and channel 1 is speech throughout.

mod config;
mod io;
mod network;

pub use config::{WvadConfig, DECODER_BLOCKS, ENCODER_BLOCKS};
pub use io::{
    deserialize, load_model, save_model, serialize, serialize_ensemble, serialize_wvad,
    FORMAT_VERSION, MAGIC,
};
pub use network::{
    predict_labels, DecoderTrace, Detector, EncoderStack, EnsembleModel, FrameScores, Head,
    ScorePair, WvadModel, NON_SPEECH, SPEECH,
};
