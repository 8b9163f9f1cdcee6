use serde::{Deserialize, Serialize};

use crate::audio::FrameGeometry;
use crate::error::{config_err, Result};

/// Geometry of a detector. The framing block always uses `frame_len` as its
/// kernel and `hop` as its stride, so one output frame lines up with one label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WvadConfig {
    pub sample_rate: u32,
    pub frame_len: usize,
    pub hop: usize,
    /// Output channels of the four encoder blocks; non-increasing, ending in 2.
    pub encoder_channels: Vec<usize>,
    /// Odd, so that same-length padding is symmetric.
    pub encoder_kernel: usize,
    /// Kernel sizes of the three decoder blocks; odd and strictly decreasing.
    pub decoder_kernels: Vec<usize>,
    pub leaky_slope: f32,
}

pub const ENCODER_BLOCKS: usize = 4;
pub const DECODER_BLOCKS: usize = 3;

impl WvadConfig {
    /// 8 kHz: 160-sample frames, 80-sample hop.
    pub fn narrowband() -> Self {
        Self {
            sample_rate: 8000,
            frame_len: 160,
            hop: 80,
            encoder_channels: vec![16, 8, 4, 2],
            encoder_kernel: 55,
            decoder_kernels: vec![55, 15, 5],
            leaky_slope: 0.01,
        }
    }

    /// 16 kHz: frames, hop and encoder kernel scaled with the sample rate.
    pub fn wideband() -> Self {
        Self::for_sample_rate(16_000).expect("16 kHz is a valid rate")
    }

    /// Preset for any rate that is a multiple of 100 Hz: 20 ms frames, 10 ms
    /// hop, encoder kernel spanning the same duration as 55 taps at 8 kHz.
    pub fn for_sample_rate(sample_rate: u32) -> Result<Self> {
        let g = FrameGeometry::standard(sample_rate)?;
        let span = (55.0 * sample_rate as f64 / 8000.0).round() as usize;
        let encoder_kernel = (span | 1).max(1);
        Ok(Self {
            sample_rate,
            frame_len: g.frame_len,
            hop: g.hop,
            encoder_kernel,
            ..Self::narrowband()
        })
    }

    pub fn geometry(&self) -> FrameGeometry {
        FrameGeometry {
            sample_rate: self.sample_rate,
            frame_len: self.frame_len,
            hop: self.hop,
        }
    }

    pub fn validate(&self) -> Result<()> {
        FrameGeometry::new(self.sample_rate, self.frame_len, self.hop)?;
        if self.frame_len % 2 != 0 || self.hop != self.frame_len / 2 {
            return Err(config_err!(
                "hop {} must be half of the frame length {}",
                self.hop,
                self.frame_len
            ));
        }
        let ch = &self.encoder_channels;
        if ch.len() != ENCODER_BLOCKS {
            return Err(config_err!(
                "encoder needs {ENCODER_BLOCKS} channel counts, got {}",
                ch.len()
            ));
        }
        if ch.contains(&0) || ch.windows(2).any(|w| w[1] > w[0]) || ch.last() != Some(&2) {
            return Err(config_err!(
                "encoder channels {ch:?} must be positive, non-increasing and end in 2"
            ));
        }
        if self.encoder_kernel % 2 == 0 {
            return Err(config_err!(
                "encoder kernel {} must be odd for same-length padding",
                self.encoder_kernel
            ));
        }
        let dk = &self.decoder_kernels;
        if dk.len() != DECODER_BLOCKS
            || dk.iter().any(|k| k % 2 == 0)
            || dk.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(config_err!(
                "decoder kernels {dk:?} must be {DECODER_BLOCKS} odd, strictly decreasing sizes"
            ));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(config_err!(
                "leaky-ReLU slope {} outside (0, 1)",
                self.leaky_slope
            ));
        }
        Ok(())
    }
}

impl Default for WvadConfig {
    fn default() -> Self {
        Self::narrowband()
    }
}
