use std::fmt;

use crate::error::{config_err, Result};

/// Number of whole frames of `frame_len` samples, advanced by `hop`, that fit
/// in `length` samples. Trailing samples that do not fill a frame are dropped.
pub fn num_frames(length: usize, frame_len: usize, hop: usize) -> usize {
    if length < frame_len || hop == 0 {
        0
    } else {
        (length - frame_len) / hop + 1
    }
}

/// Frame length, hop and sample rate of a labeling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FrameGeometry {
    pub sample_rate: u32,
    pub frame_len: usize,
    pub hop: usize,
}

impl FrameGeometry {
    pub fn new(sample_rate: u32, frame_len: usize, hop: usize) -> Result<Self> {
        if sample_rate == 0 || frame_len == 0 || hop == 0 {
            return Err(config_err!(
                "frame geometry must be positive (rate {sample_rate}, frame {frame_len}, hop {hop})"
            ));
        }
        Ok(Self {
            sample_rate,
            frame_len,
            hop,
        })
    }

    /// 20 ms frames with 50% overlap, i.e. a 100 Hz frame rate.
    pub fn standard(sample_rate: u32) -> Result<Self> {
        if sample_rate % 100 != 0 {
            return Err(config_err!(
                "sample rate {sample_rate} Hz is not a multiple of the 100 Hz frame rate"
            ));
        }
        Self::new(sample_rate, sample_rate as usize / 50, sample_rate as usize / 100)
    }

    pub fn num_frames(&self, length: usize) -> usize {
        num_frames(length, self.frame_len, self.hop)
    }

    /// Sample range covered by frame `index`.
    pub fn frame_range(&self, index: usize) -> std::ops::Range<usize> {
        let start = index * self.hop;
        start..start + self.frame_len
    }
}

impl fmt::Display for FrameGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "#frame={} hop={} rate={}",
            self.frame_len, self.hop, self.sample_rate
        )
    }
}
