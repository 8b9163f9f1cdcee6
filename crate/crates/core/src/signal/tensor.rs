use crate::error::{config_err, Result};

use super::Real;

/// A `channels × len` signal stored row-major by channel.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T = f32> {
    channels: usize,
    len: usize,
    data: Vec<T>,
}

impl<T: Real> FeatureMap<T> {
    pub fn zeros(channels: usize, len: usize) -> Self {
        Self {
            channels,
            len,
            data: vec![T::zero(); channels * len],
        }
    }

    pub fn from_vec(channels: usize, len: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 {
            return Err(config_err!("feature map needs at least one channel"));
        }
        if data.len() != channels * len {
            return Err(config_err!(
                "feature map data has {} values, expected {channels}×{len}",
                data.len()
            ));
        }
        Ok(Self { channels, len, data })
    }

    /// Builds a map from equally long rows, one per channel.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let len = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * len);
        for (c, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != len {
                return Err(config_err!(
                    "row {c} has length {}, expected {len}",
                    row.len()
                ));
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(rows.len(), len, data)
    }

    /// Single-channel map holding a waveform.
    pub fn from_signal(samples: &[T]) -> Self {
        Self {
            channels: 1,
            len: samples.len(),
            data: samples.to_vec(),
        }
    }

    /// Stacks maps of equal length along the channel axis, in order.
    pub fn concat_channels(maps: &[FeatureMap<T>]) -> Result<Self> {
        let Some(first) = maps.first() else {
            return Err(config_err!("nothing to concatenate"));
        };
        let len = first.len;
        let mut data = Vec::with_capacity(maps.iter().map(|m| m.data.len()).sum());
        for m in maps {
            if m.len != len {
                return Err(config_err!(
                    "cannot concatenate maps of length {} and {len}",
                    m.len
                ));
            }
            data.extend_from_slice(&m.data);
        }
        Self::from_vec(maps.iter().map(|m| m.channels).sum(), len, data)
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &[T] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.data[c * self.len..(c + 1) * self.len]
    }

    /// Copies out channels `start..start + count`.
    pub fn slice_channels(&self, start: usize, count: usize) -> Result<Self> {
        if count == 0 || start + count > self.channels {
            return Err(config_err!(
                "channels {start}..{} out of range for {} channels",
                start + count,
                self.channels
            ));
        }
        let data = self.data[start * self.len..(start + count) * self.len].to_vec();
        Self::from_vec(count, self.len, data)
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize) -> T {
        self.data[c * self.len + t]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Same shape, values converted to another precision.
    pub fn cast<U: Real>(&self) -> FeatureMap<U> {
        FeatureMap {
            channels: self.channels,
            len: self.len,
            data: self.data.iter().map(|&v| U::of(v.as_f64())).collect(),
        }
    }
}
