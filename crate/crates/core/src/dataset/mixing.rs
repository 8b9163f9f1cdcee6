use crate::audio::{FrameGeometry, LabelTrack, Waveform};
use crate::error::{input_err, Result};

use super::oracle::{energy_oracle_labels, DEFAULT_THRESHOLD_DB};

pub fn rms(x: &[f32]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Per-sample mask: true for samples inside at least one speech frame.
pub fn speech_mask(len: usize, labels: &LabelTrack) -> Vec<bool> {
    let mut mask = vec![false; len];
    for (f, l) in labels.labels.iter().enumerate() {
        if l.is_speech() {
            let r = labels.geometry.frame_range(f);
            let end = r.end.min(len);
            mask[r.start.min(end)..end].iter_mut().for_each(|m| *m = true);
        }
    }
    mask
}

fn masked_rms(x: &[f32], mask: &[bool]) -> f64 {
    let (mut sum, mut n) = (0.0f64, 0usize);
    for (&v, &m) in x.iter().zip(mask) {
        if m {
            sum += (v as f64) * (v as f64);
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// SNR of a mixture: clean power over the speech-labeled samples against the
/// power of `noisy − clean` over the whole signal.
pub fn measure_snr_db(clean: &[f32], noisy: &[f32], labels: &LabelTrack) -> f64 {
    let mask = speech_mask(clean.len(), labels);
    let residual: Vec<f32> = noisy.iter().zip(clean).map(|(n, c)| n - c).collect();
    20.0 * (masked_rms(clean, &mask) / rms(&residual)).log10()
}

/// Result of mixing noise into a clean signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    /// `output_scale · (clean + noise_gain · noise)`
    pub noisy: Waveform,
    /// `output_scale · clean`, so that `noisy − clean` is exactly the scaled noise.
    pub clean: Waveform,
    pub noise_gain: f64,
    /// Shared peak normalization, `≤ 1`.
    pub output_scale: f64,
}

/// Mixes `noise` into `clean` at `snr_db`. The speech region used for the
/// signal power is given by `labels`; the noise power is taken over the
/// first `clean.len()` samples of `noise`.
pub fn mix_with_labels(clean: &Waveform, noise: &[f32], snr_db: f64, labels: &LabelTrack) -> Result<Mixture> {
    let n = clean.len();
    if noise.len() < n {
        return Err(input_err!(
            "noise has {} samples, clean signal needs {n}",
            noise.len()
        ));
    }
    if !snr_db.is_finite() {
        return Err(input_err!("SNR must be finite, got {snr_db}"));
    }
    let noise = &noise[..n];
    let speech_rms = masked_rms(clean.samples(), &speech_mask(n, labels));
    if speech_rms == 0.0 {
        return Err(input_err!("clean signal has no energy in its speech region"));
    }
    let noise_rms = rms(noise);
    if noise_rms == 0.0 {
        return Err(input_err!("noise signal has zero energy"));
    }
    let gain = speech_rms / (noise_rms * 10f64.powf(snr_db / 20.0));

    let mixed: Vec<f64> = clean
        .samples()
        .iter()
        .zip(noise)
        .map(|(&c, &v)| c as f64 + gain * v as f64)
        .collect();
    let peak = mixed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 1.0 { 1.0 / peak } else { 1.0 };

    let noisy = mixed.iter().map(|&v| ((v * scale) as f32).clamp(-1.0, 1.0)).collect();
    let clean_scaled = clean
        .samples()
        .iter()
        .map(|&c| ((c as f64 * scale) as f32).clamp(-1.0, 1.0))
        .collect();
    Ok(Mixture {
        noisy: Waveform::new(noisy, clean.sample_rate())?,
        clean: Waveform::new(clean_scaled, clean.sample_rate())?,
        noise_gain: gain,
        output_scale: scale,
    })
}

/// [`mix_with_labels`] with the speech region found by the default energy
/// oracle (20 ms frames, 10 ms hop, −40 dBFS).
pub fn mix_at_snr(clean: &Waveform, noise: &[f32], snr_db: f64) -> Result<Mixture> {
    let geometry = FrameGeometry::standard(clean.sample_rate())?;
    let labels = energy_oracle_labels(clean.samples(), geometry, DEFAULT_THRESHOLD_DB);
    mix_with_labels(clean, noise, snr_db, &labels)
}
