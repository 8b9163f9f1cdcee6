use crate::audio::{FrameGeometry, LabelTrack, VadLabel};

/// Frames whose clean-signal RMS reaches this level (dBFS) count as speech.
pub const DEFAULT_THRESHOLD_DB: f64 = -40.0;

/// `20·log10(rms)` of each frame; `-inf` for digital silence.
pub fn frame_rms_dbfs(signal: &[f32], geometry: &FrameGeometry) -> Vec<f64> {
    (0..geometry.num_frames(signal.len()))
        .map(|f| {
            let frame = &signal[geometry.frame_range(f)];
            let power = frame.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>()
                / frame.len() as f64;
            10.0 * power.log10()
        })
        .collect()
}

/// Energy-threshold labels computed on a noise-free signal, framed exactly
/// as the model frames its input. Signals shorter than a frame give an empty
/// track.
pub fn energy_oracle_labels(clean: &[f32], geometry: FrameGeometry, threshold_db: f64) -> LabelTrack {
    let labels = frame_rms_dbfs(clean, &geometry)
        .into_iter()
        .map(|db| VadLabel::from_speech(db >= threshold_db))
        .collect();
    LabelTrack::new(geometry, labels)
}
