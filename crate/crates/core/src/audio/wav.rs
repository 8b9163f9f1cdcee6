use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{format_err, input_err, Error, Result};

/// Mono audio with samples in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(input_err!("waveform has no samples"));
        }
        if sample_rate == 0 {
            return Err(input_err!("sample rate must be positive"));
        }
        if let Some((i, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !s.is_finite() || s.abs() > 1.0)
        {
            return Err(input_err!("sample {i} = {s} is outside [-1, 1]"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }
}

fn map_hound(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => format_err!("{other}"),
    }
}

/// Reads a 16-bit PCM mono WAV file; samples are scaled by `1 / 32768`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let file = BufReader::new(File::open(path)?);
    // Once the file is open, anything hound reports (including short reads)
    // means the content is malformed.
    let reader = WavReader::new(file).map_err(|e| format_err!("{}: {e}", path.display()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(format_err!(
            "{}: {} channels, only mono is supported",
            path.display(),
            spec.channels
        ));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(format_err!(
            "{}: {}-bit {:?} samples, only 16-bit PCM is supported",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        ));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f32 / 32768.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| format_err!("{}: {e}", path.display()))?;
    if samples.is_empty() {
        return Err(format_err!("{}: no audio samples", path.display()));
    }
    Waveform::new(samples, spec.sample_rate)
}

/// Quantizes one sample: clamp to `[-1, 1]`, scale by 32768, round to nearest.
pub(crate) fn quantize(sample: f32) -> i16 {
    (sample.clamp(-1.0, 1.0) * 32768.0)
        .round()
        .clamp(-32768.0, 32767.0) as i16
}

/// Writes 16-bit PCM mono.
pub fn write_wav(path: impl AsRef<Path>, waveform: &Waveform) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: waveform.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(map_hound)?;
    for &s in &waveform.samples {
        writer.write_sample(quantize(s)).map_err(map_hound)?;
    }
    writer.finalize().map_err(map_hound)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(path: &Path, channels: u16, samples: &[i16]) {
        let spec = WavSpec {
            channels,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn scaling() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write_raw(&p, 1, &[0, 16384, -32768]);
        let w = read_wav(&p).unwrap();
        assert_eq!(w.samples(), &[0.0, 0.5, -1.0]);
        assert_eq!(w.sample_rate(), 8000);
    }

    #[test]
    fn stereo_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        write_raw(&p, 2, &[0, 1, 2, 3]);
        assert!(matches!(read_wav(&p), Err(Error::Format(_))));
    }

    #[test]
    fn float_and_garbage_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        w.write_sample(0.25f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p), Err(Error::Format(_))));

        let g = dir.path().join("g.wav");
        std::fs::write(&g, b"RIFF\x04\x00\x00\x00WAVEjunk").unwrap();
        assert!(matches!(read_wav(&g), Err(Error::Format(_))));
        assert!(matches!(read_wav(dir.path().join("missing.wav")), Err(Error::Io(_))));
    }

    #[test]
    fn quantization() {
        assert_eq!(quantize(1.5), 32767);
        assert_eq!(quantize(1.0), 32767);
        assert_eq!(quantize(-1.0), -32768);
        assert_eq!(quantize(0.5), 16384);
        assert_eq!(quantize(-2.0), -32768);
    }

    #[test]
    fn sine_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sine.wav");
        let samples: Vec<f32> = (0..800)
            .map(|i| 0.8 * (2.0 * std::f32::consts::PI * 440.0 * i as f32 / 8000.0).sin())
            .collect();
        let w = Waveform::new(samples.clone(), 8000).unwrap();
        write_wav(&p, &w).unwrap();
        let back = read_wav(&p).unwrap();
        for (a, b) in samples.iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1.0 / 32768.0, "{a} vs {b}");
        }
        // A second pass is exact.
        write_wav(&p, &back).unwrap();
        assert_eq!(read_wav(&p).unwrap(), back);
    }

    #[test]
    fn invariants() {
        assert!(Waveform::new(vec![], 8000).is_err());
        assert!(Waveform::new(vec![1.5], 8000).is_err());
        assert!(Waveform::new(vec![f32::NAN], 8000).is_err());
        assert!(Waveform::new(vec![0.1], 0).is_err());
    }
}
