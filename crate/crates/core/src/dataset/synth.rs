use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::filter::Biquad;
use super::mixing::mix_with_labels;
use super::oracle::energy_oracle_labels;
use super::{Attributes, MixInfo, SpeakerClass, Utterance};
use crate::audio::{FrameGeometry, Waveform};
use crate::error::{config_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// White noise through a low-pass filter with a random 300–1000 Hz cutoff.
    Lowpass,
    /// White noise through a band-pass filter centred at 800–2500 Hz.
    Bandpass,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Lowpass => "lowpass",
            NoiseKind::Bandpass => "bandpass",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lowpass" => Some(NoiseKind::Lowpass),
            "bandpass" => Some(NoiseKind::Bandpass),
            _ => None,
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What to generate. Attributes are assigned round-robin so every
/// combination of speaker class, SNR and noise type is equally represented:
/// utterance `i` gets class `i % 2`, SNR `grid[(i / 2) % len]` and noise type
/// `types[(i / (2 · len)) % n]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub utterances: usize,
    pub duration_secs: f64,
    pub sample_rate: u32,
    pub snr_grid_db: Vec<f64>,
    pub noise_types: Vec<NoiseKind>,
    /// Fraction of each utterance covered by tone bursts.
    pub duty_cycle: f64,
    /// Mean RMS level of a burst; each burst varies by up to ±3 dB.
    pub speech_level_dbfs: f64,
    pub label_threshold_db: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            utterances: 200,
            duration_secs: 2.0,
            sample_rate: 8000,
            snr_grid_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
            noise_types: vec![NoiseKind::Lowpass, NoiseKind::Bandpass],
            duty_cycle: 0.5,
            speech_level_dbfs: -24.0,
            label_threshold_db: super::DEFAULT_THRESHOLD_DB,
        }
    }
}

/// Shortest burst or gap in seconds.
const MIN_SEGMENT_SECS: f64 = 0.1;
const RAMP_SECS: f64 = 0.015;

impl CorpusSpec {
    pub fn geometry(&self) -> Result<FrameGeometry> {
        FrameGeometry::standard(self.sample_rate)
    }

    pub fn samples_per_utterance(&self) -> usize {
        (self.duration_secs * self.sample_rate as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        if self.utterances == 0 {
            return Err(config_err!("corpus must contain at least one utterance"));
        }
        if !(self.duration_secs.is_finite() && self.duration_secs >= 4.0 * MIN_SEGMENT_SECS) {
            return Err(config_err!(
                "utterance duration {} s is shorter than {} s",
                self.duration_secs,
                4.0 * MIN_SEGMENT_SECS
            ));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(config_err!("SNR grid must be a non-empty list of finite values"));
        }
        if self.noise_types.is_empty() {
            return Err(config_err!("at least one noise type is required"));
        }
        if !(0.1..=0.9).contains(&self.duty_cycle) {
            return Err(config_err!("duty cycle {} outside [0.1, 0.9]", self.duty_cycle));
        }
        if !(-60.0..=-6.0).contains(&self.speech_level_dbfs) {
            return Err(config_err!(
                "speech level {} dBFS outside [-60, -6]",
                self.speech_level_dbfs
            ));
        }
        if self.speech_level_dbfs - 12.0 < self.label_threshold_db {
            return Err(config_err!(
                "speech level {} dBFS leaves no headroom above the label threshold {} dBFS",
                self.speech_level_dbfs,
                self.label_threshold_db
            ));
        }
        Ok(())
    }

    /// Attributes of utterance `index`.
    pub fn attributes(&self, index: usize) -> (SpeakerClass, f64, NoiseKind) {
        let classes = SpeakerClass::ALL.len();
        let grid = self.snr_grid_db.len();
        (
            SpeakerClass::ALL[index % classes],
            self.snr_grid_db[(index / classes) % grid],
            self.noise_types[(index / (classes * grid)) % self.noise_types.len()],
        )
    }
}

/// Randomness for utterance `index`: its own ChaCha stream under `seed`, so
/// utterances can be generated in any order.
fn utterance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Splits `total` into `parts` positive pieces of at least `min` each, with
/// random proportions.
fn random_partition(rng: &mut impl Rng, total: usize, parts: usize, min: usize) -> Vec<usize> {
    let spare = total - parts * min;
    let weights: Vec<f64> = (0..parts).map(|_| rng.random_range(0.5..1.5)).collect();
    let sum: f64 = weights.iter().sum();
    let mut out: Vec<usize> = weights
        .iter()
        .map(|w| min + (spare as f64 * w / sum).floor() as usize)
        .collect();
    let assigned: usize = out.iter().sum();
    out[parts - 1] += total - assigned;
    out
}

/// One harmonic tone burst of `len` samples at `rms` level.
fn tone_burst(rng: &mut impl Rng, len: usize, rate: f64, class: SpeakerClass, rms: f64) -> Vec<f64> {
    let (lo, hi) = class.f0_range();
    let f0 = rng.random_range(lo..hi);
    let drift_rate = rng.random_range(1.0..3.0);
    let drift_phase = rng.random_range(0.0..2.0 * PI);
    let syllable_rate = rng.random_range(3.0..5.0);
    let ceiling = (0.45 * rate).min(3400.0);
    let harmonics = ((ceiling / (f0 * 1.15)).floor() as usize).max(1);
    let amps: Vec<f64> = (1..=harmonics)
        .map(|h| rng.random_range(0.7..1.3) / h as f64)
        .collect();
    let phases: Vec<f64> = (0..harmonics).map(|_| rng.random_range(0.0..2.0 * PI)).collect();

    let ramp = ((RAMP_SECS * rate) as usize).min(len / 2);
    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(len);
    for n in 0..len {
        let t = n as f64 / rate;
        let f = f0 * (1.0 + 0.15 * (2.0 * PI * drift_rate * t + drift_phase).sin());
        phase += 2.0 * PI * f / rate;
        let tone: f64 = amps
            .iter()
            .zip(&phases)
            .enumerate()
            .map(|(h, (a, p))| a * ((h + 1) as f64 * phase + p).sin())
            .sum();
        let syllable = 0.7 + 0.3 * (2.0 * PI * syllable_rate * t).sin();
        let edge = n.min(len - 1 - n);
        let taper = if edge < ramp {
            0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
        } else {
            1.0
        };
        out.push(tone * syllable * taper);
    }
    let current = (out.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    let gain = if current > 0.0 { rms / current } else { 0.0 };
    out.iter_mut().for_each(|v| *v *= gain);
    out
}

/// Filtered white noise of `len` samples. The filters run for a short
/// warm-up first so the output starts in steady state.
fn noise(rng: &mut impl Rng, kind: NoiseKind, len: usize, rate: f64) -> Vec<f32> {
    let mut filters = match kind {
        NoiseKind::Lowpass => {
            let cutoff = rng.random_range(300.0..1000.0);
            vec![Biquad::lowpass(rate, cutoff, 0.707), Biquad::lowpass(rate, cutoff, 0.707)]
        }
        NoiseKind::Bandpass => {
            let center = rng.random_range(800.0f64..2500.0).min(0.4 * rate);
            vec![Biquad::bandpass(rate, center, 1.5), Biquad::bandpass(rate, center, 1.5)]
        }
    };
    let warmup = 256;
    let mut out = Vec::with_capacity(len);
    for n in 0..warmup + len {
        let mut v: f64 = StandardNormal.sample(rng);
        for f in &mut filters {
            v = f.process(v);
        }
        if n >= warmup {
            out.push(v as f32);
        }
    }
    out
}

/// Clean signal of utterance `index`: alternating silences and tone bursts
/// whose total length is `duty_cycle` of the utterance.
fn clean_signal(spec: &CorpusSpec, rng: &mut impl Rng, class: SpeakerClass) -> Vec<f32> {
    let n = spec.samples_per_utterance();
    let rate = spec.sample_rate as f64;
    let min_seg = (MIN_SEGMENT_SECS * rate) as usize;
    let speech_total = (spec.duty_cycle * n as f64).round() as usize;
    let silence_total = n - speech_total;

    // About one burst per 0.4 s, but keep every burst and gap above the minimum.
    let bursts = ((n as f64 / rate / 0.8).round() as usize)
        .clamp(1, (speech_total / min_seg).max(1))
        .min((silence_total / min_seg).saturating_sub(1).max(1));
    let burst_lens = random_partition(rng, speech_total, bursts, min_seg.min(speech_total / bursts));
    let gap_min = min_seg.min(silence_total / (bursts + 1));
    let gap_lens = random_partition(rng, silence_total, bursts + 1, gap_min);

    let mut out = Vec::with_capacity(n);
    for (i, &gap) in gap_lens.iter().enumerate() {
        out.extend(std::iter::repeat_n(0.0f32, gap));
        if let Some(&len) = burst_lens.get(i) {
            let level = spec.speech_level_dbfs + rng.random_range(-3.0..3.0);
            let burst = tone_burst(rng, len, rate, class, 10f64.powf(level / 20.0));
            out.extend(burst.iter().map(|&v| v as f32));
        }
    }
    debug_assert_eq!(out.len(), n);
    out
}

/// Generates utterance `index` of the corpus described by `spec`.
pub fn synthesize_utterance(spec: &CorpusSpec, seed: u64, index: usize) -> Result<Utterance> {
    spec.validate()?;
    let geometry = spec.geometry()?;
    let (class, snr_db, kind) = spec.attributes(index);
    let mut rng = utterance_rng(seed, index);

    let clean = Waveform::new(clean_signal(spec, &mut rng, class), spec.sample_rate)?;
    let noise = noise(&mut rng, kind, clean.len(), spec.sample_rate as f64);
    let labels = energy_oracle_labels(clean.samples(), geometry, spec.label_threshold_db);
    let mixture = mix_with_labels(&clean, &noise, snr_db, &labels)?;

    Ok(Utterance {
        id: format!("{index:03}"),
        clean: mixture.clean,
        noisy: mixture.noisy,
        labels,
        attributes: Attributes {
            speaker_class: Some(class),
            snr_db: Some(snr_db),
            noise_type: Some(kind.name().to_string()),
        },
        mix: Some(MixInfo {
            noise_gain: mixture.noise_gain,
            output_scale: mixture.output_scale,
        }),
    })
}

/// Generates the whole corpus. Deterministic in `seed`; each utterance only
/// depends on `(seed, index)`.
pub fn synthesize_corpus(spec: &CorpusSpec, seed: u64) -> Result<Vec<Utterance>> {
    spec.validate()?;
    (0..spec.utterances)
        .map(|i| synthesize_utterance(spec, seed, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::measure_snr_db;
    use crate::error::Error;

    fn small() -> CorpusSpec {
        CorpusSpec {
            utterances: 10,
            ..CorpusSpec::default()
        }
    }

    #[test]
    fn counts_and_label_lengths() {
        let spec = small();
        let corpus = synthesize_corpus(&spec, 7).unwrap();
        assert_eq!(corpus.len(), 10);
        for u in &corpus {
            assert_eq!(u.clean.len(), 16_000);
            assert_eq!(u.noisy.len(), u.clean.len());
            assert_eq!(u.labels.len(), crate::audio::num_frames(16_000, 160, 80));
            assert_eq!(u.labels.len(), 199);
        }
        assert_eq!(corpus[3].id, "003");
    }

    #[test]
    fn deterministic() {
        let spec = small();
        assert_eq!(synthesize_corpus(&spec, 3).unwrap(), synthesize_corpus(&spec, 3).unwrap());
        assert_ne!(
            synthesize_corpus(&spec, 3).unwrap()[0].noisy,
            synthesize_corpus(&spec, 4).unwrap()[0].noisy
        );
        // An utterance does not depend on which others were generated.
        assert_eq!(synthesize_utterance(&spec, 3, 5).unwrap(), synthesize_corpus(&spec, 3).unwrap()[5]);
    }

    #[test]
    fn measured_snr_matches_attribute() {
        let spec = CorpusSpec {
            utterances: 28,
            ..CorpusSpec::default()
        };
        for u in synthesize_corpus(&spec, 11).unwrap() {
            let target = u.attributes.snr_db.unwrap();
            let measured = measure_snr_db(u.clean.samples(), u.noisy.samples(), &u.labels);
            assert!((measured - target).abs() < 0.01, "{}: {measured} vs {target}", u.id);
        }
    }

    #[test]
    fn speech_fraction_tracks_duty_cycle() {
        for duty in [0.3, 0.5, 0.7] {
            let spec = CorpusSpec {
                utterances: 8,
                duty_cycle: duty,
                ..CorpusSpec::default()
            };
            for u in synthesize_corpus(&spec, 5).unwrap() {
                let frac = u.labels.speech_count() as f64 / u.labels.len() as f64;
                assert!((frac - duty).abs() <= 0.1 * duty, "duty {duty}: {frac}");
            }
        }
    }

    #[test]
    fn attributes_are_balanced() {
        let spec = CorpusSpec {
            utterances: 28,
            ..CorpusSpec::default()
        };
        let corpus = synthesize_corpus(&spec, 1).unwrap();
        let count = |c: SpeakerClass, n: &str| {
            corpus
                .iter()
                .filter(|u| {
                    u.attributes.speaker_class == Some(c)
                        && u.attributes.noise_type.as_deref() == Some(n)
                })
                .count()
        };
        for c in SpeakerClass::ALL {
            assert_eq!(count(c, "lowpass"), 7);
            assert_eq!(count(c, "bandpass"), 7);
        }
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            CorpusSpec { utterances: 0, ..small() },
            CorpusSpec { sample_rate: 8050, ..small() },
            CorpusSpec { snr_grid_db: vec![], ..small() },
            CorpusSpec { noise_types: vec![], ..small() },
            CorpusSpec { duty_cycle: 0.95, ..small() },
            CorpusSpec { duration_secs: 0.1, ..small() },
        ];
        for s in bad {
            assert!(matches!(synthesize_corpus(&s, 0), Err(Error::Config(_))), "{s:?}");
        }
    }

    #[test]
    fn parses_from_toml() {
        let spec: CorpusSpec = toml::from_str(
            "utterances = 4\nsnr_grid_db = [0.0, 10.0]\nnoise_types = [\"bandpass\"]\n",
        )
        .unwrap();
        assert_eq!(spec.utterances, 4);
        assert_eq!(spec.noise_types, vec![NoiseKind::Bandpass]);
        assert_eq!(spec.sample_rate, 8000);
        assert!(toml::from_str::<CorpusSpec>("bogus = 1").is_err());
    }
}
