//! Synthetic labeled noisy-speech corpora.
//!
//! Speech is stood in for by bursts of harmonic tones whose fundamental range
//! depends on a two-valued speaker class; noise is filtered white noise.
//! Labels come from an energy threshold on the clean signal and noise is
//! mixed at a target SNR measured over the speech-labeled samples.

mod corpus_io;
mod filter;
mod mixing;
mod oracle;
mod synth;
mod uat;

pub use corpus_io::{
    parse_manifest, read_corpus, read_manifest, render_manifest, write_corpus, ManifestEntry,
    MANIFEST_FILE,
};
pub use mixing::{measure_snr_db, mix_at_snr, mix_with_labels, rms, speech_mask, Mixture};
pub use oracle::{energy_oracle_labels, frame_rms_dbfs, DEFAULT_THRESHOLD_DB};
pub use synth::{synthesize_corpus, synthesize_utterance, CorpusSpec, NoiseKind};
pub use uat::{uat_split, AttributeLevel, AttributeTree, UatNode, HIGH_SNR_DB};

use crate::audio::{LabelTrack, Waveform};

/// Two-valued stand-in for speaker gender.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpeakerClass {
    /// Fundamental 120–180 Hz.
    A,
    /// Fundamental 200–300 Hz.
    B,
}

impl SpeakerClass {
    pub const ALL: [SpeakerClass; 2] = [SpeakerClass::A, SpeakerClass::B];

    pub fn name(self) -> &'static str {
        match self {
            SpeakerClass::A => "A",
            SpeakerClass::B => "B",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "A" => Some(SpeakerClass::A),
            "B" => Some(SpeakerClass::B),
            _ => None,
        }
    }

    /// Range of the fundamental frequency in Hz.
    pub fn f0_range(self) -> (f64, f64) {
        match self {
            SpeakerClass::A => (120.0, 180.0),
            SpeakerClass::B => (200.0, 300.0),
        }
    }
}

/// Utterance-level attributes used for grouping and attribute trees.
/// Fields are optional because corpora read from disk may lack them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Attributes {
    pub speaker_class: Option<SpeakerClass>,
    pub snr_db: Option<f64>,
    pub noise_type: Option<String>,
}

/// Mixing metadata: `noisy = scale · (clean_source + gain · noise)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixInfo {
    pub noise_gain: f64,
    pub output_scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub clean: Waveform,
    pub noisy: Waveform,
    pub labels: LabelTrack,
    pub attributes: Attributes,
    pub mix: Option<MixInfo>,
}
