//! On-disk corpus layout:
//!
//! ```text
//! <dir>/manifest.txt
//! <dir>/clean/<id>.wav
//! <dir>/noisy/<id>.wav
//! <dir>/labels/<id>.txt
//! ```
//!
//! The manifest has one line per utterance of whitespace-separated
//! `key=value` pairs; `id` is required, unknown keys are ignored and `#`
//! starts a comment line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Attributes, MixInfo, SpeakerClass, Utterance};
use crate::audio::{read_labels, read_wav, write_labels, write_wav};
use crate::error::{format_err, input_err, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// One manifest record.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub attributes: Attributes,
    pub mix: Option<MixInfo>,
}

pub fn render_manifest(utterances: &[Utterance]) -> String {
    let mut out = String::from(
        "# snr_db: clean power over speech-labeled samples vs. noise power over the whole utterance\n\
         # noisy = output_scale * (clean_source + noise_gain * noise); clean/ holds output_scale * clean_source\n",
    );
    for u in utterances {
        let a = &u.attributes;
        write!(out, "id={}", u.id).unwrap();
        if let Some(c) = a.speaker_class {
            write!(out, " speaker_class={}", c.name()).unwrap();
        }
        if let Some(s) = a.snr_db {
            write!(out, " snr_db={s}").unwrap();
        }
        if let Some(n) = &a.noise_type {
            write!(out, " noise_type={n}").unwrap();
        }
        if let Some(m) = u.mix {
            write!(out, " noise_gain={} output_scale={}", m.noise_gain, m.output_scale).unwrap();
        }
        out.push('\n');
    }
    out
}

fn parse_f64(key: &str, v: &str, line: usize) -> Result<f64> {
    v.parse()
        .map_err(|_| format_err!("manifest line {line}: bad {key} value '{v}'"))
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut out: Vec<ManifestEntry> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut id = None;
        let mut attributes = Attributes::default();
        let (mut gain, mut scale) = (None, None);
        for token in line.split_whitespace() {
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| format_err!("manifest line {n}: expected key=value, got '{token}'"))?;
            match k {
                "id" => id = Some(v.to_string()),
                "speaker_class" => {
                    attributes.speaker_class = Some(SpeakerClass::parse(v).ok_or_else(|| {
                        format_err!("manifest line {n}: unknown speaker class '{v}'")
                    })?)
                }
                "snr_db" => attributes.snr_db = Some(parse_f64(k, v, n)?),
                "noise_type" => attributes.noise_type = Some(v.to_string()),
                "noise_gain" => gain = Some(parse_f64(k, v, n)?),
                "output_scale" => scale = Some(parse_f64(k, v, n)?),
                _ => {}
            }
        }
        let id = id.ok_or_else(|| format_err!("manifest line {n}: missing id"))?;
        if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
            return Err(format_err!("manifest line {n}: invalid id '{id}'"));
        }
        if out.iter().any(|e| e.id == id) {
            return Err(format_err!("manifest line {n}: duplicate id '{id}'"));
        }
        let mix = match (gain, scale) {
            (Some(noise_gain), Some(output_scale)) => Some(MixInfo {
                noise_gain,
                output_scale,
            }),
            _ => None,
        };
        out.push(ManifestEntry { id, attributes, mix });
    }
    Ok(out)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    parse_manifest(&fs::read_to_string(path)?)
        .map_err(|e| format_err!("{}: {e}", path.display()))
}

pub fn write_corpus(dir: impl AsRef<Path>, utterances: &[Utterance]) -> Result<()> {
    let dir = dir.as_ref();
    for sub in ["clean", "noisy", "labels"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    for u in utterances {
        write_wav(dir.join("clean").join(format!("{}.wav", u.id)), &u.clean)?;
        write_wav(dir.join("noisy").join(format!("{}.wav", u.id)), &u.noisy)?;
        write_labels(dir.join("labels").join(format!("{}.txt", u.id)), &u.labels)?;
    }
    fs::write(dir.join(MANIFEST_FILE), render_manifest(utterances))?;
    Ok(())
}

/// Loads every utterance listed in the manifest, checking that waveforms and
/// label tracks agree in rate and length.
pub fn read_corpus(dir: impl AsRef<Path>) -> Result<Vec<Utterance>> {
    let dir = dir.as_ref();
    let entries = read_manifest(dir.join(MANIFEST_FILE))?;
    if entries.is_empty() {
        return Err(input_err!("corpus {} lists no utterances", dir.display()));
    }
    entries
        .into_iter()
        .map(|e| {
            let clean = read_wav(dir.join("clean").join(format!("{}.wav", e.id)))?;
            let noisy = read_wav(dir.join("noisy").join(format!("{}.wav", e.id)))?;
            let labels = read_labels(dir.join("labels").join(format!("{}.txt", e.id)))?;
            if clean.len() != noisy.len() || clean.sample_rate() != noisy.sample_rate() {
                return Err(format_err!("utterance {}: clean and noisy audio differ in length or rate", e.id));
            }
            if labels.geometry.sample_rate != noisy.sample_rate() {
                return Err(format_err!(
                    "utterance {}: labels are for {} Hz, audio is {} Hz",
                    e.id,
                    labels.geometry.sample_rate,
                    noisy.sample_rate()
                ));
            }
            let expected = labels.geometry.num_frames(noisy.len());
            if labels.len() != expected {
                return Err(format_err!(
                    "utterance {}: {} labels for {} frames",
                    e.id,
                    labels.len(),
                    expected
                ));
            }
            Ok(Utterance {
                id: e.id,
                clean,
                noisy,
                labels,
                attributes: e.attributes,
                mix: e.mix,
            })
        })
        .collect()
}
