use std::path::Path;

use super::FrameGeometry;
use crate::error::{format_err, Result};

/// Per-frame ground truth. One-hot encoded as `[1, 0]` for non-speech and
/// `[0, 1]` for speech; channel 0 is always non-speech.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VadLabel {
    NonSpeech,
    Speech,
}

impl VadLabel {
    pub fn one_hot(self) -> [f32; 2] {
        match self {
            VadLabel::NonSpeech => [1.0, 0.0],
            VadLabel::Speech => [0.0, 1.0],
        }
    }

    pub fn is_speech(self) -> bool {
        self == VadLabel::Speech
    }

    pub fn from_speech(speech: bool) -> Self {
        if speech {
            VadLabel::Speech
        } else {
            VadLabel::NonSpeech
        }
    }
}

/// A label sequence together with the framing it was produced with.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelTrack {
    pub geometry: FrameGeometry,
    pub labels: Vec<VadLabel>,
}

impl LabelTrack {
    pub fn new(geometry: FrameGeometry, labels: Vec<VadLabel>) -> Self {
        Self { geometry, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn speech_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_speech()).count()
    }

    /// Errors unless the track was produced with `expected` framing.
    pub fn ensure_geometry(&self, expected: &FrameGeometry) -> Result<()> {
        if self.geometry != *expected {
            return Err(format_err!(
                "label header `{}` does not match expected `{expected}`",
                self.geometry
            ));
        }
        Ok(())
    }
}

/// Text form: a `#frame=<n> hop=<m> rate=<r>` header, then one `0`
/// (non-speech) or `1` (speech) per line.
pub fn render_labels(track: &LabelTrack) -> String {
    let mut out = format!("{}\n", track.geometry);
    for l in &track.labels {
        out.push(if l.is_speech() { '1' } else { '0' });
        out.push('\n');
    }
    out
}

fn parse_header(line: &str) -> Result<FrameGeometry> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| format_err!("label file must start with a `#frame=.. hop=.. rate=..` header"))?;
    let (mut frame, mut hop, mut rate) = (None, None, None);
    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format_err!("malformed header field `{field}`"))?;
        let parsed: usize = value
            .parse()
            .map_err(|_| format_err!("header field `{field}` is not a positive integer"))?;
        let slot = match key {
            "frame" => &mut frame,
            "hop" => &mut hop,
            "rate" => &mut rate,
            _ => return Err(format_err!("unknown header field `{key}`")),
        };
        if slot.replace(parsed).is_some() {
            return Err(format_err!("duplicate header field `{key}`"));
        }
    }
    match (frame, hop, rate) {
        (Some(f), Some(h), Some(r)) => {
            let rate = u32::try_from(r).map_err(|_| format_err!("rate {r} out of range"))?;
            FrameGeometry::new(rate, f, h).map_err(|e| format_err!("{e}"))
        }
        _ => Err(format_err!("header `{line}` must define frame, hop and rate")),
    }
}

pub fn parse_labels(text: &str) -> Result<LabelTrack> {
    let mut lines = text.lines().enumerate();
    let geometry = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break parse_header(l.trim())?,
            None => return Err(format_err!("label file is empty")),
        }
    };
    let mut labels = Vec::new();
    for (n, line) in lines {
        match line.trim() {
            "" => {}
            "0" => labels.push(VadLabel::NonSpeech),
            "1" => labels.push(VadLabel::Speech),
            other => {
                return Err(format_err!(
                    "line {}: expected `0` or `1`, found `{other}`",
                    n + 1
                ))
            }
        }
    }
    Ok(LabelTrack { geometry, labels })
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelTrack> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_labels(&text).map_err(|e| format_err!("{}: {e}", path.display()))
}

pub fn write_labels(path: impl AsRef<Path>, track: &LabelTrack) -> Result<()> {
    std::fs::write(path, render_labels(track))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;

    const HEADER: &str = "#frame=160 hop=80 rate=8000\n";

    #[test]
    fn body_tokens() {
        let t = parse_labels(&format!("{HEADER}0\n1\n1")).unwrap();
        let hot: Vec<_> = t.labels.iter().map(|l| l.one_hot()).collect();
        assert_eq!(hot, vec![[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]);
        assert_eq!(t.geometry, FrameGeometry::new(8000, 160, 80).unwrap());
    }

    #[test]
    fn empty_body() {
        assert!(parse_labels(HEADER).unwrap().is_empty());
    }

    #[test]
    fn bad_tokens_and_headers() {
        assert!(matches!(parse_labels(&format!("{HEADER}0\n2\n")), Err(Error::Format(_))));
        assert!(matches!(parse_labels(&format!("{HEADER}speech\n")), Err(Error::Format(_))));
        assert!(parse_labels("0\n1\n").is_err());
        assert!(parse_labels("#frame=160 hop=80\n0\n").is_err());
        assert!(parse_labels("#frame=160 hop=x rate=8000\n").is_err());
        assert!(parse_labels("").is_err());
    }

    #[test]
    fn geometry_mismatch() {
        let t = parse_labels(&format!("{HEADER}1\n")).unwrap();
        let other = FrameGeometry::new(16000, 320, 160).unwrap();
        assert!(matches!(t.ensure_geometry(&other), Err(Error::Format(_))));
        assert!(t.ensure_geometry(&t.geometry.clone()).is_ok());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.txt");
        let t = parse_labels(&format!("{HEADER}0\n1\n1\n0\n")).unwrap();
        write_labels(&p, &t).unwrap();
        assert_eq!(read_labels(&p).unwrap(), t);
    }

    proptest! {
        #[test]
        fn render_parse_identity(bits in proptest::collection::vec(any::<bool>(), 0..300)) {
            let g = FrameGeometry::new(16000, 320, 160).unwrap();
            let t = LabelTrack::new(g, bits.into_iter().map(VadLabel::from_speech).collect());
            prop_assert_eq!(parse_labels(&render_labels(&t)).unwrap(), t);
        }
    }
}
