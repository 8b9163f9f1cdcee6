//! PCM audio, frame-label files and the framing arithmetic shared by the
//! model and the labelers.

mod framing;
mod labels;
mod wav;

pub use framing::{num_frames, FrameGeometry};
pub use labels::{parse_labels, read_labels, render_labels, write_labels, LabelTrack, VadLabel};
pub use wav::{read_wav, write_wav, Waveform};
