//! Binary model files.
//!
//! Layout (all integers `u32` little-endian, reals `f32` little-endian):
//!
//! ```text
//! "WVAD" | version | kind (u8: 0 = single encoder, 1 = ensemble)
//! config: sample_rate frame_len hop
//!         n_enc_ch enc_ch[n] enc_kernel n_dec dec_kernel[n] leaky_slope(f32)
//! kind 0: encoder (4 layers)
//! kind 1: n_encoders, then per encoder: frozen (u8) + encoder (4 layers)
//! framing block (1 layer), decoder (3 layers)
//!
//! layer: in out kernel stride padding activation(u8) slope(f32)
//!        n_kernels kernels[n] n_biases biases[n]
//! ```

use std::path::Path;

use super::config::WvadConfig;
use super::network::{Detector, EncoderStack, EnsembleModel, Head, WvadModel};
use crate::error::{format_err, Error, Result};
use crate::signal::{Activation, ConvLayer};

pub const MAGIC: &[u8; 4] = b"WVAD";
pub const FORMAT_VERSION: u32 = 1;

const KIND_SINGLE: u8 = 0;
const KIND_ENSEMBLE: u8 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("model dimensions fit in u32");
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn tensor(&mut self, values: &[f32]) {
        self.u32(values.len());
        values.iter().for_each(|&v| self.f32(v));
    }
    fn usizes(&mut self, values: &[usize]) {
        self.u32(values.len());
        values.iter().for_each(|&v| self.u32(v));
    }

    fn layer(&mut self, l: &ConvLayer) {
        self.u32(l.in_channels());
        self.u32(l.out_channels());
        self.u32(l.kernel_size());
        self.u32(l.stride());
        self.u32(l.padding());
        let (tag, slope) = match l.activation() {
            Activation::Identity => (0, 0.0),
            Activation::LeakyRelu { slope } => (1, slope),
            Activation::Sigmoid => (2, 0.0),
        };
        self.u8(tag);
        self.f32(slope);
        self.tensor(l.kernels());
        self.tensor(l.biases());
    }

    fn config(&mut self, c: &WvadConfig) {
        self.u32(c.sample_rate as usize);
        self.u32(c.frame_len);
        self.u32(c.hop);
        self.usizes(&c.encoder_channels);
        self.u32(c.encoder_kernel);
        self.usizes(&c.decoder_kernels);
        self.f32(c.leaky_slope);
    }

    fn head(&mut self, h: &Head) {
        self.layer(h.framing_layer());
        h.decoder_layers().iter().for_each(|l| self.layer(l));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

/// Upper bound on any count read from a file, so a corrupt length cannot
/// trigger a huge allocation.
const MAX_COUNT: usize = 1 << 28;

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| {
            format_err!("model file truncated at byte {} (needed {n} more)", self.pos)
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        let v = u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
        if v > MAX_COUNT {
            return Err(format_err!("implausible value {v} at byte {}", self.pos - 4));
        }
        Ok(v)
    }
    fn f32(&mut self) -> Result<f32> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes(b.try_into().expect("4 bytes")))
    }
    fn tensor(&mut self) -> Result<Vec<f32>> {
        let n = self.u32()?;
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| format_err!("bad tensor size"))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.u32()?;
        (0..n).map(|_| self.u32()).collect()
    }

    fn layer(&mut self) -> Result<ConvLayer> {
        let (cin, cout, k, stride, pad) = (self.u32()?, self.u32()?, self.u32()?, self.u32()?, self.u32()?);
        let tag = self.u8()?;
        let slope = self.f32()?;
        let activation = match tag {
            0 => Activation::Identity,
            1 => Activation::LeakyRelu { slope },
            2 => Activation::Sigmoid,
            t => return Err(format_err!("unknown activation tag {t}")),
        };
        let kernels = self.tensor()?;
        let biases = self.tensor()?;
        ConvLayer::with_parameters(cin, cout, k, stride, pad, activation, kernels, biases).map_err(as_format)
    }

    fn config(&mut self) -> Result<WvadConfig> {
        let sample_rate = u32::try_from(self.u32()?).expect("bounded");
        let c = WvadConfig {
            sample_rate,
            frame_len: self.u32()?,
            hop: self.u32()?,
            encoder_channels: self.usizes()?,
            encoder_kernel: self.u32()?,
            decoder_kernels: self.usizes()?,
            leaky_slope: self.f32()?,
        };
        c.validate().map_err(as_format)?;
        Ok(c)
    }

    fn encoder(&mut self, config: &WvadConfig) -> Result<EncoderStack> {
        let layers = (0..config.encoder_channels.len())
            .map(|_| self.layer())
            .collect::<Result<Vec<_>>>()?;
        EncoderStack::from_layers(config, layers).map_err(as_format)
    }

    fn head(&mut self, config: &WvadConfig) -> Result<Head> {
        let fb = self.layer()?;
        let decoder = (0..config.decoder_kernels.len())
            .map(|_| self.layer())
            .collect::<Result<Vec<_>>>()?;
        Head::from_layers(config, fb, decoder).map_err(as_format)
    }
}

fn as_format(e: Error) -> Error {
    match e {
        Error::Format(_) | Error::Io(_) => e,
        other => format_err!("{other}"),
    }
}

fn header(w: &mut Writer, kind: u8, config: &WvadConfig) {
    w.0.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION as usize);
    w.u8(kind);
    w.config(config);
}

pub fn serialize_wvad(model: &WvadModel) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    header(&mut w, KIND_SINGLE, model.config());
    model.encoder().layers().iter().for_each(|l| w.layer(l));
    w.head(model.head());
    w.0
}

pub fn serialize_ensemble(model: &EnsembleModel) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    header(&mut w, KIND_ENSEMBLE, model.config());
    w.u32(model.encoder_count());
    for (e, &frozen) in model.encoders().iter().zip(model.frozen_flags()) {
        w.u8(frozen as u8);
        e.layers().iter().for_each(|l| w.layer(l));
    }
    w.head(model.head());
    w.0
}

pub fn serialize(model: &Detector) -> Vec<u8> {
    match model {
        Detector::Wvad(m) => serialize_wvad(m),
        Detector::Wevad(m) => serialize_ensemble(m),
    }
}

pub fn deserialize(bytes: &[u8]) -> Result<Detector> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(format_err!("not a model file (bad magic)"));
    }
    let version = r.u32()?;
    if version as u32 != FORMAT_VERSION {
        return Err(format_err!(
            "unsupported model format version {version} (expected {FORMAT_VERSION})"
        ));
    }
    let kind = r.u8()?;
    let config = r.config()?;
    let model = match kind {
        KIND_SINGLE => {
            let encoder = r.encoder(&config)?;
            let head = r.head(&config)?;
            Detector::Wvad(WvadModel::from_parts(config, encoder, head).map_err(as_format)?)
        }
        KIND_ENSEMBLE => {
            let n = r.u32()?;
            if n == 0 {
                return Err(format_err!("ensemble file lists no encoders"));
            }
            let mut encoders = Vec::with_capacity(n);
            let mut frozen = Vec::with_capacity(n);
            for _ in 0..n {
                frozen.push(match r.u8()? {
                    0 => false,
                    1 => true,
                    f => return Err(format_err!("bad frozen flag {f}")),
                });
                encoders.push(r.encoder(&config)?);
            }
            let head = r.head(&config)?;
            Detector::Wevad(
                EnsembleModel::with_flags(config, encoders, frozen, head).map_err(as_format)?,
            )
        }
        k => return Err(format_err!("unknown model kind {k}")),
    };
    if r.pos != bytes.len() {
        return Err(format_err!(
            "{} trailing bytes after model data",
            bytes.len() - r.pos
        ));
    }
    Ok(model)
}

pub fn save_model(path: impl AsRef<Path>, model: &Detector) -> Result<()> {
    std::fs::write(path, serialize(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Detector> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    deserialize(&bytes).map_err(|e| match e {
        Error::Format(msg) => format_err!("{}: {msg}", path.display()),
        other => other,
    })
}
