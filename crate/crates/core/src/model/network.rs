use rand::Rng;

use super::config::WvadConfig;
use crate::audio::VadLabel;
use crate::error::{config_err, input_err, Result};
use crate::signal::{Activation, ConvGrads, ConvLayer, FeatureMap};

/// Channel carrying the non-speech score.
pub const NON_SPEECH: usize = 0;
/// Channel carrying the speech score.
pub const SPEECH: usize = 1;

/// Four stride-1 convolution blocks with leaky-ReLU, narrowing the channel
/// count down to two while preserving the time axis.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderStack {
    layers: Vec<ConvLayer>,
}

impl EncoderStack {
    /// Zero-initialized encoder for `config`.
    pub fn new(config: &WvadConfig) -> Result<Self> {
        config.validate()?;
        let k = config.encoder_kernel;
        let mut layers = Vec::with_capacity(config.encoder_channels.len());
        let mut cin = 1;
        for &cout in &config.encoder_channels {
            layers.push(ConvLayer::new(
                cin,
                cout,
                k,
                1,
                (k - 1) / 2,
                Activation::LeakyRelu {
                    slope: config.leaky_slope,
                },
            )?);
            cin = cout;
        }
        Ok(Self { layers })
    }

    /// Wraps existing layers after checking they have the geometry `config`
    /// prescribes.
    pub fn from_layers(config: &WvadConfig, layers: Vec<ConvLayer>) -> Result<Self> {
        let template = Self::new(config)?;
        check_same_geometry("encoder", &template.layers, &layers)?;
        Ok(Self { layers })
    }

    pub fn init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.layers.iter_mut().for_each(|l| l.init_uniform(rng));
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn forward(&self, x: &FeatureMap) -> Result<FeatureMap> {
        let mut h = self.layers[0].forward(x)?;
        for layer in &self.layers[1..] {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    /// Input followed by every block's output.
    pub(crate) fn forward_trace(&self, x: FeatureMap) -> Result<Vec<FeatureMap>> {
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(x);
        for layer in &self.layers {
            let y = layer.forward(trace.last().expect("non-empty"))?;
            trace.push(y);
        }
        Ok(trace)
    }

    /// Parameter gradients, ordered like [`Self::params_mut`]. The gradient
    /// with respect to the waveform is never needed and not computed.
    pub(crate) fn backward(&self, trace: &[FeatureMap], grad: FeatureMap) -> Result<Vec<Vec<f32>>> {
        let mut grads = Vec::with_capacity(2 * self.layers.len());
        let mut g = grad;
        for (j, layer) in self.layers.iter().enumerate().rev() {
            let ConvGrads {
                input,
                kernels,
                biases,
            } = layer.backward(&trace[j], &trace[j + 1], &g, j > 0)?;
            grads.push(biases);
            grads.push(kernels);
            if let Some(gi) = input {
                g = gi;
            }
        }
        grads.reverse();
        Ok(grads)
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut [f32]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub(crate) fn param_sizes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.kernels().len(), l.biases().len()])
            .collect()
    }

    /// Raw bit patterns of every parameter; equal iff bit-identical.
    pub fn param_bits(&self) -> Vec<u32> {
        self.layers
            .iter()
            .flat_map(|l| l.kernels().iter().chain(l.biases()))
            .map(|v| v.to_bits())
            .collect()
    }
}

/// Framing block followed by the three decoder blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    fb: ConvLayer,
    decoder: Vec<ConvLayer>,
}

impl Head {
    /// Zero-initialized head reading `in_channels` encoder channels.
    pub fn new(config: &WvadConfig, in_channels: usize) -> Result<Self> {
        config.validate()?;
        let fb = ConvLayer::new(
            in_channels,
            2,
            config.frame_len,
            config.hop,
            0,
            Activation::Sigmoid,
        )?;
        let decoder = config
            .decoder_kernels
            .iter()
            .map(|&k| ConvLayer::new(2, 2, k, 1, (k - 1) / 2, Activation::Sigmoid))
            .collect::<Result<_>>()?;
        Ok(Self { fb, decoder })
    }

    pub fn from_layers(config: &WvadConfig, fb: ConvLayer, decoder: Vec<ConvLayer>) -> Result<Self> {
        let template = Self::new(config, fb.in_channels())?;
        check_same_geometry("framing block", &[template.fb], std::slice::from_ref(&fb))?;
        check_same_geometry("decoder", &template.decoder, &decoder)?;
        Ok(Self { fb, decoder })
    }

    pub fn init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.fb.init_uniform(rng);
        self.decoder.iter_mut().for_each(|l| l.init_uniform(rng));
    }

    pub fn framing_layer(&self) -> &ConvLayer {
        &self.fb
    }

    pub fn decoder_layers(&self) -> &[ConvLayer] {
        &self.decoder
    }

    pub fn in_channels(&self) -> usize {
        self.fb.in_channels()
    }

    /// Frame-rate scores from sample-rate features: a strided convolution
    /// whose kernel is one frame and whose stride is the label hop.
    pub fn framing_block(&self, s: &FeatureMap) -> Result<FeatureMap> {
        if s.len() < self.fb.kernel_size() {
            return Err(input_err!(
                "feature map of {} samples is shorter than one frame ({})",
                s.len(),
                self.fb.kernel_size()
            ));
        }
        self.fb.forward(s)
    }

    pub fn decode(&self, z0: &FeatureMap) -> Result<FrameScores> {
        Ok(self.decode_traced(z0)?.scores())
    }

    /// Decoder run that keeps each block's output.
    pub fn decode_traced(&self, z0: &FeatureMap) -> Result<DecoderTrace> {
        if z0.channels() != 2 {
            return Err(config_err!(
                "decoder expects 2 channels, got {}",
                z0.channels()
            ));
        }
        let mut blocks = Vec::with_capacity(self.decoder.len());
        let mut h = z0.clone();
        for layer in &self.decoder {
            h = layer.forward(&h)?;
            blocks.push(h.clone());
        }
        Ok(DecoderTrace {
            framing: z0.clone(),
            blocks,
        })
    }

    /// `[s, z0, z1, z2, z3]`
    pub(crate) fn forward_trace(&self, s: FeatureMap) -> Result<Vec<FeatureMap>> {
        let z0 = self.framing_block(&s)?;
        let mut trace = vec![s, z0];
        for layer in &self.decoder {
            let y = layer.forward(trace.last().expect("non-empty"))?;
            trace.push(y);
        }
        Ok(trace)
    }

    /// Parameter gradients (ordered like [`Self::params_mut`]) and, when
    /// requested, the gradient with respect to the encoder features.
    pub(crate) fn backward(
        &self,
        trace: &[FeatureMap],
        grad_scores: FeatureMap,
        want_input_grad: bool,
    ) -> Result<(Option<FeatureMap>, Vec<Vec<f32>>)> {
        let mut grads = Vec::with_capacity(2 * (self.decoder.len() + 1));
        let mut g = grad_scores;
        for (m, layer) in self.decoder.iter().enumerate().rev() {
            let r = layer.backward(&trace[m + 1], &trace[m + 2], &g, true)?;
            grads.push(r.biases);
            grads.push(r.kernels);
            g = r.input.expect("requested");
        }
        let r = self.fb.backward(&trace[0], &trace[1], &g, want_input_grad)?;
        grads.push(r.biases);
        grads.push(r.kernels);
        grads.reverse();
        Ok((r.input, grads))
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut [f32]> {
        std::iter::once(&mut self.fb)
            .chain(self.decoder.iter_mut())
            .flat_map(|l| l.params_mut())
            .collect()
    }

    pub(crate) fn param_sizes(&self) -> Vec<usize> {
        std::iter::once(&self.fb)
            .chain(self.decoder.iter())
            .flat_map(|l| [l.kernels().len(), l.biases().len()])
            .collect()
    }
}

fn check_same_geometry(what: &str, expected: &[ConvLayer], got: &[ConvLayer]) -> Result<()> {
    if expected.len() != got.len() {
        return Err(config_err!(
            "{what} has {} layers, expected {}",
            got.len(),
            expected.len()
        ));
    }
    for (j, (e, g)) in expected.iter().zip(got).enumerate() {
        let shape = |l: &ConvLayer| {
            (
                l.in_channels(),
                l.out_channels(),
                l.kernel_size(),
                l.stride(),
                l.padding(),
                l.activation(),
            )
        };
        if shape(e) != shape(g) {
            return Err(config_err!(
                "{what} layer {j} has geometry {:?}, expected {:?}",
                shape(g),
                shape(e)
            ));
        }
    }
    Ok(())
}

/// Per-frame sigmoid outputs; channel 0 is non-speech, channel 1 speech.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameScores {
    map: FeatureMap,
}

/// Scores of one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScorePair {
    pub non_speech: f32,
    pub speech: f32,
}

impl ScorePair {
    /// Speech iff the speech score is at least the non-speech score.
    pub fn label(self) -> VadLabel {
        VadLabel::from_speech(self.speech >= self.non_speech)
    }

    /// `y_s − y_ns`; thresholding at 0 reproduces [`Self::label`].
    pub fn margin(self) -> f64 {
        self.speech as f64 - self.non_speech as f64
    }
}

impl FrameScores {
    pub fn from_map(map: FeatureMap) -> Result<Self> {
        if map.channels() != 2 {
            return Err(config_err!(
                "frame scores need 2 channels, got {}",
                map.channels()
            ));
        }
        Ok(Self { map })
    }

    pub fn from_pairs(pairs: &[ScorePair]) -> Self {
        let ns: Vec<f32> = pairs.iter().map(|p| p.non_speech).collect();
        let s: Vec<f32> = pairs.iter().map(|p| p.speech).collect();
        Self {
            map: FeatureMap::from_rows(&[ns, s]).expect("equal rows"),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn non_speech(&self) -> &[f32] {
        self.map.channel(NON_SPEECH)
    }

    pub fn speech(&self) -> &[f32] {
        self.map.channel(SPEECH)
    }

    pub fn pair(&self, t: usize) -> ScorePair {
        ScorePair {
            non_speech: self.map.get(NON_SPEECH, t),
            speech: self.map.get(SPEECH, t),
        }
    }

    pub fn pairs(&self) -> impl ExactSizeIterator<Item = ScorePair> + '_ {
        (0..self.len()).map(|t| self.pair(t))
    }

    /// Per-frame `y_s − y_ns`.
    pub fn margins(&self) -> Vec<f64> {
        self.pairs().map(ScorePair::margin).collect()
    }

    pub fn as_map(&self) -> &FeatureMap {
        &self.map
    }
}

/// Speech iff `y_s ≥ y_ns`; ties go to speech.
pub fn predict_labels(scores: &FrameScores) -> Vec<VadLabel> {
    scores.pairs().map(ScorePair::label).collect()
}

/// Outputs of the framing block and each decoder block for one input.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderTrace {
    pub framing: FeatureMap,
    pub blocks: Vec<FeatureMap>,
}

impl DecoderTrace {
    /// Output of decoder block `m` (1-based, as in DB1..DB3).
    pub fn block(&self, m: usize) -> Option<&FeatureMap> {
        m.checked_sub(1).and_then(|i| self.blocks.get(i))
    }

    pub fn scores(&self) -> FrameScores {
        FrameScores {
            map: self.blocks.last().cloned().unwrap_or_else(|| self.framing.clone()),
        }
    }
}

fn check_waveform(config: &WvadConfig, waveform: &[f32]) -> Result<FeatureMap> {
    if waveform.len() < config.frame_len {
        return Err(input_err!(
            "waveform of {} samples is shorter than one frame ({})",
            waveform.len(),
            config.frame_len
        ));
    }
    Ok(FeatureMap::from_signal(waveform))
}

/// Single-encoder detector: encoder → framing block → decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct WvadModel {
    config: WvadConfig,
    encoder: EncoderStack,
    head: Head,
}

impl WvadModel {
    /// All parameters zero.
    pub fn zeroed(config: WvadConfig) -> Result<Self> {
        let encoder = EncoderStack::new(&config)?;
        let head = Head::new(&config, 2)?;
        Ok(Self {
            config,
            encoder,
            head,
        })
    }

    /// Fan-in scaled random initialization.
    pub fn initialized<R: Rng + ?Sized>(config: WvadConfig, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeroed(config)?;
        model.encoder.init(rng);
        model.head.init(rng);
        Ok(model)
    }

    pub fn from_parts(config: WvadConfig, encoder: EncoderStack, head: Head) -> Result<Self> {
        let encoder = EncoderStack::from_layers(&config, encoder.layers)?;
        if head.in_channels() != 2 {
            return Err(config_err!(
                "framing block reads {} channels, a single encoder yields 2",
                head.in_channels()
            ));
        }
        let head = Head::from_layers(&config, head.fb, head.decoder)?;
        Ok(Self {
            config,
            encoder,
            head,
        })
    }

    pub fn config(&self) -> &WvadConfig {
        &self.config
    }

    pub fn encoder(&self) -> &EncoderStack {
        &self.encoder
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn into_parts(self) -> (WvadConfig, EncoderStack, Head) {
        (self.config, self.encoder, self.head)
    }

    /// Two-channel sample-rate features.
    pub fn encode(&self, waveform: &[f32]) -> Result<FeatureMap> {
        self.encoder.forward(&check_waveform(&self.config, waveform)?)
    }

    pub fn framing_block(&self, s: &FeatureMap) -> Result<FeatureMap> {
        self.head.framing_block(s)
    }

    pub fn decode(&self, z0: &FeatureMap) -> Result<FrameScores> {
        self.head.decode(z0)
    }

    pub fn forward(&self, waveform: &[f32]) -> Result<FrameScores> {
        Ok(self.forward_traced(waveform)?.scores())
    }

    pub fn forward_traced(&self, waveform: &[f32]) -> Result<DecoderTrace> {
        let s = self.encode(waveform)?;
        let z0 = self.framing_block(&s)?;
        self.head.decode_traced(&z0)
    }

    /// Same detector with encoder output channel `c` divided by `scale[c]`
    /// and the framing block's taps on that channel multiplied by it. The
    /// leaky ReLU is positively homogeneous, so the scores are unchanged up
    /// to rounding. Scales must be positive and finite.
    pub fn rescale_encoder_output(&self, scale: [f64; 2]) -> Result<Self> {
        if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(config_err!("encoder output scales must be positive and finite, got {scale:?}"));
        }
        let mut encoder = self.encoder.clone();
        let last = encoder.layers.last_mut().expect("encoder has layers");
        *last = last.scaled(|o, _| 1.0 / scale[o], |o| 1.0 / scale[o]);
        let mut head = self.head.clone();
        head.fb = head.fb.scaled(|_, i| scale[i], |_| 1.0);
        Ok(Self { config: self.config.clone(), encoder, head })
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut EncoderStack, &mut Head) {
        (&mut self.encoder, &mut self.head)
    }
}

/// Detector fed by several frozen encoders whose outputs are concatenated
/// channel-wise in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel {
    config: WvadConfig,
    encoders: Vec<EncoderStack>,
    frozen: Vec<bool>,
    head: Head,
}

impl EnsembleModel {
    /// Builds an ensemble around `encoders`; every encoder is marked frozen.
    pub fn new(config: WvadConfig, encoders: Vec<EncoderStack>, head: Head) -> Result<Self> {
        let n = encoders.len();
        Self::with_flags(config, encoders, vec![true; n], head)
    }

    pub(crate) fn with_flags(
        config: WvadConfig,
        encoders: Vec<EncoderStack>,
        frozen: Vec<bool>,
        head: Head,
    ) -> Result<Self> {
        if encoders.is_empty() {
            return Err(config_err!("an ensemble needs at least one encoder"));
        }
        if frozen.len() != encoders.len() {
            return Err(config_err!("one frozen flag per encoder is required"));
        }
        let encoders = encoders
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                EncoderStack::from_layers(&config, e.layers)
                    .map_err(|err| config_err!("encoder {i}: {err}"))
            })
            .collect::<Result<Vec<_>>>()?;
        if head.in_channels() != 2 * encoders.len() {
            return Err(config_err!(
                "framing block reads {} channels, {} encoders yield {}",
                head.in_channels(),
                encoders.len(),
                2 * encoders.len()
            ));
        }
        let head = Head::from_layers(&config, head.fb, head.decoder)?;
        Ok(Self {
            config,
            encoders,
            frozen,
            head,
        })
    }

    /// Ensemble with a freshly initialized framing block and decoder.
    pub fn with_fresh_head<R: Rng + ?Sized>(
        config: WvadConfig,
        encoders: Vec<EncoderStack>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut head = Head::new(&config, 2 * encoders.len())?;
        head.init(rng);
        Self::new(config, encoders, head)
    }

    pub fn config(&self) -> &WvadConfig {
        &self.config
    }

    pub fn encoders(&self) -> &[EncoderStack] {
        &self.encoders
    }

    pub fn encoder_count(&self) -> usize {
        self.encoders.len()
    }

    pub fn is_frozen(&self, index: usize) -> bool {
        self.frozen[index]
    }

    pub(crate) fn frozen_flags(&self) -> &[bool] {
        &self.frozen
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    /// `[Encoder_1(x); …; Encoder_n(x)]`, a `2n × T` map.
    pub fn ensemble_encode(&self, waveform: &[f32]) -> Result<FeatureMap> {
        let x = check_waveform(&self.config, waveform)?;
        let parts = self
            .encoders
            .iter()
            .map(|e| e.forward(&x))
            .collect::<Result<Vec<_>>>()?;
        FeatureMap::concat_channels(&parts)
    }

    pub fn forward(&self, waveform: &[f32]) -> Result<FrameScores> {
        Ok(self.forward_traced(waveform)?.scores())
    }

    pub fn forward_traced(&self, waveform: &[f32]) -> Result<DecoderTrace> {
        let s = self.ensemble_encode(waveform)?;
        let z0 = self.head.framing_block(&s)?;
        self.head.decode_traced(&z0)
    }

    pub(crate) fn head_mut(&mut self) -> &mut Head {
        &mut self.head
    }
}

/// Either kind of detector, as stored in a model file.
#[derive(Clone, Debug, PartialEq)]
pub enum Detector {
    Wvad(WvadModel),
    Wevad(EnsembleModel),
}

impl Detector {
    pub fn config(&self) -> &WvadConfig {
        match self {
            Detector::Wvad(m) => m.config(),
            Detector::Wevad(m) => m.config(),
        }
    }

    pub fn encoder_count(&self) -> usize {
        match self {
            Detector::Wvad(_) => 1,
            Detector::Wevad(m) => m.encoder_count(),
        }
    }

    pub fn forward(&self, waveform: &[f32]) -> Result<FrameScores> {
        match self {
            Detector::Wvad(m) => m.forward(waveform),
            Detector::Wevad(m) => m.forward(waveform),
        }
    }

    pub fn forward_traced(&self, waveform: &[f32]) -> Result<DecoderTrace> {
        match self {
            Detector::Wvad(m) => m.forward_traced(waveform),
            Detector::Wevad(m) => m.forward_traced(waveform),
        }
    }
}

impl From<WvadModel> for Detector {
    fn from(m: WvadModel) -> Self {
        Detector::Wvad(m)
    }
}

impl From<EnsembleModel> for Detector {
    fn from(m: EnsembleModel) -> Self {
        Detector::Wevad(m)
    }
}
