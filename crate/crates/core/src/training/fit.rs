use std::ops::ControlFlow;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::loss::bce_loss;
use crate::audio::LabelTrack;
use crate::dataset::Utterance;
use crate::error::{config_err, input_err, Result};
use crate::model::{predict_labels, FrameScores, Head, WvadConfig, WvadModel};
use crate::signal::{AdamState, FeatureMap};

const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;
pub(crate) const HEAD_STREAM: u64 = 2;

/// An epoch in which at least this fraction of one framing-block channel's
/// outputs lies within [`SATURATION_MARGIN`] of 0 or 1 counts as collapsed:
/// the sigmoid derivative there is zero in `f32`, so nothing upstream of
/// that channel learns from it again and the run cannot recover.
pub const COLLAPSE_FRACTION: f64 = 0.99;
pub const SATURATION_MARGIN: f32 = 1e-6;

/// Seed of restart `attempt`; attempt 0 uses `seed` itself.
pub fn attempt_seed(seed: u64, attempt: usize) -> u64 {
    seed ^ (attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A freshly initialized model; the same `seed` always gives the same weights.
pub fn init_wvad(config: WvadConfig, seed: u64) -> Result<WvadModel> {
    WvadModel::initialized(config, &mut stream_rng(seed, INIT_STREAM))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Mean of the per-utterance losses.
    pub loss: f64,
    /// Frame accuracy in percent of the scores seen during the epoch, each
    /// computed just before the update that used it.
    pub accuracy: f64,
    pub seconds: f64,
    /// Fraction of framing-block outputs within [`SATURATION_MARGIN`] of 0
    /// or 1, for the more saturated of the two channels.
    pub saturation: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Epochs of the run that produced the final parameters.
    pub epochs: Vec<EpochStats>,
    /// Collapsed runs discarded before it.
    pub restarts: usize,
}

impl TrainReport {
    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }

    /// `epoch,loss,acc` rows. Wall-clock time is left out so that reruns
    /// produce identical files.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,acc\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{:.9},{:.4}\n", e.epoch, e.loss, e.accuracy));
        }
        out
    }
}

/// Called after every epoch with the updated model; `Break` ends training early.
pub type Observer<'a, M> = dyn FnMut(&EpochStats, &M) -> ControlFlow<()> + 'a;

pub(crate) struct StepResult {
    pub loss: f64,
    pub grads: Vec<Vec<f32>>,
    pub correct: usize,
    pub frames: usize,
    /// Saturated framing-block outputs per channel.
    pub saturated: [usize; 2],
}

fn saturated(z0: &FeatureMap) -> [usize; 2] {
    let count = |c| {
        z0.channel(c)
            .iter()
            .filter(|&&v| v <= SATURATION_MARGIN || v >= 1.0 - SATURATION_MARGIN)
            .count()
    };
    [count(0), count(1)]
}

fn score_step(scores: &FrameScores, labels: &LabelTrack, eps: f64) -> Result<(f64, FeatureMap, usize)> {
    let (loss, grad) = bce_loss(scores, labels, eps)?;
    let correct = predict_labels(scores)
        .iter()
        .zip(&labels.labels)
        .filter(|(a, b)| a == b)
        .count();
    Ok((loss, grad, correct))
}

/// Something with parameters and a way to get their gradients on one sample.
pub(crate) trait Trainable<S> {
    fn param_sizes(&self) -> Vec<usize>;
    fn params_mut(&mut self) -> Vec<&mut [f32]>;
    fn step(&self, sample: &S, eps: f64) -> Result<StepResult>;
    /// Fresh parameters for a restart.
    fn reinit(&mut self, seed: u64);
}

pub(crate) struct WaveSample<'a> {
    pub waveform: &'a [f32],
    pub labels: &'a LabelTrack,
}

impl<'a> Trainable<WaveSample<'a>> for WvadModel {
    fn param_sizes(&self) -> Vec<usize> {
        let mut s = self.encoder().param_sizes();
        s.extend(self.head().param_sizes());
        s
    }

    fn params_mut(&mut self) -> Vec<&mut [f32]> {
        let (encoder, head) = self.parts_mut();
        let mut p = encoder.params_mut();
        p.extend(head.params_mut());
        p
    }

    fn step(&self, sample: &WaveSample<'a>, eps: f64) -> Result<StepResult> {
        let enc = self.encoder().forward_trace(FeatureMap::from_signal(sample.waveform))?;
        let head = self.head().forward_trace(enc.last().expect("non-empty").clone())?;
        let scores = FrameScores::from_map(head.last().expect("non-empty").clone())?;
        let (loss, grad, correct) = score_step(&scores, sample.labels, eps)?;
        let (grad_features, head_grads) = self.head().backward(&head, grad, true)?;
        let mut grads = self
            .encoder()
            .backward(&enc, grad_features.expect("requested"))?;
        grads.extend(head_grads);
        Ok(StepResult { loss, grads, correct, frames: scores.len(), saturated: saturated(&head[1]) })
    }

    fn reinit(&mut self, seed: u64) {
        *self = init_wvad(self.config().clone(), seed).expect("config was valid");
    }
}

pub(crate) struct FeatureSample<'a> {
    pub features: FeatureMap,
    pub labels: &'a LabelTrack,
}

impl<'a> Trainable<FeatureSample<'a>> for Head {
    fn param_sizes(&self) -> Vec<usize> {
        Head::param_sizes(self)
    }

    fn params_mut(&mut self) -> Vec<&mut [f32]> {
        Head::params_mut(self)
    }

    fn step(&self, sample: &FeatureSample<'a>, eps: f64) -> Result<StepResult> {
        let trace = self.forward_trace(sample.features.clone())?;
        let scores = FrameScores::from_map(trace.last().expect("non-empty").clone())?;
        let (loss, grad, correct) = score_step(&scores, sample.labels, eps)?;
        let (_, grads) = self.backward(&trace, grad, false)?;
        Ok(StepResult { loss, grads, correct, frames: scores.len(), saturated: saturated(&trace[1]) })
    }

    fn reinit(&mut self, seed: u64) {
        self.init(&mut stream_rng(seed, HEAD_STREAM));
    }
}

/// Mini-batch Adam over `samples`, reshuffled every epoch from `cfg.seed`.
/// Batch gradients are the mean of the per-utterance gradients, each of which
/// is already averaged over that utterance's frames.
///
/// If an epoch ends collapsed (see [`COLLAPSE_FRACTION`]) and restarts remain,
/// the model is reinitialized from [`attempt_seed`] and training starts over
/// with the full epoch budget. The first attempt uses the model as given.
pub(crate) fn fit<S, M: Trainable<S>>(
    model: &mut M,
    samples: &[S],
    cfg: &TrainConfig,
    observer: &mut Observer<'_, M>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(input_err!("no training utterances"));
    }
    let sizes = model.param_sizes();
    let mut attempt = 0;
    'attempts: loop {
        let seed = attempt_seed(cfg.seed, attempt);
        if attempt > 0 {
            model.reinit(seed);
        }
        let mut adam = AdamState::new(cfg.adam, &sizes);
        let mut rng = stream_rng(seed, SHUFFLE_STREAM);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut report = TrainReport { epochs: Vec::new(), restarts: attempt };

        for epoch in 1..=cfg.epochs {
            let start = Instant::now();
            order.shuffle(&mut rng);
            let (mut loss_sum, mut correct, mut frames, mut sat) = (0.0f64, 0usize, 0usize, [0usize; 2]);
            for batch in order.chunks(cfg.batch_size) {
                let mut acc: Vec<Vec<f32>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
                for &i in batch {
                    let r = model.step(&samples[i], cfg.clamp_epsilon)?;
                    loss_sum += r.loss;
                    correct += r.correct;
                    frames += r.frames;
                    sat[0] += r.saturated[0];
                    sat[1] += r.saturated[1];
                    for (a, g) in acc.iter_mut().zip(&r.grads) {
                        a.iter_mut().zip(g).for_each(|(a, g)| *a += g);
                    }
                }
                let scale = 1.0 / batch.len() as f32;
                acc.iter_mut().flatten().for_each(|g| *g *= scale);
                let grads: Vec<&[f32]> = acc.iter().map(Vec::as_slice).collect();
                adam.step(&mut model.params_mut(), &grads)?;
            }
            let loss = loss_sum / samples.len() as f64;
            if !loss.is_finite() {
                return Err(config_err!("training diverged: loss {loss} in epoch {epoch}"));
            }
            let saturation = sat[0].max(sat[1]) as f64 / frames.max(1) as f64;
            let stats = EpochStats {
                epoch,
                loss,
                accuracy: 100.0 * correct as f64 / frames.max(1) as f64,
                seconds: start.elapsed().as_secs_f64(),
                saturation,
            };
            let flow = observer(&stats, model);
            report.epochs.push(stats);
            if flow.is_break() {
                return Ok(report);
            }
            if saturation >= COLLAPSE_FRACTION && attempt < cfg.max_restarts {
                attempt += 1;
                continue 'attempts;
            }
        }
        return Ok(report);
    }
}

/// Checks that every utterance can be fed to a model with `config`.
pub(crate) fn check_utterances(config: &WvadConfig, utterances: &[Utterance]) -> Result<()> {
    if utterances.is_empty() {
        return Err(input_err!("no training utterances"));
    }
    let geometry = config.geometry();
    for u in utterances {
        if u.noisy.sample_rate() != config.sample_rate {
            return Err(input_err!(
                "utterance {} is {} Hz, model expects {} Hz",
                u.id,
                u.noisy.sample_rate(),
                config.sample_rate
            ));
        }
        u.labels
            .ensure_geometry(&geometry)
            .map_err(|e| input_err!("utterance {}: {e}", u.id))?;
        let frames = geometry.num_frames(u.noisy.len());
        if frames == 0 || u.labels.len() != frames {
            return Err(input_err!(
                "utterance {} has {} labels for {frames} frames",
                u.id,
                u.labels.len()
            ));
        }
    }
    Ok(())
}

/// Trains every parameter of `model` (encoder, framing block and decoder) on
/// the noisy waveforms of `utterances`.
pub fn train_wvad(model: &mut WvadModel, utterances: &[Utterance], cfg: &TrainConfig) -> Result<TrainReport> {
    train_wvad_with(model, utterances, cfg, &mut |_, _| ControlFlow::Continue(()))
}

pub fn train_wvad_with(
    model: &mut WvadModel,
    utterances: &[Utterance],
    cfg: &TrainConfig,
    observer: &mut Observer<'_, WvadModel>,
) -> Result<TrainReport> {
    check_utterances(model.config(), utterances)?;
    let samples: Vec<WaveSample> = utterances
        .iter()
        .map(|u| WaveSample { waveform: u.noisy.samples(), labels: &u.labels })
        .collect();
    fit(model, &samples, cfg, observer)
}
