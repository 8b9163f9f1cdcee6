use std::ops::ControlFlow;

use super::config::TrainConfig;
use super::fit::{check_utterances, fit, init_wvad, stream_rng, EpochStats, FeatureSample, TrainReport, HEAD_STREAM};
use super::train_wvad_with;
use crate::dataset::{uat_split, AttributeTree, Utterance};
use crate::error::{config_err, Result};
use crate::model::{EncoderStack, EnsembleModel, WvadConfig, WvadModel};

/// Seed for the model trained at tree node `node`. Depends only on the run
/// seed and the node name, so a node shared by two trees (e.g. `A` in the
/// two- and six-node trees) gets the same model from the same data.
pub fn node_seed(seed: u64, node: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in node.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    seed ^ h
}

const STAGE2_NODE: &str = "<ensemble>";

/// A Stage-1 model trained on the subset at one tree node.
#[derive(Clone, Debug)]
pub struct NodeModel {
    pub node: String,
    pub model: WvadModel,
    pub report: TrainReport,
}

#[derive(Clone, Debug)]
pub struct WevadReport {
    pub stage1: Vec<(String, TrainReport)>,
    pub stage2: TrainReport,
}

/// Progress callback: node name (or `<ensemble>` in Stage 2) and epoch stats.
pub type Progress<'a> = dyn FnMut(&str, &EpochStats) + 'a;

/// Stage 1: one full WVAD per node of `tree`, trained on that node's subset.
/// Each trained model is then rescaled so its encoder channels have unit RMS
/// over all of `utterances` (see [`WvadModel::rescale_encoder_output`]). Its
/// scores are unchanged up to rounding.
pub fn train_stage1(
    config: &WvadConfig,
    utterances: &[Utterance],
    tree: &AttributeTree,
    cfg: &TrainConfig,
    progress: &mut Progress<'_>,
) -> Result<Vec<NodeModel>> {
    check_utterances(config, utterances)?;
    let nodes = uat_split(utterances, tree)?;
    if let Some(empty) = nodes.iter().find(|n| n.members.is_empty()) {
        return Err(config_err!("attribute tree node {} has no training utterances", empty.name));
    }
    nodes
        .into_iter()
        .map(|node| {
            let subset: Vec<Utterance> = node.members.iter().map(|&i| utterances[i].clone()).collect();
            let seed = node_seed(cfg.seed, &node.name);
            let node_cfg = TrainConfig { seed, ..cfg.clone() };
            let mut model = init_wvad(config.clone(), seed)?;
            let report = train_wvad_with(&mut model, &subset, &node_cfg, &mut |s, _| {
                progress(&node.name, s);
                ControlFlow::Continue(())
            })?;
            let model = model.rescale_encoder_output(encoder_rms(&model, utterances)?)?;
            Ok(NodeModel { node: node.name, model, report })
        })
        .collect()
}

/// RMS of each encoder output channel over `utterances`. Channels that are
/// identically zero get 1.
pub fn encoder_rms(model: &WvadModel, utterances: &[Utterance]) -> Result<[f64; 2]> {
    let mut sum_sq = [0.0f64; 2];
    let mut n = 0usize;
    for u in utterances {
        let s = model.encode(u.noisy.samples())?;
        for (c, acc) in sum_sq.iter_mut().enumerate() {
            *acc += s.channel(c).iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>();
        }
        n += s.len();
    }
    Ok(sum_sq.map(|ss| {
        let rms = (ss / n.max(1) as f64).sqrt();
        if rms > 0.0 && rms.is_finite() { rms } else { 1.0 }
    }))
}

/// Stage 2: concatenates the frozen `encoders`, puts a freshly initialized
/// framing block (`2n` input channels) and decoder on top, and trains only
/// those on all of `utterances`. Encoder outputs are computed once up front;
/// the encoders are never written to.
pub fn train_stage2(
    config: &WvadConfig,
    encoders: Vec<EncoderStack>,
    utterances: &[Utterance],
    cfg: &TrainConfig,
    progress: &mut Progress<'_>,
) -> Result<(EnsembleModel, TrainReport)> {
    check_utterances(config, utterances)?;
    let seed = node_seed(cfg.seed, STAGE2_NODE);
    let mut ensemble = EnsembleModel::with_fresh_head(config.clone(), encoders, &mut stream_rng(seed, HEAD_STREAM))?;
    let samples = utterances
        .iter()
        .map(|u| {
            Ok(FeatureSample {
                features: ensemble.ensemble_encode(u.noisy.samples())?,
                labels: &u.labels,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let stage_cfg = TrainConfig { seed, ..cfg.clone() };
    let report = fit(ensemble.head_mut(), &samples, &stage_cfg, &mut |s, _| {
        progress(STAGE2_NODE, s);
        ControlFlow::Continue(())
    })?;
    Ok((ensemble, report))
}

/// Both stages. Every Stage-1 model and Stage 2 use `cfg` (with per-node seeds).
pub fn train_wevad(
    config: &WvadConfig,
    utterances: &[Utterance],
    tree: &AttributeTree,
    cfg: &TrainConfig,
) -> Result<(EnsembleModel, WevadReport)> {
    train_wevad_with(config, utterances, tree, cfg, &mut |_, _| {})
}

pub fn train_wevad_with(
    config: &WvadConfig,
    utterances: &[Utterance],
    tree: &AttributeTree,
    cfg: &TrainConfig,
    progress: &mut Progress<'_>,
) -> Result<(EnsembleModel, WevadReport)> {
    let nodes = train_stage1(config, utterances, tree, cfg, progress)?;
    let mut stage1 = Vec::with_capacity(nodes.len());
    let mut encoders = Vec::with_capacity(nodes.len());
    for n in nodes {
        let (_, encoder, _) = n.model.into_parts();
        encoders.push(encoder);
        stage1.push((n.node, n.report));
    }
    let (model, stage2) = train_stage2(config, encoders, utterances, cfg, progress)?;
    Ok((model, WevadReport { stage1, stage2 }))
}
