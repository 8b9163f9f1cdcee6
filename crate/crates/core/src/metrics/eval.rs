use std::cmp::Ordering;
use std::fmt::Write as _;

use super::accuracy::Confusion;
use super::histogram::{FrameFilter, Histogram};
use super::roc::{auc, roc_curve, RocCurve};
use crate::audio::VadLabel;
use crate::dataset::{Attributes, Utterance};
use crate::error::{config_err, input_err, Error, Result};
use crate::model::{predict_labels, Detector, FrameScores, ScorePair};

/// Detector output for one utterance next to its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct UtteranceEval {
    pub id: String,
    pub attributes: Attributes,
    pub truth: Vec<VadLabel>,
    pub scores: Vec<ScorePair>,
    pub predicted: Vec<VadLabel>,
}

impl UtteranceEval {
    /// ROC scores `y_s − y_ns`.
    pub fn margins(&self) -> Vec<f64> {
        self.scores.iter().map(|p| p.margin()).collect()
    }

    pub fn confusion(&self) -> Confusion {
        Confusion::from_labels(&self.predicted, &self.truth)
    }

    /// The decision rule and the ROC operating point at threshold 0 must
    /// count the same frames as speech.
    pub fn threshold_zero_matches(&self) -> bool {
        Confusion::at_threshold(&self.margins(), &self.truth, 0.0) == self.confusion()
    }
}

fn check_input(detector: &Detector, u: &Utterance) -> Result<()> {
    let config = detector.config();
    if u.noisy.sample_rate() != config.sample_rate {
        return Err(input_err!(
            "utterance {} is {} Hz, model expects {} Hz",
            u.id,
            u.noisy.sample_rate(),
            config.sample_rate
        ));
    }
    let frames = config.geometry().num_frames(u.noisy.len());
    if u.labels.len() != frames {
        return Err(input_err!("utterance {} has {} labels for {frames} frames", u.id, u.labels.len()));
    }
    Ok(())
}

fn eval_from_scores(u: &Utterance, scores: &FrameScores) -> UtteranceEval {
    UtteranceEval {
        id: u.id.clone(),
        attributes: u.attributes.clone(),
        truth: u.labels.labels.clone(),
        scores: scores.pairs().collect(),
        predicted: predict_labels(scores),
    }
}

pub fn evaluate_utterance(detector: &Detector, u: &Utterance) -> Result<UtteranceEval> {
    check_input(detector, u)?;
    Ok(eval_from_scores(u, &detector.forward(u.noisy.samples())?))
}

pub fn evaluate(detector: &Detector, utterances: &[Utterance]) -> Result<Vec<UtteranceEval>> {
    utterances.iter().map(|u| evaluate_utterance(detector, u)).collect()
}

/// Attribute to group evaluation rows by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKey {
    Snr,
    NoiseType,
    SpeakerClass,
}

impl GroupKey {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "snr" | "snr_db" => Ok(GroupKey::Snr),
            "noise" | "noise_type" => Ok(GroupKey::NoiseType),
            "speaker" | "speaker_class" => Ok(GroupKey::SpeakerClass),
            other => Err(config_err!(
                "unknown group key '{other}' (expected snr, noise_type or speaker_class)"
            )),
        }
    }

    /// Comma-separated keys; an empty string means no grouping.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(',')
            .map(str::trim)
            .filter(|k| !k.is_empty())
            .map(Self::parse)
            .collect()
    }

    pub fn column(self) -> &'static str {
        match self {
            GroupKey::Snr => "snr_db",
            GroupKey::NoiseType => "noise_type",
            GroupKey::SpeakerClass => "speaker_class",
        }
    }

    fn value(self, a: &Attributes) -> String {
        let v = match self {
            GroupKey::Snr => a.snr_db.map(|s| s.to_string()),
            GroupKey::NoiseType => a.noise_type.clone(),
            GroupKey::SpeakerClass => a.speaker_class.map(|c| c.name().to_string()),
        };
        v.unwrap_or_else(|| "unknown".to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub group: Vec<String>,
    pub confusion: Confusion,
    pub accuracy: f64,
    /// `None` when the group's frames are all one class.
    pub auc: Option<f64>,
}

impl SummaryRow {
    pub fn frames(&self) -> usize {
        self.confusion.total()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub keys: Vec<GroupKey>,
    pub rows: Vec<SummaryRow>,
    /// All frames pooled.
    pub average: SummaryRow,
    /// Whether threshold 0 on `y_s − y_ns` reproduced the decision rule's
    /// confusion counts for every utterance.
    pub threshold_zero_matches: bool,
    pub warnings: Vec<String>,
}

fn pooled_row(group: Vec<String>, evals: &[&UtteranceEval], warnings: &mut Vec<String>) -> Result<SummaryRow> {
    let mut confusion = Confusion::default();
    let (mut margins, mut truth) = (Vec::new(), Vec::new());
    for e in evals {
        confusion.merge(&e.confusion());
        margins.extend(e.margins());
        truth.extend_from_slice(&e.truth);
    }
    let accuracy = confusion
        .accuracy()
        .ok_or_else(|| input_err!("group {} has no frames", group.join("/")))?;
    let auc = match roc_curve(&margins, &truth) {
        Ok(c) => Some(auc(&c)),
        Err(Error::UndefinedRoc(why)) => {
            warnings.push(format!("group {}: AUC undefined ({why})", group.join("/")));
            None
        }
        Err(e) => return Err(e),
    };
    Ok(SummaryRow { group, confusion, accuracy, auc })
}

/// Numeric where both sides parse as numbers, text otherwise.
fn compare_values(a: &[String], b: &[String]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = match (x.parse::<f64>(), y.parse::<f64>()) {
            (Ok(p), Ok(q)) => p.total_cmp(&q),
            _ => x.cmp(y),
        };
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Pools frames per attribute group (and overall) into accuracy and AUC.
pub fn summarize(evals: &[UtteranceEval], keys: &[GroupKey]) -> Result<Summary> {
    if evals.is_empty() {
        return Err(input_err!("nothing to summarize"));
    }
    let mut groups: Vec<(Vec<String>, Vec<&UtteranceEval>)> = Vec::new();
    for e in evals {
        let g: Vec<String> = keys.iter().map(|k| k.value(&e.attributes)).collect();
        match groups.iter_mut().find(|(k, _)| *k == g) {
            Some((_, members)) => members.push(e),
            None => groups.push((g, vec![e])),
        }
    }
    groups.sort_by(|a, b| compare_values(&a.0, &b.0));

    let mut warnings = Vec::new();
    let rows = if keys.is_empty() {
        Vec::new()
    } else {
        groups
            .into_iter()
            .map(|(g, members)| pooled_row(g, &members, &mut warnings))
            .collect::<Result<Vec<_>>>()?
    };
    let all: Vec<&UtteranceEval> = evals.iter().collect();
    let average = pooled_row(vec!["AVG".to_string(); keys.len().max(1)], &all, &mut warnings)?;
    Ok(Summary {
        keys: keys.to_vec(),
        rows,
        average,
        threshold_zero_matches: evals.iter().all(UtteranceEval::threshold_zero_matches),
        warnings,
    })
}

impl Summary {
    /// One row per group plus an `AVG` row: group columns, `frames,acc,auc`.
    /// Undefined AUCs are written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let cols: Vec<&str> = if self.keys.is_empty() {
            vec!["group"]
        } else {
            self.keys.iter().map(|k| k.column()).collect()
        };
        writeln!(out, "{},frames,acc,auc", cols.join(",")).unwrap();
        for r in self.rows.iter().chain(std::iter::once(&self.average)) {
            let auc = r.auc.map_or_else(|| "NA".to_string(), |a| format!("{a:.6}"));
            writeln!(out, "{},{},{:.4},{auc}", r.group.join(","), r.frames(), r.accuracy).unwrap();
        }
        out
    }
}

/// ROC over all frames of `evals`, scored by `y_s − y_ns`.
pub fn pooled_roc(evals: &[UtteranceEval]) -> Result<RocCurve> {
    let margins: Vec<f64> = evals.iter().flat_map(|e| e.margins()).collect();
    let truth: Vec<VadLabel> = evals.iter().flat_map(|e| e.truth.iter().copied()).collect();
    roc_curve(&margins, &truth)
}

/// Network output tapped for histograms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Output of decoder block `m` (1-based).
    Decoder(usize),
    /// The detector's output (the last decoder block).
    Final,
}

impl Stage {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "db1" => Ok(Stage::Decoder(1)),
            "db2" => Ok(Stage::Decoder(2)),
            "db3" => Ok(Stage::Decoder(3)),
            "final" => Ok(Stage::Final),
            other => Err(config_err!("unknown stage '{other}' (expected db1, db2, db3 or final)")),
        }
    }
}

/// Histogram of the `stage` output over all frames of `utterances`. The
/// TN/TP filters select frames by the detector's final decision against the
/// ground truth, whichever stage is histogrammed.
pub fn stage_histogram(
    detector: &Detector,
    utterances: &[Utterance],
    stage: Stage,
    filter: FrameFilter,
    bins: usize,
) -> Result<Histogram> {
    let mut total = Histogram::new(bins)?;
    for u in utterances {
        check_input(detector, u)?;
        let trace = detector.forward_traced(u.noisy.samples())?;
        let final_scores = trace.scores();
        let tapped = match stage {
            Stage::Final => final_scores.clone(),
            Stage::Decoder(m) => FrameScores::from_map(
                trace
                    .block(m)
                    .ok_or_else(|| config_err!("the decoder has no block {m}"))?
                    .clone(),
            )?,
        };
        let predicted = predict_labels(&final_scores);
        for (t, (&p, &truth)) in predicted.iter().zip(&u.labels.labels).enumerate() {
            let keep = match filter {
                FrameFilter::All => true,
                FrameFilter::TrueNegative => p == VadLabel::NonSpeech && truth == VadLabel::NonSpeech,
                FrameFilter::TruePositive => p == VadLabel::Speech && truth == VadLabel::Speech,
            };
            if keep {
                total.add(tapped.pair(t));
            }
        }
    }
    Ok(total)
}
