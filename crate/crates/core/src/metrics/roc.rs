use std::fmt::Write as _;

use crate::audio::VadLabel;
use crate::error::{input_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    /// Frames with `score ≥ threshold` count as speech; the first point uses `+∞`.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Points from `(0, 0)` to `(1, 1)`, one per distinct score in descending
/// order. Frames with equal scores enter the curve together.
#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

/// Speech is the positive class.
pub fn roc_curve(scores: &[f64], truth: &[VadLabel]) -> Result<RocCurve> {
    if scores.len() != truth.len() {
        return Err(input_err!("{} scores for {} labels", scores.len(), truth.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(input_err!("scores contain NaN"));
    }
    let positives = truth.iter().filter(|t| t.is_speech()).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedRoc(format!(
            "{positives} speech and {negatives} non-speech frames; both classes are needed"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if truth[order[i]].is_speech() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
        });
    }
    Ok(RocCurve { points })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// `threshold,fpr,tpr` rows.
pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &curve.points {
        writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr).unwrap();
    }
    out
}
