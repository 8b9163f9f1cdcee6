use crate::audio::VadLabel;
use crate::error::{input_err, Result};

/// Percentage of frames whose predicted label equals the truth.
pub fn frame_accuracy(predicted: &[VadLabel], truth: &[VadLabel]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(input_err!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        ));
    }
    if truth.is_empty() {
        return Err(input_err!("accuracy of zero frames is undefined"));
    }
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(100.0 * correct as f64 / truth.len() as f64)
}

/// Frame counts with speech as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_labels(predicted: &[VadLabel], truth: &[VadLabel]) -> Self {
        let mut c = Self::default();
        for (p, t) in predicted.iter().zip(truth) {
            c.add(p.is_speech(), t.is_speech());
        }
        c
    }

    /// Frames with `score ≥ threshold` are predicted speech.
    pub fn at_threshold(scores: &[f64], truth: &[VadLabel], threshold: f64) -> Self {
        let mut c = Self::default();
        for (&s, t) in scores.iter().zip(truth) {
            c.add(s >= threshold, t.is_speech());
        }
        c
    }

    fn add(&mut self, predicted_speech: bool, speech: bool) {
        match (predicted_speech, speech) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn correct(&self) -> usize {
        self.tp + self.tn
    }

    /// Percent; `None` for an empty matrix.
    pub fn accuracy(&self) -> Option<f64> {
        (self.total() > 0).then(|| 100.0 * self.correct() as f64 / self.total() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use VadLabel::{NonSpeech as N, Speech as S};

    #[test]
    fn accuracy_examples() {
        let truth = [S, S, N, N, S, N, S, N];
        let mut pred = truth;
        assert_eq!(frame_accuracy(&pred, &truth).unwrap(), 100.0);
        pred[0] = N;
        pred[3] = S;
        assert_eq!(frame_accuracy(&pred, &truth).unwrap(), 75.0);
        let wrong: Vec<_> = truth.iter().map(|l| VadLabel::from_speech(!l.is_speech())).collect();
        assert_eq!(frame_accuracy(&wrong, &truth).unwrap(), 0.0);
        assert!(frame_accuracy(&[], &[]).is_err());
        assert!(frame_accuracy(&[S], &[S, N]).is_err());
    }

    #[test]
    fn confusion_counts() {
        let c = Confusion::from_labels(&[S, S, N, N], &[S, N, N, S]);
        assert_eq!(c, Confusion { tp: 1, fp: 1, tn: 1, fn_: 1 });
        assert_eq!(c.accuracy(), Some(50.0));
        let t = Confusion::at_threshold(&[0.0, -0.1, 0.3], &[N, N, S], 0.0);
        assert_eq!(t, Confusion { tp: 1, fp: 1, tn: 1, fn_: 0 });
    }
}
