use std::fmt::Write as _;

use crate::audio::VadLabel;
use crate::error::{config_err, input_err, Result};
use crate::model::ScorePair;

/// Which frames enter a histogram.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameFilter {
    All,
    /// Predicted and truly non-speech.
    TrueNegative,
    /// Predicted and truly speech.
    TruePositive,
}

impl FrameFilter {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all" => Some(FrameFilter::All),
            "tn" => Some(FrameFilter::TrueNegative),
            "tp" => Some(FrameFilter::TruePositive),
            _ => None,
        }
    }
}

/// Counts of both score channels over `bins` equal-width bins covering
/// `[0, 1]`; bin `i` is `[i/bins, (i+1)/bins)` and the last bin also holds 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    pub bins: usize,
    pub non_speech: Vec<u64>,
    pub speech: Vec<u64>,
}

impl Histogram {
    pub fn new(bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(config_err!("a histogram needs at least 2 bins, got {bins}"));
        }
        Ok(Self {
            bins,
            non_speech: vec![0; bins],
            speech: vec![0; bins],
        })
    }

    /// Bin of `v`; values outside `[0, 1]` go to the nearest end bin.
    pub fn bin_of(&self, v: f32) -> usize {
        ((v.clamp(0.0, 1.0) as f64 * self.bins as f64) as usize).min(self.bins - 1)
    }

    pub fn add(&mut self, pair: ScorePair) {
        let (a, b) = (self.bin_of(pair.non_speech), self.bin_of(pair.speech));
        self.non_speech[a] += 1;
        self.speech[b] += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        assert_eq!(self.bins, other.bins);
        self.non_speech.iter_mut().zip(&other.non_speech).for_each(|(a, b)| *a += b);
        self.speech.iter_mut().zip(&other.speech).for_each(|(a, b)| *a += b);
    }

    /// Number of frames counted (each frame adds one value per channel).
    pub fn total(&self) -> u64 {
        self.speech.iter().sum()
    }

    pub fn edges(&self, bin: usize) -> (f64, f64) {
        (bin as f64 / self.bins as f64, (bin + 1) as f64 / self.bins as f64)
    }

    /// Fraction of speech-channel values in bins lying entirely inside
    /// `[0, low)` or `[high, 1]`.
    pub fn speech_outer_mass(&self, low: f64, high: f64) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let outer: u64 = (0..self.bins)
            .filter(|&i| {
                let (lo, hi) = self.edges(i);
                hi <= low + 1e-12 || lo >= high - 1e-12
            })
            .map(|i| self.speech[i])
            .sum();
        outer as f64 / total as f64
    }

    /// `bin_lo,bin_hi,count_ns,count_s` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count_ns,count_s\n");
        for i in 0..self.bins {
            let (lo, hi) = self.edges(i);
            writeln!(out, "{lo},{hi},{},{}", self.non_speech[i], self.speech[i]).unwrap();
        }
        out
    }
}

/// Histogram of `scores`, restricted by `filter`. The TN/TP filters compare
/// the decision rule's prediction with `truth`, which they require.
pub fn channel_histogram(
    scores: &[ScorePair],
    truth: Option<&[VadLabel]>,
    bins: usize,
    filter: FrameFilter,
) -> Result<Histogram> {
    let mut h = Histogram::new(bins)?;
    let wanted = match filter {
        FrameFilter::All => None,
        FrameFilter::TrueNegative => Some(VadLabel::NonSpeech),
        FrameFilter::TruePositive => Some(VadLabel::Speech),
    };
    match (wanted, truth) {
        (None, _) => scores.iter().for_each(|&p| h.add(p)),
        (Some(_), None) => return Err(config_err!("TN/TP histograms need ground-truth labels")),
        (Some(w), Some(truth)) => {
            if truth.len() != scores.len() {
                return Err(input_err!("{} scores for {} labels", scores.len(), truth.len()));
            }
            for (&p, &t) in scores.iter().zip(truth) {
                if p.label() == w && t == w {
                    h.add(p);
                }
            }
        }
    }
    Ok(h)
}
