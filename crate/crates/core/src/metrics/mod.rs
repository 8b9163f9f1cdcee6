//! Frame accuracy, ROC/AUC and output histograms.
//!
//! Speech is the positive class. The scalar ROC score of a frame is
//! `y_s − y_ns`, so the ROC operating point at threshold 0 is exactly the
//! decision rule "speech iff `y_s ≥ y_ns`".

mod accuracy;
mod eval;
mod histogram;
mod roc;

pub use accuracy::{frame_accuracy, Confusion};
pub use eval::{
    evaluate, evaluate_utterance, pooled_roc, stage_histogram, summarize, GroupKey, Stage, Summary,
    SummaryRow, UtteranceEval,
};
pub use histogram::{channel_histogram, FrameFilter, Histogram};
pub use roc::{auc, roc_csv, roc_curve, RocCurve, RocPoint};

#[cfg(test)]
mod tests;
