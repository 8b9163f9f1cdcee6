use crate::audio::LabelTrack;
use crate::error::{input_err, Result};
use crate::model::FrameScores;
use crate::signal::{FeatureMap, Real};

/// Binary cross-entropy averaged over all `n` entries of `p`, with `p`
/// clamped to `[eps, 1 − eps]`. Returns the loss (accumulated in `f64`) and
/// its exact gradient; entries outside the clamp range get zero gradient.
pub fn bce_with_grad<T: Real>(p: &[T], targets: &[T], eps: f64) -> (f64, Vec<T>) {
    assert_eq!(p.len(), targets.len());
    let n = p.len() as f64;
    let mut loss = 0.0f64;
    let grad = p
        .iter()
        .zip(targets)
        .map(|(&p, &t)| {
            let (p, t) = (p.as_f64(), t.as_f64());
            let q = p.clamp(eps, 1.0 - eps);
            loss -= t * q.ln() + (1.0 - t) * (1.0 - q).ln();
            if p < eps || p > 1.0 - eps {
                T::zero()
            } else {
                T::of(-(t / q - (1.0 - t) / (1.0 - q)) / n)
            }
        })
        .collect();
    (loss / n, grad)
}

/// Per-channel binary cross-entropy of `scores` against one-hot labels
/// (`[1, 0]` non-speech, `[0, 1]` speech), averaged over frames and both
/// channels. The gradient has the shape of the score map.
pub fn bce_loss(scores: &FrameScores, labels: &LabelTrack, eps: f64) -> Result<(f64, FeatureMap)> {
    if scores.len() != labels.len() {
        return Err(input_err!(
            "{} score frames but {} labels",
            scores.len(),
            labels.len()
        ));
    }
    let map = scores.as_map();
    let t = labels.len();
    let mut targets = vec![0.0f32; 2 * t];
    for (f, l) in labels.labels.iter().enumerate() {
        let [ns, s] = l.one_hot();
        targets[f] = ns;
        targets[t + f] = s;
    }
    let (loss, grad) = bce_with_grad(map.as_slice(), &targets, eps);
    Ok((loss, FeatureMap::from_vec(2, t, grad)?))
}
