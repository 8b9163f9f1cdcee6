use super::*;
use crate::audio::VadLabel;
use crate::dataset::{synthesize_corpus, CorpusSpec, Utterance};
use crate::model::{Detector, WvadConfig, WvadModel};
use crate::training::init_wvad;

fn corpus(snrs: Vec<f64>, n: usize) -> Vec<Utterance> {
    let spec = CorpusSpec {
        utterances: n,
        duration_secs: 0.5,
        snr_grid_db: snrs,
        ..CorpusSpec::default()
    };
    synthesize_corpus(&spec, 8).unwrap()
}

fn random_detector() -> Detector {
    init_wvad(WvadConfig::narrowband(), 21).unwrap().into()
}

#[test]
fn groups_by_snr_with_average_row() {
    let data = corpus(vec![0.0, 10.0], 8);
    let evals = evaluate(&random_detector(), &data).unwrap();
    let s = summarize(&evals, &[GroupKey::Snr]).unwrap();
    assert_eq!(s.rows.len(), 2);
    assert_eq!(s.rows[0].group, ["0"]);
    assert_eq!(s.rows[1].group, ["10"]);
    let csv = s.to_csv();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("snr_db,frames,acc,auc\n"));
    assert!(csv.lines().last().unwrap().starts_with("AVG,"));
    assert!(s.threshold_zero_matches);

    // Pooled accuracy recomputed from raw predictions equals the
    // frame-weighted mean of the group accuracies.
    let (mut correct, mut frames) = (0usize, 0usize);
    for e in &evals {
        correct += e.predicted.iter().zip(&e.truth).filter(|(p, t)| p == t).count();
        frames += e.truth.len();
    }
    let raw = 100.0 * correct as f64 / frames as f64;
    let weighted: f64 = s.rows.iter().map(|r| r.accuracy * r.frames() as f64).sum::<f64>() / frames as f64;
    assert!((s.average.accuracy - raw).abs() < 1e-9);
    assert!((weighted - raw).abs() < 1e-9);
}

#[test]
fn single_class_group_reports_na() {
    let data = corpus(vec![5.0], 2);
    let mut evals = evaluate(&random_detector(), &data).unwrap();
    evals[0].truth.iter_mut().for_each(|t| *t = VadLabel::Speech);
    evals[0].attributes.noise_type = Some("only-speech".into());
    let s = summarize(&evals, &[GroupKey::NoiseType]).unwrap();
    let row = s.rows.iter().find(|r| r.group == ["only-speech"]).unwrap();
    assert_eq!(row.auc, None);
    assert_eq!(s.warnings.len(), 1);
    assert!(s.to_csv().contains(",NA\n"));
}

#[test]
fn unknown_keys_and_stages() {
    assert_eq!(
        GroupKey::parse_list("snr, noise_type").unwrap(),
        [GroupKey::Snr, GroupKey::NoiseType]
    );
    assert!(GroupKey::parse_list("snr,colour").is_err());
    assert!(Stage::parse("db4").is_err());
    assert_eq!(Stage::parse("db2").unwrap(), Stage::Decoder(2));
}

#[test]
fn zero_model_histogram_is_one_bin() {
    let data = corpus(vec![5.0], 2);
    let d: Detector = WvadModel::zeroed(WvadConfig::narrowband()).unwrap().into();
    for stage in ["db1", "db2", "db3", "final"] {
        let h = stage_histogram(&d, &data, Stage::parse(stage).unwrap(), FrameFilter::All, 10).unwrap();
        let frames: usize = data.iter().map(|u| u.labels.len()).sum();
        assert_eq!(h.speech[5] as usize, frames);
        assert_eq!(h.non_speech[5] as usize, frames);
    }
}

#[test]
fn filtered_histogram_counts_match_confusion() {
    let data = corpus(vec![0.0, 10.0], 4);
    let d = random_detector();
    let evals = evaluate(&d, &data).unwrap();
    let mut c = Confusion::default();
    evals.iter().for_each(|e| c.merge(&e.confusion()));
    let tp = stage_histogram(&d, &data, Stage::Decoder(3), FrameFilter::TruePositive, 20).unwrap();
    let tn = stage_histogram(&d, &data, Stage::Decoder(1), FrameFilter::TrueNegative, 20).unwrap();
    assert_eq!(tp.total() as usize, c.tp);
    assert_eq!(tn.total() as usize, c.tn);
    // The final output is the last decoder block.
    let db3 = stage_histogram(&d, &data, Stage::Decoder(3), FrameFilter::All, 20).unwrap();
    let fin = stage_histogram(&d, &data, Stage::Final, FrameFilter::All, 20).unwrap();
    assert_eq!(db3, fin);
}

#[test]
fn rate_mismatch_is_an_input_error() {
    let data = corpus(vec![0.0], 1);
    let wide: Detector = init_wvad(WvadConfig::wideband(), 0).unwrap().into();
    assert!(matches!(evaluate(&wide, &data), Err(crate::Error::Input(_))));
}
