//! The command-line workflows as library functions: corpus synthesis,
//! training, evaluation, prediction and histogram export. Each writes a
//! [`RunManifest`] next to its outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::audio::{read_wav, write_labels, LabelTrack};
use crate::dataset::{read_corpus, synthesize_corpus, write_corpus, CorpusSpec, Utterance};
use crate::error::{config_err, input_err, Error, Result};
use crate::metrics::{
    evaluate, pooled_roc, roc_csv, stage_histogram, summarize, FrameFilter, GroupKey, Stage, Summary,
};
use crate::model::{load_model, predict_labels, save_model, Detector, WvadConfig};
use crate::training::{
    init_wvad, train_wevad_with, train_wvad_with, EpochStats, TrainSettings, COLLAPSE_FRACTION,
};

/// What a command did: enough to rerun it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// Resolved settings, after defaults were filled in.
    pub config: toml::Table,
}

impl RunManifest {
    fn new(command: &str, seed: Option<u64>, config: impl Serialize) -> Result<Self> {
        let config = toml::Table::try_from(config).map_err(|e| config_err!("cannot record settings: {e}"))?;
        Ok(Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            config,
        })
    }

    fn input(mut self, name: &str, path: &Path) -> Self {
        self.inputs.insert(name.into(), path.display().to_string());
        self
    }

    fn output(mut self, name: &str, path: &Path) -> Self {
        self.outputs.insert(name.into(), path.display().to_string());
        self
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("manifest fields serialize")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }
}

/// Manifest path for a single-file output: `<file>.manifest.txt`.
pub fn manifest_path_for(file: &Path) -> PathBuf {
    let mut name = file.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.txt");
    file.with_file_name(name)
}

/// Fails with a not-found I/O error naming `path` if it does not exist.
fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{}: no such file or directory", path.display()),
        )))
    }
}

/// Manifest file name inside an output directory.
pub const DIR_MANIFEST: &str = "run_manifest.txt";

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => Ok(fs::create_dir_all(p)?),
        _ => Ok(()),
    }
}

/// `synth-data`: generates the corpus described by the TOML spec at
/// `spec_path` (an empty file means all defaults) into `out_dir`.
pub fn synth_data(spec_path: &Path, out_dir: &Path, seed: u64) -> Result<Vec<Utterance>> {
    require(spec_path)?;
    let text = fs::read_to_string(spec_path)?;
    let spec: CorpusSpec = toml::from_str(&text)
        .map_err(|e| config_err!("{}: {}", spec_path.display(), e.message()))?;
    let corpus = synthesize_corpus(&spec, seed)?;
    write_corpus(out_dir, &corpus)?;
    RunManifest::new("synth-data", Some(seed), &spec)?
        .input("spec", spec_path)
        .output("corpus", out_dir)
        .write(&out_dir.join(DIR_MANIFEST))?;
    Ok(corpus)
}

fn corpus_config(corpus: &[Utterance]) -> Result<WvadConfig> {
    let rate = corpus
        .first()
        .ok_or_else(|| input_err!("corpus is empty"))?
        .noisy
        .sample_rate();
    WvadConfig::for_sample_rate(rate)
}

fn print_epoch(node: &str, s: &EpochStats) {
    eprintln!(
        "{node}epoch {:>4}  loss {:.5}  acc {:6.2}%  fb-sat {:5.1}%  ({:.1}s){}",
        s.epoch,
        s.loss,
        s.accuracy,
        100.0 * s.saturation,
        s.seconds,
        if s.saturation >= COLLAPSE_FRACTION { "  framing block collapsed" } else { "" }
    );
}

/// `train`: trains a WVAD on the corpus at `corpus_dir` and saves it to
/// `model_out`; the per-epoch report goes to `<model_out>.report.csv`.
pub fn train(corpus_dir: &Path, settings_path: &Path, model_out: &Path, quiet: bool) -> Result<Detector> {
    require(corpus_dir)?;
    require(settings_path)?;
    let settings = TrainSettings::load(settings_path)?;
    let corpus = read_corpus(corpus_dir)?;
    let config = corpus_config(&corpus)?;
    let cfg = settings.train_config();
    let mut model = init_wvad(config, cfg.seed)?;
    let report = train_wvad_with(&mut model, &corpus, &cfg, &mut |s, _| {
        if !quiet {
            print_epoch("", s);
        }
        std::ops::ControlFlow::Continue(())
    })?;
    let model = Detector::from(model);
    let report_path = report_path_for(model_out);
    create_parent(model_out)?;
    save_model(model_out, &model)?;
    fs::write(&report_path, report.to_csv())?;
    RunManifest::new("train", Some(cfg.seed), &settings)?
        .input("corpus", corpus_dir)
        .input("settings", settings_path)
        .output("model", model_out)
        .output("report", &report_path)
        .write(&manifest_path_for(model_out))?;
    Ok(model)
}

pub fn report_path_for(model: &Path) -> PathBuf {
    let mut name = model.file_name().unwrap_or_default().to_os_string();
    name.push(".report.csv");
    model.with_file_name(name)
}

/// `train-ensemble`: two-stage WEVAD training with the tree named in the
/// settings file. The report lists every Stage-1 node and then Stage 2
/// (`node` = `<ensemble>`).
pub fn train_ensemble(corpus_dir: &Path, settings_path: &Path, model_out: &Path, quiet: bool) -> Result<Detector> {
    require(corpus_dir)?;
    require(settings_path)?;
    let settings = TrainSettings::load(settings_path)?;
    let tree = settings.tree()?;
    let corpus = read_corpus(corpus_dir)?;
    let config = corpus_config(&corpus)?;
    let cfg = settings.train_config();
    let (model, report) = train_wevad_with(&config, &corpus, &tree, &cfg, &mut |node, s| {
        if !quiet {
            print_epoch(&format!("[{node}] "), s);
        }
    })?;
    let mut csv = String::from("node,epoch,loss,acc\n");
    let stages = report
        .stage1
        .iter()
        .map(|(n, r)| (n.as_str(), r))
        .chain(std::iter::once(("<ensemble>", &report.stage2)));
    for (node, r) in stages {
        for line in r.to_csv().lines().skip(1) {
            writeln!(csv, "{node},{line}").unwrap();
        }
    }
    let model = Detector::from(model);
    let report_path = report_path_for(model_out);
    create_parent(model_out)?;
    save_model(model_out, &model)?;
    fs::write(&report_path, csv)?;
    RunManifest::new("train-ensemble", Some(cfg.seed), &settings)?
        .input("corpus", corpus_dir)
        .input("settings", settings_path)
        .output("model", model_out)
        .output("report", &report_path)
        .write(&manifest_path_for(model_out))?;
    Ok(model)
}

#[derive(Serialize)]
struct EvalSettings<'a> {
    by: Vec<&'a str>,
}

/// `eval`: writes `summary.csv` (per group and `AVG`) and `roc.csv` (all
/// frames) into `out_dir`. Fails if the threshold-0 ROC point disagrees with
/// the decision rule on any utterance.
pub fn eval(model_path: &Path, corpus_dir: &Path, by: &[GroupKey], out_dir: &Path) -> Result<Summary> {
    require(model_path)?;
    require(corpus_dir)?;
    let model = load_model(model_path)?;
    let corpus = read_corpus(corpus_dir)?;
    let evals = evaluate(&model, &corpus)?;
    let summary = summarize(&evals, by)?;
    if !summary.threshold_zero_matches {
        return Err(input_err!(
            "ROC threshold 0 does not reproduce the decision rule's confusion counts"
        ));
    }
    fs::create_dir_all(out_dir)?;
    let summary_path = out_dir.join("summary.csv");
    fs::write(&summary_path, summary.to_csv())?;
    let roc_path = out_dir.join("roc.csv");
    match pooled_roc(&evals) {
        Ok(curve) => fs::write(&roc_path, roc_csv(&curve))?,
        Err(Error::UndefinedRoc(_)) => fs::write(&roc_path, "threshold,fpr,tpr\n")?,
        Err(e) => return Err(e),
    }
    RunManifest::new("eval", None, EvalSettings { by: by.iter().map(|k| k.column()).collect() })?
        .input("model", model_path)
        .input("corpus", corpus_dir)
        .output("summary", &summary_path)
        .output("roc", &roc_path)
        .write(&out_dir.join(DIR_MANIFEST))?;
    Ok(summary)
}

#[derive(Serialize)]
struct PredictSettings {
    scores: bool,
}

/// `predict`: labels one WAV file, optionally writing `y_ns,y_s` per frame.
pub fn predict(model_path: &Path, wav: &Path, labels_out: &Path, scores_out: Option<&Path>) -> Result<LabelTrack> {
    require(model_path)?;
    require(wav)?;
    let model = load_model(model_path)?;
    let audio = read_wav(wav)?;
    let config = model.config();
    if audio.sample_rate() != config.sample_rate {
        return Err(input_err!(
            "{} is {} Hz, model expects {} Hz",
            wav.display(),
            audio.sample_rate(),
            config.sample_rate
        ));
    }
    let scores = model.forward(audio.samples())?;
    let track = LabelTrack::new(config.geometry(), predict_labels(&scores));
    create_parent(labels_out)?;
    write_labels(labels_out, &track)?;
    let mut manifest = RunManifest::new("predict", None, PredictSettings { scores: scores_out.is_some() })?
        .input("model", model_path)
        .input("wav", wav)
        .output("labels", labels_out);
    if let Some(path) = scores_out {
        create_parent(path)?;
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(f, "y_ns,y_s")?;
        for p in scores.pairs() {
            writeln!(f, "{},{}", p.non_speech, p.speech)?;
        }
        f.flush()?;
        manifest = manifest.output("scores", path);
    }
    manifest.write(&manifest_path_for(labels_out))?;
    Ok(track)
}

#[derive(Serialize)]
struct PlotSettings<'a> {
    stage: &'a str,
    filter: &'a str,
    bins: usize,
}

/// `plot`: histogram of one network stage over a corpus (`hist.csv`) and the
/// ROC curve of the final output (`roc.csv`), both in `out_dir`.
pub fn plot(
    model_path: &Path,
    corpus_dir: &Path,
    stage: &str,
    filter: &str,
    bins: usize,
    out_dir: &Path,
) -> Result<crate::metrics::Histogram> {
    let parsed_stage = Stage::parse(stage)?;
    let parsed_filter = FrameFilter::parse(filter)
        .ok_or_else(|| config_err!("unknown filter '{filter}' (expected all, tn or tp)"))?;
    require(model_path)?;
    require(corpus_dir)?;
    let model = load_model(model_path)?;
    let corpus = read_corpus(corpus_dir)?;
    let hist = stage_histogram(&model, &corpus, parsed_stage, parsed_filter, bins)?;
    fs::create_dir_all(out_dir)?;
    let hist_path = out_dir.join("hist.csv");
    fs::write(&hist_path, hist.to_csv())?;
    let roc_path = out_dir.join("roc.csv");
    match pooled_roc(&evaluate(&model, &corpus)?) {
        Ok(curve) => fs::write(&roc_path, roc_csv(&curve))?,
        Err(Error::UndefinedRoc(_)) => fs::write(&roc_path, "threshold,fpr,tpr\n")?,
        Err(e) => return Err(e),
    }
    RunManifest::new("plot", None, PlotSettings { stage, filter, bins })?
        .input("model", model_path)
        .input("corpus", corpus_dir)
        .output("hist", &hist_path)
        .output("roc", &roc_path)
        .write(&out_dir.join(DIR_MANIFEST))?;
    Ok(hist)
}
