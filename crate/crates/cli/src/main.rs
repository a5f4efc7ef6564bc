mod config;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use handmove::analysis::{analyze, temporal_accuracy, TOP_K};
use handmove::edf::{sha256_file, verify_manifest, Manifest};
use handmove::features::{featurize_dir, FeatureConfig, FeatureSet, PowerDenominator, Taper};
use handmove::harness::{
    evaluate, roc_auc, run_experiment, score_set, segment_size_sweep, train_full, ExperimentConfig, Method,
    Scheme, SEGMENT_SIZES, THRESHOLD,
};
use handmove::nn::{load_checkpoint, save_checkpoint, AttentionKind};
use handmove::synth::write_dataset;

use config::FileConfig;

/// Manifest of the physical-movement runs, checked in at the repository root.
const DEFAULT_MANIFEST: &str = include_str!("../../../manifests/eegmmidb.manifest");
const FEATURES_FILE: &str = "features.bin";

/// EEG left/right hand-movement classification: EDF ingestion, features,
/// attention-LSTM training and cross-validated evaluation.
#[derive(Debug, Parser)]
#[command(name = "handmove", version, max_term_width = 100)]
struct Cli {
    /// Seed every random draw derives from [default: 0, or the config's]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for every file a command writes
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// JSON config file; flags take precedence over its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for files, folds and trees
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Download the dataset files listed in a manifest into --out
    Fetch(FetchArgs),
    /// Check a data directory against a manifest
    Verify(VerifyArgs),
    /// Build a feature store from EDF recordings
    Featurize(FeaturizeArgs),
    /// Cross-validate a model on a feature store
    Train(TrainArgs),
    /// Score a saved model on a feature store
    Evaluate(EvaluateArgs),
    /// Cross-validate at several segment sizes
    Sweep(SweepArgs),
    /// Feature importance, significance, sensor ranking and temporal accuracy
    Analyze(AnalyzeArgs),
    /// Write a synthetic dataset with a planted class effect
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct FetchArgs {
    /// Manifest to fetch [default: the built-in movement-run manifest]
    #[arg(long)]
    manifest: Option<PathBuf>,

    /// Override the manifest's base URL
    #[arg(long)]
    base_url: Option<String>,

    /// List what would be downloaded without touching the network
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Data directory to check
    #[arg(long)]
    data: PathBuf,

    /// Manifest [default: <data>/MANIFEST if present, else the built-in one]
    #[arg(long)]
    manifest: Option<PathBuf>,

    /// Write a manifest with the digests found on disk to --out/MANIFEST
    #[arg(long)]
    pin: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DenominatorArg {
    Passband,
    Bandsum,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaperArg {
    Rectangular,
    Hann,
}

#[derive(Debug, Args)]
struct FeatureArgs {
    /// Segment length in seconds (window = length/4, hop = window/2)
    #[arg(long)]
    segment: Option<f64>,

    /// Mains notch frequency, Hz
    #[arg(long)]
    notch_hz: Option<f64>,

    /// Band-pass lower edge, Hz
    #[arg(long)]
    band_lo: Option<f64>,

    /// Band-pass upper edge, Hz
    #[arg(long)]
    band_hi: Option<f64>,

    /// Butterworth band-pass order
    #[arg(long)]
    filter_order: Option<usize>,

    /// Relative band power denominator
    #[arg(long, value_enum)]
    denominator: Option<DenominatorArg>,

    /// Periodogram taper
    #[arg(long, value_enum)]
    taper: Option<TaperArg>,
}

impl FeatureArgs {
    fn apply(&self, cfg: &mut FeatureConfig) {
        if let Some(s) = self.segment {
            cfg.segment_len = s;
        }
        let f = &mut cfg.filter;
        f.notch_hz = self.notch_hz.unwrap_or(f.notch_hz);
        f.band_lo = self.band_lo.unwrap_or(f.band_lo);
        f.band_hi = self.band_hi.unwrap_or(f.band_hi);
        f.order = self.filter_order.unwrap_or(f.order);
        if let Some(d) = self.denominator {
            cfg.spectral.denominator = match d {
                DenominatorArg::Passband => PowerDenominator::Passband,
                DenominatorArg::Bandsum => PowerDenominator::BandSum,
            };
        }
        if let Some(t) = self.taper {
            cfg.spectral.taper = match t {
                TaperArg::Rectangular => Taper::Rectangular,
                TaperArg::Hann => Taper::Hann,
            };
        }
    }
}

#[derive(Debug, Args)]
struct FeaturizeArgs {
    /// Directory searched recursively for S###R##.edf files
    #[arg(long)]
    data: PathBuf,

    /// Segment starts after each cue, seconds, comma-separated
    #[arg(long, value_delimiter = ',')]
    offsets: Option<Vec<f64>>,

    #[command(flatten)]
    feature: FeatureArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Lstm,
    Logreg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AttentionArg {
    Scalar,
    Context,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Validation scheme; also selects the default hyper-parameters
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,

    /// Classifier: the attention LSTM or the logistic-regression baseline
    #[arg(long, value_enum)]
    method: Option<MethodArg>,

    /// LSTM units per layer
    #[arg(long)]
    hidden: Option<usize>,

    /// Stacked LSTM layers
    #[arg(long)]
    depth: Option<usize>,

    /// Training epochs
    #[arg(long)]
    epochs: Option<usize>,

    /// Adam learning rate
    #[arg(long)]
    lr: Option<f64>,

    /// Minibatch size
    #[arg(long)]
    batch_size: Option<usize>,

    /// L2 coefficient on the LSTM weights
    #[arg(long)]
    l2: Option<f64>,

    /// Dropout rates: input, then after each LSTM layer, comma-separated
    #[arg(long, value_delimiter = ',')]
    dropout: Option<Vec<f64>>,

    /// Attention score form
    #[arg(long, value_enum)]
    attention: Option<AttentionArg>,

    /// Use only these subjects, comma-separated
    #[arg(long, value_delimiter = ',')]
    subjects: Option<Vec<u16>>,

    /// Permute all labels first (chance-level control)
    #[arg(long)]
    label_shuffle: bool,
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse()
}

impl ModelArgs {
    fn experiment(&self, file: &FileConfig, seed: u64) -> Result<ExperimentConfig> {
        let mut cfg = file.experiment(self.scheme)?;
        cfg.seed = seed;
        if let Some(m) = self.method {
            cfg.method = match m {
                MethodArg::Lstm => Method::Lstm,
                MethodArg::Logreg => Method::Logreg,
            };
        }
        let m = &mut cfg.model;
        if let Some(d) = self.depth {
            m.depth = d;
            if self.dropout.is_none() && m.dropout.len() != d + 1 {
                // keep the input rate, reuse the last layer rate for new layers
                let last = *m.dropout.last().unwrap_or(&0.0);
                m.dropout.resize(d + 1, last);
            }
        }
        m.hidden = self.hidden.unwrap_or(m.hidden);
        m.epochs = self.epochs.unwrap_or(m.epochs);
        m.lr = self.lr.unwrap_or(m.lr);
        m.batch_size = self.batch_size.unwrap_or(m.batch_size);
        m.l2 = self.l2.unwrap_or(m.l2);
        if let Some(d) = &self.dropout {
            m.dropout = d.clone();
        }
        if let Some(a) = self.attention {
            m.attention = match a {
                AttentionArg::Scalar => AttentionKind::Scalar,
                AttentionArg::Context => AttentionKind::Context,
            };
        }
        if self.subjects.is_some() {
            cfg.subjects = self.subjects.clone();
        }
        cfg.label_shuffle |= self.label_shuffle;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Feature store written by `featurize`
    #[arg(long)]
    features: PathBuf,

    /// Also fit one network on every segment and write --out/model.ckpt
    #[arg(long)]
    save_model: bool,

    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Checkpoint written by `train --save-model`
    #[arg(long)]
    checkpoint: PathBuf,

    /// Feature store to score (offset-0 segments)
    #[arg(long)]
    features: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Directory searched recursively for S###R##.edf files
    #[arg(long)]
    data: PathBuf,

    /// Segment sizes in seconds, comma-separated
    #[arg(long, value_delimiter = ',', default_values_t = SEGMENT_SIZES.to_vec())]
    sizes: Vec<f64>,

    #[command(flatten)]
    feature: FeatureArgs,

    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Feature store written by `featurize`
    #[arg(long)]
    features: PathBuf,

    /// Trees in the importance forest
    #[arg(long)]
    trees: Option<usize>,

    /// Maximum tree depth
    #[arg(long)]
    max_depth: Option<usize>,

    /// Number of top significant features kept
    #[arg(long, default_value_t = TOP_K)]
    top_k: usize,

    /// Also compute held-out accuracy at every offset in the store
    #[arg(long)]
    temporal: bool,

    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Number of subjects
    #[arg(long)]
    subjects: Option<usize>,

    /// Movement trials per run
    #[arg(long)]
    trials_per_run: Option<usize>,

    /// Relative alpha amplitude change on designated pairs, in [0, 1)
    #[arg(long)]
    effect: Option<f64>,

    /// White-noise standard deviation, µV
    #[arg(long)]
    noise: Option<f64>,

    /// Seconds between the cue and the start of the effect
    #[arg(long)]
    onset_delay: Option<f64>,

    /// Montage pair indices carrying the effect, comma-separated
    #[arg(long, value_delimiter = ',')]
    pairs: Option<Vec<usize>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global()
        .context("starting the worker pool")?;
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = match cli.seed {
        Some(s) => s,
        None => file.seed()?.unwrap_or(0),
    };
    let out = cli.out.as_path();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    match cli.command {
        Command::Fetch(a) => fetch(&a, out),
        Command::Verify(a) => verify(&a, out),
        Command::Featurize(a) => {
            let mut cfg = file.features()?;
            a.feature.apply(&mut cfg);
            if let Some(o) = &a.offsets {
                cfg.offsets = o.clone();
            }
            let set = featurize_dir(&a.data, &cfg)?;
            set.save(&out.join(FEATURES_FILE))?;
            write_json(&out.join("features.json"), &StoreSummary::of(&set))?;
            log::info!("{} tensors of {}x{}", set.tensors.len(), set.meta.n_steps, set.meta.dim);
            Ok(())
        }
        Command::Train(a) => {
            let set = FeatureSet::load(&a.features)?;
            let cfg = a.model.experiment(&file, seed)?;
            write_json(&out.join("config.json"), &cfg)?;
            let rep = run_experiment(&cfg, &set)?;
            rep.write(out)?;
            log_aggregate("cross-validated", &rep.aggregate.accuracy);
            if a.save_model {
                if cfg.method != Method::Lstm {
                    bail!("--save-model needs --method lstm");
                }
                let model = train_full(&cfg, &set)?;
                save_checkpoint(&out.join("model.ckpt"), &model, None)?;
            }
            Ok(())
        }
        Command::Evaluate(a) => {
            let ck = load_checkpoint(&a.checkpoint)?;
            let set = FeatureSet::load(&a.features)?;
            let preds = score_set(&ck.model, &set)?;
            if preds.is_empty() {
                bail!("{} holds no offset-0 segments", a.features.display());
            }
            let report = EvaluateReport {
                threshold: THRESHOLD,
                n: preds.len(),
                metrics: evaluate(&preds, THRESHOLD),
                auc: roc_auc(&preds).ok().map(|r| r.auc),
            };
            write_json(&out.join("metrics.json"), &report)?;
            if let Ok(roc) = roc_auc(&preds) {
                write_text(&out.join("roc.csv"), &roc.to_csv())?;
            }
            let mut csv = String::from("p,y\n");
            for (p, y) in &preds {
                csv.push_str(&format!("{p},{y}\n"));
            }
            write_text(&out.join("predictions.csv"), &csv)?;
            log::info!("accuracy {:.4} on {} segments", report.metrics.accuracy, report.n);
            Ok(())
        }
        Command::Sweep(a) => {
            let mut feat = file.features()?;
            a.feature.apply(&mut feat);
            let cfg = a.model.experiment(&file, seed)?;
            let (table, reports) = segment_size_sweep(&cfg, &feat, &a.data, &a.sizes)?;
            for (size, rep) in a.sizes.iter().zip(&reports) {
                rep.write(&out.join(format!("segment_{size}")))?;
            }
            write_json(&out.join("sweep.json"), &table)?;
            write_text(&out.join("sweep.csv"), &table.to_csv())?;
            write_text(&out.join("sweep.md"), &table.to_markdown())?;
            print!("{}", table.to_markdown());
            Ok(())
        }
        Command::Analyze(a) => {
            let set = FeatureSet::load(&a.features)?;
            let mut forest = file.forest()?;
            forest.seed = seed;
            forest.n_trees = a.trees.unwrap_or(forest.n_trees);
            forest.max_depth = a.max_depth.unwrap_or(forest.max_depth);
            let rep = analyze(&set, &forest, a.top_k)?;
            rep.write(out)?;
            if rep.top.short {
                log::warn!("only {} features pass the corrected test", rep.top.features.len());
            }
            if a.temporal {
                let cfg = a.model.experiment(&file, seed)?;
                let curve = temporal_accuracy(&cfg, &set)?;
                write_json(&out.join("temporal.json"), &curve)?;
                write_text(&out.join("temporal.csv"), &curve.to_csv())?;
            }
            Ok(())
        }
        Command::Synth(a) => {
            let mut spec = file.synth()?;
            spec.seed = seed;
            spec.n_subjects = a.subjects.unwrap_or(spec.n_subjects);
            spec.trials_per_run = a.trials_per_run.unwrap_or(spec.trials_per_run);
            spec.effect = a.effect.unwrap_or(spec.effect);
            spec.noise = a.noise.unwrap_or(spec.noise);
            spec.onset_delay = a.onset_delay.unwrap_or(spec.onset_delay);
            if let Some(p) = &a.pairs {
                spec.pairs = p.clone();
            }
            let m = write_dataset(&spec, out)?;
            log::info!("{} recordings written to {}", m.entries.len(), out.display());
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct StoreSummary {
    n_tensors: usize,
    subjects: Vec<u16>,
    n_steps: usize,
    dim: usize,
    pairs: Vec<String>,
    config: FeatureConfig,
}

impl StoreSummary {
    fn of(set: &FeatureSet) -> Self {
        Self {
            n_tensors: set.tensors.len(),
            subjects: set.subjects(),
            n_steps: set.meta.n_steps,
            dim: set.meta.dim,
            pairs: set.meta.pairs.clone(),
            config: set.meta.config.clone(),
        }
    }
}

#[derive(Serialize)]
struct EvaluateReport {
    threshold: f64,
    n: usize,
    metrics: handmove::harness::Metrics,
    auc: Option<f64>,
}

fn log_aggregate(what: &str, acc: &handmove::harness::MeanSd) {
    log::info!("{what} accuracy {:.2} ± {:.2} %", 100.0 * acc.mean, 100.0 * acc.sd);
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

fn load_manifest(path: Option<&Path>) -> Result<Manifest> {
    match path {
        Some(p) => Ok(Manifest::load(p)?),
        None => Ok(Manifest::parse(DEFAULT_MANIFEST)?),
    }
}

fn fetch(a: &FetchArgs, out: &Path) -> Result<()> {
    let manifest = load_manifest(a.manifest.as_deref())?;
    let base = a
        .base_url
        .clone()
        .or(manifest.base_url.clone())
        .context("no base URL: the manifest has none and --base-url was not given")?;
    let base = base.trim_end_matches('/');
    let mut todo = Vec::new();
    for e in &manifest.entries {
        let dest = out.join(&e.path);
        let present = dest.is_file()
            && match &e.digest {
                Some(d) => &sha256_file(&dest)? == d,
                None => true,
            };
        if !present {
            todo.push(e);
        }
    }
    log::info!("{} of {} files to download", todo.len(), manifest.entries.len());
    if a.dry_run {
        let mut stdout = std::io::stdout().lock();
        for e in &todo {
            writeln!(stdout, "{base}/{}", e.path)?;
        }
        return Ok(());
    }
    let client = reqwest::blocking::Client::builder()
        .timeout(std::time::Duration::from_secs(300))
        .build()?;
    for e in todo {
        let url = format!("{base}/{}", e.path);
        let dest = out.join(&e.path);
        if let Some(parent) = dest.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let bytes = client
            .get(&url)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.bytes())
            .with_context(|| format!("downloading {url}"))?;
        let part = dest.with_extension("part");
        std::fs::write(&part, &bytes).with_context(|| format!("writing {}", part.display()))?;
        if let Some(d) = &e.digest {
            let got = sha256_file(&part)?;
            if &got != d {
                std::fs::remove_file(&part).ok();
                bail!("{}: digest {got} does not match the manifest's {d}", e.path);
            }
        }
        std::fs::rename(&part, &dest)?;
        log::info!("fetched {}", e.path);
    }
    Ok(())
}

fn verify(a: &VerifyArgs, out: &Path) -> Result<()> {
    let manifest_path = match &a.manifest {
        Some(p) => p.clone(),
        None if a.data.join("MANIFEST").is_file() => a.data.join("MANIFEST"),
        None => {
            let p = out.join("manifest.builtin");
            write_text(&p, DEFAULT_MANIFEST)?;
            p
        }
    };
    let report = verify_manifest(&a.data, &manifest_path)?;
    write_json(&out.join("verify.json"), &report)?;
    eprintln!("{}", report.summary());
    if a.pin {
        if !report.missing.is_empty() || !report.corrupt.is_empty() {
            bail!("cannot pin: files are missing or corrupt");
        }
        let mut m = Manifest::load(&manifest_path)?;
        for e in &mut m.entries {
            e.digest = Some(sha256_file(&a.data.join(&e.path))?);
        }
        write_text(&out.join("MANIFEST"), &m.render())?;
        return Ok(());
    }
    if !report.is_ok() {
        bail!("verification failed: {}", report.summary().lines().next().unwrap_or_default());
    }
    Ok(())
}

