//! The `htr` command line.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use htr_core::decode::{LmMode, WbsConfig};
use htr_core::lexicon::{parse_charset, Charset, NgramLm, PrefixTree};
use htr_core::metrics::corpus_report;
use htr_core::model::{
    ablation_run, image_features, AttentionPosition, Decoder, Example, ModelConfig, Optimizer,
    ToyModel, TrainParams,
};
use htr_core::preprocess::{apply_steps, augment, AugmentParams, GrayImage, Step};
use htr_core::synthdata::{make_dataset, SynthSpec};

use crate::dataset::{self, Entry};
use crate::error::{Error, Result};
use crate::history::{self, Row};
use crate::{checkpoint, ctcmat, pgm};

#[derive(Debug, Parser)]
#[command(
    name = "htr",
    version,
    about = "Line-level handwriting recognition toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode CTCMAT probability matrices, one output line per matrix.
    Decode(DecodeArgs),
    /// Character and word error rates of a hypothesis file.
    Evaluate(EvaluateArgs),
    /// Run preprocessing steps on a PGM image.
    Preprocess(PreprocessArgs),
    /// Generate a synthetic line-image dataset.
    Synth(SynthArgs),
    /// List corpus words with their counts.
    Lexicon(LexiconArgs),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Transcribe images with a trained checkpoint.
    Predict(PredictArgs),
    /// Compare attention after the features with attention after the
    /// recurrent layer.
    Ablation(AblationArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecoderKind {
    Greedy,
    Beam,
    Wbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LmModeArg {
    Words,
    Ngrams,
}

impl From<LmModeArg> for LmMode {
    fn from(m: LmModeArg) -> Self {
        match m {
            LmModeArg::Words => LmMode::Words,
            LmModeArg::Ngrams => LmMode::NGrams,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args)]
pub struct DecoderArgs {
    #[arg(long, value_enum, default_value = "greedy")]
    pub decoder: DecoderKind,
    /// Corpus for the word beam search lexicon and language model.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = WbsConfig::default().beam_width)]
    pub beam_width: usize,
    #[arg(long, value_enum, default_value = "ngrams")]
    pub lm_mode: LmModeArg,
    /// Add-k smoothing of the bigram model.
    #[arg(long, default_value_t = WbsConfig::default().smooth)]
    pub smooth: f64,
    /// Worker threads; output order does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Print the decoder settings to standard error.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub charset: PathBuf,
    #[command(flatten)]
    pub decoder: DecoderArgs,
    #[arg(required = true)]
    pub matrices: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long = "hyp")]
    pub hypothesis: PathBuf,
    #[arg(long)]
    pub charset: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Comma-separated steps from illum, binarize, deslant; empty copies.
    #[arg(long, default_value = "illum,binarize,deslant")]
    pub steps: String,
    /// Apply random augmentation with this seed after the steps.
    #[arg(long)]
    pub augment_seed: Option<u64>,
    /// Print the estimated slant when deslanting.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for images, manifest, charset and corpus.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "abc ")]
    pub alphabet: String,
    #[arg(long, default_value_t = 1)]
    pub min_len: usize,
    #[arg(long, default_value_t = 5)]
    pub max_len: usize,
    #[arg(long, default_value_t = 1)]
    pub scale: usize,
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
}

#[derive(Debug, Args)]
pub struct LexiconArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub charset: PathBuf,
    /// Only words starting with this prefix.
    #[arg(long, default_value = "")]
    pub prefix: String,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Charset file; defaults to charset.txt in the training directory.
    #[arg(long)]
    pub charset: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub strip: usize,
    #[arg(long, default_value_t = 16)]
    pub features: usize,
    #[arg(long, default_value_t = 24)]
    pub hidden: usize,
    /// Longest accepted sequence; defaults to the longest in the data.
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long, default_value = "after_features", value_parser = parse_position)]
    pub position: AttentionPosition,
    #[arg(long)]
    pub bidirectional: bool,
    /// Preprocessing applied to every image before feature extraction.
    #[arg(long, default_value = "")]
    pub preprocess: String,
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, value_enum, default_value = "adam")]
    pub optimizer: OptimizerArg,
    /// Global gradient-norm limit; 0 disables clipping.
    #[arg(long, default_value_t = 5.0)]
    pub clip: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TrainingArgs {
    fn params(&self) -> TrainParams {
        TrainParams {
            epochs: self.epochs,
            batch: self.batch,
            lr: self.lr,
            clip_norm: (self.clip > 0.0).then_some(self.clip),
            optimizer: match self.optimizer {
                OptimizerArg::Adam => Optimizer::adam(),
                OptimizerArg::Sgd => Optimizer::Sgd,
            },
            seed: self.seed,
            ..TrainParams::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss curve CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Transcribe every image of a dataset directory in manifest order.
    #[arg(long, conflicts_with = "images")]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub decoder: DecoderArgs,
    pub images: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblationArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    /// Loss curve CSV for every seed and position.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

fn parse_position(s: &str) -> Result<AttentionPosition, String> {
    AttentionPosition::parse(s).map_err(|e| e.to_string())
}

fn parse_steps(s: &str) -> Result<Vec<Step>> {
    s.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            Step::parse(s).map_err(|_| Error::Usage(format!("unknown preprocessing step {s:?}")))
        })
        .collect()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(Error::io(path))
}

fn read_charset(path: &Path) -> Result<Charset> {
    Ok(parse_charset(&read_text(path)?)?)
}

/// Applies `f` to every item on up to `jobs` threads, preserving order.
fn par_map<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> Result<R> + Sync,
) -> Result<Vec<R>> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Result<Vec<R>>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().expect("worker panicked")?);
        }
        Ok(out)
    })
}

/// Lexicon and language model for word beam search.
struct WbsResources {
    tree: PrefixTree,
    lm: NgramLm,
}

impl DecoderArgs {
    fn check(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::Usage("--jobs must be at least 1".into()));
        }
        if self.decoder != DecoderKind::Greedy && self.beam_width == 0 {
            return Err(Error::Usage("--beam-width must be at least 1".into()));
        }
        if self.decoder == DecoderKind::Wbs {
            if self.corpus.is_none() {
                return Err(Error::Usage("--decoder wbs needs --corpus".into()));
            }
            if !(self.smooth > 0.0 && self.smooth.is_finite()) {
                return Err(Error::Usage("--smooth must be positive".into()));
            }
        }
        Ok(())
    }

    fn resources(&self, charset: &Charset, err: &mut dyn Write) -> Result<Option<WbsResources>> {
        self.check()?;
        let Some(path) = self
            .corpus
            .as_ref()
            .filter(|_| self.decoder == DecoderKind::Wbs)
        else {
            return Ok(None);
        };
        if self.verbose {
            let mode = match self.lm_mode {
                LmModeArg::Words => "words",
                LmModeArg::Ngrams => "ngrams",
            };
            let _ = writeln!(
                err,
                "beam_width={} mode={mode} smooth={}",
                self.beam_width, self.smooth
            );
        }
        let corpus = read_text(path)?;
        let tree = PrefixTree::from_corpus(&corpus, charset.wordchars());
        if tree.is_empty() {
            return Err(Error::Format(format!(
                "{}: corpus has no words",
                path.display()
            )));
        }
        let lm = NgramLm::train(&corpus, charset.wordchars(), self.smooth)?;
        Ok(Some(WbsResources { tree, lm }))
    }

    fn decoder<'a>(&self, res: Option<&'a WbsResources>) -> Decoder<'a> {
        match (self.decoder, res) {
            (DecoderKind::Beam, _) => Decoder::Beam {
                width: self.beam_width,
            },
            (DecoderKind::Wbs, Some(r)) => Decoder::Wbs {
                tree: &r.tree,
                lm: Some(&r.lm),
                mode: self.lm_mode.into(),
                width: self.beam_width,
            },
            _ => Decoder::Greedy,
        }
    }
}

fn cmd_decode(args: &DecodeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let charset = read_charset(&args.charset)?;
    let res = args.decoder.resources(&charset, err)?;
    let decoder = args.decoder.decoder(res.as_ref());
    let lines = par_map(&args.matrices, args.decoder.jobs, |path| {
        let m = ctcmat::read(path)?;
        decoder.decode(&m, &charset).map_err(|e| match e {
            htr_core::Error::InvalidArgument(msg) => {
                Error::Format(format!("{}: {msg}", path.display()))
            }
            other => other.into(),
        })
    })?;
    emit_lines(out, &lines)
}

fn emit_lines(out: &mut dyn Write, lines: &[String]) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    out.write_all(text.as_bytes())
        .map_err(Error::io("<stdout>"))
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let charset = read_charset(&args.charset)?;
    let refs = read_text(&args.reference)?;
    let hyps = read_text(&args.hypothesis)?;
    let refs: Vec<&str> = refs.lines().collect();
    let hyps: Vec<&str> = hyps.lines().collect();
    if refs.len() != hyps.len() {
        return Err(Error::Format(format!(
            "{} reference lines but {} hypothesis lines",
            refs.len(),
            hyps.len()
        )));
    }
    let pairs: Vec<(&str, &str)> = refs.into_iter().zip(hyps).collect();
    let report = corpus_report(&pairs, charset.wordchars())?;
    let mut text = String::from("line\tcer\twer\n");
    for (i, line) in report.lines.iter().enumerate() {
        let _ = writeln!(
            text,
            "{}\t{}\t{}",
            i + 1,
            fmt_rate(line.cer()),
            fmt_rate(line.wer())
        );
    }
    let _ = writeln!(text, "all\t{:.4}\t{:.4}", report.cer(), report.wer());
    out.write_all(text.as_bytes())
        .map_err(Error::io("<stdout>"))
}

fn cmd_preprocess(args: &PreprocessArgs, err: &mut dyn Write) -> Result<()> {
    let steps = parse_steps(&args.steps)?;
    let img = pgm::read(&args.input)?;
    if args.verbose && steps.contains(&Step::Deslant) {
        let mut before = img.clone();
        for step in steps.iter().take_while(|s| **s != Step::Deslant) {
            before = apply_steps(&before, &[*step])?;
        }
        let slant = htr_core::preprocess::estimate_slant(&before);
        let _ = writeln!(err, "slant={slant}");
    }
    let mut img = apply_steps(&img, &steps)?;
    if let Some(seed) = args.augment_seed {
        img = augment(&img, seed, &AugmentParams::default())?;
    }
    pgm::write(&args.output, &img)
}

pub const CHARSET_FILE: &str = "charset.txt";
pub const CORPUS_FILE: &str = "corpus.txt";

fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let mut alphabet: Vec<char> = Vec::new();
    for c in args.alphabet.chars() {
        if !alphabet.contains(&c) {
            alphabet.push(c);
        }
    }
    let spec = SynthSpec {
        alphabet: alphabet.clone(),
        min_len: args.min_len,
        max_len: args.max_len,
        scale: args.scale,
        noise: args.noise,
        seed: args.seed,
    };
    spec.validate().map_err(|e| Error::Usage(e.to_string()))?;
    if args.count == 0 {
        return Err(Error::Usage("--count must be at least 1".into()));
    }
    let wordchars: Vec<char> = alphabet.iter().copied().filter(|c| *c != ' ').collect();
    let charset = Charset::new(alphabet, wordchars)?;
    let samples = make_dataset(args.count, &spec)?;
    let entries = dataset::write_samples(&args.out, &samples)?;
    let cs_path = args.out.join(CHARSET_FILE);
    fs::write(&cs_path, charset.to_file_string()).map_err(Error::io(&cs_path))?;
    let corpus: String = entries.iter().map(|e| format!("{}\n", e.label)).collect();
    let corpus_path = args.out.join(CORPUS_FILE);
    fs::write(&corpus_path, corpus).map_err(Error::io(&corpus_path))?;
    let _ = writeln!(
        out,
        "wrote {} samples to {}",
        entries.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_lexicon(args: &LexiconArgs, out: &mut dyn Write) -> Result<()> {
    let charset = read_charset(&args.charset)?;
    let corpus = read_text(&args.corpus)?;
    let tree = PrefixTree::from_corpus(&corpus, charset.wordchars());
    if tree.is_empty() {
        return Err(Error::Format(format!(
            "{}: corpus has no words",
            args.corpus.display()
        )));
    }
    let lm = NgramLm::train(&corpus, charset.wordchars(), WbsConfig::default().smooth)?;
    let mut text = String::from("word\tcount\n");
    for w in tree.words_with_prefix(&args.prefix) {
        let _ = writeln!(text, "{w}\t{}", lm.count(&w));
    }
    out.write_all(text.as_bytes())
        .map_err(Error::io("<stdout>"))
}

/// A dataset loaded, preprocessed and sliced into features.
struct Prepared {
    entries: Vec<Entry>,
    features: Vec<htr_core::numkit::Mat2>,
    height: usize,
}

fn prepare(dir: &Path, steps: &[Step], strip: usize) -> Result<Prepared> {
    let loaded = dataset::load(dir)?;
    let height = loaded[0].1.height();
    let mut entries = Vec::with_capacity(loaded.len());
    let mut features = Vec::with_capacity(loaded.len());
    for (e, img) in loaded {
        if img.height() != height {
            return Err(Error::Format(format!(
                "{}: height {} differs from the dataset's {height}",
                dir.join(&e.file).display(),
                img.height()
            )));
        }
        features.push(image_features(&apply_steps(&img, steps)?, strip)?);
        entries.push(e);
    }
    Ok(Prepared {
        entries,
        features,
        height,
    })
}

fn examples(p: &Prepared, charset: &Charset, dir: &Path) -> Result<Vec<Example>> {
    p.entries
        .iter()
        .zip(&p.features)
        .map(|(e, x)| {
            let labels = charset
                .encode(&e.label)
                .map_err(|err| Error::Format(format!("{}: {}: {err}", dir.display(), e.file)))?;
            Ok(Example {
                features: x.clone(),
                labels,
            })
        })
        .collect()
}

/// Builds the untrained model and the two example sets.
fn setup(
    train_dir: &Path,
    val_dir: &Path,
    args: &ModelArgs,
    seed: u64,
) -> Result<(ToyModel, Vec<Example>, Vec<Example>)> {
    let steps = parse_steps(&args.preprocess)?;
    if args.strip == 0 {
        return Err(Error::Usage("--strip must be at least 1".into()));
    }
    let charset = read_charset(
        &args
            .charset
            .clone()
            .unwrap_or_else(|| train_dir.join(CHARSET_FILE)),
    )?;
    let train = prepare(train_dir, &steps, args.strip)?;
    let val = prepare(val_dir, &steps, args.strip)?;
    if val.height != train.height {
        return Err(Error::Format(format!(
            "validation height {} differs from training height {}",
            val.height, train.height
        )));
    }
    let longest = train
        .features
        .iter()
        .chain(&val.features)
        .map(|x| x.rows())
        .max()
        .unwrap_or(1);
    let config = ModelConfig {
        image_height: train.height,
        strip: args.strip,
        features: args.features,
        hidden: args.hidden,
        max_steps: args.max_steps.unwrap_or(longest),
        position: args.position,
        bidirectional: args.bidirectional,
        preprocess: steps,
    };
    config.validate().map_err(|e| Error::Usage(e.to_string()))?;
    if longest > config.max_steps {
        return Err(Error::Usage(format!(
            "--max-steps {} is shorter than the longest sequence ({longest})",
            config.max_steps
        )));
    }
    let train_ex = examples(&train, &charset, train_dir)?;
    let val_ex = examples(&val, &charset, val_dir)?;
    let model = ToyModel::init(charset, config, seed)?;
    Ok((model, train_ex, val_ex))
}

fn check_training(params: &TrainParams) -> Result<()> {
    params.validate().map_err(|e| Error::Usage(e.to_string()))
}

fn cmd_train(args: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let params = args.training.params();
    check_training(&params)?;
    let (model, train_ex, val_ex) = setup(&args.train, &args.val, &args.model, params.seed)?;
    let outcome = htr_core::model::train_with(&model, &train_ex, &val_ex, &params, |rec| {
        if rec.split == htr_core::model::Split::Val {
            let _ = writeln!(
                err,
                "epoch {} val_loss {:.6} lr {}",
                rec.epoch, rec.loss, rec.lr
            );
        }
    })?;
    checkpoint::save(&args.out, &outcome.model)?;
    if let Some(path) = &args.history {
        let rows: Vec<Row> = outcome
            .history
            .iter()
            .map(|&record| Row {
                seed: params.seed,
                position: args.model.position,
                record,
            })
            .collect();
        fs::write(path, history::to_csv(&rows)).map_err(Error::io(path))?;
    }
    let mut text = String::new();
    let _ = writeln!(text, "epochs_run\t{}", outcome.epochs_run);
    let _ = writeln!(text, "best_epoch\t{}", outcome.best_epoch);
    let _ = writeln!(text, "best_val_loss\t{:.6}", outcome.best_val_loss);
    let _ = writeln!(text, "stopped_early\t{}", outcome.stopped_early);
    let _ = writeln!(text, "skipped_train\t{}", outcome.skipped_train.len());
    let _ = writeln!(text, "skipped_val\t{}", outcome.skipped_val.len());
    out.write_all(text.as_bytes())
        .map_err(Error::io("<stdout>"))
}

fn cmd_predict(args: &PredictArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    args.decoder.check()?;
    let model = checkpoint::load(&args.checkpoint)?;
    let paths: Vec<PathBuf> = match &args.dataset {
        Some(dir) => dataset::read_manifest(dir)?
            .into_iter()
            .map(|e| dir.join(e.file))
            .collect(),
        None if args.images.is_empty() => {
            return Err(Error::Usage("give image paths or --dataset".into()))
        }
        None => args.images.clone(),
    };
    let res = args.decoder.resources(model.charset(), err)?;
    let decoder = args.decoder.decoder(res.as_ref());
    let lines = par_map(&paths, args.decoder.jobs, |path| {
        let img: GrayImage = pgm::read(path)?;
        model
            .predict(&img, &decoder)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    })?;
    emit_lines(out, &lines)
}

fn cmd_ablation(args: &AblationArgs, out: &mut dyn Write) -> Result<()> {
    let params = args.training.params();
    check_training(&params)?;
    if args.seeds.is_empty() {
        return Err(Error::Usage("--seeds needs at least one seed".into()));
    }
    let (model, train_ex, val_ex) = setup(&args.train, &args.val, &args.model, params.seed)?;
    let report = ablation_run(
        model.charset(),
        model.config(),
        &train_ex,
        &val_ex,
        &params,
        &args.seeds,
    )?;
    let rows: Vec<Row> = report
        .history
        .iter()
        .map(|&(seed, position, record)| Row {
            seed,
            position,
            record,
        })
        .collect();
    fs::write(&args.out, history::to_csv(&rows)).map_err(Error::io(&args.out))?;

    let mut text = String::from(
        "seed\tposition\tbest_val_loss\tbest_epoch\tepochs_run\tepochs_to_threshold\n",
    );
    for r in &report.runs {
        let reached = r
            .epochs_to_threshold
            .map_or_else(|| "-".to_string(), |e| e.to_string());
        let _ = writeln!(
            text,
            "{}\t{}\t{:.6}\t{}\t{}\t{reached}",
            r.seed,
            r.position.name(),
            r.best_val_loss,
            r.best_epoch,
            r.epochs_run
        );
    }
    let af = report.mean_epochs_to_threshold(AttentionPosition::AfterFeatures);
    let ar = report.mean_epochs_to_threshold(AttentionPosition::AfterRecurrent);
    let _ = writeln!(text, "mean_epochs_to_threshold\tafter_features\t{af:.2}");
    let _ = writeln!(text, "mean_epochs_to_threshold\tafter_recurrent\t{ar:.2}");
    let _ = writeln!(
        text,
        "after_features_first\t{}/{}",
        report.seeds_features_first(),
        report.thresholds.len()
    );
    out.write_all(text.as_bytes())
        .map_err(Error::io("<stdout>"))
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Decode(a) => cmd_decode(a, out, err),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Preprocess(a) => cmd_preprocess(a, err),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Lexicon(a) => cmd_lexicon(a, out),
        Command::Train(a) => cmd_train(a, out, err),
        Command::Predict(a) => cmd_predict(a, out, err),
        Command::Ablation(a) => cmd_ablation(a, out),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return e.exit_code();
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
