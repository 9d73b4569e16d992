use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mmml::dataset::{gen_synthetic, gen_trials, load_embeddings_auto, load_trials, write_embeddings, write_trials};
use mmml::mmml::{project, train};
use mmml::sampler::BatchesPerEpoch;
use mmml::{
    det_points, error_curve, fuse, score_trials, train_lda, Dataset, EmbeddingFormat, FusionConfig, Init, LdaConfig,
    Projection, SamplerConfig, ScoreSet, SynthConfig, TrainConfig,
};

/// Cosine-margin metric learning, LDA, scoring and evaluation for speaker embeddings.
#[derive(Parser)]
#[command(name = "mmml", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic speaker corpus and, optionally, a trial list.
    GenSynth(GenSynth),
    /// Train a max-margin cosine projection.
    TrainMmml(TrainMmml),
    /// Train a Fisher LDA projection.
    TrainLda(TrainLda),
    /// Apply projections to an embedding file.
    Project(ProjectCmd),
    /// Score trials by cosine after an optional chain of projections.
    Score(Score),
    /// Linearly fuse two score files.
    Fuse(Fuse),
    /// Compute the EER and, optionally, DET points.
    Eval(Eval),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Binary,
}

impl From<Format> for EmbeddingFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Tsv => EmbeddingFormat::Tsv,
            Format::Binary => EmbeddingFormat::Binary,
        }
    }
}

/// `.tsv` and `.txt` files are text, everything else binary.
fn format_for(path: &Path, explicit: Option<Format>) -> EmbeddingFormat {
    explicit.map(Into::into).unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some("tsv" | "txt") => EmbeddingFormat::Tsv,
        _ => EmbeddingFormat::Binary,
    })
}

#[derive(Args)]
struct GenSynth {
    #[arg(long, default_value_t = 200)]
    speakers: usize,
    #[arg(long, default_value_t = 10)]
    utts: usize,
    #[arg(long, default_value_t = 400)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    speaker_scatter: f64,
    #[arg(long, default_value_t = 1.0)]
    channel_scatter: f64,
    #[arg(long, default_value_t = 200)]
    nuisance_dims: usize,
    #[arg(long, default_value_t = 10.0)]
    nuisance_scale: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Embedding output file.
    #[arg(long)]
    out: PathBuf,
    /// Output format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Also write a trial list here.
    #[arg(long)]
    trials_out: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    targets: usize,
    #[arg(long, default_value_t = 8000)]
    nontargets: usize,
    #[arg(long, default_value_t = 11)]
    trial_seed: u64,
}

fn load_dataset(path: &Path, length_norm: bool) -> Result<Dataset> {
    let d = load_embeddings_auto(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(if length_norm { d.length_normalized() } else { d })
}

#[derive(Args)]
struct DevInput {
    /// Development embedding file (TSV or EMB1 binary, detected automatically).
    #[arg(long)]
    dev: PathBuf,
    /// Scale every vector to unit length after loading.
    #[arg(long)]
    length_norm: bool,
}

impl DevInput {
    fn load(&self) -> Result<Dataset> {
        load_dataset(&self.dev, self.length_norm)
    }
}

#[derive(Args)]
struct EmbInput {
    /// Embedding file (TSV or EMB1 binary, detected automatically).
    #[arg(long)]
    emb: PathBuf,
    /// Scale every vector to unit length after loading.
    #[arg(long)]
    length_norm: bool,
}

impl EmbInput {
    fn load(&self) -> Result<Dataset> {
        load_dataset(&self.emb, self.length_norm)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitKind {
    /// Identity when square, random orthonormal otherwise.
    Auto,
    Identity,
    Random,
}

#[derive(Args)]
struct TrainMmml {
    #[command(flatten)]
    dev: DevInput,
    #[arg(long, default_value_t = 150)]
    dout: usize,
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0.95)]
    lr_decay: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    /// Fixed number of batches per epoch; by default each eligible anchor is visited once.
    #[arg(long)]
    batches_per_epoch: Option<usize>,
    /// Seeds both the initialization and the triplet sampler.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = InitKind::Auto)]
    init: InitKind,
    /// Stop after this many epochs without improvement of the mean loss.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch TSV log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct TrainLda {
    #[command(flatten)]
    dev: DevInput,
    #[arg(long, default_value_t = 150)]
    dout: usize,
    /// Added to the diagonal of the within-class scatter, relative to its mean eigenvalue.
    #[arg(long, default_value_t = 1e-6)]
    ridge: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProjectCmd {
    #[command(flatten)]
    emb: EmbInput,
    /// Projection file; repeat to apply several in order.
    #[arg(long = "proj", required = true)]
    projections: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct Score {
    #[command(flatten)]
    emb: EmbInput,
    #[arg(long)]
    trials: PathBuf,
    /// Projection file; repeat to apply several in order.
    #[arg(long = "proj")]
    projections: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Fuse {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Weight of `--a`.
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Eval {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    trials: PathBuf,
    /// Write `probit(fpr)<TAB>probit(fnr)` per sweep point.
    #[arg(long)]
    det_out: Option<PathBuf>,
}

fn load_projections(paths: &[PathBuf]) -> Result<Vec<Projection>> {
    paths
        .iter()
        .map(|p| Projection::load(p).with_context(|| format!("loading projection {}", p.display())))
        .collect()
}

fn load_scores(path: &Path) -> Result<ScoreSet> {
    ScoreSet::load(path).with_context(|| format!("loading scores {}", path.display()))
}

fn gen_synth(a: GenSynth) -> Result<()> {
    let cfg = SynthConfig {
        n_speakers: a.speakers,
        utts_per_speaker: a.utts,
        dim: a.dim,
        speaker_scatter: a.speaker_scatter,
        channel_scatter: a.channel_scatter,
        nuisance_dims: a.nuisance_dims,
        nuisance_scale: a.nuisance_scale,
        seed: a.seed,
    };
    let d = gen_synthetic(&cfg)?;
    write_embeddings(&d, &a.out, format_for(&a.out, a.format)).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(path) = a.trials_out {
        let trials = gen_trials(&d, a.targets, a.nontargets, a.trial_seed)?;
        write_trials(&trials, &path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn train_mmml(a: TrainMmml) -> Result<()> {
    let d = a.dev.load()?;
    let cfg = TrainConfig {
        margin: a.margin,
        learning_rate: a.lr,
        lr_decay: a.lr_decay,
        epochs: a.epochs,
        batch: SamplerConfig {
            batch_size: a.batch_size,
            seed: a.seed,
            batches_per_epoch: a.batches_per_epoch.map_or(BatchesPerEpoch::Cover, BatchesPerEpoch::Count),
        },
        init: match a.init {
            InitKind::Auto => Init::Auto { seed: a.seed },
            InitKind::Identity => Init::Identity,
            InitKind::Random => Init::RandomOrthonormal { seed: a.seed },
        },
        early_stop_patience: a.patience,
    };
    let (m, report) = train(&d, a.dout, &cfg)?;
    m.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(path) = a.log {
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(w, "epoch\tmean_loss\tactive_fraction\tlearning_rate")?;
        for e in &report.epochs {
            writeln!(w, "{}\t{:?}\t{:?}\t{:?}", e.epoch, e.mean_loss, e.active_fraction, e.learning_rate)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn train_lda_cmd(a: TrainLda) -> Result<()> {
    let d = a.dev.load()?;
    let p = train_lda(&d, &LdaConfig { d_out: a.dout, ridge: a.ridge })?;
    p.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn project_cmd(a: ProjectCmd) -> Result<()> {
    let mut d = a.emb.load()?;
    for p in load_projections(&a.projections)? {
        d = project(&p, &d)?;
    }
    write_embeddings(&d, &a.out, format_for(&a.out, a.format)).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn score(a: Score) -> Result<()> {
    let d = a.emb.load()?;
    let trials = load_trials(&a.trials).with_context(|| format!("loading trials {}", a.trials.display()))?;
    let chain = load_projections(&a.projections)?;
    let scores = score_trials(&d, &trials, &chain)?;
    scores.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn fuse_cmd(a: Fuse) -> Result<()> {
    let fused = fuse(&load_scores(&a.a)?, &load_scores(&a.b)?, &FusionConfig { alpha: a.alpha })?;
    fused.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn eval(a: Eval) -> Result<()> {
    let scores = load_scores(&a.scores)?;
    let trials = load_trials(&a.trials).with_context(|| format!("loading trials {}", a.trials.display()))?;
    let curve = error_curve(&scores, &trials)?;
    let r = curve.eer();
    println!("EER {:.4} ({:.2}%)", r.eer, 100.0 * r.eer);
    println!("threshold {}", r.threshold);
    if let Some(path) = a.det_out {
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        for (x, y) in det_points(&curve) {
            writeln!(w, "{x:?}\t{y:?}")?;
        }
        w.flush()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenSynth(a) => gen_synth(a),
        Command::TrainMmml(a) => train_mmml(a),
        Command::TrainLda(a) => train_lda_cmd(a),
        Command::Project(a) => project_cmd(a),
        Command::Score(a) => score(a),
        Command::Fuse(a) => fuse_cmd(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
