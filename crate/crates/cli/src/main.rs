use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kineme::codebook::{discover_kinemes, encode_series, load_codebook, save_codebook};
use kineme::config::PipelineConfig;
use kineme::eval::{corpus_features, run_kfold, run_transfer, to_feature_matrix, EvalReport, Protocol};
use kineme::features::FeatureMatrix;
use kineme::ingest::Corpus;
use kineme::models::{labels_to_targets, save_model, train_normalised, Family, Task};
use kineme::synth::{generate_corpus, write_corpus, GeneratorSpec};
use kineme::{Error, ErrorKind};
use serde_json::json;

/// Kineme discovery, feature extraction and evaluation for head-pose corpora.
#[derive(Parser, Debug)]
#[command(name = "kineme", version)]
struct Cli {
    /// Pipeline config (TOML, or JSON with a .json extension).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads [default: available cores].
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Progress messages on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labelled synthetic corpus.
    Synth(SynthArgs),
    /// Load and validate a corpus, optionally writing it back canonicalised.
    Ingest(IngestArgs),
    /// Learn a kineme codebook from the low-labelled videos of a corpus.
    Learn(LearnArgs),
    /// Encode every video of a corpus as a kineme sequence.
    Encode(EncodeArgs),
    /// Extract chunk-level reconstruction-error features.
    Features(FeaturesArgs),
    /// Train one model on a feature CSV.
    Train(TrainArgs),
    /// Run the k-fold or transfer protocol and write a report directory.
    Eval(EvalArgs),
    /// Print a saved report.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct CorpusArg {
    /// Corpus manifest CSV.
    #[arg(long)]
    manifest: PathBuf,
    /// Corpus name [default: manifest directory name].
    #[arg(long)]
    name: Option<String>,
}

impl CorpusArg {
    fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| default_name(&self.manifest))
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Generator spec (JSON); fields missing from it keep their defaults.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    videos_per_class: Option<usize>,
    /// Scale observed motion by this factor.
    #[arg(long)]
    amplitude_shift: Option<f64>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[command(flatten)]
    corpus: CorpusArg,
    /// Write the canonical corpus here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[command(flatten)]
    corpus: CorpusArg,
    /// Codebook file to write.
    #[arg(long)]
    out: PathBuf,
    /// NMF rank.
    #[arg(long)]
    rank: Option<usize>,
    /// Number of kinemes.
    #[arg(long)]
    kinemes: Option<usize>,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[arg(long)]
    codebook: PathBuf,
    #[command(flatten)]
    corpus: CorpusArg,
    /// Sequence CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FeaturesArgs {
    #[arg(long)]
    codebook: PathBuf,
    #[command(flatten)]
    corpus: CorpusArg,
    #[arg(long, value_parser = ["60", "75", "90", "120"])]
    chunk_seconds: Option<String>,
    /// Feature CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Feature CSV.
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, value_enum, default_value = "classify")]
    task: TaskArg,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Corpus as NAME=MANIFEST; repeatable.
    #[arg(long = "corpus", value_name = "NAME=MANIFEST", required = true)]
    corpora: Vec<String>,
    #[arg(long, value_enum)]
    protocol: Option<ProtocolArg>,
    /// Pooled (k-fold) or training (transfer) corpora, comma separated
    /// [default: every corpus not under --test].
    #[arg(long, value_delimiter = ',')]
    train: Vec<String>,
    /// Held-out corpora of a transfer run, comma separated.
    #[arg(long, value_delimiter = ',')]
    test: Vec<String>,
    /// Corpus whose low-labelled videos supply the codebook.
    #[arg(long)]
    codebook_source: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, value_parser = ["60", "75", "90", "120"])]
    chunk_seconds: Option<String>,
    /// Model families, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    families: Vec<FamilyArg>,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// A report directory or its report.json.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FamilyArg {
    Forest,
    Boosted,
    Svm,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Forest => Family::Forest,
            FamilyArg::Boosted => Family::Boosted,
            FamilyArg::Svm => Family::Svm,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TaskArg {
    Classify,
    Regress,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ProtocolArg {
    Kfold,
    Transfer,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ReportFormat {
    Text,
    Csv,
    Predictions,
    Json,
}

fn default_name(manifest: &Path) -> String {
    manifest
        .parent()
        .and_then(|p| p.file_name())
        .map_or_else(|| "corpus".to_string(), |n| n.to_string_lossy().into_owned())
}

struct Ctx {
    config: PipelineConfig,
    verbose: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn load_corpus(&self, arg: &CorpusArg) -> kineme::Result<Corpus> {
        let name = arg.name();
        self.note(format!("loading corpus {name} from {}", arg.manifest.display()));
        Corpus::load(name, &arg.manifest, &self.config.ingest)
    }

    /// Writes `<path>.meta.json` describing how `path` was produced.
    fn sidecar(&self, path: &Path, command: &str, extra: serde_json::Value) -> kineme::Result<()> {
        let mut name = path.as_os_str().to_owned();
        name.push(".meta.json");
        let meta = json!({
            "command": command,
            "kineme_version": env!("CARGO_PKG_VERSION"),
            "inputs": extra,
            "config": self.config,
        });
        write_text(Path::new(&name), &(serde_json::to_string_pretty(&meta)? + "\n"))
    }
}

fn write_text(path: &Path, text: &str) -> kineme::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn create(path: &Path) -> kineme::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| io_error(path, e))?))
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn chunk_seconds(flag: &Option<String>, config: &PipelineConfig) -> u32 {
    flag.as_deref()
        .map_or(config.eval.chunk_seconds, |s| s.parse().expect("validated by clap"))
}

fn synth(ctx: &mut Ctx, args: &SynthArgs) -> kineme::Result<()> {
    let mut spec = match &args.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            let mut spec: GeneratorSpec =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            if let Some(seed) = ctx.config.seed {
                spec.seed = seed;
            }
            spec
        }
        None => ctx.config.synth.clone(),
    };
    if let Some(name) = &args.name {
        spec.name = name.clone();
    }
    if let Some(n) = args.videos_per_class {
        spec.videos_per_class = n;
    }
    if let Some(s) = args.amplitude_shift {
        spec.amplitude_shift = s;
    }
    ctx.config.synth = spec.clone();
    let (series, manifest) = generate_corpus(&spec)?;
    let path = write_corpus(&args.out, &series, &manifest)?;
    write_text(
        &args.out.join("generator.json"),
        &(serde_json::to_string_pretty(&spec)? + "\n"),
    )?;
    ctx.sidecar(&path, "synth", json!({}))?;
    println!("wrote {} videos to {}", series.len(), path.display());
    Ok(())
}

fn ingest(ctx: &Ctx, args: &IngestArgs) -> kineme::Result<()> {
    let corpus = ctx.load_corpus(&args.corpus)?;
    let low = corpus.manifest.low_ids().count();
    println!(
        "corpus {}: {} videos ({} low, {} high)",
        corpus.name,
        corpus.len(),
        low,
        corpus.len() - low
    );
    for s in &corpus.series {
        for w in s.warnings() {
            println!("warning: {}: {w}", s.video_id());
        }
    }
    if let Some(out) = &args.out {
        let path = write_corpus(out, &corpus.series, &corpus.manifest)?;
        ctx.sidecar(&path, "ingest", json!({ "manifest": args.corpus.manifest }))?;
        println!("wrote canonical corpus to {}", path.display());
    }
    Ok(())
}

fn learn(ctx: &mut Ctx, args: &LearnArgs) -> kineme::Result<()> {
    if let Some(r) = args.rank {
        ctx.config.eval.discovery.nmf.rank = r;
    }
    if let Some(k) = args.kinemes {
        ctx.config.eval.discovery.gmm.components = k;
    }
    let corpus = ctx.load_corpus(&args.corpus)?;
    ctx.note("discovering kinemes");
    let cb = discover_kinemes(
        &corpus.series,
        &corpus.manifest,
        &ctx.config.eval.discovery,
        &corpus.name,
    )?;
    save_codebook(&cb, &args.out)?;
    ctx.sidecar(
        &args.out,
        "learn",
        json!({ "manifest": args.corpus.manifest, "corpus": corpus.name, "fingerprint": cb.fingerprint() }),
    )?;
    println!(
        "wrote codebook {} ({} kinemes from {} low videos of {})",
        args.out.display(),
        cb.len(),
        cb.source().video_ids.len(),
        corpus.name
    );
    Ok(())
}

fn encode(ctx: &Ctx, args: &EncodeArgs) -> kineme::Result<()> {
    let cb = load_codebook(&args.codebook)?;
    let corpus = ctx.load_corpus(&args.corpus)?;
    let mut w = csv::Writer::from_writer(create(&args.out)?);
    let err = |e: csv::Error| Error::Contract(e.to_string());
    w.write_record(["video_id", "segment", "start_sample", "kineme", "residual"])
        .map_err(err)?;
    for s in &corpus.series {
        let seq = encode_series(&cb, s)?;
        for (i, label) in seq.labels.iter().enumerate() {
            w.write_record([
                seq.video_id.clone(),
                i.to_string(),
                seq.segments.start_indices()[i].to_string(),
                label.get().to_string(),
                seq.residuals[i].to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| io_error(&args.out, e))?;
    ctx.sidecar(
        &args.out,
        "encode",
        json!({ "codebook": args.codebook, "manifest": args.corpus.manifest, "fingerprint": cb.fingerprint() }),
    )?;
    println!("wrote {} sequences to {}", corpus.len(), args.out.display());
    Ok(())
}

fn features(ctx: &mut Ctx, args: &FeaturesArgs) -> kineme::Result<()> {
    ctx.config.eval.chunk_seconds = chunk_seconds(&args.chunk_seconds, &ctx.config);
    let cb = load_codebook(&args.codebook)?;
    let corpus = ctx.load_corpus(&args.corpus)?;
    let conversions = ctx.config.eval.conversions()?;
    let videos = corpus_features(&cb, &corpus, ctx.config.eval.chunk_seconds, &conversions)?;
    let matrix = to_feature_matrix(&videos);
    let mut out = create(&args.out)?;
    matrix.write_csv(&mut out)?;
    out.flush().map_err(|e| io_error(&args.out, e))?;
    ctx.sidecar(
        &args.out,
        "features",
        json!({
            "codebook": args.codebook,
            "manifest": args.corpus.manifest,
            "corpus": corpus.name,
            "fingerprint": cb.fingerprint(),
            "chunk_seconds": ctx.config.eval.chunk_seconds,
        }),
    )?;
    println!("wrote {} chunk rows to {}", matrix.len(), args.out.display());
    Ok(())
}

fn train(ctx: &Ctx, args: &TrainArgs) -> kineme::Result<()> {
    let file = File::open(&args.features).map_err(|e| io_error(&args.features, e))?;
    let matrix = FeatureMatrix::read_csv(BufReader::new(file), &args.features)?;
    let task = match args.task {
        TaskArg::Classify => Task::Classify,
        TaskArg::Regress => Task::Regress,
    };
    let y = match task {
        Task::Classify => labels_to_targets(&matrix.labels()),
        Task::Regress => matrix.severities(),
    };
    let spec = ctx
        .config
        .eval
        .models
        .spec(args.family.into(), task, ctx.config.eval.seed);
    ctx.note(format!("training {} {} on {} rows", spec.family, task, matrix.len()));
    let model = train_normalised(&spec, matrix.values().view(), &y)?;
    save_model(&model, &args.out)?;
    ctx.sidecar(&args.out, "train", json!({ "features": args.features, "spec": spec }))?;
    println!("wrote {} {} model to {}", spec.family, task, args.out.display());
    Ok(())
}

fn eval(ctx: &mut Ctx, args: &EvalArgs) -> kineme::Result<()> {
    let mut corpora = Vec::new();
    for entry in &args.corpora {
        let (name, manifest) = entry
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--corpus expects NAME=MANIFEST, got '{entry}'")))?;
        if corpora.iter().any(|c: &Corpus| c.name == name) {
            return Err(Error::Config(format!("corpus name '{name}' given twice")));
        }
        ctx.note(format!("loading corpus {name}"));
        corpora.push(Corpus::load(name, manifest, &ctx.config.ingest)?);
    }
    let chunk = chunk_seconds(&args.chunk_seconds, &ctx.config);
    let cfg = &mut ctx.config.eval;
    cfg.chunk_seconds = chunk;
    if let Some(p) = args.protocol {
        cfg.protocol = match p {
            ProtocolArg::Kfold => Protocol::Kfold,
            ProtocolArg::Transfer => Protocol::Transfer,
        };
    }
    if !args.test.is_empty() {
        cfg.test_datasets = args.test.clone();
    }
    if !args.train.is_empty() {
        cfg.datasets = args.train.clone();
    } else if cfg.datasets.is_empty() {
        cfg.datasets = corpora
            .iter()
            .map(|c| c.name.clone())
            .filter(|n| !cfg.test_datasets.contains(n))
            .collect();
    }
    if let Some(s) = &args.codebook_source {
        cfg.codebook_source = s.clone();
    } else if cfg.codebook_source.is_empty() {
        if let Some(first) = cfg.datasets.first() {
            cfg.codebook_source = first.clone();
        }
    }
    if let Some(r) = args.reps {
        cfg.repetitions = r;
    }
    if let Some(f) = args.folds {
        cfg.folds = f;
    }
    if !args.families.is_empty() {
        cfg.families = args.families.iter().map(|&f| f.into()).collect();
    }
    let cfg = &ctx.config.eval;
    ctx.note(format!("running {} protocol", cfg.protocol.name()));
    let report = match cfg.protocol {
        Protocol::Kfold => run_kfold(cfg, &corpora)?,
        Protocol::Transfer => run_transfer(cfg, &corpora)?,
    };
    report.write_dir(&args.out)?;
    ctx.sidecar(
        &args.out.join("report.json"),
        "eval",
        json!({ "corpora": args.corpora }),
    )?;
    print!("{}", report.to_text());
    Ok(())
}

fn report(args: &ReportArgs) -> kineme::Result<()> {
    let path = if args.input.is_dir() {
        args.input.join("report.json")
    } else {
        args.input.clone()
    };
    let text = std::fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    let report: EvalReport = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let out = match args.format {
        ReportFormat::Text => report.to_text(),
        ReportFormat::Csv => report.table_csv()?,
        ReportFormat::Predictions => report.predictions_csv()?,
        ReportFormat::Json => report.to_json()? + "\n",
    };
    print!("{out}");
    Ok(())
}

fn run(cli: Cli) -> kineme::Result<()> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Contract(e.to_string()))?;
    }
    let mut ctx = Ctx {
        config,
        verbose: cli.verbose,
    };
    match &cli.command {
        Command::Synth(a) => synth(&mut ctx, a),
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Learn(a) => learn(&mut ctx, a),
        Command::Encode(a) => encode(&ctx, a),
        Command::Features(a) => features(&mut ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Eval(a) => eval(&mut ctx, a),
        Command::Report(a) => report(a),
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Protocol => 4,
        ErrorKind::Internal => 5,
    }
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("error[config]: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind().as_str(), one_line(&e.to_string()));
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
