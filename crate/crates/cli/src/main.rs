//! `qkernel` — batch driver for the feature-map search.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors.
//! Diagnostics go to stderr as one JSON object per line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qkernel::circuit::EncodingStrategy;
use qkernel::data::{load_csv, LabelColumn};
use qkernel::pipeline::{self, RunDir, SearchConfig, SelectorKind};
use qkernel::qsim::NoiseSpec;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "qkernel", version, about = "Data-driven search for quantum kernel feature maps")]
struct Cli {
    /// Log level for stderr diagnostics (error, warn, info, debug).
    #[arg(long, global = true, default_value = "info")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split the dataset, fit the feature selector, store angle features.
    SelectFeatures(StageArgs),
    /// Sample the labeled layout pool.
    SamplePool(StageArgs),
    /// Compute training KTA for every pool layout.
    LabelPool(StageArgs),
    /// Fit the MLP predictor on the labeled pool.
    TrainPredictor(StageArgs),
    /// Score the candidate pool and keep the top k.
    Rank(StageArgs),
    /// Promote gates and fine-tune every candidate.
    Finetune(StageArgs),
    /// Fit and score every kernel; write the stage report.
    Evaluate(StageArgs),
    /// Run every stage in order.
    Search(StageArgs),
    /// Baseline kernels on an existing run directory's split.
    Baseline(BaselineArgs),
    /// Kernel-variance diagnostic over (l0, p) cells.
    DiagnoseKv(KvArgs),
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// JSON config with flat keys; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input dataset CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Label column: header name or zero-based index.
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long, value_enum)]
    selector: Option<SelectorArg>,
    #[arg(long)]
    bins: Option<usize>,
    /// Number of qubits.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated layer counts.
    #[arg(long, value_delimiter = ',')]
    l0: Option<Vec<usize>>,
    /// Number of selected features.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    strategy: Option<EncodingStrategy>,
    #[arg(long)]
    m_pool: Option<usize>,
    #[arg(long)]
    m_prime: Option<usize>,
    /// Score the whole block space instead of sampling.
    #[arg(long)]
    exhaustive: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    theta_trials: Option<usize>,
    #[arg(long)]
    finetune_epochs: Option<usize>,
    #[arg(long)]
    finetune_lr: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Single-qubit depolarizing probability; enables the noisy backend.
    #[arg(long)]
    noise_p1: Option<f64>,
    /// Two-qubit depolarizing probability.
    #[arg(long)]
    noise_p2: Option<f64>,
    #[arg(long)]
    predictor_epochs: Option<usize>,
    #[arg(long)]
    predictor_lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Parallel workers for labeling and fine-tuning.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct StageArgs {
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    /// Overwrite existing artifacts of this stage.
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SelectorArg {
    Mrmr,
    Pca,
    None,
}

impl From<SelectorArg> for SelectorKind {
    fn from(s: SelectorArg) -> Self {
        match s {
            SelectorArg::Mrmr => SelectorKind::Mrmr,
            SelectorArg::Pca => SelectorKind::Pca,
            SelectorArg::None => SelectorKind::None,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BaselineKind {
    Rbfk,
    Heak,
    Tek,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(value_enum)]
    kind: BaselineKind,
    /// Run directory whose split is evaluated (after `select-features`).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
    /// Grid values g for gamma = g / (p * Var).
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    gamma_grid: Vec<f64>,
    /// Layer count for HEAK/TEK (defaults to the largest configured l0).
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.2)]
    lr: f64,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct KvArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long)]
    n: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    l0: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "pca")]
    selector: SelectorArg,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    force: bool,
    #[arg(long)]
    workers: Option<usize>,
}

enum Failure {
    Usage(String),
    Runtime(qkernel::Error),
}

impl From<qkernel::Error> for Failure {
    fn from(e: qkernel::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn init_logging(level: &str) {
    let filter = level.parse().unwrap_or(log::LevelFilter::Info);
    env_logger::Builder::new()
        .filter_level(filter)
        .format(|buf, record| {
            let line = json!({
                "level": record.level().to_string().to_lowercase(),
                "target": record.target(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        })
        .target(env_logger::Target::Stderr)
        .init();
}

fn set_workers(workers: usize) -> CliResult {
    if workers == 0 {
        return Err(usage("--workers must be >= 1"));
    }
    // A second initialisation in the same process is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    Ok(())
}

/// File config (explicit, else the run directory's), then flag overrides.
fn resolve_config(args: &ConfigArgs, run: Option<&RunDir>) -> CliResult<SearchConfig> {
    let mut cfg = match (&args.config, run) {
        (Some(path), _) => {
            if !path.exists() {
                return Err(usage(format!("--config: file {} not found", path.display())));
            }
            SearchConfig::load(path)?
        }
        (None, Some(run)) if run.path("config.json").exists() => run.load_config()?,
        _ => SearchConfig::default(),
    };
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = args.$field.clone() {
                cfg.$field = v.into();
            }
        };
    }
    set!(label_column);
    set!(train_fraction);
    set!(bins);
    set!(n);
    set!(l0);
    set!(p);
    set!(m_pool);
    set!(m_prime);
    set!(k);
    set!(finetune_epochs);
    set!(finetune_lr);
    set!(lambda);
    set!(predictor_epochs);
    set!(predictor_lr);
    set!(batch_size);
    set!(seed);
    set!(workers);
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    if let Some(s) = args.selector {
        cfg.selector = s.into();
    }
    if let Some(s) = args.strategy {
        cfg.strategy = Some(s);
    }
    if let Some(t) = args.theta_trials {
        cfg.num_theta_trials = t;
    }
    if args.exhaustive {
        cfg.exhaustive = true;
    }
    if args.noise_p1.is_some() || args.noise_p2.is_some() {
        let base = cfg.noise.unwrap_or(NoiseSpec { p1: 0.0, p2: 0.0 });
        cfg.noise = Some(NoiseSpec {
            p1: args.noise_p1.unwrap_or(base.p1),
            p2: args.noise_p2.unwrap_or(base.p2),
        });
    }
    cfg.validate().map_err(|e| usage(format!("invalid configuration: {e}")))?;
    Ok(cfg)
}

fn require_data(cfg: &SearchConfig) -> CliResult<PathBuf> {
    match &cfg.data {
        None => Err(usage("--data: no dataset path given")),
        Some(p) if !p.exists() => Err(usage(format!("--data: file {} not found", p.display()))),
        Some(p) => Ok(p.clone()),
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value serializes"));
}

fn run_stage(name: &str, args: &StageArgs) -> CliResult {
    let run = RunDir::new(&args.out);
    let cfg = resolve_config(&args.config, Some(&run))?;
    set_workers(cfg.workers)?;
    match name {
        "select-features" => {
            require_data(&cfg)?;
            pipeline::select_features_from_file(&run, &cfg, args.force)?;
        }
        "sample-pool" => pipeline::sample_pool(&run, &cfg, args.force)?,
        "label-pool" => pipeline::label_pool_stage(&run, &cfg, args.force)?,
        "train-predictor" => pipeline::train_predictor_stage(&run, &cfg, args.force)?,
        "rank" => pipeline::rank_stage(&run, &cfg, args.force)?,
        "finetune" => pipeline::finetune_stage(&run, &cfg, args.force)?,
        "evaluate" => {
            let out = pipeline::evaluate_stage(&run, &cfg, args.force)?;
            print_chosen(&out.chosen);
        }
        "search" => {
            let path = require_data(&cfg)?;
            let label: LabelColumn = cfg.label_column.parse().expect("infallible");
            let data = load_csv(&path, &label).map_err(|e| e.in_stage("select-features"))?;
            let out = pipeline::run_full_search(&run, &cfg, &data, args.force)?;
            print_chosen(&out.chosen);
        }
        _ => unreachable!("unknown stage {name}"),
    }
    Ok(())
}

fn print_chosen(r: &pipeline::CandidateRecord) {
    print_json(&json!({
        "stage": r.stage.name(),
        "index": r.index,
        "hash": r.layout.hash(),
        "kta_train": r.kta_train,
        "train_accuracy": r.train_accuracy,
        "test_accuracy": r.test_accuracy,
    }));
}

fn claim_file(path: &Path, force: bool) -> CliResult {
    if path.exists() && !force {
        return Err(Failure::Runtime(qkernel::Error::Exists(path.to_path_buf())));
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn run_baseline(args: &BaselineArgs) -> CliResult {
    let run = RunDir::new(&args.out);
    let cfg = resolve_config(&args.config, Some(&run))?;
    set_workers(cfg.workers)?;
    let (train, test) = run.load_split()?;
    let layers = args
        .layers
        .unwrap_or_else(|| cfg.l0.iter().copied().max().unwrap_or(1));
    let noise = cfg.noise.as_ref();
    match args.kind {
        BaselineKind::Rbfk => {
            let path = run.path("baselines/rbfk.csv");
            claim_file(&path, args.force)?;
            let rows = pipeline::rbf_baseline(&train, &test, &args.gamma_grid, cfg.lambda)?;
            let mut text = String::from("grid_value,gamma,kta_train,train_accuracy,test_accuracy\n");
            for r in &rows {
                text += &format!(
                    "{:?},{:?},{:?},{:?},{:?}\n",
                    r.grid_value, r.gamma, r.kta_train, r.train_accuracy, r.test_accuracy
                );
            }
            std::fs::write(&path, &text)?;
            print!("{text}");
        }
        BaselineKind::Heak => {
            let path = run.path("baselines/heak.json");
            claim_file(&path, args.force)?;
            let layout = pipeline::heak_layout(cfg.n, layers, train.dim())?;
            let ev = pipeline::evaluate_kernel(&layout, &[], &train, &test, cfg.lambda, noise)?;
            let v = json!({
                "layout": serde_json::from_str::<serde_json::Value>(&layout.to_json()).expect("layout json"),
                "kta_train": ev.kta_train,
                "train_accuracy": ev.train_accuracy,
                "test_accuracy": ev.test_accuracy,
            });
            std::fs::write(&path, serde_json::to_string_pretty(&v).expect("json"))?;
            print_json(&v);
        }
        BaselineKind::Tek => {
            let path = run.path("baselines/tek.json");
            claim_file(&path, args.force)?;
            let seed = pipeline::derive_seed(cfg.seed, "tek", 0, 0);
            let out = pipeline::train_tek(&train, cfg.n, layers, args.epochs, args.lr, seed, noise)?;
            let layout = out.layout.clone().expect("train_tek returns its layout");
            let ev = pipeline::evaluate_kernel(&layout, &out.gamma, &train, &test, cfg.lambda, noise)?;
            let v = json!({
                "layout": serde_json::from_str::<serde_json::Value>(&layout.to_json()).expect("layout json"),
                "initial_gamma": out.initial_gamma,
                "gamma": out.gamma,
                "initial_kta": out.initial_kta,
                "kta_train": out.kta,
                "kta_trace": out.kta_trace,
                "train_accuracy": ev.train_accuracy,
                "test_accuracy": ev.test_accuracy,
            });
            std::fs::write(&path, serde_json::to_string_pretty(&v).expect("json"))?;
            print_json(&v);
        }
    }
    Ok(())
}

fn run_kv(args: &KvArgs) -> CliResult {
    set_workers(args.workers.unwrap_or(1))?;
    let path = match &args.data {
        None => return Err(usage("--data: no dataset path given")),
        Some(p) if !p.exists() => {
            return Err(usage(format!("--data: file {} not found", p.display())))
        }
        Some(p) => p,
    };
    if args.n < 2 {
        return Err(usage("--n must be >= 2"));
    }
    let label: LabelColumn = args.label_column.parse().expect("infallible");
    let data = load_csv(path, &label)?;
    if let Some(&bad) = args.p.iter().find(|&&p| p == 0 || p > data.dim()) {
        return Err(usage(format!("--p: value {bad} outside 1..={}", data.dim())));
    }
    let rows = pipeline::diagnose_kv(
        &data,
        args.n,
        &args.l0,
        &args.p,
        args.trials,
        args.seed,
        args.selector.into(),
    )?;
    let mut text = String::from("l0,p,trials,mean_kv,std_kv\n");
    for r in &rows {
        text += &format!("{},{},{},{:?},{:?}\n", r.l0, r.p, r.trials, r.mean_kv, r.std_kv);
    }
    match &args.output {
        Some(out) => {
            claim_file(out, args.force)?;
            std::fs::write(out, &text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::SelectFeatures(a) => run_stage("select-features", a),
        Command::SamplePool(a) => run_stage("sample-pool", a),
        Command::LabelPool(a) => run_stage("label-pool", a),
        Command::TrainPredictor(a) => run_stage("train-predictor", a),
        Command::Rank(a) => run_stage("rank", a),
        Command::Finetune(a) => run_stage("finetune", a),
        Command::Evaluate(a) => run_stage("evaluate", a),
        Command::Search(a) => run_stage("search", a),
        Command::Baseline(a) => run_baseline(a),
        Command::DiagnoseKv(a) => run_kv(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(&cli.log_level);
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("{}", json!({"level": "error", "kind": "usage", "message": msg}));
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            let stage = match &e {
                qkernel::Error::Stage { stage, .. } => Some(stage.clone()),
                _ => None,
            };
            eprintln!(
                "{}",
                json!({"level": "error", "kind": "runtime", "stage": stage, "message": e.to_string()})
            );
            ExitCode::from(2)
        }
    }
}
