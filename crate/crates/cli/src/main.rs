//! `fbtsvm` command-line tool: train, update, predict, evaluate, generate.
//!
//! Reports go to stdout as JSON (one object per line); diagnostics go to
//! stderr. Exit status: 0 success, 1 runtime failure, 2 usage or
//! configuration error.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fbtsvm::{
    gen_hyper, gen_sea, load, parse_csv, parse_libsvm, save, train_dag, DagModel, Dataset, Error,
    FeatureMap, FourierMap, Hyperparams, LabeledPoint, ScreenPolicy,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "fbtsvm",
    version,
    about = "Incremental fuzzy bounded twin SVM for data streams"
)]
struct Cli {
    /// Worker threads for node-parallel work (default: all cores).
    #[arg(long, global = true, env = "FBTSVM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it to disk.
    Train(TrainArgs),
    /// Stream new data through an existing model in batches.
    Update(UpdateArgs),
    /// Print one predicted label per input row.
    Predict(PredictArgs),
    /// Print accuracy, per-class accuracy, and model size as JSON.
    Evaluate(PredictArgs),
    /// Write synthetic train and test streams in LIBSVM format.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Libsvm,
    Csv,
}

#[derive(Args)]
struct Input {
    /// Data file (LIBSVM, or CSV when the extension is .csv).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// CSV label column, 0-based (default: last).
    #[arg(long)]
    label_column: Option<usize>,
}

#[derive(Clone, Copy)]
enum KernelSize {
    Linear,
    Fourier(usize),
}

impl FromStr for KernelSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("linear") {
            return Ok(KernelSize::Linear);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(KernelSize::Fourier(n)),
            _ => Err(format!(
                "expected a positive integer or \"linear\", got {s:?}"
            )),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: Input,
    /// Output model path.
    #[arg(long)]
    model: PathBuf,
    /// Optional held-out file for the printed report (default: training data).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Train on only the first N rows.
    #[arg(long)]
    initial_points: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    /// Defaults to c1.
    #[arg(long)]
    c3: Option<f64>,
    /// Defaults to c2.
    #[arg(long)]
    c4: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    /// Random Fourier feature count, or "linear" for no feature map.
    #[arg(long, default_value = "linear")]
    kernel_size: KernelSize,
    /// Gaussian kernel width (default: 1 / input dimension).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    max_sweeps: usize,
    #[command(flatten)]
    stream: StreamOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct StreamOpts {
    /// Forgetting score: passes below phi before a point is dropped
    /// ("inf" disables forgetting).
    #[arg(long)]
    d: Option<Forget>,
    /// Multiplier threshold for forgetting.
    #[arg(long)]
    phi: Option<f64>,
    /// Screening statistic: extrema, mean, median, quartiles, none.
    #[arg(long)]
    policy: Option<ScreenPolicy>,
}

#[derive(Clone, Copy)]
struct Forget(Option<u32>);

impl FromStr for Forget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if matches!(s, "inf" | "infinity" | "∞") {
            return Ok(Forget(None));
        }
        match s.parse::<u32>() {
            Ok(d) if d > 0 => Ok(Forget(Some(d))),
            _ => Err(format!("expected a positive integer or \"inf\", got {s:?}")),
        }
    }
}

#[derive(Args)]
struct UpdateArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long)]
    model: PathBuf,
    /// Where to write the updated model (default: overwrite --model).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rows per batch (default: the whole file as one batch).
    #[arg(long)]
    batch_size: Option<usize>,
    /// Held-out file evaluated after every batch.
    #[arg(long)]
    test: Option<PathBuf>,
    #[command(flatten)]
    stream: StreamOpts,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long)]
    model: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Hyper,
    Sea,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    generator: Generator,
    /// Training rows.
    #[arg(long)]
    train: usize,
    /// Test rows.
    #[arg(long)]
    test: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Attribute count of the hyperplane stream.
    #[arg(long, default_value_t = 10)]
    dim: usize,
    /// Label threshold of the SEA stream.
    #[arg(long, default_value_t = 8.0)]
    threshold: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Message plus exit status.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure {
            code: 2,
            msg: msg.into(),
        }
    }
    fn runtime(msg: impl Into<String>) -> Self {
        Failure {
            code: 1,
            msg: msg.into(),
        }
    }
}

/// Errors caused by the inputs or flags are usage errors; the rest are
/// runtime failures.
fn classify(e: Error) -> Failure {
    match e {
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Empty
        | Error::Ragged { .. }
        | Error::Dimension { .. }
        | Error::InvalidParam(_)
        | Error::EmptyClass(_)
        | Error::TooFewPoints { .. }
        | Error::UnknownClass(_)
        | Error::NotAModel
        | Error::Version(_)
        | Error::Corrupt(_) => Failure::usage(e.to_string()),
        _ => Failure::runtime(e.to_string()),
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Reads a data file; `None` when it holds no rows.
fn read_data(
    path: &Path,
    format: Option<Format>,
    label_column: Option<usize>,
) -> CliResult<Option<Dataset<f64>>> {
    let text = read_text(path)?;
    if text
        .lines()
        .all(|l| l.trim().is_empty() || l.trim_start().starts_with('#'))
    {
        return Ok(None);
    }
    let format = format.unwrap_or(match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Libsvm,
    });
    let d = match format {
        Format::Libsvm => parse_libsvm(&text),
        Format::Csv => {
            let col = label_column.unwrap_or_else(|| {
                let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
                first.split(',').count().saturating_sub(1)
            });
            parse_csv(&text, col)
        }
    };
    d.map(Some)
        .map_err(|e| Failure::usage(format!("{}: {}", path.display(), classify(e).msg)))
}

fn read_input(i: &Input) -> CliResult<Option<Dataset<f64>>> {
    read_data(&i.data, i.format, i.label_column)
}

/// Sparse files omit trailing zero attributes, so shorter rows are padded
/// to the model's dimension.
fn conform(d: Dataset<f64>, dim: usize) -> CliResult<Dataset<f64>> {
    if d.dim() == dim {
        return Ok(d);
    }
    if d.dim() > dim {
        return Err(Failure::usage(format!(
            "data has {} features but the model expects {dim}",
            d.dim()
        )));
    }
    let points = d
        .into_points()
        .into_iter()
        .map(|mut p| {
            p.features.resize(dim, 0.0);
            p
        })
        .collect();
    Dataset::new(dim, points).map_err(classify)
}

fn load_model(path: &Path) -> CliResult<DagModel<f64>> {
    load(path).map_err(classify)
}

fn save_model(m: &DagModel<f64>, path: &Path) -> CliResult<()> {
    save(m, path).map_err(|e| Failure::runtime(e.to_string()))
}

fn emit(v: serde_json::Value) -> CliResult<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{v}").map_err(|e| Failure::runtime(e.to_string()))
}

fn apply_stream_opts(hp: &mut Hyperparams<f64>, policy: &mut ScreenPolicy, s: &StreamOpts) {
    if let Some(Forget(d)) = s.d {
        hp.forgetting.d = d;
    }
    if let Some(phi) = s.phi {
        hp.forgetting.phi = phi;
    }
    if let Some(p) = s.policy {
        *policy = p;
    }
}

fn cmd_train(a: TrainArgs) -> CliResult<()> {
    let mut hp = Hyperparams {
        c1: a.c1,
        c2: a.c2,
        c3: a.c3.unwrap_or(a.c1),
        c4: a.c4.unwrap_or(a.c2),
        ..Hyperparams::default()
    };
    hp.fuzzy.mu = a.mu;
    hp.fuzzy.delta = a.delta;
    hp.solver.epsilon = a.epsilon;
    hp.solver.max_sweeps = a.max_sweeps;
    hp.solver.seed = a.seed;
    let mut policy = ScreenPolicy::default();
    apply_stream_opts(&mut hp, &mut policy, &a.stream);
    hp.validate().map_err(classify)?;
    if a.initial_points == Some(0) {
        return Err(Failure::usage("--initial-points must be >= 1"));
    }
    if let Some(g) = a.gamma {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Failure::usage(format!("gamma {g} must be > 0")));
        }
    }

    let data = read_input(&a.input)?
        .ok_or_else(|| Failure::usage(format!("{}: no data rows", a.input.data.display())))?;
    let test = match &a.test {
        Some(p) => read_data(p, a.input.format, a.input.label_column)?,
        None => None,
    };
    let data = match a.initial_points {
        Some(n) if n < data.len() => data.select(&(0..n).collect::<Vec<_>>()),
        _ => data,
    };
    let map = match a.kernel_size {
        KernelSize::Linear => FeatureMap::Linear {
            input_dim: data.dim(),
        },
        KernelSize::Fourier(n) => {
            let gamma = a.gamma.unwrap_or(1.0 / data.dim() as f64);
            FeatureMap::Fourier(FourierMap::sample(data.dim(), n, gamma, a.seed).map_err(classify)?)
        }
    };
    let start = Instant::now();
    let model = train_dag(&data, &hp, map, policy).map_err(classify)?;
    let train_seconds = start.elapsed().as_secs_f64();
    save_model(&model, &a.model)?;
    let eval = match test {
        Some(t) => conform(t, model.input_dim())?,
        None => data,
    };
    let mut report = model.evaluate(&eval).map_err(classify)?;
    report.train_seconds = train_seconds;
    emit(serde_json::to_value(report).unwrap())
}

fn cmd_update(a: UpdateArgs) -> CliResult<()> {
    let mut model = load_model(&a.model)?;
    let out = a.out.clone().unwrap_or_else(|| a.model.clone());
    apply_stream_opts(&mut model.hp, &mut model.policy, &a.stream);
    model.hp.validate().map_err(classify)?;
    if a.batch_size == Some(0) {
        return Err(Failure::usage("--batch-size must be >= 1"));
    }
    let test = match &a.test {
        Some(p) => read_data(p, a.input.format, a.input.label_column)?
            .map(|t| conform(t, model.input_dim()))
            .transpose()?,
        None => None,
    };
    let Some(data) = read_input(&a.input)? else {
        // Nothing to stream; the model is written back only when its
        // settings changed.
        if a.out.is_some()
            || a.stream.d.is_some()
            || a.stream.phi.is_some()
            || a.stream.policy.is_some()
        {
            save_model(&model, &out)?;
        }
        return Ok(());
    };
    let data = conform(data, model.input_dim())?;
    if let Some(&c) = data
        .classes()
        .iter()
        .find(|c| model.classes.binary_search(c).is_err())
    {
        return Err(Failure::usage(format!("unknown class label {c} in stream")));
    }
    let size = a.batch_size.unwrap_or(data.len());
    let idx: Vec<usize> = (0..data.len()).collect();
    for (k, chunk) in idx.chunks(size).enumerate() {
        let batch = data.select(chunk);
        let start = Instant::now();
        let rep = model.update(&batch).map_err(classify)?;
        let seconds = start.elapsed().as_secs_f64();
        let mut line = json!({
            "batch": k,
            "points": batch.len(),
            "nodes_updated": rep.nodes,
            "admitted": rep.admitted,
            "removed": rep.removed,
            "n_sv": model.n_sv(),
            "seconds": seconds,
            "converged": model.converged(),
        });
        if let Some(t) = &test {
            line["accuracy"] = json!(model.evaluate(t).map_err(classify)?.accuracy);
        }
        emit(line)?;
    }
    save_model(&model, &out)
}

fn model_input(a: &PredictArgs) -> CliResult<(DagModel<f64>, Dataset<f64>)> {
    let model = load_model(&a.model)?;
    let data = match read_input(&a.input)? {
        Some(d) => conform(d, model.input_dim())?,
        None => Dataset::empty(model.input_dim()),
    };
    Ok((model, data))
}

fn cmd_predict(a: PredictArgs) -> CliResult<()> {
    let (model, data) = model_input(&a)?;
    let labels = model.predict_batch(&data).map_err(classify)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for l in labels {
        writeln!(out, "{l}").map_err(|e| Failure::runtime(e.to_string()))?;
    }
    out.flush().map_err(|e| Failure::runtime(e.to_string()))
}

fn cmd_evaluate(a: PredictArgs) -> CliResult<()> {
    let (model, data) = model_input(&a)?;
    if data.is_empty() {
        return Err(Failure::usage(format!(
            "{}: no data rows",
            a.input.data.display()
        )));
    }
    let report = model.evaluate(&data).map_err(classify)?;
    emit(serde_json::to_value(report).unwrap())
}

fn write_libsvm(d: &Dataset<f64>, path: &Path) -> CliResult<()> {
    let f =
        fs::File::create(path).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(f);
    d.write_libsvm(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn cmd_generate(a: GenerateArgs) -> CliResult<()> {
    if a.train == 0 || a.test == 0 {
        return Err(Failure::usage("--train and --test must be >= 1"));
    }
    if !(0.0..=1.0).contains(&a.noise) {
        return Err(Failure::usage(format!("noise {} outside [0, 1]", a.noise)));
    }
    let total = a.train + a.test;
    let (name, all) = match a.generator {
        Generator::Hyper => (
            "hyper",
            gen_hyper::<f64>(total, a.dim, a.noise, a.seed)
                .map_err(classify)?
                .0,
        ),
        Generator::Sea => (
            "sea",
            gen_sea::<f64>(total, a.noise, a.threshold, a.seed).map_err(classify)?,
        ),
    };
    let points = all.into_points();
    let dim = points[0].features.len();
    let part = |range: std::ops::Range<usize>| -> CliResult<Dataset<f64>> {
        let pts: Vec<LabeledPoint<f64>> = points[range].to_vec();
        Dataset::new(dim, pts).map_err(classify)
    };
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| Failure::runtime(format!("{}: {e}", a.out_dir.display())))?;
    let train_path = a.out_dir.join(format!("{name}_train.libsvm"));
    let test_path = a.out_dir.join(format!("{name}_test.libsvm"));
    write_libsvm(&part(0..a.train)?, &train_path)?;
    write_libsvm(&part(a.train..total)?, &test_path)?;
    emit(json!({
        "train": train_path.display().to_string(),
        "test": test_path.display().to_string(),
        "train_rows": a.train,
        "test_rows": a.test,
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Update(a) => cmd_update(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
