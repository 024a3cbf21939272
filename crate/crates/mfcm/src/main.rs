//! Command-line driver for clustering experiments: single runs on CSV
//! data, image segmentation with noise and filters, gamma tuning, and
//! grid benchmarks.

use clap::{Args, Parser, Subcommand};
use mfcm::engine::{self, Init, RunResult};
use mfcm::eval::{self, Preprocess};
use mfcm::io::{self, RunMetrics};
use mfcm::model::{Dataset, ModelConfig, PenaltyVariant};
use mfcm::params::{self, KernelSpec, WeightSpec};
use mfcm::tuning;
use ndarray::Array2;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "mfcm", version, about = "Robust fuzzy c-means clustering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a CSV dataset over several restarts and report the best run.
    Cluster(ClusterArgs),
    /// Segment a grayscale image, optionally noised and filtered first.
    Segment(SegmentArgs),
    /// Sweep the penalty factor and report the candidate trace.
    TuneGamma(TuneGammaArgs),
    /// Run a model/parameter grid and emit a CSV summary.
    Benchmark(BenchmarkArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Number of clusters.
    #[arg(long, default_value_t = 2)]
    clusters: usize,
    /// Fuzziness exponent (> 1).
    #[arg(long, default_value_t = 2.0)]
    m: f64,
    /// Weight function: l2|l1l2|huber|gm|welsch|cauchy|fair, with an
    /// optional :beta that accepts literals or Ks / Ks2 diameter forms.
    #[arg(long, default_value = "l2")]
    weight: String,
    /// Distance: none (Euclidean) | linear | poly[:beta,theta,degree]
    /// | rbf[:beta] | tanh[:beta,theta].
    #[arg(long, default_value = "none")]
    kernel: String,
    /// Spatial penalty: none|si|sii.
    #[arg(long, default_value = "none")]
    penalty: String,
    /// Neighborhood: auto|seq|nn1|nn2.
    #[arg(long, default_value = "auto")]
    topology: String,
    /// Penalty factor.
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Stopping tolerance on the membership change.
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    /// Maximum update sweeps per run.
    #[arg(long = "max-iter", default_value_t = 20)]
    max_iter: usize,
    /// Restarts; run r uses seed base + r.
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    /// Base random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Input CSV file.
    #[arg(long)]
    data: PathBuf,
    /// Label column: none|last|<index>.
    #[arg(long = "label-col", default_value = "none")]
    label_col: String,
    /// First CSV line is a header.
    #[arg(long)]
    header: bool,
    /// Preprocessing: n01|nop|u01|scale:A.
    #[arg(long, default_value = "nop")]
    pre: String,
    /// Result JSON path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Input PGM image.
    #[arg(long, conflicts_with = "synthetic")]
    image: Option<PathBuf>,
    /// Use the built-in 64x64 two-class test image.
    #[arg(long)]
    synthetic: bool,
    /// Noise to inject: none|gauss:P|sp:P (percent).
    #[arg(long, default_value = "none")]
    noise: String,
    /// Smoothing before clustering: none|mean|median.
    #[arg(long, default_value = "none")]
    filter: String,
    /// Centroid initialization: random|kde.
    #[arg(long, default_value = "random")]
    init: String,
    /// Bandwidth of the density estimate for --init kde; defaults to a
    /// 1/64th of the intensity range.
    #[arg(long = "kde-bandwidth")]
    kde_bandwidth: Option<f64>,
    /// Ground-truth label image (distinct gray levels are classes).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Intensity scaling before clustering: n01|nop|u01|scale:A.
    #[arg(long, default_value = "scale:5")]
    pre: String,
    /// Result JSON path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the segmentation as a PGM with evenly spaced gray levels.
    #[arg(long = "save-labels")]
    save_labels: Option<PathBuf>,
}

#[derive(Args)]
struct TuneGammaArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Input CSV file.
    #[arg(long, conflicts_with_all = ["image", "synthetic"])]
    data: Option<PathBuf>,
    /// Label column for --data: none|last|<index>.
    #[arg(long = "label-col", default_value = "none")]
    label_col: String,
    /// First CSV line is a header.
    #[arg(long)]
    header: bool,
    /// Input PGM image.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Use the built-in test image.
    #[arg(long)]
    synthetic: bool,
    /// Noise to inject before tuning (images only).
    #[arg(long, default_value = "none")]
    noise: String,
    /// Smoothing before clustering (images only).
    #[arg(long, default_value = "none")]
    filter: String,
    /// Preprocessing; `auto` means nop for CSV and scale:5 for images.
    #[arg(long, default_value = "auto")]
    pre: String,
    /// Maximum number of gamma candidates.
    #[arg(long, default_value_t = 10)]
    tgamma: usize,
    /// Held-out validation fraction; 0 trains and scores on everything.
    #[arg(long, default_value_t = 0.0)]
    holdout: f64,
    /// Trace CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Benchmark suite: synth-image|uci-mini.
    #[arg(long)]
    suite: String,
    /// CSV dataset for uci-mini.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Label column for --data: none|last|<index>.
    #[arg(long = "label-col", default_value = "last")]
    label_col: String,
    /// First CSV line is a header.
    #[arg(long)]
    header: bool,
    /// Noise for the synth-image suite.
    #[arg(long, default_value = "gauss:5")]
    noise: String,
    /// Custom grid file (CSV: weight,kernel,penalty,topology,m,gamma,pre).
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Restarts per grid cell.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Base random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Summary CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Errors split by exit code: 2 for bad input or configuration, 1 for
/// IO and runtime failures.
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn engine_error(e: engine::EngineError) -> CliError {
    match e {
        engine::EngineError::Model(_) => CliError::Usage(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    }
}

fn io_error(e: io::IoError) -> CliError {
    match e {
        io::IoError::Io(_) => CliError::Runtime(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Cluster(args) => cmd_cluster(args),
        Command::Segment(args) => cmd_segment(args),
        Command::TuneGamma(args) => cmd_tune_gamma(args),
        Command::Benchmark(args) => cmd_benchmark(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

/// Resolves the textual model flags against a (preprocessed) dataset.
fn build_config(model: &ModelArgs, data: &Dataset) -> Result<ModelConfig, CliError> {
    build_config_cached(model, data, &mut None)
}

/// Same, but reuses an already computed data diameter across calls on the
/// same dataset.
fn build_config_cached(
    model: &ModelArgs,
    data: &Dataset,
    sigma_cache: &mut Option<f64>,
) -> Result<ModelConfig, CliError> {
    let weight = WeightSpec::parse(&model.weight).map_err(CliError::Usage)?;
    let kernel = KernelSpec::parse(&model.kernel).map_err(CliError::Usage)?;
    let penalty = params::parse_penalty(&model.penalty, &model.topology, data.grid().is_some())
        .map_err(CliError::Usage)?;
    let sigma = if weight.needs_sigma() || kernel.needs_sigma() {
        *sigma_cache.get_or_insert_with(|| eval::data_diameter(data))
    } else {
        0.0
    };
    let mut config = ModelConfig::new(model.clusters);
    config.fuzziness = model.m;
    config.gamma = model.gamma;
    config.weight = weight.resolve(sigma);
    config.distance = kernel.resolve(sigma);
    config.penalty = penalty;
    config.epsilon = model.epsilon;
    config.max_iter = model.max_iter;
    config.seed = model.seed;
    Ok(config)
}

fn parse_label_col(s: &str, n_columns_hint: Option<usize>) -> Result<Option<usize>, CliError> {
    match s {
        "none" => Ok(None),
        "last" => match n_columns_hint {
            Some(n) if n > 0 => Ok(Some(n - 1)),
            _ => Err(CliError::Usage("cannot infer last column".into())),
        },
        idx => idx
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("bad label column {idx:?}"))),
    }
}

fn count_csv_columns(path: &PathBuf) -> Result<usize, CliError> {
    let text = std::fs::read_to_string(path).map_err(runtime)?;
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .map(|l| l.split(',').count())
        .ok_or_else(|| CliError::Usage("csv has no rows".into()))
}

fn load_csv_dataset(
    path: &PathBuf,
    label_col: &str,
    header: bool,
) -> Result<Dataset, CliError> {
    let hint = if label_col == "last" { Some(count_csv_columns(path)?) } else { None };
    let label_column = parse_label_col(label_col, hint)?;
    io::load_csv(path, label_column, header).map_err(io_error)
}

#[derive(Clone, Copy)]
enum NoiseSpec {
    None,
    Gauss(f64),
    SaltPepper(f64),
}

fn parse_noise(s: &str) -> Result<NoiseSpec, CliError> {
    match s.trim() {
        "none" => Ok(NoiseSpec::None),
        other => {
            let (kind, pct) = other
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("bad noise spec {other:?}")))?;
            let pct: f64 =
                pct.parse().map_err(|_| CliError::Usage(format!("bad noise percent {pct:?}")))?;
            match kind {
                "gauss" => Ok(NoiseSpec::Gauss(pct)),
                "sp" => Ok(NoiseSpec::SaltPepper(pct)),
                _ => Err(CliError::Usage(format!("unknown noise kind {kind:?}"))),
            }
        }
    }
}

fn apply_noise(data: &Dataset, noise: NoiseSpec, seed: u64) -> Result<Dataset, CliError> {
    match noise {
        NoiseSpec::None => Ok(data.clone()),
        NoiseSpec::Gauss(p) => eval::add_gaussian_noise(data, p, seed).map_err(usage),
        NoiseSpec::SaltPepper(p) => eval::add_salt_pepper(data, p, seed).map_err(usage),
    }
}

fn apply_filter(data: &Dataset, filter: &str) -> Result<Dataset, CliError> {
    match filter.trim() {
        "none" => Ok(data.clone()),
        "mean" => eval::mean_filter_3x3(data).map_err(usage),
        "median" => eval::median_filter_3x3(data).map_err(usage),
        other => Err(CliError::Usage(format!("unknown filter {other:?}"))),
    }
}

/// Best run over restarts: highest accuracy when truth exists, lowest
/// final objective otherwise.
struct BestRun {
    result: RunResult,
    accuracy: Option<f64>,
    best_objective: f64,
    best_seed: u64,
}

fn run_restarts(
    data: &Dataset,
    config: &ModelConfig,
    restarts: usize,
    init: &Init,
    truth: Option<&[usize]>,
) -> Result<BestRun, CliError> {
    let restarts = restarts.max(1);
    let mut best: Option<BestRun> = None;
    let mut min_objective = f64::INFINITY;
    for r in 0..restarts {
        let mut cfg = config.clone();
        cfg.seed = config.seed + r as u64;
        let result = engine::run(data, &cfg, init.clone()).map_err(engine_error)?;
        let accuracy = match truth {
            Some(t) => Some(
                eval::assign_and_align(&result.final_state.memberships, t).map_err(usage)?.1,
            ),
            None => None,
        };
        let objective =
            result.final_state.objective_trace.last().copied().unwrap_or(f64::INFINITY);
        min_objective = min_objective.min(objective);
        let better = match &best {
            None => true,
            Some(b) => match (accuracy, b.accuracy) {
                (Some(a), Some(ba)) => a > ba,
                _ => objective < b.best_objective,
            },
        };
        let seed = cfg.seed;
        if better {
            best = Some(BestRun { result, accuracy, best_objective: objective, best_seed: seed });
        }
    }
    let mut best = best.expect("at least one restart");
    // The reported objective is the lowest across every restart, not the
    // one attained by the best-accuracy run.
    best.best_objective = min_objective;
    Ok(best)
}

fn cmd_cluster(args: ClusterArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let raw = load_csv_dataset(&args.data, &args.label_col, args.header)?;
    let pre = params::parse_pre(&args.pre).map_err(CliError::Usage)?;
    let data = eval::preprocess(&raw, pre);
    let config = build_config(&args.model, &data)?;
    let truth = data.labels().map(|l| l.to_vec());
    let best = run_restarts(&data, &config, args.model.restarts, &Init::Random, truth.as_deref())?;
    let seconds = started.elapsed().as_secs_f64();
    match best.accuracy {
        Some(acc) => println!(
            "{}: best accuracy {:.2}% (seed {}, {} restarts, {:.2}s)",
            params::model_label(&config),
            acc,
            best.best_seed,
            args.model.restarts,
            seconds
        ),
        None => println!(
            "{}: best objective {:.6} (seed {}, {} restarts, {:.2}s)",
            params::model_label(&config),
            best.best_objective,
            best.best_seed,
            args.model.restarts,
            seconds
        ),
    }
    if let Some(out) = &args.out {
        let metrics = RunMetrics {
            accuracy_percent: best.accuracy,
            best_objective: Some(best.best_objective),
            restarts: Some(args.model.restarts),
            best_seed: Some(best.best_seed),
            gamma_selected: None,
            seconds: Some(seconds),
        };
        io::save_result(out, &best.result, &metrics).map_err(io_error)?;
    }
    Ok(())
}

fn load_image(image: &Option<PathBuf>, synthetic: bool) -> Result<Dataset, CliError> {
    match (image, synthetic) {
        (Some(path), false) => io::load_pgm(path).map_err(io_error),
        (None, true) => Ok(io::synth_two_class_image()),
        _ => Err(CliError::Usage("pass exactly one of --image or --synthetic".into())),
    }
}

/// Class ids from a label image: distinct gray levels, ascending.
fn truth_from_image(truth: &Dataset) -> Result<Vec<usize>, CliError> {
    let mut levels: Vec<i64> =
        truth.samples().column(0).iter().map(|&v| v.round() as i64).collect();
    let pixels = levels.clone();
    levels.sort_unstable();
    levels.dedup();
    if levels.len() > 8 {
        return Err(CliError::Usage(format!(
            "truth image has {} distinct levels; expected class labels",
            levels.len()
        )));
    }
    Ok(pixels
        .iter()
        .map(|v| levels.binary_search(v).expect("level present"))
        .collect())
}

/// Writes hard labels as a PGM, clusters ordered by centroid intensity and
/// mapped to evenly spaced gray levels.
fn save_label_image(
    path: &PathBuf,
    result: &RunResult,
    grid: (usize, usize),
) -> Result<(), CliError> {
    let c = result.config_echo.clusters;
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| {
        result.final_state.centroids[[a, 0]]
            .partial_cmp(&result.final_state.centroids[[b, 0]])
            .expect("finite centroids")
    });
    let mut rank = vec![0usize; c];
    for (pos, &k) in order.iter().enumerate() {
        rank[k] = pos;
    }
    let levels: Vec<f64> = (0..c)
        .map(|k| if c == 1 { 0.0 } else { (255 * rank[k]) as f64 / (c - 1) as f64 })
        .collect();
    let pixels: Vec<f64> = result.hard_labels.iter().map(|&l| levels[l].round()).collect();
    let n = pixels.len();
    let image = Dataset::new(Array2::from_shape_vec((n, 1), pixels).expect("one per pixel"))
        .expect("finite labels")
        .with_grid(grid.0, grid.1)
        .expect("grid covers labels");
    io::save_pgm(path, &image).map_err(io_error)
}

fn cmd_segment(args: SegmentArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let clean = load_image(&args.image, args.synthetic)?;
    let truth: Option<Vec<usize>> = match (&args.truth, clean.labels()) {
        (Some(path), _) => {
            let img = io::load_pgm(path).map_err(io_error)?;
            if img.n_samples() != clean.n_samples() {
                return Err(CliError::Usage("truth image size differs from input".into()));
            }
            Some(truth_from_image(&img)?)
        }
        (None, Some(labels)) => Some(labels.to_vec()),
        (None, None) => None,
    };
    let noise = parse_noise(&args.noise)?;
    let noisy = apply_noise(&clean, noise, args.model.seed)?;
    let filtered = apply_filter(&noisy, &args.filter)?;
    let pre = params::parse_pre(&args.pre).map_err(CliError::Usage)?;
    let data = eval::preprocess(&filtered, pre);
    let config = build_config(&args.model, &data)?;
    let init = match args.init.trim() {
        "random" => Init::Random,
        "kde" => {
            let span = data.samples().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| {
                (a.0.min(v), a.1.max(v))
            });
            let bandwidth = args.kde_bandwidth.unwrap_or((span.1 - span.0).max(1e-6) / 64.0);
            let centroids =
                eval::kde_peak_centroids(&data, config.clusters, bandwidth).map_err(usage)?;
            let v0 = Array2::from_shape_vec((config.clusters, 1), centroids)
                .expect("one centroid per cluster");
            Init::Centroids(v0)
        }
        other => return Err(CliError::Usage(format!("unknown init {other:?}"))),
    };
    let best = run_restarts(&data, &config, args.model.restarts, &init, truth.as_deref())?;
    let seconds = started.elapsed().as_secs_f64();
    match best.accuracy {
        Some(sa) => println!(
            "{}: SA {:.2}% (seed {}, {} restarts, {:.2}s)",
            params::model_label(&config),
            sa,
            best.best_seed,
            args.model.restarts,
            seconds
        ),
        None => println!(
            "{}: best objective {:.6} ({:.2}s)",
            params::model_label(&config),
            best.best_objective,
            seconds
        ),
    }
    if let Some(out) = &args.out {
        let metrics = RunMetrics {
            accuracy_percent: best.accuracy,
            best_objective: Some(best.best_objective),
            restarts: Some(args.model.restarts),
            best_seed: Some(best.best_seed),
            gamma_selected: None,
            seconds: Some(seconds),
        };
        io::save_result(out, &best.result, &metrics).map_err(io_error)?;
    }
    if let Some(path) = &args.save_labels {
        let grid = data.grid().expect("segmentation input is an image");
        save_label_image(path, &best.result, grid)?;
    }
    Ok(())
}

fn cmd_tune_gamma(args: TuneGammaArgs) -> Result<(), CliError> {
    let (data, default_pre) = if let Some(path) = &args.data {
        (load_csv_dataset(path, &args.label_col, args.header)?, Preprocess::NoP)
    } else {
        let clean = load_image(&args.image, args.synthetic)?;
        let noise = parse_noise(&args.noise)?;
        let noisy = apply_noise(&clean, noise, args.model.seed)?;
        (apply_filter(&noisy, &args.filter)?, Preprocess::Scale(5.0))
    };
    let pre = if args.pre == "auto" {
        default_pre
    } else {
        params::parse_pre(&args.pre).map_err(CliError::Usage)?
    };
    let data = eval::preprocess(&data, pre);
    let config = build_config(&args.model, &data)?;
    if matches!(config.penalty, PenaltyVariant::None) {
        return Err(CliError::Usage("gamma tuning needs --penalty si or sii".into()));
    }
    if !(0.0..1.0).contains(&args.holdout) {
        return Err(CliError::Usage(format!("holdout must lie in [0, 1), got {}", args.holdout)));
    }
    let n = data.n_samples();
    let all: Vec<usize> = (0..n).collect();
    let (train, validation) = if args.holdout == 0.0 {
        (all.clone(), all.clone())
    } else {
        // Seeded shuffle picks the held-out samples; both halves are then
        // restored to the original order so sequence neighborhoods stay
        // meaningful on the training subset.
        let mut order = all.clone();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(
            args.model.seed ^ 0x9e37_79b9_7f4a_7c15,
        );
        for i in (1..order.len()).rev() {
            let j = rand::Rng::gen_range(&mut rng, 0..=i);
            order.swap(i, j);
        }
        let cut = ((1.0 - args.holdout) * n as f64).ceil() as usize;
        let cut = cut.clamp(1, n - 1);
        let (train, validation) = order.split_at(cut);
        let mut train = train.to_vec();
        let mut validation = validation.to_vec();
        train.sort_unstable();
        validation.sort_unstable();
        (train, validation)
    };
    let tuned = tuning::tune_gamma(&data, (&train, &validation), &config, args.tgamma)
        .map_err(|e| match e {
            tuning::TuningError::Engine(inner) => engine_error(inner),
            other => CliError::Usage(other.to_string()),
        })?;
    let mut csv = String::from("gamma,e_kerv\n");
    for (gamma, error) in &tuned.trace {
        let _ = writeln!(csv, "{gamma},{error}");
    }
    match &args.out {
        Some(path) => std::fs::write(path, &csv).map_err(runtime)?,
        None => print!("{csv}"),
    }
    println!(
        "selected gamma = {} after {} candidate(s){}",
        tuned.best_gamma,
        tuned.trace.len(),
        if tuned.stopped_early { " (stopped early)" } else { "" }
    );
    Ok(())
}

/// One grid cell of a benchmark sweep, still in textual form.
#[derive(Clone)]
struct GridCell {
    weight: String,
    kernel: String,
    penalty: String,
    topology: String,
    m: f64,
    gamma: f64,
    pre: String,
}

fn synth_image_grid() -> Vec<GridCell> {
    let weights = ["l2", "l1l2", "huber:1s", "gm", "welsch:1s", "cauchy:1s", "fair:1s"];
    let mut cells = Vec::new();
    for w in weights {
        cells.push(GridCell {
            weight: w.into(),
            kernel: "none".into(),
            penalty: "none".into(),
            topology: "auto".into(),
            m: 2.0,
            gamma: 0.0,
            pre: "scale:5".into(),
        });
    }
    for penalty in ["si", "sii"] {
        for topology in ["nn1", "nn2"] {
            for w in weights {
                cells.push(GridCell {
                    weight: w.into(),
                    kernel: "none".into(),
                    penalty: penalty.into(),
                    topology: topology.into(),
                    m: 2.0,
                    gamma: 3.8,
                    pre: "scale:5".into(),
                });
            }
        }
    }
    cells
}

fn uci_mini_grid() -> Vec<GridCell> {
    let weights = ["l2", "huber:1s", "welsch:1s", "cauchy:1s", "fair:1s"];
    // (kernel, penalty, topology, gamma) per model family.
    let models: [(&str, &str, &str, f64); 4] = [
        ("none", "none", "auto", 0.0),
        ("none", "si", "seq", 1.0),
        ("none", "sii", "seq", 1.0),
        ("rbf:1s2", "none", "auto", 0.0),
    ];
    let mut cells = Vec::new();
    for (kernel, penalty, topology, gamma) in models {
        for w in weights {
            for m in [1.2, 2.0, 3.0] {
                cells.push(GridCell {
                    weight: w.to_string(),
                    kernel: kernel.into(),
                    penalty: penalty.into(),
                    topology: topology.into(),
                    m,
                    gamma,
                    pre: "n01".into(),
                });
            }
        }
    }
    cells
}

fn parse_grid_file(path: &PathBuf) -> Result<Vec<GridCell>, CliError> {
    let text = std::fs::read_to_string(path).map_err(runtime)?;
    let mut cells = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("weight")) {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 7 {
            return Err(CliError::Usage(format!(
                "grid line {}: expected weight,kernel,penalty,topology,m,gamma,pre",
                i + 1
            )));
        }
        let m: f64 =
            parts[4].parse().map_err(|_| CliError::Usage(format!("grid line {}: bad m", i + 1)))?;
        let gamma: f64 = parts[5]
            .parse()
            .map_err(|_| CliError::Usage(format!("grid line {}: bad gamma", i + 1)))?;
        cells.push(GridCell {
            weight: parts[0].into(),
            kernel: parts[1].into(),
            penalty: parts[2].into(),
            topology: parts[3].into(),
            m,
            gamma,
            pre: parts[6].into(),
        });
    }
    if cells.is_empty() {
        return Err(CliError::Usage("grid file contains no cells".into()));
    }
    Ok(cells)
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<(), CliError> {
    let cells = match &args.grid {
        Some(path) => parse_grid_file(path)?,
        None => match args.suite.as_str() {
            "synth-image" => synth_image_grid(),
            "uci-mini" => uci_mini_grid(),
            other => return Err(CliError::Usage(format!("unknown suite {other:?}"))),
        },
    };
    let raw = match args.suite.as_str() {
        "synth-image" => {
            let clean = io::synth_two_class_image();
            let noise = parse_noise(&args.noise)?;
            apply_noise(&clean, noise, args.seed)?
        }
        "uci-mini" => {
            let path = args
                .data
                .as_ref()
                .ok_or_else(|| CliError::Usage("uci-mini needs --data <csv>".into()))?;
            load_csv_dataset(path, &args.label_col, args.header)?
        }
        other => return Err(CliError::Usage(format!("unknown suite {other:?}"))),
    };
    let truth = raw.labels().map(|l| l.to_vec());

    // Preprocessed data and its diameter are shared across cells with the
    // same scaling.
    let mut prepared: std::collections::HashMap<String, (Dataset, Option<f64>)> =
        std::collections::HashMap::new();
    let mut summary =
        String::from("model,weight,kernel,penalty,topology,m,gamma,pre,best_metric,seconds\n");
    for cell in &cells {
        let started = Instant::now();
        if !prepared.contains_key(&cell.pre) {
            let pre = params::parse_pre(&cell.pre).map_err(CliError::Usage)?;
            prepared.insert(cell.pre.clone(), (eval::preprocess(&raw, pre), None));
        }
        let model = ModelArgs {
            clusters: truth.as_ref().map_or(2, |t| t.iter().max().unwrap_or(&1) + 1),
            m: cell.m,
            weight: cell.weight.clone(),
            kernel: cell.kernel.clone(),
            penalty: cell.penalty.clone(),
            topology: cell.topology.clone(),
            gamma: cell.gamma,
            epsilon: 1e-5,
            max_iter: 20,
            restarts: args.restarts,
            seed: args.seed,
        };
        let (data, sigma_cache) = prepared.get_mut(&cell.pre).expect("prepared above");
        let config = build_config_cached(&model, data, sigma_cache)?;
        let best = run_restarts(data, &config, args.restarts, &Init::Random, truth.as_deref())?;
        let metric = best.accuracy.unwrap_or(best.best_objective);
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{},{:.4},{:.3}",
            params::model_label(&config),
            cell.weight,
            cell.kernel,
            cell.penalty,
            params::topology_label(&config.penalty),
            cell.m,
            cell.gamma,
            cell.pre,
            metric,
            started.elapsed().as_secs_f64()
        );
    }
    match &args.out {
        Some(path) => std::fs::write(path, &summary).map_err(runtime)?,
        None => print!("{summary}"),
    }
    Ok(())
}
