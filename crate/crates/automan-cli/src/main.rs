//! Batch command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use automan_core::data::{fit_statistics, load_csv, Dataset, Schema};
use automan_core::gaussian::{approximation_report, verify_algebra, CORPUS};
use automan_core::pipeline::PipelineModel;
use automan_core::trainer::{
    benchmark_scaling, export_features, load_checkpoint, render_report_csv, save_checkpoint,
    seed_sweep, BenchOptions, Trainer, TrainConfig,
};
use automan_core::Error;

#[derive(Parser)]
#[command(
    name = "automan",
    about = "Mask-based automated feature engineering over tabular and temporal data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn transforms and masks on a dataset; write checkpoint, report,
    /// and engineered features per split.
    Train(TrainArgs),
    /// Apply a trained checkpoint to a data file; write engineered features
    /// and the provenance manifest.
    Apply(ApplyArgs),
    /// Re-export per-split engineered features from a checkpoint using the
    /// original split fractions and seed.
    Export(ExportArgs),
    /// Wall-clock scaling benchmark over feature counts, sample counts, and
    /// bank sizes.
    Bench(BenchArgs),
    /// Gaussian-sum approximation demo: fit corpus targets and verify the
    /// product-closure algebra.
    GaussDemo(GaussArgs),
    /// Train several trials with consecutive seeds; report mean and spread.
    SeedSweep(SweepArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV data file.
    #[arg(long)]
    data: PathBuf,
    /// JSON schema file.
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Args, Clone)]
struct FitArgs {
    /// Optimization steps.
    #[arg(long, default_value_t = 3000)]
    steps: usize,
    /// Minibatch size.
    #[arg(long, default_value_t = 64)]
    batch: usize,
    /// Learning rate.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Master seed for init, splits, and batching.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Local mask selection width.
    #[arg(long, default_value_t = 5)]
    h: usize,
    /// Global mask selection width.
    #[arg(long = "h-glb", default_value_t = 16)]
    h_glb: usize,
    /// train,validation,test fractions.
    #[arg(long, default_value = "0.7,0.15,0.15")]
    split: String,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    fit: FitArgs,
}

#[derive(Args)]
struct ApplyArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// CSV data file (same schema as training).
    #[arg(long)]
    data: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// train,validation,test fractions used at training time.
    #[arg(long, default_value = "0.7,0.15,0.15")]
    split: String,
    /// Seed used at training time.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated feature counts, e.g. 100,200,400.
    #[arg(long, default_value = "100,200")]
    sizes: String,
    /// Timed steps per measurement.
    #[arg(long, default_value_t = 40)]
    steps: usize,
    /// Repetitions per configuration (median reported).
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct GaussArgs {
    /// Target name: sin, abs-smooth, step-smooth, ripple, or `all`.
    #[arg(long, default_value = "sin")]
    target: String,
    /// Comma-separated component counts.
    #[arg(long = "K", default_value = "3,10")]
    k: String,
    /// Domain half-width.
    #[arg(long = "N", default_value_t = 3.0)]
    n: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional directory for the CSV report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of trials with consecutive seeds.
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[command(flatten)]
    fit: FitArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Usage problems (and --help/--version) all exit through here.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Data { .. } | Error::Schema(_) | Error::Io(_) | Error::Checkpoint(_) => 2,
        Error::Numeric(_)
        | Error::NonFinite { .. }
        | Error::ShapeMismatch { .. }
        | Error::InvalidArg { .. } => 3,
    }
}

fn parse_fractions(text: &str) -> Result<(f64, f64, f64), Error> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::invalid("--split", "expected three comma-separated fractions"));
    }
    let mut vals = [0.0; 3];
    for (slot, part) in vals.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| Error::invalid("--split", format!("bad fraction '{part}'")))?;
    }
    Ok((vals[0], vals[1], vals[2]))
}

fn parse_usize_list(text: &str, flag: &'static str) -> Result<Vec<usize>, Error> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| Error::invalid(flag, format!("bad value '{part}'")))
        })
        .collect()
}

fn load_dataset(args: &DataArgs) -> Result<Dataset, Error> {
    let schema_text = std::fs::read_to_string(&args.schema).map_err(|e| {
        Error::data(args.schema.display().to_string(), format!("cannot read schema: {e}"))
    })?;
    let schema = Schema::from_json(&schema_text)?;
    load_csv(&args.data, &schema)
}

fn train_config(fit: &FitArgs) -> TrainConfig {
    TrainConfig {
        steps: fit.steps,
        batch_size: fit.batch,
        learning_rate: fit.lr,
        seed: fit.seed,
        h: fit.h,
        h_glb: fit.h_glb,
        ..TrainConfig::default()
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Apply(args) => cmd_apply(args),
        Command::Export(args) => cmd_export(args),
        Command::Bench(args) => cmd_bench(args),
        Command::GaussDemo(args) => cmd_gauss(args),
        Command::SeedSweep(args) => cmd_sweep(args),
    }
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let config = train_config(&args.fit);
    config.validate()?;
    let fractions = parse_fractions(&args.fit.split)?;

    let mut dataset = load_dataset(&args.data)?;
    dataset.split(fractions, config.seed)?;
    let stats = fit_statistics(&dataset)?;
    let model = PipelineModel::new(&dataset, stats, config.pipeline_config(), config.seed)?;

    let trainer = Trainer::new(model, dataset, config.clone())?;
    let (model, report) = trainer.train()?;

    std::fs::create_dir_all(&args.out)?;
    save_checkpoint(&model, config.seed, &args.out.join("checkpoint.json"))?;
    std::fs::write(args.out.join("report.csv"), render_report_csv(&report))?;
    export_features(&model, &trainer_dataset(&args, &config)?, &args.out)?;

    println!("final validation metric: {}", report.final_metric);
    println!("best step: {}", report.best_step);
    println!("wall clock: {:.2}s", report.wall_clock_secs);
    for line in &report.provenance {
        println!("kept: {line}");
    }
    Ok(())
}

/// Rebuild the split dataset exactly as `cmd_train` saw it; split tags are a
/// pure function of the file, fractions, and seed.
fn trainer_dataset(args: &TrainArgs, config: &TrainConfig) -> Result<Dataset, Error> {
    let mut dataset = load_dataset(&args.data)?;
    dataset.split(parse_fractions(&args.fit.split)?, config.seed)?;
    Ok(dataset)
}

fn cmd_apply(args: ApplyArgs) -> Result<(), Error> {
    let model = load_checkpoint(&args.checkpoint)?;
    let dataset = load_csv(&args.data, &model.schema)?;
    let rows = dataset.all_rows();
    let eng = model.apply(&dataset, &rows)?;

    std::fs::create_dir_all(&args.out)?;
    let mut csv = String::new();
    let slugs: Vec<String> = eng.provenance.iter().enumerate().map(|(i, p)| p.slug(i)).collect();
    csv.push_str(&slugs.join(","));
    csv.push('\n');
    for r in 0..rows.len() {
        for c in 0..eng.matrix.cols() {
            if c > 0 {
                csv.push(',');
            }
            csv.push_str(&format!("{}", eng.matrix.at(r, c)));
        }
        csv.push('\n');
    }
    std::fs::write(args.out.join("features.csv"), csv)?;
    std::fs::write(
        args.out.join("manifest.txt"),
        automan_core::trainer::render_manifest(&eng),
    )?;
    println!("engineered {} rows x {} columns", rows.len(), eng.matrix.cols());
    Ok(())
}

fn cmd_export(args: ExportArgs) -> Result<(), Error> {
    let model = load_checkpoint(&args.checkpoint)?;
    let mut dataset = load_csv(&args.data, &model.schema)?;
    dataset.split(parse_fractions(&args.split)?, args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    export_features(&model, &dataset, &args.out)?;
    println!("exported features for each split to {}", args.out.display());
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Error> {
    let sizes = parse_usize_list(&args.sizes, "--sizes")?;
    if sizes.is_empty() {
        return Err(Error::invalid("--sizes", "need at least one size"));
    }
    let opts = BenchOptions {
        steps: args.steps,
        repeats: args.repeats,
        seed: args.seed,
        ..BenchOptions::default()
    };
    let report = benchmark_scaling(&sizes, &opts)?;
    print!("{}", report.render());
    if sizes.len() >= 2 {
        for pair in sizes.windows(2) {
            if let Some(ratio) = report.ratio("d", pair[0], pair[1]) {
                println!("ratio d {} -> {}: {ratio:.3}", pair[0], pair[1]);
            }
        }
    }
    if let Some(ratio) = report.ratio("n", 1000, 2000) {
        println!("ratio n 1000 -> 2000: {ratio:.3}");
    }
    let full = automan_core::transforms::tabular_bank(true, false).len();
    if let Some(ratio) = report.ratio("k", full, full / 2) {
        println!("ratio k {} -> {}: {ratio:.3}", full, full / 2);
    }
    Ok(())
}

fn cmd_gauss(args: GaussArgs) -> Result<(), Error> {
    let ks = parse_usize_list(&args.k, "--K")?;
    if ks.is_empty() {
        return Err(Error::invalid("--K", "need at least one component count"));
    }
    let targets: Vec<String> = if args.target == "all" {
        CORPUS.iter().map(|s| s.to_string()).collect()
    } else {
        vec![args.target.clone()]
    };

    let threads = worker_threads();
    let reports = run_across_threads(threads, targets, |name| {
        approximation_report(&name, &ks, args.n, args.seed)
    })?;

    let mut combined = String::from("target,half_width,resolution,components,uniform_error\n");
    for report in &reports {
        for line in report.render_csv().lines().skip(1) {
            combined.push_str(line);
            combined.push('\n');
        }
        for (k, err) in &report.errors {
            println!("{} K={k}: uniform error {err:.5}", report.target);
        }
    }

    let algebra = verify_algebra(args.seed);
    println!(
        "product closure max deviation: {:.3e} (separation {}, positivity {})",
        algebra.product_max_deviation,
        if algebra.separation_ok { "ok" } else { "FAILED" },
        if algebra.positivity_ok { "ok" } else { "FAILED" },
    );

    if let Some(out) = args.out {
        std::fs::create_dir_all(&out)?;
        std::fs::write(out.join("gauss_report.csv"), combined)?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    if args.trials == 0 {
        return Err(Error::invalid("--trials", "must be positive"));
    }
    let config = train_config(&args.fit);
    config.validate()?;
    let mut dataset = load_dataset(&args.data)?;
    dataset.split(parse_fractions(&args.fit.split)?, config.seed)?;

    let report = seed_sweep(&dataset, &config, args.trials)?;
    for (trial, metric) in report.metrics.iter().enumerate() {
        println!("trial {trial} (seed {}): {metric}", config.seed.wrapping_add(trial as u64));
    }
    println!("mean {} +/- {}", report.mean, report.std_dev);
    Ok(())
}

/// Worker-thread cap from AUTOMAN_THREADS (default 1).
fn worker_threads() -> usize {
    std::env::var("AUTOMAN_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Run independent jobs across at most `threads` workers, preserving input
/// order in the output (results are deterministic regardless of scheduling).
fn run_across_threads<I, O, F>(threads: usize, inputs: Vec<I>, job: F) -> Result<Vec<O>, Error>
where
    I: Send,
    O: Send,
    F: Fn(I) -> Result<O, Error> + Sync,
{
    if threads <= 1 || inputs.len() <= 1 {
        return inputs.into_iter().map(&job).collect();
    }
    let mut results: Vec<Option<Result<O, Error>>> = inputs.iter().map(|_| None).collect();
    let chunk = inputs.len().div_ceil(threads);
    let mut batches: Vec<Vec<(usize, I)>> = Vec::new();
    for (i, input) in inputs.into_iter().enumerate() {
        if i % chunk == 0 {
            batches.push(Vec::with_capacity(chunk));
        }
        batches.last_mut().expect("pushed above").push((i, input));
    }
    let job_ref = &job;

    std::thread::scope(|scope| {
        let handles: Vec<_> = batches
            .into_iter()
            .map(|batch| {
                scope.spawn(move || {
                    batch
                        .into_iter()
                        .map(|(i, input)| (i, job_ref(input)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for handle in handles {
            for (i, res) in handle.join().expect("worker panicked") {
                results[i] = Some(res);
            }
        }
    });

    results
        .into_iter()
        .map(|slot| slot.expect("every job ran"))
        .collect()
}
