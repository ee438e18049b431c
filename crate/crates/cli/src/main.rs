use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use clap::{Args, Parser, Subcommand};
use log::info;

use delayrc::config::ExperimentConfig;
use delayrc::dataset::{self, DatasetFile};
use delayrc::optimizer::{scan_beta2_delay, sweep_attenuation, PresetName, SweepOptions};
use delayrc::parallel::Parallelism;
use delayrc::results::{self, ResultFile, ResultPayload, ScanRecord, SweepRecord, TimingSidecar};
use delayrc::synthetic::{self, LagContextParams, PrototypeParams};
use delayrc::tasks::{self, MackeyGlassParams, Narma10Params, SplitSpec};
use delayrc::Error;

#[derive(Parser)]
#[command(name = "delayrc", version, about = "Delayed-input ring reservoir experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a task dataset file.
    Generate(GenerateArgs),
    /// Scan the (beta2, delay) grid at fixed attenuation.
    Scan(RunArgs),
    /// Compare optimisation modes over an attenuation grid.
    Sweep(RunArgs),
    /// Summarise result files.
    Report {
        #[arg(required = true)]
        results: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[command(subcommand)]
    task: GenerateTask,
    /// Output dataset file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write a CSV export of the dataset here.
    #[arg(long, global = true)]
    text: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GenerateTask {
    Narma10 {
        #[arg(long)]
        length: Option<usize>,
    },
    MackeyGlass {
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Noisy class prototypes, separable by construction.
    SyntheticUtterances {
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        channels: Option<usize>,
    },
    /// Two classes told apart only by the relation to the sample `lag` steps back.
    LagContext {
        #[arg(long)]
        lag: Option<usize>,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        length: Option<usize>,
    },
    /// Precomputed features from CSV (`id,label,f_0,...`).
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        classes: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Task preset; overrides the config's preset.
    #[arg(long)]
    preset: Option<PresetName>,
    /// Output directory; overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Experiment seed; overrides the config's experiment_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads: 0 = all cores, 1 = sequential.
    #[arg(long, default_value_t = 0)]
    parallelism: usize,
}

/// Exit code plus message.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_validation() { 1 } else { 2 },
            message: e.to_string(),
        }
    }
}

fn validation(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

/// Unreadable inputs are the caller's mistake, not a runtime failure.
fn input_error(e: Error) -> Failure {
    match e {
        Error::Io { .. } => validation(e.to_string()),
        e => e.into(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Scan(args) => scan(args),
        Command::Sweep(args) => sweep(args),
        Command::Report { results } => report(&results),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn generate(args: GenerateArgs) -> Result<(), Failure> {
    let out = args.out.ok_or_else(|| validation("generate needs --out <file>"))?;
    let file: DatasetFile = match args.task {
        GenerateTask::Narma10 { length } => {
            let mut p = Narma10Params::default();
            if let Some(len) = length {
                p.length = len;
                p.split = SplitSpec::scaled(len);
            }
            if let Some(s) = args.seed {
                p.input_seed = s;
            }
            tasks::generate_narma10(&p)?.into()
        }
        GenerateTask::MackeyGlass { length, horizon } => {
            if args.seed.is_some() {
                log::warn!("mackey-glass is deterministic; --seed is ignored");
            }
            let mut p = MackeyGlassParams::default();
            if let Some(len) = length {
                p.length = len;
                p.split = SplitSpec::scaled(len);
            }
            if let Some(h) = horizon {
                p.horizon = h;
            }
            tasks::generate_mackey_glass(&p)?.into()
        }
        GenerateTask::SyntheticUtterances {
            classes,
            per_class,
            channels,
        } => {
            let d = PrototypeParams::default();
            let p = PrototypeParams {
                n_classes: classes.unwrap_or(d.n_classes),
                per_class: per_class.unwrap_or(d.per_class),
                channels: channels.unwrap_or(d.channels),
                seed: args.seed.unwrap_or(d.seed),
                ..d
            };
            synthetic::prototype_utterances(&p)?.into()
        }
        GenerateTask::LagContext { lag, per_class, length } => {
            let d = LagContextParams::default();
            let p = LagContextParams {
                lag: lag.unwrap_or(d.lag),
                per_class: per_class.unwrap_or(d.per_class),
                length: length.unwrap_or(d.length),
                seed: args.seed.unwrap_or(d.seed),
            };
            synthetic::lag_context_utterances(&p)?.into()
        }
        GenerateTask::Import { input, classes } => {
            let f = File::open(&input).map_err(|e| validation(format!("{}: {e}", input.display())))?;
            dataset::import_utterances_csv(BufReader::new(f), classes)?.into()
        }
    };
    dataset::write_dataset(&out, &file)?;
    info!("wrote {}", out.display());
    if let Some(text) = args.text {
        let f = File::create(&text).map_err(|e| Failure::from(Error::Io { path: text.clone(), source: e }))?;
        let mut w = BufWriter::new(f);
        dataset::write_text(&file, &mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Failure::from(Error::Io { path: text.clone(), source: e }))?;
        info!("wrote {}", text.display());
    }
    Ok(())
}

/// Config after command-line overrides; this is what gets echoed into the
/// result file, so re-running the echo reproduces the run. `--out` is not
/// folded in: where results land does not change them.
fn resolve_config(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let (mut cfg, base) = match (&args.config, args.preset) {
        (Some(path), _) => {
            let cfg = ExperimentConfig::load(path).map_err(input_error)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (cfg, base)
        }
        (None, Some(p)) => (ExperimentConfig::new(p), PathBuf::new()),
        (None, None) => return Err(validation("need --config <file> or --preset <name>")),
    };
    if let Some(p) = args.preset {
        cfg.preset = p;
    }
    if let Some(s) = args.seed {
        cfg.experiment_seed = s;
    }
    cfg.validate()?;
    Ok((cfg, base))
}

fn output_dir(args: &RunArgs, cfg: &ExperimentConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn scan(args: RunArgs) -> Result<(), Failure> {
    let (cfg, base) = resolve_config(&args)?;
    let setup = cfg.setup()?;
    let task = cfg.build_task(&base).map_err(input_error)?;
    info!(
        "scan {}: alpha={} grid {}x{} seeds {:?}",
        cfg.preset,
        setup.alpha,
        cfg.grid.delays.len(),
        cfg.grid.beta2.len(),
        cfg.mask_seeds
    );
    let started = SystemTime::now();
    let clock = Instant::now();
    let grid = scan_beta2_delay(
        &task,
        &setup,
        &cfg.grid,
        &cfg.mask_seeds,
        cfg.experiment_seed,
        Parallelism::from_count(args.parallelism),
    )?;
    let mut timing = TimingSidecar::now(started, clock.elapsed());
    timing.cell_timings_ms = grid.cell_timings_ms.clone();
    info!(
        "best {:?} = {} at beta2={} d={}",
        grid.metric, grid.best.metric, grid.best.beta2, grid.best.delay
    );
    let file = ResultFile::new(ResultPayload::Scan(ScanRecord {
        task: cfg.preset,
        alpha: setup.alpha,
        config: cfg.clone(),
        grid,
    }));
    for p in results::write_result(&output_dir(&args, &cfg), "scan", &file, &timing)? {
        info!("wrote {}", p.display());
    }
    Ok(())
}

fn sweep(args: RunArgs) -> Result<(), Failure> {
    let (cfg, base) = resolve_config(&args)?;
    if cfg.sweep.modes.is_empty() {
        return Err(validation("sweep.modes must list at least one mode"));
    }
    let setup = cfg.setup()?;
    let task = cfg.build_task(&base).map_err(input_error)?;
    let options = SweepOptions {
        scan_grid: cfg.grid.clone(),
        standard_grid: cfg.sweep.standard.clone(),
        mask_seeds: cfg.mask_seeds.clone(),
        experiment_seed: cfg.experiment_seed,
        parallelism: Parallelism::from_count(args.parallelism),
    };
    let started = SystemTime::now();
    let clock = Instant::now();
    let mut curves = Vec::with_capacity(cfg.sweep.modes.len());
    for &mode in &cfg.sweep.modes {
        info!("sweep {} mode {mode} over {:?} dB", cfg.preset, cfg.sweep.attenuation_grid_db);
        curves.push(sweep_attenuation(
            &task,
            &setup,
            mode,
            &cfg.sweep.attenuation_grid_db,
            &cfg.attenuation_map,
            &options,
        )?);
    }
    let timing = TimingSidecar::now(started, clock.elapsed());
    let file = ResultFile::new(ResultPayload::Sweep(SweepRecord {
        task: cfg.preset,
        config: cfg.clone(),
        curves,
    }));
    for p in results::write_result(&output_dir(&args, &cfg), "sweep", &file, &timing)? {
        info!("wrote {}", p.display());
    }
    Ok(())
}

fn report(paths: &[PathBuf]) -> Result<(), Failure> {
    let table = results::report(paths).map_err(input_error)?;
    print!("{table}");
    Ok(())
}
