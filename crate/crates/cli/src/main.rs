//! `dps`: degrade, restore and evaluate audio with diffusion posterior
//! sampling, and run the comparison matrix and oracle checks.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dps_core::harness::config::RunConfig;
use dps_core::harness::experiment::{
    build_denoiser, load_dataset, run_matrix, DatasetSpec, DenoiserSource, ExperimentSpec,
    DEFAULT_TRAIN_ITEMS,
};
use dps_core::harness::oracle::{run_all, OracleOptions};
use dps_core::harness::presets::{Preset, Task};
use dps_core::harness::synth::DEFAULT_SEGMENT_LEN;
use dps_core::sampler::restore_into;
use dps_core::{
    degrade, load_wav, save_wav, train_shrinkage, BandSpec, BrickwallLpf, DegradationOp, Error, HardClip,
    Measurement, MetricReport, NoiseSchedule, SamplerConfig, ScheduleParams, ShrinkageConfig, Trace,
    WavEncoding,
};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "dps", version, about = "Diffusion posterior sampling for audio declipping and bandwidth extension")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clip or low-pass a WAV file.
    Degrade(DegradeArgs),
    /// Restore a degraded WAV file; writes a trace CSV next to the output.
    Restore(RestoreArgs),
    /// Print SI-SDR, SDR and LSD of an estimate against a reference.
    Evaluate(EvaluateArgs),
    /// Train a shrinkage denoiser and save it.
    TrainDenoiser(TrainArgs),
    /// Run the method-comparison matrix.
    RunMatrix(MatrixArgs),
    /// Run the oracle acceptance criteria.
    OracleCheck(OracleArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TaskKind {
    Declip,
    Bwe,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Encoding {
    Float32,
    Pcm16,
}

impl From<Encoding> for WavEncoding {
    fn from(e: Encoding) -> Self {
        match e {
            Encoding::Float32 => WavEncoding::Float32,
            Encoding::Pcm16 => WavEncoding::Pcm16,
        }
    }
}

#[derive(Args, Debug)]
struct TaskArgs {
    #[arg(long, value_enum)]
    task: Option<TaskKind>,
    /// Target input SDR in dB for declipping.
    #[arg(long)]
    sdr: Option<f64>,
    /// Explicit clip threshold (declipping).
    #[arg(long)]
    clip: Option<f64>,
    /// Cutoff frequency in Hz for bandwidth extension.
    #[arg(long)]
    fc: Option<f64>,
}

#[derive(Args, Debug)]
struct DegradeArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Measurement noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    sigma_y: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Encoding::Float32)]
    encoding: Encoding,
}

#[derive(Args, Debug)]
struct RestoreArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Run configuration file (see `presets/`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Method preset; overrides the config file's preset.
    #[arg(long)]
    preset: Option<String>,
    /// `<path>`, `gaussian:flat`, `gaussian:pink` or `train:<items>`.
    #[arg(long)]
    denoiser: Option<String>,
    #[arg(long)]
    sigma_y: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of sampler steps; overrides the config file.
    #[arg(long)]
    steps: Option<usize>,
    /// Trace CSV path (default: `<out>.trace.csv`).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Encoding::Float32)]
    encoding: Encoding,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    estimate: PathBuf,
    #[arg(long, default_value = "-")]
    task: String,
    #[arg(long, default_value = "-")]
    severity: String,
    #[arg(long, default_value = "-")]
    method: String,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// `synthetic:<n>` or a directory of WAV files.
    #[arg(long, default_value_t = format!("synthetic:{DEFAULT_TRAIN_ITEMS}"))]
    dataset: String,
    #[arg(long)]
    out: PathBuf,
    /// Number of uniform frequency bands.
    #[arg(long, default_value_t = 256)]
    bands: usize,
    #[arg(long, default_value_t = 48)]
    sigma_bins: usize,
    #[arg(long, default_value_t = DEFAULT_SEGMENT_LEN)]
    segment_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct MatrixArgs {
    /// `synthetic:<n>` or a directory of WAV files.
    #[arg(long, default_value = "synthetic:20")]
    dataset: String,
    /// Comma-separated `declip:<db>` / `bwe:<hz>` entries.
    #[arg(long, value_delimiter = ',', default_values_t = ["declip:5".to_string(), "declip:10".into(), "bwe:3000".into(), "bwe:5000".into()])]
    tasks: Vec<String>,
    /// Comma-separated preset names.
    #[arg(long, value_delimiter = ',', default_values_t = Preset::TABLE.iter().map(|p| p.name().to_string()).collect::<Vec<_>>())]
    methods: Vec<String>,
    #[arg(long, default_value_t = format!("train:{DEFAULT_TRAIN_ITEMS}"))]
    denoiser: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEGMENT_LEN)]
    segment_len: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma_y: f64,
    /// Per-item CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-cell summary CSV output.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Skip the end-to-end improvement criterion (several minutes).
    #[arg(long)]
    skip_end_to_end: bool,
    #[arg(long, default_value_t = 50)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
    Acceptance(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn error_code(e: &anyhow::Error) -> &'static str {
    match e.downcast_ref::<Error>() {
        Some(Error::InvalidSignal(_)) => "invalid-signal",
        Some(Error::LengthMismatch { .. }) => "length-mismatch",
        Some(Error::InvalidParameter { .. }) => "invalid-parameter",
        Some(Error::UnsupportedEncoding(_)) => "unsupported-encoding",
        Some(Error::Io { .. }) => "io",
        Some(Error::Wav { .. }) => "wav",
        Some(Error::Unachievable { .. }) => "unachievable",
        Some(Error::EmptyDataset) => "empty-dataset",
        Some(Error::GuidanceBlowUp { .. }) => "guidance-blow-up",
        Some(Error::NonFinite(_)) => "non-finite",
        Some(Error::DenoiserFormat(_)) => "denoiser-format",
        Some(Error::Config { .. }) => "config",
        None => "runtime",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Degrade(a) => cmd_degrade(a),
        Command::Restore(a) => cmd_restore(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::TrainDenoiser(a) => cmd_train(a),
        Command::RunMatrix(a) => cmd_matrix(a),
        Command::OracleCheck(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error[usage]: {msg}");
            eprintln!("run `dps --help` for usage");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error[{}]: {e:#}", error_code(&e));
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Acceptance(msg)) => {
            eprintln!("error[acceptance]: {msg}");
            ExitCode::from(EXIT_ACCEPTANCE)
        }
    }
}

/// Operator for degrading a clean signal.
fn degradation_for(args: &TaskArgs, clean: &dps_core::Signal) -> CliResult<DegradationOp> {
    match args.task {
        None => Err(usage("--task is required")),
        Some(TaskKind::Declip) => match (args.clip, args.sdr) {
            (Some(c), None) => Ok(HardClip::new(c)?.into()),
            (None, Some(db)) => Ok(Task::Declip { sdr_db: db }.degrade(clean)?.0),
            (Some(_), Some(_)) => Err(usage("give either --sdr or --clip, not both")),
            (None, None) => Err(usage("--task declip needs --sdr <db> or --clip <threshold>")),
        },
        Some(TaskKind::Bwe) => match args.fc {
            Some(fc) => Ok(BrickwallLpf::new(fc)?.into()),
            None => Err(usage("--task bwe needs --fc <hz>")),
        },
    }
}

fn save(signal: &dps_core::Signal, path: &Path, encoding: Encoding) -> CliResult {
    let report = save_wav(signal, path, encoding.into())?;
    if report.limited > 0 {
        log::warn!("{}: {} samples limited to full scale", path.display(), report.limited);
    }
    Ok(())
}

fn cmd_degrade(a: DegradeArgs) -> CliResult {
    let clean = load_wav(&a.input)?;
    let op = degradation_for(&a.task, &clean)?;
    let meas = degrade(op, &clean, a.sigma_y, a.seed)?;
    save(&meas.y, &a.out, a.encoding)?;
    let sdr = dps_core::sdr(&clean, &meas.y)?;
    match op {
        DegradationOp::Clip(c) => println!("task=declip clip={} sdr_db={sdr:.6}", c.threshold()),
        DegradationOp::Lpf(l) => println!("task=bwe fc={} sdr_db={sdr:.6}", l.cutoff()),
    }
    Ok(())
}

/// Trace path next to `out`: `song.wav` -> `song.trace.csv`.
fn default_trace_path(out: &Path) -> PathBuf {
    out.with_extension("trace.csv")
}

fn write_trace(trace: &Trace, path: &Path) -> CliResult {
    let mut buf = Vec::new();
    trace
        .write_csv(&mut buf)
        .context("formatting trace")?;
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_restore(a: RestoreArgs) -> CliResult {
    let rc = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let y = load_wav(&a.input)?;

    let kind = match (a.task.task, rc.task) {
        (Some(k), _) => k,
        (None, Some(Task::Declip { .. })) => TaskKind::Declip,
        (None, Some(Task::Bwe { .. })) => TaskKind::Bwe,
        (None, None) => return Err(usage("--task is required (or a [task] section in --config)")),
    };
    let (op, task): (DegradationOp, Task) = match kind {
        TaskKind::Declip => {
            if a.task.fc.is_some() {
                return Err(usage("--fc applies to --task bwe"));
            }
            // noiseless clipping saturates exactly at the threshold
            let c = a.task.clip.unwrap_or_else(|| y.max_abs());
            let sdr_db = match rc.task {
                Some(Task::Declip { sdr_db }) => sdr_db,
                _ => a.task.sdr.unwrap_or(0.0),
            };
            (HardClip::new(c)?.into(), Task::Declip { sdr_db })
        }
        TaskKind::Bwe => {
            let fc = match (a.task.fc, rc.task) {
                (Some(fc), _) => fc,
                (None, Some(Task::Bwe { fc_hz })) => fc_hz,
                _ => return Err(usage("--task bwe needs --fc <hz>")),
            };
            (BrickwallLpf::new(fc)?.into(), Task::Bwe { fc_hz: fc })
        }
    };

    let mut rc = rc;
    if let Some(p) = &a.preset {
        rc.preset = Some(p.parse().map_err(|e: Error| usage(e.to_string()))?);
    }
    if let Some(steps) = a.steps {
        rc.schedule.steps = steps;
    }
    let mut cfg: SamplerConfig = rc.sampler(&task)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let sigma_y = a.sigma_y.or(rc.sigma_y).unwrap_or(0.0);
    let schedule = NoiseSchedule::build(rc.schedule.clone())?;

    let source: DenoiserSource = a
        .denoiser
        .as_deref()
        .unwrap_or(&format!("train:{DEFAULT_TRAIN_ITEMS}"))
        .parse()?;
    let denoiser = build_denoiser(
        &source,
        std::slice::from_ref(&y),
        y.len(),
        y.sample_rate(),
        &schedule,
        cfg.seed,
    )?;

    let meas = Measurement::new(y, op, sigma_y)?;
    let trace_path = a.trace.clone().unwrap_or_else(|| default_trace_path(&a.out));
    let mut trace = Trace::default();
    let outcome = restore_into(&meas, denoiser.as_ref(), &cfg, &schedule, &mut trace);
    // keep the partial trace for diagnosis even when sampling fails
    write_trace(&trace, &trace_path)?;
    let x = outcome?;
    save(&x, &a.out, a.encoding)?;
    let last = trace.records.last().map_or(f64::NAN, |r| r.residual);
    println!(
        "records={} final_residual={last:.6e} trace={}",
        trace.records.len(),
        trace_path.display()
    );
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> CliResult {
    let reference = load_wav(&a.reference)?;
    let estimate = load_wav(&a.estimate)?;
    let file = a
        .estimate
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let report = MetricReport::evaluate(&reference, &estimate, file, a.task, a.severity, a.method)?;
    println!("{}", MetricReport::CSV_HEADER);
    println!("{}", report.csv_row());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> CliResult {
    let dataset: DatasetSpec = a.dataset.parse()?;
    let items = load_dataset(&dataset, a.segment_len, a.seed)?;
    let signals: Vec<_> = items.into_iter().map(|i| i.signal).collect();
    let schedule = NoiseSchedule::build(ScheduleParams::default())?;
    let config = ShrinkageConfig {
        bands: BandSpec::Uniform(a.bands),
        sigma_bins: a.sigma_bins,
    };
    let den = train_shrinkage(&signals, &schedule, &config)?;
    den.save(&a.out)?;
    println!(
        "items={} bands={} sigma_bins={} out={}",
        signals.len(),
        den.n_bands(),
        den.sigma_bins().len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_matrix(a: MatrixArgs) -> CliResult {
    let tasks = a
        .tasks
        .iter()
        .map(|t| t.parse::<Task>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| usage(e.to_string()))?;
    let methods = a
        .methods
        .iter()
        .map(|m| m.parse::<Preset>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| usage(e.to_string()))?;
    let mut schedule = ScheduleParams::default();
    if let Some(steps) = a.steps {
        schedule.steps = steps;
    }
    let spec = ExperimentSpec {
        tasks,
        methods,
        dataset: a.dataset.parse()?,
        seed: a.seed,
        schedule,
        sigma_y: a.sigma_y,
        segment_len: a.segment_len,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let items = load_dataset(&spec.dataset, spec.segment_len, spec.seed)?;
    let first = items.first().ok_or(Error::EmptyDataset)?;
    let reference: Vec<_> = items.iter().map(|i| i.signal.clone()).collect();
    let built = NoiseSchedule::build(spec.schedule.clone())?;
    let denoiser = build_denoiser(
        &a.denoiser.parse()?,
        &reference,
        first.signal.len(),
        first.signal.sample_rate(),
        &built,
        spec.seed,
    )?;
    let result = run_matrix(&spec, &items, denoiser.as_ref())?;

    if let Some(path) = &a.out {
        fs::write(path, result.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &a.summary {
        fs::write(path, result.summary_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut stdout = std::io::stdout().lock();
    write!(stdout, "{}", result.summary_table()).context("writing summary")?;
    for f in &result.failures {
        eprintln!(
            "failure: file={} task={} severity={} method={} error={}",
            f.file, f.task, f.severity, f.method, f.message
        );
    }
    let dead = result.failed_cells();
    if !dead.is_empty() {
        let names: Vec<String> = dead
            .iter()
            .map(|c| format!("{}:{}/{}", c.task, c.severity, c.method))
            .collect();
        return Err(anyhow!("every item failed in {} cell(s): {}", dead.len(), names.join(", ")).into());
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> CliResult {
    if a.seeds == 0 {
        return Err(usage("--seeds must be positive"));
    }
    let opts = OracleOptions {
        posterior_seeds: a.seeds,
        skip_end_to_end: a.skip_end_to_end,
        seed: a.seed,
        ..OracleOptions::default()
    };
    let reports = run_all(&opts)?;
    let mut failed = Vec::new();
    for r in &reports {
        print!("{r}");
        if !r.passed() {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        println!("all {} criteria passed", reports.len());
        Ok(())
    } else {
        Err(Failure::Acceptance(format!("{} criteria failed: {}", failed.len(), failed.join(", "))))
    }
}
