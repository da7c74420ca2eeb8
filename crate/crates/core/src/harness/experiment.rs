//! The method-comparison matrix: degrade every item for every task, restore
//! it with every preset, and score the results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::mix_seed;
use super::presets::{Preset, Task};
use super::synth::{synth_corpus, SyntheticVoiceSpec, DEFAULT_SEGMENT_LEN};
use crate::degradation::degrade;
use crate::denoiser::{
    train_shrinkage, Denoiser, GaussianPriorDenoiser, ShrinkageConfig, ShrinkageDenoiser,
};
use crate::error::{invalid, Error, Result};
use crate::metrics::MetricReport;
use crate::sampler::restore;
use crate::schedule::{NoiseSchedule, ScheduleParams};
use crate::signal::Signal;
use crate::wav::load_wav;

const TAG_TRAIN: u64 = 0x74_7261_696e;
const TAG_SEGMENT: u64 = 0x7365_676d;
const TAG_NOISE: u64 = 0x6e_6f69_7365;
const TAG_SAMPLE: u64 = 0x7361_6d70;

/// Where test items come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    /// `synthetic:<n>`
    Synthetic(usize),
    /// Every `.wav` file in a directory, one seeded segment per file.
    Directory(PathBuf),
}

impl FromStr for DatasetSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("synthetic:") {
            Some(n) => n
                .parse()
                .map(DatasetSpec::Synthetic)
                .map_err(|_| invalid("dataset", format!("bad item count `{n}`"))),
            None => Ok(DatasetSpec::Directory(PathBuf::from(s))),
        }
    }
}

/// One named test item.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub name: String,
    pub signal: Signal,
}

/// Loads the dataset as fixed-length segments.
///
/// Synthetic items are generated at `segment_len` samples. WAV files longer
/// than `segment_len` contribute one segment at a seeded offset; shorter
/// files are zero-padded.
pub fn load_dataset(spec: &DatasetSpec, segment_len: usize, seed: u64) -> Result<Vec<Item>> {
    match spec {
        DatasetSpec::Synthetic(n) => {
            let voice = SyntheticVoiceSpec {
                n_items: *n,
                len: segment_len,
                ..SyntheticVoiceSpec::default()
            };
            Ok(synth_corpus(&voice, seed)?
                .into_iter()
                .enumerate()
                .map(|(i, signal)| Item {
                    name: format!("synth_{i:03}"),
                    signal,
                })
                .collect())
        }
        DatasetSpec::Directory(dir) => load_directory(dir, segment_len, seed),
    }
}

fn load_directory(dir: &Path, segment_len: usize, seed: u64) -> Result<Vec<Item>> {
    let io = |source| Error::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyDataset);
    }
    paths
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let full = load_wav(path)?;
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[TAG_SEGMENT, i as u64]));
            let start = if full.len() > segment_len {
                rng.random_range(0..=full.len() - segment_len)
            } else {
                0
            };
            let mut seg: Vec<f64> = full.samples().iter().skip(start).take(segment_len).copied().collect();
            seg.resize(segment_len, 0.0);
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("item_{i:03}"));
            Ok(Item {
                name,
                signal: full.with_samples(seg)?,
            })
        })
        .collect()
}

/// Which denoiser the matrix restores with.
#[derive(Debug, Clone, PartialEq)]
pub enum DenoiserSource {
    /// Train a shrinkage denoiser on a separate synthetic corpus of this
    /// many items.
    TrainSynthetic(usize),
    /// Load a serialized shrinkage denoiser.
    File(PathBuf),
    /// Zero-mean white Gaussian prior matched to the dataset's mean power.
    GaussianFlat,
    /// Zero-mean pink Gaussian prior matched to the dataset's mean power.
    GaussianPink,
}

impl FromStr for DenoiserSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gaussian:flat" => DenoiserSource::GaussianFlat,
            "gaussian:pink" => DenoiserSource::GaussianPink,
            _ => match s.strip_prefix("train:") {
                Some(n) => DenoiserSource::TrainSynthetic(
                    n.parse()
                        .map_err(|_| invalid("denoiser", format!("bad item count `{n}`")))?,
                ),
                None => DenoiserSource::File(PathBuf::from(s)),
            },
        })
    }
}

/// Default size of the training corpus used by `train:<n>`.
pub const DEFAULT_TRAIN_ITEMS: usize = 100;

/// Builds the denoiser for items of length `len` at `sample_rate`.
///
/// `reference` supplies the power level for the Gaussian priors.
pub fn build_denoiser(
    source: &DenoiserSource,
    reference: &[Signal],
    len: usize,
    sample_rate: u32,
    schedule: &NoiseSchedule,
    seed: u64,
) -> Result<Box<dyn Denoiser>> {
    let power = || -> Result<f64> {
        if reference.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(reference.iter().map(|s| s.norm_sq() / s.len() as f64).sum::<f64>() / reference.len() as f64)
    };
    Ok(match source {
        DenoiserSource::TrainSynthetic(n) => {
            let spec = SyntheticVoiceSpec {
                n_items: *n,
                len,
                sample_rate,
                ..SyntheticVoiceSpec::default()
            };
            let train = synth_corpus(&spec, mix_seed(seed, &[TAG_TRAIN]))?;
            Box::new(train_shrinkage(&train, schedule, &ShrinkageConfig::default())?)
        }
        DenoiserSource::File(path) => Box::new(ShrinkageDenoiser::load(path)?),
        DenoiserSource::GaussianFlat => Box::new(GaussianPriorDenoiser::flat(len, sample_rate, power()?)?),
        DenoiserSource::GaussianPink => Box::new(GaussianPriorDenoiser::pink(len, sample_rate, power()?)?),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub tasks: Vec<Task>,
    pub methods: Vec<Preset>,
    pub dataset: DatasetSpec,
    pub seed: u64,
    pub schedule: ScheduleParams,
    pub sigma_y: f64,
    pub segment_len: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            tasks: Task::table_grid(),
            methods: Preset::TABLE.to_vec(),
            dataset: DatasetSpec::Synthetic(20),
            seed: 0,
            schedule: ScheduleParams::default(),
            sigma_y: 0.0,
            segment_len: DEFAULT_SEGMENT_LEN,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(invalid("tasks", "need at least one task"));
        }
        let mut names: Vec<_> = self.methods.iter().map(|m| m.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("methods", "each method may appear once"));
        }
        if self.segment_len == 0 {
            return Err(invalid("segment_len", "must be positive"));
        }
        Ok(())
    }
}

/// A job that failed; the run continues without it.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub file: String,
    pub task: String,
    pub severity: String,
    pub method: String,
    pub message: String,
}

/// Mean metrics over the successful rows of one (task, severity, method).
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub task: String,
    pub severity: String,
    pub method: String,
    pub n: usize,
    pub failed: usize,
    pub si_sdr_db: f64,
    pub sdr_db: f64,
    pub lsd: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatrixResult {
    /// Sorted by task order, method order (baseline first), then file.
    pub rows: Vec<MetricReport>,
    pub failures: Vec<Failure>,
    /// One cell per (task, severity, method) including the baselines, in
    /// row order.
    pub cells: Vec<Cell>,
}

fn method_order(spec: &ExperimentSpec, task: &Task, method: &str) -> usize {
    if method == task.baseline_label() {
        0
    } else {
        1 + spec.methods.iter().position(|m| m.name() == method).unwrap_or(usize::MAX - 1)
    }
}

/// Runs every (item, task, method) job. Jobs run in parallel; the result is
/// independent of scheduling.
pub fn run_matrix(spec: &ExperimentSpec, items: &[Item], denoiser: &dyn Denoiser) -> Result<MatrixResult> {
    spec.validate()?;
    let schedule = NoiseSchedule::build(spec.schedule.clone())?;

    let degraded: Vec<_> = spec
        .tasks
        .iter()
        .enumerate()
        .flat_map(|(ti, task)| items.iter().enumerate().map(move |(ii, item)| (ti, task, ii, item)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(ti, task, ii, item)| {
            let seed = mix_seed(spec.seed, &[TAG_NOISE, ti as u64, ii as u64]);
            let meas = task
                .degrade(&item.signal)
                .and_then(|(op, _)| degrade(op, &item.signal, spec.sigma_y, seed));
            (ti, ii, meas)
        })
        .collect();

    let mut jobs = Vec::new();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (ti, ii, meas) in &degraded {
        let task = &spec.tasks[*ti];
        let item = &items[*ii];
        let fail = |method: &str, e: &Error| Failure {
            file: item.name.clone(),
            task: task.name().into(),
            severity: task.severity(),
            method: method.into(),
            message: e.to_string(),
        };
        match meas {
            Ok(m) => {
                match MetricReport::evaluate(
                    &item.signal,
                    &m.y,
                    &item.name,
                    task.name(),
                    task.severity(),
                    task.baseline_label(),
                ) {
                    Ok(r) => rows.push(r),
                    Err(e) => failures.push(fail(task.baseline_label(), &e)),
                }
                for (mi, method) in spec.methods.iter().enumerate() {
                    jobs.push((*ti, *ii, mi, *method, m));
                }
            }
            Err(e) => {
                failures.push(fail(task.baseline_label(), e));
                for method in &spec.methods {
                    failures.push(fail(method.name(), e));
                }
            }
        }
    }

    let results: Vec<_> = jobs
        .into_par_iter()
        .map(|(ti, ii, mi, method, meas)| {
            let task = &spec.tasks[ti];
            let item = &items[ii];
            let seed = mix_seed(spec.seed, &[TAG_SAMPLE, ti as u64, ii as u64, mi as u64]);
            let cfg = method.config(task, seed);
            restore(meas, denoiser, &cfg, &schedule)
                .and_then(|(x, _)| {
                    MetricReport::evaluate(&item.signal, &x, &item.name, task.name(), task.severity(), method.name())
                })
                .map_err(|e| Failure {
                    file: item.name.clone(),
                    task: task.name().into(),
                    severity: task.severity(),
                    method: method.name().into(),
                    message: e.to_string(),
                })
        })
        .collect();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(f) => failures.push(f),
        }
    }

    let task_index = |name: &str, sev: &str| {
        spec.tasks
            .iter()
            .position(|t| t.name() == name && t.severity() == sev)
            .unwrap_or(usize::MAX)
    };
    let key = |task: &str, sev: &str, method: &str, file: &str| {
        let ti = task_index(task, sev);
        let mo = spec.tasks.get(ti).map_or(usize::MAX, |t| method_order(spec, t, method));
        (ti, mo, file.to_string())
    };
    rows.sort_by_key(|r| key(&r.task, &r.severity, &r.method, &r.file));
    failures.sort_by_key(|f| key(&f.task, &f.severity, &f.method, &f.file));

    let mut cells = Vec::new();
    for (ti, task) in spec.tasks.iter().enumerate() {
        let methods = std::iter::once(task.baseline_label()).chain(spec.methods.iter().map(|m| m.name()));
        for method in methods {
            let sel: Vec<&MetricReport> = rows
                .iter()
                .filter(|r| task_index(&r.task, &r.severity) == ti && r.method == method)
                .collect();
            let failed = failures
                .iter()
                .filter(|f| task_index(&f.task, &f.severity) == ti && f.method == method)
                .count();
            let mean = |f: fn(&MetricReport) -> f64| {
                if sel.is_empty() {
                    f64::NAN
                } else {
                    sel.iter().map(|r| f(r)).sum::<f64>() / sel.len() as f64
                }
            };
            cells.push(Cell {
                task: task.name().into(),
                severity: task.severity(),
                method: method.into(),
                n: sel.len(),
                failed,
                si_sdr_db: mean(|r| r.si_sdr_db),
                sdr_db: mean(|r| r.sdr_db),
                lsd: mean(|r| r.lsd),
            });
        }
    }
    Ok(MatrixResult { rows, failures, cells })
}

impl MatrixResult {
    /// Per-item rows in the metrics CSV format.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(MetricReport::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    /// Cells where every job failed.
    pub fn failed_cells(&self) -> Vec<&Cell> {
        self.cells.iter().filter(|c| c.n == 0 && c.failed > 0).collect()
    }

    /// Table layout: one block per task, one row per method, one column
    /// group per severity. FAD is not computed and shown as `n/a`.
    pub fn summary_table(&self) -> String {
        let mut by_task: BTreeMap<(usize, &str), Vec<&Cell>> = BTreeMap::new();
        let mut order: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !order.contains(&c.task.as_str()) {
                order.push(&c.task);
            }
            let ti = order.iter().position(|t| *t == c.task).unwrap_or(0);
            by_task.entry((ti, &c.task)).or_default().push(c);
        }
        let mut out = String::new();
        for ((_, task), cells) in by_task {
            let mut severities: Vec<&str> = Vec::new();
            let mut methods: Vec<&str> = Vec::new();
            for c in &cells {
                if !severities.contains(&c.severity.as_str()) {
                    severities.push(&c.severity);
                }
                if !methods.contains(&c.method.as_str()) {
                    methods.push(&c.method);
                }
            }
            let unit = if task == "declip" { " dB" } else { " Hz" };
            let _ = write!(out, "{task:<16}");
            for s in &severities {
                let _ = write!(out, "| {:<30}", format!("{s}{unit}"));
            }
            let _ = write!(out, "\n{:<16}", "method");
            for _ in &severities {
                let _ = write!(out, "| {:>8} {:>8} {:>6} {:>5}", "SI-SDR", "LSD", "FAD", "n");
            }
            out.push('\n');
            for m in methods {
                let _ = write!(out, "{m:<16}");
                for s in &severities {
                    match cells.iter().find(|c| c.method == m && c.severity == *s) {
                        Some(c) => {
                            let _ = write!(out, "| {:>8.2} {:>8.3} {:>6} {:>5}", c.si_sdr_db, c.lsd, "n/a", c.n);
                        }
                        None => {
                            let _ = write!(out, "| {:>8} {:>8} {:>6} {:>5}", "-", "-", "n/a", 0);
                        }
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }

    /// Cell means as CSV (`task,severity,method,n,failed,si_sdr,sdr,lsd,fad`).
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("task,severity,method,n,failed,si_sdr,sdr,lsd,fad\n");
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.6},{:.6},{:.6},n/a",
                c.task, c.severity, c.method, c.n, c.failed, c.si_sdr_db, c.sdr_db, c.lsd
            );
        }
        s
    }
}
