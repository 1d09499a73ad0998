//! Runs every preset over every trace, then writes the report.
//!
//! Cells run concurrently on a fixed-size pool. Each cell owns its output
//! file, so the results on disk do not depend on scheduling.

use crate::error::{write_atomic, CliError};
use crate::report;
use crate::statsfile::{self, Region, StatsRecord};
use crate::tracefile::read_trace;
use cryosim_core::config::{Preset, SystemConfig};
use cryosim_core::sim::simulate;
use cryosim_core::trace::Trace;
use rayon::prelude::*;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// One line of a `--weights` file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RegionSpec {
    pub trace: String,
    pub start: u64,
    pub end: u64,
    pub weight: f64,
}

pub fn read_weights(path: &Path) -> Result<Vec<RegionSpec>, CliError> {
    let bad = |msg: String| CliError::BadInput {
        path: path.display().to_string(),
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    rdr.deserialize().map(|r| r.map_err(|e| bad(e.to_string()))).collect()
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub traces: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub presets: Vec<Preset>,
    pub weights: Option<PathBuf>,
    pub resume: bool,
    pub jobs: usize,
    pub cores: usize,
    pub baseline: String,
}

impl SweepOptions {
    pub fn new(traces: Vec<PathBuf>, out_dir: PathBuf) -> Self {
        Self {
            traces,
            out_dir,
            presets: Preset::ALL.to_vec(),
            weights: None,
            resume: false,
            jobs: 1,
            cores: 1,
            baseline: Preset::CryoAll.name().into(),
        }
    }
}

/// Name of a trace in stats and reports: its file stem.
pub fn trace_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn stats_file_name(trace: &str, preset: &str, region: Option<usize>) -> String {
    match region {
        Some(k) => format!("{trace}.{preset}.r{k}.stats"),
        None => format!("{trace}.{preset}.stats"),
    }
}

fn check_region(r: &RegionSpec, n: u64) -> Result<(), CliError> {
    if r.start >= r.end || r.end > n {
        return Err(CliError::Usage(format!(
            "region {}..{} is outside trace '{}' ({n} instructions)",
            r.start, r.end, r.trace
        )));
    }
    Ok(())
}

struct Job<'a> {
    trace: &'a str,
    input: &'a Trace,
    preset: Preset,
    region: Option<(usize, &'a RegionSpec)>,
    path: PathBuf,
}

#[derive(Debug)]
pub struct CellFailure {
    pub file: String,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct SweepSummary {
    pub simulated: usize,
    pub skipped: usize,
    pub failures: Vec<CellFailure>,
    pub report_error: Option<String>,
}

fn run_job(job: &Job<'_>, cores: usize) -> Result<(), CliError> {
    let mut cfg: SystemConfig = job.preset.config();
    cfg.cores = cores;
    let (input, region) = match job.region {
        Some((k, r)) => {
            let n = job.input.len() as u64;
            check_region(r, n)?;
            let region = Region {
                index: k,
                start: r.start,
                end: r.end,
                weight: r.weight,
                trace_instructions: n,
            };
            (job.input.slice(r.start as usize..r.end as usize), Some(region))
        }
        None => (job.input.clone(), None),
    };
    // Extra cores run copies of the same trace.
    let traces: Vec<&Trace> = (0..cores).map(|_| &input).collect();
    let stats = simulate(&cfg, &traces)?;
    let rec = StatsRecord {
        trace: job.trace.into(),
        stats,
        region,
    };
    write_atomic(&job.path, statsfile::to_text(&rec).as_bytes())
}

/// Runs the sweep and writes the report. Per-cell failures are collected;
/// the report covers whatever cells succeeded.
pub fn sweep(opts: &SweepOptions) -> Result<SweepSummary, CliError> {
    if opts.traces.is_empty() {
        return Err(CliError::Usage("sweep needs at least one trace".into()));
    }
    fs::create_dir_all(&opts.out_dir).map_err(|e| CliError::io(&opts.out_dir, e))?;

    let mut loaded: BTreeMap<String, Trace> = BTreeMap::new();
    for p in &opts.traces {
        let name = trace_name(p);
        if loaded.contains_key(&name) {
            return Err(CliError::Usage(format!("two traces are named '{name}'")));
        }
        loaded.insert(name, read_trace(p)?);
    }
    let weights = match &opts.weights {
        Some(w) => read_weights(w)?,
        None => Vec::new(),
    };
    for r in &weights {
        let t = loaded
            .get(&r.trace)
            .ok_or_else(|| CliError::Usage(format!("weights name unknown trace '{}'", r.trace)))?;
        check_region(r, t.len() as u64)?;
    }

    let mut jobs = Vec::new();
    for (name, trace) in &loaded {
        let regions: Vec<_> = weights.iter().filter(|r| &r.trace == name).enumerate().collect();
        let cells: Vec<Option<(usize, &RegionSpec)>> = if regions.is_empty() {
            vec![None]
        } else {
            regions.into_iter().map(Some).collect()
        };
        for &preset in &opts.presets {
            for &region in &cells {
                let file = stats_file_name(name, preset.name(), region.map(|r| r.0));
                jobs.push(Job {
                    trace: name,
                    input: trace,
                    preset,
                    region,
                    path: opts.out_dir.join(file),
                });
            }
        }
    }

    let mut summary = SweepSummary::default();
    let todo: Vec<&Job<'_>> = jobs.iter().filter(|j| !(opts.resume && j.path.exists())).collect();
    summary.skipped = jobs.len() - todo.len();
    summary.simulated = todo.len();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", opts.jobs)))?;
    let results: Vec<Result<(), CliError>> = pool.install(|| todo.par_iter().map(|j| run_job(j, opts.cores)).collect());
    for (job, res) in todo.iter().zip(results) {
        if let Err(e) = res {
            summary.failures.push(CellFailure {
                file: job.path.file_name().unwrap().to_string_lossy().into_owned(),
                error: e.to_string(),
            });
        }
    }

    // With failed cells the report may lack a baseline; the cell errors matter more.
    match report::write_report(&opts.out_dir, &opts.baseline, &opts.out_dir) {
        Err(e) if summary.failures.is_empty() => return Err(e),
        Err(e) => summary.report_error = Some(e.to_string()),
        Ok(_) => {}
    }
    Ok(summary)
}
