use clap::{Args, Parser, Subcommand};
use cryosim::configfile::{parse_bytes, parse_preset, ConfigFile};
use cryosim::error::{write_atomic, CliError, EXIT_USAGE};
use cryosim::report;
use cryosim::statsfile::{self, StatsRecord};
use cryosim::sweep::{sweep, trace_name, SweepOptions};
use cryosim::tracefile::{read_trace, write_trace};
use cryosim_core::config::Preset;
use cryosim_core::sim::simulate;
use cryosim_core::trace::{gen_branchy, gen_compute_bound, gen_memory_bound, ChasePattern, Trace, WorkloadPreset};
use std::path::PathBuf;
use std::process::ExitCode;

/// Multi-clock-domain processor and cache simulator.
#[derive(Parser)]
#[command(name = "cryosim", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic trace.
    Gen(GenArgs),
    /// Simulate one configuration over a trace.
    Run(RunArgs),
    /// Simulate every preset over each trace and write a report.
    Sweep(SweepArgs),
    /// Build report.csv and charts from a directory of stats files.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// compute-bound, memory-bound, branchy, or a workload preset
    /// (bt-like, hmmer-like, mcf-like, milc-like, gobmk-like).
    generator: String,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    /// Bytes, with optional KB/MB/GB suffix (powers of 1024).
    #[arg(long)]
    footprint: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    mem_ratio: f64,
    /// uniform-random or pointer-chase.
    #[arg(long, default_value = "pointer-chase")]
    pattern: String,
    #[arg(long, default_value_t = 0.9)]
    predictability: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    preset: Option<String>,
    /// TOML configuration; its overrides apply on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace file; repeat once per core.
    #[arg(long, required = true)]
    trace: Vec<PathBuf>,
    #[arg(long)]
    cores: Option<usize>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
    /// CSV of `trace,start,end,weight` regions; listed traces run only those regions.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Keep existing stats files and simulate only missing cells.
    #[arg(long)]
    resume: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// 2 runs a copy of each trace on a second core.
    #[arg(long, default_value_t = 1)]
    cores: usize,
    #[arg(long, default_value = "CryoAll")]
    baseline: String,
}

#[derive(Args)]
struct ReportArgs {
    stats_dir: PathBuf,
    #[arg(long, default_value = "CryoAll")]
    baseline: String,
    /// Output directory; defaults to the stats directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn cmd_gen(a: &GenArgs) -> Result<(), CliError> {
    let footprint = a
        .footprint
        .as_deref()
        .map(|f| parse_bytes(f).ok_or_else(|| usage(format!("cannot read footprint '{f}'"))))
        .transpose()?;
    let (trace, echo): (Result<Trace, _>, String) = match a.generator.as_str() {
        "compute-bound" => {
            let fp = footprint.unwrap_or(16 * 1024);
            (
                gen_compute_bound(a.n, fp, a.mem_ratio, a.seed),
                format!("footprint={fp} mem_ratio={}", a.mem_ratio),
            )
        }
        "memory-bound" => {
            let fp = footprint.unwrap_or(64 << 20);
            let pattern = ChasePattern::parse(&a.pattern).ok_or_else(|| {
                usage(format!(
                    "unknown pattern '{}' (uniform-random, pointer-chase)",
                    a.pattern
                ))
            })?;
            (
                gen_memory_bound(a.n, fp, pattern, a.seed),
                format!("footprint={fp} pattern={pattern}"),
            )
        }
        "branchy" => (
            gen_branchy(a.n, a.predictability, a.seed),
            format!("predictability={}", a.predictability),
        ),
        other => match WorkloadPreset::parse(other) {
            Some(w) => (w.generate(a.n, a.seed), String::new()),
            None => {
                let names: Vec<_> = WorkloadPreset::ALL.iter().map(|w| w.name()).collect();
                return Err(usage(format!(
                    "unknown generator '{other}' (compute-bound, memory-bound, branchy, {})",
                    names.join(", ")
                )));
            }
        },
    };
    let trace = trace.map_err(|e| usage(e.to_string()))?;
    write_trace(&trace, &a.out)?;
    println!(
        "{} instructions -> {} (generator={} n={} seed={}{}{})",
        trace.len(),
        a.out.display(),
        a.generator,
        a.n,
        a.seed,
        if echo.is_empty() { "" } else { " " },
        echo
    );
    Ok(())
}

fn cmd_run(a: &RunArgs) -> Result<(), CliError> {
    let base = a.preset.as_deref().map(parse_preset).transpose()?;
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            ConfigFile::parse(&text)?.build(base.unwrap_or(Preset::CryoAll))?
        }
        None => base.ok_or_else(|| usage("run needs --preset or --config"))?.config(),
    };
    if let Some(c) = a.cores {
        cfg.cores = c;
    }
    let traces = a.trace.iter().map(|p| read_trace(p)).collect::<Result<Vec<_>, _>>()?;
    // A single trace fills every core.
    let refs: Vec<&Trace> = if traces.len() == 1 {
        vec![&traces[0]; cfg.cores]
    } else {
        traces.iter().collect()
    };
    let stats = simulate(&cfg, &refs)?;
    let rec = StatsRecord {
        trace: trace_name(&a.trace[0]),
        stats,
        region: None,
    };
    write_atomic(&a.out, statsfile::to_text(&rec).as_bytes())?;
    println!(
        "{}: {} instructions, {} cycles, {} ps",
        rec.stats.config_id, rec.stats.committed_instructions, rec.stats.core_cycles, rec.stats.sim_ticks
    );
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), CliError> {
    parse_preset(&a.baseline)?;
    let mut opts = SweepOptions::new(a.traces.clone(), a.out.clone());
    opts.weights = a.weights.clone();
    opts.resume = a.resume;
    opts.jobs = a.jobs;
    opts.cores = a.cores;
    opts.baseline = a.baseline.clone();
    let s = sweep(&opts)?;
    println!(
        "{} cells simulated, {} reused, {} failed; report in {}",
        s.simulated,
        s.skipped,
        s.failures.len(),
        a.out.display()
    );
    for f in &s.failures {
        eprintln!("failed {}: {}", f.file, f.error);
    }
    if let Some(e) = &s.report_error {
        eprintln!("report not written: {e}");
    }
    if s.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::SweepFailed {
            failed: s.failures.len(),
            total: s.simulated + s.skipped,
        })
    }
}

fn cmd_report(a: &ReportArgs) -> Result<(), CliError> {
    let out = a.out.clone().unwrap_or_else(|| a.stats_dir.clone());
    let rows = report::write_report(&a.stats_dir, &a.baseline, &out)?;
    println!("{} rows -> {}", rows.len(), out.join(report::CSV_NAME).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let res = match &cli.cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Report(a) => cmd_report(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
