//! Run statistics and the metrics derived from them: speedup, MPKI,
//! bandwidth, and weighted combination of region statistics.

use crate::cores::Peaks;
use crate::kernel::{Tick, TICKS_PER_SECOND};
use crate::memsys::{LevelStats, MemStats};
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub config_id: String,
    pub sim_ticks: Tick,
    pub core_period: Tick,
    pub core_cycles: u64,
    pub committed_instructions: u64,
    pub committed_mem_ops: u64,
    pub l1i: LevelStats,
    pub l1d: LevelStats,
    pub l2: LevelStats,
    pub l3: LevelStats,
    pub memory: MemStats,
    pub branches: u64,
    pub mispredictions: u64,
    pub squashed_mem_ops: u64,
    pub peaks: Peaks,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("runs committed different instruction counts ({baseline} vs {test})")]
    MismatchedRuns { baseline: u64, test: u64 },
    #[error("metric needs a positive instruction count")]
    ZeroInstructions,
    #[error("metric needs a positive simulated time")]
    ZeroTicks,
    #[error("region weights sum to {sum}, expected 1")]
    BadWeights { sum: f64 },
    #[error("regions come from different configurations ('{first}' and '{other}')")]
    MixedConfigs { first: String, other: String },
    #[error("no regions to combine")]
    NoRegions,
}

/// `baseline.sim_ticks / test.sim_ticks`: how much faster `test` ran.
pub fn speedup(baseline: &RunStats, test: &RunStats) -> Result<f64, AnalysisError> {
    if baseline.committed_instructions != test.committed_instructions {
        return Err(AnalysisError::MismatchedRuns {
            baseline: baseline.committed_instructions,
            test: test.committed_instructions,
        });
    }
    if test.sim_ticks == 0 || baseline.sim_ticks == 0 {
        return Err(AnalysisError::ZeroTicks);
    }
    Ok(baseline.sim_ticks as f64 / test.sim_ticks as f64)
}

/// Misses per thousand instructions.
pub fn mpki(misses: u64, instructions: u64) -> Result<f64, AnalysisError> {
    if instructions == 0 {
        return Err(AnalysisError::ZeroInstructions);
    }
    Ok(misses as f64 * 1000.0 / instructions as f64)
}

/// Bytes per simulated second.
pub fn bandwidth(bytes: u64, sim_ticks: Tick) -> Result<f64, AnalysisError> {
    if sim_ticks == 0 {
        return Err(AnalysisError::ZeroTicks);
    }
    Ok(bytes as f64 * TICKS_PER_SECOND as f64 / sim_ticks as f64)
}

/// Rate metrics of one run. Bandwidths count demand bytes at each level's
/// CPU-side interface, in bytes per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub ipc: f64,
    pub cpi: f64,
    pub l3_mpki: f64,
    pub l1i_bw: f64,
    pub l1d_bw: f64,
    pub l2_bw: f64,
    pub l3_bw: f64,
    pub mem_bw: f64,
}

impl Metrics {
    pub fn of(s: &RunStats) -> Result<Self, AnalysisError> {
        if s.core_cycles == 0 {
            return Err(AnalysisError::ZeroTicks);
        }
        let n = s.committed_instructions;
        if n == 0 {
            return Err(AnalysisError::ZeroInstructions);
        }
        Ok(Self {
            ipc: n as f64 / s.core_cycles as f64,
            cpi: s.core_cycles as f64 / n as f64,
            l3_mpki: mpki(s.l3.misses, n)?,
            l1i_bw: bandwidth(s.l1i.demand_bytes, s.sim_ticks)?,
            l1d_bw: bandwidth(s.l1d.demand_bytes, s.sim_ticks)?,
            l2_bw: bandwidth(s.l2.demand_bytes, s.sim_ticks)?,
            l3_bw: bandwidth(s.l3.demand_bytes, s.sim_ticks)?,
            mem_bw: bandwidth(s.memory.bytes, s.sim_ticks)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionWeight {
    pub weight: f64,
    pub stats: RunStats,
}

/// Whole-program estimate from weighted regions.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub config_id: String,
    pub cpi: f64,
    /// Estimated run time in ticks.
    pub est_ticks: f64,
    /// Weighted rates; `ipc` and `cpi` inside are weighted means too.
    pub rates: Metrics,
}

const WEIGHT_TOLERANCE: f64 = 1e-9;

pub fn simpoint_combine(regions: &[RegionWeight], total_instructions: u64) -> Result<Aggregate, AnalysisError> {
    let first = regions.first().ok_or(AnalysisError::NoRegions)?;
    let sum: f64 = regions.iter().map(|r| r.weight).sum();
    if (sum - 1.0).abs() > WEIGHT_TOLERANCE || regions.iter().any(|r| r.weight.is_nan() || r.weight < 0.0) {
        return Err(AnalysisError::BadWeights { sum });
    }
    if let Some(o) = regions.iter().find(|r| r.stats.config_id != first.stats.config_id) {
        return Err(AnalysisError::MixedConfigs {
            first: first.stats.config_id.clone(),
            other: o.stats.config_id.clone(),
        });
    }
    // Sum in a fixed order so the result does not depend on region order.
    let mut per: Vec<(f64, Metrics)> = regions
        .iter()
        .map(|r| Metrics::of(&r.stats).map(|m| (r.weight, m)))
        .collect::<Result<_, _>>()?;
    per.sort_by(|a, b| {
        let ka = (
            a.0,
            a.1.cpi,
            a.1.l3_mpki,
            a.1.l1d_bw,
            a.1.l1i_bw,
            a.1.l2_bw,
            a.1.l3_bw,
            a.1.mem_bw,
        );
        let kb = (
            b.0,
            b.1.cpi,
            b.1.l3_mpki,
            b.1.l1d_bw,
            b.1.l1i_bw,
            b.1.l2_bw,
            b.1.l3_bw,
            b.1.mem_bw,
        );
        ka.partial_cmp(&kb).unwrap_or(core::cmp::Ordering::Equal)
    });
    let w = |f: fn(&Metrics) -> f64| per.iter().map(|(wt, m)| wt * f(m)).sum::<f64>();
    let cpi = w(|m| m.cpi);
    let rates = Metrics {
        ipc: w(|m| m.ipc),
        cpi,
        l3_mpki: w(|m| m.l3_mpki),
        l1i_bw: w(|m| m.l1i_bw),
        l1d_bw: w(|m| m.l1d_bw),
        l2_bw: w(|m| m.l2_bw),
        l3_bw: w(|m| m.l3_bw),
        mem_bw: w(|m| m.mem_bw),
    };
    Ok(Aggregate {
        config_id: first.stats.config_id.clone(),
        cpi,
        est_ticks: cpi * total_instructions as f64 * first.stats.core_period as f64,
        rates,
    })
}
