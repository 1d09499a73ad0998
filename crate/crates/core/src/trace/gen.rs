//! Seeded synthetic workload generators.
//!
//! Each generator is a pure function of its parameters and seed. Generated
//! code is laid out as a small loop body so instruction fetch stays inside a
//! few cache lines; data footprints and code ranges are recorded in the trace
//! metadata for cache warm-up.

use super::{reg, Reg, Region, Trace, TraceInstruction, TraceMeta, INSTR_BYTES, META_GENERATOR, META_PRNG, META_SEED};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Identifier of the PRNG algorithm, recorded in every generated trace.
pub const PRNG_ID: &str = "chacha8/rand_chacha-0.9/seed_from_u64";

/// Shared L3 capacity; memory-bound footprints must exceed it.
pub const L3_CAPACITY_BYTES: u64 = 16 * 1024 * 1024;

/// Largest compute-bound footprint (the L1D capacity).
pub const L1D_CAPACITY_BYTES: u64 = 32 * 1024;

const COMPUTE_CODE_BASE: u64 = 0x0001_0000;
const MEMORY_CODE_BASE: u64 = 0x0002_0000;
const BRANCHY_CODE_BASE: u64 = 0x0003_0000;
const COMPUTE_DATA_BASE: u64 = 0x1000_0000;
const MEMORY_DATA_BASE: u64 = 0x2000_0000;

const COMPUTE_LOOP_LEN: usize = 32;
const MEMORY_LOOP_LEN: usize = 16;
const BRANCHY_BLOCKS: u64 = 32;
const BRANCHY_BLOCK_BYTES: u64 = 5 * INSTR_BYTES;

// Registers the generators never write: always-ready sources.
const R_A: u8 = 1;
const R_B: u8 = 2;
const R_C: u8 = 3;
const R_BASE: u8 = 5;
const R_DATA: u8 = 6;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid generator parameter: {0}")]
pub struct GenError(pub String);

fn invalid(msg: &str) -> GenError {
    GenError(msg.into())
}

/// Rotating destination allocator over `first..=last`.
struct DestRing {
    first: u8,
    span: u8,
    next: u8,
}

impl DestRing {
    fn new(first: u8, last: u8) -> Self {
        Self {
            first,
            span: last - first + 1,
            next: 0,
        }
    }

    fn take(&mut self) -> Reg {
        let r = reg(self.first + self.next);
        self.next = (self.next + 1) % self.span;
        r
    }
}

fn base_meta(generator: &str, seed: u64, n: usize) -> TraceMeta {
    let mut meta = TraceMeta::new();
    meta.set(META_GENERATOR, generator);
    meta.set(META_SEED, seed);
    meta.set(META_PRNG, PRNG_ID);
    meta.set("n", n);
    meta
}

/// Mostly independent integer ops over an L1-resident footprint.
///
/// A 32-instruction loop body ending in an always-taken backward branch;
/// exactly `round(n * mem_ratio)` 8-byte loads/stores walk the footprint
/// with a sequential stride. Dependency chains never exceed two.
pub fn gen_compute_bound(n: usize, footprint: u64, mem_ratio: f64, seed: u64) -> Result<Trace, GenError> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    if !(0.0..=0.3).contains(&mem_ratio) {
        return Err(invalid("mem_ratio must be within [0, 0.3]"));
    }
    if footprint > L1D_CAPACITY_BYTES {
        return Err(invalid("compute-bound footprint must fit the 32 KB L1D"));
    }
    let mem_ops = (n as f64 * mem_ratio + 0.5) as u64;
    let words = footprint / 8;
    if mem_ops > 0 && words == 0 {
        return Err(invalid("footprint must hold at least one 8-byte word"));
    }
    let slots = (n - n / COMPUTE_LOOP_LEN) as u64;
    debug_assert!(mem_ops <= slots);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dests = DestRing::new(8, 31);
    let mut out = Vec::with_capacity(n);
    let mut slot = 0u64;
    let mut mem_index = 0u64;
    // Length of the dependency chain ending at the previous instruction, and its dest.
    let mut chain = 0u8;
    let mut last_dest = reg(R_A);

    for i in 0..n {
        let pos = i % COMPUTE_LOOP_LEN;
        let pc = COMPUTE_CODE_BASE + pos as u64 * INSTR_BYTES;
        if pos == COMPUTE_LOOP_LEN - 1 {
            out.push(TraceInstruction::cond_branch(
                pc,
                Some(reg(R_A)),
                Some(reg(R_B)),
                true,
                COMPUTE_CODE_BASE,
            ));
            chain = 0;
            continue;
        }
        let is_mem =
            (slot as u128 + 1) * mem_ops as u128 / slots as u128 > slot as u128 * mem_ops as u128 / slots as u128;
        slot += 1;
        if is_mem {
            let addr = COMPUTE_DATA_BASE + (mem_index % words) * 8;
            if mem_index % 3 == 2 {
                out.push(TraceInstruction::store(
                    pc,
                    Some(reg(R_BASE)),
                    Some(reg(R_DATA)),
                    addr,
                    8,
                ));
                chain = 0;
            } else {
                let d = dests.take();
                out.push(TraceInstruction::load(pc, d, Some(reg(R_BASE)), addr, 8));
                last_dest = d;
                chain = 1;
            }
            mem_index += 1;
        } else {
            let d = dests.take();
            if chain == 1 && rng.random_bool(0.5) {
                out.push(TraceInstruction::int_alu(pc, d, Some(last_dest), Some(reg(R_C))));
                chain = 2;
            } else {
                out.push(TraceInstruction::int_alu(pc, d, Some(reg(R_A)), Some(reg(R_B))));
                chain = 1;
            }
            last_dest = d;
        }
    }

    let mut meta = base_meta("compute-bound", seed, n);
    meta.set("footprint", footprint);
    meta.set("mem_ratio", mem_ratio);
    meta.set_regions(
        &[Region {
            base: COMPUTE_CODE_BASE,
            len: COMPUTE_LOOP_LEN as u64 * INSTR_BYTES,
        }],
        &[Region {
            base: COMPUTE_DATA_BASE,
            len: footprint,
        }],
    );
    Ok(Trace::new(out, meta).expect("generator emits valid instructions"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChasePattern {
    UniformRandom,
    PointerChase,
}

impl ChasePattern {
    pub fn name(self) -> &'static str {
        match self {
            ChasePattern::UniformRandom => "uniform-random",
            ChasePattern::PointerChase => "pointer-chase",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform-random" => Some(ChasePattern::UniformRandom),
            "pointer-chase" => Some(ChasePattern::PointerChase),
            _ => None,
        }
    }
}

impl fmt::Display for ChasePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Alternating loads and integer ops over a footprint larger than the L3.
///
/// In pointer-chase mode each load takes the previous load's destination as
/// its address source, serializing all loads.
pub fn gen_memory_bound(n: usize, footprint: u64, pattern: ChasePattern, seed: u64) -> Result<Trace, GenError> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    if footprint <= L3_CAPACITY_BYTES {
        return Err(invalid("memory-bound footprint must exceed the 16 MB L3 capacity"));
    }
    let words = footprint / 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut load_dests = match pattern {
        ChasePattern::PointerChase => DestRing::new(10, 11),
        ChasePattern::UniformRandom => DestRing::new(10, 19),
    };
    let mut alu_dests = DestRing::new(20, 31);
    let mut prev_load: Option<Reg> = None;
    let mut out = Vec::with_capacity(n);

    for i in 0..n {
        let pc = MEMORY_CODE_BASE + (i % MEMORY_LOOP_LEN) as u64 * INSTR_BYTES;
        if i % 2 == 0 {
            let addr = MEMORY_DATA_BASE + rng.random_range(0..words) * 8;
            let d = load_dests.take();
            let base = match pattern {
                ChasePattern::PointerChase => prev_load.unwrap_or(reg(R_BASE)),
                ChasePattern::UniformRandom => reg(R_BASE),
            };
            out.push(TraceInstruction::load(pc, d, Some(base), addr, 8));
            prev_load = Some(d);
        } else {
            let src = prev_load.unwrap_or(reg(R_A));
            out.push(TraceInstruction::int_alu(
                pc,
                alu_dests.take(),
                Some(src),
                Some(reg(R_B)),
            ));
        }
    }

    let mut meta = base_meta("memory-bound", seed, n);
    meta.set("footprint", footprint);
    meta.set("pattern", pattern);
    meta.set_regions(
        &[Region {
            base: MEMORY_CODE_BASE,
            len: MEMORY_LOOP_LEN as u64 * INSTR_BYTES,
        }],
        &[Region {
            base: MEMORY_DATA_BASE,
            len: footprint,
        }],
    );
    Ok(Trace::new(out, meta).expect("generator emits valid instructions"))
}

fn branch_pattern_bit(block: u64, iteration: u64) -> bool {
    let period = 1 + block % 4;
    let phase = (block / 4) % period;
    let pos = (iteration + phase) % period;
    match period {
        // Half of the period-1 branches are always taken, half never.
        1 => (block / 16).is_multiple_of(2),
        // One not-taken slot per period: [T, N], [T, T, N], [T, T, T, N].
        _ => pos != period - 1,
    }
}

/// Branch-heavy integer code: ~22% conditional branches.
///
/// The loop body has 32 blocks of `alu, alu, alu, branch, skip-slot`. A
/// taken branch jumps over the skip slot. Block `b`'s branch follows a fixed
/// pattern of period `1 + b % 4`; each dynamic outcome follows the pattern
/// with probability `2p - 1` and is a fair coin otherwise, so an ideal
/// history predictor reaches accuracy ~`p` (`p < 0.5` behaves as `0.5`).
pub fn gen_branchy(n: usize, predictability: f64, seed: u64) -> Result<Trace, GenError> {
    if !(0.0..=1.0).contains(&predictability) {
        return Err(invalid("predictability must be within [0, 1]"));
    }
    let follow = (2.0 * predictability - 1.0).max(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dests = DestRing::new(8, 31);
    let mut out = Vec::with_capacity(n);
    let mut iteration = 0u64;

    'outer: loop {
        for block in 0..BRANCHY_BLOCKS {
            let base = BRANCHY_CODE_BASE + block * BRANCHY_BLOCK_BYTES;
            let mut last = reg(R_A);
            for k in 0..3 {
                if out.len() == n {
                    break 'outer;
                }
                let d = dests.take();
                let src = if k == 0 { reg(R_A) } else { last };
                out.push(TraceInstruction::int_alu(
                    base + k * INSTR_BYTES,
                    d,
                    Some(src),
                    Some(reg(R_B)),
                ));
                last = d;
            }
            if out.len() == n {
                break 'outer;
            }
            let pattern = branch_pattern_bit(block, iteration);
            let taken = if rng.random_bool(follow) {
                pattern
            } else {
                rng.random_bool(0.5)
            };
            let br_pc = base + 3 * INSTR_BYTES;
            out.push(TraceInstruction::cond_branch(
                br_pc,
                Some(last),
                Some(reg(R_B)),
                taken,
                br_pc + 2 * INSTR_BYTES,
            ));
            if !taken {
                if out.len() == n {
                    break 'outer;
                }
                out.push(TraceInstruction::int_alu(
                    br_pc + INSTR_BYTES,
                    dests.take(),
                    Some(reg(R_A)),
                    None,
                ));
            }
        }
        iteration += 1;
        if out.len() == n {
            break;
        }
    }

    let mut meta = base_meta("branchy", seed, n);
    meta.set("predictability", predictability);
    meta.set_regions(
        &[Region {
            base: BRANCHY_CODE_BASE,
            len: BRANCHY_BLOCKS * BRANCHY_BLOCK_BYTES,
        }],
        &[],
    );
    Ok(Trace::new(out, meta).expect("generator emits valid instructions"))
}

/// Named parameter sets approximating the workload classes the simulator
/// is meant to contrast. These are calibration choices, not measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadPreset {
    /// Compute-bound, 16 KB footprint, 10% memory ops.
    BtLike,
    /// Compute-bound, 32 KB footprint, 25% memory ops.
    HmmerLike,
    /// Memory-bound pointer chase over 64 MB.
    McfLike,
    /// Memory-bound independent random loads over 32 MB.
    MilcLike,
    /// Branch-heavy code with 90% predictable branches.
    GobmkLike,
}

impl WorkloadPreset {
    pub const ALL: [WorkloadPreset; 5] = [
        WorkloadPreset::BtLike,
        WorkloadPreset::HmmerLike,
        WorkloadPreset::McfLike,
        WorkloadPreset::MilcLike,
        WorkloadPreset::GobmkLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WorkloadPreset::BtLike => "bt-like",
            WorkloadPreset::HmmerLike => "hmmer-like",
            WorkloadPreset::McfLike => "mcf-like",
            WorkloadPreset::MilcLike => "milc-like",
            WorkloadPreset::GobmkLike => "gobmk-like",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn generate(self, n: usize, seed: u64) -> Result<Trace, GenError> {
        const MB: u64 = 1024 * 1024;
        match self {
            WorkloadPreset::BtLike => gen_compute_bound(n, 16 * 1024, 0.1, seed),
            WorkloadPreset::HmmerLike => gen_compute_bound(n, 32 * 1024, 0.25, seed),
            WorkloadPreset::McfLike => gen_memory_bound(n, 64 * MB, ChasePattern::PointerChase, seed),
            WorkloadPreset::MilcLike => gen_memory_bound(n, 32 * MB, ChasePattern::UniformRandom, seed),
            WorkloadPreset::GobmkLike => gen_branchy(n, 0.9, seed),
        }
    }
}
