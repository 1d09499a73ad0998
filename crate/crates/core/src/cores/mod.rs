//! Cycle-approximate core timing models.
//!
//! Both cores are stepped once per core clock edge. A step that changes
//! nothing reports the earliest tick at which something could change, so a
//! driver may skip the idle edges in between without altering the outcome.

mod inorder;
mod ooo;

pub use inorder::InOrderCore;
pub use ooo::OooCore;

use crate::bpred::BranchPredictor;
use crate::config::{CoreConfig, CoreKind};
use crate::kernel::{next_edge, Tick};
use crate::memsys::{Access, MemorySystem, Side};
use crate::trace::{Trace, TraceInstruction};
use alloc::collections::VecDeque;

/// Cycles without a commit after which a run is declared stuck.
pub const DEADLOCK_CYCLES: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoreError {
    #[error("core {core}: no instruction committed for {cycles} cycles (at cycle {at}, {committed} committed)")]
    Deadlock {
        core: usize,
        cycles: u64,
        at: u64,
        committed: u64,
    },
}

/// Highest occupancy seen for each bounded structure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Peaks {
    pub fetch_queue: u64,
    pub rob: u64,
    pub iq: u64,
    pub lsq: u64,
    pub int_regs: u64,
    pub fp_regs: u64,
    /// Most L1D requests issued in one cycle.
    pub l1d_issue: u64,
}

impl Peaks {
    pub fn merge(&mut self, o: &Peaks) {
        self.fetch_queue = self.fetch_queue.max(o.fetch_queue);
        self.rob = self.rob.max(o.rob);
        self.iq = self.iq.max(o.iq);
        self.lsq = self.lsq.max(o.lsq);
        self.int_regs = self.int_regs.max(o.int_regs);
        self.fp_regs = self.fp_regs.max(o.fp_regs);
        self.l1d_issue = self.l1d_issue.max(o.l1d_issue);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CoreStats {
    /// Cycles until the last instruction committed.
    pub cycles: u64,
    pub fetched: u64,
    pub committed: u64,
    pub committed_mem_ops: u64,
    /// L1D requests accepted (blocked attempts excluded).
    pub l1d_requests: u64,
    pub branches: u64,
    pub mispredictions: u64,
    /// Wrong-path memory operations; wrong paths are never fetched, so this stays 0.
    pub squashed_mem_ops: u64,
    pub peaks: Peaks,
}

/// Outcome of one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// Every instruction has committed.
    Done,
    /// State changed; step again next edge.
    Busy,
    /// Nothing changed; nothing can before this tick.
    Idle(Tick),
}

/// Collects the earliest future tick a stalled check is waiting for.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Wake(Tick);

impl Wake {
    pub(crate) fn new() -> Self {
        Wake(Tick::MAX)
    }

    pub(crate) fn at(&mut self, t: Tick) {
        self.0 = self.0.min(t);
    }

    pub(crate) fn get(self) -> Option<Tick> {
        (self.0 != Tick::MAX).then_some(self.0)
    }
}

/// Front end shared by both cores: a fetch buffer one block wide, a limit on
/// outstanding block requests, and a branch predictor trained at fetch.
#[derive(Debug, Clone)]
pub(crate) struct FetchUnit {
    pub next: usize,
    block: Option<u64>,
    block_ready: Tick,
    inflight: VecDeque<Tick>,
    block_bytes: u64,
    max_inflight: usize,
    /// Fetch stops after a mispredicted branch until it resolves.
    pub waiting_on: Option<usize>,
    pub resume_at: Tick,
    pub bp: BranchPredictor,
}

pub(crate) enum Fetched {
    /// Instruction bytes are ready at this tick.
    Ok {
        ready: Tick,
        mispredicted: bool,
        ends_group: bool,
    },
    Stall,
}

impl FetchUnit {
    pub fn new(cfg: &CoreConfig) -> Self {
        Self {
            next: 0,
            block: None,
            block_ready: 0,
            inflight: VecDeque::new(),
            block_bytes: cfg.fetch_block_bytes,
            max_inflight: cfg.ifetch_inflight,
            waiting_on: None,
            resume_at: 0,
            bp: BranchPredictor::new(&cfg.bp),
        }
    }

    /// Whether fetch may run at all this cycle.
    pub fn enabled(&self, trace: &Trace, t: Tick, wake: &mut Wake) -> bool {
        if self.next >= trace.len() || self.waiting_on.is_some() {
            return false;
        }
        if self.resume_at > t {
            wake.at(self.resume_at);
            return false;
        }
        true
    }

    pub fn current_block(&self) -> Option<u64> {
        self.block
    }

    pub fn block_of(&self, pc: u64) -> u64 {
        pc & !(self.block_bytes - 1)
    }

    /// Fetches trace instruction `self.next`, requesting its block if needed.
    #[allow(clippy::too_many_arguments)]
    pub fn fetch(
        &mut self,
        ins: &TraceInstruction,
        core: usize,
        t: Tick,
        mem: &mut dyn MemorySystem,
        stats: &mut CoreStats,
        wake: &mut Wake,
    ) -> Fetched {
        let block = self.block_of(ins.pc);
        if self.block != Some(block) {
            while self.inflight.front().is_some_and(|&r| r <= t) {
                self.inflight.pop_front();
            }
            if self.inflight.len() >= self.max_inflight {
                wake.at(self.inflight[0]);
                return Fetched::Stall;
            }
            match mem.access(core, Side::Inst, block, self.block_bytes, false, t) {
                Access::Ready(r) => {
                    self.block = Some(block);
                    self.block_ready = r;
                    if r > t {
                        // Completions can arrive out of order; keep the queue sorted.
                        let pos = self.inflight.partition_point(|&x| x <= r);
                        self.inflight.insert(pos, r);
                    }
                }
                Access::Blocked { retry } => {
                    wake.at(retry);
                    return Fetched::Stall;
                }
            }
        }
        let idx = self.next;
        self.next += 1;
        stats.fetched += 1;
        let mut mispredicted = false;
        if ins.branch.is_some() {
            stats.branches += 1;
            if self.bp.observe(ins) {
                stats.mispredictions += 1;
                mispredicted = true;
                self.waiting_on = Some(idx);
            }
        }
        let ends_group = mispredicted || ins.next_pc() != ins.pc.wrapping_add(crate::trace::INSTR_BYTES);
        Fetched::Ok {
            ready: self.block_ready,
            mispredicted,
            ends_group,
        }
    }

    /// The branch fetch was waiting on resolved; fetch restarts at `at`.
    pub fn redirect(&mut self, at: Tick) {
        self.waiting_on = None;
        self.resume_at = at;
    }
}

/// Either core model.
#[derive(Debug, Clone)]
pub enum Core {
    InOrder(InOrderCore),
    OutOfOrder(OooCore),
}

impl Core {
    /// Expects a validated config.
    pub fn new(id: usize, cfg: &CoreConfig, period: Tick) -> Self {
        match cfg.kind {
            CoreKind::InOrder => Core::InOrder(InOrderCore::new(id, cfg, period)),
            CoreKind::OutOfOrder => Core::OutOfOrder(OooCore::new(id, cfg, period)),
        }
    }

    pub fn period(&self) -> Tick {
        match self {
            Core::InOrder(c) => c.period(),
            Core::OutOfOrder(c) => c.period(),
        }
    }

    /// Advances one cycle at core edge `t`.
    pub fn step(&mut self, trace: &Trace, t: Tick, mem: &mut dyn MemorySystem) -> Result<Step, CoreError> {
        match self {
            Core::InOrder(c) => c.step(trace, t, mem),
            Core::OutOfOrder(c) => c.step(trace, t, mem),
        }
    }

    pub fn stats(&self) -> &CoreStats {
        match self {
            Core::InOrder(c) => c.stats(),
            Core::OutOfOrder(c) => c.stats(),
        }
    }
}

/// Runs one core over `trace` against `mem` until every instruction commits.
/// With `idle_skip`, edges on which nothing can change are jumped over.
pub fn run_core(
    cfg: &CoreConfig,
    period: Tick,
    trace: &Trace,
    mem: &mut dyn MemorySystem,
    idle_skip: bool,
) -> Result<CoreStats, CoreError> {
    let mut core = Core::new(0, cfg, period);
    let mut t = 0;
    loop {
        match core.step(trace, t, mem)? {
            Step::Done => return Ok(*core.stats()),
            Step::Idle(w) if idle_skip => t = next_edge(period, w.max(t + period)),
            _ => t += period,
        }
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::trace::{reg, InstrKind, Trace, TraceInstruction};
    use alloc::vec::Vec;

    pub fn independent_alu(n: usize) -> Trace {
        let v: Vec<_> = (0..n)
            .map(|i| TraceInstruction::int_alu(4 * i as u64, reg((1 + i % 30) as u8), None, None))
            .collect();
        Trace::from_instructions(v).unwrap()
    }

    pub fn dependent(kind: InstrKind, n: usize) -> Trace {
        let v: Vec<_> = (0..n)
            .map(|i| TraceInstruction::op(kind, 4 * i as u64, Some(reg(1)), Some(reg(1)), None))
            .collect();
        Trace::from_instructions(v).unwrap()
    }

    pub fn independent_loads(n: usize) -> Trace {
        let v: Vec<_> = (0..n)
            .map(|i| {
                TraceInstruction::load(
                    4 * i as u64,
                    reg((1 + i % 30) as u8),
                    None,
                    0x1000 + 8 * (i as u64 % 64),
                    8,
                )
            })
            .collect();
        Trace::from_instructions(v).unwrap()
    }
}
