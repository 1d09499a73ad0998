//! Eight-stage in-order pipeline: F1 F2 D1 D2 AG M1 M2 WB.
//!
//! Arithmetic executes in AG (multi-cycle ops hold it), memory operations
//! send their L1D request when leaving AG and wait in M2 for the data, and
//! an instruction commits as it enters WB. Branches resolve in AG.

use super::{CoreError, CoreStats, FetchUnit, Fetched, Step, Wake, DEADLOCK_CYCLES};
use crate::config::CoreConfig;
use crate::kernel::Tick;
use crate::memsys::{Access, MemorySystem, Side};
use crate::trace::{InstrKind, Trace, NUM_ARCH_REGS};
use alloc::collections::VecDeque;
use alloc::vec::Vec;

const F1: usize = 0;
const F2: usize = 1;
const D2: usize = 3;
const AG: usize = 4;
const M1: usize = 5;
const M2: usize = 6;
const STAGES: usize = 7;

/// Stages F1..D2 that a mispredict flushes.
const FRONT_DEPTH: u64 = 4;

#[derive(Debug, Clone, Copy)]
struct Slot {
    idx: usize,
    entered: u64,
    fetch_ready: Tick,
    mem_ready: Tick,
    mispredicted: bool,
}

#[derive(Debug, Clone)]
pub struct InOrderCore {
    id: usize,
    cfg: CoreConfig,
    period: Tick,
    stages: [VecDeque<Slot>; STAGES],
    /// First cycle each register's latest value can be consumed in AG.
    reg_ready: Vec<u64>,
    fetch: FetchUnit,
    stats: CoreStats,
    last_commit: u64,
}

impl InOrderCore {
    pub fn new(id: usize, cfg: &CoreConfig, period: Tick) -> Self {
        Self {
            id,
            cfg: *cfg,
            period,
            stages: Default::default(),
            reg_ready: alloc::vec![0; NUM_ARCH_REGS as usize],
            fetch: FetchUnit::new(cfg),
            stats: CoreStats::default(),
            last_commit: 0,
        }
    }

    pub fn period(&self) -> Tick {
        self.period
    }

    pub fn stats(&self) -> &CoreStats {
        &self.stats
    }

    fn room(&self, stage: usize) -> bool {
        self.stages[stage].len() < self.cfg.width
    }

    pub fn step(&mut self, trace: &Trace, t: Tick, mem: &mut dyn MemorySystem) -> Result<Step, CoreError> {
        if self.stats.committed as usize == trace.len() {
            return Ok(Step::Done);
        }
        let c = t / self.period;
        let p = self.period;
        let w = self.cfg.width;
        let ins = trace.instructions();
        let mut wake = Wake::new();
        let mut progress = false;

        // M2 -> WB: commit.
        for _ in 0..w {
            let Some(s) = self.stages[M2].front() else { break };
            if s.mem_ready > t {
                wake.at(s.mem_ready);
                break;
            }
            let s = self.stages[M2].pop_front().unwrap();
            let i = &ins[s.idx];
            if i.kind == InstrKind::Load {
                if let Some(d) = i.dest {
                    self.reg_ready[d.id() as usize] = c;
                }
            }
            if i.kind.is_mem() {
                self.stats.committed_mem_ops += 1;
            }
            self.stats.committed += 1;
            self.stats.cycles = c + 1;
            self.last_commit = c;
            progress = true;
        }

        // M1 -> M2.
        while self.room(M2) {
            let Some(mut s) = self.stages[M1].pop_front() else {
                break;
            };
            s.entered = c;
            self.stages[M2].push_back(s);
            progress = true;
        }

        // AG -> M1, issuing memory requests.
        let mut ports = 0;
        while self.room(M1) {
            let Some(s) = self.stages[AG].front().copied() else {
                break;
            };
            let i = &ins[s.idx];
            let lat = if i.kind.is_mem() {
                self.cfg.fu_latency.int_alu
            } else {
                self.cfg.fu_latency.of(i.kind)
            } as u64;
            if c < s.entered + lat {
                wake.at((s.entered + lat) * p);
                break;
            }
            let mut s = s;
            if let Some(m) = i.mem {
                if ports == self.cfg.cache_ports {
                    break;
                }
                match mem.access(
                    self.id,
                    Side::Data,
                    m.addr,
                    m.size as u64,
                    i.kind == InstrKind::Store,
                    t,
                ) {
                    Access::Ready(r) => s.mem_ready = r,
                    Access::Blocked { retry } => {
                        wake.at(retry);
                        break;
                    }
                }
                ports += 1;
                self.stats.l1d_requests += 1;
            }
            if s.mispredicted {
                let extra = self.cfg.mispredict_penalty.saturating_sub(FRONT_DEPTH);
                self.fetch.redirect((c + extra) * p);
            }
            self.stages[AG].pop_front();
            s.entered = c;
            self.stages[M1].push_back(s);
            progress = true;
        }
        self.stats.peaks.l1d_issue = self.stats.peaks.l1d_issue.max(ports as u64);

        // D2 -> AG once sources are available.
        while self.room(AG) {
            let Some(s) = self.stages[D2].front() else { break };
            let i = &ins[s.idx];
            let pending = [i.src1, i.src2]
                .into_iter()
                .flatten()
                .map(|r| self.reg_ready[r.id() as usize])
                .max()
                .unwrap_or(0);
            if pending > c {
                if pending != u64::MAX {
                    wake.at(pending * p);
                }
                break;
            }
            let mut s = self.stages[D2].pop_front().unwrap();
            s.entered = c;
            if let Some(d) = i.dest {
                self.reg_ready[d.id() as usize] = if i.kind == InstrKind::Load {
                    u64::MAX
                } else {
                    c + self.cfg.fu_latency.of(i.kind) as u64
                };
            }
            self.stages[AG].push_back(s);
            progress = true;
        }

        // D1 -> D2, F2 -> D1.
        for stage in [D2 - 1, F2] {
            while self.room(stage + 1) {
                let Some(mut s) = self.stages[stage].pop_front() else {
                    break;
                };
                s.entered = c;
                self.stages[stage + 1].push_back(s);
                progress = true;
            }
        }

        // F1 -> F2 once the fetch block has arrived.
        while self.room(F2) {
            let Some(s) = self.stages[F1].front() else { break };
            if s.fetch_ready > t {
                wake.at(s.fetch_ready);
                break;
            }
            let mut s = self.stages[F1].pop_front().unwrap();
            s.entered = c;
            self.stages[F2].push_back(s);
            progress = true;
        }

        // Fetch into F1.
        let mut group = 0;
        while group < self.cfg.fetch_group() && self.room(F1) && self.fetch.enabled(trace, t, &mut wake) {
            let idx = self.fetch.next;
            if group > 0 && Some(self.fetch.block_of(ins[idx].pc)) != self.fetch.current_block() {
                break;
            }
            match self.fetch.fetch(&ins[idx], self.id, t, mem, &mut self.stats, &mut wake) {
                Fetched::Stall => break,
                Fetched::Ok {
                    ready,
                    mispredicted,
                    ends_group,
                } => {
                    self.stages[F1].push_back(Slot {
                        idx,
                        entered: c,
                        fetch_ready: ready,
                        mem_ready: 0,
                        mispredicted,
                    });
                    progress = true;
                    group += 1;
                    if ends_group {
                        break;
                    }
                }
            }
        }

        if self.stats.committed as usize == trace.len() {
            return Ok(Step::Done);
        }
        if progress {
            return Ok(Step::Busy);
        }
        let next = wake.get().filter(|&w| w / p - self.last_commit <= DEADLOCK_CYCLES);
        match next {
            Some(w) => Ok(Step::Idle(w)),
            None => Err(CoreError::Deadlock {
                core: self.id,
                cycles: DEADLOCK_CYCLES,
                at: c,
                committed: self.stats.committed,
            }),
        }
    }
}
