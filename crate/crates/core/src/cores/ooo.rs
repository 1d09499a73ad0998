//! Out-of-order core: fetch queue, decode, rename into a bounded physical
//! register file, issue queue with oldest-ready-first select, ROB and LSQ.
//!
//! Each cycle is evaluated back to front (commit, issue, dispatch, fetch) so
//! an instruction advances at most one step per cycle. Functional units are
//! fully pipelined. Loads never pass an older uncommitted store to an
//! overlapping address.

use super::{CoreError, CoreStats, FetchUnit, Fetched, Step, Wake, DEADLOCK_CYCLES};
use crate::config::CoreConfig;
use crate::kernel::Tick;
use crate::memsys::{Access, MemorySystem, Side};
use crate::trace::{InstrKind, Trace, NUM_ARCH_REGS};
use alloc::collections::VecDeque;
use alloc::vec::Vec;

/// Architectural mappings that always hold a physical register, per file.
const ARCH_REGS_PER_FILE: usize = 32;

const NOT_ISSUED: Tick = Tick::MAX;

#[derive(Debug, Clone, Copy)]
struct RobEntry {
    idx: usize,
    done: Tick,
    srcs: [Option<usize>; 2],
    fp_dest: Option<bool>,
}

#[derive(Debug, Clone, Copy)]
struct FqEntry {
    idx: usize,
    dispatchable: Tick,
}

#[derive(Debug, Clone)]
pub struct OooCore {
    id: usize,
    cfg: CoreConfig,
    period: Tick,
    fq: VecDeque<FqEntry>,
    rob: VecDeque<RobEntry>,
    /// Trace indices waiting to issue, oldest first.
    iq: Vec<usize>,
    lsq: usize,
    /// Uncommitted stores: (index, address, size).
    stores: VecDeque<(usize, u64, u64)>,
    /// Youngest in-flight producer of each architectural register.
    producer: Vec<Option<usize>>,
    int_free: usize,
    fp_free: usize,
    fetch: FetchUnit,
    stats: CoreStats,
    last_commit: u64,
}

fn overlaps(a: u64, asz: u64, b: u64, bsz: u64) -> bool {
    a < b + bsz && b < a + asz
}

impl OooCore {
    pub fn new(id: usize, cfg: &CoreConfig, period: Tick) -> Self {
        Self {
            id,
            cfg: *cfg,
            period,
            fq: VecDeque::new(),
            rob: VecDeque::new(),
            iq: Vec::new(),
            lsq: 0,
            stores: VecDeque::new(),
            producer: alloc::vec![None; NUM_ARCH_REGS as usize],
            int_free: cfg.int_regs - ARCH_REGS_PER_FILE,
            fp_free: cfg.fp_regs - ARCH_REGS_PER_FILE,
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

    fn entry(&self, idx: usize) -> Option<&RobEntry> {
        let head = self.rob.front()?.idx;
        idx.checked_sub(head).and_then(|o| self.rob.get(o))
    }

    /// Tick a source value is available; committed producers are always ready.
    fn ready_at(&self, producer: Option<usize>) -> Tick {
        producer.and_then(|p| self.entry(p)).map_or(0, |e| e.done)
    }

    pub fn step(&mut self, trace: &Trace, t: Tick, mem: &mut dyn MemorySystem) -> Result<Step, CoreError> {
        if self.stats.committed as usize == trace.len() {
            return Ok(Step::Done);
        }
        let c = t / self.period;
        let p = self.period;
        let ins = trace.instructions();
        let mut wake = Wake::new();
        let mut progress = false;

        // Commit.
        for _ in 0..self.cfg.width {
            let Some(e) = self.rob.front().copied() else { break };
            if e.done > t {
                if e.done != NOT_ISSUED {
                    wake.at(e.done);
                }
                break;
            }
            self.rob.pop_front();
            let i = &ins[e.idx];
            if i.kind.is_mem() {
                self.lsq -= 1;
                self.stats.committed_mem_ops += 1;
                if i.kind == InstrKind::Store {
                    debug_assert_eq!(self.stores.front().map(|s| s.0), Some(e.idx));
                    self.stores.pop_front();
                }
            }
            match e.fp_dest {
                Some(true) => self.fp_free += 1,
                Some(false) => self.int_free += 1,
                None => {}
            }
            if let Some(d) = i.dest {
                let slot = &mut self.producer[d.id() as usize];
                if *slot == Some(e.idx) {
                    *slot = None;
                }
            }
            self.stats.committed += 1;
            self.stats.cycles = c + 1;
            self.last_commit = c;
            progress = true;
        }

        // Issue: oldest ready first.
        let mut issued = 0;
        let mut ports = 0;
        let mut k = 0;
        while k < self.iq.len() && issued < self.cfg.width {
            let idx = self.iq[k];
            let e = *self.entry(idx).expect("issue queue entry outside the ROB");
            let ready = e.srcs.iter().map(|&s| self.ready_at(s)).max().unwrap_or(0);
            if ready > t {
                if ready != NOT_ISSUED {
                    wake.at(ready);
                }
                k += 1;
                continue;
            }
            let i = &ins[idx];
            let lat = self.cfg.fu_latency.of(i.kind) as Tick * p;
            let done = match i.mem {
                Some(m) => {
                    if ports == self.cfg.cache_ports {
                        k += 1;
                        continue;
                    }
                    let write = i.kind == InstrKind::Store;
                    if !write
                        && self
                            .stores
                            .iter()
                            .take_while(|s| s.0 < idx)
                            .any(|s| overlaps(s.1, s.2, m.addr, m.size as u64))
                    {
                        k += 1;
                        continue;
                    }
                    match mem.access(self.id, Side::Data, m.addr, m.size as u64, write, t) {
                        Access::Ready(r) => {
                            ports += 1;
                            self.stats.l1d_requests += 1;
                            // Stores retire into the cache without waiting for a fill.
                            if write {
                                t + lat
                            } else {
                                r.max(t + lat)
                            }
                        }
                        Access::Blocked { retry } => {
                            wake.at(retry);
                            k += 1;
                            continue;
                        }
                    }
                }
                None => t + lat,
            };
            let off = idx - self.rob.front().unwrap().idx;
            self.rob[off].done = done;
            self.iq.remove(k);
            issued += 1;
            progress = true;
            if self.fetch.waiting_on == Some(idx) {
                self.fetch.redirect(done + self.cfg.mispredict_penalty * p);
            }
        }
        self.stats.peaks.l1d_issue = self.stats.peaks.l1d_issue.max(ports as u64);

        // Dispatch: rename and allocate ROB, IQ and LSQ entries.
        for _ in 0..self.cfg.width {
            let Some(f) = self.fq.front().copied() else { break };
            if f.dispatchable > t {
                wake.at(f.dispatchable);
                break;
            }
            let i = &ins[f.idx];
            if self.rob.len() == self.cfg.rob || self.iq.len() == self.cfg.iq {
                break;
            }
            if i.kind.is_mem() && self.lsq == self.cfg.lsq {
                break;
            }
            let fp_dest = i.dest.map(|d| d.is_fp());
            match fp_dest {
                Some(true) if self.fp_free == 0 => break,
                Some(false) if self.int_free == 0 => break,
                Some(true) => self.fp_free -= 1,
                Some(false) => self.int_free -= 1,
                None => {}
            }
            let srcs = [i.src1, i.src2].map(|r| r.and_then(|r| self.producer[r.id() as usize]));
            if let Some(d) = i.dest {
                self.producer[d.id() as usize] = Some(f.idx);
            }
            if let Some(m) = i.mem {
                self.lsq += 1;
                if i.kind == InstrKind::Store {
                    self.stores.push_back((f.idx, m.addr, m.size as u64));
                }
            }
            self.rob.push_back(RobEntry {
                idx: f.idx,
                done: NOT_ISSUED,
                srcs,
                fp_dest,
            });
            self.iq.push(f.idx);
            self.fq.pop_front();
            progress = true;
        }

        // Fetch into the fetch queue.
        let mut group = 0;
        while group < self.cfg.fetch_group()
            && self.fq.len() < self.cfg.fetch_queue
            && self.fetch.enabled(trace, t, &mut wake)
        {
            let idx = self.fetch.next;
            if group > 0 && Some(self.fetch.block_of(ins[idx].pc)) != self.fetch.current_block() {
                break;
            }
            match self.fetch.fetch(&ins[idx], self.id, t, mem, &mut self.stats, &mut wake) {
                Fetched::Stall => break,
                Fetched::Ok { ready, ends_group, .. } => {
                    self.fq.push_back(FqEntry {
                        idx,
                        dispatchable: ready.max(t) + self.cfg.decode_depth * p,
                    });
                    progress = true;
                    group += 1;
                    if ends_group {
                        break;
                    }
                }
            }
        }

        self.record_peaks();

        if self.stats.committed as usize == trace.len() {
            return Ok(Step::Done);
        }
        if progress && c - self.last_commit <= DEADLOCK_CYCLES {
            return Ok(Step::Busy);
        }
        let next = wake.get().filter(|&w| w / p - self.last_commit <= DEADLOCK_CYCLES);
        match (progress, next) {
            (false, Some(w)) => Ok(Step::Idle(w)),
            _ => Err(CoreError::Deadlock {
                core: self.id,
                cycles: DEADLOCK_CYCLES,
                at: c,
                committed: self.stats.committed,
            }),
        }
    }

    fn record_peaks(&mut self) {
        let pk = &mut self.stats.peaks;
        pk.rob = pk.rob.max(self.rob.len() as u64);
        pk.iq = pk.iq.max(self.iq.len() as u64);
        pk.lsq = pk.lsq.max(self.lsq as u64);
        pk.fetch_queue = pk.fetch_queue.max(self.fq.len() as u64);
        let int_used = (self.cfg.int_regs - self.int_free) as u64;
        let fp_used = (self.cfg.fp_regs - self.fp_free) as u64;
        pk.int_regs = pk.int_regs.max(int_used);
        pk.fp_regs = pk.fp_regs.max(fp_used);
        debug_assert!(self.rob.len() <= self.cfg.rob);
        debug_assert!(self.iq.len() <= self.cfg.iq);
        debug_assert!(self.lsq <= self.cfg.lsq);
        debug_assert!(self.fq.len() <= self.cfg.fetch_queue);
        debug_assert!(pk.l1d_issue <= self.cfg.cache_ports as u64);
    }
}
