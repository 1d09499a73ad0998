//! Private L1I/L1D/L2 per core, a shared L3, and DDR-class memory behind a
//! board clock crossing.

mod cache;
mod dram;

pub use cache::{Cache, LevelStats, Probe};
pub use dram::{Dram, MemStats};

use crate::config::{ConfigError, SystemConfig};
use crate::kernel::{next_edge, ClockDomain, Tick};
use alloc::vec::Vec;

/// Which L1 a request goes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Inst,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    /// Data is available to the requester at this tick.
    Ready(Tick),
    /// Every L1 MSHR is busy; nothing was recorded. Retry no earlier than `retry`.
    Blocked { retry: Tick },
}

/// What a core sees of the memory system.
pub trait MemorySystem {
    fn access(&mut self, core: usize, side: Side, addr: u64, size: u64, write: bool, now: Tick) -> Access;
}

/// The tick at which a consumer in domain `to` observes something sent at `now`.
pub fn cross_domain(to: &ClockDomain, now: Tick) -> Tick {
    to.next_edge(now)
}

/// Zero-latency memory: every access is ready when issued.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdealMemory {
    pub accesses: u64,
}

impl MemorySystem for IdealMemory {
    fn access(&mut self, _core: usize, _side: Side, _addr: u64, _size: u64, _write: bool, now: Tick) -> Access {
        self.accesses += 1;
        Access::Ready(now)
    }
}

#[derive(Debug, Clone)]
pub struct PrivateCaches {
    pub l1i: Cache,
    pub l1d: Cache,
    pub l2: Cache,
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    private: Vec<PrivateCaches>,
    l3: Cache,
    mem: Dram,
    board_period: Tick,
    memory_period: Tick,
}

impl Hierarchy {
    pub fn build(cfg: &SystemConfig) -> Result<Self, ConfigError> {
        let d = cfg.validate()?;
        let stack = PrivateCaches {
            l1i: Cache::new(cfg.l1i, d.l1.period()),
            l1d: Cache::new(cfg.l1d, d.l1.period()),
            l2: Cache::new(cfg.l2, d.l2.period()),
        };
        Ok(Self {
            private: (0..cfg.cores).map(|_| stack.clone()).collect(),
            l3: Cache::new(cfg.l3, d.l3.period()),
            mem: Dram::new(cfg.mem),
            board_period: d.board.period(),
            memory_period: d.memory.period(),
        })
    }

    pub fn cores(&self) -> usize {
        self.private.len()
    }

    pub fn private(&self, core: usize) -> &PrivateCaches {
        &self.private[core]
    }

    pub fn l3(&self) -> &Cache {
        &self.l3
    }

    pub fn mem_stats(&self) -> MemStats {
        self.mem.stats
    }

    pub fn reset_stats(&mut self) {
        for p in &mut self.private {
            p.l1i.reset_stats();
            p.l1d.reset_stats();
            p.l2.reset_stats();
        }
        self.l3.reset_stats();
        self.mem.reset_stats();
    }

    /// Untimed access that leaves `addr`'s line resident at every level.
    pub fn warm(&mut self, core: usize, side: Side, addr: u64) {
        let p = &mut self.private[core];
        let l1 = match side {
            Side::Inst => &mut p.l1i,
            Side::Data => &mut p.l1d,
        };
        l1.warm(l1.line_of(addr));
        p.l2.warm(p.l2.line_of(addr));
        self.l3.warm(self.l3.line_of(addr));
    }

    /// Fetches `line` for core `core`'s L1, arriving at the L2 side at `t`.
    /// Returns when the data is back at the L2's output.
    fn l2_fetch(&mut self, core: usize, bytes: u64, addr: u64, t: Tick) -> Tick {
        let l2 = &mut self.private[core].l2;
        let line = l2.line_of(addr);
        let mut a = next_edge(l2.period(), t);
        l2.stats.demand_accesses += 1;
        l2.stats.demand_bytes += bytes;
        match l2.probe(line, a, false) {
            Probe::Hit => {
                l2.stats.hits += 1;
                return a + l2.latency();
            }
            Probe::Pending(ready) => {
                l2.stats.merged += 1;
                return ready;
            }
            Probe::Miss => {}
        }
        while let Some(free) = l2.mshr_full(a) {
            a = next_edge(l2.period(), free);
        }
        l2.stats.misses += 1;
        l2.stats.fill_bytes += l2.line_size();
        let fwd = a + l2.miss_delay();
        let (period, line_size) = (l2.period(), l2.line_size());
        let back = self.l3_fetch(line_size, line, fwd);
        let ready = next_edge(period, back);
        let l2 = &mut self.private[core].l2;
        l2.track_fill(line, ready);
        if let Some(victim) = l2.install(line, ready, false) {
            l2.stats.writebacks += 1;
            self.l3_writeback(victim, fwd);
        }
        ready
    }

    fn l3_fetch(&mut self, bytes: u64, addr: u64, t: Tick) -> Tick {
        let l3 = &mut self.l3;
        let line = l3.line_of(addr);
        let mut a = next_edge(l3.period(), t);
        l3.stats.demand_accesses += 1;
        l3.stats.demand_bytes += bytes;
        match l3.probe(line, a, false) {
            Probe::Hit => {
                l3.stats.hits += 1;
                return a + l3.latency();
            }
            Probe::Pending(ready) => {
                l3.stats.merged += 1;
                return ready;
            }
            Probe::Miss => {}
        }
        while let Some(free) = l3.mshr_full(a) {
            a = next_edge(l3.period(), free);
        }
        l3.stats.misses += 1;
        l3.stats.fill_bytes += l3.line_size();
        let fwd = a + l3.miss_delay();
        let at_board = next_edge(self.board_period, fwd);
        let at_mem = next_edge(self.memory_period, at_board);
        let done = self.mem.read(l3.line_size(), at_mem);
        let ready = next_edge(l3.period(), next_edge(self.board_period, done));
        l3.track_fill(line, ready);
        if let Some(victim) = l3.install(line, ready, false) {
            l3.stats.writebacks += 1;
            self.mem_writeback(victim, fwd);
        }
        ready
    }

    fn l2_writeback(&mut self, core: usize, addr: u64, t: Tick) {
        let l2 = &mut self.private[core].l2;
        let line = l2.line_of(addr);
        if !l2.absorb_writeback(line) {
            l2.stats.writebacks += 1;
            let at = next_edge(l2.period(), t);
            self.l3_writeback(line, at);
        }
    }

    fn l3_writeback(&mut self, addr: u64, t: Tick) {
        let line = self.l3.line_of(addr);
        if !self.l3.absorb_writeback(line) {
            self.l3.stats.writebacks += 1;
            let at = next_edge(self.l3.period(), t);
            self.mem_writeback(line, at);
        }
    }

    fn mem_writeback(&mut self, _line: u64, t: Tick) {
        let at_mem = next_edge(self.memory_period, next_edge(self.board_period, t));
        let bytes = self.l3.line_size();
        self.mem.write(bytes, at_mem);
    }
}

impl MemorySystem for Hierarchy {
    fn access(&mut self, core: usize, side: Side, addr: u64, size: u64, write: bool, now: Tick) -> Access {
        let p = &mut self.private[core];
        let l1 = match side {
            Side::Inst => &mut p.l1i,
            Side::Data => &mut p.l1d,
        };
        let line = l1.line_of(addr);
        let a = next_edge(l1.period(), now);
        match l1.probe(line, a, write) {
            Probe::Hit => {
                l1.stats.demand_accesses += 1;
                l1.stats.demand_bytes += size;
                l1.stats.hits += 1;
                return Access::Ready(a + l1.latency());
            }
            Probe::Pending(ready) => {
                l1.stats.demand_accesses += 1;
                l1.stats.demand_bytes += size;
                l1.stats.merged += 1;
                return Access::Ready(ready);
            }
            Probe::Miss => {}
        }
        if let Some(retry) = l1.mshr_full(a) {
            return Access::Blocked { retry };
        }
        l1.stats.demand_accesses += 1;
        l1.stats.demand_bytes += size;
        l1.stats.misses += 1;
        l1.stats.fill_bytes += l1.line_size();
        let fwd = a + l1.miss_delay();
        let (period, line_size) = (l1.period(), l1.line_size());
        let back = self.l2_fetch(core, line_size, line, fwd);
        let ready = next_edge(period, back);
        let p = &mut self.private[core];
        let l1 = match side {
            Side::Inst => &mut p.l1i,
            Side::Data => &mut p.l1d,
        };
        l1.track_fill(line, ready);
        if let Some(victim) = l1.install(line, ready, write) {
            l1.stats.writebacks += 1;
            self.l2_writeback(core, victim, fwd);
        }
        Access::Ready(ready)
    }
}
