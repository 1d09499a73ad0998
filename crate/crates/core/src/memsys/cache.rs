//! One set-associative, write-back, write-allocate cache level.
//!
//! Timing is computed when a request arrives: a miss installs its line at
//! once, tagged with the tick its fill returns. Until then the line counts as
//! an outstanding MSHR and later accesses to it merge.

use crate::config::{CacheConfig, LookupMode};
use crate::kernel::Tick;
use alloc::vec;
use alloc::vec::Vec;

/// Per-level counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LevelStats {
    pub demand_accesses: u64,
    pub hits: u64,
    pub misses: u64,
    /// Accesses that found their line still being filled.
    pub merged: u64,
    pub demand_bytes: u64,
    pub fill_bytes: u64,
    /// Dirty lines this level wrote back to the next one.
    pub writebacks: u64,
}

impl LevelStats {
    pub fn add(&mut self, o: &LevelStats) {
        self.demand_accesses += o.demand_accesses;
        self.hits += o.hits;
        self.misses += o.misses;
        self.merged += o.merged;
        self.demand_bytes += o.demand_bytes;
        self.fill_bytes += o.fill_bytes;
        self.writebacks += o.writebacks;
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Way {
    line: u64,
    valid: bool,
    dirty: bool,
    stamp: u64,
    fill_ready: Tick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    Hit,
    /// Line allocated but its fill returns at the given tick.
    Pending(Tick),
    Miss,
}

#[derive(Debug, Clone)]
pub struct Cache {
    cfg: CacheConfig,
    period: Tick,
    set_mask: u64,
    line_shift: u32,
    ways: Vec<Way>,
    stamp: u64,
    inflight: Vec<(u64, Tick)>,
    pub stats: LevelStats,
}

impl Cache {
    /// Expects a validated config.
    pub fn new(cfg: CacheConfig, period: Tick) -> Self {
        Self {
            set_mask: cfg.sets() - 1,
            line_shift: cfg.line_size.trailing_zeros(),
            ways: vec![Way::default(); (cfg.sets() * cfg.assoc as u64) as usize],
            stamp: 0,
            inflight: Vec::new(),
            stats: LevelStats::default(),
            cfg,
            period,
        }
    }

    pub fn config(&self) -> &CacheConfig {
        &self.cfg
    }

    pub fn period(&self) -> Tick {
        self.period
    }

    pub fn line_size(&self) -> u64 {
        self.cfg.line_size
    }

    pub fn line_of(&self, addr: u64) -> u64 {
        addr & !(self.cfg.line_size - 1)
    }

    /// Data latency in ticks.
    pub fn latency(&self) -> Tick {
        self.cfg.data_latency * self.period
    }

    /// Ticks from arrival until a miss is sent to the next level.
    pub fn miss_delay(&self) -> Tick {
        match self.cfg.lookup {
            LookupMode::Serial => self.latency(),
            LookupMode::Parallel => self.period,
        }
    }

    fn set_range(&self, line: u64) -> core::ops::Range<usize> {
        let set = ((line >> self.line_shift) & self.set_mask) as usize;
        let a = self.cfg.assoc;
        set * a..set * a + a
    }

    fn find(&self, line: u64) -> Option<usize> {
        self.set_range(line)
            .find(|&i| self.ways[i].valid && self.ways[i].line == line)
    }

    pub fn contains(&self, line: u64) -> bool {
        self.find(line).is_some()
    }

    /// Looks `line` up at tick `t`, refreshing LRU and marking it dirty on writes.
    pub fn probe(&mut self, line: u64, t: Tick, write: bool) -> Probe {
        let Some(i) = self.find(line) else {
            return Probe::Miss;
        };
        self.stamp += 1;
        let w = &mut self.ways[i];
        w.stamp = self.stamp;
        w.dirty |= write;
        if w.fill_ready > t {
            Probe::Pending(w.fill_ready)
        } else {
            Probe::Hit
        }
    }

    /// If every MSHR is busy at `t`, the tick the first one frees.
    pub fn mshr_full(&mut self, t: Tick) -> Option<Tick> {
        self.inflight.retain(|&(_, ready)| ready > t);
        if self.inflight.len() < self.cfg.mshrs {
            return None;
        }
        self.inflight.iter().map(|&(_, r)| r).min()
    }

    pub fn outstanding(&self, t: Tick) -> usize {
        self.inflight.iter().filter(|&&(_, r)| r > t).count()
    }

    /// Records an outstanding fill that occupies an MSHR until `ready`.
    pub fn track_fill(&mut self, line: u64, ready: Tick) {
        self.inflight.push((line, ready));
    }

    /// Installs `line` over the LRU way. Returns the evicted line if it was dirty.
    pub fn install(&mut self, line: u64, fill_ready: Tick, dirty: bool) -> Option<u64> {
        debug_assert!(self.find(line).is_none());
        let range = self.set_range(line);
        let victim = range
            .clone()
            .find(|&i| !self.ways[i].valid)
            .unwrap_or_else(|| range.min_by_key(|&i| self.ways[i].stamp).unwrap());
        let old = self.ways[victim];
        self.stamp += 1;
        self.ways[victim] = Way {
            line,
            valid: true,
            dirty,
            stamp: self.stamp,
            fill_ready,
        };
        (old.valid && old.dirty).then_some(old.line)
    }

    /// Absorbs a writeback from the level above. False if the line is absent.
    pub fn absorb_writeback(&mut self, line: u64) -> bool {
        match self.find(line) {
            Some(i) => {
                self.ways[i].dirty = true;
                true
            }
            None => false,
        }
    }

    /// Untimed access used to warm the cache: no counters, no MSHRs, clean fills.
    pub fn warm(&mut self, line: u64) -> bool {
        if let Some(i) = self.find(line) {
            self.stamp += 1;
            self.ways[i].stamp = self.stamp;
            return true;
        }
        self.install(line, 0, false);
        false
    }

    pub fn reset_stats(&mut self) {
        self.stats = LevelStats::default();
    }
}
