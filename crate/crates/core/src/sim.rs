//! Whole-system runs: builds the hierarchy, warms it, steps every core on
//! its clock edges and assembles [`RunStats`].

use crate::analysis::RunStats;
use crate::config::{ConfigError, SystemConfig, Warmup};
use crate::cores::{Core, CoreError, Step};
use crate::kernel::{next_edge, EventQueue, KernelError};
use crate::memsys::{Hierarchy, MemorySystem, Side};
use crate::trace::{Region, Trace};
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("configuration has {cores} cores but {traces} traces were given")]
    TraceCount { cores: usize, traces: usize },
}

/// Runs `trace` on core 0 of `cfg`.
pub fn run(cfg: &SystemConfig, trace: &Trace) -> Result<RunStats, SimError> {
    simulate(cfg, &[trace])
}

/// Runs one trace per core, cores sharing the L3 and memory.
pub fn simulate(cfg: &SystemConfig, traces: &[&Trace]) -> Result<RunStats, SimError> {
    let domains = cfg.validate()?;
    if traces.len() != cfg.cores {
        return Err(SimError::TraceCount {
            cores: cfg.cores,
            traces: traces.len(),
        });
    }
    let mut mem = Hierarchy::build(cfg)?;
    for (core, trace) in traces.iter().enumerate() {
        warm_up(&mut mem, core, trace, cfg.warmup, cfg.core.fetch_block_bytes);
    }
    mem.reset_stats();

    let period = domains.core.period();
    let mut cores: Vec<Core> = (0..cfg.cores).map(|id| Core::new(id, &cfg.core, period)).collect();
    drive(&mut cores, traces, &mut mem, cfg.idle_skip)?;

    let mut stats = RunStats {
        config_id: cfg.name.clone(),
        core_period: period,
        l3: mem.l3().stats,
        memory: mem.mem_stats(),
        ..Default::default()
    };
    for (id, core) in cores.iter().enumerate() {
        let s = core.stats();
        let p = mem.private(id);
        stats.l1i.add(&p.l1i.stats);
        stats.l1d.add(&p.l1d.stats);
        stats.l2.add(&p.l2.stats);
        stats.core_cycles = stats.core_cycles.max(s.cycles);
        stats.committed_instructions += s.committed;
        stats.committed_mem_ops += s.committed_mem_ops;
        stats.branches += s.branches;
        stats.mispredictions += s.mispredictions;
        stats.squashed_mem_ops += s.squashed_mem_ops;
        stats.peaks.merge(&s.peaks);
    }
    stats.sim_ticks = domains.core.cycles_to_ticks(stats.core_cycles)?;
    Ok(stats)
}

/// Steps cores on their edges until all are done. Cores due on the same
/// tick step in core-id order, so shared-L3 arbitration favors core 0.
fn drive(cores: &mut [Core], traces: &[&Trace], mem: &mut dyn MemorySystem, idle_skip: bool) -> Result<(), SimError> {
    let mut q = EventQueue::new();
    for id in 0..cores.len() {
        q.schedule(0, id)?;
    }
    let mut due = Vec::new();
    while let Some((t, id)) = q.advance() {
        due.clear();
        due.push(id);
        while q.peek_tick() == Some(t) {
            due.push(q.advance().unwrap().1);
        }
        due.sort_unstable();
        for &id in &due {
            let core = &mut cores[id];
            let p = core.period();
            let next = match core.step(traces[id], t, mem)? {
                Step::Done => continue,
                Step::Idle(w) if idle_skip => next_edge(p, w.max(t + p)),
                _ => t + p,
            };
            q.schedule(next, id)?;
        }
    }
    Ok(())
}

/// Populates caches before timing starts; see [`Warmup`].
pub fn warm_up(mem: &mut Hierarchy, core: usize, trace: &Trace, mode: Warmup, block_bytes: u64) {
    match mode {
        Warmup::Cold => {}
        Warmup::Footprint => {
            let meta = trace.meta();
            let (code, data) = (meta.code_regions(), meta.data_regions());
            if code.is_empty() && data.is_empty() {
                return warm_up(mem, core, trace, Warmup::TracePass, block_bytes);
            }
            let line = mem.private(core).l1d.line_size().min(block_bytes);
            let mut stream = |side: Side, regions: &[Region]| {
                for r in regions {
                    let mut a = r.base & !(line - 1);
                    while a < r.base.saturating_add(r.len) {
                        mem.warm(core, side, a);
                        a += line;
                    }
                }
            };
            stream(Side::Inst, &code);
            stream(Side::Data, &data);
        }
        Warmup::TracePass => {
            let mut block = None;
            for i in trace.instructions() {
                let b = i.pc & !(block_bytes - 1);
                if block != Some(b) {
                    mem.warm(core, Side::Inst, b);
                    block = Some(b);
                }
                if let Some(m) = i.mem {
                    mem.warm(core, Side::Data, m.addr);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::speedup;
    use crate::config::Preset;
    use crate::trace::{gen_compute_bound, gen_memory_bound, ChasePattern};

    #[test]
    fn runs_are_deterministic() {
        let t = gen_compute_bound(5000, 16 * 1024, 0.1, 11).unwrap();
        let cfg = Preset::CryoAll.config();
        assert_eq!(run(&cfg, &t).unwrap(), run(&cfg, &t).unwrap());
    }

    #[test]
    fn stats_are_complete() {
        let t = gen_compute_bound(5000, 16 * 1024, 0.1, 11).unwrap();
        let s = run(&Preset::SuperCryo.config(), &t).unwrap();
        assert_eq!(s.config_id, "SuperCryo");
        assert_eq!(s.committed_instructions, 5000);
        assert_eq!(s.committed_mem_ops as usize, t.mem_op_count());
        assert_eq!(s.l1d.demand_accesses as usize, t.mem_op_count());
        assert_eq!(s.sim_ticks, s.core_cycles * 10);
        // Footprint warm-up leaves the compute kernel resident.
        assert_eq!(s.l1d.misses, 0);
        assert_eq!(s.l3.misses, 0);
    }

    #[test]
    fn warmup_modes_differ_only_in_start_state() {
        let t = gen_compute_bound(3000, 16 * 1024, 0.1, 1).unwrap();
        let mut cfg = Preset::CryoAll.config();
        cfg.warmup = Warmup::Cold;
        let cold = run(&cfg, &t).unwrap();
        cfg.warmup = Warmup::TracePass;
        let pass = run(&cfg, &t).unwrap();
        assert!(cold.l1d.misses > 0);
        assert_eq!(pass.l1d.misses, 0);
        assert!(cold.sim_ticks > pass.sim_ticks);
    }

    #[test]
    fn compute_bound_scales_with_frequency() {
        let t = gen_compute_bound(5000, 16 * 1024, 0.1, 2).unwrap();
        let cryo = run(&Preset::CryoAll.config(), &t).unwrap();
        let sup = run(&Preset::SuperAll.config(), &t).unwrap();
        let s = speedup(&cryo, &sup).unwrap();
        assert!(s > 20.0 && s <= 25.0 + 1e-9, "{s}");
    }

    #[test]
    fn two_cores_share_the_l3() {
        let a = gen_memory_bound(2000, 32 << 20, ChasePattern::UniformRandom, 1).unwrap();
        let b = gen_compute_bound(2000, 8192, 0.1, 1).unwrap();
        let mut cfg = Preset::CryoAll.config();
        cfg.cores = 2;
        let s = simulate(&cfg, &[&a, &b]).unwrap();
        assert_eq!(s.committed_instructions, 4000);
        assert_eq!(s, simulate(&cfg, &[&a, &b]).unwrap());
        assert!(matches!(simulate(&cfg, &[&a]), Err(SimError::TraceCount { .. })));
    }

    #[test]
    fn idle_skip_does_not_change_results() {
        let t = gen_memory_bound(3000, 32 << 20, ChasePattern::PointerChase, 3).unwrap();
        for p in [Preset::SuperCryo, Preset::InOrderSuperAll] {
            let mut cfg = p.config();
            let a = run(&cfg, &t).unwrap();
            cfg.idle_skip = false;
            assert_eq!(a, run(&cfg, &t).unwrap());
        }
    }
}
