//! Gshare direction predictor with a BTB, return-address stack and an
//! indirect target table.

use crate::config::BpConfig;
use crate::trace::{InstrKind, TraceInstruction, INSTR_BYTES};
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchKind {
    Conditional,
    Call,
    Return,
    Indirect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub taken: bool,
    pub target: Option<u64>,
}

impl Prediction {
    /// Address fetch continues from. A taken prediction without a known
    /// target cannot redirect, so fetch falls through.
    pub fn next_pc(&self, pc: u64) -> u64 {
        match (self.taken, self.target) {
            (true, Some(t)) => t,
            _ => pc.wrapping_add(INSTR_BYTES),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BranchPredictor {
    counters: Vec<u8>,
    counter_max: u8,
    threshold: u8,
    history: u64,
    history_mask: u64,
    table_mask: u64,
    btb: Vec<Option<(u64, u64)>>,
    ras: Vec<u64>,
    ras_entries: usize,
    indirect: Vec<Option<(u64, u64)>>,
}

impl BranchPredictor {
    /// Expects a validated config.
    pub fn new(cfg: &BpConfig) -> Self {
        let counter_max = ((1u16 << cfg.counter_bits) - 1) as u8;
        let threshold = 1u8 << (cfg.counter_bits - 1);
        let entries = cfg.table_entries();
        let hbits = cfg.history_bits();
        Self {
            counters: vec![threshold - 1; entries],
            counter_max,
            threshold,
            history: 0,
            history_mask: (1u64 << hbits) - 1,
            table_mask: entries as u64 - 1,
            btb: vec![None; cfg.btb_entries],
            ras: Vec::with_capacity(cfg.ras_entries),
            ras_entries: cfg.ras_entries,
            indirect: vec![None; cfg.indirect_entries],
        }
    }

    fn index(&self, pc: u64) -> usize {
        (((pc >> 2) ^ self.history) & self.table_mask) as usize
    }

    fn btb_slot(&self, pc: u64) -> usize {
        ((pc >> 2) % self.btb.len() as u64) as usize
    }

    fn indirect_slot(&self, pc: u64) -> usize {
        (((pc >> 2) ^ self.history) % self.indirect.len() as u64) as usize
    }

    fn btb_target(&self, pc: u64) -> Option<u64> {
        match self.btb[self.btb_slot(pc)] {
            Some((tag, target)) if tag == pc => Some(target),
            _ => None,
        }
    }

    /// Side-effect free.
    pub fn predict(&self, pc: u64, kind: BranchKind) -> Prediction {
        match kind {
            BranchKind::Conditional => Prediction {
                taken: self.counters[self.index(pc)] >= self.threshold,
                target: self.btb_target(pc),
            },
            BranchKind::Call => Prediction {
                taken: true,
                target: self.btb_target(pc),
            },
            BranchKind::Return => Prediction {
                taken: true,
                target: self.ras.last().copied(),
            },
            BranchKind::Indirect => Prediction {
                taken: true,
                target: match self.indirect[self.indirect_slot(pc)] {
                    Some((tag, target)) if tag == pc => Some(target),
                    _ => None,
                },
            },
        }
    }

    pub fn update(&mut self, pc: u64, kind: BranchKind, taken: bool, target: u64) {
        match kind {
            BranchKind::Conditional => {
                let i = self.index(pc);
                let c = &mut self.counters[i];
                if taken {
                    *c = (*c + 1).min(self.counter_max);
                } else {
                    *c = c.saturating_sub(1);
                }
                self.history = ((self.history << 1) | taken as u64) & self.history_mask;
            }
            BranchKind::Call => {
                if self.ras.len() == self.ras_entries {
                    self.ras.remove(0);
                }
                self.ras.push(pc.wrapping_add(INSTR_BYTES));
            }
            BranchKind::Return => {
                self.ras.pop();
            }
            BranchKind::Indirect => {
                let slot = self.indirect_slot(pc);
                self.indirect[slot] = Some((pc, target));
            }
        }
        if taken && kind != BranchKind::Return && kind != BranchKind::Indirect {
            let slot = self.btb_slot(pc);
            self.btb[slot] = Some((pc, target));
        }
    }

    /// Predicts then trains on a trace branch; returns true on a mispredict
    /// (wrong direction, or taken with a missing or stale target).
    /// Non-branches return false and leave the predictor untouched.
    pub fn observe(&mut self, instr: &TraceInstruction) -> bool {
        if instr.kind != InstrKind::CondBranch {
            return false;
        }
        let Some(br) = instr.branch else { return false };
        let predicted = self.predict(instr.pc, BranchKind::Conditional).next_pc(instr.pc);
        self.update(instr.pc, BranchKind::Conditional, br.taken, br.target);
        predicted != instr.next_pc()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::gen_branchy;

    fn bp() -> BranchPredictor {
        BranchPredictor::new(&BpConfig::default())
    }

    #[test]
    fn cold_predicts_not_taken() {
        let p = bp();
        assert_eq!(p.counters[0], 7);
        let pr = p.predict(0x100, BranchKind::Conditional);
        assert!(!pr.taken);
        assert_eq!(pr.target, None);
    }

    #[test]
    fn learns_taken_after_saturating_updates() {
        let mut p = bp();
        // Saturate the history first so the same counter is trained every time.
        for _ in 0..20 {
            p.update(0x40, BranchKind::Conditional, true, 0x80);
        }
        let mut q = p.clone();
        q.counters.iter_mut().for_each(|c| *c = 0);
        for _ in 0..8 {
            q.update(0x40, BranchKind::Conditional, true, 0x80);
        }
        let pr = q.predict(0x40, BranchKind::Conditional);
        assert!(pr.taken);
        assert_eq!(pr.target, Some(0x80));
        assert_eq!(q.counters[q.index(0x40)], 8);
    }

    #[test]
    fn counters_saturate() {
        let mut p = bp();
        for _ in 0..100 {
            p.update(0x40, BranchKind::Conditional, true, 0x80);
        }
        assert!(p.counters.iter().all(|&c| c <= 15));
        for _ in 0..100 {
            p.update(0x40, BranchKind::Conditional, false, 0x80);
        }
        assert!(p.counters.contains(&0));
    }

    #[test]
    fn btb_is_direct_mapped() {
        let mut p = bp();
        p.update(0x0, BranchKind::Call, true, 0x1000);
        // 32 entries x 4 bytes: 0x80 aliases 0x0.
        p.update(0x80, BranchKind::Call, true, 0x2000);
        assert_eq!(p.predict(0x0, BranchKind::Call).target, None);
        assert_eq!(p.predict(0x80, BranchKind::Call).target, Some(0x2000));
    }

    #[test]
    fn ras_pairs_calls_and_returns() {
        let mut p = bp();
        p.update(0x100, BranchKind::Call, true, 0x900);
        p.update(0x200, BranchKind::Call, true, 0x900);
        assert_eq!(p.predict(0x904, BranchKind::Return).target, Some(0x204));
        p.update(0x904, BranchKind::Return, true, 0x204);
        assert_eq!(p.predict(0x904, BranchKind::Return).target, Some(0x104));
        // Overflow drops the oldest entry.
        for i in 0..20 {
            p.update(0x1000 + 4 * i, BranchKind::Call, true, 0x900);
        }
        assert_eq!(p.ras.len(), 12);
    }

    #[test]
    fn indirect_targets_are_remembered() {
        let mut p = bp();
        assert_eq!(p.predict(0x300, BranchKind::Indirect).target, None);
        p.update(0x300, BranchKind::Indirect, true, 0x5000);
        assert_eq!(p.predict(0x300, BranchKind::Indirect).target, Some(0x5000));
    }

    fn accuracy_after_warmup(predictability: f64, seed: u64) -> f64 {
        let t = gen_branchy(50_000, predictability, seed).unwrap();
        let mut p = bp();
        let (mut seen, mut correct) = (0usize, 0usize);
        for ins in t.instructions().iter().filter(|i| i.kind == InstrKind::CondBranch) {
            let miss = p.observe(ins);
            seen += 1;
            if seen > 1000 {
                correct += !miss as usize;
            }
        }
        assert!(seen >= 10_000, "only {seen} branches");
        correct as f64 / (seen - 1000) as f64
    }

    #[test]
    fn learnable_patterns_are_predicted() {
        for seed in [1, 2, 3] {
            let acc = accuracy_after_warmup(1.0, seed);
            assert!(acc >= 0.95, "accuracy {acc}");
        }
    }

    #[test]
    fn coin_flips_are_not() {
        for seed in [1, 2, 3] {
            let acc = accuracy_after_warmup(0.5, seed);
            assert!((0.45..=0.55).contains(&acc), "accuracy {acc}");
        }
    }

    #[test]
    fn non_branches_are_ignored() {
        let mut p = bp();
        let i = TraceInstruction::int_alu(0, crate::trace::reg(1), None, None);
        assert!(!p.observe(&i));
        assert_eq!(p.history, 0);
    }
}
