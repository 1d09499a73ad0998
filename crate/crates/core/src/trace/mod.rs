//! Workload traces: typed instructions with register dependencies and
//! memory addresses, plus the metadata that identifies how a trace was made.

mod gen;

pub use gen::{
    gen_branchy, gen_compute_bound, gen_memory_bound, ChasePattern, GenError, WorkloadPreset, L3_CAPACITY_BYTES,
    PRNG_ID,
};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

/// Number of architectural register ids (integer 0..32, floating point 32..64).
pub const NUM_ARCH_REGS: u8 = 64;

/// Bytes occupied by one instruction in the fetch stream.
pub const INSTR_BYTES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InstrKind {
    IntAlu,
    IntMul,
    IntDiv,
    FloatOp,
    Load,
    Store,
    CondBranch,
    Nop,
}

impl InstrKind {
    pub const ALL: [InstrKind; 8] = [
        InstrKind::IntAlu,
        InstrKind::IntMul,
        InstrKind::IntDiv,
        InstrKind::FloatOp,
        InstrKind::Load,
        InstrKind::Store,
        InstrKind::CondBranch,
        InstrKind::Nop,
    ];

    pub fn is_mem(self) -> bool {
        matches!(self, InstrKind::Load | InstrKind::Store)
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

/// Architectural register id in `0..64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reg(u8);

impl Reg {
    pub fn new(id: u8) -> Option<Self> {
        (id < NUM_ARCH_REGS).then_some(Reg(id))
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn is_fp(self) -> bool {
        self.0 >= 32
    }
}

/// Shorthand for generators and tests; panics on an out-of-range id.
pub fn reg(id: u8) -> Reg {
    Reg::new(id).expect("register id out of range")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemRef {
    pub addr: u64,
    pub size: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchInfo {
    pub taken: bool,
    pub target: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceInstruction {
    pub kind: InstrKind,
    pub pc: u64,
    pub dest: Option<Reg>,
    pub src1: Option<Reg>,
    pub src2: Option<Reg>,
    pub mem: Option<MemRef>,
    pub branch: Option<BranchInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("instruction {index}: memory operand present iff kind is Load/Store")]
    MemFieldMismatch { index: usize },
    #[error("instruction {index}: branch outcome present iff kind is CondBranch")]
    BranchFieldMismatch { index: usize },
    #[error("instruction {index}: access size {size} not in {{1,2,4,8}}")]
    BadMemSize { index: usize, size: u8 },
    #[error("instruction {index}: access wraps the address space")]
    AddressWrap { index: usize },
}

impl TraceInstruction {
    pub fn op(kind: InstrKind, pc: u64, dest: Option<Reg>, src1: Option<Reg>, src2: Option<Reg>) -> Self {
        debug_assert!(!kind.is_mem() && kind != InstrKind::CondBranch);
        Self {
            kind,
            pc,
            dest,
            src1,
            src2,
            mem: None,
            branch: None,
        }
    }

    pub fn int_alu(pc: u64, dest: Reg, src1: Option<Reg>, src2: Option<Reg>) -> Self {
        Self::op(InstrKind::IntAlu, pc, Some(dest), src1, src2)
    }

    pub fn load(pc: u64, dest: Reg, base: Option<Reg>, addr: u64, size: u8) -> Self {
        Self {
            kind: InstrKind::Load,
            pc,
            dest: Some(dest),
            src1: base,
            src2: None,
            mem: Some(MemRef { addr, size }),
            branch: None,
        }
    }

    pub fn store(pc: u64, base: Option<Reg>, data: Option<Reg>, addr: u64, size: u8) -> Self {
        Self {
            kind: InstrKind::Store,
            pc,
            dest: None,
            src1: base,
            src2: data,
            mem: Some(MemRef { addr, size }),
            branch: None,
        }
    }

    pub fn cond_branch(pc: u64, src1: Option<Reg>, src2: Option<Reg>, taken: bool, target: u64) -> Self {
        Self {
            kind: InstrKind::CondBranch,
            pc,
            dest: None,
            src1,
            src2,
            mem: None,
            branch: Some(BranchInfo { taken, target }),
        }
    }

    /// Address of the next instruction on the committed path.
    pub fn next_pc(&self) -> u64 {
        match self.branch {
            Some(BranchInfo { taken: true, target }) => target,
            _ => self.pc.wrapping_add(INSTR_BYTES),
        }
    }

    pub fn validate(&self, index: usize) -> Result<(), TraceError> {
        if self.kind.is_mem() != self.mem.is_some() {
            return Err(TraceError::MemFieldMismatch { index });
        }
        if (self.kind == InstrKind::CondBranch) != self.branch.is_some() {
            return Err(TraceError::BranchFieldMismatch { index });
        }
        if let Some(m) = self.mem {
            if !matches!(m.size, 1 | 2 | 4 | 8) {
                return Err(TraceError::BadMemSize { index, size: m.size });
            }
            if m.addr.checked_add(m.size as u64 - 1).is_none() {
                return Err(TraceError::AddressWrap { index });
            }
        }
        Ok(())
    }
}

/// Contiguous byte range, used to describe code and data footprints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub base: u64,
    pub len: u64,
}

impl Region {
    fn encode(regions: &[Region]) -> String {
        let parts: Vec<String> = regions.iter().map(|r| format!("{:#x}+{}", r.base, r.len)).collect();
        parts.join(",")
    }

    fn decode(s: &str) -> Vec<Region> {
        s.split(',')
            .filter_map(|part| {
                let (base, len) = part.trim().split_once('+')?;
                let base = u64::from_str_radix(base.trim().trim_start_matches("0x"), 16).ok()?;
                let len = len.trim().parse().ok()?;
                Some(Region { base, len })
            })
            .collect()
    }
}

pub const META_GENERATOR: &str = "generator";
pub const META_SEED: &str = "seed";
pub const META_PRNG: &str = "prng";
pub const META_CODE_REGIONS: &str = "code_regions";
pub const META_DATA_REGIONS: &str = "data_regions";

/// Sorted key/value metadata; serializes deterministically.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceMeta(BTreeMap<String, String>);

impl TraceMeta {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn generator(&self) -> Option<&str> {
        self.get(META_GENERATOR)
    }

    pub fn code_regions(&self) -> Vec<Region> {
        self.get(META_CODE_REGIONS).map(Region::decode).unwrap_or_default()
    }

    pub fn data_regions(&self) -> Vec<Region> {
        self.get(META_DATA_REGIONS).map(Region::decode).unwrap_or_default()
    }

    pub fn set_regions(&mut self, code: &[Region], data: &[Region]) {
        self.set(META_CODE_REGIONS, Region::encode(code));
        self.set(META_DATA_REGIONS, Region::encode(data));
    }

    /// `key=value` lines; keys and values must not contain newlines and keys not `=`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Inverse of [`TraceMeta::to_text`]; returns `None` on a line without `=`.
    pub fn from_text(text: &str) -> Option<Self> {
        let mut meta = TraceMeta::new();
        for line in text.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line.split_once('=')?;
            meta.0.insert(k.into(), v.into());
        }
        Some(meta)
    }
}

impl fmt::Display for TraceMeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// An immutable, validated instruction sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    instructions: Vec<TraceInstruction>,
    meta: TraceMeta,
}

impl Trace {
    pub fn new(instructions: Vec<TraceInstruction>, meta: TraceMeta) -> Result<Self, TraceError> {
        for (i, ins) in instructions.iter().enumerate() {
            ins.validate(i)?;
        }
        Ok(Self { instructions, meta })
    }

    /// Builds a trace with no metadata.
    pub fn from_instructions(instructions: Vec<TraceInstruction>) -> Result<Self, TraceError> {
        Self::new(instructions, TraceMeta::new())
    }

    pub fn instructions(&self) -> &[TraceInstruction] {
        &self.instructions
    }

    pub fn meta(&self) -> &TraceMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn mem_op_count(&self) -> usize {
        self.instructions.iter().filter(|i| i.kind.is_mem()).count()
    }

    /// Sub-trace over an instruction interval; metadata (and hence the
    /// cache warm-up footprint) is inherited from the parent.
    pub fn slice(&self, range: Range<usize>) -> Trace {
        Trace {
            instructions: self.instructions[range].to_vec(),
            meta: self.meta.clone(),
        }
    }

    /// Appends traces in order. Footprint regions are unioned in the same order.
    pub fn concat(parts: &[&Trace]) -> Trace {
        let mut instructions = Vec::with_capacity(parts.iter().map(|t| t.len()).sum());
        let mut code = Vec::new();
        let mut data = Vec::new();
        let mut names = Vec::new();
        for t in parts {
            instructions.extend_from_slice(&t.instructions);
            for r in t.meta.code_regions() {
                if !code.contains(&r) {
                    code.push(r);
                }
            }
            for r in t.meta.data_regions() {
                if !data.contains(&r) {
                    data.push(r);
                }
            }
            names.push(format!("{}:{}", t.meta.generator().unwrap_or("anon"), t.len()));
        }
        let mut meta = TraceMeta::new();
        meta.set(META_GENERATOR, "concat");
        meta.set("parts", names.join(","));
        meta.set_regions(&code, &data);
        Trace { instructions, meta }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn field_presence_is_validated() {
        let mut bad = TraceInstruction::int_alu(0, reg(1), None, None);
        bad.mem = Some(MemRef { addr: 0, size: 8 });
        assert_eq!(
            Trace::from_instructions(vec![bad]),
            Err(TraceError::MemFieldMismatch { index: 0 })
        );

        let mut bad = TraceInstruction::cond_branch(0, None, None, true, 8);
        bad.branch = None;
        assert!(matches!(
            Trace::from_instructions(vec![bad]),
            Err(TraceError::BranchFieldMismatch { index: 0 })
        ));

        let bad = TraceInstruction::load(0, reg(1), None, 0, 3);
        assert!(matches!(
            Trace::from_instructions(vec![bad]),
            Err(TraceError::BadMemSize { size: 3, .. })
        ));

        let bad = TraceInstruction::load(0, reg(1), None, u64::MAX - 3, 8);
        assert!(matches!(
            Trace::from_instructions(vec![bad]),
            Err(TraceError::AddressWrap { .. })
        ));
        // Ends exactly at the top of the address space: fine.
        let ok = TraceInstruction::load(0, reg(1), None, u64::MAX - 7, 8);
        assert!(Trace::from_instructions(vec![ok]).is_ok());
    }

    #[test]
    fn register_range() {
        assert!(Reg::new(63).is_some());
        assert!(Reg::new(64).is_none());
        assert!(reg(40).is_fp());
    }

    #[test]
    fn kind_codes_round_trip() {
        for k in InstrKind::ALL {
            assert_eq!(InstrKind::from_code(k.code()), Some(k));
        }
        assert_eq!(InstrKind::from_code(8), None);
    }

    #[test]
    fn meta_text_round_trip_and_regions() {
        let mut m = TraceMeta::new();
        m.set(META_SEED, 7);
        m.set_regions(
            &[Region { base: 0x1000, len: 128 }],
            &[
                Region {
                    base: 0x1000_0000,
                    len: 4096,
                },
                Region {
                    base: 0x2000_0000,
                    len: 64,
                },
            ],
        );
        let back = TraceMeta::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.code_regions(), [Region { base: 0x1000, len: 128 }]);
        assert_eq!(back.data_regions().len(), 2);
    }

    #[test]
    fn concat_and_slice_keep_footprints() {
        let a = gen_compute_bound(100, 4096, 0.1, 1).unwrap();
        let b = gen_branchy(50, 1.0, 2).unwrap();
        let c = Trace::concat(&[&a, &b]);
        assert_eq!(c.len(), 150);
        assert_eq!(&c.instructions()[100..], b.instructions());
        assert_eq!(c.meta().data_regions(), a.meta().data_regions());
        assert_eq!(c.meta().code_regions().len(), 2);
        let s = c.slice(100..150);
        assert_eq!(s.instructions(), b.instructions());
        assert_eq!(s.meta(), c.meta());
    }
}
