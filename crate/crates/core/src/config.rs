//! System parameterization: core, caches, memory, clock domains and the six
//! named presets.

use crate::kernel::{ClockDomain, Hz, KernelError, Tick};
use crate::trace::InstrKind;
use alloc::format;
use alloc::string::String;
use core::fmt;

pub const GHZ: Hz = 1_000_000_000;
pub const MHZ: Hz = 1_000_000;
pub const KB: u64 = 1024;
pub const MB: u64 = 1024 * 1024;

/// Cryogenic CMOS clock.
pub const CRYO_HZ: Hz = 4 * GHZ;
/// Superconducting clock.
pub const SUPER_HZ: Hz = 100 * GHZ;
/// Room-temperature board clock.
pub const BOARD_HZ: Hz = 2 * GHZ;
/// DDR3-1600 memory controller clock.
pub const MEMORY_HZ: Hz = 800 * MHZ;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Clock(#[from] KernelError),
}

fn invalid(msg: String) -> ConfigError {
    ConfigError::Invalid(msg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoreKind {
    InOrder,
    OutOfOrder,
}

/// Functional-unit latencies in core cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuLatency {
    pub int_alu: u32,
    pub int_mul: u32,
    pub int_div: u32,
    pub float_op: u32,
    pub load: u32,
    pub store: u32,
}

impl Default for FuLatency {
    fn default() -> Self {
        Self {
            int_alu: 1,
            int_mul: 3,
            int_div: 6,
            float_op: 1,
            load: 2,
            store: 2,
        }
    }
}

impl FuLatency {
    /// Branches and nops execute on the integer ALU.
    pub fn of(&self, kind: InstrKind) -> u32 {
        match kind {
            InstrKind::IntAlu | InstrKind::CondBranch | InstrKind::Nop => self.int_alu,
            InstrKind::IntMul => self.int_mul,
            InstrKind::IntDiv => self.int_div,
            InstrKind::FloatOp => self.float_op,
            InstrKind::Load => self.load,
            InstrKind::Store => self.store,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BpConfig {
    pub btb_entries: usize,
    pub ras_entries: usize,
    pub predictor_bytes: usize,
    pub history_table_bytes: usize,
    pub indirect_entries: usize,
    pub counter_bits: u8,
}

impl Default for BpConfig {
    fn default() -> Self {
        Self {
            btb_entries: 32,
            ras_entries: 12,
            predictor_bytes: 16 * 1024,
            history_table_bytes: 4 * 1024,
            indirect_entries: 16,
            counter_bits: 4,
        }
    }
}

impl BpConfig {
    /// Saturating counters in the direction table.
    pub fn table_entries(&self) -> usize {
        self.predictor_bytes * 8 / self.counter_bits as usize
    }

    /// Global history length in bits: log2 of the history table's counter capacity.
    pub fn history_bits(&self) -> u32 {
        let entries = (self.history_table_bytes * 8 / self.counter_bits as usize).max(1);
        entries.ilog2().min(63)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=8).contains(&self.counter_bits) {
            return Err(invalid(format!("counter_bits {} not in 1..=8", self.counter_bits)));
        }
        for (name, v) in [
            ("btb_entries", self.btb_entries),
            ("ras_entries", self.ras_entries),
            ("predictor_bytes", self.predictor_bytes),
            ("history_table_bytes", self.history_table_bytes),
            ("indirect_entries", self.indirect_entries),
        ] {
            if v == 0 {
                return Err(invalid(format!("bp.{name} must be at least 1")));
            }
        }
        if !self.table_entries().is_power_of_two() {
            return Err(invalid(format!(
                "predictor table of {} entries is not a power of two",
                self.table_entries()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoreConfig {
    pub kind: CoreKind,
    pub fetch_queue: usize,
    pub rob: usize,
    pub iq: usize,
    pub lsq: usize,
    pub int_regs: usize,
    pub fp_regs: usize,
    pub cache_ports: usize,
    pub instr_bytes: u64,
    pub width: usize,
    /// Bytes fetched per cycle; defaults to `width * instr_bytes`.
    pub fetch_bytes_per_cycle: u64,
    /// Aligned block fetched from the L1I per request.
    pub fetch_block_bytes: u64,
    /// Outstanding L1I block requests the fetch unit may have.
    pub ifetch_inflight: usize,
    /// Out-of-order only: cycles between leaving the fetch queue and dispatch.
    pub decode_depth: u64,
    pub fu_latency: FuLatency,
    pub bp: BpConfig,
    /// In-order: cycles lost per mispredict (at least the F1..D2 depth of 4).
    /// Out-of-order: extra redirect cycles on top of the resolve-to-fetch loop.
    pub mispredict_penalty: u64,
}

impl CoreConfig {
    pub fn out_of_order() -> Self {
        Self {
            kind: CoreKind::OutOfOrder,
            fetch_queue: 24,
            rob: 96,
            iq: 72,
            lsq: 24,
            int_regs: 180,
            fp_regs: 168,
            cache_ports: 1,
            instr_bytes: 4,
            width: 4,
            fetch_bytes_per_cycle: 16,
            fetch_block_bytes: 64,
            ifetch_inflight: 1,
            decode_depth: 2,
            fu_latency: FuLatency::default(),
            bp: BpConfig::default(),
            mispredict_penalty: 0,
        }
    }

    pub fn in_order() -> Self {
        Self {
            kind: CoreKind::InOrder,
            width: 1,
            fetch_bytes_per_cycle: 4,
            mispredict_penalty: 4,
            ..Self::out_of_order()
        }
    }

    /// Instructions per fetch group.
    pub fn fetch_group(&self) -> usize {
        ((self.fetch_bytes_per_cycle / self.instr_bytes) as usize).clamp(1, self.width)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("fetch_queue", self.fetch_queue),
            ("rob", self.rob),
            ("iq", self.iq),
            ("lsq", self.lsq),
            ("cache_ports", self.cache_ports),
            ("width", self.width),
            ("ifetch_inflight", self.ifetch_inflight),
        ] {
            if v == 0 {
                return Err(invalid(format!("core.{name} must be at least 1")));
            }
        }
        // 32 integer and 32 floating point architectural mappings are always live.
        if self.int_regs <= 32 || self.fp_regs <= 32 {
            return Err(invalid("core physical register files must exceed 32 entries".into()));
        }
        if self.instr_bytes == 0 || self.fetch_bytes_per_cycle < self.instr_bytes {
            return Err(invalid("core.fetch_bytes_per_cycle must hold one instruction".into()));
        }
        if !self.fetch_block_bytes.is_power_of_two() || self.fetch_block_bytes < self.instr_bytes {
            return Err(invalid("core.fetch_block_bytes must be a power of two".into()));
        }
        self.bp.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LookupMode {
    /// Tag check and data access are serial: a miss pays the full latency before forwarding.
    Serial,
    /// A miss is detected after one cycle.
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheConfig {
    pub size: u64,
    pub assoc: usize,
    /// In cycles of the cache's own clock domain.
    pub data_latency: u64,
    pub line_size: u64,
    pub mshrs: usize,
    pub lookup: LookupMode,
}

impl CacheConfig {
    pub fn new(size: u64, assoc: usize, data_latency: u64) -> Self {
        Self {
            size,
            assoc,
            data_latency,
            line_size: 64,
            mshrs: 16,
            lookup: LookupMode::Serial,
        }
    }

    pub fn l1d() -> Self {
        Self::new(32 * KB, 8, 2)
    }

    pub fn l1i() -> Self {
        Self::new(32 * KB, 8, 2)
    }

    pub fn l2() -> Self {
        Self::new(512 * KB, 8, 8)
    }

    pub fn l3() -> Self {
        Self::new(16 * MB, 16, 21)
    }

    pub fn sets(&self) -> u64 {
        self.size / (self.assoc as u64 * self.line_size)
    }

    pub fn validate(&self, name: &str) -> Result<(), ConfigError> {
        if self.assoc == 0 || self.line_size == 0 || !self.line_size.is_power_of_two() {
            return Err(invalid(format!(
                "{name}: associativity and a power-of-two line size are required"
            )));
        }
        let way_bytes = self.assoc as u64 * self.line_size;
        if self.size == 0 || !self.size.is_multiple_of(way_bytes) {
            return Err(invalid(format!(
                "{name}: size {} is not a multiple of associativity x line size ({way_bytes})",
                self.size
            )));
        }
        if !self.sets().is_power_of_two() {
            return Err(invalid(format!(
                "{name}: set count {} is not a power of two",
                self.sets()
            )));
        }
        if self.data_latency == 0 {
            return Err(invalid(format!("{name}: data_latency must be at least 1")));
        }
        if self.mshrs == 0 {
            return Err(invalid(format!("{name}: mshrs must be at least 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemConfig {
    pub access_latency: Tick,
    /// Bytes per second.
    pub peak_bandwidth: u64,
}

impl Default for MemConfig {
    /// Single-channel DDR3-1600 x64: 1600 MT/s x 8 B, 30 ns closed-page access.
    fn default() -> Self {
        Self {
            access_latency: 30_000,
            peak_bandwidth: 12_800_000_000,
        }
    }
}

impl MemConfig {
    /// Ticks between successive transfers of `bytes`, rounded up.
    pub fn transfer_spacing(&self, bytes: u64) -> Tick {
        let num = bytes as u128 * crate::kernel::TICKS_PER_SECOND as u128;
        num.div_ceil(self.peak_bandwidth as u128) as Tick
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.access_latency == 0 || self.peak_bandwidth == 0 {
            return Err(invalid("memory latency and bandwidth must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DomainFreqs {
    pub core: Hz,
    pub l1: Hz,
    pub l2: Hz,
    pub l3: Hz,
    pub board: Hz,
    pub memory: Hz,
}

impl DomainFreqs {
    pub fn uniform(core: Hz, caches: Hz) -> Self {
        Self {
            core,
            l1: caches,
            l2: caches,
            l3: caches,
            board: BOARD_HZ,
            memory: MEMORY_HZ,
        }
    }
}

/// Clock domains of one simulated board.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domains {
    pub core: ClockDomain,
    pub l1: ClockDomain,
    pub l2: ClockDomain,
    pub l3: ClockDomain,
    pub board: ClockDomain,
    pub memory: ClockDomain,
}

impl Domains {
    pub fn new(f: &DomainFreqs) -> Result<Self, KernelError> {
        Ok(Self {
            core: ClockDomain::new("core", f.core)?,
            l1: ClockDomain::new("l1", f.l1)?,
            l2: ClockDomain::new("l2", f.l2)?,
            l3: ClockDomain::new("l3", f.l3)?,
            board: ClockDomain::new("board", f.board)?,
            memory: ClockDomain::new("memory", f.memory)?,
        })
    }
}

/// How caches are populated before the timed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Warmup {
    /// Start with empty caches.
    Cold,
    /// Stream the trace's declared code and data footprints through the
    /// hierarchy, falling back to [`Warmup::TracePass`] when none are declared.
    Footprint,
    /// Replay every fetch and data access of the trace once, untimed.
    TracePass,
}

impl Warmup {
    pub fn name(self) -> &'static str {
        match self {
            Warmup::Cold => "cold",
            Warmup::Footprint => "footprint",
            Warmup::TracePass => "trace",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Warmup::Cold, Warmup::Footprint, Warmup::TracePass]
            .into_iter()
            .find(|w| w.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preset {
    CryoAll,
    SuperCryo,
    SuperAll,
    InOrderCryoAll,
    InOrderSuperCryo,
    InOrderSuperAll,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::CryoAll,
        Preset::SuperCryo,
        Preset::SuperAll,
        Preset::InOrderCryoAll,
        Preset::InOrderSuperCryo,
        Preset::InOrderSuperAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::CryoAll => "CryoAll",
            Preset::SuperCryo => "SuperCryo",
            Preset::SuperAll => "SuperAll",
            Preset::InOrderCryoAll => "InOrder-CryoAll",
            Preset::InOrderSuperCryo => "InOrder-SuperCryo",
            Preset::InOrderSuperAll => "InOrder-SuperAll",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(s))
    }

    pub fn core_kind(self) -> CoreKind {
        match self {
            Preset::CryoAll | Preset::SuperCryo | Preset::SuperAll => CoreKind::OutOfOrder,
            _ => CoreKind::InOrder,
        }
    }

    /// `(core, caches)` frequencies.
    pub fn frequencies(self) -> (Hz, Hz) {
        match self {
            Preset::CryoAll | Preset::InOrderCryoAll => (CRYO_HZ, CRYO_HZ),
            Preset::SuperCryo | Preset::InOrderSuperCryo => (SUPER_HZ, CRYO_HZ),
            Preset::SuperAll | Preset::InOrderSuperAll => (SUPER_HZ, SUPER_HZ),
        }
    }

    pub fn config(self) -> SystemConfig {
        let core = match self.core_kind() {
            CoreKind::OutOfOrder => CoreConfig::out_of_order(),
            CoreKind::InOrder => CoreConfig::in_order(),
        };
        let (core_hz, cache_hz) = self.frequencies();
        SystemConfig {
            name: self.name().into(),
            core,
            l1i: CacheConfig::l1i(),
            l1d: CacheConfig::l1d(),
            l2: CacheConfig::l2(),
            l3: CacheConfig::l3(),
            mem: MemConfig::default(),
            freqs: DomainFreqs::uniform(core_hz, cache_hz),
            cores: 1,
            warmup: Warmup::Footprint,
            idle_skip: true,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemConfig {
    /// Recorded as `config_id` in run statistics.
    pub name: String,
    pub core: CoreConfig,
    pub l1i: CacheConfig,
    pub l1d: CacheConfig,
    pub l2: CacheConfig,
    pub l3: CacheConfig,
    pub mem: MemConfig,
    pub freqs: DomainFreqs,
    pub cores: usize,
    pub warmup: Warmup,
    /// Jump over cycles in which no core state can change. Results are
    /// identical either way; disabling only costs time.
    pub idle_skip: bool,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<Domains, ConfigError> {
        self.core.validate()?;
        self.l1i.validate("l1i")?;
        self.l1d.validate("l1d")?;
        self.l2.validate("l2")?;
        self.l3.validate("l3")?;
        self.mem.validate()?;
        if !(1..=2).contains(&self.cores) {
            return Err(invalid(format!("cores must be 1 or 2, got {}", self.cores)));
        }
        if self.core.fetch_block_bytes > self.l1i.line_size {
            return Err(invalid("core.fetch_block_bytes exceeds the L1I line".into()));
        }
        Ok(Domains::new(&self.freqs)?)
    }
}
