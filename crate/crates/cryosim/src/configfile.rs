//! TOML configuration files: a base preset plus field overrides.
//!
//! ```toml
//! preset = "SuperCryo"        # base, defaults to CryoAll
//! name = "SuperCryo-wide"     # recorded as config_id, defaults to the preset name
//! cores = 1
//! warmup = "footprint"        # cold | footprint | trace
//!
//! [core]
//! width = 8
//! fetch_bytes_per_cycle = 32
//!
//! [l1d]
//! size = "64KB"
//! mshrs = 32
//! lookup = "parallel"
//!
//! [freqs]
//! l1 = "100GHz"
//!
//! [memory]
//! access_latency_ps = 45000
//! ```

use cryosim_core::config::{CacheConfig, CoreKind, LookupMode, Preset, SystemConfig, Warmup};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigFileError {
    #[error("{0}")]
    Parse(String),
    #[error("unknown preset '{0}' (valid: {list})", list = preset_list())]
    UnknownPreset(String),
    #[error("{field}: cannot read '{value}' as {what}")]
    BadValue {
        field: String,
        value: String,
        what: &'static str,
    },
}

pub fn preset_list() -> String {
    Preset::ALL.map(|p| p.name()).join(", ")
}

/// Parses a preset name, listing the valid ones on failure.
pub fn parse_preset(name: &str) -> Result<Preset, ConfigFileError> {
    Preset::parse(name).ok_or_else(|| ConfigFileError::UnknownPreset(name.into()))
}

/// An integer, or a string with a unit suffix.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Int(u64),
    Text(String),
}

/// Parses `"32KB"`, `"16 MiB"`, `"4096"`. KB/MB/GB are powers of 1024.
pub fn parse_bytes(s: &str) -> Option<u64> {
    let s = s.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let n: u64 = num.parse().ok()?;
    let mult = match unit.trim().to_ascii_uppercase().as_str() {
        "" | "B" => 1,
        "K" | "KB" | "KIB" => 1 << 10,
        "M" | "MB" | "MIB" => 1 << 20,
        "G" | "GB" | "GIB" => 1 << 30,
        _ => return None,
    };
    n.checked_mul(mult)
}

/// Parses `"4GHz"`, `"800 MHz"`, `"2000000000"`.
pub fn parse_hz(s: &str) -> Option<u64> {
    let s = s.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let n: u64 = num.parse().ok()?;
    let mult = match unit.trim().to_ascii_uppercase().as_str() {
        "" | "HZ" => 1,
        "KHZ" => 1_000,
        "MHZ" => 1_000_000,
        "GHZ" => 1_000_000_000,
        _ => return None,
    };
    n.checked_mul(mult)
}

impl Quantity {
    fn resolve(&self, field: &str, what: &'static str, parse: fn(&str) -> Option<u64>) -> Result<u64, ConfigFileError> {
        match self {
            Quantity::Int(v) => Ok(*v),
            Quantity::Text(s) => parse(s).ok_or_else(|| ConfigFileError::BadValue {
                field: field.into(),
                value: s.clone(),
                what,
            }),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub name: Option<String>,
    pub cores: Option<usize>,
    pub warmup: Option<String>,
    pub idle_skip: Option<bool>,
    #[serde(default)]
    pub core: CoreOverrides,
    #[serde(default)]
    pub l1i: CacheOverrides,
    #[serde(default)]
    pub l1d: CacheOverrides,
    #[serde(default)]
    pub l2: CacheOverrides,
    #[serde(default)]
    pub l3: CacheOverrides,
    #[serde(default)]
    pub memory: MemoryOverrides,
    #[serde(default)]
    pub freqs: FreqOverrides,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreOverrides {
    pub kind: Option<String>,
    pub fetch_queue: Option<usize>,
    pub rob: Option<usize>,
    pub iq: Option<usize>,
    pub lsq: Option<usize>,
    pub int_regs: Option<usize>,
    pub fp_regs: Option<usize>,
    pub cache_ports: Option<usize>,
    pub instr_bytes: Option<u64>,
    pub width: Option<usize>,
    pub fetch_bytes_per_cycle: Option<u64>,
    pub fetch_block_bytes: Option<u64>,
    pub ifetch_inflight: Option<usize>,
    pub decode_depth: Option<u64>,
    pub mispredict_penalty: Option<u64>,
    #[serde(default)]
    pub fu_latency: FuOverrides,
    #[serde(default)]
    pub bp: BpOverrides,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuOverrides {
    pub int_alu: Option<u32>,
    pub int_mul: Option<u32>,
    pub int_div: Option<u32>,
    pub float_op: Option<u32>,
    pub load: Option<u32>,
    pub store: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BpOverrides {
    pub btb_entries: Option<usize>,
    pub ras_entries: Option<usize>,
    pub predictor_bytes: Option<usize>,
    pub history_table_bytes: Option<usize>,
    pub indirect_entries: Option<usize>,
    pub counter_bits: Option<u8>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheOverrides {
    pub size: Option<Quantity>,
    pub assoc: Option<usize>,
    pub data_latency: Option<u64>,
    pub line_size: Option<u64>,
    pub mshrs: Option<usize>,
    pub lookup: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryOverrides {
    pub access_latency_ps: Option<u64>,
    pub peak_bandwidth: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqOverrides {
    pub core: Option<Quantity>,
    pub l1: Option<Quantity>,
    pub l2: Option<Quantity>,
    pub l3: Option<Quantity>,
    pub board: Option<Quantity>,
    pub memory: Option<Quantity>,
}

macro_rules! set {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

fn apply_cache(dst: &mut CacheConfig, o: &CacheOverrides, name: &str) -> Result<(), ConfigFileError> {
    if let Some(q) = &o.size {
        dst.size = q.resolve(&format!("{name}.size"), "a byte size", parse_bytes)?;
    }
    set!(dst.assoc, o.assoc);
    set!(dst.data_latency, o.data_latency);
    set!(dst.line_size, o.line_size);
    set!(dst.mshrs, o.mshrs);
    if let Some(l) = &o.lookup {
        dst.lookup = match l.as_str() {
            "serial" => LookupMode::Serial,
            "parallel" => LookupMode::Parallel,
            _ => {
                return Err(ConfigFileError::BadValue {
                    field: format!("{name}.lookup"),
                    value: l.clone(),
                    what: "serial or parallel",
                })
            }
        };
    }
    Ok(())
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigFileError> {
        toml::from_str(text).map_err(|e| ConfigFileError::Parse(e.to_string()))
    }

    /// Base preset named in the file, if any.
    pub fn preset(&self) -> Result<Option<Preset>, ConfigFileError> {
        self.preset.as_deref().map(parse_preset).transpose()
    }

    /// Applies every override to `cfg`. Validation is left to the simulator.
    pub fn apply(&self, cfg: &mut SystemConfig) -> Result<(), ConfigFileError> {
        if let Some(n) = &self.name {
            cfg.name = n.clone();
        }
        set!(cfg.cores, self.cores);
        set!(cfg.idle_skip, self.idle_skip);
        if let Some(w) = &self.warmup {
            cfg.warmup = Warmup::parse(w).ok_or_else(|| ConfigFileError::BadValue {
                field: "warmup".into(),
                value: w.clone(),
                what: "cold, footprint or trace",
            })?;
        }

        let c = &self.core;
        let core = &mut cfg.core;
        if let Some(k) = &c.kind {
            core.kind = match k.as_str() {
                "in-order" => CoreKind::InOrder,
                "out-of-order" => CoreKind::OutOfOrder,
                _ => {
                    return Err(ConfigFileError::BadValue {
                        field: "core.kind".into(),
                        value: k.clone(),
                        what: "in-order or out-of-order",
                    })
                }
            };
        }
        set!(core.fetch_queue, c.fetch_queue);
        set!(core.rob, c.rob);
        set!(core.iq, c.iq);
        set!(core.lsq, c.lsq);
        set!(core.int_regs, c.int_regs);
        set!(core.fp_regs, c.fp_regs);
        set!(core.cache_ports, c.cache_ports);
        set!(core.instr_bytes, c.instr_bytes);
        set!(core.width, c.width);
        set!(core.fetch_bytes_per_cycle, c.fetch_bytes_per_cycle);
        set!(core.fetch_block_bytes, c.fetch_block_bytes);
        set!(core.ifetch_inflight, c.ifetch_inflight);
        set!(core.decode_depth, c.decode_depth);
        set!(core.mispredict_penalty, c.mispredict_penalty);
        let fu = &mut core.fu_latency;
        set!(fu.int_alu, c.fu_latency.int_alu);
        set!(fu.int_mul, c.fu_latency.int_mul);
        set!(fu.int_div, c.fu_latency.int_div);
        set!(fu.float_op, c.fu_latency.float_op);
        set!(fu.load, c.fu_latency.load);
        set!(fu.store, c.fu_latency.store);
        let bp = &mut core.bp;
        set!(bp.btb_entries, c.bp.btb_entries);
        set!(bp.ras_entries, c.bp.ras_entries);
        set!(bp.predictor_bytes, c.bp.predictor_bytes);
        set!(bp.history_table_bytes, c.bp.history_table_bytes);
        set!(bp.indirect_entries, c.bp.indirect_entries);
        set!(bp.counter_bits, c.bp.counter_bits);

        apply_cache(&mut cfg.l1i, &self.l1i, "l1i")?;
        apply_cache(&mut cfg.l1d, &self.l1d, "l1d")?;
        apply_cache(&mut cfg.l2, &self.l2, "l2")?;
        apply_cache(&mut cfg.l3, &self.l3, "l3")?;
        set!(cfg.mem.access_latency, self.memory.access_latency_ps);
        set!(cfg.mem.peak_bandwidth, self.memory.peak_bandwidth);

        let f = &self.freqs;
        let fr = &mut cfg.freqs;
        for (slot, q, field) in [
            (&mut fr.core, &f.core, "freqs.core"),
            (&mut fr.l1, &f.l1, "freqs.l1"),
            (&mut fr.l2, &f.l2, "freqs.l2"),
            (&mut fr.l3, &f.l3, "freqs.l3"),
            (&mut fr.board, &f.board, "freqs.board"),
            (&mut fr.memory, &f.memory, "freqs.memory"),
        ] {
            if let Some(q) = q {
                *slot = q.resolve(field, "a frequency", parse_hz)?;
            }
        }
        Ok(())
    }

    /// The configuration this file describes: its preset (or `fallback`)
    /// with overrides applied.
    pub fn build(&self, fallback: Preset) -> Result<SystemConfig, ConfigFileError> {
        let mut cfg = self.preset()?.unwrap_or(fallback).config();
        self.apply(&mut cfg)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cryosim_core::config::{GHZ, KB};

    #[test]
    fn empty_file_is_the_preset() {
        let f = ConfigFile::parse("").unwrap();
        assert_eq!(f.build(Preset::SuperAll).unwrap(), Preset::SuperAll.config());
    }

    #[test]
    fn overrides_apply() {
        let f = ConfigFile::parse(
            r#"
preset = "SuperCryo"
name = "wide"
warmup = "cold"
[core]
width = 8
[core.bp]
counter_bits = 2
[l1d]
size = "64KB"
lookup = "parallel"
[freqs]
l1 = "100GHz"
l2 = 4000000000
"#,
        )
        .unwrap();
        let c = f.build(Preset::CryoAll).unwrap();
        assert_eq!(c.name, "wide");
        assert_eq!(c.core.width, 8);
        assert_eq!(c.core.bp.counter_bits, 2);
        assert_eq!(c.l1d.size, 64 * KB);
        assert_eq!(c.l1d.lookup, LookupMode::Parallel);
        assert_eq!(c.freqs.l1, 100 * GHZ);
        assert_eq!(c.freqs.l2, 4 * GHZ);
        assert_eq!(c.freqs.core, 100 * GHZ);
        assert_eq!(c.warmup, Warmup::Cold);
    }

    #[test]
    fn typos_and_bad_values_are_errors() {
        assert!(matches!(
            ConfigFile::parse("[core]\nwdth = 3"),
            Err(ConfigFileError::Parse(_))
        ));
        let f = ConfigFile::parse("preset = \"Warm\"").unwrap();
        let e = f.build(Preset::CryoAll).unwrap_err();
        assert!(e.to_string().contains("InOrder-SuperAll"));
        let f = ConfigFile::parse("[l2]\nsize = \"lots\"").unwrap();
        assert!(matches!(
            f.build(Preset::CryoAll),
            Err(ConfigFileError::BadValue { .. })
        ));
    }

    #[test]
    fn unit_parsing() {
        assert_eq!(parse_bytes("32KB"), Some(32 * 1024));
        assert_eq!(parse_bytes("64 MB"), Some(64 << 20));
        assert_eq!(parse_bytes("1MiB"), Some(1 << 20));
        assert_eq!(parse_bytes("4096"), Some(4096));
        assert_eq!(parse_bytes("3 parsecs"), None);
        assert_eq!(parse_hz("800MHz"), Some(800_000_000));
        assert_eq!(parse_hz("4 GHz"), Some(4_000_000_000));
    }
}
