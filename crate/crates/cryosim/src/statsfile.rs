//! `.stats` records: one run per file, UTF-8 `key=value` lines.
//!
//! Keys, in the order written:
//!
//! ```text
//! format                      always "cryosim-stats-1"
//! config_id                   preset or configuration name
//! trace                       trace name (file stem)
//! sim_ticks core_period core_cycles committed_instructions committed_mem_ops
//! {l1i,l1d,l2,l3}.{demand_accesses,hits,misses,merged,demand_bytes,fill_bytes,writebacks}
//! memory.{reads,writes,bytes}
//! branches mispredictions squashed_mem_ops
//! peak.{fetch_queue,rob,iq,lsq,int_regs,fp_regs,l1d_issue}
//! ```
//!
//! Region records from a weighted sweep add `region.index`, `region.start`,
//! `region.end`, `region.weight` and `trace_instructions`.

use cryosim_core::analysis::RunStats;
use cryosim_core::memsys::LevelStats;
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const FORMAT: &str = "cryosim-stats-1";

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub index: usize,
    pub start: u64,
    pub end: u64,
    pub weight: f64,
    /// Length of the whole trace the region was cut from.
    pub trace_instructions: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsRecord {
    pub trace: String,
    pub stats: RunStats,
    pub region: Option<Region>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("missing key '{0}'")]
    Missing(String),
    #[error("key '{key}': bad value '{value}'")]
    BadValue { key: String, value: String },
    #[error("unsupported stats format '{0}'")]
    Format(String),
}

fn level_fields<'a>(prefix: &str, l: &'a mut LevelStats) -> Vec<(String, &'a mut u64)> {
    vec![
        (format!("{prefix}.demand_accesses"), &mut l.demand_accesses),
        (format!("{prefix}.hits"), &mut l.hits),
        (format!("{prefix}.misses"), &mut l.misses),
        (format!("{prefix}.merged"), &mut l.merged),
        (format!("{prefix}.demand_bytes"), &mut l.demand_bytes),
        (format!("{prefix}.fill_bytes"), &mut l.fill_bytes),
        (format!("{prefix}.writebacks"), &mut l.writebacks),
    ]
}

/// Every integer counter with its key, in file order.
fn counters(s: &mut RunStats) -> Vec<(String, &mut u64)> {
    let mut v: Vec<(String, &mut u64)> = vec![
        ("sim_ticks".into(), &mut s.sim_ticks),
        ("core_period".into(), &mut s.core_period),
        ("core_cycles".into(), &mut s.core_cycles),
        ("committed_instructions".into(), &mut s.committed_instructions),
        ("committed_mem_ops".into(), &mut s.committed_mem_ops),
    ];
    v.extend(level_fields("l1i", &mut s.l1i));
    v.extend(level_fields("l1d", &mut s.l1d));
    v.extend(level_fields("l2", &mut s.l2));
    v.extend(level_fields("l3", &mut s.l3));
    v.extend([
        ("memory.reads".into(), &mut s.memory.reads),
        ("memory.writes".into(), &mut s.memory.writes),
        ("memory.bytes".into(), &mut s.memory.bytes),
        ("branches".into(), &mut s.branches),
        ("mispredictions".into(), &mut s.mispredictions),
        ("squashed_mem_ops".into(), &mut s.squashed_mem_ops),
        ("peak.fetch_queue".into(), &mut s.peaks.fetch_queue),
        ("peak.rob".into(), &mut s.peaks.rob),
        ("peak.iq".into(), &mut s.peaks.iq),
        ("peak.lsq".into(), &mut s.peaks.lsq),
        ("peak.int_regs".into(), &mut s.peaks.int_regs),
        ("peak.fp_regs".into(), &mut s.peaks.fp_regs),
        ("peak.l1d_issue".into(), &mut s.peaks.l1d_issue),
    ]);
    v
}

pub fn to_text(rec: &StatsRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "format={FORMAT}");
    let _ = writeln!(out, "config_id={}", rec.stats.config_id);
    let _ = writeln!(out, "trace={}", rec.trace);
    let mut s = rec.stats.clone();
    for (k, v) in counters(&mut s) {
        let _ = writeln!(out, "{k}={v}");
    }
    if let Some(r) = &rec.region {
        let _ = writeln!(out, "region.index={}", r.index);
        let _ = writeln!(out, "region.start={}", r.start);
        let _ = writeln!(out, "region.end={}", r.end);
        let _ = writeln!(out, "region.weight={}", r.weight);
        let _ = writeln!(out, "trace_instructions={}", r.trace_instructions);
    }
    out
}

fn parse_num<T: std::str::FromStr>(map: &BTreeMap<&str, &str>, key: &str) -> Result<T, StatsError> {
    let v = map.get(key).ok_or_else(|| StatsError::Missing(key.into()))?;
    v.parse().map_err(|_| StatsError::BadValue {
        key: key.into(),
        value: (*v).into(),
    })
}

/// Unknown keys are ignored so newer writers stay readable.
pub fn from_text(text: &str) -> Result<StatsRecord, StatsError> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(StatsError::Syntax { line: n + 1 })?;
        map.insert(k.trim(), v.trim());
    }
    let format = map.get("format").ok_or_else(|| StatsError::Missing("format".into()))?;
    if *format != FORMAT {
        return Err(StatsError::Format((*format).into()));
    }
    let mut stats = RunStats {
        config_id: map
            .get("config_id")
            .ok_or_else(|| StatsError::Missing("config_id".into()))?
            .to_string(),
        ..Default::default()
    };
    for (k, slot) in counters(&mut stats) {
        *slot = parse_num(&map, &k)?;
    }
    let region = if map.contains_key("region.index") {
        Some(Region {
            index: parse_num(&map, "region.index")?,
            start: parse_num(&map, "region.start")?,
            end: parse_num(&map, "region.end")?,
            weight: parse_num(&map, "region.weight")?,
            trace_instructions: parse_num(&map, "trace_instructions")?,
        })
    } else {
        None
    };
    Ok(StatsRecord {
        trace: map.get("trace").unwrap_or(&"").to_string(),
        stats,
        region,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> StatsRecord {
        let mut s = RunStats {
            config_id: "SuperCryo".into(),
            ..Default::default()
        };
        for (i, (_, v)) in counters(&mut s).into_iter().enumerate() {
            *v = 1000 + i as u64;
        }
        StatsRecord {
            trace: "bt-like".into(),
            stats: s,
            region: None,
        }
    }

    #[test]
    fn round_trip() {
        let r = sample();
        assert_eq!(from_text(&to_text(&r)).unwrap(), r);
        let mut w = sample();
        w.region = Some(Region {
            index: 2,
            start: 100,
            end: 300,
            weight: 0.1 + 0.2,
            trace_instructions: 1000,
        });
        assert_eq!(from_text(&to_text(&w)).unwrap(), w);
    }

    #[test]
    fn key_set_is_stable() {
        let text = to_text(&sample());
        let keys: Vec<&str> = text.lines().map(|l| l.split_once('=').unwrap().0).collect();
        assert_eq!(keys.len(), 3 + 5 + 28 + 3 + 3 + 7);
        assert_eq!(&keys[..4], &["format", "config_id", "trace", "sim_ticks"]);
        assert!(keys.contains(&"l1d.demand_bytes") && keys.contains(&"peak.rob"));
    }

    #[test]
    fn errors() {
        assert_eq!(from_text("nonsense"), Err(StatsError::Syntax { line: 1 }));
        assert_eq!(from_text("format=other\n"), Err(StatsError::Format("other".into())));
        let text = to_text(&sample()).replace("l2.hits=", "l2.hitz=");
        assert_eq!(from_text(&text), Err(StatsError::Missing("l2.hits".into())));
    }
}
