//! `report.csv` and grouped bar charts from a directory of `.stats` files.
//!
//! Full-run records map to one row each. Region records (`region.*` keys)
//! for the same trace and configuration are combined into one estimated
//! row. Every numeric column is a pure function of the stored counters.

use crate::error::{write_atomic, CliError};
use crate::statsfile::{self, StatsRecord};
use cryosim_core::analysis::{simpoint_combine, AnalysisError, Metrics, RegionWeight};
use cryosim_core::config::Preset;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const CSV_NAME: &str = "report.csv";

pub const COLUMNS: [&str; 11] = [
    "trace",
    "preset",
    "sim_ticks",
    "speedup_vs_baseline",
    "ipc",
    "l3_mpki",
    "l1d_demand_bw_gbps",
    "l1i_bw",
    "l2_bw",
    "l3_bw",
    "mem_bw",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub trace: String,
    pub preset: String,
    /// Simulated ticks; for region estimates, the rounded estimate.
    pub sim_ticks: u64,
    pub speedup: f64,
    pub metrics: Metrics,
}

/// One (trace, configuration) cell before speedups are known.
struct Cell {
    instructions: u64,
    ticks: f64,
    metrics: Metrics,
}

fn order_key(preset: &str) -> (usize, &str) {
    let idx = Preset::ALL
        .iter()
        .position(|p| p.name() == preset)
        .unwrap_or(Preset::ALL.len());
    (idx, preset)
}

/// Reads every `*.stats` file in `dir`, in file-name order.
pub fn load_dir(dir: &Path) -> Result<Vec<StatsRecord>, CliError> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "stats"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            statsfile::from_text(&text).map_err(|e| CliError::BadInput {
                path: p.display().to_string(),
                msg: e.to_string(),
            })
        })
        .collect()
}

fn analysis_err(trace: &str, preset: &str, e: AnalysisError) -> CliError {
    CliError::BadInput {
        path: format!("{trace}/{preset}"),
        msg: e.to_string(),
    }
}

fn cell(trace: &str, preset: &str, recs: &[&StatsRecord]) -> Result<Cell, CliError> {
    let regions: Vec<_> = recs
        .iter()
        .filter_map(|r| r.region.as_ref().map(|g| (g, &r.stats)))
        .collect();
    if regions.is_empty() {
        if recs.len() != 1 {
            return Err(CliError::BadInput {
                path: format!("{trace}/{preset}"),
                msg: format!("{} full-run records for one cell", recs.len()),
            });
        }
        let s = &recs[0].stats;
        return Ok(Cell {
            instructions: s.committed_instructions,
            ticks: s.sim_ticks as f64,
            metrics: Metrics::of(s).map_err(|e| analysis_err(trace, preset, e))?,
        });
    }
    if regions.len() != recs.len() {
        return Err(CliError::BadInput {
            path: format!("{trace}/{preset}"),
            msg: "full-run and region records mixed in one cell".into(),
        });
    }
    let total = regions[0].0.trace_instructions;
    let weights: Vec<RegionWeight> = regions
        .iter()
        .map(|(g, s)| RegionWeight {
            weight: g.weight,
            stats: (*s).clone(),
        })
        .collect();
    let agg = simpoint_combine(&weights, total).map_err(|e| analysis_err(trace, preset, e))?;
    Ok(Cell {
        instructions: total,
        ticks: agg.est_ticks,
        metrics: agg.rates,
    })
}

/// Groups records into rows, sorted by trace then preset order.
pub fn build_rows(records: &[StatsRecord], baseline: &str) -> Result<Vec<Row>, CliError> {
    let mut groups: BTreeMap<&str, BTreeMap<&str, Vec<&StatsRecord>>> = BTreeMap::new();
    for r in records {
        groups
            .entry(r.trace.as_str())
            .or_default()
            .entry(r.stats.config_id.as_str())
            .or_default()
            .push(r);
    }
    if groups.is_empty() {
        return Err(CliError::Usage("no .stats files found".into()));
    }
    let mut rows = Vec::new();
    for (trace, by_preset) in &groups {
        let cells = by_preset
            .iter()
            .map(|(p, recs)| cell(trace, p, recs).map(|c| (*p, c)))
            .collect::<Result<Vec<_>, _>>()?;
        let base = cells
            .iter()
            .find(|(p, _)| *p == baseline)
            .map(|(_, c)| c)
            .ok_or_else(|| CliError::Usage(format!("baseline '{baseline}' has no stats for trace '{trace}'")))?;
        let mut trace_rows = Vec::new();
        for (preset, c) in &cells {
            if c.instructions != base.instructions {
                return Err(analysis_err(
                    trace,
                    preset,
                    AnalysisError::MismatchedRuns {
                        baseline: base.instructions,
                        test: c.instructions,
                    },
                ));
            }
            trace_rows.push(Row {
                trace: trace.to_string(),
                preset: preset.to_string(),
                sim_ticks: c.ticks.round() as u64,
                speedup: base.ticks / c.ticks,
                metrics: c.metrics,
            });
        }
        trace_rows.sort_by(|a, b| order_key(&a.preset).cmp(&order_key(&b.preset)));
        rows.extend(trace_rows);
    }
    Ok(rows)
}

const GB: f64 = 1e9;

/// Formats a float the way the CSV stores it.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory write");
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.trace.clone(),
            r.preset.clone(),
            r.sim_ticks.to_string(),
            fmt_f(r.speedup),
            fmt_f(m.ipc),
            fmt_f(m.l3_mpki),
            fmt_f(m.l1d_bw / GB),
            fmt_f(m.l1i_bw / GB),
            fmt_f(m.l2_bw / GB),
            fmt_f(m.l3_bw / GB),
            fmt_f(m.mem_bw / GB),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of utf-8 fields")
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

const PALETTE: [&str; 7] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1",
];

/// Grouped bar chart: one `<g class="trace">` per trace, one bar per preset.
pub fn svg_chart(title: &str, unit: &str, rows: &[Row], value: fn(&Row) -> f64) -> String {
    let mut traces: Vec<&str> = Vec::new();
    let mut presets: Vec<&str> = Vec::new();
    for r in rows {
        if !traces.contains(&r.trace.as_str()) {
            traces.push(&r.trace);
        }
        if !presets.contains(&r.preset.as_str()) {
            presets.push(&r.preset);
        }
    }
    presets.sort_by_key(|p| order_key(p));

    let (bar, gap, left, top, plot_h) = (18.0, 24.0, 70.0, 40.0, 260.0);
    let group_w = bar * presets.len() as f64 + gap;
    let width = left + group_w * traces.len() as f64 + 180.0;
    let height = top + plot_h + 70.0;
    let max = rows.iter().map(value).fold(0.0f64, f64::max);
    let scale = if max > 0.0 { plot_h / max } else { 0.0 };
    let base_y = top + plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{base_y}" x2="{:.1}" y2="{base_y}" stroke="black"/>"#,
        width - 170.0
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{base_y}" stroke="black"/>"#
    );
    for k in 0..=4 {
        let v = max * k as f64 / 4.0;
        let y = base_y - v * scale;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{y:.1}" text-anchor="end">{}</text>"#,
            left - 4.0,
            escape(&format!("{v:.2}"))
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="12" y="{:.1}" transform="rotate(-90 12 {:.1})">{}</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        escape(unit)
    );
    for (ti, trace) in traces.iter().enumerate() {
        let x0 = left + gap / 2.0 + group_w * ti as f64;
        let _ = writeln!(s, r#"<g class="trace" data-trace="{}">"#, escape(trace));
        for (pi, preset) in presets.iter().enumerate() {
            if let Some(r) = rows.iter().find(|r| r.trace == *trace && r.preset == *preset) {
                let v = value(r);
                let h = v * scale;
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{:.1}" width="{bar}" height="{h:.1}" fill="{}"><title>{}</title></rect>"#,
                    x0 + bar * pi as f64,
                    base_y - h,
                    PALETTE[pi.min(PALETTE.len() - 1)],
                    escape(&format!("{preset}: {v:.3}"))
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x0 + bar * presets.len() as f64 / 2.0,
            base_y + 16.0,
            escape(trace)
        );
        let _ = writeln!(s, "</g>");
    }
    let lx = width - 160.0;
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (pi, preset) in presets.iter().enumerate() {
        let y = top + 16.0 * pi as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{y:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            PALETTE[pi.min(PALETTE.len() - 1)],
            lx + 14.0,
            y + 9.0,
            escape(preset)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

/// A chart written next to the CSV: (file name, title, unit, value).
pub type Chart = (&'static str, &'static str, &'static str, fn(&Row) -> f64);

pub const CHARTS: [Chart; 3] = [
    ("speedup.svg", "Speedup over baseline", "speedup", |r| r.speedup),
    ("l3_mpki.svg", "L3 misses per kilo-instruction", "MPKI", |r| {
        r.metrics.l3_mpki
    }),
    ("l1d_bw.svg", "L1D demand bandwidth", "GB/s", |r| r.metrics.l1d_bw / GB),
];

/// Builds the report from `stats_dir` and writes the CSV and charts into `out_dir`.
pub fn write_report(stats_dir: &Path, baseline: &str, out_dir: &Path) -> Result<Vec<Row>, CliError> {
    let records = load_dir(stats_dir)?;
    let rows = build_rows(&records, baseline)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    write_atomic(&out_dir.join(CSV_NAME), to_csv(&rows).as_bytes())?;
    for (name, title, unit, value) in CHARTS {
        write_atomic(&out_dir.join(name), svg_chart(title, unit, &rows, value).as_bytes())?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statsfile::Region;
    use cryosim_core::analysis::RunStats;

    fn rec(trace: &str, preset: &str, cycles: u64, period: u64) -> StatsRecord {
        let mut s = RunStats {
            config_id: preset.into(),
            core_period: period,
            core_cycles: cycles,
            sim_ticks: cycles * period,
            committed_instructions: 1000,
            ..Default::default()
        };
        s.l3.misses = 7;
        s.l1d.demand_bytes = 8000;
        StatsRecord {
            trace: trace.into(),
            stats: s,
            region: None,
        }
    }

    #[test]
    fn baseline_rows_have_unit_speedup() {
        let recs = vec![
            rec("b", "SuperAll", 1000, 10),
            rec("a", "CryoAll", 1000, 250),
            rec("a", "SuperAll", 1200, 10),
            rec("b", "CryoAll", 2000, 250),
        ];
        let rows = build_rows(&recs, "CryoAll").unwrap();
        let keys: Vec<_> = rows.iter().map(|r| (r.trace.as_str(), r.preset.as_str())).collect();
        assert_eq!(
            keys,
            [("a", "CryoAll"), ("a", "SuperAll"), ("b", "CryoAll"), ("b", "SuperAll")]
        );
        assert_eq!(rows[0].speedup, 1.0);
        assert_eq!(rows[3].speedup, 50.0);
        assert_eq!(rows[1].metrics.l3_mpki, 7.0);
    }

    #[test]
    fn missing_baseline_is_a_usage_error() {
        let e = build_rows(&[rec("a", "SuperAll", 10, 10)], "CryoAll").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn regions_are_combined() {
        let mut recs = Vec::new();
        for (preset, period) in [("CryoAll", 250), ("SuperAll", 10)] {
            for (k, (w, cycles)) in [(0.25, 1000), (0.75, 2000)].into_iter().enumerate() {
                let mut r = rec("t", preset, cycles, period);
                r.region = Some(Region {
                    index: k,
                    start: 0,
                    end: 1000,
                    weight: w,
                    trace_instructions: 4000,
                });
                recs.push(r);
            }
        }
        let rows = build_rows(&recs, "CryoAll").unwrap();
        assert_eq!(rows.len(), 2);
        // cpi = 0.25 * 1 + 0.75 * 2 = 1.75
        assert_eq!(rows[0].sim_ticks, 1750 * 4 * 250);
        assert!((rows[1].speedup - 25.0).abs() < 1e-12);
    }

    #[test]
    fn csv_shape_and_svg_escaping() {
        let recs = vec![rec("x<&>", "CryoAll", 100, 250)];
        let rows = build_rows(&recs, "CryoAll").unwrap();
        let csv = to_csv(&rows);
        assert!(csv.starts_with(&COLUMNS.join(",")));
        assert_eq!(csv.lines().count(), 2);
        let svg = svg_chart("t", "u", &rows, |r| r.speedup);
        assert!(svg.contains("x&lt;&amp;&gt;"));
        assert_eq!(svg.matches(r#"<g class="trace""#).count(), 1);
    }
}
