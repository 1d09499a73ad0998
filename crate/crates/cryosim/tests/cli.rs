use cryosim::report::{fmt_f, COLUMNS};
use cryosim::statsfile;
use cryosim_core::analysis::Metrics;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cryosim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cryosim")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let out = dir.join(format!("{name}.ctrc"));
    let mut a = vec!["gen"];
    a.extend_from_slice(args);
    a.extend_from_slice(&["-o", p(&out)]);
    let o = cryosim(&a);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn gen_writes_the_requested_records() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "compute-bound",
        "--n",
        "100000",
        "--footprint",
        "16384",
        "--mem-ratio",
        "0.1",
        "--seed",
        "7",
    ];
    let a = gen(dir.path(), "a", &args);
    let b = gen(dir.path(), "b", &args);
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    assert_eq!(count, 100_000);
    let meta_len = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    assert_eq!(bytes.len(), 20 + meta_len + 100_000 * 32);
}

#[test]
fn gen_echoes_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.ctrc");
    let o = cryosim(&[
        "gen",
        "branchy",
        "--n",
        "500",
        "--predictability",
        "0.75",
        "--seed",
        "3",
        "-o",
        p(&out),
    ]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("500 instructions"), "{text}");
    assert!(
        text.contains("predictability=0.75") && text.contains("seed=3"),
        "{text}"
    );
}

#[test]
fn gen_rejects_small_memory_footprints() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.ctrc");
    let o = cryosim(&["gen", "memory-bound", "--footprint", "1MB", "-o", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("16 MB"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn usage_and_io_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cryosim(&["frobnicate"])), 2);
    assert_eq!(code(&cryosim(&["gen", "nope", "-o", "x"])), 2);
    let missing = dir.path().join("missing.ctrc");
    let out = dir.path().join("o.stats");
    assert_eq!(
        code(&cryosim(&[
            "run",
            "--preset",
            "CryoAll",
            "--trace",
            p(&missing),
            "-o",
            p(&out)
        ])),
        3
    );
    let junk = dir.path().join("junk.ctrc");
    fs::write(&junk, b"not a trace at all").unwrap();
    assert_eq!(
        code(&cryosim(&[
            "run",
            "--preset",
            "CryoAll",
            "--trace",
            p(&junk),
            "-o",
            p(&out)
        ])),
        3
    );
    let unwritable = dir.path().join("no/such/dir/t.ctrc");
    assert_eq!(
        code(&cryosim(&["gen", "branchy", "--n", "10", "-o", p(&unwritable)])),
        3
    );
}

#[test]
fn run_writes_stats_and_rejects_unknown_presets() {
    let dir = tempfile::tempdir().unwrap();
    let t = gen(dir.path(), "t", &["compute-bound", "--n", "5000"]);
    let out = dir.path().join("t.stats");
    let o = cryosim(&["run", "--preset", "CryoAll", "--trace", p(&t), "-o", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rec = statsfile::from_text(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rec.stats.config_id, "CryoAll");
    assert_eq!(rec.trace, "t");
    assert_eq!(rec.stats.committed_instructions, 5000);

    let o = cryosim(&["run", "--preset", "Lukewarm", "--trace", p(&t), "-o", p(&out)]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    for name in [
        "CryoAll",
        "SuperCryo",
        "SuperAll",
        "InOrder-CryoAll",
        "InOrder-SuperCryo",
        "InOrder-SuperAll",
    ] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn run_with_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let t = gen(dir.path(), "t", &["compute-bound", "--n", "3000"]);
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "preset = \"SuperAll\"\nname = \"custom\"\n[l1d]\nsize = \"64KB\"\n",
    )
    .unwrap();
    let out = dir.path().join("o.stats");
    let o = cryosim(&["run", "--config", p(&cfg), "--trace", p(&t), "-o", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rec = statsfile::from_text(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rec.stats.config_id, "custom");
    assert_eq!(rec.stats.core_period, 10);

    fs::write(&cfg, "[l1d]\nsise = 1\n").unwrap();
    assert_eq!(
        code(&cryosim(&["run", "--config", p(&cfg), "--trace", p(&t), "-o", p(&out)])),
        2
    );
    fs::write(&cfg, "[l1d]\nassoc = 3\n").unwrap();
    assert_eq!(
        code(&cryosim(&["run", "--config", p(&cfg), "--trace", p(&t), "-o", p(&out)])),
        2
    );
}

#[test]
fn run_on_two_cores() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a", &["compute-bound", "--n", "2000"]);
    let b = gen(dir.path(), "b", &["branchy", "--n", "3000"]);
    let out = dir.path().join("o.stats");
    let o = cryosim(&[
        "run",
        "--preset",
        "CryoAll",
        "--cores",
        "2",
        "--trace",
        p(&a),
        "--trace",
        p(&b),
        "-o",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rec = statsfile::from_text(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rec.stats.committed_instructions, 5000);
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), COLUMNS);
    r.records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn sweep_report_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "cb", &["compute-bound", "--n", "4000"]);
    let b = gen(
        dir.path(),
        "mb",
        &["memory-bound", "--n", "2000", "--footprint", "32MB"],
    );
    let out = dir.path().join("out");
    let o = cryosim(&["sweep", p(&a), p(&b), "-o", p(&out), "--jobs", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let mut stats: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".stats"))
        .collect();
    stats.sort();
    assert_eq!(stats.len(), 12);
    assert!(stats.contains(&"cb.InOrder-SuperAll.stats".to_string()));

    // Every numeric column recomputes from the stored counters.
    let rows = csv_rows(&out.join("report.csv"));
    assert_eq!(rows.len(), 12);
    for row in &rows {
        let rec = statsfile::from_text(&fs::read_to_string(out.join(format!("{}.{}.stats", row[0], row[1]))).unwrap())
            .unwrap();
        let base =
            statsfile::from_text(&fs::read_to_string(out.join(format!("{}.CryoAll.stats", row[0]))).unwrap()).unwrap();
        let m = Metrics::of(&rec.stats).unwrap();
        let sp = cryosim_core::analysis::speedup(&base.stats, &rec.stats).unwrap();
        let expect = [
            rec.stats.sim_ticks.to_string(),
            fmt_f(sp),
            fmt_f(m.ipc),
            fmt_f(m.l3_mpki),
            fmt_f(m.l1d_bw / 1e9),
            fmt_f(m.l1i_bw / 1e9),
            fmt_f(m.l2_bw / 1e9),
            fmt_f(m.l3_bw / 1e9),
            fmt_f(m.mem_bw / 1e9),
        ];
        assert_eq!(&row[2..], &expect[..]);
        if row[1] == "CryoAll" {
            assert_eq!(row[3], "1.000000");
        }
    }

    for svg in ["speedup.svg", "l3_mpki.svg", "l1d_bw.svg"] {
        let text = fs::read_to_string(out.join(svg)).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        let groups = doc
            .descendants()
            .filter(|n| n.has_tag_name("g") && n.attribute("class") == Some("trace"))
            .count();
        assert_eq!(groups, 2, "{svg}");
    }

    // Resume simulates only the missing cell.
    let victim = out.join("mb.SuperCryo.stats");
    let before = fs::read(&victim).unwrap();
    fs::remove_file(&victim).unwrap();
    let csv_before = fs::read(out.join("report.csv")).unwrap();
    let o = cryosim(&["sweep", p(&a), p(&b), "-o", p(&out), "--resume"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("1 cells simulated, 11 reused"));
    assert_eq!(fs::read(&victim).unwrap(), before);
    assert_eq!(fs::read(out.join("report.csv")).unwrap(), csv_before);
}

#[test]
fn sweep_with_region_weights() {
    let dir = tempfile::tempdir().unwrap();
    let t = gen(dir.path(), "mix", &["gobmk-like", "--n", "4000"]);
    let w = dir.path().join("regions.csv");
    fs::write(&w, "trace,start,end,weight\nmix,0,1000,0.25\nmix,1000,4000,0.75\n").unwrap();
    let out = dir.path().join("out");
    let o = cryosim(&["sweep", p(&t), "-o", p(&out), "--weights", p(&w)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("mix.SuperAll.r1.stats").exists());
    assert!(!out.join("mix.SuperAll.stats").exists());
    let rows = csv_rows(&out.join("report.csv"));
    assert_eq!(rows.len(), 6);

    fs::write(&w, "trace,start,end,weight\nmix,0,5000,1.0\n").unwrap();
    assert_eq!(code(&cryosim(&["sweep", p(&t), "-o", p(&out), "--weights", p(&w)])), 2);
    fs::write(&w, "trace,start,end,weight\nother,0,10,1.0\n").unwrap();
    assert_eq!(code(&cryosim(&["sweep", p(&t), "-o", p(&out), "--weights", p(&w)])), 2);
}

#[test]
fn report_needs_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let t = gen(dir.path(), "t", &["compute-bound", "--n", "1000"]);
    let stats = dir.path().join("stats");
    fs::create_dir(&stats).unwrap();
    let o = cryosim(&[
        "run",
        "--preset",
        "SuperAll",
        "--trace",
        p(&t),
        "-o",
        p(&stats.join("t.SuperAll.stats")),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&cryosim(&["report", p(&stats)])), 2);
    let o = cryosim(&["report", p(&stats), "--baseline", "SuperAll"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stats.join("report.csv").exists());
}
