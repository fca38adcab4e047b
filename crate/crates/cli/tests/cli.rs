#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ccpad_core::{
    classify_records, load_dataset, load_records, ClosenessCode, Decision, Format, Gallery, Label, Lut, Metric,
    PadDecisionRule,
};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn ccpad(args: &[&str]) -> Output {
    ccpad_env(args, &[])
}

fn ccpad_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ccpad"));
    cmd.args(args).env_remove("CC_PAD_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn ccpad")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Exit 2 with a single diagnostic line.
fn input_error(out: &Output) -> String {
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("ccpad: "), "{err}");
    err
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

fn estimate(dir: &Path) -> PathBuf {
    let lut = dir.join("lut.json");
    ok(&ccpad(&["estimate-lut", "--validation", s(&fixture("validation.csv")), "--out", s(&lut)]));
    lut
}

fn classify_fixture(dir: &Path, lut: &Path, probes: &Path) -> Output {
    let out = dir.join("decisions.csv");
    ccpad(&[
        "classify",
        "--lut",
        s(lut),
        "--validation",
        s(&fixture("validation.csv")),
        "--gallery",
        s(&fixture("gallery.csv")),
        "--probes",
        s(probes),
        "--out",
        s(&out),
    ])
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(p).unwrap().lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn estimate_lut_writes_eight_cells_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let lut_path = estimate(dir.path());
    let lut: Lut = serde_json::from_slice(&std::fs::read(&lut_path).unwrap()).unwrap();
    assert_eq!(lut.cells().len(), 8);
    assert_eq!(lut.threshold(), 0.5);

    let manifest = read_json(&dir.path().join("manifest.json"));
    let run = &manifest["runs"]["estimate-lut"];
    assert_eq!(run["command"], "estimate-lut");
    assert_eq!(run["inputs"]["validation"]["file"], "validation.csv");
    assert_eq!(run["config"]["thr"], 0.5);
    assert_eq!(run["outputs"]["lut.json"].as_str().unwrap().len(), 64);
    assert!(run["tool_version"].is_string());
}

#[test]
fn thr_outside_open_unit_interval_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    for thr in ["0", "1", "1.5", "-0.1", "nan"] {
        let out = dir.path().join("lut.json");
        let res =
            ccpad(&["estimate-lut", "--validation", s(&fixture("validation.csv")), "--thr", thr, "--out", s(&out)]);
        input_error(&res);
        assert!(!out.exists());
    }
}

#[test]
fn golden_fixture_decisions_match_snapshot_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let lut: Lut = serde_json::from_slice(&std::fs::read(estimate(dir.path())).unwrap()).unwrap();
    let got: Vec<String> = lut.cells().iter().map(|c| format!("{} {}", c.code.bits(), c.decision.as_str())).collect();
    let snapshot = std::fs::read_to_string(fixture("lut_decisions.snap")).unwrap();
    assert_eq!(got, snapshot.lines().collect::<Vec<_>>());

    // recount from brute-force codes and apply the rule independently
    let records = v_records();
    let mut counts = [[0u32; 3]; 8]; // n_bf, n_pa, PAD correct
    for (i, r) in records.iter().enumerate() {
        let code = common::brute_training_code(&records, i, Metric::L2).unwrap();
        let c = &mut counts[code.index()];
        c[(r.label == Label::Pa) as usize] += 1;
        c[2] += ((r.pad_score >= 0.5) == (r.label == Label::Bf)) as u32;
    }
    let oracle: Vec<String> = counts
        .iter()
        .enumerate()
        .map(|(i, &[bf, pa, correct])| {
            let n = f64::from(bf + pa);
            let d = if i == 0 {
                "PA"
            } else if i == 7 {
                "BF"
            } else if bf + pa == 0 {
                "DEFER"
            } else {
                let (pb, pp, a) = (f64::from(bf) / n, f64::from(pa) / n, f64::from(correct) / n);
                if pb < a && pp < a {
                    "DEFER"
                } else if pb > pp {
                    "BF"
                } else {
                    "PA"
                }
            };
            format!("{} {d}", ClosenessCode::from_index(i).unwrap().bits())
        })
        .collect();
    assert_eq!(got, oracle);
}

#[test]
fn classify_matches_library_row_for_row() {
    let dir = tempfile::tempdir().unwrap();
    let lut_path = estimate(dir.path());
    ok(&classify_fixture(dir.path(), &lut_path, &fixture("probes.csv")));

    let lut: Lut = serde_json::from_slice(&std::fs::read(&lut_path).unwrap()).unwrap();
    let v = load_dataset(&fixture("validation.csv"), Format::Csv).unwrap();
    let galleries = Gallery::group(&load_records(&fixture("gallery.csv"), Format::Csv).unwrap().records).unwrap();
    let probes = load_records(&fixture("probes.csv"), Format::Csv).unwrap().records;
    let verdicts = classify_records(&probes, &galleries, &v, &lut, Metric::L2).unwrap();

    let rows = csv_rows(&dir.path().join("decisions.csv"));
    assert_eq!(rows[0], ["probe_id", "code", "lut_decision", "pad_decision", "final"]);
    assert_eq!(rows.len(), probes.len() + 1);
    for ((row, p), v) in rows[1..].iter().zip(&probes).zip(&verdicts) {
        assert_eq!(row[0], p.id.to_string());
        assert_eq!(row[1], v.code.bits());
        assert_eq!(row[2], v.lut_decision.as_str());
        assert_eq!(row[3], v.pad_decision.as_str());
        assert_eq!(row[4], v.label.as_str());
    }
    // and the library agrees with the brute-force verification oracle
    for (p, v) in probes.iter().zip(&verdicts) {
        let templates = galleries[&p.id.user].templates();
        let code = common::brute_verification_code(&p.embedding, p.id.finger, templates, &v_records(), Metric::L2);
        assert_eq!(code, v.code, "{}", p.id);
    }
}

fn v_path() -> PathBuf {
    fixture("validation.csv")
}

fn v_records() -> Vec<ccpad_core::EmbeddingRecord> {
    load_dataset(&v_path(), Format::Csv).unwrap().into_records()
}

#[test]
fn empty_probe_file_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let lut = estimate(dir.path());
    let header = std::fs::read_to_string(fixture("probes.csv")).unwrap().lines().next().unwrap().to_owned();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, format!("{header}\n")).unwrap();
    ok(&classify_fixture(dir.path(), &lut, &empty));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("decisions.csv")).unwrap(),
        "probe_id,code,lut_decision,pad_decision,final\n"
    );
}

#[test]
fn forced_codes_override_the_pad() {
    let dir = tempfile::tempdir().unwrap();
    // every free cell defers, and every PAD score is inverted
    let lut = Lut::from_counts(PadDecisionRule::default(), Default::default()).with_decisions([Decision::Defer; 8]);
    let lut_path = dir.path().join("defer.json");
    std::fs::write(&lut_path, serde_json::to_vec(&lut).unwrap()).unwrap();
    let text = std::fs::read_to_string(fixture("probes.csv")).unwrap();
    let mut flipped = String::new();
    for (i, line) in text.lines().enumerate() {
        let mut f: Vec<String> = line.split(',').map(str::to_owned).collect();
        if i > 0 {
            let score: f64 = f[4].parse().unwrap();
            f[4] = (1.0 - score).to_string();
        }
        flipped.push_str(&f.join(","));
        flipped.push('\n');
    }
    let probes = dir.path().join("flipped.csv");
    std::fs::write(&probes, flipped).unwrap();
    ok(&classify_fixture(dir.path(), &lut_path, &probes));

    let rows = csv_rows(&dir.path().join("decisions.csv"));
    let mut seen = BTreeMap::new();
    for row in &rows[1..] {
        *seen.entry(row[1].clone()).or_insert(0) += 1;
        match row[1].as_str() {
            "000" => assert_eq!((row[2].as_str(), row[4].as_str()), ("PA", "PA")),
            "111" => assert_eq!((row[2].as_str(), row[4].as_str()), ("BF", "BF")),
            _ => assert_eq!((row[2].as_str(), &row[4]), ("DEFER", &row[3])),
        }
    }
    assert!(seen.contains_key("000"), "{seen:?}");
}

#[test]
fn gallery_user_in_validation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let lut = estimate(dir.path());
    let err = ccpad(&[
        "classify",
        "--lut",
        s(&lut),
        "--validation",
        s(&fixture("validation.csv")),
        "--gallery",
        s(&fixture("validation.csv")),
        "--probes",
        s(&fixture("validation.csv")),
        "--out",
        s(&dir.path().join("d.csv")),
    ]);
    input_error(&err);
    assert!(!dir.path().join("d.csv").exists());
}

#[test]
fn unenrolled_finger_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let lut = estimate(dir.path());
    let text = std::fs::read_to_string(fixture("probes.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().take(3).map(str::to_owned).collect();
    let mut f: Vec<String> = lines[2].split(',').map(str::to_owned).collect();
    f[1] = "9".into();
    lines[2] = f.join(",");
    let probes = dir.path().join("p.csv");
    std::fs::write(&probes, lines.join("\n") + "\n").unwrap();
    let err = input_error(&classify_fixture(dir.path(), &lut, &probes));
    assert!(err.contains("no templates for claimed finger"), "{err}");
}

#[test]
fn evaluate_perfect_decisions_gives_zero_acer() {
    let dir = tempfile::tempdir().unwrap();
    let probes = load_records(&fixture("probes.csv"), Format::Csv).unwrap().records;
    let mut csv = String::from("probe_id,code,lut_decision,pad_decision,final\n");
    for p in &probes {
        csv.push_str(&format!("{},000,DEFER,{},{}\n", p.id, p.label, p.label));
    }
    let decisions = dir.path().join("perfect.csv");
    std::fs::write(&decisions, csv).unwrap();
    let out = dir.path().join("eval.json");
    let res =
        ccpad(&["evaluate", "--decisions", s(&decisions), "--probes", s(&fixture("probes.csv")), "--out", s(&out)]);
    ok(&res);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("with CC") && l.trim_end().ends_with("0.00%")), "{stdout}");
    let report = read_json(&out);
    assert_eq!(report["enhanced"]["acer"], 0.0);
    assert_eq!(report["baseline"]["acer"], 0.0);
    assert_eq!(report["n_bf"].as_u64().unwrap() + report["n_pa"].as_u64().unwrap(), probes.len() as u64);
}

#[test]
fn evaluate_rejects_incomplete_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let decisions = dir.path().join("d.csv");
    std::fs::write(&decisions, "probe_id,code,lut_decision,pad_decision,final\nu000/thumb_l/2,000,PA,PA,PA\n").unwrap();
    let res = ccpad(&[
        "evaluate",
        "--decisions",
        s(&decisions),
        "--probes",
        s(&fixture("probes.csv")),
        "--out",
        s(&dir.path().join("e.json")),
    ]);
    input_error(&res);
}

#[test]
fn fuse_with_perfect_pad_and_no_attacks_returns_comparator() {
    let dir = tempfile::tempdir().unwrap();
    let roc = "threshold,fmr,fnmr\n-1,1,0\n0.25,0.5,0.125\n0.5,0.1,0.3\n0.75,0.01,0.7\n2,0,1\n";
    let comparator = dir.path().join("roc.csv");
    std::fs::write(&comparator, roc).unwrap();
    let out = dir.path().join("fused");
    ok(&ccpad(&["fuse", "--comparator", s(&comparator), "--w", "0", "--out", s(&out)]));
    let rows = csv_rows(&out.join("fusion_w0.csv"));
    assert_eq!(rows[0], ["threshold", "gfmr", "gfnmr", "iapar"]);
    let input = roc.lines().skip(1).map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>());
    assert_eq!(rows.len() - 1, 5);
    for (row, want) in rows[1..].iter().zip(input) {
        let got: Vec<f64> = row.iter().map(|x| x.parse().unwrap()).collect();
        assert_eq!(got[..3], want[..]);
        assert_eq!(got[3], 0.0);
    }
    assert!(read_json(&out.join("manifest.json"))["runs"]["fuse"]["outputs"]["fusion_w0.csv"].is_string());
}

#[test]
fn fuse_empirical_reads_trials() {
    let dir = tempfile::tempdir().unwrap();
    let trials = dir.path().join("t.csv");
    std::fs::write(
        &trials,
        "kind,score,pad\ngenuine,0.9,BF\ngenuine,0.4,PA\nimpostor,0.2,BF\nattack,0.8,BF\nattack,0.95,PA\n",
    )
    .unwrap();
    let out = dir.path().join("f");
    ok(&ccpad(&["fuse", "--mode", "empirical", "--trials", s(&trials), "--w", "0.5", "--out", s(&out)]));
    let rows = csv_rows(&out.join("fusion_w0.5.csv"));
    // at t = 0.8: genuine accepted 1 of 2, impostor 0, attacks accepted 1 of 2
    let row = rows.iter().find(|r| r[0] == "0.8").unwrap();
    let got: Vec<f64> = row.iter().map(|x| x.parse().unwrap()).collect();
    assert_eq!(got, [0.8, 0.25, 0.5, 0.5]);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "kind,score,pad\nspoof,0.1,BF\n").unwrap();
    input_error(&ccpad(&["fuse", "--mode", "empirical", "--trials", s(&bad), "--out", s(&out)]));
}

#[test]
fn config_file_sets_flags_and_explicit_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let lut = dir.path().join("lut.json");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        serde_json::json!({ "validation": v_path(), "thr": 0.25, "metric": "l1", "out": lut }).to_string(),
    )
    .unwrap();
    ok(&ccpad(&["estimate-lut", "--config", s(&cfg)]));
    let v = read_json(&lut);
    assert_eq!(v["threshold"], 0.25);
    ok(&ccpad(&["--config", s(&cfg), "estimate-lut", "--thr", "0.75"]));
    assert_eq!(read_json(&lut)["threshold"], 0.75);
    assert_eq!(read_json(&dir.path().join("manifest.json"))["runs"]["estimate-lut"]["config"]["metric"], "l1");
}

#[test]
fn hierarchy_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.csv");
    ok(&ccpad(&["hierarchy", "--validation", s(&v_path()), "--name", "fixture", "--out", s(&out)]));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1][0], "fixture");
    let want = common::brute_hierarchy(&v_records(), Metric::L2);
    let flat: Vec<String> = want.iter().flatten().map(|x| format!("{:.2}", x * 100.0)).collect();
    assert_eq!(rows[1][1..], flat[..]);
    assert_eq!(rows[2][1..], flat[..]);
    assert_eq!(rows[3][1..], flat[..]);
}

#[test]
fn synth_pipeline_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        ok(&ccpad(&["synth", "--seed", "5", "--n-users", "10", "--holdout", "3", "--out", s(d)]));
    }
    for f in ["validation.jsonl", "gallery.jsonl", "probes.jsonl", "manifest.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let m = read_json(&a.path().join("manifest.json"));
    assert_eq!(m["runs"]["synth"]["seed"], 5);
    assert_eq!(m["runs"]["synth"]["config"]["generator"]["n_users"], 10);
}

#[test]
fn synth_without_seed_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    input_error(&ccpad(&["synth", "--out", s(dir.path())]));
}

#[test]
fn bench_over_budget_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.json");
    let res = ccpad(&[
        "bench",
        "--size",
        "200",
        "--dim",
        "8",
        "--probes",
        "20",
        "--warmup",
        "2",
        "--budget-ms",
        "0",
        "--out",
        s(&out),
    ]);
    assert_eq!(res.status.code(), Some(3));
    let report = read_json(&out);
    assert_eq!(report["within_budget"], false);
    assert!(report["p99_ms"].as_f64().unwrap() >= 0.0);
}

#[test]
fn bad_thread_count_exits_2() {
    input_error(&ccpad_env(&["bench", "--size", "100", "--probes", "1"], &[("CC_PAD_THREADS", "zero")]));
}
