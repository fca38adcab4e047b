use std::collections::BTreeMap;
use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use ccpad_core::io::{encode_records, load_records};
use ccpad_core::{
    classify, classify_records, estimate_lut, evaluate, fuse_analytic, fuse_empirical, generate, hierarchy_stats,
    load_dataset, recalibrate_threshold, split, ComparatorInput, ComparisonRow, Dataset, EmbeddingRecord, Format,
    FusionInput, FusionReport, Gallery, HierarchyStats, Label, Lut, PadDecisionRule, PadOperatingPoint, RocCurve,
    RocPoint, SynthConfig, Trial,
};
use serde_json::json;

use crate::args::{
    BenchArgs, ClassifyArgs, Command, EstimateLutArgs, EvaluateArgs, FuseArgs, FuseMode, HierarchyArgs, SynthArgs,
};
use crate::error::{CliError, CliResult};
use crate::output::{file_name, parent_dir, read_input, Run};

/// Reference per-probe overheads printed next to the benchmark result, ms.
const REFERENCE_MS: (f64, f64) = (0.25, 1.52);

pub fn run(cmd: &Command) -> CliResult<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::EstimateLut(a) => estimate(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Hierarchy(a) => hierarchy(a),
        Command::Fuse(a) => fuse(a),
        Command::Bench(a) => bench(a),
    }
}

fn with_path<T>(path: &Path, r: ccpad_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn dataset(path: &Path) -> CliResult<Dataset> {
    with_path(path, load_dataset(path, Format::from_path(path)))
}

fn records(path: &Path) -> CliResult<Vec<EmbeddingRecord>> {
    Ok(with_path(path, load_records(path, Format::from_path(path)))?.records)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| CliError::input(e.to_string()))
}

fn json_bytes<T: serde::Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn pct(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

fn synth(a: &SynthArgs) -> CliResult<()> {
    let mut cfg = match &a.params {
        Some(p) => {
            let text =
                String::from_utf8(read_input(p)?).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            with_path(p, SynthConfig::parse(&text))?
        }
        None => SynthConfig {
            seed: a.seed.ok_or_else(|| CliError::input("--seed is required (or a --params file that sets it)"))?,
            ..SynthConfig::default()
        },
    };
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = a.$field { cfg.$field = v; } )* };
    }
    set!(seed, dim, n_users, fingers_per_user, bf_per_finger, pa_per_finger);
    set!(sigma_sample, sigma_finger, sigma_user, pa_offset, pa_overlap_rate, pad_noise);
    cfg.validate()?;

    let data = generate(&cfg)?;
    let parts = split(&data, a.holdout, cfg.seed)?;
    let ext = match a.format {
        Format::Jsonl => "jsonl",
        Format::Csv => "csv",
    };
    let mut run = Run::new(a.out.clone(), "synth");
    if let Some(p) = &a.params {
        run.input("params", p)?;
    }
    run.seed(cfg.seed);
    run.config(json!({ "generator": cfg, "holdout": a.holdout, "format": ext }));
    let dim = data.dim();
    for (name, recs) in [
        ("validation", parts.validation.records()),
        ("gallery", &parts.gallery_records[..]),
        ("probes", &parts.probes[..]),
    ] {
        run.write(&a.out.join(format!("{name}.{ext}")), &encode_records(a.format, dim, recs)?)?;
    }
    println!(
        "validation {} samples ({} users), gallery {} templates ({} users), probes {}",
        parts.validation.len(),
        parts.validation.users().len(),
        parts.gallery_records.len(),
        parts.galleries.len(),
        parts.probes.len()
    );
    run.finish()
}

fn estimate(a: &EstimateLutArgs) -> CliResult<()> {
    let rule = PadDecisionRule::new(a.thr)?;
    let v = dataset(&a.validation)?;
    let lut = estimate_lut(&v, rule, a.metric)?;
    let mut run = Run::new(parent_dir(&a.out), "estimate-lut");
    run.input("validation", &a.validation)?;
    run.config(json!({ "thr": a.thr, "metric": a.metric, "out": file_name(&a.out) }));
    run.write(&a.out, &json_bytes(&lut)?)?;
    print!("{}", lut.to_table());
    run.finish()
}

fn load_lut(path: &Path) -> CliResult<Lut> {
    serde_json::from_slice(&read_input(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn classify_cmd(a: &ClassifyArgs) -> CliResult<()> {
    let lut = load_lut(&a.lut)?;
    let v = dataset(&a.validation)?;
    let galleries = with_path(&a.gallery, Gallery::group(&records(&a.gallery)?))?;
    let probes = records(&a.probes)?;
    let verdicts = with_path(&a.probes, classify_records(&probes, &galleries, &v, &lut, a.metric))?;

    let rows = probes.iter().zip(&verdicts).map(|(p, v)| {
        vec![
            p.id.to_string(),
            v.code.bits(),
            v.lut_decision.as_str().to_owned(),
            v.pad_decision.as_str().to_owned(),
            v.label.as_str().to_owned(),
        ]
    });
    let bytes = csv_bytes(&["probe_id", "code", "lut_decision", "pad_decision", "final"], rows)?;

    let mut run = Run::new(parent_dir(&a.out), "classify");
    run.input("lut", &a.lut)?;
    run.input("validation", &a.validation)?;
    run.input("gallery", &a.gallery)?;
    run.input("probes", &a.probes)?;
    run.config(json!({ "metric": a.metric, "out": file_name(&a.out) }));
    run.write(&a.out, &bytes)?;
    let deferred = verdicts.iter().filter(|v| v.lut_decision == ccpad_core::Decision::Defer).count();
    println!("classified {} probes, {} deferred to the PAD", verdicts.len(), deferred);
    run.finish()
}

/// `probe_id -> (pad_decision, final)` from a classify CSV.
fn read_decisions(path: &Path) -> CliResult<BTreeMap<String, (Label, Label)>> {
    let bytes = read_input(path)?;
    let mut rdr = csv::Reader::from_reader(&bytes[..]);
    let bad = |msg: String| CliError::input(format!("{}: {msg}", path.display()));
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| bad(format!("missing column {name}")));
    let (id, pad, fin) = (col("probe_id")?, col("pad_decision")?, col("final")?);
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let label = |i: usize| row[i].parse::<Label>().map_err(|e| bad(format!("line {line}: {e}")));
        if out.insert(row[id].to_owned(), (label(pad)?, label(fin)?)).is_some() {
            return Err(bad(format!("line {line}: duplicate probe_id {}", &row[id])));
        }
    }
    Ok(out)
}

fn evaluate_cmd(a: &EvaluateArgs) -> CliResult<()> {
    let mut decisions = read_decisions(&a.decisions)?;
    let probes = records(&a.probes)?;
    let mut baseline = Vec::with_capacity(probes.len());
    let mut enhanced = Vec::with_capacity(probes.len());
    for p in &probes {
        let id = p.id.to_string();
        let (pad, fin) = decisions
            .remove(&id)
            .ok_or_else(|| CliError::input(format!("{}: no decision for probe {id}", a.decisions.display())))?;
        baseline.push((pad, p.label));
        enhanced.push((fin, p.label));
    }
    if let Some(extra) = decisions.keys().next() {
        return Err(CliError::input(format!("{}: decision for unknown probe {extra}", a.decisions.display())));
    }
    let base = evaluate(&baseline)?;
    let cc = evaluate(&enhanced)?;
    let scores = |label: Label| probes.iter().filter(|p| p.label == label).map(|p| p.pad_score).collect::<Vec<_>>();
    let recal = recalibrate_threshold(&scores(Label::Bf), &scores(Label::Pa), cc.bpcer)?;

    let report = json!({
        "n_bf": cc.n_bf,
        "n_pa": cc.n_pa,
        "baseline": base,
        "enhanced": cc,
        "recalibrated_baseline": recal,
    });
    let mut run = Run::new(parent_dir(&a.out), "evaluate");
    run.input("decisions", &a.decisions)?;
    run.input("probes", &a.probes)?;
    run.config(json!({
        "out": file_name(&a.out),
        "table": a.table.as_deref().map(file_name),
        "val_set": a.val_set,
        "test_set": a.test_set,
    }));
    run.write(&a.out, &json_bytes(&report)?)?;
    if let Some(table) = &a.table {
        let row = ComparisonRow::new(&a.val_set, &a.test_set, &base, &cc);
        let bytes = csv_bytes(
            &["val_set", "test_set", "bpcer", "apcer", "delta_bpcer", "delta_apcer"],
            [vec![row.val_set, row.test_set, row.bpcer, row.apcer, row.delta_bpcer, row.delta_apcer]],
        )?;
        run.write(table, &bytes)?;
    }
    println!("           BPCER    APCER    ACER");
    println!("baseline {:>7} {:>8} {:>7}", pct(base.bpcer), pct(base.apcer), pct(base.acer));
    println!("with CC  {:>7} {:>8} {:>7}", pct(cc.bpcer), pct(cc.apcer), pct(cc.acer));
    println!("baseline at BPCER {}: threshold {:.4}, APCER {}", pct(recal.bpcer), recal.threshold, pct(recal.apcer));
    run.finish()
}

fn hierarchy(a: &HierarchyArgs) -> CliResult<()> {
    if !a.name.is_empty() && a.name.len() != a.validation.len() {
        return Err(CliError::input(format!(
            "{} names given for {} validation sets",
            a.name.len(),
            a.validation.len()
        )));
    }
    let mut run = Run::new(parent_dir(&a.out), "hierarchy");
    let mut rows = Vec::new();
    let mut stats = Vec::new();
    for (i, path) in a.validation.iter().enumerate() {
        let name = a.name.get(i).cloned().unwrap_or_else(|| {
            path.file_stem().map_or_else(|| format!("set{i}"), |s| s.to_string_lossy().into_owned())
        });
        let s = with_path(path, hierarchy_stats(&dataset(path)?, a.metric))?;
        run.input(&format!("validation[{i}]"), path)?;
        rows.push(s.to_percent_row(&name));
        stats.push(s);
    }
    let weighted = HierarchyStats::mean_weighted(&stats).expect("every set has both classes");
    let uniform = HierarchyStats::mean_uniform(&stats).expect("at least one set");
    rows.push(weighted.to_percent_row("mean_weighted"));
    rows.push(uniform.to_percent_row("mean_uniform"));

    let mut text = String::from(
        "set,bf_same_finger,bf_same_person,bf_generic_user,pa_same_finger,pa_same_person,pa_generic_user\n",
    );
    for r in &rows {
        text.push_str(r);
        text.push('\n');
    }
    run.config(json!({ "metric": a.metric, "names": a.name, "out": file_name(&a.out) }));
    run.write(&a.out, text.as_bytes())?;
    print!("{text}");
    run.finish()
}

fn comparator_input(path: &Path) -> CliResult<ComparatorInput> {
    let bytes = read_input(path)?;
    let mut rdr = csv::Reader::from_reader(&bytes[..]);
    let bad = |msg: String| CliError::input(format!("{}: {msg}", path.display()));
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let num = |s: &str, line: u64| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| bad(format!("line {line}: bad number {s:?}")))
    };
    match headers.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["threshold", "fmr", "fnmr"] => {
            let mut points = Vec::new();
            for row in rdr.records() {
                let row = row?;
                let line = row.position().map_or(0, |p| p.line());
                let (t, fmr, fnmr) = (num(&row[0], line)?, num(&row[1], line)?, num(&row[2], line)?);
                if !(0.0..=1.0).contains(&fmr) || !(0.0..=1.0).contains(&fnmr) {
                    return Err(bad(format!("line {line}: rates must lie in [0, 1]")));
                }
                points.push(RocPoint { threshold: t, false_accept: fmr, false_reject: fnmr });
            }
            Ok(ComparatorInput::Roc(RocCurve { points }))
        }
        ["kind", "score"] => {
            let (mut genuine, mut impostor) = (Vec::new(), Vec::new());
            for row in rdr.records() {
                let row = row?;
                let line = row.position().map_or(0, |p| p.line());
                let s = num(&row[1], line)?;
                match row[0].trim() {
                    "genuine" => genuine.push(s),
                    "impostor" => impostor.push(s),
                    other => return Err(bad(format!("line {line}: unknown kind {other:?}"))),
                }
            }
            Ok(ComparatorInput::Scores { genuine, impostor })
        }
        _ => Err(bad("header must be threshold,fmr,fnmr or kind,score".into())),
    }
}

fn trials_input(path: &Path) -> CliResult<[Vec<Trial>; 3]> {
    let bytes = read_input(path)?;
    let mut rdr = csv::Reader::from_reader(&bytes[..]);
    let bad = |msg: String| CliError::input(format!("{}: {msg}", path.display()));
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["kind", "score", "pad"] {
        return Err(bad("header must be kind,score,pad".into()));
    }
    let mut out: [Vec<Trial>; 3] = Default::default();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let score = row[1]
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| bad(format!("line {line}: bad score {:?}", &row[1])))?;
        let pad = row[2].trim().parse::<Label>().map_err(|e| bad(format!("line {line}: {e}")))?;
        let slot = match row[0].trim() {
            "genuine" => 0,
            "impostor" => 1,
            "attack" => 2,
            other => return Err(bad(format!("line {line}: unknown kind {other:?}"))),
        };
        out[slot].push(Trial { score, pad });
    }
    Ok(out)
}

fn fuse(a: &FuseArgs) -> CliResult<()> {
    let mut run = Run::new(a.out.clone(), "fuse");
    let reports: Vec<FusionReport> = match a.mode {
        FuseMode::Analytic => {
            let path = a.comparator.as_ref().ok_or_else(|| CliError::input("analytic mode needs --comparator"))?;
            let comparator = comparator_input(path)?;
            run.input("comparator", path)?;
            let pad = PadOperatingPoint { bpcer: a.bpcer, apcer: a.apcer };
            a.w.iter()
                .map(|&w| fuse_analytic(&FusionInput { comparator: comparator.clone(), pad, w }))
                .collect::<ccpad_core::Result<_>>()?
        }
        FuseMode::Empirical => {
            let path = a.trials.as_ref().ok_or_else(|| CliError::input("empirical mode needs --trials"))?;
            let [g, i, t] = trials_input(path)?;
            run.input("trials", path)?;
            a.w.iter().map(|&w| fuse_empirical(&g, &i, &t, w)).collect::<ccpad_core::Result<_>>()?
        }
    };
    let mode = match a.mode {
        FuseMode::Analytic => "analytic",
        FuseMode::Empirical => "empirical",
    };
    run.config(json!({ "mode": mode, "bpcer": a.bpcer, "apcer": a.apcer, "w": a.w }));
    for r in &reports {
        let mut bytes = Vec::new();
        r.write_csv(&mut bytes)?;
        let path = a.out.join(format!("fusion_w{}.csv", r.w));
        run.write(&path, &bytes)?;
        println!("w={}: {} operating points -> {}", r.w, r.points.len(), path.display());
    }
    run.finish()
}

#[derive(Debug, serde::Serialize)]
struct BenchReport {
    validation_size: usize,
    dim: usize,
    probes: usize,
    warmup: usize,
    mean_ms: f64,
    p99_ms: f64,
    reference_ms: (f64, f64),
    budget_ms: f64,
    within_budget: bool,
}

fn bench(a: &BenchArgs) -> CliResult<()> {
    const PER_USER: usize = 50;
    const PROBES_PER_USER: usize = 30;
    if a.probes == 0 {
        return Err(CliError::input("--probes must be positive"));
    }
    let val_users = a.size.div_ceil(PER_USER).max(2);
    let held = (a.probes + a.warmup).div_ceil(PROBES_PER_USER).max(1);
    // 10 fingers x (4 bona fide + 1 attack): half the bona fide samples of a
    // held-out finger enrol, the rest and the attack become probes
    let cfg = SynthConfig {
        dim: a.dim,
        n_users: val_users + held,
        fingers_per_user: 10,
        bf_per_finger: 4,
        pa_per_finger: 1,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let data = generate(&cfg)?;
    let parts = split(&data, held, a.seed)?;
    let v = &parts.validation;
    let lut = estimate_lut(v, PadDecisionRule::new(0.5)?, a.metric)?;

    let n = a.probes + a.warmup;
    let mut times = Vec::with_capacity(a.probes);
    for i in 0..n {
        let p = &parts.probes[i % parts.probes.len()];
        let gallery = &parts.galleries[&p.id.user];
        let start = Instant::now();
        let verdict = classify(&p.embedding, p.pad_score, p.id.finger, gallery, v, &lut, a.metric)?;
        let elapsed = start.elapsed();
        black_box(verdict);
        if i >= a.warmup {
            times.push(elapsed.as_secs_f64() * 1e3);
        }
    }
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    times.sort_by(f64::total_cmp);
    let p99 = times[(times.len() * 99).div_ceil(100) - 1];
    let report = BenchReport {
        validation_size: v.len(),
        dim: a.dim,
        probes: a.probes,
        warmup: a.warmup,
        mean_ms: mean,
        p99_ms: p99,
        reference_ms: REFERENCE_MS,
        budget_ms: a.budget_ms,
        within_budget: mean <= a.budget_ms,
    };
    println!(
        "per-probe CC overhead over {} probes (|V|={}, D={}): mean {:.3} ms, p99 {:.3} ms",
        a.probes,
        v.len(),
        a.dim,
        mean,
        p99
    );
    println!("reference range {:.2}-{:.2} ms; budget {} ms", REFERENCE_MS.0, REFERENCE_MS.1, a.budget_ms);
    if let Some(out) = &a.out {
        let mut run = Run::new(parent_dir(out), "bench");
        run.seed(a.seed);
        run.config(json!({
            "size": a.size, "dim": a.dim, "probes": a.probes, "warmup": a.warmup,
            "metric": a.metric, "budget_ms": a.budget_ms, "out": file_name(out),
        }));
        run.write(out, &json_bytes(&report)?)?;
        run.finish()?;
    }
    if !report.within_budget {
        return Err(CliError::Budget(format!("mean overhead {mean:.3} ms exceeds the {} ms budget", a.budget_ms)));
    }
    Ok(())
}
