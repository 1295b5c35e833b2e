//! Acceptance gate. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line each and exits non-zero if any fails.
//!
//! Run alone with `cargo test -p kscan-cli --test acceptance`.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use kscan::{
    build_sorted_matrix, cross_validate, generate_synthetic, logarithmic_schedule, optimize, stratify_labels, sweep,
    Dataset, Dataset64, FoldAssignment, LabelColumn, Metric, SortedDistanceMatrix64, TieBreakPolicy,
    DEFAULT_MEMORY_BUDGET,
};
use kscan_cli::config::{DataSource, Precision, SyntheticSpec};
use kscan_cli::{bench, Mode, RunConfig};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Instance {
    ds: Dataset64,
    folds: FoldAssignment,
    metric: Metric,
    label: String,
}

/// Random mixtures with rows in random order; half are snapped to a coarse
/// grid so that distance and vote ties are common.
fn random_instances(count: usize, seed: u64) -> Vec<Instance> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.gen_range(10..=200);
            let d = rng.gen_range(1..=5);
            let s = rng.gen_range(2..=4);
            let f = if rng.gen_bool(0.5) { 3 } else { 5 };
            let spread = rng.gen_range(0.3..1.5);
            let grid = i % 2 == 1;
            let metric = Metric::ALL[i % Metric::ALL.len()];
            let base: Dataset64 = generate_synthetic(n, d, s, spread, rng.gen()).unwrap();

            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut features = Vec::with_capacity(n * d);
            let mut labels = Vec::with_capacity(n);
            for &r in &order {
                features.extend(base.row(r).iter().map(|&v| if grid { (v * 2.0).round() } else { v }));
                labels.push(base.labels()[r]);
            }
            let ds = Dataset::new(features, d, labels, base.class_names().to_vec()).unwrap();
            let folds = stratify_labels(ds.labels(), f, rng.gen()).unwrap();
            let label = format!("#{i} n={n} d={d} s={s} f={f} grid={grid} metric={metric}");
            Instance { ds, folds, metric, label }
        })
        .collect()
}

fn criterion_1(instances: &[Instance]) -> Outcome {
    let mut comparisons = 0usize;
    for inst in instances {
        let m = build_sorted_matrix(&inst.ds, &inst.folds, inst.metric, DEFAULT_MEMORY_BUDGET).map_err(|e| e.to_string())?;
        for policy in TieBreakPolicy::ALL {
            let acc = sweep(&m, &inst.folds, inst.ds.labels(), policy).map_err(|e| e.to_string())?;
            if acc.k_max() != inst.folds.k_max() {
                return Err(format!("{}: sweep k_max {} != {}", inst.label, acc.k_max(), inst.folds.k_max()));
            }
            for k in 1..=acc.k_max() {
                let naive = cross_validate(&inst.ds, &inst.folds, k, inst.metric, policy).map_err(|e| e.to_string())?;
                if acc.row(k) != naive.as_slice() {
                    return Err(format!(
                        "{} policy={policy} k={k}: sweep {:?} vs naive {:?}",
                        inst.label,
                        acc.row(k),
                        naive
                    ));
                }
                comparisons += 1;
            }
        }
    }
    Ok(format!(
        "{} instances x 2 tie policies, {comparisons} (instance, policy, k) rows identical",
        instances.len()
    ))
}

fn criterion_2() -> Outcome {
    let csv = "x,label\n0,0\n1,0\n2,1\n10,1\n";
    let ds: Dataset64 = kscan::load_csv_from_reader(csv.as_bytes(), &LabelColumn::from("label")).unwrap();
    let folds = FoldAssignment::from_fold_of(vec![0, 1, 0, 1], 2).unwrap();
    let out = optimize(&ds, &folds, Metric::Euclidean, TieBreakPolicy::SmallestCode, DEFAULT_MEMORY_BUDGET)
        .map_err(|e| e.to_string())?;

    let expected_a = vec![vec![2u32, 1], vec![2, 2]];
    let expected_best = vec![1usize, 2];
    let expected_k_star = 2usize;
    let got_a = out.accuracy.rows();
    let got = format!(
        "A={:?} best_k_per_fold={:?} k_star={}",
        got_a, out.report.best_k_per_fold, out.report.k_star
    );
    if got_a == expected_a && out.report.best_k_per_fold == expected_best && out.report.k_star == expected_k_star {
        Ok(got)
    } else {
        Err(format!("expected A={expected_a:?} best_k_per_fold={expected_best:?} k_star={expected_k_star}, got {got}"))
    }
}

fn synthetic_config(n: usize, repeat: usize) -> RunConfig {
    RunConfig {
        source: DataSource::Synthetic(SyntheticSpec { n, d: 4, s: 3, spread: 1.0 }),
        folds: 5,
        seed: 7,
        metric: Metric::Euclidean,
        policy: TieBreakPolicy::SmallestCode,
        memory_budget: DEFAULT_MEMORY_BUDGET,
        threads: None,
        precision: Precision::F64,
        repeat,
    }
}

fn criterion_3() -> Outcome {
    let cfg = synthetic_config(2000, 1);
    let ds: Dataset64 = kscan_cli::load_dataset(&cfg).map_err(|e| e.to_string())?;
    let folds = FoldAssignment::stratified(&ds, cfg.folds, cfg.seed).map_err(|e| e.to_string())?;
    let result = bench(&ds, &folds, &cfg, &[Mode::Sweep, Mode::NaiveFull]).map_err(|e| e.to_string())?;
    let ratio = result.speedups[0].ratio;
    let detail = format!(
        "sweep {:.3}s, naive-full {:.3}s, speedup {ratio:.1}x (need >= 20x), k* {} / {}",
        result.modes[0].seconds, result.modes[1].seconds, result.modes[0].k_star, result.modes[1].k_star
    );
    if ratio >= 20.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fastest_sweep(n: usize, repeats: usize) -> Result<f64, String> {
    let cfg = synthetic_config(n, repeats);
    let ds: Dataset64 = kscan_cli::load_dataset(&cfg).map_err(|e| e.to_string())?;
    let folds = FoldAssignment::stratified(&ds, cfg.folds, cfg.seed).map_err(|e| e.to_string())?;
    let mut best = f64::INFINITY;
    for _ in 0..repeats {
        let out = optimize(&ds, &folds, cfg.metric, cfg.policy, cfg.memory_budget).map_err(|e| e.to_string())?;
        best = best.min(out.report.timing.total);
    }
    Ok(best)
}

fn criterion_4() -> Outcome {
    // warm-up so that allocator and thread pool start-up are not billed to n=2000
    fastest_sweep(500, 1)?;
    let small = fastest_sweep(2000, 3)?;
    let large = fastest_sweep(4000, 3)?;
    let ratio = large / small;
    let detail = format!("n=2000 {small:.3}s, n=4000 {large:.3}s, ratio {ratio:.2} (need <= 6)");
    if ratio <= 6.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn check_matrix(m: &SortedDistanceMatrix64, inst: &Instance) -> Result<(), String> {
    let fold_of = inst.folds.fold_of();
    let n = inst.ds.n_rows();
    if m.n_rows() != n {
        return Err(format!("{}: {} rows, expected {n}", inst.label, m.n_rows()));
    }
    for r in 0..n {
        let row = m.row(r);
        let expected_len = n - inst.folds.fold_sizes()[fold_of[r]];
        if row.len() != expected_len {
            return Err(format!("{} row {r}: length {} != {expected_len}", inst.label, row.len()));
        }
        let mut seen = vec![false; n];
        for e in row {
            let j = e.source as usize;
            if fold_of[j] == fold_of[r] {
                return Err(format!("{} row {r}: same-fold neighbor {j}", inst.label));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(format!("{} row {r}: neighbor {j} listed twice", inst.label));
            }
            if e.label != inst.ds.labels()[j] {
                return Err(format!("{} row {r}: wrong label for {j}", inst.label));
            }
            let back = m.row(j).iter().find(|b| b.source as usize == r);
            match back {
                Some(b) if b.distance.to_bits() == e.distance.to_bits() => {}
                Some(b) => {
                    return Err(format!(
                        "{}: d({r},{j}) = {:e} but d({j},{r}) = {:e}",
                        inst.label, e.distance, b.distance
                    ))
                }
                None => return Err(format!("{}: {r} missing from row {j}", inst.label)),
            }
        }
        if let Some(w) = row.windows(2).find(|w| w[0].distance > w[1].distance) {
            return Err(format!("{} row {r}: {} before {}", inst.label, w[0].distance, w[1].distance));
        }
    }
    Ok(())
}

fn criterion_5(instances: &[Instance]) -> Outcome {
    let mut entries = 0usize;
    for inst in instances {
        let m = build_sorted_matrix(&inst.ds, &inst.folds, inst.metric, DEFAULT_MEMORY_BUDGET).map_err(|e| e.to_string())?;
        check_matrix(&m, inst)?;
        entries += m.rows().map(<[_]>::len).sum::<usize>();
    }
    Ok(format!("{} instances, {entries} entries: masked, sorted, symmetric", instances.len()))
}

fn criterion_6() -> Outcome {
    for inst in random_instances(20, 0x5ca1e) {
        let scaled = inst.ds.scaled(1000.0).map_err(|e| e.to_string())?;
        for policy in TieBreakPolicy::ALL {
            let a = optimize(&inst.ds, &inst.folds, inst.metric, policy, DEFAULT_MEMORY_BUDGET).map_err(|e| e.to_string())?;
            let b = optimize(&scaled, &inst.folds, inst.metric, policy, DEFAULT_MEMORY_BUDGET).map_err(|e| e.to_string())?;
            if a.accuracy.rows() != b.accuracy.rows() {
                return Err(format!("{} policy={policy}: accuracy matrix changed", inst.label));
            }
            if a.report.best_k_per_fold != b.report.best_k_per_fold || a.report.k_star != b.report.k_star {
                return Err(format!(
                    "{} policy={policy}: best {:?}/{} became {:?}/{}",
                    inst.label, a.report.best_k_per_fold, a.report.k_star, b.report.best_k_per_fold, b.report.k_star
                ));
            }
        }
    }
    Ok("20 instances x 2 tie policies unchanged under x1000".into())
}

fn run_optimize(dir: &Path, tag: &str) -> Result<(Vec<u8>, Vec<u8>), String> {
    let report = dir.join(format!("{tag}.json"));
    let curve = dir.join(format!("{tag}.csv"));
    let out = Command::new(env!("CARGO_BIN_EXE_kscan"))
        .args(["optimize", "--synthetic", "600,3,3,0.9", "--folds", "5", "--seed", "1234", "--tie-policy"])
        .arg("shadow_min")
        .arg("--output")
        .arg(&report)
        .arg("--curve")
        .arg(&curve)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("run {tag} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let mut json: serde_json::Value =
        serde_json::from_slice(&fs::read(&report).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    json.as_object_mut().ok_or("report is not an object")?.remove("timing");
    let json = serde_json::to_vec_pretty(&json).map_err(|e| e.to_string())?;
    Ok((json, fs::read(&curve).map_err(|e| e.to_string())?))
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (json_a, csv_a) = run_optimize(dir.path(), "a")?;
    let (json_b, csv_b) = run_optimize(dir.path(), "b")?;
    if json_a != json_b {
        return Err("JSON reports differ outside timing".into());
    }
    if csv_a != csv_b {
        return Err("curve CSVs differ".into());
    }
    Ok(format!("two runs: {} JSON bytes and {} CSV bytes identical", json_a.len(), csv_a.len()))
}

fn criterion_8() -> Outcome {
    let documented: Vec<usize> = (1..=8).chain([10]).chain((100..=1500).step_by(100)).collect();
    let got = logarithmic_schedule(1500);
    if got.values() != documented.as_slice() {
        return Err(format!("logarithmic_schedule(1500) = {:?}", got.values()));
    }
    let prefix = [1, 2, 3, 4, 5, 6, 7, 8, 10, 100, 200];
    if !got.values().starts_with(&prefix) {
        return Err(format!("prefix {:?} missing", prefix));
    }
    for k_max in 1..=5000 {
        let v = logarithmic_schedule(k_max);
        let v = v.values();
        if v.first() != Some(&1) || v.last() != Some(&k_max) || v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("k_max={k_max}: {v:?}"));
        }
    }
    Ok(format!("{} values for k_max=1500; bounds hold for k_max in 1..=5000", got.values().len()))
}

fn main() {
    let instances = random_instances(120, 0xacce97);
    let criteria: Vec<Criterion> = vec![
        ("oracle equivalence", Box::new(|| criterion_1(&instances))),
        ("toy instance regression", Box::new(criterion_2)),
        ("speedup over naive-full at n=2000", Box::new(criterion_3)),
        ("complexity scaling 2000 -> 4000", Box::new(criterion_4)),
        ("mask and sort invariants", Box::new(|| criterion_5(&instances))),
        ("argmax invariance under scaling", Box::new(criterion_6)),
        ("determinism of reports and curves", Box::new(criterion_7)),
        ("logarithmic schedule", Box::new(criterion_8)),
    ];

    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("[{tag}] {} {name} ({secs:.1}s): {detail}", i + 1);
        failed += usize::from(outcome.is_err());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
