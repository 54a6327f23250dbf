//! Acceptance suite. Each test prints one status line:
//!
//! ```text
//! cargo test -p xstrat --release --test acceptance -- --nocapture --test-threads 1
//! ```
//!
//! Criteria that reproduce published EURLex-4K / Wiki10-31K numbers need the
//! repository files. Point `XSTRAT_EURLEX_DIR` (and optionally
//! `XSTRAT_WIKI10_DIR`) at a directory holding the train/test pair
//! (`train.txt`/`test.txt`, or `<name>_train.txt`/`<name>_test.txt`).
//! Without them those criteria print `SKIP` and do not fail.

mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xstrat::baseline::random_split_seeded;
use xstrat::dataset::{count_labels, Dataset, LabelCounts, LabelId, Partition, SplitAssignment};
use xstrat::ingest::{read_provided_split, write_assignment_index};
use xstrat::metrics::{
    dataset_stats, histogram_from_counts, kl_from_counts, missing_label_fraction,
    smoothed_reverse_kl, DEFAULT_SMOOTHING, DEFAULT_TAIL_THRESHOLD,
};
use xstrat::sampler::{label_score, label_scores};
use xstrat::{stratified_split, synthetic, SamplerConfig};

fn status(id: &str, name: &str, pass: bool, detail: &str) {
    println!(
        "[{}] {id} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn skip(id: &str, name: &str, why: &str) {
    println!("[SKIP] {id} {name}: {why}");
}

fn find_pair(var: &str, prefix: &str) -> Option<(PathBuf, PathBuf)> {
    let dir = PathBuf::from(std::env::var_os(var)?);
    let candidates = [
        ("train.txt".to_string(), "test.txt".to_string()),
        (format!("{prefix}_train.txt"), format!("{prefix}_test.txt")),
    ];
    candidates.into_iter().find_map(|(a, b)| {
        let (a, b) = (dir.join(a), dir.join(b));
        (a.is_file() && b.is_file()).then_some((a, b))
    })
}

fn load_pair(paths: &(PathBuf, PathBuf)) -> (Dataset, SplitAssignment) {
    read_provided_split(Path::new(&paths.0), Path::new(&paths.1)).expect("readable repository files")
}

fn eurlex() -> Option<(Dataset, SplitAssignment)> {
    find_pair("XSTRAT_EURLEX_DIR", "eurlex").map(|p| load_pair(&p))
}

const EURLEX_MISSING: &str = "XSTRAT_EURLEX_DIR not set or train/test files not found";

#[test]
fn c1_formula_fidelity() {
    let a = label_score(0.6, 0.2);
    let b = label_score(0.05, 0.2);
    let pass = (a - 0.5).abs() <= 1e-12 && (b + 0.75).abs() <= 1e-12;
    status(
        "C1",
        "formula fidelity",
        pass,
        &format!("(0.2, 0.6) -> {a}, (0.2, 0.05) -> {b}"),
    );
    assert!(pass);
}

#[test]
fn c2_missing_label_reproduction() {
    let name = "missing-label reproduction";
    let Some(paths) = find_pair("XSTRAT_EURLEX_DIR", "eurlex") else {
        return skip("C2", name, EURLEX_MISSING);
    };
    let started = Instant::now();
    let (d, split) = load_pair(&paths);
    let counts = count_labels(&d, &split).unwrap();
    let pct = 100.0 * missing_label_fraction(&counts, Partition::Test);
    let elapsed = started.elapsed();
    let pass = (pct - 32.4).abs() <= 0.05 && elapsed < Duration::from_secs(10);
    status(
        "C2",
        name,
        pass,
        &format!("EURLex-4K missing_from_test {pct:.3}% (32.4 +/- 0.05), {elapsed:.2?}"),
    );
    let mut all = pass;
    if let Some(paths) = find_pair("XSTRAT_WIKI10_DIR", "wiki10") {
        let (d, split) = load_pair(&paths);
        let pct = 100.0 * missing_label_fraction(&count_labels(&d, &split).unwrap(), Partition::Test);
        let pass = (pct - 28.7).abs() <= 0.05;
        status("C2", "missing-label reproduction (Wiki10-31K)", pass, &format!("{pct:.3}% (28.7 +/- 0.05)"));
        all &= pass;
    }
    assert!(all);
}

#[test]
fn c3_dataset_stats_reproduction() {
    let name = "dataset-stats reproduction";
    let Some((d, split)) = eurlex() else {
        return skip("C3", name, EURLEX_MISSING);
    };
    let s = dataset_stats(&d, &split, DEFAULT_TAIL_THRESHOLD).unwrap();
    let pass = s.num_labels == 3993
        && s.num_train == 15_539
        && s.num_test == 3_809
        && (s.avg_labels_per_sample - 5.31).abs() <= 0.01
        && (s.avg_samples_per_label - 25.73).abs() <= 0.01
        && (100.0 * s.tail_label_fraction - 59.0).abs() <= 1.0;
    status("C3", name, pass, &format!("{s:?}"));
    assert!(pass);
}

#[test]
fn c4_kl_calibration() {
    let name = "KL calibration";
    let Some((d, split)) = eurlex() else {
        return skip("C4", name, EURLEX_MISSING);
    };
    let counts = count_labels(&d, &split).unwrap();
    let kl = kl_from_counts(&counts).unwrap();
    let alt = smoothed_reverse_kl(&counts, DEFAULT_SMOOTHING).unwrap();
    let rel = (kl - 0.602).abs() / 0.602;
    if rel <= 0.10 {
        status("C4", name, true, &format!("KL(test||full) {kl:.4} vs 0.602 ({:.1}% off)", rel * 100.0));
    } else {
        // Outside the band the discrepancy is recorded rather than failed.
        println!(
            "[RECORDED] C4 {name}: KL(test||full) {kl:.4} vs 0.602 ({:.1}% off); smoothed KL(full||test) {alt:.4}",
            rel * 100.0
        );
    }
}

struct Comparison {
    seed: u64,
    strat_kl: f64,
    strat_missing: f64,
    random_kl: f64,
    random_missing: f64,
    strat_time: Duration,
}

fn compare_on(d: &Dataset, seeds: std::ops::Range<u64>, target: f64) -> Vec<Comparison> {
    seeds
        .map(|seed| {
            let started = Instant::now();
            let strat = stratified_split(d, &SamplerConfig::new(target, seed)).unwrap();
            let strat_time = started.elapsed();
            let random = random_split_seeded(d.num_points(), target, seed).unwrap();
            let sc = count_labels(d, &strat.assignment).unwrap();
            let rc = count_labels(d, &random).unwrap();
            Comparison {
                seed,
                strat_kl: kl_from_counts(&sc).unwrap(),
                strat_missing: missing_label_fraction(&sc, Partition::Test),
                random_kl: kl_from_counts(&rc).unwrap(),
                random_missing: missing_label_fraction(&rc, Partition::Test),
                strat_time,
            }
        })
        .collect()
}

fn print_comparisons(rows: &[Comparison]) {
    for r in rows {
        println!(
            "       seed {}: stratified KL {:.4} missing {:.1}% ({:.2?}) | random KL {:.4} missing {:.1}%",
            r.seed,
            r.strat_kl,
            100.0 * r.strat_missing,
            r.strat_time,
            r.random_kl,
            100.0 * r.random_missing
        );
    }
}

#[test]
fn c5_end_to_end_ordering() {
    let name = "end-to-end ordering";
    let ordered = |rows: &[Comparison]| {
        rows.iter()
            .all(|r| r.strat_kl < r.random_kl && r.strat_missing < r.random_missing)
    };

    // The ordering claim exercised on long-tailed synthetic data of the same
    // shape; the published target region is only checked on the real files.
    let surrogate = synthetic::eurlex_like(4).unwrap();
    let rows = compare_on(&surrogate, 0..5, 0.2);
    let surrogate_pass = ordered(&rows);
    status("C5", "end-to-end ordering (synthetic EURLex-shaped data)", surrogate_pass, "5 seeds");
    print_comparisons(&rows);

    let Some((d, _)) = eurlex() else {
        skip("C5", name, EURLEX_MISSING);
        assert!(surrogate_pass);
        return;
    };
    let rows = compare_on(&d, 0..5, 0.2);
    let pass = ordered(&rows)
        && rows
            .iter()
            .all(|r| r.strat_missing <= 0.15 && r.strat_time <= Duration::from_secs(120));
    status("C5", name, pass, "EURLex-4K, 5 seeds, missing <= 15%, <= 2 min");
    print_comparisons(&rows);
    assert!(pass && surrogate_pass);
}

#[test]
fn c6_classical_stratification_reduction() {
    let target = 0.2;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for dataset_seed in 0..20u64 {
        let classes = 2 + (dataset_seed as usize % 9);
        let d = synthetic::single_label(1000, classes, dataset_seed).unwrap();
        for seed in 0..3u64 {
            let split = stratified_split(&d, &SamplerConfig::new(target, seed)).unwrap();
            let counts = count_labels(&d, &split.assignment).unwrap();
            let dev = (0..classes)
                .map(|c| (counts.test_proportion(c).unwrap() - target).abs())
                .fold(0.0, f64::max);
            worst = worst.max(dev);
            if dev > 0.02 {
                failures.push(format!("data {dataset_seed} ({classes} classes) seed {seed}: {dev:.4}"));
            }
        }
    }
    let pass = failures.is_empty();
    status(
        "C6",
        "classical-stratification reduction",
        pass,
        &format!("60 runs, worst |atp - 0.2| = {worst:.4}, {} over 0.02", failures.len()),
    );
    for f in &failures {
        println!("       {f}");
    }
    assert!(pass);
}

fn index_under_threads(d: &Dataset, config: &SamplerConfig, threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    pool.install(|| write_assignment_index(&stratified_split(d, config).unwrap().assignment))
}

#[test]
fn c7_determinism_across_thread_counts() {
    let name = "determinism";
    let check = |d: &Dataset| {
        let config = SamplerConfig::new(0.2, 42);
        let reference = index_under_threads(d, &config, 1);
        [2, 8].iter().all(|&t| index_under_threads(d, &config, t) == reference)
    };
    let surrogate_pass = check(&synthetic::eurlex_like(42).unwrap());
    status("C7", "determinism (synthetic EURLex-shaped data)", surrogate_pass, "threads 1, 2, 8");
    let Some((d, _)) = eurlex() else {
        skip("C7", name, EURLEX_MISSING);
        assert!(surrogate_pass);
        return;
    };
    let pass = check(&d);
    status("C7", name, pass, "EURLex-4K, threads 1, 2, 8, identical index bytes");
    assert!(pass && surrogate_pass);
}

#[test]
fn c8_baseline_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    for case in 0..20u64 {
        let (d, t) = common::random_instance(&mut rng);
        assert!(d.num_points() <= 12 && d.num_labels() <= 4);
        // Budget conservation is asserted inside the observer at every step.
        let (split, steps) = common::checked_iterative(&d, t, case);
        if steps != d.num_points()
            || split.as_slice() != common::reference_iterative(&d, t, case).as_slice()
        {
            mismatches += 1;
        }
    }
    let pass = mismatches == 0;
    status("C8", "baseline oracle", pass, &format!("20 instances, {mismatches} mismatches"));
    assert!(pass);
}

#[test]
fn c9_metric_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut violations = 0usize;
    let cases = 10_000;
    for _ in 0..cases {
        let num_labels = rng.random_range(1..=12);
        let n = rng.random_range(1..=60);
        let sets: Vec<Vec<LabelId>> = (0..n)
            .map(|_| {
                let k = rng.random_range(0..=4);
                (0..k).map(|_| rng.random_range(0..num_labels as LabelId)).collect()
            })
            .collect();
        let d = Dataset::from_label_sets(num_labels, sets).unwrap();
        let p = rng.random::<f64>();
        let a = SplitAssignment::new(
            (0..n)
                .map(|_| if rng.random_bool(p) { Partition::Test } else { Partition::Train })
                .collect(),
            None,
        );
        let c: LabelCounts = count_labels(&d, &a).unwrap();
        if (0..num_labels).any(|l| c.train_count[l] + c.test_count[l] != d.label_frequency()[l]) {
            violations += 1;
        }
        if let Ok(kl) = kl_from_counts(&c) {
            if !(kl >= 0.0) {
                violations += 1;
            }
        }
        let h = histogram_from_counts(&c, 10, 10, a.test_fraction()).unwrap();
        if h.total_count() != d.num_present_labels() {
            violations += 1;
        }
        let target = rng.random_range(0.01..0.99);
        if label_scores(&c, target).iter().any(|s| !(-1.0..=1.0).contains(s)) {
            violations += 1;
        }
    }
    let pass = violations == 0;
    status("C9", "metric properties", pass, &format!("{cases} fuzz cases, {violations} violations"));
    assert!(pass);
}
