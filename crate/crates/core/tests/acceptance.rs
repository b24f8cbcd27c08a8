//! End-to-end acceptance run: every criterion at its full tolerance, one
//! status line each, then a single assertion over the whole set.

use std::collections::BTreeMap;
use std::path::Path;

use vines_core::scenarios::validation::{run_checks, CheckResult};
use vines_core::scenarios::{cmd_validate, RunConfig};

const SEED: u64 = 0;

/// Wall-time ceilings in seconds for the criteria that carry one.
fn budget(id: u8) -> Option<f64> {
    match id {
        1 => Some(1.0),
        2 => Some(60.0),
        9 => Some(120.0),
        10 => Some(1800.0),
        _ => None,
    }
}

fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "timing.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect()
}

/// Quick validation bundles written under one thread and under several must match byte for byte.
fn bundles_match() -> (bool, String) {
    let cfg = RunConfig::default();
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get().max(2));
    let run = |n: usize| {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| cmd_validate(&cfg, dir.path())).map(|_| ()).unwrap();
        artifacts(dir.path())
    };
    let (a, b) = (run(1), run(threads));
    let same = a == b;
    (same, format!("{} files, 1 vs {threads} threads identical: {same}", a.len()))
}

fn line(r: &CheckResult, ok: bool, note: &str) -> String {
    let tag = if ok { "PASS" } else { "FAIL" };
    format!("[{tag}] {:02} {} ({:.2}s): {}{note}", r.id, r.name, r.seconds, r.detail)
}

#[test]
fn acceptance_criteria() {
    let mut results = run_checks(true, SEED);
    println!();
    let mut failed = Vec::new();
    for r in &mut results {
        if r.id == 13 {
            let (same, detail) = bundles_match();
            r.passed &= same;
            r.detail = format!("{}; {detail}", r.detail);
        }
        let mut note = String::new();
        let mut ok = r.passed && !r.skipped;
        if let Some(limit) = budget(r.id) {
            if r.seconds > limit {
                ok = false;
                note = format!(" [over budget: {:.1}s > {limit}s]", r.seconds);
            }
        }
        println!("{}", line(r, ok, &note));
        if !ok {
            failed.push(r.id);
        }
    }
    assert_eq!(results.len(), 13);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
