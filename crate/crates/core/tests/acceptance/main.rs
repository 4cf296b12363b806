//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p mvdesc --test acceptance`.

#[path = "../common/mod.rs"]
mod common;
mod determinism;
mod grad;
mod gradient;
mod kmedoids;
mod metrics;
mod registration;
mod toy;
mod visibility;

use std::time::Instant;

pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

fn report(name: &str, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = f();
    let secs = start.elapsed().as_secs_f64();
    println!("{} {name}: {} [{secs:.1}s]", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    v.pass
}

fn main() {
    let only: Option<String> = std::env::args().nth(1).filter(|a| !a.starts_with('-'));
    let criteria: Vec<(&str, fn() -> Verdict)> = vec![
        ("gradient-oracle", gradient::run),
        ("registration-monotonicity", registration::monotonicity),
        ("registration-recovery", registration::recovery),
        ("visibility-oracle", visibility::run),
        ("kmedoids-optimality", kmedoids::run),
        ("metric-oracles", metrics::run),
        ("toy-overfit", toy::overfit),
        ("view-count-trend", toy::view_count),
        ("determinism", determinism::run),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (name, f) in criteria {
        if only.as_deref().is_some_and(|o| !name.contains(o)) {
            continue;
        }
        ran += 1;
        if !report(name, f) {
            failed += 1;
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
}
