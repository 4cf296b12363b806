//! Two pipeline runs with the same seed, on different thread counts.

use std::collections::BTreeMap;
use std::path::Path;

use crate::common::run_pipeline;
use crate::Verdict;

fn outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for sub in ["desc", "eval"] {
        for e in std::fs::read_dir(dir.join(sub)).unwrap() {
            let p = e.unwrap().path();
            files.insert(format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap());
        }
    }
    files
}

pub fn run() -> Verdict {
    let runs: Vec<BTreeMap<String, Vec<u8>>> = [1, 3]
        .into_iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_pipeline(dir.path()));
            outputs(dir.path())
        })
        .collect();
    let (a, b) = (&runs[0], &runs[1]);
    let differing: Vec<&String> = a.keys().filter(|k| b.get(*k) != a.get(*k)).collect();
    let same_names = a.keys().eq(b.keys());
    Verdict {
        pass: same_names && differing.is_empty() && !a.is_empty(),
        detail: format!(
            "{} descriptor and curve files, {} differ{}",
            a.len(),
            differing.len() + usize::from(!same_names),
            differing.first().map(|f| format!(" (first {f})")).unwrap_or_default()
        ),
    }
}
