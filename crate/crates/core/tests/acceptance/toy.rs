//! Toy two-class experiment: one training run shared by the overfit and
//! view-count criteria.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

use mvdesc::evaluation::Candidates;
use mvdesc::experiment::{build_toy_data, embed_test_shapes, evaluate_toy, train_toy, view_subset, ToyConfig, ToyData};
use mvdesc::network::{descriptor_distance, DescriptorModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Verdict;

const MAX_RANK: usize = 10;

struct ToyRun {
    data: ToyData,
    model: DescriptorModel,
    losses: Vec<f64>,
    seconds: f64,
}

fn shared() -> &'static Result<ToyRun, String> {
    static RUN: OnceLock<Result<ToyRun, String>> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let cfg = ToyConfig::default();
        let data = build_toy_data(&cfg).map_err(|e| e.to_string())?;
        let out = train_toy(&cfg, &data, |_, _| {}).map_err(|e| e.to_string())?;
        Ok(ToyRun {
            data,
            model: out.model,
            losses: out.losses,
            seconds: start.elapsed().as_secs_f64(),
        })
    })
}

fn rank1(run: &ToyRun, view_ids: Option<&[u32]>, candidates: Candidates) -> Result<(f64, f64), String> {
    let descs = embed_test_shapes(&run.model, &run.data, view_ids).map_err(|e| e.to_string())?;
    let c = evaluate_toy(&run.data, &descs, candidates, MAX_RANK).map_err(|e| e.to_string())?;
    Ok((c.cmc_sym.y[0], c.cmc_nonsym.y[0]))
}

/// Mean over training correspondences of the fraction of random sample
/// pairs that lie farther apart in descriptor space.
fn positive_percentile(run: &ToyRun) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let train = &run.data.train;
    let has = |s: u32, i: u32| train[s as usize].stacks[i as usize].is_some();
    let usable: Vec<_> = run
        .data
        .correspondences
        .pairs
        .iter()
        .filter(|c| has(c.shape_a, c.index_a) && has(c.shape_b, c.index_b))
        .collect();
    if usable.is_empty() {
        return Err("no usable training correspondence".into());
    }
    let positives: Vec<((u32, u32), (u32, u32))> = (0..1000)
        .map(|_| {
            let c = usable[rng.random_range(0..usable.len())];
            ((c.shape_a, c.index_a), (c.shape_b, c.index_b))
        })
        .collect();
    let mut random_point = || loop {
        let s = rng.random_range(0..train.len());
        let i = rng.random_range(0..train[s].stacks.len());
        if train[s].stacks[i].is_some() {
            return (s as u32, i as u32);
        }
    };
    let randoms: Vec<_> = (0..1000).map(|_| (random_point(), random_point())).collect();
    let mut cache: BTreeMap<(u32, u32), Vec<f64>> = BTreeMap::new();
    let mut desc = |k: (u32, u32)| -> Result<Vec<f64>, String> {
        if let Some(d) = cache.get(&k) {
            return Ok(d.clone());
        }
        let stack = train[k.0 as usize].stacks[k.1 as usize].as_ref().unwrap();
        let d = run.model.embed_stack(stack).map_err(|e| e.to_string())?;
        cache.insert(k, d.clone());
        Ok(d)
    };
    let mut far = Vec::with_capacity(randoms.len());
    for (a, b) in randoms {
        far.push(descriptor_distance(&desc(a)?, &desc(b)?));
    }
    far.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for &(a, b) in &positives {
        let d = descriptor_distance(&desc(a)?, &desc(b)?);
        let closer = far.len() - far.partition_point(|&r| r <= d);
        total += closer as f64 / far.len() as f64;
    }
    Ok(total / positives.len() as f64)
}

pub fn overfit() -> Verdict {
    let run = match shared() {
        Ok(r) => r,
        Err(e) => return Verdict { pass: false, detail: e.clone() },
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let n = run.losses.len();
    let ratio = mean(&run.losses[n - 10..]) / mean(&run.losses[..10]);
    let (sym, nonsym) = match rank1(run, None, Candidates::FeaturesOnly) {
        Ok(v) => v,
        Err(e) => return Verdict { pass: false, detail: e },
    };
    let (dense_sym, _) = rank1(run, None, Candidates::DenseAndFeatures).unwrap_or((f64::NAN, f64::NAN));
    let pct = match positive_percentile(run) {
        Ok(v) => v,
        Err(e) => return Verdict { pass: false, detail: e },
    };
    Verdict {
        pass: sym >= 0.8 && ratio < 0.2 && pct >= 0.95,
        detail: format!(
            "{} train / {} test shapes, {n} iterations: rank-1 CMC symmetric {:.1}% (>= 80%), non-symmetric {:.1}%, \
             with dense candidates {:.1}%; loss ratio {ratio:.3} (< 0.2); positive pairs closer than {:.1}% of random pairs \
             (>= 95%); build and training {:.0}s on {} threads",
            run.data.train.len(),
            run.data.test.len(),
            100.0 * sym,
            100.0 * nonsym,
            100.0 * dense_sym,
            100.0 * pct,
            run.seconds,
            rayon::current_num_threads(),
        ),
    }
}

pub fn view_count() -> Verdict {
    let run = match shared() {
        Ok(r) => r,
        Err(e) => return Verdict { pass: false, detail: e.clone() },
    };
    let view = &ToyConfig::default().view;
    let nine = view_subset(view, &(0..view.radii.len()).collect::<Vec<_>>());
    let three = view_subset(view, &[view.radii.len() / 2]);
    let mut scores = Vec::new();
    for ids in [None, Some(nine.as_slice()), Some(three.as_slice())] {
        match rank1(run, ids, Candidates::FeaturesOnly) {
            Ok((sym, _)) => scores.push(sym),
            Err(e) => return Verdict { pass: false, detail: e },
        }
    }
    let (all, nine_s, three_s) = (scores[0], scores[1], scores[2]);
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Verdict {
        pass: nine_s >= three_s && best - all <= 0.05,
        detail: format!(
            "rank-1 CMC symmetric: {} views {:.1}%, {} views {:.1}%, {} views {:.1}% \
             ({}-view >= {}-view, full stack within 5 points of the best)",
            view.n_medoids * view.radii.len() * view.n_inplane,
            100.0 * all,
            nine.len(),
            100.0 * nine_s,
            three.len(),
            100.0 * three_s,
            nine.len(),
            three.len(),
        ),
    }
}
