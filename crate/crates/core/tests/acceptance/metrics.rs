//! CMC and correspondence accuracy against direct enumeration.

use std::collections::BTreeMap;

use mvdesc::evaluation::{cmc_curve, correspondence_accuracy, default_thresholds, Candidates, FeaturePointSet, ShapeDescriptors};
use mvdesc::geometry::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Verdict;

struct Instance {
    shapes: Vec<ShapeDescriptors>,
    features: FeaturePointSet,
}

/// Descriptors on a coarse integer grid so that distance ties occur.
fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let n_shapes = rng.random_range(2..=5);
    let dim = rng.random_range(1..=3);
    let code = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.random_range(0..4) as f64).collect::<Vec<f64>>();
    let mut map = BTreeMap::new();
    let mut shapes = Vec::new();
    for s in 0..n_shapes {
        let n_points = rng.random_range(1..=50);
        let n_feat = rng.random_range(0..=n_points.min(8));
        let pos = |rng: &mut ChaCha8Rng| Vec3::new(rng.random(), rng.random(), rng.random());
        let samples: Vec<(Vec3, Vec<f64>)> = (0..n_points - n_feat).map(|_| (pos(rng), code(rng))).collect();
        let mut features = BTreeMap::new();
        let mut fmap = BTreeMap::new();
        for f in 0..8u32 {
            if features.len() < n_feat && rng.random_bool(0.7) {
                let p = pos(rng);
                features.insert(f, (p, code(rng)));
                fmap.insert(f, p);
            }
        }
        map.insert(s as u32 + 10, fmap);
        shapes.push(ShapeDescriptors { shape_id: s as u32 + 10, scale: rng.random_range(0.5..2.0), samples, features });
    }
    let symmetry: BTreeMap<u32, u32> = [(0, 1), (1, 0), (2, 3), (3, 2), (4, 4)].into_iter().collect();
    Instance { shapes, features: FeaturePointSet::new(map, symmetry).unwrap() }
}

/// One query per source feature present on the target: the sorted
/// candidate distances give the rank, the first strict minimum the
/// prediction. Returns `(rank, error)` per query.
fn enumerate(inst: &Instance, symmetric: bool, dense: bool) -> Vec<(usize, f64)> {
    let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut out = Vec::new();
    for src in &inst.shapes {
        for tgt in &inst.shapes {
            if src.shape_id == tgt.shape_id {
                continue;
            }
            let mut cands: Vec<(Vec3, &[f64])> = Vec::new();
            if dense {
                cands.extend(tgt.samples.iter().map(|(p, d)| (*p, d.as_slice())));
            }
            cands.extend(tgt.features.values().map(|(p, d)| (*p, d.as_slice())));
            for (fid, (_, q)) in &src.features {
                if !tgt.features.contains_key(fid) {
                    continue;
                }
                let mut truth = vec![*fid];
                if symmetric {
                    if let Some(&p) = inst.features.symmetry.get(fid) {
                        if p != *fid && tgt.features.contains_key(&p) {
                            truth.push(p);
                        }
                    }
                }
                let mut sorted: Vec<f64> = cands.iter().map(|c| d2(q, c.1)).collect();
                sorted.sort_by(f64::total_cmp);
                let rank = truth
                    .iter()
                    .map(|t| {
                        let gd = d2(q, &tgt.features[t].1);
                        sorted.iter().position(|&d| d == gd).unwrap() + 1
                    })
                    .min()
                    .unwrap();
                let mut best = 0;
                for i in 1..cands.len() {
                    if d2(q, cands[i].1) < d2(q, cands[best].1) {
                        best = i;
                    }
                }
                let err = truth
                    .iter()
                    .map(|t| (cands[best].0 - tgt.features[t].0).norm() / tgt.scale)
                    .fold(f64::INFINITY, f64::min);
                out.push((rank, err));
            }
        }
    }
    out
}

pub fn run() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(59);
    let thresholds = default_thresholds();
    let max_rank = 20;
    let (mut instances, mut curves, mut mismatches) = (0, 0, 0);
    while instances < 20 {
        let inst = instance(&mut rng);
        if enumerate(&inst, false, false).is_empty() {
            continue;
        }
        instances += 1;
        for symmetric in [false, true] {
            for cand in [Candidates::FeaturesOnly, Candidates::DenseAndFeatures] {
                let q = enumerate(&inst, symmetric, cand == Candidates::DenseAndFeatures);
                let n = q.len() as f64;
                let cmc: Vec<f64> = (1..=max_rank).map(|r| q.iter().filter(|x| x.0 <= r).count() as f64 / n).collect();
                let acc: Vec<f64> = thresholds.iter().map(|&t| q.iter().filter(|x| x.1 <= t).count() as f64 / n).collect();
                let got_cmc = cmc_curve(&inst.shapes, &inst.features, symmetric, cand, max_rank).unwrap();
                let got_acc = correspondence_accuracy(&inst.shapes, &inst.features, symmetric, cand, &thresholds).unwrap();
                curves += 2;
                mismatches += usize::from(got_cmc.y != cmc) + usize::from(got_acc.y != acc);
            }
        }
    }
    Verdict {
        pass: mismatches == 0,
        detail: format!("{instances} instances, {curves} curves compared exactly, {mismatches} mismatches"),
    }
}
