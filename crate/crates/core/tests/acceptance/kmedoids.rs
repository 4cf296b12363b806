//! K-medoids against exhaustive search on small direction sets.

use mvdesc::viewselect::{kmedoids_directions, ViewDirection};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::Verdict;

fn cost(dirs: &[ViewDirection], medoids: &[usize]) -> f64 {
    dirs.iter().map(|d| medoids.iter().map(|&m| d.angle(&dirs[m])).fold(f64::INFINITY, f64::min)).sum()
}

fn best_cost(dirs: &[ViewDirection], k: usize) -> f64 {
    fn rec(dirs: &[ViewDirection], k: usize, start: usize, chosen: &mut Vec<usize>, best: &mut f64) {
        if chosen.len() == k {
            *best = best.min(cost(dirs, chosen));
            return;
        }
        for i in start..dirs.len() {
            chosen.push(i);
            rec(dirs, k, i + 1, chosen, best);
            chosen.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(dirs, k, 0, &mut Vec::new(), &mut best);
    best
}

pub fn run() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let instances = 100;
    let mut worse = 0;
    let mut max_gap: f64 = 0.0;
    for _ in 0..instances {
        let k = rng.random_range(1..=3);
        let n = rng.random_range(k..=12);
        // clustered directions make ties and local optima more likely
        let centers: Vec<[f64; 3]> = (0..rng.random_range(1..=4)).map(|_| UnitSphere.sample(&mut rng)).collect();
        let dirs: Vec<ViewDirection> = (0..n)
            .map(|_| loop {
                let c = centers[rng.random_range(0..centers.len())];
                let j: [f64; 3] = UnitSphere.sample(&mut rng);
                let s = rng.random_range(0.0..0.8);
                let v = nalgebra::Vector3::new(c[0] + s * j[0], c[1] + s * j[1], c[2] + s * j[2]);
                if let Some(d) = ViewDirection::new(v) {
                    break d;
                }
            })
            .collect();
        let got = kmedoids_directions(&dirs, k, rng.random());
        let opt = best_cost(&dirs, k);
        let c = cost(&dirs, &got.medoids);
        assert!((c - got.cost).abs() <= 1e-9 * c.max(1.0), "reported cost {} vs {c}", got.cost);
        let gap = c - opt;
        max_gap = max_gap.max(gap);
        if gap > 1e-12 * opt.max(1.0) {
            worse += 1;
        }
    }
    Verdict {
        pass: worse == 0,
        detail: format!("{instances} instances (n <= 12, K <= 3): {worse} above the exhaustive optimum, largest gap {max_gap:.1e}"),
    }
}
