//! Alternating K-medoids with farthest-first seeding and a swap polish.
//!
//! Several seedings are tried (greedy build, farthest-first from many start
//! points and, for small inputs, random subsets); each is refined by
//! alternating assignment/medoid updates and then by best-improvement swaps.
//! The cheapest result wins, ties going to the lexicographically smaller set.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ViewDirection;

/// Result of a K-medoids run. `medoids` are indices into the input, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct KMedoids {
    pub medoids: Vec<usize>,
    /// Sum over points of the distance to their nearest medoid.
    pub cost: f64,
    /// Cost after every assignment step of the winning run.
    pub history: Vec<f64>,
    pub iterations: usize,
}

const MAX_ITERS: usize = 100;
/// Inputs up to this size try every point as the first seed.
const ALL_STARTS: usize = 128;
const RANDOM_STARTS: usize = 16;
/// Inputs up to this size polish every start, not only the best.
const POLISH_ALL: usize = 32;

/// Clusters directions under angular distance. Requires `1 <= k <= dirs.len()`.
pub fn kmedoids_directions(dirs: &[ViewDirection], k: usize, seed: u64) -> KMedoids {
    let n = dirs.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let a = dirs[i].angle(&dirs[j]);
            dist[i * n + j] = a;
            dist[j * n + i] = a;
        }
    }
    kmedoids(&dist, n, k, seed)
}

/// K-medoids over a dense symmetric `n × n` distance matrix.
pub fn kmedoids(dist: &[f64], n: usize, k: usize, seed: u64) -> KMedoids {
    assert!(k >= 1 && k <= n, "need 1 <= k <= n");
    assert_eq!(dist.len(), n * n);
    let starts: Vec<usize> = if n <= ALL_STARTS {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s: Vec<usize> = sample(&mut rng, n, RANDOM_STARTS).into_vec();
        s.sort_unstable();
        s
    };
    let mut best: Option<KMedoids> = None;
    // small inputs also restart from random subsets
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let random_inits: Vec<Vec<usize>> = if n <= POLISH_ALL {
        (0..RANDOM_STARTS).map(|_| sample(&mut rng, n, k).into_vec()).collect()
    } else {
        Vec::new()
    };
    let seedings = std::iter::once(greedy_build(dist, n, k))
        .chain(starts.iter().map(|&s| farthest_first(dist, n, k, s)))
        .chain(random_inits);
    for init in seedings {
        let mut run = alternate(dist, n, init);
        if n <= POLISH_ALL {
            polish(dist, n, &mut run);
        }
        if better(&run, best.as_ref()) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one start");
    if n > POLISH_ALL {
        polish(dist, n, &mut best);
    }
    best.medoids.sort_unstable();
    best
}

fn better(a: &KMedoids, b: Option<&KMedoids>) -> bool {
    let Some(b) = b else { return true };
    let tol = 1e-12 * b.cost.max(1.0);
    if a.cost < b.cost - tol {
        return true;
    }
    if a.cost > b.cost + tol {
        return false;
    }
    let mut sa = a.medoids.clone();
    let mut sb = b.medoids.clone();
    sa.sort_unstable();
    sb.sort_unstable();
    sa < sb
}

/// Greedy seeding: each new medoid is the one that lowers the cost most.
fn greedy_build(dist: &[f64], n: usize, k: usize) -> Vec<usize> {
    let mut medoids = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; n];
    while medoids.len() < k {
        let mut pick = 0;
        let mut pick_cost = f64::INFINITY;
        for c in (0..n).filter(|c| !medoids.contains(c)) {
            let cost: f64 = (0..n).map(|i| nearest[i].min(dist[i * n + c])).sum();
            if cost < pick_cost {
                pick = c;
                pick_cost = cost;
            }
        }
        medoids.push(pick);
        for i in 0..n {
            nearest[i] = nearest[i].min(dist[i * n + pick]);
        }
    }
    medoids
}

fn farthest_first(dist: &[f64], n: usize, k: usize, first: usize) -> Vec<usize> {
    let mut medoids = vec![first];
    let mut nearest: Vec<f64> = (0..n).map(|i| dist[i * n + first]).collect();
    while medoids.len() < k {
        let mut pick = None;
        let mut far = -1.0;
        for i in 0..n {
            if !medoids.contains(&i) && nearest[i] > far {
                far = nearest[i];
                pick = Some(i);
            }
        }
        let p = pick.expect("k <= n");
        medoids.push(p);
        for i in 0..n {
            nearest[i] = nearest[i].min(dist[i * n + p]);
        }
    }
    medoids
}

/// Nearest medoid slot per point; ties go to the lower point index.
fn assign(dist: &[f64], n: usize, medoids: &[usize]) -> (Vec<usize>, f64) {
    let mut cost = 0.0;
    let labels = (0..n)
        .map(|i| {
            let mut best = 0;
            for m in 1..medoids.len() {
                let (d, bd) = (dist[i * n + medoids[m]], dist[i * n + medoids[best]]);
                if d < bd || (d == bd && medoids[m] < medoids[best]) {
                    best = m;
                }
            }
            cost += dist[i * n + medoids[best]];
            best
        })
        .collect();
    (labels, cost)
}

fn total_cost(dist: &[f64], n: usize, medoids: &[usize]) -> f64 {
    (0..n)
        .map(|i| medoids.iter().map(|&m| dist[i * n + m]).fold(f64::INFINITY, f64::min))
        .sum()
}

fn alternate(dist: &[f64], n: usize, mut medoids: Vec<usize>) -> KMedoids {
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let (labels, cost) = assign(dist, n, &medoids);
        history.push(cost);
        iterations += 1;
        if iterations >= MAX_ITERS {
            return KMedoids { medoids, cost, history, iterations };
        }
        let mut next = medoids.clone();
        for (slot, m) in next.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == slot).collect();
            let within = |c: usize| members.iter().map(|&i| dist[c * n + i]).sum::<f64>();
            let mut best = *m;
            let mut best_cost = within(*m);
            for &c in &members {
                let cc = within(c);
                if cc < best_cost || (cc == best_cost && c < best) {
                    best = c;
                    best_cost = cc;
                }
            }
            *m = best;
        }
        if next == medoids {
            return KMedoids { medoids, cost, history, iterations };
        }
        medoids = next;
    }
}

/// Best-improvement single swaps until no swap lowers the cost.
fn polish(dist: &[f64], n: usize, run: &mut KMedoids) {
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        let mut trial = run.medoids.clone();
        for slot in 0..trial.len() {
            let orig = trial[slot];
            for h in 0..n {
                if run.medoids.contains(&h) {
                    continue;
                }
                trial[slot] = h;
                let c = total_cost(dist, n, &trial);
                if c < best.map_or(run.cost, |b| b.2) - 1e-12 * run.cost.max(1.0) {
                    best = Some((slot, h, c));
                }
            }
            trial[slot] = orig;
        }
        let Some((slot, h, c)) = best else { return };
        run.medoids[slot] = h;
        run.cost = c;
        run.history.push(c);
        run.iterations += 1;
    }
}
