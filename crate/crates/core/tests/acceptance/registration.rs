//! ICP energy monotonicity and smooth-warp recovery.

use mvdesc::geometry::{area_weighted_sample, TriangleMesh, Vec3};
use mvdesc::registration::{icp_register, RegistrationParams};
use mvdesc::synthetic::{box_mesh, uv_sphere, SmoothWarp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Verdict;

const PAIRS: usize = 50;
const SLACK: f64 = 1e-9;

/// A box or an ellipsoid with random proportions, and its diagonal.
fn primitive(rng: &mut ChaCha8Rng) -> (TriangleMesh, f64) {
    let half = Vec3::new(rng.random_range(0.2..0.6), rng.random_range(0.1..0.4), rng.random_range(0.05..0.3));
    let mesh = if rng.random_bool(0.5) {
        box_mesh(Vec3::zeros(), half, false)
    } else {
        let s = uv_sphere(10, 16, 1.0);
        let scale = nalgebra::Matrix3::from_diagonal(&half);
        s.transformed(&scale, &Vec3::zeros())
    };
    let (lo, hi) = mesh.aabb().unwrap();
    (mesh, (hi - lo).norm())
}

fn positions(mesh: &TriangleMesh, n: usize, seed: u64) -> Vec<Vec3> {
    area_weighted_sample(mesh, n, seed).unwrap().iter().map(|s| s.position).collect()
}

pub fn monotonicity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut iterations = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut bad = Vec::new();
    for pair in 0..PAIRS {
        let (mesh, diag) = primitive(&mut rng);
        let na = rng.random_range(200..=2000);
        let nb = rng.random_range(200..=2000);
        let a = positions(&mesh, na, rng.random());
        let warp = SmoothWarp::random(rng.random_range(0.0..0.1) * diag, rng.random_range(0.2..1.5) / diag, rng.random());
        let b: Vec<Vec3> = positions(&mesh, nb, rng.random()).iter().map(|p| warp.apply(p)).collect();
        // both the warmed-up schedule and a single stage from zero offsets
        for warmup in [RegistrationParams::default().warmup, Vec::new()] {
            let params = RegistrationParams { warmup, ..RegistrationParams::default() };
            let r = icp_register(&a, &b, &params).unwrap();
            for w in r.reports.windows(2) {
                iterations += 1;
                let rise = (w[1].total - w[0].total) / w[0].total.max(f64::MIN_POSITIVE);
                worst = worst.max(rise);
                if w[1].total > w[0].total * (1.0 + SLACK) {
                    bad.push((pair, w[1].iteration, rise));
                }
            }
        }
    }
    Verdict {
        pass: bad.is_empty(),
        detail: format!(
            "{PAIRS} pairs, {iterations} iterations, largest relative rise {worst:.2e} (slack {SLACK:.0e}), {} violations{}",
            bad.len(),
            bad.first().map(|b| format!(", first at pair {} iteration {}", b.0, b.1)).unwrap_or_default()
        ),
    }
}

pub fn recovery() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let (mut good, mut total) = (0usize, 0usize);
    let mut worst = 1.0f64;
    let cases = 20;
    for _ in 0..cases {
        let (mesh, diag) = primitive(&mut rng);
        let a = positions(&mesh, rng.random_range(500..=1500), rng.random());
        let amp = rng.random_range(0.005..=0.05) * diag;
        let warp = SmoothWarp::random(amp, rng.random_range(0.25..0.75) / diag, rng.random());
        // the truth: point i of A corresponds to point i of B
        let b: Vec<Vec3> = a.iter().map(|p| warp.apply(p)).collect();
        let r = icp_register(&a, &b, &RegistrationParams::default()).unwrap();
        let ok = r.matches_ab.iter().enumerate().filter(|&(i, &j)| (b[j] - b[i]).norm() <= 0.02 * diag).count();
        worst = worst.min(ok as f64 / a.len() as f64);
        good += ok;
        total += a.len();
    }
    let frac = good as f64 / total as f64;
    Verdict {
        pass: frac >= 0.95,
        detail: format!("{:.2}% of {total} correspondences within 0.02 diag over {cases} warps (worst case {:.2}%), need 95%", 100.0 * frac, 100.0 * worst),
    }
}
