//! Rasterized visibility against per-sample ray casting.

use mvdesc::geometry::raycast::ray_triangle;
use mvdesc::geometry::{area_weighted_sample, PointSample, TriangleMesh, Vec3};
use mvdesc::render::{render_index, Camera};
use mvdesc::synthetic::{box_mesh, uv_sphere};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::Verdict;

const CAMERAS: usize = 20;

/// Samples inside the image and depth range such that no other face
/// crosses the eye-to-sample ray more than the depth tolerance in front of
/// the sample. Every face is tested.
fn oracle(mesh: &TriangleMesh, samples: &[PointSample], cam: &Camera) -> Vec<u32> {
    let mut out = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let Some(p) = cam.project(&s.position) else { continue };
        if p.pixel(cam.resolution).is_none() || p.depth < cam.near || p.depth > cam.far {
            continue;
        }
        // hit depth is t·depth along the ray
        let limit = 1.0 - cam.depth_epsilon() / p.depth;
        let dir = s.position - cam.eye;
        let hidden = (0..mesh.face_count()).any(|f| {
            f != s.face_id as usize && ray_triangle(&cam.eye, &dir, &mesh.triangle(f)).is_some_and(|t| t > 0.0 && t < limit)
        });
        if !hidden {
            out.push(i as u32);
        }
    }
    out
}

fn tetrahedron(rng: &mut ChaCha8Rng) -> TriangleMesh {
    let v: Vec<Vec3> = (0..4).map(|_| Vec3::from(UnitSphere.sample(rng)) * rng.random_range(0.5..1.0)).collect();
    TriangleMesh::new(v, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]], None).unwrap()
}

fn random_camera(rng: &mut ChaCha8Rng) -> Camera {
    let dir = Vec3::from(UnitSphere.sample(rng));
    let eye = dir * rng.random_range(2.5..4.0);
    let target = Vec3::from(UnitSphere.sample(rng)) * 0.2;
    let up = if dir.z.abs() > 0.9 { Vec3::x() } else { Vec3::z() };
    Camera::new(eye, target, up, rng.random_range(30.0f64..60.0).to_radians(), 128, 0.1, 20.0).unwrap()
}

fn symmetric_difference(a: &[u32], b: &[u32]) -> usize {
    a.iter().filter(|x| b.binary_search(x).is_err()).count() + b.iter().filter(|x| a.binary_search(x).is_err()).count()
}

pub fn run() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let sphere = uv_sphere(11, 25, 1.0);
    assert_eq!(sphere.face_count(), 500);
    let sphere_samples = area_weighted_sample(&sphere, 2000, 5).unwrap();
    let mut convex_mismatch = 0;
    let mut convex_checked = 0;
    let mut worst_sphere: f64 = 0.0;
    for _ in 0..CAMERAS {
        let cam = random_camera(&mut rng);
        let half = Vec3::new(rng.random_range(0.3..0.9), rng.random_range(0.3..0.9), rng.random_range(0.3..0.9));
        for mesh in [box_mesh(Vec3::zeros(), half, false), tetrahedron(&mut rng)] {
            let samples = area_weighted_sample(&mesh, 1000, rng.random()).unwrap();
            let got = render_index(&mesh, &samples, &cam);
            convex_mismatch += symmetric_difference(got.visible(), &oracle(&mesh, &samples, &cam));
            convex_checked += samples.len();
        }
        let got = render_index(&sphere, &sphere_samples, &cam);
        let want = oracle(&sphere, &sphere_samples, &cam);
        let frac = symmetric_difference(got.visible(), &want) as f64 / want.len().max(1) as f64;
        worst_sphere = worst_sphere.max(frac);
    }
    Verdict {
        pass: convex_mismatch == 0 && worst_sphere <= 0.02,
        detail: format!(
            "{CAMERAS} cameras: convex meshes {convex_mismatch} mismatches in {convex_checked} samples (need 0); \
             500-face sphere worst symmetric difference {:.2}% (need <= 2%)",
            100.0 * worst_sphere
        ),
    }
}
