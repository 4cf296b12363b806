use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mesh::closest_point_on_triangle;
use super::{GeometryError, TriangleMesh, Vec3};

/// A point on a mesh surface with the face it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSample {
    pub position: Vec3,
    pub normal: Vec3,
    pub face_id: u32,
    pub label: Option<u32>,
}

/// Draws `n` points uniformly by area. Deterministic for a fixed seed.
pub fn area_weighted_sample(
    mesh: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<Vec<PointSample>, GeometryError> {
    let mut cumulative = Vec::with_capacity(mesh.face_count());
    let mut total = 0.0;
    for f in 0..mesh.face_count() {
        if !mesh.is_degenerate(f) {
            total += mesh.face_area(f);
        }
        cumulative.push(total);
    }
    if total <= 0.0 {
        return Err(GeometryError::AllDegenerate);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * total;
        // first face whose cumulative area exceeds u; degenerate faces add
        // nothing to the running sum so they can never be the strict winner
        let mut face = cumulative.partition_point(|&c| c <= u);
        if face >= cumulative.len() {
            face = cumulative.len() - 1;
        }
        while mesh.is_degenerate(face) {
            face -= 1;
        }
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let s = r1.sqrt();
        let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
        let [a, b, c] = mesh.triangle(face);
        samples.push(PointSample {
            position: a * wa + b * wb + c * wc,
            normal: mesh.face_normal(face),
            face_id: face as u32,
            label: mesh.face_label(face),
        });
    }
    Ok(samples)
}

/// Projects an arbitrary point onto the closest non-degenerate face.
pub fn closest_surface_point(mesh: &TriangleMesh, p: &Vec3) -> Result<PointSample, GeometryError> {
    let mut best: Option<(f64, usize, Vec3)> = None;
    for f in 0..mesh.face_count() {
        if mesh.is_degenerate(f) {
            continue;
        }
        let [a, b, c] = mesh.triangle(f);
        let q = closest_point_on_triangle(p, &a, &b, &c);
        let d = (q - p).norm_squared();
        if best.is_none_or(|(bd, _, _)| d < bd) {
            best = Some((d, f, q));
        }
    }
    let (_, f, q) = best.ok_or(GeometryError::AllDegenerate)?;
    Ok(PointSample {
        position: q,
        normal: mesh.face_normal(f),
        face_id: f as u32,
        label: mesh.face_label(f),
    })
}
