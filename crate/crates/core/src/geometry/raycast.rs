use super::{TriangleMesh, Vec3};

/// Ray/triangle intersection (Möller–Trumbore), two-sided. Returns the ray
/// parameter `t` of the hit.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

/// Whether the open segment `from -> to` crosses any face other than `skip`.
///
/// Hits within `rel_eps` of either end (as a fraction of the segment) are
/// ignored so that a point lying on the surface does not occlude itself
/// through adjacent faces.
pub fn segment_blocked(
    mesh: &TriangleMesh,
    from: &Vec3,
    to: &Vec3,
    skip: Option<usize>,
    rel_eps: f64,
) -> bool {
    let dir = to - from;
    (0..mesh.face_count()).any(|f| {
        if Some(f) == skip || mesh.is_degenerate(f) {
            return false;
        }
        ray_triangle(from, &dir, &mesh.triangle(f))
            .is_some_and(|t| t > rel_eps && t < 1.0 - rel_eps)
    })
}

/// Nearest face hit along a ray with `t > t_min`.
pub fn first_hit(mesh: &TriangleMesh, origin: &Vec3, dir: &Vec3, t_min: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for f in 0..mesh.face_count() {
        if mesh.is_degenerate(f) {
            continue;
        }
        if let Some(t) = ray_triangle(origin, dir, &mesh.triangle(f)) {
            if t > t_min && best.is_none_or(|(_, bt)| t < bt) {
                best = Some((f, t));
            }
        }
    }
    best
}
