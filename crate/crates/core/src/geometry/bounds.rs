//! Bounding spheres and principal-axis oriented boxes.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GeometryError, TriangleMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingSphere {
    pub center: Vec3,
    pub radius: f64,
}

impl BoundingSphere {
    pub fn contains(&self, p: &Vec3, rel_slack: f64) -> bool {
        (p - self.center).norm() <= self.radius * (1.0 + rel_slack) + 1e-12
    }
}

/// Minimal enclosing sphere of the mesh vertices.
pub fn bounding_sphere(mesh: &TriangleMesh) -> Result<BoundingSphere, GeometryError> {
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    Ok(minimal_sphere(mesh.vertices()))
}

/// Exact minimal enclosing sphere (Welzl, iterative move-to-front form).
///
/// Points are shuffled with a fixed seed, so the result is deterministic.
pub fn minimal_sphere(points: &[Vec3]) -> BoundingSphere {
    let mut pts = points.to_vec();
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed_5e7e));
    let Some(&first) = pts.first() else {
        return BoundingSphere {
            center: Vec3::zeros(),
            radius: 0.0,
        };
    };
    let mut s = BoundingSphere {
        center: first,
        radius: 0.0,
    };
    for i in 1..pts.len() {
        if !inside(&s, &pts[i]) {
            s = with_one(&pts[..i], pts[i]);
        }
    }
    s
}

fn inside(s: &BoundingSphere, p: &Vec3) -> bool {
    (p - s.center).norm() <= s.radius * (1.0 + 1e-10) + 1e-12
}

fn with_one(pts: &[Vec3], q: Vec3) -> BoundingSphere {
    let mut s = BoundingSphere {
        center: q,
        radius: 0.0,
    };
    for j in 0..pts.len() {
        if !inside(&s, &pts[j]) {
            s = with_two(&pts[..j], q, pts[j]);
        }
    }
    s
}

fn with_two(pts: &[Vec3], q1: Vec3, q2: Vec3) -> BoundingSphere {
    let mut s = diametral(&q1, &q2);
    for k in 0..pts.len() {
        if !inside(&s, &pts[k]) {
            s = with_three(&pts[..k], q1, q2, pts[k]);
        }
    }
    s
}

fn with_three(pts: &[Vec3], q1: Vec3, q2: Vec3, q3: Vec3) -> BoundingSphere {
    let mut s = circumsphere3(&q1, &q2, &q3);
    for l in 0..pts.len() {
        if !inside(&s, &pts[l]) {
            s = circumsphere4(&q1, &q2, &q3, &pts[l]);
        }
    }
    s
}

pub(crate) fn diametral(a: &Vec3, b: &Vec3) -> BoundingSphere {
    BoundingSphere {
        center: (a + b) * 0.5,
        radius: (a - b).norm() * 0.5,
    }
}

/// Smallest sphere through three points (their circumcircle). Collinear
/// points fall back to the diametral sphere of the farthest pair.
pub(crate) fn circumsphere3(a: &Vec3, b: &Vec3, c: &Vec3) -> BoundingSphere {
    let ab = b - a;
    let ac = c - a;
    let n = ab.cross(&ac);
    let n2 = n.norm_squared();
    if n2 <= 1e-24 * ab.norm_squared().max(ac.norm_squared()).powi(2) {
        return largest_diametral(&[*a, *b, *c]);
    }
    let offset = (n.cross(&ab) * ac.norm_squared() + ac.cross(&n) * ab.norm_squared()) / (2.0 * n2);
    BoundingSphere {
        center: a + offset,
        radius: offset.norm(),
    }
}

/// Sphere through four points; coplanar input falls back to the smallest
/// sphere through three of them that contains the fourth.
pub(crate) fn circumsphere4(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> BoundingSphere {
    let m = Matrix3::from_rows(&[
        (b - a).transpose(),
        (c - a).transpose(),
        (d - a).transpose(),
    ]);
    let rhs = Vec3::new(
        (b - a).norm_squared(),
        (c - a).norm_squared(),
        (d - a).norm_squared(),
    ) * 0.5;
    let scale = [(b - a).norm(), (c - a).norm(), (d - a).norm()]
        .into_iter()
        .fold(0.0f64, f64::max);
    if m.determinant().abs() > 1e-12 * scale.powi(3) {
        if let Some(inv) = m.try_inverse() {
            let offset = inv * rhs;
            return BoundingSphere {
                center: a + offset,
                radius: offset.norm(),
            };
        }
    }
    let pts = [*a, *b, *c, *d];
    let mut best: Option<BoundingSphere> = None;
    for skip in 0..4 {
        let tri: Vec<Vec3> = (0..4).filter(|&i| i != skip).map(|i| pts[i]).collect();
        let s = circumsphere3(&tri[0], &tri[1], &tri[2]);
        if inside(&s, &pts[skip]) && best.is_none_or(|b| s.radius < b.radius) {
            best = Some(s);
        }
    }
    best.unwrap_or_else(|| largest_diametral(&pts))
}

fn largest_diametral(pts: &[Vec3]) -> BoundingSphere {
    let mut best = diametral(&pts[0], &pts[0]);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let s = diametral(&pts[i], &pts[j]);
            if s.radius > best.radius {
                best = s;
            }
        }
    }
    best
}

/// Box aligned with the principal directions of the point covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBoundingBox {
    pub center: Vec3,
    /// Unit axes in descending-variance order.
    pub axes: [Vec3; 3],
    pub half_extents: [f64; 3],
}

impl OrientedBoundingBox {
    /// Axes as matrix columns.
    pub fn frame(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&self.axes)
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let mut out = [Vec3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            let mut p = self.center;
            for k in 0..3 {
                let sign = if (i >> k) & 1 == 1 { 1.0 } else { -1.0 };
                p += self.axes[k] * (sign * self.half_extents[k]);
            }
            *c = p;
        }
        out
    }

    pub fn contains(&self, p: &Vec3, slack: f64) -> bool {
        let d = p - self.center;
        (0..3).all(|k| d.dot(&self.axes[k]).abs() <= self.half_extents[k] + slack)
    }
}

/// Principal-axis box of a point set.
///
/// Axis signs are fixed so that each axis' largest-magnitude component is
/// positive (lowest index wins exact ties). This stays stable for nearly
/// axis-aligned parts, where a "first nonzero component" rule would flip on
/// sampling noise.
pub fn compute_obb(points: &[Vec3]) -> Result<OrientedBoundingBox, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= n;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut axes = order.map(|i| eig.eigenvectors.column(i).into_owned().normalize());
    for axis in axes.iter_mut() {
        fix_sign(axis);
    }

    let mut center = mean;
    let mut half_extents = [0.0; 3];
    for k in 0..3 {
        let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let t = (p - mean).dot(&axes[k]);
            (lo.min(t), hi.max(t))
        });
        center += axes[k] * ((lo + hi) * 0.5);
        half_extents[k] = (hi - lo) * 0.5;
    }
    Ok(OrientedBoundingBox {
        center,
        axes,
        half_extents,
    })
}

fn fix_sign(axis: &mut Vec3) {
    let mut best = 0;
    for k in 1..3 {
        if axis[k].abs() > axis[best].abs() + 1e-12 {
            best = k;
        }
    }
    if axis[best] < 0.0 {
        *axis = -*axis;
    }
}
