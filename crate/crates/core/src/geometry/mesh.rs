use nalgebra::{Matrix3, Vector3};

use super::{GeometryError, Vec3};

/// Faces with area below this are treated as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-14;

/// Indexed triangle soup with optional per-face part labels.
///
/// No connectivity or manifoldness is assumed. Degenerate faces are kept
/// (they still occlude nothing and are never sampled) but can be queried.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    face_labels: Option<Vec<u32>>,
}

impl TriangleMesh {
    pub fn new(
        vertices: Vec<Vec3>,
        faces: Vec<[u32; 3]>,
        face_labels: Option<Vec<u32>>,
    ) -> Result<Self, GeometryError> {
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFinite { record: i + 1 });
        }
        let count = vertices.len();
        for (fi, face) in faces.iter().enumerate() {
            for &idx in face {
                if idx as usize >= count {
                    return Err(GeometryError::IndexOutOfRange {
                        record: fi + 1,
                        index: idx as i64,
                        count,
                    });
                }
            }
        }
        if let Some(labels) = &face_labels {
            if labels.len() != faces.len() {
                return Err(GeometryError::LabelCount {
                    expected: faces.len(),
                    found: labels.len(),
                });
            }
        }
        Ok(Self {
            vertices,
            faces,
            face_labels,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn face_labels(&self) -> Option<&[u32]> {
        self.face_labels.as_deref()
    }

    pub fn face_label(&self, face: usize) -> Option<u32> {
        self.face_labels.as_ref().map(|l| l[face])
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Replaces (or removes) the per-face labels.
    pub fn with_labels(mut self, labels: Option<Vec<u32>>) -> Result<Self, GeometryError> {
        if let Some(l) = &labels {
            if l.len() != self.faces.len() {
                return Err(GeometryError::LabelCount {
                    expected: self.faces.len(),
                    found: l.len(),
                });
            }
        }
        self.face_labels = labels;
        Ok(self)
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Cross product of the two edges leaving the first vertex (twice the area).
    pub fn face_cross(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_cross(face).norm()
    }

    /// Unit normal from the vertex winding; zero for degenerate faces.
    pub fn face_normal(&self, face: usize) -> Vec3 {
        let n = self.face_cross(face);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::zeros()
        }
    }

    pub fn is_degenerate(&self, face: usize) -> bool {
        self.face_area(face) <= DEGENERATE_AREA
    }

    pub fn degenerate_faces(&self) -> Vec<usize> {
        (0..self.faces.len()).filter(|&f| self.is_degenerate(f)).collect()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Applies `x -> linear * x + translation` to every vertex.
    pub fn transformed(&self, linear: &Matrix3<f64>, translation: &Vec3) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| linear * v + translation)
                .collect(),
            faces: self.faces.clone(),
            face_labels: self.face_labels.clone(),
        }
    }

    /// Concatenates meshes. Labels are kept only if every input is labeled.
    pub fn merge(parts: &[TriangleMesh]) -> Self {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let all_labeled = parts.iter().all(|p| p.face_labels.is_some());
        let mut labels = Vec::new();
        for part in parts {
            let offset = vertices.len() as u32;
            vertices.extend_from_slice(&part.vertices);
            faces.extend(part.faces.iter().map(|f| f.map(|i| i + offset)));
            if let Some(l) = &part.face_labels {
                labels.extend_from_slice(l);
            }
        }
        Self {
            vertices,
            faces,
            face_labels: all_labeled.then_some(labels),
        }
    }

    /// Axis-aligned box `[min, max]` of the vertices.
    pub fn aabb(&self) -> Option<(Vec3, Vec3)> {
        aabb(&self.vertices)
    }
}

pub fn aabb(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    let first = *points.first()?;
    Some(points.iter().fold((first, first), |(lo, hi), p| {
        (lo.inf(p), hi.sup(p))
    }))
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection 5.1.5).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

pub(crate) fn vec3(x: f64, y: f64, z: f64) -> Vec3 {
    Vector3::new(x, y, z)
}
