//! Z-buffered triangle rasterization.
//!
//! Coverage is tested at pixel centers with a top-left fill rule; depth is the
//! camera-space distance along the viewing axis, interpolated perspective
//! correctly (linear in `1/z`). Triangles are clipped against the near plane.

use crate::geometry::raycast::ray_triangle;
use crate::geometry::{PointSample, TriangleMesh, Vec3};

use super::{Camera, Shading, ShadedImage};

const NO_FACE: u32 = u32::MAX;

/// Per-pixel nearest depth and the face that produced it.
#[derive(Debug, Clone)]
pub struct DepthBuffer {
    resolution: usize,
    depth: Vec<f64>,
    face: Vec<u32>,
}

impl DepthBuffer {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn depth(&self, row: usize, col: usize) -> f64 {
        self.depth[row * self.resolution + col]
    }

    pub fn face(&self, row: usize, col: usize) -> Option<usize> {
        let f = self.face[row * self.resolution + col];
        (f != NO_FACE).then_some(f as usize)
    }

    pub fn covered(&self) -> usize {
        self.face.iter().filter(|&&f| f != NO_FACE).count()
    }
}

/// Faces binned by the screen tiles their projection can touch, so that a
/// sample's ray only needs testing against faces that may cover its
/// projection. Faces reaching behind the near plane are tested for every
/// sample.
struct Occluders {
    tiles: usize,
    bins: Vec<Vec<u32>>,
    always: Vec<u32>,
}

const TILE: f64 = 8.0;

impl Occluders {
    fn new(mesh: &TriangleMesh, cam: &Camera) -> Self {
        let res = cam.resolution as f64;
        let tiles = (cam.resolution as f64 / TILE).ceil() as usize;
        let mut occ = Occluders {
            tiles,
            bins: vec![Vec::new(); tiles * tiles],
            always: Vec::new(),
        };
        let view: Vec<Vec3> = mesh.vertices().iter().map(|v| cam.to_view(v)).collect();
        for (fi, f) in mesh.faces().iter().enumerate() {
            if mesh.is_degenerate(fi) {
                continue;
            }
            let tri = f.map(|i| view[i as usize]);
            if tri.iter().all(|v| v.z <= 0.0) {
                continue;
            }
            if tri.iter().any(|v| v.z < cam.near) {
                occ.always.push(fi as u32);
                continue;
            }
            let p = tri.map(|v| cam.project_view(&v).expect("in front of the near plane"));
            // one pixel of margin against rounding
            let lo_c = p.iter().map(|q| q.col).fold(f64::INFINITY, f64::min) - 1.0;
            let hi_c = p.iter().map(|q| q.col).fold(f64::NEG_INFINITY, f64::max) + 1.0;
            let lo_r = p.iter().map(|q| q.row).fold(f64::INFINITY, f64::min) - 1.0;
            let hi_r = p.iter().map(|q| q.row).fold(f64::NEG_INFINITY, f64::max) + 1.0;
            if hi_c < 0.0 || hi_r < 0.0 || lo_c >= res || lo_r >= res {
                continue;
            }
            let tile = |x: f64| ((x.clamp(0.0, res - 1.0)) / TILE) as usize;
            for tr in tile(lo_r)..=tile(hi_r) {
                for tc in tile(lo_c)..=tile(hi_c) {
                    occ.bins[tr * tiles + tc].push(fi as u32);
                }
            }
        }
        occ
    }

    /// Visibility of a surface sample: it must project inside the image and
    /// within `[near, far]`, and no face other than its own may cross its
    /// eye ray more than the camera's depth epsilon in front of it. Returns
    /// the pixel and sample depth when visible.
    fn sample_visibility(&self, mesh: &TriangleMesh, cam: &Camera, sample: &PointSample) -> Option<(usize, usize, f64)> {
        let proj = cam.project(&sample.position)?;
        if proj.depth < cam.near || proj.depth > cam.far {
            return None;
        }
        let (row, col) = proj.pixel(cam.resolution)?;
        let own = sample.face_id;
        let dir = sample.position - cam.eye;
        // hit parameter along eye -> sample beyond which an occluder is ignored
        let limit = 1.0 - cam.depth_epsilon() / proj.depth;
        let bin = &self.bins[(row / TILE as usize) * self.tiles + col / TILE as usize];
        let blocked = bin.iter().chain(&self.always).any(|&f| {
            f != own && ray_triangle(&cam.eye, &dir, &mesh.triangle(f as usize)).is_some_and(|t| t > 0.0 && t < limit)
        });
        (!blocked).then_some((row, col, proj.depth))
    }
}

struct ScreenVertex {
    x: f64,
    y: f64,
    inv_z: f64,
}

fn edge(a: &ScreenVertex, b: &ScreenVertex, px: f64, py: f64) -> f64 {
    (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x)
}

fn is_top_left(a: &ScreenVertex, b: &ScreenVertex) -> bool {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    (dy == 0.0 && dx > 0.0) || dy < 0.0
}

/// Clips a camera-space triangle against `z >= near`.
fn clip_near(tri: [Vec3; 3], near: f64) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let a_in = a.z >= near;
        let b_in = b.z >= near;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (near - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * t;
            p.z = near;
            out.push(p);
        }
    }
    out
}

/// Rasterizes every non-degenerate face into a depth buffer.
pub fn rasterize(mesh: &TriangleMesh, cam: &Camera) -> DepthBuffer {
    let res = cam.resolution;
    let mut buf = DepthBuffer {
        resolution: res,
        depth: vec![f64::INFINITY; res * res],
        face: vec![NO_FACE; res * res],
    };
    let view: Vec<Vec3> = mesh.vertices().iter().map(|v| cam.to_view(v)).collect();
    for (fi, f) in mesh.faces().iter().enumerate() {
        if mesh.is_degenerate(fi) {
            continue;
        }
        let tri = f.map(|i| view[i as usize]);
        if tri.iter().all(|v| v.z < cam.near) || tri.iter().all(|v| v.z > cam.far) {
            continue;
        }
        let poly = clip_near(tri, cam.near);
        if poly.len() < 3 {
            continue;
        }
        let screen: Vec<ScreenVertex> = poly
            .iter()
            .map(|v| {
                let p = cam.project_view(v).expect("clipped vertices are in front of the eye");
                ScreenVertex {
                    x: p.col,
                    y: p.row,
                    inv_z: 1.0 / v.z,
                }
            })
            .collect();
        for k in 1..screen.len() - 1 {
            raster_triangle(&mut buf, cam, fi as u32, [&screen[0], &screen[k], &screen[k + 1]]);
        }
    }
    buf
}

fn raster_triangle(buf: &mut DepthBuffer, cam: &Camera, face: u32, v: [&ScreenVertex; 3]) {
    let res = buf.resolution;
    let [v0, mut v1, mut v2] = v;
    let mut area = edge(v0, v1, v2.x, v2.y);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    if area < 0.0 {
        std::mem::swap(&mut v1, &mut v2);
        area = -area;
    }
    let min_x = v0.x.min(v1.x).min(v2.x);
    let max_x = v0.x.max(v1.x).max(v2.x);
    let min_y = v0.y.min(v1.y).min(v2.y);
    let max_y = v0.y.max(v1.y).max(v2.y);
    // pixel c covers centers at c + 0.5
    let c0 = ((min_x - 0.5).ceil().max(0.0)) as usize;
    let r0 = ((min_y - 0.5).ceil().max(0.0)) as usize;
    let c1 = (max_x - 0.5).floor().min(res as f64 - 1.0);
    let r1 = (max_y - 0.5).floor().min(res as f64 - 1.0);
    if c1 < 0.0 || r1 < 0.0 {
        return;
    }
    let (c1, r1) = (c1 as usize, r1 as usize);
    let tl = [is_top_left(v1, v2), is_top_left(v2, v0), is_top_left(v0, v1)];
    for r in r0..=r1 {
        let py = r as f64 + 0.5;
        for c in c0..=c1 {
            let px = c as f64 + 0.5;
            let w = [edge(v1, v2, px, py), edge(v2, v0, px, py), edge(v0, v1, px, py)];
            let inside = w
                .iter()
                .zip(tl)
                .all(|(&wi, top_left)| wi > 0.0 || (wi == 0.0 && top_left));
            if !inside {
                continue;
            }
            let inv_z = (w[0] * v0.inv_z + w[1] * v1.inv_z + w[2] * v2.inv_z) / area;
            let z = 1.0 / inv_z;
            if z > cam.far {
                continue;
            }
            let idx = r * res + c;
            if z < buf.depth[idx] {
                buf.depth[idx] = z;
                buf.face[idx] = face;
            }
        }
    }
}

/// Fixed-coefficient Phong shading of one fragment.
pub(crate) fn phong(shading: &Shading, normal: &Vec3, to_light: &Vec3, to_viewer: &Vec3) -> f64 {
    let mut n = *normal;
    if n.dot(to_viewer) < 0.0 {
        n = -n;
    }
    let ndl = n.dot(to_light);
    let diffuse = ndl.max(0.0);
    let reflect = n * (2.0 * ndl) - to_light;
    let spec = reflect.dot(to_viewer).max(0.0).powf(shading.shininess);
    (shading.ambient + shading.diffuse * diffuse + shading.specular * spec).clamp(0.0, 1.0)
}

/// Phong-shaded render. `light_dir` is the direction the light travels
/// (pass the camera's forward vector for a headlight).
pub fn render_shaded(mesh: &TriangleMesh, cam: &Camera, light_dir: &Vec3, shading: &Shading) -> ShadedImage {
    let buf = rasterize(mesh, cam);
    shade_buffer(mesh, cam, &buf, light_dir, shading)
}

pub(crate) fn shade_buffer(
    mesh: &TriangleMesh,
    cam: &Camera,
    buf: &DepthBuffer,
    light_dir: &Vec3,
    shading: &Shading,
) -> ShadedImage {
    let res = cam.resolution;
    let to_light = -light_dir.normalize();
    let normals: Vec<Vec3> = (0..mesh.face_count()).map(|f| mesh.face_normal(f)).collect();
    let mut img = ShadedImage::blank(res);
    for r in 0..res {
        for c in 0..res {
            let Some(f) = buf.face(r, c) else { continue };
            let ray = cam.pixel_ray(r, c);
            let to_viewer = -ray.normalize();
            img.set(r, c, phong(shading, &normals[f], &to_light, &to_viewer));
        }
    }
    img
}

/// Per-pixel frontmost visible sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexEntry {
    pub sample: u32,
    pub depth: f64,
}

#[derive(Debug, Clone)]
pub struct IndexMap {
    resolution: usize,
    pixels: Vec<Option<IndexEntry>>,
    visible: Vec<u32>,
}

impl IndexMap {
    pub fn get(&self, row: usize, col: usize) -> Option<IndexEntry> {
        self.pixels[row * self.resolution + col]
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Every sample that passed the depth test, ascending. Several samples
    /// may share a pixel; all of them are listed here even though the pixel
    /// keeps only the nearest.
    pub fn visible(&self) -> &[u32] {
        &self.visible
    }

    pub fn is_visible(&self, sample: u32) -> bool {
        self.visible.binary_search(&sample).is_ok()
    }
}

/// Maps samples to pixels, dropping those occluded by the mesh. Occlusion
/// is decided by exact ray tests, not by the depth buffer.
pub fn render_index(mesh: &TriangleMesh, samples: &[PointSample], cam: &Camera) -> IndexMap {
    let res = cam.resolution;
    let occ = Occluders::new(mesh, cam);
    let mut map = IndexMap {
        resolution: res,
        pixels: vec![None; res * res],
        visible: Vec::new(),
    };
    for (i, s) in samples.iter().enumerate() {
        if let Some((r, c, depth)) = occ.sample_visibility(mesh, cam, s) {
            map.visible.push(i as u32);
            let slot = &mut map.pixels[r * res + c];
            if slot.is_none_or(|e| depth < e.depth) {
                *slot = Some(IndexEntry {
                    sample: i as u32,
                    depth,
                });
            }
        }
    }
    map
}
