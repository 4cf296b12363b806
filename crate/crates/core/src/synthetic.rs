//! Procedural test shapes: primitives, part-labeled toy classes, smooth warps.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{TriangleMesh, Vec3};

/// Latitude/longitude sphere centered at the origin with `2·lon·(lat−1)` faces.
pub fn uv_sphere(lat: usize, lon: usize, radius: f64) -> TriangleMesh {
    assert!(lat >= 2 && lon >= 3);
    let mut verts = vec![Vec3::new(0.0, 0.0, radius)];
    for i in 1..lat {
        let theta = PI * i as f64 / lat as f64;
        for j in 0..lon {
            let phi = 2.0 * PI * j as f64 / lon as f64;
            verts.push(radius * Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()));
        }
    }
    verts.push(Vec3::new(0.0, 0.0, -radius));
    let south = (verts.len() - 1) as u32;
    let ring = |i: usize, j: usize| (1 + (i - 1) * lon + j % lon) as u32;
    let mut faces = Vec::new();
    for j in 0..lon {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..lat - 1 {
        for j in 0..lon {
            faces.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            faces.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    for j in 0..lon {
        faces.push([ring(lat - 1, j), south, ring(lat - 1, j + 1)]);
    }
    TriangleMesh::new(verts, faces, None).expect("valid sphere")
}

/// Axis-aligned box as 12 outward-wound triangles (`open_top` drops the two +z faces).
pub fn box_mesh(center: Vec3, half: Vec3, open_top: bool) -> TriangleMesh {
    let mut verts = Vec::with_capacity(8);
    for i in 0..8 {
        let s = |bit: usize| if i & bit != 0 { 1.0 } else { -1.0 };
        verts.push(center + Vec3::new(s(1) * half.x, s(2) * half.y, s(4) * half.z));
    }
    // quads listed counter-clockwise seen from outside
    let quads: [([u32; 4], bool); 6] = [
        ([0, 2, 3, 1], false), // -z
        ([4, 5, 7, 6], true),  // +z
        ([0, 1, 5, 4], false), // -y
        ([2, 6, 7, 3], false), // +y
        ([0, 4, 6, 2], false), // -x
        ([1, 3, 7, 5], false), // +x
    ];
    let mut faces = Vec::new();
    for (q, top) in quads {
        if top && open_top {
            continue;
        }
        faces.push([q[0], q[1], q[2]]);
        faces.push([q[0], q[2], q[3]]);
    }
    TriangleMesh::new(verts, faces, None).expect("valid box")
}

/// Part-labeled toy shape families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ToyClass {
    /// Fuselage with tail fin (label 1), left wing (2), right wing (3).
    Wings,
    /// Seat with backrest (label 4), left legs (5), right legs (6).
    Legs,
}

impl ToyClass {
    pub fn name(self) -> &'static str {
        match self {
            ToyClass::Wings => "wings",
            ToyClass::Legs => "legs",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "wings" => Some(ToyClass::Wings),
            "legs" => Some(ToyClass::Legs),
            _ => None,
        }
    }

    /// Left/right feature pairs.
    pub fn symmetry(self) -> BTreeMap<u32, u32> {
        let pairs: &[(u32, u32)] = match self {
            ToyClass::Wings => &[(3, 4), (5, 6)],
            ToyClass::Legs => &[(11, 12), (13, 14), (15, 16)],
        };
        pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect()
    }
}

/// A labeled toy mesh with its annotated feature points (on the surface).
#[derive(Debug, Clone)]
pub struct ToyShape {
    pub class: ToyClass,
    pub mesh: TriangleMesh,
    pub features: BTreeMap<u32, Vec3>,
}

fn labeled_box(center: Vec3, half: Vec3, label: u32) -> TriangleMesh {
    let b = box_mesh(center, half, false);
    let n = b.face_count();
    b.with_labels(Some(vec![label; n])).expect("label count")
}

/// Random instance of `class` in its canonical frame (z up).
pub fn toy_shape(class: ToyClass, seed: u64) -> ToyShape {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let v = Vec3::new;
    match class {
        ToyClass::Wings => {
            let (bw, bl, bh) = (u(0.12, 0.18), u(0.8, 1.0), u(0.12, 0.18));
            let (span, chord, wy) = (u(0.6, 0.9), u(0.12, 0.2), u(-0.1, 0.2));
            let (fin_h, fin_l) = (u(0.2, 0.35), u(0.12, 0.2));
            let wt = 0.03;
            let fin_t = 0.03;
            let body = labeled_box(Vec3::zeros(), v(bw, bl, bh), 1);
            let fin = labeled_box(v(0.0, -bl + fin_l, bh + fin_h / 2.0), v(fin_t, fin_l, fin_h / 2.0), 1);
            let wing = |side: f64, label| labeled_box(v(side * (bw + span / 2.0), wy, 0.0), v(span / 2.0, chord, wt), label);
            let mesh = TriangleMesh::merge(&[body, fin, wing(-1.0, 2), wing(1.0, 3)]);
            let features = [
                (1, v(0.0, bl, 0.0)),
                (2, v(0.0, -bl, bh + fin_h * 0.75)),
                (3, v(-(bw + span), wy, 0.0)),
                (4, v(bw + span, wy, 0.0)),
                (5, v(-(bw + 0.3 * span), wy + chord, 0.0)),
                (6, v(bw + 0.3 * span, wy + chord, 0.0)),
                (7, v(0.0, -0.5 * bl, -bh)),
            ]
            .into_iter()
            .collect();
            ToyShape { class, mesh, features }
        }
        ToyClass::Legs => {
            let (sw, sd, st) = (u(0.5, 0.7), u(0.4, 0.6), u(0.05, 0.08));
            let (leg_len, lt, inset) = (u(0.5, 0.9), u(0.04, 0.07), u(0.02, 0.08));
            let (back_h, back_t) = (u(0.4, 0.7), u(0.04, 0.06));
            let seat = labeled_box(Vec3::zeros(), v(sw, sd, st), 4);
            let back = labeled_box(v(0.0, -sd + back_t, st + back_h / 2.0), v(sw, back_t, back_h / 2.0), 4);
            let lx = sw - inset - lt;
            let ly = sd - inset - lt;
            let leg = |x: f64, y: f64, label| labeled_box(v(x, y, -st - leg_len / 2.0), v(lt, lt, leg_len / 2.0), label);
            let mesh = TriangleMesh::merge(&[
                seat,
                back,
                leg(-lx, ly, 5),
                leg(-lx, -ly, 5),
                leg(lx, ly, 6),
                leg(lx, -ly, 6),
            ]);
            let foot = -st - leg_len;
            let features = [
                (11, v(-lx, ly, foot)),
                (12, v(lx, ly, foot)),
                (13, v(-lx, -ly, foot)),
                (14, v(lx, -ly, foot)),
                (15, v(-0.8 * sw, -sd + back_t, st + back_h)),
                (16, v(0.8 * sw, -sd + back_t, st + back_h)),
                (17, v(0.0, sd, 0.0)),
            ]
            .into_iter()
            .collect();
            ToyShape { class, mesh, features }
        }
    }
}

/// Uniformly distributed rotation.
pub fn random_rotation(seed: u64) -> Matrix3<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = loop {
        let a = Vec3::from_fn(|_, _| StandardNormal.sample(&mut rng));
        if a.norm() > 1e-6 {
            break Unit::new_normalize(a);
        }
    };
    // angle density ∝ 1 − cos θ for the uniform measure on SO(3)
    let angle = loop {
        let t: f64 = rng.random_range(0.0..PI);
        if rng.random::<f64>() * 2.0 <= 1.0 - t.cos() {
            break t;
        }
    };
    *Rotation3::from_axis_angle(&axis, angle).matrix()
}

impl ToyShape {
    pub fn transformed(&self, linear: &Matrix3<f64>) -> Self {
        Self {
            class: self.class,
            mesh: self.mesh.transformed(linear, &Vec3::zeros()),
            features: self.features.iter().map(|(&f, p)| (f, linear * p)).collect(),
        }
    }
}


/// Smooth displacement `p ↦ p + a·(sin(2πf·k₁·p + φ₁), sin(2πf·k₂·p + φ₂), sin(2πf·k₃·p + φ₃))`
/// with random unit wave vectors `kᵢ` and phases `φᵢ`. Each component is at
/// most `amplitude` in magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothWarp {
    pub amplitude: f64,
    pub frequency: f64,
    pub waves: [Vec3; 3],
    pub phases: [f64; 3],
}

impl SmoothWarp {
    pub fn random(amplitude: f64, frequency: f64, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut unit = || loop {
            let v = Vec3::from_fn(|_, _| StandardNormal.sample(&mut rng));
            if v.norm() > 1e-6 {
                break v.normalize();
            }
        };
        let waves = [unit(), unit(), unit()];
        let phases = [0; 3].map(|_| rng.random_range(0.0..2.0 * PI));
        Self { amplitude, frequency, waves, phases }
    }

    pub fn displacement(&self, p: &Vec3) -> Vec3 {
        Vec3::from_fn(|i, _| {
            self.amplitude * (2.0 * PI * self.frequency * self.waves[i].dot(p) + self.phases[i]).sin()
        })
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        p + self.displacement(p)
    }
}
