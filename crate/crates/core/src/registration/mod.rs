//! Part-guided non-rigid registration of consistently labeled point sets.

mod cg;
mod icp;

use std::io::{self, BufRead, Read, Write};

use nalgebra::Matrix3;
use thiserror::Error;

use crate::geometry::{GeometryError, Vec3};

pub use cg::{conjugate_gradient, CgStats, SparseMatrix};
pub use icp::{
    affine_init, generate_pair_correspondences, icp_register, smoothness_matrix, solve_offsets, IcpResult,
    PartReport,
};

#[derive(Debug, Error)]
pub enum RegistrationError {
    #[error("shapes {a} and {b} share no part label")]
    NoSharedLabels { a: u32, b: u32 },
    #[error("empty part")]
    EmptyPart,
    #[error("{points} points but {labels} labels")]
    LabelCount { points: usize, labels: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("correspondence file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Points tagged with part labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointSet {
    pub shape_id: u32,
    pub points: Vec<Vec3>,
    pub labels: Vec<u32>,
}

impl LabeledPointSet {
    pub fn new(shape_id: u32, points: Vec<Vec3>, labels: Vec<u32>) -> Result<Self, RegistrationError> {
        if points.len() != labels.len() {
            return Err(RegistrationError::LabelCount { points: points.len(), labels: labels.len() });
        }
        Ok(Self { shape_id, points, labels })
    }

    /// Sorted distinct labels.
    pub fn label_set(&self) -> Vec<u32> {
        let mut l = self.labels.clone();
        l.sort_unstable();
        l.dedup();
        l
    }

    /// Indices of the points carrying `label`, ascending.
    pub fn part(&self, label: u32) -> Vec<usize> {
        (0..self.points.len()).filter(|&i| self.labels[i] == label).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    pub linear: Matrix3<f64>,
    pub translation: Vec3,
}

impl AffineTransform {
    pub fn identity() -> Self {
        Self { linear: Matrix3::identity(), translation: Vec3::zeros() }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.linear * p + self.translation
    }
}

/// Per-point offsets of one part.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    pub offsets: Vec<Vec3>,
}

/// Terms of the deformation energy at one iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub iteration: usize,
    pub data_ab: f64,
    pub data_ba: f64,
    pub smooth_a: f64,
    pub smooth_b: f64,
    pub total: f64,
}

/// Registration settings. Distances are in the per-part normalized frame
/// (the target part fits the unit cube).
#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationParams {
    /// Neighbors per point in the smoothness graph.
    pub neighbors: usize,
    /// Weight of the smoothness terms.
    pub smoothness: f64,
    /// Smoothness multipliers of the stiffer warm-up stages, run in order
    /// before the final stage. Empty disables the warm-up.
    pub warmup: Vec<f64>,
    pub max_iters: usize,
    /// Stop when one iteration lowers the energy by less than this fraction
    /// of the initial energy.
    pub rel_tol: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            neighbors: 6,
            smoothness: 1.0,
            warmup: vec![100.0, 30.0, 10.0, 3.0],
            max_iters: 30,
            rel_tol: 1e-5,
            cg_tol: 1e-8,
            cg_max_iters: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Correspondence {
    pub shape_a: u32,
    pub index_a: u32,
    pub shape_b: u32,
    pub index_b: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceSet {
    pub pairs: Vec<Correspondence>,
}

const RECORD: usize = 16;

impl CorrespondenceSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// One `shape_a index_a shape_b index_b` line per pair.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        for c in &self.pairs {
            writeln!(w, "{} {} {} {}", c.shape_a, c.index_a, c.shape_b, c.index_b)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self, RegistrationError> {
        let mut pairs = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let bad = |m: &str| RegistrationError::Parse { line: i + 1, message: m.to_string() };
            let f: Vec<u32> = t
                .split_whitespace()
                .map(|s| s.parse::<u32>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad("expected unsigned integers"))?;
            if f.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            pairs.push(Correspondence { shape_a: f[0], index_a: f[1], shape_b: f[2], index_b: f[3] });
        }
        Ok(Self { pairs })
    }

    /// Little-endian `u32` records of four fields, no header.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut buf = Vec::with_capacity(self.pairs.len() * RECORD);
        for c in &self.pairs {
            for v in [c.shape_a, c.index_a, c.shape_b, c.index_b] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, RegistrationError> {
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        if data.len() % RECORD != 0 {
            return Err(RegistrationError::Parse {
                line: data.len() / RECORD + 1,
                message: "truncated binary record".into(),
            });
        }
        let word = |b: &[u8]| u32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        let pairs = data
            .chunks_exact(RECORD)
            .map(|c| Correspondence {
                shape_a: word(&c[0..4]),
                index_a: word(&c[4..8]),
                shape_b: word(&c[8..12]),
                index_b: word(&c[12..16]),
            })
            .collect();
        Ok(Self { pairs })
    }
}
