//! Correspondence benchmarks: CMC and correspondence-accuracy curves with
//! symmetric and non-symmetric scoring, and nearest-descriptor matching.

mod files;

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::Vec3;

pub use files::{read_features, read_symmetry, write_colored_points, write_features, write_symmetry};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least two shapes, got {0}")]
    TooFewShapes(usize),
    #[error("shape {shape}: feature {feature} has no descriptor")]
    MissingFeature { shape: u32, feature: u32 },
    #[error("descriptor dimension mismatch: {expected} vs {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("symmetry map is not an involution at feature {0}")]
    NotInvolution(u32),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Annotated feature points per shape plus an optional left/right pairing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeaturePointSet {
    pub shapes: BTreeMap<u32, BTreeMap<u32, Vec3>>,
    pub symmetry: BTreeMap<u32, u32>,
}

impl FeaturePointSet {
    /// The symmetry map must be its own inverse; self-pairs are allowed.
    pub fn new(shapes: BTreeMap<u32, BTreeMap<u32, Vec3>>, symmetry: BTreeMap<u32, u32>) -> Result<Self, EvalError> {
        for (&a, &b) in &symmetry {
            if symmetry.get(&b) != Some(&a) {
                return Err(EvalError::NotInvolution(a));
            }
        }
        Ok(Self { shapes, symmetry })
    }

    pub fn partner(&self, feature: u32) -> Option<u32> {
        self.symmetry.get(&feature).copied().filter(|&p| p != feature)
    }
}

/// Descriptors of one shape: the dense samples and the feature points.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeDescriptors {
    pub shape_id: u32,
    /// Positions are divided by this before measuring 3D errors (the shape's
    /// bounding-sphere radius).
    pub scale: f64,
    pub samples: Vec<(Vec3, Vec<f64>)>,
    pub features: BTreeMap<u32, (Vec3, Vec<f64>)>,
}

impl ShapeDescriptors {
    /// Dense samples in order, then features by id.
    fn candidates(&self, include_samples: bool) -> Vec<(Option<u32>, &Vec3, &[f64])> {
        let dense = self
            .samples
            .iter()
            .filter(|_| include_samples)
            .map(|(p, d)| (None, p, d.as_slice()));
        dense
            .chain(self.features.iter().map(|(&f, (p, d))| (Some(f), p, d.as_slice())))
            .collect()
    }
}

/// Which target points compete in the ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Candidates {
    DenseAndFeatures,
    FeaturesOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub metric: String,
    pub symmetric: bool,
    /// Free-form `key=value` notes stamped into the CSV header.
    pub notes: Vec<String>,
}

impl EvalCurve {
    /// `# metric=... symmetric=... notes` then `x,y` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "# metric={} symmetric={}", self.metric, self.symmetric)?;
        for n in &self.notes {
            write!(w, " {n}")?;
        }
        writeln!(w)?;
        writeln!(w, "x,y")?;
        for (x, y) in self.x.iter().zip(&self.y) {
            writeln!(w, "{x},{y}")?;
        }
        Ok(())
    }

    pub fn at(&self, x: f64) -> Option<f64> {
        self.x.iter().position(|&v| v == x).map(|i| self.y[i])
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_inputs(shapes: &[ShapeDescriptors], features: &FeaturePointSet) -> Result<usize, EvalError> {
    if shapes.len() < 2 {
        return Err(EvalError::TooFewShapes(shapes.len()));
    }
    let dim = shapes
        .iter()
        .flat_map(|s| s.features.values().map(|f| f.1.len()).chain(s.samples.iter().map(|s| s.1.len())))
        .next()
        .ok_or(EvalError::Empty("descriptors"))?;
    for s in shapes {
        if let Some(fs) = features.shapes.get(&s.shape_id) {
            if let Some(&f) = fs.keys().find(|f| !s.features.contains_key(f)) {
                return Err(EvalError::MissingFeature { shape: s.shape_id, feature: f });
            }
        }
        for d in s.features.values().map(|f| &f.1).chain(s.samples.iter().map(|s| &s.1)) {
            if d.len() != dim {
                return Err(EvalError::DimensionMismatch { expected: dim, found: d.len() });
            }
        }
    }
    Ok(dim)
}

/// Every ordered shape pair, in input order.
fn ordered_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|s| (0..n).filter(move |&t| t != s).map(move |t| (s, t))).collect()
}

/// Ground-truth targets of a query feature: itself, plus the symmetric
/// partner when allowed and present on the target. Empty when the target
/// lacks the feature, so both variants score the same queries.
fn truth_ids(features: &FeaturePointSet, fid: u32, target: &ShapeDescriptors, symmetric: bool) -> Vec<u32> {
    if !target.features.contains_key(&fid) {
        return Vec::new();
    }
    let mut ids = vec![fid];
    if symmetric {
        if let Some(p) = features.partner(fid).filter(|p| target.features.contains_key(p)) {
            ids.push(p);
        }
    }
    ids
}

/// Ranks (1-based, ties share the best rank) of the true match for every
/// source feature on every ordered pair. Features absent from the target are
/// skipped.
pub fn match_ranks(
    shapes: &[ShapeDescriptors],
    features: &FeaturePointSet,
    symmetric: bool,
    candidates: Candidates,
) -> Result<Vec<usize>, EvalError> {
    check_inputs(shapes, features)?;
    let per_pair: Vec<Vec<usize>> = ordered_pairs(shapes.len())
        .par_iter()
        .map(|&(s, t)| {
            let (src, tgt) = (&shapes[s], &shapes[t]);
            let cands = tgt.candidates(candidates == Candidates::DenseAndFeatures);
            src.features
                .iter()
                .filter_map(|(&fid, (_, q))| {
                    let truth = truth_ids(features, fid, tgt, symmetric);
                    if truth.is_empty() {
                        return None;
                    }
                    let dists: Vec<f64> = cands.iter().map(|c| sq_dist(q, c.2)).collect();
                    truth
                        .iter()
                        .map(|g| {
                            let gd = sq_dist(q, &tgt.features[g].1);
                            1 + dists.iter().filter(|&&d| d < gd).count()
                        })
                        .min()
                })
                .collect()
        })
        .collect();
    Ok(per_pair.into_iter().flatten().collect())
}

/// Cumulative match characteristic for ranks `1..=max_rank`.
pub fn cmc_curve(
    shapes: &[ShapeDescriptors],
    features: &FeaturePointSet,
    symmetric: bool,
    candidates: Candidates,
    max_rank: usize,
) -> Result<EvalCurve, EvalError> {
    let ranks = match_ranks(shapes, features, symmetric, candidates)?;
    if ranks.is_empty() {
        return Err(EvalError::Empty("no feature appears on two shapes"));
    }
    let n = ranks.len() as f64;
    let x: Vec<f64> = (1..=max_rank).map(|r| r as f64).collect();
    let y = (1..=max_rank).map(|r| ranks.iter().filter(|&&k| k <= r).count() as f64 / n).collect();
    Ok(EvalCurve {
        x,
        y,
        metric: "cmc".into(),
        symmetric,
        notes: vec![
            format!("queries={}", ranks.len()),
            format!(
                "candidates={}",
                match candidates {
                    Candidates::DenseAndFeatures => "dense+features",
                    Candidates::FeaturesOnly => "features",
                }
            ),
            "ties=min-rank".into(),
        ],
    })
}

/// 3D errors (in units of the target's scale) of the nearest-descriptor
/// prediction for every source feature on every ordered pair.
pub fn match_errors(
    shapes: &[ShapeDescriptors],
    features: &FeaturePointSet,
    symmetric: bool,
    candidates: Candidates,
) -> Result<Vec<f64>, EvalError> {
    check_inputs(shapes, features)?;
    let per_pair: Vec<Vec<f64>> = ordered_pairs(shapes.len())
        .par_iter()
        .map(|&(s, t)| {
            let (src, tgt) = (&shapes[s], &shapes[t]);
            let cands = tgt.candidates(candidates == Candidates::DenseAndFeatures);
            src.features
                .iter()
                .filter_map(|(&fid, (_, q))| {
                    let truth = truth_ids(features, fid, tgt, symmetric);
                    if truth.is_empty() {
                        return None;
                    }
                    let mut best = 0;
                    let mut best_d = f64::INFINITY;
                    for (i, c) in cands.iter().enumerate() {
                        let d = sq_dist(q, c.2);
                        if d < best_d {
                            best_d = d;
                            best = i;
                        }
                    }
                    let pred = cands[best].1;
                    truth
                        .iter()
                        .map(|g| (pred - tgt.features[g].0).norm() / tgt.scale)
                        .min_by(f64::total_cmp)
                })
                .collect()
        })
        .collect();
    Ok(per_pair.into_iter().flatten().collect())
}

/// Fraction of predictions within each error threshold.
pub fn correspondence_accuracy(
    shapes: &[ShapeDescriptors],
    features: &FeaturePointSet,
    symmetric: bool,
    candidates: Candidates,
    thresholds: &[f64],
) -> Result<EvalCurve, EvalError> {
    if thresholds.is_empty() {
        return Err(EvalError::Empty("thresholds"));
    }
    let errors = match_errors(shapes, features, symmetric, candidates)?;
    if errors.is_empty() {
        return Err(EvalError::Empty("no feature appears on two shapes"));
    }
    let mut x = thresholds.to_vec();
    x.sort_by(f64::total_cmp);
    let n = errors.len() as f64;
    let y = x.iter().map(|&t| errors.iter().filter(|&&e| e <= t).count() as f64 / n).collect();
    Ok(EvalCurve {
        x,
        y,
        metric: "accuracy".into(),
        symmetric,
        notes: vec![format!("queries={}", errors.len()), "units=bounding-sphere-radius".into()],
    })
}

/// Thresholds `0, step, 2·step, …, max`.
pub fn default_thresholds() -> Vec<f64> {
    (0..=25).map(|i| i as f64 * 0.01).collect()
}

/// Index of the nearest target descriptor per source descriptor (Euclidean;
/// ties go to the lower index).
pub fn nearest_match(source: &[Vec<f64>], target: &[Vec<f64>]) -> Result<Vec<usize>, EvalError> {
    if source.is_empty() || target.is_empty() {
        return Err(EvalError::Empty("descriptor set"));
    }
    let dim = target[0].len();
    if let Some(d) = source.iter().chain(target).find(|d| d.len() != dim) {
        return Err(EvalError::DimensionMismatch { expected: dim, found: d.len() });
    }
    Ok(source
        .par_iter()
        .map(|q| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, t) in target.iter().enumerate() {
                let d = sq_dist(q, t);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            best
        })
        .collect())
}

/// RGB in `[0, 1]` from position within the bounding box of `points`.
pub fn position_colors(points: &[Vec3]) -> Vec<[f64; 3]> {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let ext = hi - lo;
    points
        .iter()
        .map(|p| {
            let c = |i: usize| if ext[i] > 0.0 { (p[i] - lo[i]) / ext[i] } else { 0.5 };
            [c(0), c(1), c(2)]
        })
        .collect()
}

/// Colors A by position and gives each B point the color of its
/// nearest-descriptor A point.
pub fn dense_match_colors(
    a_points: &[Vec3],
    a_descriptors: &[Vec<f64>],
    b_descriptors: &[Vec<f64>],
) -> Result<(Vec<[f64; 3]>, Vec<[f64; 3]>), EvalError> {
    if a_points.len() != a_descriptors.len() {
        return Err(EvalError::DimensionMismatch { expected: a_points.len(), found: a_descriptors.len() });
    }
    let colors_a = position_colors(a_points);
    let nn = nearest_match(b_descriptors, a_descriptors)?;
    let colors_b = nn.iter().map(|&i| colors_a[i]).collect();
    Ok((colors_a, colors_b))
}
