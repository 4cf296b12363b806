//! In-memory toy pipeline: part-labeled synthetic shapes, registration
//! correspondences, training and evaluation on rotated held-out shapes.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::evaluation::{cmc_curve, correspondence_accuracy, Candidates, EvalCurve, EvalError, FeaturePointSet, ShapeDescriptors};
use crate::geometry::{area_weighted_sample, bounding_sphere, closest_surface_point, GeometryError, PointSample, Vec3};
use crate::network::{train, AdamParams, DescriptorModel, NetworkConfig, NetworkError, StackInput, TrainConfig, TrainOutcome, TrainShape, TrainingData};
use crate::registration::{generate_pair_correspondences, CorrespondenceSet, LabeledPointSet, RegistrationError, RegistrationParams};
use crate::render::Scene;
use crate::seed::{item_seed, stage_seed};
use crate::synthetic::{random_rotation, toy_shape, ToyClass, ToyShape};
use crate::viewselect::{ViewConfig, ViewError, ViewStackBuilder};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    View(#[from] ViewError),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A toy shape with its samples and rendered stacks. Registration runs on
/// the canonical (unrotated) samples; rendering uses the rotated shape.
#[derive(Debug, Clone)]
pub struct PreparedShape {
    pub shape_id: u32,
    pub shape: ToyShape,
    pub canonical: LabeledPointSet,
    /// Rotated samples; feature points (if any) follow the dense samples.
    pub samples: Vec<PointSample>,
    pub n_dense: usize,
    /// Feature id to index into `samples`.
    pub feature_index: BTreeMap<u32, usize>,
    /// `None` where the point is hidden from every direction.
    pub stacks: Vec<Option<StackInput>>,
    pub radius: f64,
}

/// Builds shape `shape_id` of `class`, samples it, rotates it and renders
/// every stack at `net_resolution`.
#[allow(clippy::too_many_arguments)]
pub fn prepare_shape(
    shape_id: u32,
    class: ToyClass,
    seed: u64,
    rotate: bool,
    n_samples: usize,
    with_features: bool,
    view: &ViewConfig,
    net_resolution: usize,
) -> Result<PreparedShape, ExperimentError> {
    let canonical_shape = toy_shape(class, item_seed(stage_seed(seed, "toy.shape"), shape_id as u64));
    let dense = area_weighted_sample(&canonical_shape.mesh, n_samples, item_seed(stage_seed(seed, "toy.sample"), shape_id as u64))?;
    let canonical = LabeledPointSet::new(
        shape_id,
        dense.iter().map(|s| s.position).collect(),
        dense.iter().map(|s| s.label.unwrap_or(0)).collect(),
    )?;
    let rot = if rotate {
        random_rotation(item_seed(stage_seed(seed, "toy.rotation"), shape_id as u64))
    } else {
        nalgebra::Matrix3::identity()
    };
    let shape = canonical_shape.transformed(&rot);
    let mut samples: Vec<PointSample> = dense
        .iter()
        .map(|s| PointSample {
            position: rot * s.position,
            normal: rot * s.normal,
            ..*s
        })
        .collect();
    let mut feature_index = BTreeMap::new();
    if with_features {
        for (&f, p) in &shape.features {
            feature_index.insert(f, samples.len());
            samples.push(closest_surface_point(&shape.mesh, p)?);
        }
    }
    let radius = bounding_sphere(&shape.mesh)?.radius;
    let builder = ViewStackBuilder::new(
        Scene::Mesh(&shape.mesh),
        &samples,
        view.clone(),
        item_seed(stage_seed(seed, "toy.views"), shape_id as u64),
    )?;
    let indices: Vec<usize> = (0..samples.len()).collect();
    let stacks = indices
        .par_iter()
        .map(|&i| match builder.stack(i) {
            Ok(s) => StackInput::from_view_stack(&s, net_resolution).map(Some),
            Err(ViewError::ZeroVisibility { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        })
        .collect::<Result<Vec<_>, NetworkError>>()?;
    drop(builder);
    Ok(PreparedShape {
        shape_id,
        shape,
        canonical,
        n_dense: n_samples,
        samples,
        feature_index,
        stacks,
        radius,
    })
}

/// Registration statistics of one class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistrationStats {
    pub category: String,
    pub shapes: usize,
    pub pairs: usize,
    pub skipped: usize,
    pub correspondences: usize,
}

/// Registers every unordered same-class pair (lower id as A).
pub fn register_pairs(shapes: &[&PreparedShape], params: &RegistrationParams) -> (CorrespondenceSet, Vec<RegistrationStats>) {
    let mut by_class: BTreeMap<&str, Vec<&PreparedShape>> = BTreeMap::new();
    for s in shapes {
        by_class.entry(s.shape.class.name()).or_default().push(s);
    }
    let mut all = CorrespondenceSet::default();
    let mut stats = Vec::new();
    for (name, members) in by_class {
        let pairs: Vec<(usize, usize)> =
            (0..members.len()).flat_map(|i| (i + 1..members.len()).map(move |j| (i, j))).collect();
        let results: Vec<Option<CorrespondenceSet>> = pairs
            .par_iter()
            .map(|&(i, j)| generate_pair_correspondences(&members[i].canonical, &members[j].canonical, params).ok().map(|r| r.0))
            .collect();
        let mut row = RegistrationStats {
            category: name.to_string(),
            shapes: members.len(),
            pairs: 0,
            skipped: 0,
            correspondences: 0,
        };
        for r in results {
            match r {
                Some(set) => {
                    row.pairs += 1;
                    row.correspondences += set.len();
                    all.pairs.extend(set.pairs);
                }
                None => row.skipped += 1,
            }
        }
        stats.push(row);
    }
    (all, stats)
}

pub fn training_data(shapes: &[&PreparedShape], correspondences: &CorrespondenceSet) -> TrainingData {
    let train_shapes = shapes
        .iter()
        .map(|s| TrainShape {
            shape_id: s.shape_id,
            positions: s.samples.iter().map(|p| p.position).collect(),
            stacks: s.stacks.clone(),
        })
        .collect();
    TrainingData::new(train_shapes, correspondences)
}

/// Descriptors of every sample with a stack, optionally restricted to
/// some view ids.
pub fn embed_shape(
    model: &DescriptorModel,
    shape: &PreparedShape,
    view_ids: Option<&[u32]>,
) -> Result<Vec<Option<Vec<f64>>>, ExperimentError> {
    shape
        .stacks
        .par_iter()
        .map(|s| match s {
            None => Ok(None),
            Some(stack) => {
                let stack = match view_ids {
                    Some(ids) => stack.select(ids)?,
                    None => stack.clone(),
                };
                Ok(Some(model.embed_stack(&stack)?))
            }
        })
        .collect()
}

/// Evaluation input from per-sample descriptors. Features without a
/// descriptor are dropped from that shape.
pub fn shape_descriptors(shape: &PreparedShape, descriptors: &[Option<Vec<f64>>], n_dense: usize) -> ShapeDescriptors {
    let samples = (0..n_dense.min(shape.n_dense))
        .filter_map(|i| descriptors[i].clone().map(|d| (shape.samples[i].position, d)))
        .collect();
    let features = shape
        .feature_index
        .iter()
        .filter_map(|(&f, &i)| descriptors[i].clone().map(|d| (f, (shape.samples[i].position, d))))
        .collect();
    ShapeDescriptors {
        shape_id: shape.shape_id,
        scale: shape.radius,
        samples,
        features,
    }
}

pub fn feature_set(shapes: &[&PreparedShape], descs: &[ShapeDescriptors]) -> FeaturePointSet {
    let mut symmetry = BTreeMap::new();
    for s in shapes {
        symmetry.extend(s.shape.class.symmetry());
    }
    let map = descs
        .iter()
        .map(|d| (d.shape_id, d.features.iter().map(|(&f, (p, _))| (f, *p)).collect::<BTreeMap<u32, Vec3>>()))
        .collect();
    FeaturePointSet::new(map, symmetry).expect("class symmetry maps are involutions")
}

/// The four reported curves: CMC and accuracy, symmetric and not.
pub struct Curves {
    pub cmc_sym: EvalCurve,
    pub cmc_nonsym: EvalCurve,
    pub acc_sym: EvalCurve,
    pub acc_nonsym: EvalCurve,
}

pub fn evaluate(
    descs: &[ShapeDescriptors],
    features: &FeaturePointSet,
    candidates: Candidates,
    max_rank: usize,
    thresholds: &[f64],
) -> Result<Curves, ExperimentError> {
    Ok(Curves {
        cmc_sym: cmc_curve(descs, features, true, candidates, max_rank)?,
        cmc_nonsym: cmc_curve(descs, features, false, candidates, max_rank)?,
        acc_sym: correspondence_accuracy(descs, features, true, candidates, thresholds)?,
        acc_nonsym: correspondence_accuracy(descs, features, false, candidates, thresholds)?,
    })
}

/// Toy experiment settings. The defaults are the two-class overfit setup:
/// 32 px inputs, small batches and a higher learning rate than the
/// pipeline default, trained on every view of each stack.
#[derive(Debug, Clone)]
pub struct ToyConfig {
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub view: ViewConfig,
    pub network: NetworkConfig,
    pub registration: RegistrationParams,
    pub training: TrainConfig,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        let network = NetworkConfig::toy(32);
        Self {
            train_per_class: 20,
            test_per_class: 5,
            train_samples: 96,
            test_samples: 128,
            view: ViewConfig {
                resolution: 32,
                supersample: 2,
                visibility_resolution: 128,
                ..ViewConfig::default()
            },
            network,
            registration: RegistrationParams::default(),
            training: TrainConfig {
                iterations: 2000,
                positives: 8,
                negatives: 8,
                adam: AdamParams {
                    learning_rate: 1e-3,
                    ..AdamParams::default()
                },
                ..TrainConfig::default()
            },
            seed: 0,
        }
    }
}

pub struct ToyData {
    pub train: Vec<PreparedShape>,
    pub test: Vec<PreparedShape>,
    pub correspondences: CorrespondenceSet,
    pub stats: Vec<RegistrationStats>,
}

/// Shapes alternate between the two classes; test shapes follow the
/// training shapes in id order and carry feature points.
pub fn build_toy_data(cfg: &ToyConfig) -> Result<ToyData, ExperimentError> {
    let classes = [ToyClass::Wings, ToyClass::Legs];
    let n_train = 2 * cfg.train_per_class;
    let n_test = 2 * cfg.test_per_class;
    let res = cfg.network.input_resolution;
    let mut train = Vec::with_capacity(n_train);
    for i in 0..n_train {
        train.push(prepare_shape(i as u32, classes[i % 2], cfg.seed, true, cfg.train_samples, false, &cfg.view, res)?);
    }
    let mut test = Vec::with_capacity(n_test);
    for i in 0..n_test {
        let id = (n_train + i) as u32;
        test.push(prepare_shape(id, classes[i % 2], cfg.seed, true, cfg.test_samples, true, &cfg.view, res)?);
    }
    let refs: Vec<&PreparedShape> = train.iter().collect();
    let (correspondences, stats) = register_pairs(&refs, &cfg.registration);
    Ok(ToyData {
        train,
        test,
        correspondences,
        stats,
    })
}

pub fn train_toy(cfg: &ToyConfig, data: &ToyData, progress: impl FnMut(usize, f64)) -> Result<TrainOutcome, ExperimentError> {
    let refs: Vec<&PreparedShape> = data.train.iter().collect();
    let td = training_data(&refs, &data.correspondences);
    let model = DescriptorModel::new(cfg.network.clone(), stage_seed(cfg.seed, "toy.init"))?;
    let training = TrainConfig {
        seed: stage_seed(cfg.seed, "toy.train"),
        ..cfg.training.clone()
    };
    Ok(train(model, &td, &training, progress)?)
}

/// Embeds the test shapes, optionally with a view subset.
pub fn embed_test_shapes(
    model: &DescriptorModel,
    data: &ToyData,
    view_ids: Option<&[u32]>,
) -> Result<Vec<ShapeDescriptors>, ExperimentError> {
    data.test
        .iter()
        .map(|s| Ok(shape_descriptors(s, &embed_shape(model, s, view_ids)?, s.n_dense)))
        .collect()
}

/// Curves for descriptors produced by [`embed_test_shapes`].
pub fn evaluate_toy(
    data: &ToyData,
    descs: &[ShapeDescriptors],
    candidates: Candidates,
    max_rank: usize,
) -> Result<Curves, ExperimentError> {
    let refs: Vec<&PreparedShape> = data.test.iter().collect();
    let features = feature_set(&refs, descs);
    evaluate(descs, &features, candidates, max_rank, &crate::evaluation::default_thresholds())
}

/// View ids of a K·M·L stack keeping in-plane rotation 0 and the listed
/// radius indices.
pub fn view_subset(view: &ViewConfig, radii: &[usize]) -> Vec<u32> {
    let (k, m, l) = (view.n_medoids, view.radii.len(), view.n_inplane);
    let mut ids = Vec::new();
    for s in 0..k {
        for &r in radii {
            ids.push(((s * m + r) * l) as u32);
        }
    }
    ids.sort();
    ids
}
