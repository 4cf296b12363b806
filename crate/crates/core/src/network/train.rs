use std::collections::BTreeMap;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Vec3;
use crate::registration::CorrespondenceSet;

use super::adam::{adam_step, AdamParams, TrainState};
use super::loss::{backward, LossParams, TrainingBatch, TrainingPair};
use super::model::DescriptorModel;
use super::stack::StackInput;
use super::NetworkError;

/// Sample positions and rendered stacks of one training shape. Points
/// without a stack never enter a batch.
#[derive(Debug, Clone)]
pub struct TrainShape {
    pub shape_id: u32,
    pub positions: Vec<Vec3>,
    pub stacks: Vec<Option<StackInput>>,
}

impl TrainShape {
    fn diagonal(&self) -> f64 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &self.positions {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (hi - lo).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub positives: usize,
    pub negatives: usize,
    pub adam: AdamParams,
    pub loss: LossParams,
    /// Negatives closer than this fraction of the shape diagonal to the true
    /// match are rejected.
    pub negative_exclusion: f64,
    /// When set, each stack in a batch is cut to this many randomly chosen
    /// views.
    pub views_per_stack: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            positives: 32,
            negatives: 32,
            adam: AdamParams::default(),
            loss: LossParams::default(),
            negative_exclusion: 0.05,
            views_per_stack: None,
            seed: 0,
        }
    }
}

/// Registered shapes and their usable correspondences, grouped by shape pair.
#[derive(Debug)]
pub struct TrainingData {
    shapes: BTreeMap<u32, TrainShape>,
    diagonals: BTreeMap<u32, f64>,
    groups: Vec<((u32, u32), Vec<(u32, u32)>)>,
}

impl TrainingData {
    pub fn new(shapes: Vec<TrainShape>, correspondences: &CorrespondenceSet) -> Self {
        let diagonals = shapes.iter().map(|s| (s.shape_id, s.diagonal())).collect();
        let shapes: BTreeMap<u32, TrainShape> = shapes.into_iter().map(|s| (s.shape_id, s)).collect();
        let has = |shape: u32, idx: u32| {
            shapes
                .get(&shape)
                .and_then(|s| s.stacks.get(idx as usize))
                .is_some_and(|s| s.is_some())
        };
        let mut groups: BTreeMap<(u32, u32), Vec<(u32, u32)>> = BTreeMap::new();
        for c in &correspondences.pairs {
            if c.shape_a != c.shape_b && has(c.shape_a, c.index_a) && has(c.shape_b, c.index_b) {
                groups.entry((c.shape_a, c.shape_b)).or_default().push((c.index_a, c.index_b));
            }
        }
        Self {
            shapes,
            diagonals,
            groups: groups.into_iter().collect(),
        }
    }

    /// Usable correspondences.
    pub fn pair_count(&self) -> usize {
        self.groups.iter().map(|(_, g)| g.len()).sum()
    }

    fn stack(&self, shape: u32, idx: u32) -> &StackInput {
        self.shapes[&shape].stacks[idx as usize].as_ref().expect("filtered on construction")
    }
}

pub struct TrainOutcome {
    pub model: DescriptorModel,
    pub state: TrainState,
    /// Batch objective before each update.
    pub losses: Vec<f64>,
}

fn subsample(stack: &StackInput, k: Option<usize>, rng: &mut ChaCha8Rng) -> Result<StackInput, NetworkError> {
    match k {
        Some(k) if k < stack.len() => {
            let ids: Vec<u32> = sample_indices(rng, stack.len(), k).into_iter().map(|i| stack.ids()[i]).collect();
            stack.select(&ids)
        }
        _ => Ok(stack.clone()),
    }
}

/// Siamese training with the contrastive objective and Adam.
///
/// Every iteration draws `positives` corresponding pairs (a random shape
/// pair, then a random correspondence in it) and `negatives` pairs whose
/// second point lies at least `negative_exclusion · diag` from the true
/// match. `progress` sees each iteration's loss.
pub fn train(
    mut model: DescriptorModel,
    data: &TrainingData,
    config: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainOutcome, NetworkError> {
    if data.pair_count() < config.positives.max(1) {
        return Err(NetworkError::Dataset(format!(
            "{} usable correspondences, a batch needs {}",
            data.pair_count(),
            config.positives
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = TrainState::new(model.param_count(), config.adam);
    let mut losses = Vec::with_capacity(config.iterations);
    for it in 0..config.iterations {
        let mut owned: Vec<(StackInput, StackInput, bool)> = Vec::with_capacity(config.positives + config.negatives);
        for _ in 0..config.positives {
            let ((sa, sb), g) = &data.groups[rng.random_range(0..data.groups.len())];
            let (ia, ib) = g[rng.random_range(0..g.len())];
            let a = subsample(data.stack(*sa, ia), config.views_per_stack, &mut rng)?;
            let b = subsample(data.stack(*sb, ib), config.views_per_stack, &mut rng)?;
            owned.push((a, b, true));
        }
        for _ in 0..config.negatives {
            let ((sa, sb), g) = &data.groups[rng.random_range(0..data.groups.len())];
            let (ia, ib) = g[rng.random_range(0..g.len())];
            let shape_b = &data.shapes[sb];
            let matched = shape_b.positions[ib as usize];
            let min_dist = config.negative_exclusion * data.diagonals[sb];
            let mut pick = None;
            for _ in 0..1000 {
                let c = rng.random_range(0..shape_b.positions.len());
                if shape_b.stacks[c].is_some() && (shape_b.positions[c] - matched).norm() >= min_dist {
                    pick = Some(c as u32);
                    break;
                }
            }
            let Some(c) = pick else {
                return Err(NetworkError::Dataset(format!("shape {sb}: no point far enough from a match for a negative")));
            };
            let a = subsample(data.stack(*sa, ia), config.views_per_stack, &mut rng)?;
            let b = subsample(data.stack(*sb, c), config.views_per_stack, &mut rng)?;
            owned.push((a, b, false));
        }
        let batch = TrainingBatch {
            pairs: owned
                .iter()
                .map(|(a, b, corresponding)| TrainingPair {
                    a,
                    b,
                    corresponding: *corresponding,
                })
                .collect(),
        };
        let (loss, grad) = backward(&model, &batch, &config.loss)?;
        adam_step(&mut state, model.params_mut(), &grad);
        progress(it, loss);
        losses.push(loss);
    }
    Ok(TrainOutcome { model, state, losses })
}
