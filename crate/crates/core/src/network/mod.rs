//! Multi-view descriptor network: per-view convolutional layers, view
//! pooling, a linear reduction to `D` dimensions, the contrastive training
//! objective and Adam.

mod adam;
mod config;
pub mod io;
mod loss;
mod model;
mod stack;
mod tensor;
mod train;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::PointSample;
use crate::render::Scene;
use crate::viewselect::{ViewConfig, ViewError, ViewStackBuilder};

pub use adam::{adam_step, AdamParams, TrainState};
pub use config::{parse_layers, LayerSpec, NetworkConfig, PoolingMode, Shape3};
pub use loss::{backward, batch_loss, contrastive_loss, descriptor_distance, LossParams, TrainingBatch, TrainingPair};
pub use model::{view_pool, DescriptorModel, ParamSlot};
pub use stack::StackInput;
pub use tensor::Tensor;
pub use train::{train, TrainConfig, TrainOutcome, TrainShape, TrainingData};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("shape mismatch: expected {expected} values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite activation after layer {layer}")]
    NonFinite { layer: usize },
    #[error("view stack is empty")]
    EmptyStack,
    #[error("network config: {0}")]
    Config(String),
    #[error("training data: {0}")]
    Dataset(String),
    #[error("{section}: {message}")]
    Format { section: String, message: String },
    #[error(transparent)]
    View(#[from] ViewError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `X_p` of one surface point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDescriptor {
    pub shape_id: u32,
    pub point_id: u32,
    pub values: Vec<f64>,
}

/// Renders the view stack of `samples[index]` and runs it through the model.
pub fn embed_point(
    scene: Scene,
    samples: &[PointSample],
    index: usize,
    model: &DescriptorModel,
    view_config: &ViewConfig,
    seed: u64,
    shape_id: u32,
) -> Result<PointDescriptor, NetworkError> {
    let builder = ViewStackBuilder::new(scene, samples, view_config.clone(), seed)?;
    embed_with(&builder, index, model, shape_id)
}

/// Descriptors for several samples of one shape, sharing the visibility
/// pre-pass.
pub fn embed_points(
    builder: &ViewStackBuilder,
    indices: &[usize],
    model: &DescriptorModel,
    shape_id: u32,
) -> Vec<Result<PointDescriptor, NetworkError>> {
    indices.par_iter().map(|&i| embed_with(builder, i, model, shape_id)).collect()
}

fn embed_with(
    builder: &ViewStackBuilder,
    index: usize,
    model: &DescriptorModel,
    shape_id: u32,
) -> Result<PointDescriptor, NetworkError> {
    let stack = builder.stack(index)?;
    let input = StackInput::from_view_stack(&stack, model.config().input_resolution)?;
    Ok(PointDescriptor {
        shape_id,
        point_id: index as u32,
        values: model.embed_stack(&input)?,
    })
}
