use rayon::prelude::*;

use super::model::DescriptorModel;
use super::stack::StackInput;
use super::NetworkError;

/// Euclidean distance between descriptors.
pub fn descriptor_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Loss of one pair and its gradients with respect to `x_a` and `x_b`.
///
/// Corresponding pairs cost `D²`; non-corresponding pairs cost
/// `max(m − D, 0)²`, with zero gradient at `D = 0`.
pub fn contrastive_loss(x_a: &[f64], x_b: &[f64], corresponding: bool, margin: f64) -> (f64, Vec<f64>, Vec<f64>) {
    assert_eq!(x_a.len(), x_b.len(), "descriptor dimensions differ");
    let diff: Vec<f64> = x_a.iter().zip(x_b).map(|(a, b)| a - b).collect();
    let d2: f64 = diff.iter().map(|d| d * d).sum();
    if corresponding {
        let ga: Vec<f64> = diff.iter().map(|d| 2.0 * d).collect();
        let gb = ga.iter().map(|g| -g).collect();
        return (d2, ga, gb);
    }
    let d = d2.sqrt();
    if d >= margin {
        return (0.0, vec![0.0; diff.len()], vec![0.0; diff.len()]);
    }
    let loss = (margin - d) * (margin - d);
    if d == 0.0 {
        return (loss, vec![0.0; diff.len()], vec![0.0; diff.len()]);
    }
    let s = -2.0 * (margin - d) / d;
    let ga: Vec<f64> = diff.iter().map(|x| s * x).collect();
    let gb = ga.iter().map(|g| -g).collect();
    (loss, ga, gb)
}

#[derive(Debug, Clone, Copy)]
pub struct TrainingPair<'a> {
    pub a: &'a StackInput,
    pub b: &'a StackInput,
    pub corresponding: bool,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingBatch<'a> {
    pub pairs: Vec<TrainingPair<'a>>,
}

/// Margin `m` and weight decay `λ` of the training objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    pub margin: f64,
    pub weight_decay: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            margin: 1.0,
            weight_decay: 0.0005,
        }
    }
}

// Fixed so the summation order does not depend on the thread count.
const CHUNK: usize = 4;

/// `Σ pair losses + λ‖w‖²`.
pub fn batch_loss(model: &DescriptorModel, batch: &TrainingBatch, params: &LossParams) -> Result<f64, NetworkError> {
    let losses: Result<Vec<f64>, NetworkError> = batch
        .pairs
        .par_iter()
        .map(|p| {
            let xa = model.embed_stack(p.a)?;
            let xb = model.embed_stack(p.b)?;
            Ok(contrastive_loss(&xa, &xb, p.corresponding, params.margin).0)
        })
        .collect();
    Ok(losses?.iter().sum::<f64>() + params.weight_decay * model.squared_norm())
}

/// Objective value and its exact gradient with respect to every parameter.
/// Both branches of a pair share the model, so their contributions add.
pub fn backward(
    model: &DescriptorModel,
    batch: &TrainingBatch,
    params: &LossParams,
) -> Result<(f64, Vec<f64>), NetworkError> {
    let n = model.param_count();
    let chunks: Result<Vec<(f64, Vec<f64>)>, NetworkError> = batch
        .pairs
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grad = vec![0.0; n];
            let mut loss = 0.0;
            for p in chunk {
                let ta = model.trace_stack(p.a)?;
                let tb = model.trace_stack(p.b)?;
                let (l, ga, gb) = contrastive_loss(&ta.descriptor, &tb.descriptor, p.corresponding, params.margin);
                loss += l;
                model.backward_stack(&ta, &ga, &mut grad);
                model.backward_stack(&tb, &gb, &mut grad);
            }
            Ok((loss, grad))
        })
        .collect();
    let mut grad = vec![0.0; n];
    let mut loss = 0.0;
    for (l, g) in chunks? {
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    for (g, w) in grad.iter_mut().zip(model.params()) {
        *g += 2.0 * params.weight_decay * w;
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(NetworkError::NonFinite { layer: usize::MAX });
    }
    Ok((loss + params.weight_decay * model.squared_norm(), grad))
}
