use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{LayerSpec, NetworkConfig, PoolingMode, Shape3};
use super::stack::StackInput;
use super::tensor::Tensor;
use super::NetworkError;

/// Name, shape and position of one parameter tensor in the flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSlot {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy)]
struct LayerParams {
    weight: usize,
    bias: usize,
}

/// All learnable parameters, stored as one flat vector in declaration order:
/// per-layer weights and biases, then the reduction matrix W (D rows).
#[derive(Debug, Clone)]
pub struct DescriptorModel {
    config: NetworkConfig,
    shapes: Vec<Shape3>,
    layer_params: Vec<Option<LayerParams>>,
    reduce_offset: usize,
    slots: Vec<ParamSlot>,
    params: Vec<f64>,
}

/// Saved activations of one view for the backward pass.
pub(crate) struct ViewTrace {
    /// `acts[i]` is the input of layer `i`; the last entry is the output.
    acts: Vec<Vec<f64>>,
    argmax: Vec<Vec<u32>>,
}

impl ViewTrace {
    pub(crate) fn output(&self) -> &[f64] {
        self.acts.last().expect("input activation")
    }
}

pub(crate) struct StackTrace {
    views: Vec<ViewTrace>,
    /// Per coordinate, the view (position in canonical order) that supplied
    /// the max.
    winner: Vec<u32>,
    pub(crate) pooled: Vec<f64>,
    pub(crate) descriptor: Vec<f64>,
}

impl DescriptorModel {
    /// He-initialized weights (normal, variance 2 / fan-in), zero biases.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self, NetworkError> {
        let mut model = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for slot in model.slots.clone() {
            if slot.name.ends_with(".bias") {
                continue;
            }
            let fan_in: usize = slot.shape[1..].iter().product();
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            for p in &mut model.params[slot.offset..slot.offset + slot.len] {
                *p = normal.sample(&mut rng);
            }
        }
        Ok(model)
    }

    /// Model with every parameter zero.
    pub fn zeros(config: NetworkConfig) -> Result<Self, NetworkError> {
        config.validate()?;
        let shapes = config.shapes()?;
        let mut slots = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, shape: Vec<usize>| {
            let len = shape.iter().product();
            slots.push(ParamSlot { name, shape, offset, len });
            offset += len;
            offset - len
        };
        let mut layer_params = Vec::with_capacity(config.layers.len());
        for (i, l) in config.layers.iter().enumerate() {
            let input = shapes[i];
            layer_params.push(match *l {
                LayerSpec::Conv { out_channels, kernel, .. } => {
                    let weight = push(format!("layer{i}.conv.weight"), vec![out_channels, input.0, kernel, kernel]);
                    let bias = push(format!("layer{i}.conv.bias"), vec![out_channels]);
                    Some(LayerParams { weight, bias })
                }
                LayerSpec::FullyConnected { out } => {
                    let weight = push(format!("layer{i}.fc.weight"), vec![out, input.0 * input.1 * input.2]);
                    let bias = push(format!("layer{i}.fc.bias"), vec![out]);
                    Some(LayerParams { weight, bias })
                }
                LayerSpec::Pool { .. } | LayerSpec::Relu => None,
            });
        }
        let vd = config.view_descriptor_dim()?;
        let reduce_offset = push("reduce.weight".into(), vec![config.output_dim, vd]);
        Ok(Self {
            config,
            shapes,
            layer_params,
            reduce_offset,
            slots,
            params: vec![0.0; offset],
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn slots(&self) -> &[ParamSlot] {
        &self.slots
    }

    /// Copy of one parameter tensor.
    pub fn tensor(&self, slot: usize) -> Tensor {
        let s = &self.slots[slot];
        Tensor::new(s.shape.clone(), self.params[s.offset..s.offset + s.len].to_vec()).expect("slot shape")
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn view_descriptor_dim(&self) -> usize {
        let s = self.shapes[self.shapes.len() - 1];
        s.0 * s.1 * s.2
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim
    }

    /// Rows of W, `D × view_descriptor_dim`.
    pub fn reduction(&self) -> &[f64] {
        &self.params[self.reduce_offset..]
    }

    pub fn reduction_mut(&mut self) -> &mut [f64] {
        &mut self.params[self.reduce_offset..]
    }

    /// `‖w‖²` over every parameter.
    pub fn squared_norm(&self) -> f64 {
        self.params.iter().map(|p| p * p).sum()
    }

    /// Per-view descriptor `Y_v` of one row-major image.
    pub fn forward_view(&self, image: &[f64]) -> Result<Vec<f64>, NetworkError> {
        let mut t = self.trace_view(image)?;
        Ok(t.acts.pop().expect("output"))
    }

    pub(crate) fn trace_view(&self, image: &[f64]) -> Result<ViewTrace, NetworkError> {
        let n = self.config.input_resolution;
        if image.len() != n * n {
            return Err(NetworkError::ShapeMismatch {
                expected: n * n,
                found: image.len(),
            });
        }
        let mut acts = Vec::with_capacity(self.config.layers.len() + 1);
        let mut argmax = Vec::new();
        acts.push(image.to_vec());
        for (i, layer) in self.config.layers.iter().enumerate() {
            let input = &acts[i];
            let in_shape = self.shapes[i];
            let out_shape = self.shapes[i + 1];
            let out = match *layer {
                LayerSpec::Conv { kernel, stride, .. } => {
                    let p = self.layer_params[i].expect("conv params");
                    let w = &self.params[p.weight..p.bias];
                    let b = &self.params[p.bias..p.bias + out_shape.0];
                    conv_forward(input, in_shape, out_shape, kernel, stride, w, b)
                }
                LayerSpec::Pool { window, stride } => {
                    let (out, idx) = max_pool_forward(input, in_shape, out_shape, window, stride);
                    argmax.push(idx);
                    out
                }
                LayerSpec::Relu => input.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect(),
                LayerSpec::FullyConnected { out } => {
                    let p = self.layer_params[i].expect("fc params");
                    let w = &self.params[p.weight..p.bias];
                    let b = &self.params[p.bias..p.bias + out];
                    fc_forward(input, w, b)
                }
            };
            if out.iter().any(|x| !x.is_finite()) {
                return Err(NetworkError::NonFinite { layer: i });
            }
            acts.push(out);
        }
        Ok(ViewTrace { acts, argmax })
    }

    /// Accumulates parameter gradients for one view given `dL/dY_v`.
    pub(crate) fn backward_view(&self, trace: &ViewTrace, grad_out: &[f64], grad: &mut [f64]) {
        let mut g = grad_out.to_vec();
        let mut pool_idx = trace.argmax.len();
        for i in (0..self.config.layers.len()).rev() {
            let input = &trace.acts[i];
            let in_shape = self.shapes[i];
            let out_shape = self.shapes[i + 1];
            g = match self.config.layers[i] {
                LayerSpec::Conv { kernel, stride, .. } => {
                    let p = self.layer_params[i].expect("conv params");
                    let w = &self.params[p.weight..p.bias];
                    let (gw, rest) = grad[p.weight..].split_at_mut(p.bias - p.weight);
                    conv_backward(input, in_shape, out_shape, kernel, stride, w, &g, gw, &mut rest[..out_shape.0], i > 0)
                }
                LayerSpec::Pool { .. } => {
                    pool_idx -= 1;
                    let mut gi = vec![0.0; input.len()];
                    for (o, &src) in trace.argmax[pool_idx].iter().enumerate() {
                        gi[src as usize] += g[o];
                    }
                    gi
                }
                LayerSpec::Relu => g.iter().zip(input).map(|(&gv, &x)| if x > 0.0 { gv } else { 0.0 }).collect(),
                LayerSpec::FullyConnected { out } => {
                    let p = self.layer_params[i].expect("fc params");
                    let w = &self.params[p.weight..p.bias];
                    let (gw, rest) = grad[p.weight..].split_at_mut(p.bias - p.weight);
                    fc_backward(input, w, &g, gw, &mut rest[..out], i > 0)
                }
            };
        }
    }

    /// `X_p = W · Y_p`.
    pub fn reduce(&self, pooled: &[f64]) -> Result<Vec<f64>, NetworkError> {
        let vd = self.view_descriptor_dim();
        if pooled.len() != vd {
            return Err(NetworkError::ShapeMismatch {
                expected: vd,
                found: pooled.len(),
            });
        }
        Ok(self.reduction().chunks_exact(vd).map(|row| dot(row, pooled)).collect())
    }

    /// Descriptor `X_p` of a view stack.
    pub fn embed_stack(&self, stack: &StackInput) -> Result<Vec<f64>, NetworkError> {
        let views: Result<Vec<Vec<f64>>, _> = stack.images().map(|img| self.forward_view(&img)).collect();
        let (pooled, _) = view_pool(&views?, self.config.pooling)?;
        self.reduce(&pooled)
    }

    pub(crate) fn trace_stack(&self, stack: &StackInput) -> Result<StackTrace, NetworkError> {
        let views: Result<Vec<ViewTrace>, _> = stack.images().map(|img| self.trace_view(&img)).collect();
        let views = views?;
        let outputs: Vec<&[f64]> = views.iter().map(|v| v.output()).collect();
        let (pooled, winner) = pool_refs(&outputs, self.config.pooling)?;
        let descriptor = self.reduce(&pooled)?;
        Ok(StackTrace {
            views,
            winner,
            pooled,
            descriptor,
        })
    }

    /// Accumulates parameter gradients for one stack given `dL/dX_p`.
    pub(crate) fn backward_stack(&self, trace: &StackTrace, grad_x: &[f64], grad: &mut [f64]) {
        let vd = self.view_descriptor_dim();
        let w = self.reduction();
        let gw = &mut grad[self.reduce_offset..];
        let mut gy = vec![0.0; vd];
        for (d, &gx) in grad_x.iter().enumerate() {
            if gx == 0.0 {
                continue;
            }
            let row = &w[d * vd..(d + 1) * vd];
            let grow = &mut gw[d * vd..(d + 1) * vd];
            for k in 0..vd {
                grow[k] += gx * trace.pooled[k];
                gy[k] += gx * row[k];
            }
        }
        let nv = trace.views.len();
        let mut per_view = vec![vec![0.0; vd]; nv];
        match self.config.pooling {
            PoolingMode::Max => {
                for k in 0..vd {
                    per_view[trace.winner[k] as usize][k] = gy[k];
                }
            }
            PoolingMode::Average => {
                for pv in &mut per_view {
                    for k in 0..vd {
                        pv[k] = gy[k] / nv as f64;
                    }
                }
            }
        }
        for (v, g) in trace.views.iter().zip(&per_view) {
            if g.iter().any(|&x| x != 0.0) {
                self.backward_view(v, g, grad);
            }
        }
    }
}

/// Element-wise max (first occurrence wins ties) or mean over views.
/// Returns the pooled vector and, for max, the winning view per coordinate.
pub fn view_pool(views: &[Vec<f64>], mode: PoolingMode) -> Result<(Vec<f64>, Vec<u32>), NetworkError> {
    let refs: Vec<&[f64]> = views.iter().map(|v| v.as_slice()).collect();
    pool_refs(&refs, mode)
}

fn pool_refs(views: &[&[f64]], mode: PoolingMode) -> Result<(Vec<f64>, Vec<u32>), NetworkError> {
    let first = views.first().ok_or(NetworkError::EmptyStack)?;
    let dim = first.len();
    if let Some(v) = views.iter().find(|v| v.len() != dim) {
        return Err(NetworkError::ShapeMismatch {
            expected: dim,
            found: v.len(),
        });
    }
    let mut pooled = first.to_vec();
    let mut winner = vec![0u32; dim];
    match mode {
        PoolingMode::Max => {
            for (vi, v) in views.iter().enumerate().skip(1) {
                for k in 0..dim {
                    if v[k] > pooled[k] {
                        pooled[k] = v[k];
                        winner[k] = vi as u32;
                    }
                }
            }
        }
        PoolingMode::Average => {
            for v in &views[1..] {
                for k in 0..dim {
                    pooled[k] += v[k];
                }
            }
            for p in &mut pooled {
                *p /= views.len() as f64;
            }
        }
    }
    Ok((pooled, winner))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn im2col(input: &[f64], in_shape: Shape3, out_shape: Shape3, kernel: usize, stride: usize) -> Vec<f64> {
    let (c, h, w) = in_shape;
    let (_, ho, wo) = out_shape;
    let p = ho * wo;
    let mut cols = vec![0.0; c * kernel * kernel * p];
    for ci in 0..c {
        for ky in 0..kernel {
            for kx in 0..kernel {
                let row = (ci * kernel + ky) * kernel + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..ho {
                    let src = &input[ci * h * w + (oy * stride + ky) * w..];
                    for ox in 0..wo {
                        dst[oy * wo + ox] = src[ox * stride + kx];
                    }
                }
            }
        }
    }
    cols
}

fn conv_forward(
    input: &[f64],
    in_shape: Shape3,
    out_shape: Shape3,
    kernel: usize,
    stride: usize,
    weight: &[f64],
    bias: &[f64],
) -> Vec<f64> {
    let cols = im2col(input, in_shape, out_shape, kernel, stride);
    let (o, ho, wo) = out_shape;
    let p = ho * wo;
    let ckk = in_shape.0 * kernel * kernel;
    let mut out = vec![0.0; o * p];
    for (oc, row) in out.chunks_exact_mut(p).enumerate() {
        row.fill(bias[oc]);
    }
    gemm(o, ckk, p, weight, (ckk, 1), &cols, (p, 1), &mut out, 1.0);
    out
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    input: &[f64],
    in_shape: Shape3,
    out_shape: Shape3,
    kernel: usize,
    stride: usize,
    weight: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    need_input: bool,
) -> Vec<f64> {
    let cols = im2col(input, in_shape, out_shape, kernel, stride);
    let (o, ho, wo) = out_shape;
    let p = ho * wo;
    let ckk = in_shape.0 * kernel * kernel;
    for (oc, row) in grad_out.chunks_exact(p).enumerate() {
        grad_b[oc] += row.iter().sum::<f64>();
    }
    // dW += dOut · colsᵀ
    gemm(o, p, ckk, grad_out, (p, 1), &cols, (1, p), grad_w, 1.0);
    if !need_input {
        return Vec::new();
    }
    // dCols = Wᵀ · dOut, then scatter back
    let mut dcols = vec![0.0; ckk * p];
    gemm(ckk, o, p, weight, (1, ckk), grad_out, (p, 1), &mut dcols, 0.0);
    let (c, h, w) = in_shape;
    let mut gi = vec![0.0; c * h * w];
    for ci in 0..c {
        for ky in 0..kernel {
            for kx in 0..kernel {
                let row = (ci * kernel + ky) * kernel + kx;
                let src = &dcols[row * p..(row + 1) * p];
                for oy in 0..ho {
                    let base = ci * h * w + (oy * stride + ky) * w + kx;
                    for ox in 0..wo {
                        gi[base + ox * stride] += src[oy * wo + ox];
                    }
                }
            }
        }
    }
    gi
}

/// `c = a·b + beta·c` for row-major `c` (`m × n`); `a` and `b` strides are
/// `(row, col)`.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], sa: (usize, usize), b: &[f64], sb: (usize, usize), c: &mut [f64], beta: f64) {
    assert!(a.len() >= (m - 1) * sa.0 + (k - 1) * sa.1 + 1);
    assert!(b.len() >= (k - 1) * sb.0 + (n - 1) * sb.1 + 1);
    assert!(c.len() >= m * n);
    // SAFETY: bounds of every operand were checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.0 as isize,
            sa.1 as isize,
            b.as_ptr(),
            sb.0 as isize,
            sb.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn max_pool_forward(input: &[f64], in_shape: Shape3, out_shape: Shape3, window: usize, stride: usize) -> (Vec<f64>, Vec<u32>) {
    let (c, h, w) = in_shape;
    let (_, ho, wo) = out_shape;
    let mut out = Vec::with_capacity(c * ho * wo);
    let mut idx = Vec::with_capacity(c * ho * wo);
    for ci in 0..c {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for dy in 0..window {
                    for dx in 0..window {
                        let i = ci * h * w + (oy * stride + dy) * w + ox * stride + dx;
                        if input[i] > best {
                            best = input[i];
                            arg = i;
                        }
                    }
                }
                out.push(best);
                idx.push(arg as u32);
            }
        }
    }
    (out, idx)
}

fn fc_forward(input: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    weight
        .chunks_exact(input.len())
        .zip(bias)
        .map(|(row, b)| dot(row, input) + b)
        .collect()
}

fn fc_backward(input: &[f64], weight: &[f64], grad_out: &[f64], grad_w: &mut [f64], grad_b: &mut [f64], need_input: bool) -> Vec<f64> {
    let n = input.len();
    let mut gi = if need_input { vec![0.0; n] } else { Vec::new() };
    for (o, &g) in grad_out.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grad_b[o] += g;
        let row = &weight[o * n..(o + 1) * n];
        let grow = &mut grad_w[o * n..(o + 1) * n];
        for j in 0..n {
            grow[j] += g * input[j];
        }
        if need_input {
            for j in 0..n {
                gi[j] += g * row[j];
            }
        }
    }
    gi
}
