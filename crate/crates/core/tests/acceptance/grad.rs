//! Central finite differences of the training objective, one parameter at a
//! time, without re-running the whole network for every perturbation.
//!
//! A parameter only enters its own layer linearly, so a perturbation starts
//! as a known change of that layer's output. The change is pushed forward as
//! a sparse delta through the remaining layers, the view pooling, the
//! reduction and the pair losses. Working on deltas instead of re-evaluating
//! absolute values keeps the difference free of cancellation, so a small
//! step stays accurate.

use mvdesc::network::{DescriptorModel, LayerSpec, LossParams, PoolingMode, Shape3, StackInput};

#[derive(Debug, Clone, Default)]
pub struct Sparse {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl Sparse {
    fn from_dense(buf: &mut [f64], touched: &mut Vec<usize>) -> Self {
        touched.sort_unstable();
        touched.dedup();
        let mut out = Sparse::default();
        for &i in touched.iter() {
            if buf[i] != 0.0 {
                out.idx.push(i);
                out.val.push(buf[i]);
            }
            buf[i] = 0.0;
        }
        touched.clear();
        out
    }
}

#[derive(Clone, Copy)]
struct Offsets {
    weight: usize,
    bias: usize,
}

/// Independent plain-loop forward of the model, plus the delta machinery.
pub struct Oracle<'a> {
    layers: Vec<LayerSpec>,
    shapes: Vec<Shape3>,
    pooling: PoolingMode,
    w: &'a [f64],
    offsets: Vec<Option<Offsets>>,
    reduce: usize,
    d: usize,
    vd: usize,
}

/// Which layer a parameter belongs to and its index within that tensor.
#[derive(Debug, Clone, Copy)]
enum Param {
    Weight { layer: usize, index: usize },
    Bias { layer: usize, index: usize },
    Reduce { row: usize, col: usize },
}

/// Base activations of one view: `acts[0]` is the image, `acts[i + 1]` the
/// output of layer `i`.
pub struct ViewActs {
    acts: Vec<Vec<f64>>,
}

pub struct StackActs {
    views: Vec<ViewActs>,
    pooled: Vec<f64>,
    pub descriptor: Vec<f64>,
}

impl<'a> Oracle<'a> {
    pub fn new(model: &'a DescriptorModel) -> Self {
        let cfg = model.config();
        let find = |name: String| model.slots().iter().find(|s| s.name == name).map(|s| s.offset);
        let offsets = cfg
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let kind = match l {
                    LayerSpec::Conv { .. } => "conv",
                    LayerSpec::FullyConnected { .. } => "fc",
                    _ => return None,
                };
                Some(Offsets {
                    weight: find(format!("layer{i}.{kind}.weight")).expect("weight slot"),
                    bias: find(format!("layer{i}.{kind}.bias")).expect("bias slot"),
                })
            })
            .collect();
        let shapes = cfg.shapes().expect("valid config");
        let last = *shapes.last().unwrap();
        Self {
            layers: cfg.layers.clone(),
            shapes,
            pooling: cfg.pooling,
            w: model.params(),
            offsets,
            reduce: find("reduce.weight".into()).expect("reduce slot"),
            d: cfg.output_dim,
            vd: last.0 * last.1 * last.2,
        }
    }

    fn locate(&self, p: usize) -> Param {
        if p >= self.reduce {
            let k = p - self.reduce;
            return Param::Reduce {
                row: k / self.vd,
                col: k % self.vd,
            };
        }
        for (layer, off) in self.offsets.iter().enumerate() {
            let Some(off) = off else { continue };
            let (o, i) = (self.shapes[layer + 1], self.shapes[layer]);
            let wlen = match self.layers[layer] {
                LayerSpec::Conv { kernel, .. } => o.0 * i.0 * kernel * kernel,
                _ => o.0 * i.0 * i.1 * i.2,
            };
            if p >= off.weight && p < off.weight + wlen {
                return Param::Weight {
                    layer,
                    index: p - off.weight,
                };
            }
            if p >= off.bias && p < off.bias + o.0 {
                return Param::Bias {
                    layer,
                    index: p - off.bias,
                };
            }
        }
        panic!("parameter {p} has no slot");
    }

    pub fn forward_view(&self, image: Vec<f64>) -> ViewActs {
        let mut acts = vec![image];
        for (li, layer) in self.layers.iter().enumerate() {
            let (c, h, wd) = self.shapes[li];
            let (oc, oh, ow) = self.shapes[li + 1];
            let x = &acts[li];
            let mut out = vec![0.0; oc * oh * ow];
            match *layer {
                LayerSpec::Conv { kernel, stride, .. } => {
                    let off = self.offsets[li].unwrap();
                    for o in 0..oc {
                        for y in 0..oh {
                            for xx in 0..ow {
                                let mut s = self.w[off.bias + o];
                                for ci in 0..c {
                                    for ky in 0..kernel {
                                        for kx in 0..kernel {
                                            s += self.w[off.weight + ((o * c + ci) * kernel + ky) * kernel + kx]
                                                * x[(ci * h + y * stride + ky) * wd + xx * stride + kx];
                                        }
                                    }
                                }
                                out[(o * oh + y) * ow + xx] = s;
                            }
                        }
                    }
                }
                LayerSpec::Pool { window, stride } => {
                    for ch in 0..c {
                        for y in 0..oh {
                            for xx in 0..ow {
                                let mut m = f64::NEG_INFINITY;
                                for dy in 0..window {
                                    for dx in 0..window {
                                        m = m.max(x[(ch * h + y * stride + dy) * wd + xx * stride + dx]);
                                    }
                                }
                                out[(ch * oh + y) * ow + xx] = m;
                            }
                        }
                    }
                }
                LayerSpec::Relu => {
                    for (o, v) in out.iter_mut().zip(x) {
                        *o = v.max(0.0);
                    }
                }
                LayerSpec::FullyConnected { out: n } => {
                    let off = self.offsets[li].unwrap();
                    let k = x.len();
                    for j in 0..n {
                        let row = &self.w[off.weight + j * k..off.weight + (j + 1) * k];
                        out[j] = self.w[off.bias + j] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
            }
            acts.push(out);
        }
        ViewActs { acts }
    }

    pub fn forward_stack(&self, stack: &StackInput) -> StackActs {
        let views: Vec<ViewActs> = stack.images().map(|img| self.forward_view(img)).collect();
        let n = views.len() as f64;
        let mut pooled = views[0].acts.last().unwrap().clone();
        for v in &views[1..] {
            for (p, &y) in pooled.iter_mut().zip(v.acts.last().unwrap()) {
                *p = match self.pooling {
                    PoolingMode::Max => p.max(y),
                    PoolingMode::Average => *p + y,
                };
            }
        }
        if self.pooling == PoolingMode::Average {
            pooled.iter_mut().for_each(|p| *p /= n);
        }
        let descriptor = (0..self.d)
            .map(|i| {
                let row = &self.w[self.reduce + i * self.vd..self.reduce + (i + 1) * self.vd];
                row.iter().zip(&pooled).map(|(a, b)| a * b).sum()
            })
            .collect();
        StackActs {
            views,
            pooled,
            descriptor,
        }
    }

    /// Change of layer `li`'s output caused by `delta_in` on its input and,
    /// when `pert` is set, by moving one of its own parameters by `h`.
    fn propagate(&self, li: usize, acts: &ViewActs, delta_in: &Sparse, pert: Option<(Param, f64)>, scratch: &mut Scratch) -> Sparse {
        let x = &acts.acts[li];
        let base_out = &acts.acts[li + 1];
        let (c, h, wd) = self.shapes[li];
        let (oc, oh, ow) = self.shapes[li + 1];
        scratch.ensure(base_out.len().max(x.len()));
        let Scratch { buf, touched, mark } = scratch;
        match self.layers[li] {
            LayerSpec::Relu => {
                let mut out = Sparse::default();
                for (&i, &d) in delta_in.idx.iter().zip(&delta_in.val) {
                    let a = x[i];
                    let moved = a + d;
                    let dv = if a > 0.0 && moved > 0.0 { d } else { moved.max(0.0) - a.max(0.0) };
                    if dv != 0.0 {
                        out.idx.push(i);
                        out.val.push(dv);
                    }
                }
                return out;
            }
            LayerSpec::Pool { window, stride } => {
                // inputs only move through delta_in; look up by dense scratch
                for (&i, &d) in delta_in.idx.iter().zip(&delta_in.val) {
                    mark[i] = d;
                }
                let mut outs = Vec::new();
                for &i in &delta_in.idx {
                    let ch = i / (h * wd);
                    let (y, xx) = ((i / wd) % h, i % wd);
                    for oy in y.saturating_sub(window - 1).div_ceil(stride)..=(y / stride).min(oh - 1) {
                        if oy * stride + window <= y {
                            continue;
                        }
                        for ox in xx.saturating_sub(window - 1).div_ceil(stride)..=(xx / stride).min(ow - 1) {
                            if ox * stride + window <= xx {
                                continue;
                            }
                            outs.push((ch * oh + oy) * ow + ox);
                        }
                    }
                }
                outs.sort_unstable();
                outs.dedup();
                let mut out = Sparse::default();
                for o in outs {
                    let ch = o / (oh * ow);
                    let (oy, ox) = ((o / ow) % oh, o % ow);
                    let (mut best_old, mut arg_old) = (f64::NEG_INFINITY, 0);
                    let (mut best_new, mut arg_new) = (f64::NEG_INFINITY, 0);
                    for dy in 0..window {
                        for dx in 0..window {
                            let j = (ch * h + oy * stride + dy) * wd + ox * stride + dx;
                            if x[j] > best_old {
                                best_old = x[j];
                                arg_old = j;
                            }
                            let moved = x[j] + mark[j];
                            if moved > best_new {
                                best_new = moved;
                                arg_new = j;
                            }
                        }
                    }
                    let dv = if arg_new == arg_old { mark[arg_old] } else { best_new - best_old };
                    if dv != 0.0 {
                        out.idx.push(o);
                        out.val.push(dv);
                    }
                }
                for &i in &delta_in.idx {
                    mark[i] = 0.0;
                }
                return out;
            }
            LayerSpec::Conv { kernel, stride, .. } => {
                let off = self.offsets[li].unwrap();
                // a wide delta reaches nearly every output; skip per-entry bookkeeping
                let wide = delta_in.idx.len() * kernel * kernel > oh * ow;
                if wide {
                    // plain correlation over the input channels that moved
                    touched.extend(0..oc * oh * ow);
                    let mut live = vec![false; c];
                    for (&i, &d) in delta_in.idx.iter().zip(&delta_in.val) {
                        mark[i] = d;
                        live[i / (h * wd)] = true;
                    }
                    for o in 0..oc {
                        let out = &mut buf[o * oh * ow..(o + 1) * oh * ow];
                        for ci in (0..c).filter(|&ci| live[ci]) {
                            for ky in 0..kernel {
                                for kx in 0..kernel {
                                    let wv = self.w[off.weight + ((o * c + ci) * kernel + ky) * kernel + kx];
                                    for oy in 0..oh {
                                        let row = &mark[(ci * h + oy * stride + ky) * wd + kx..];
                                        for ox in 0..ow {
                                            out[oy * ow + ox] += wv * row[ox * stride];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    for &i in &delta_in.idx {
                        mark[i] = 0.0;
                    }
                } else {
                    for (&i, &d) in delta_in.idx.iter().zip(&delta_in.val) {
                        let ci = i / (h * wd);
                        let (y, xx) = ((i / wd) % h, i % wd);
                        for ky in 0..kernel.min(y + 1) {
                            if (y - ky) % stride != 0 || (y - ky) / stride >= oh {
                                continue;
                            }
                            let oy = (y - ky) / stride;
                            for kx in 0..kernel.min(xx + 1) {
                                if (xx - kx) % stride != 0 || (xx - kx) / stride >= ow {
                                    continue;
                                }
                                let ox = (xx - kx) / stride;
                                for o in 0..oc {
                                    let t = (o * oh + oy) * ow + ox;
                                    buf[t] += self.w[off.weight + ((o * c + ci) * kernel + ky) * kernel + kx] * d;
                                    touched.push(t);
                                }
                            }
                        }
                    }
                }
                if let Some((p, step)) = pert {
                    match p {
                        Param::Weight { index, .. } => {
                            let kx = index % kernel;
                            let ky = (index / kernel) % kernel;
                            let ci = (index / (kernel * kernel)) % c;
                            let o = index / (kernel * kernel * c);
                            for oy in 0..oh {
                                for ox in 0..ow {
                                    let t = (o * oh + oy) * ow + ox;
                                    buf[t] += step * x[(ci * h + oy * stride + ky) * wd + ox * stride + kx];
                                    touched.push(t);
                                }
                            }
                        }
                        Param::Bias { index, .. } => {
                            for t in index * oh * ow..(index + 1) * oh * ow {
                                buf[t] += step;
                                touched.push(t);
                            }
                        }
                        Param::Reduce { .. } => unreachable!(),
                    }
                }
            }
            LayerSpec::FullyConnected { out: n } => {
                let off = self.offsets[li].unwrap();
                let k = x.len();
                if delta_in.idx.len() * 2 > k {
                    // mostly dense: a contiguous dot product is faster than gathering
                    let mut dense = vec![0.0; k];
                    for (&i, &d) in delta_in.idx.iter().zip(&delta_in.val) {
                        dense[i] = d;
                    }
                    for j in 0..n {
                        let row = &self.w[off.weight + j * k..off.weight + (j + 1) * k];
                        buf[j] += dot(row, &dense);
                        touched.push(j);
                    }
                } else if !delta_in.idx.is_empty() {
                    for j in 0..n {
                        let row = off.weight + j * k;
                        let s: f64 = delta_in.idx.iter().zip(&delta_in.val).map(|(&i, &d)| self.w[row + i] * d).sum();
                        buf[j] += s;
                        touched.push(j);
                    }
                }
                if let Some((p, step)) = pert {
                    match p {
                        Param::Weight { index, .. } => {
                            buf[index / k] += step * x[index % k];
                            touched.push(index / k);
                        }
                        Param::Bias { index, .. } => {
                            buf[index] += step;
                            touched.push(index);
                        }
                        Param::Reduce { .. } => unreachable!(),
                    }
                }
            }
        }
        Sparse::from_dense(buf, touched)
    }

    /// Change of a stack's descriptor when parameter `p` moves by `step`.
    fn descriptor_delta(&self, stack: &StackActs, p: Param, step: f64, scratch: &mut Scratch) -> Vec<f64> {
        let mut dx = vec![0.0; self.d];
        let start = match p {
            Param::Reduce { row, col } => {
                dx[row] = step * stack.pooled[col];
                return dx;
            }
            Param::Weight { layer, .. } | Param::Bias { layer, .. } => layer,
        };
        if let Some(dy) = self.single_unit_delta(stack, p, step) {
            let (j, dy) = dy;
            if dy != 0.0 {
                for (i, x) in dx.iter_mut().enumerate() {
                    *x = self.w[self.reduce + i * self.vd + j] * dy;
                }
            }
            return dx;
        }
        let mut per_view = Vec::with_capacity(stack.views.len());
        for v in &stack.views {
            let mut delta = self.propagate(start, v, &Sparse::default(), Some((p, step)), scratch);
            for li in start + 1..self.layers.len() {
                if delta.idx.is_empty() {
                    break;
                }
                delta = self.propagate(li, v, &delta, None, scratch);
            }
            per_view.push(delta);
        }
        // pooled change per touched coordinate
        let mut coords: Vec<usize> = per_view.iter().flat_map(|s| s.idx.iter().copied()).collect();
        coords.sort_unstable();
        coords.dedup();
        let lookup = |s: &Sparse, k: usize| s.idx.binary_search(&k).map(|j| s.val[j]).unwrap_or(0.0);
        let mut moved = Vec::with_capacity(coords.len());
        for k in coords {
            let dy = match self.pooling {
                PoolingMode::Max => {
                    let (mut best_old, mut arg_old) = (f64::NEG_INFINITY, 0);
                    let (mut best_new, mut arg_new) = (f64::NEG_INFINITY, 0);
                    for (vi, v) in stack.views.iter().enumerate() {
                        let y = v.acts.last().unwrap()[k];
                        if y > best_old {
                            best_old = y;
                            arg_old = vi;
                        }
                        let moved = y + lookup(&per_view[vi], k);
                        if moved > best_new {
                            best_new = moved;
                            arg_new = vi;
                        }
                    }
                    if arg_new == arg_old {
                        lookup(&per_view[arg_old], k)
                    } else {
                        best_new - best_old
                    }
                }
                PoolingMode::Average => per_view.iter().map(|s| lookup(s, k)).sum::<f64>() / stack.views.len() as f64,
            };
            if dy != 0.0 {
                moved.push((k, dy));
            }
        }
        let dense = (moved.len() * 2 > self.vd).then(|| {
            let mut v = vec![0.0; self.vd];
            moved.iter().for_each(|&(k, dy)| v[k] = dy);
            v
        });
        for (i, x) in dx.iter_mut().enumerate() {
            let row = &self.w[self.reduce + i * self.vd..self.reduce + (i + 1) * self.vd];
            *x = match &dense {
                Some(v) => dot(row, v),
                None => moved.iter().map(|&(k, dy)| row[k] * dy).sum(),
            };
        }
        dx
    }

    /// Shortcut for a fully-connected parameter followed only by ReLUs: the
    /// change stays on one unit `j`, so each view contributes a scalar.
    /// Returns `(j, pooled change)`.
    fn single_unit_delta(&self, stack: &StackActs, p: Param, step: f64) -> Option<(usize, f64)> {
        let (layer, j, src) = match p {
            Param::Weight { layer, index } => {
                let k = self.shapes[layer].0 * self.shapes[layer].1 * self.shapes[layer].2;
                (layer, index / k, Some(index % k))
            }
            Param::Bias { layer, index } => (layer, index, None),
            Param::Reduce { .. } => return None,
        };
        if !matches!(self.layers[layer], LayerSpec::FullyConnected { .. })
            || !self.layers[layer + 1..].iter().all(|l| matches!(l, LayerSpec::Relu))
        {
            return None;
        }
        let (mut best_old, mut arg_old) = (f64::NEG_INFINITY, 0);
        let (mut best_new, mut arg_new) = (f64::NEG_INFINITY, 0);
        let mut sum = 0.0;
        let mut deltas = [0.0; 64];
        assert!(stack.views.len() <= deltas.len(), "shortcut supports up to 64 views");
        for (vi, v) in stack.views.iter().enumerate() {
            let mut d = step * src.map_or(1.0, |k| v.acts[layer][k]);
            for li in layer + 1..self.layers.len() {
                let a = v.acts[li][j];
                let moved = a + d;
                d = if a > 0.0 && moved > 0.0 { d } else { moved.max(0.0) - a.max(0.0) };
            }
            deltas[vi] = d;
            sum += d;
            let y = v.acts.last().unwrap()[j];
            if y > best_old {
                best_old = y;
                arg_old = vi;
            }
            if y + d > best_new {
                best_new = y + d;
                arg_new = vi;
            }
        }
        let dy = match self.pooling {
            PoolingMode::Average => sum / stack.views.len() as f64,
            PoolingMode::Max if arg_new == arg_old => deltas[arg_old],
            PoolingMode::Max => best_new - best_old,
        };
        Some((j, dy))
    }

    /// Central difference of the objective with respect to parameter `p`.
    /// `pairs` index into `stacks`.
    pub fn central_difference(
        &self,
        stacks: &[StackActs],
        pairs: &[(usize, usize, bool)],
        loss: &LossParams,
        p: usize,
        h: f64,
        scratch: &mut Scratch,
    ) -> f64 {
        let param = self.locate(p);
        let mut used: Vec<usize> = pairs.iter().flat_map(|&(a, b, _)| [a, b]).collect();
        used.sort_unstable();
        used.dedup();
        let mut change = |step: f64| {
            let mut deltas = vec![Vec::new(); stacks.len()];
            for &s in &used {
                deltas[s] = self.descriptor_delta(&stacks[s], param, step, scratch);
            }
            pairs
                .iter()
                .map(|&(a, b, corr)| pair_loss_change(&stacks[a].descriptor, &stacks[b].descriptor, &deltas[a], &deltas[b], corr, loss.margin))
                .sum::<f64>()
        };
        let up = change(h);
        let down = change(-h);
        let w = self.w[p];
        let reg = loss.weight_decay * ((w + h) * (w + h) - (w - h) * (w - h));
        (up - down + reg) / (2.0 * h)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Exact change of one pair's loss when the descriptors move by `da`, `db`.
fn pair_loss_change(xa: &[f64], xb: &[f64], da: &[f64], db: &[f64], corresponding: bool, margin: f64) -> f64 {
    // change of the squared distance, without forming it twice
    let mut d2 = 0.0;
    let mut dd2 = 0.0;
    for i in 0..xa.len() {
        let d = xa[i] - xb[i];
        let e = da[i] - db[i];
        d2 += d * d;
        dd2 += e * (2.0 * d + e);
    }
    if corresponding {
        return dd2;
    }
    let d0 = d2.sqrt();
    let d1 = (d2 + dd2).max(0.0).sqrt();
    let f = |d: f64| (margin - d).max(0.0).powi(2);
    if d0 < margin && d1 < margin && d0 + d1 > 0.0 {
        let moved = dd2 / (d0 + d1);
        -moved * (2.0 * margin - d0 - d1)
    } else {
        f(d1) - f(d0)
    }
}

#[derive(Default)]
pub struct Scratch {
    buf: Vec<f64>,
    touched: Vec<usize>,
    mark: Vec<f64>,
}

impl Scratch {
    fn ensure(&mut self, n: usize) {
        if self.buf.len() < n {
            self.buf.resize(n, 0.0);
            self.mark.resize(n, 0.0);
        }
    }
}
