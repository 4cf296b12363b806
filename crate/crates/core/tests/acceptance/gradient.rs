use mvdesc::network::{backward, batch_loss, DescriptorModel, LossParams, NetworkConfig, StackInput, TrainingBatch, TrainingPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grad::{Oracle, Scratch};
use crate::Verdict;

const TOLERANCE: f64 = 1e-4;
// |difference| is divided by max(|analytic|, |numeric|, FLOOR)
const FLOOR: f64 = 1e-8;
const STEP: f64 = 1e-6;
// retried when a step crosses a ReLU, pooling or hinge kink
const SMALL_STEP: f64 = 1e-9;

fn random_stack(rng: &mut ChaCha8Rng, res: usize, views: usize) -> StackInput {
    let v = (0..views)
        .map(|i| {
            let px = (0..res * res).map(|_| if rng.random_bool(0.5) { rng.random() } else { 0 }).collect();
            (i as u32 * 4, px)
        })
        .collect();
    StackInput::from_bytes(res, v).unwrap()
}

/// A copy of `a` nudged pixel by pixel until its descriptor sits inside the
/// margin but away from zero, so the hinge term is active.
fn near_stack(rng: &mut ChaCha8Rng, model: &DescriptorModel, a: &StackInput, margin: f64) -> StackInput {
    let res = a.resolution();
    let xa = model.embed_stack(a).unwrap();
    let mut views: Vec<(u32, Vec<u8>)> = (0..a.len()).map(|i| (a.ids()[i], a.bytes(i).to_vec())).collect();
    loop {
        let v = rng.random_range(0..views.len());
        let p = rng.random_range(0..res * res);
        views[v].1[p] = rng.random();
        let b = StackInput::from_bytes(res, views.clone()).unwrap();
        let d = mvdesc::network::descriptor_distance(&xa, &model.embed_stack(&b).unwrap());
        if d > 0.05 * margin {
            assert!(d < margin, "single pixel step overshot the margin");
            return b;
        }
    }
}

struct Check {
    worst: f64,
    retried: usize,
    failed: usize,
    checked: usize,
}

/// Compares the analytic gradient with the oracle on every parameter of one
/// batch made of a corresponding pair (a, b) and a non-corresponding pair
/// (a, a') inside the margin.
fn check_batch(model: &DescriptorModel, seed: u64, views: usize, params: &LossParams) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let res = model.config().input_resolution;
    let a = random_stack(&mut rng, res, views);
    let b = random_stack(&mut rng, res, views);
    let c = near_stack(&mut rng, model, &a, params.margin);
    let batch = TrainingBatch {
        pairs: vec![
            TrainingPair { a: &a, b: &b, corresponding: true },
            TrainingPair { a: &a, b: &c, corresponding: false },
        ],
    };
    let (_, analytic) = backward(model, &batch, params).unwrap();
    let oracle = Oracle::new(model);
    let acts: Vec<_> = [&a, &b, &c].iter().map(|s| oracle.forward_stack(s)).collect();
    for (s, act) in [&a, &b, &c].iter().zip(&acts) {
        let x = model.embed_stack(s).unwrap();
        let err = x.iter().zip(&act.descriptor).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "plain forward disagrees with the model by {err}");
    }
    let pairs = [(0, 1, true), (0, 2, false)];
    let mut scratch = Scratch::default();
    let mut out = Check {
        worst: 0.0,
        retried: 0,
        failed: 0,
        checked: 0,
    };
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(FLOOR);
    for (p, &g) in analytic.iter().enumerate() {
        let mut e = rel(g, oracle.central_difference(&acts, &pairs, params, p, STEP, &mut scratch));
        if e >= TOLERANCE {
            out.retried += 1;
            e = rel(g, oracle.central_difference(&acts, &pairs, params, p, SMALL_STEP, &mut scratch));
        }
        if e >= TOLERANCE {
            out.failed += 1;
        }
        out.worst = out.worst.max(e);
        out.checked += 1;
    }
    out
}

/// The oracle against plain whole-network differences on a small network.
fn self_check() -> Result<(), String> {
    let cfg = NetworkConfig::parse("input_resolution = 8\nlayers = conv:2:3:1, relu, pool:2:2, conv:3:2:1, relu, fc:8, relu\noutput_dim = 16\n")
        .map_err(|e| e.to_string())?;
    let params = LossParams::default();
    let mut model = DescriptorModel::new(cfg, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = random_stack(&mut rng, 8, 3);
    let b = random_stack(&mut rng, 8, 3);
    let c = near_stack(&mut rng, &model, &a, params.margin);
    let pairs = [(0, 1, true), (0, 2, false)];
    let fast: Vec<f64> = {
        let oracle = Oracle::new(&model);
        let acts: Vec<_> = [&a, &b, &c].iter().map(|s| oracle.forward_stack(s)).collect();
        let mut scratch = Scratch::default();
        (0..model.param_count())
            .map(|p| oracle.central_difference(&acts, &pairs, &params, p, 1e-5, &mut scratch))
            .collect()
    };
    for (p, fast) in fast.into_iter().enumerate() {
        let w = model.params()[p];
        let mut loss_at = |x: f64| {
            model.params_mut()[p] = x;
            let batch = TrainingBatch {
                pairs: vec![
                    TrainingPair { a: &a, b: &b, corresponding: true },
                    TrainingPair { a: &a, b: &c, corresponding: false },
                ],
            };
            batch_loss(&model, &batch, &params).unwrap()
        };
        let plain = (loss_at(w + 1e-5) - loss_at(w - 1e-5)) / 2e-5;
        model.params_mut()[p] = w;
        if (plain - fast).abs() > 1e-5 * plain.abs().max(1.0) {
            return Err(format!("oracle self-check: parameter {p} plain {plain} sparse {fast}"));
        }
    }
    Ok(())
}

pub fn run() -> Verdict {
    if let Err(e) = self_check() {
        return Verdict { pass: false, detail: e };
    }
    let model = DescriptorModel::new(NetworkConfig::default(), 2024).unwrap();
    let params = LossParams::default();
    let mut worst = 0.0f64;
    let (mut retried, mut failed, mut checked) = (0, 0, 0);
    for batch in 0..5 {
        let c = check_batch(&model, 100 + batch, 3, &params);
        worst = worst.max(c.worst);
        retried += c.retried;
        failed += c.failed;
        checked += c.checked;
    }
    Verdict {
        pass: failed == 0,
        detail: format!(
            "{checked} parameter checks over 5 batches, max relative error {worst:.2e} (< {TOLERANCE:.0e}), {failed} failures, {retried} re-checked at a smaller step"
        ),
    }
}
