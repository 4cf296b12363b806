/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
    pub adam: AdamParams,
}

impl TrainState {
    pub fn new(param_count: usize, adam: AdamParams) -> Self {
        Self {
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step: 0,
            adam,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(state: &mut TrainState, params: &mut [f64], grad: &[f64]) {
    assert_eq!(params.len(), grad.len());
    assert_eq!(params.len(), state.first_moment.len());
    let AdamParams {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.adam;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for i in 0..params.len() {
        let g = grad[i];
        let m = beta1 * state.first_moment[i] + (1.0 - beta1) * g;
        let v = beta2 * state.second_moment[i] + (1.0 - beta2) * g * g;
        state.first_moment[i] = m;
        state.second_moment[i] = v;
        params[i] -= learning_rate * (m / c1) / ((v / c2).sqrt() + epsilon);
    }
}
