//! Flat `key = value` configuration with dotted sections.
//!
//! Every key has a default; a file only lists what it changes. Unknown and
//! repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::evaluation::Candidates;
use crate::network::{parse_layers, AdamParams, LossParams, NetworkConfig, PoolingMode, TrainConfig};
use crate::registration::RegistrationParams;
use crate::viewselect::ViewConfig;

use super::PipelineError;

/// Evaluation options.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub candidates: Candidates,
    /// Largest rank on the CMC x-axis.
    pub max_rank: usize,
    /// Accuracy thresholds run from 0 to this value (fraction of the shape
    /// scale) in `threshold_step` increments.
    pub max_threshold: f64,
    pub threshold_step: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            candidates: Candidates::DenseAndFeatures,
            max_rank: 100,
            max_threshold: 0.25,
            threshold_step: 0.01,
        }
    }
}

impl EvalOptions {
    pub fn thresholds(&self) -> Vec<f64> {
        let n = (self.max_threshold / self.threshold_step + 1e-9).floor() as usize;
        (0..=n).map(|i| i as f64 * self.threshold_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Surface samples per shape.
    pub sample_points: usize,
    pub view: ViewConfig,
    pub network: NetworkConfig,
    pub registration: RegistrationParams,
    pub training: TrainConfig,
    pub evaluation: EvalOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sample_points: 1024,
            view: ViewConfig::default(),
            network: NetworkConfig::default(),
            registration: RegistrationParams::default(),
            training: TrainConfig::default(),
            evaluation: EvalOptions::default(),
        }
    }
}

fn bad(key: &str, value: &str) -> PipelineError {
    PipelineError::Config(format!("bad value for {key}: `{value}`"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, PipelineError> {
    value.parse().map_err(|_| bad(key, value))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>, PipelineError> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(key, v.trim())).collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies the assignments in `text` on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim().to_string();
            if entries.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(PipelineError::Config(format!("line {}: {k} set twice", i + 1)));
            }
        }
        let mut cfg = Self::default();
        for (k, v) in &entries {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), PipelineError> {
        let view = &mut self.view;
        let tr = &mut self.training;
        match key {
            "seed" => self.seed = num(key, v)?,
            "sample.points" => self.sample_points = num(key, v)?,

            "view.directions" => view.n_directions = num(key, v)?,
            "view.medoids" => view.n_medoids = num(key, v)?,
            "view.radii" => view.radii = list(key, v)?,
            "view.inplane" => view.n_inplane = num(key, v)?,
            "view.resolution" => view.resolution = num(key, v)?,
            "view.supersample" => view.supersample = num(key, v)?,
            "view.visibility_resolution" => view.visibility_resolution = num(key, v)?,
            "view.fov_degrees" => view.vertical_fov = num::<f64>(key, v)?.to_radians(),
            "view.visibility_fov_degrees" => view.visibility_fov = num::<f64>(key, v)?.to_radians(),
            "view.ball_radius" => view.ball_radius = num(key, v)?,
            "view.shading.ambient" => view.shading.ambient = num(key, v)?,
            "view.shading.diffuse" => view.shading.diffuse = num(key, v)?,
            "view.shading.specular" => view.shading.specular = num(key, v)?,
            "view.shading.shininess" => view.shading.shininess = num(key, v)?,

            "network.input_resolution" => self.network.input_resolution = num(key, v)?,
            "network.layers" => self.network.layers = parse_layers(v)?,
            "network.output_dim" => self.network.output_dim = num(key, v)?,
            "network.pooling" => {
                self.network.pooling = match v {
                    "max" => PoolingMode::Max,
                    "average" => PoolingMode::Average,
                    _ => return Err(bad(key, v)),
                }
            }

            "registration.neighbors" => self.registration.neighbors = num(key, v)?,
            "registration.smoothness" => self.registration.smoothness = num(key, v)?,
            "registration.warmup" => self.registration.warmup = list(key, v)?,
            "registration.max_iters" => self.registration.max_iters = num(key, v)?,
            "registration.rel_tol" => self.registration.rel_tol = num(key, v)?,
            "registration.cg_tol" => self.registration.cg_tol = num(key, v)?,
            "registration.cg_max_iters" => self.registration.cg_max_iters = num(key, v)?,

            "train.iterations" => tr.iterations = num(key, v)?,
            "train.positives" => tr.positives = num(key, v)?,
            "train.negatives" => tr.negatives = num(key, v)?,
            "train.learning_rate" => tr.adam.learning_rate = num(key, v)?,
            "train.beta1" => tr.adam.beta1 = num(key, v)?,
            "train.beta2" => tr.adam.beta2 = num(key, v)?,
            "train.epsilon" => tr.adam.epsilon = num(key, v)?,
            "train.margin" => tr.loss.margin = num(key, v)?,
            "train.weight_decay" => tr.loss.weight_decay = num(key, v)?,
            "train.negative_exclusion" => tr.negative_exclusion = num(key, v)?,
            "train.views_per_stack" => {
                tr.views_per_stack = match v {
                    "all" => None,
                    _ => Some(num(key, v)?),
                }
            }

            "eval.candidates" => {
                self.evaluation.candidates = match v {
                    "dense" => Candidates::DenseAndFeatures,
                    "features" => Candidates::FeaturesOnly,
                    _ => return Err(bad(key, v)),
                }
            }
            "eval.max_rank" => self.evaluation.max_rank = num(key, v)?,
            "eval.max_threshold" => self.evaluation.max_threshold = num(key, v)?,
            "eval.threshold_step" => self.evaluation.threshold_step = num(key, v)?,
            _ => return Err(PipelineError::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.view.validate()?;
        self.network.validate()?;
        let fail = |m: &str| Err(PipelineError::Config(m.into()));
        if self.sample_points == 0 {
            return fail("sample.points must be positive");
        }
        let r = &self.registration;
        if r.neighbors == 0 || r.smoothness <= 0.0 || r.max_iters == 0 || r.warmup.iter().any(|w| *w <= 0.0) {
            return fail("registration parameters must be positive");
        }
        let t = &self.training;
        let AdamParams { learning_rate, beta1, beta2, epsilon } = t.adam;
        if !(learning_rate > 0.0 && (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && epsilon >= 0.0) {
            return fail("bad Adam parameters");
        }
        let LossParams { margin, weight_decay } = t.loss;
        if !(margin > 0.0 && weight_decay >= 0.0) {
            return fail("margin must be positive and weight decay non-negative");
        }
        if t.positives + t.negatives == 0 || t.views_per_stack == Some(0) {
            return fail("empty training batch");
        }
        let e = &self.evaluation;
        if e.max_rank == 0 || !(e.threshold_step > 0.0) || !(e.max_threshold >= 0.0) {
            return fail("bad evaluation options");
        }
        Ok(())
    }
}

impl fmt::Display for PipelineConfig {
    /// Every key with its current value; parses back to the same config.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = &self.view;
        let t = &self.training;
        let layers: Vec<String> = self.network.layers.iter().map(|l| l.to_string()).collect();
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "sample.points = {}", self.sample_points)?;
        writeln!(f, "view.directions = {}", v.n_directions)?;
        writeln!(f, "view.medoids = {}", v.n_medoids)?;
        writeln!(f, "view.radii = {}", join(&v.radii))?;
        writeln!(f, "view.inplane = {}", v.n_inplane)?;
        writeln!(f, "view.resolution = {}", v.resolution)?;
        writeln!(f, "view.supersample = {}", v.supersample)?;
        writeln!(f, "view.visibility_resolution = {}", v.visibility_resolution)?;
        writeln!(f, "view.fov_degrees = {}", v.vertical_fov.to_degrees())?;
        writeln!(f, "view.visibility_fov_degrees = {}", v.visibility_fov.to_degrees())?;
        writeln!(f, "view.ball_radius = {}", v.ball_radius)?;
        writeln!(f, "view.shading.ambient = {}", v.shading.ambient)?;
        writeln!(f, "view.shading.diffuse = {}", v.shading.diffuse)?;
        writeln!(f, "view.shading.specular = {}", v.shading.specular)?;
        writeln!(f, "view.shading.shininess = {}", v.shading.shininess)?;
        writeln!(f, "network.input_resolution = {}", self.network.input_resolution)?;
        writeln!(f, "network.layers = {}", layers.join(", "))?;
        writeln!(f, "network.output_dim = {}", self.network.output_dim)?;
        let pooling = match self.network.pooling {
            PoolingMode::Max => "max",
            PoolingMode::Average => "average",
        };
        writeln!(f, "network.pooling = {pooling}")?;
        let r = &self.registration;
        writeln!(f, "registration.neighbors = {}", r.neighbors)?;
        writeln!(f, "registration.smoothness = {}", r.smoothness)?;
        writeln!(f, "registration.warmup = {}", join(&r.warmup))?;
        writeln!(f, "registration.max_iters = {}", r.max_iters)?;
        writeln!(f, "registration.rel_tol = {}", r.rel_tol)?;
        writeln!(f, "registration.cg_tol = {}", r.cg_tol)?;
        writeln!(f, "registration.cg_max_iters = {}", r.cg_max_iters)?;
        writeln!(f, "train.iterations = {}", t.iterations)?;
        writeln!(f, "train.positives = {}", t.positives)?;
        writeln!(f, "train.negatives = {}", t.negatives)?;
        writeln!(f, "train.learning_rate = {}", t.adam.learning_rate)?;
        writeln!(f, "train.beta1 = {}", t.adam.beta1)?;
        writeln!(f, "train.beta2 = {}", t.adam.beta2)?;
        writeln!(f, "train.epsilon = {}", t.adam.epsilon)?;
        writeln!(f, "train.margin = {}", t.loss.margin)?;
        writeln!(f, "train.weight_decay = {}", t.loss.weight_decay)?;
        writeln!(f, "train.negative_exclusion = {}", t.negative_exclusion)?;
        match t.views_per_stack {
            None => writeln!(f, "train.views_per_stack = all")?,
            Some(n) => writeln!(f, "train.views_per_stack = {n}")?,
        }
        let e = &self.evaluation;
        let cand = match e.candidates {
            Candidates::DenseAndFeatures => "dense",
            Candidates::FeaturesOnly => "features",
        };
        writeln!(f, "eval.candidates = {cand}")?;
        writeln!(f, "eval.max_rank = {}", e.max_rank)?;
        writeln!(f, "eval.max_threshold = {}", e.max_threshold)?;
        writeln!(f, "eval.threshold_step = {}", e.threshold_step)
    }
}
