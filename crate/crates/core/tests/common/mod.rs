//! A small end-to-end pipeline run shared by integration tests.

use std::path::Path;

use mvdesc::pipeline::*;

pub const TINY_CONFIG: &str = "\
seed = 7
sample.points = 48
view.directions = 40
view.resolution = 16
view.visibility_resolution = 48
network.input_resolution = 16
network.layers = conv:2:3:1, relu, pool:2:2, fc:8, relu
network.output_dim = 16
registration.max_iters = 5
train.iterations = 3
train.positives = 2
train.negatives = 2
eval.max_rank = 5
";

/// Toy dataset, sampling, registration, training, embedding and
/// evaluation under `dir`.
pub fn run_pipeline(dir: &Path) {
    let cfg = PipelineConfig::parse(TINY_CONFIG).unwrap();
    cmd_toy(dir, 2, 2, cfg.seed).unwrap();
    let train = Manifest::load(&dir.join("train.manifest")).unwrap();
    let test = Manifest::load(&dir.join("test.manifest")).unwrap();
    cmd_sample(&train, cfg.sample_points, train.seed, &cfg, &dir.join("samples")).unwrap();
    cmd_sample(&test, cfg.sample_points, test.seed, &cfg, &dir.join("samples")).unwrap();
    let reg = cmd_register(&train, &dir.join("samples"), &PairSpec::AllPerCategory, &cfg, &dir.join("reg")).unwrap();
    assert_eq!(reg.rows.len(), 2);
    let s = cmd_train(
        &train,
        &dir.join("samples"),
        &dir.join("reg/correspondences.txt"),
        &cfg,
        &dir.join("model.bin"),
        &dir.join("loss.csv"),
        |_, _| {},
    )
    .unwrap();
    assert_eq!(s.losses.len(), 3);
    let model = load_model(&dir.join("model.bin")).unwrap();
    let inputs = EmbedInputs {
        samples_dir: Some(dir.join("samples")),
        features: Some(dir.join("features.txt")),
    };
    cmd_embed(&test, &model, &inputs, &cfg, &dir.join("desc")).unwrap();
    cmd_evaluate(&dir.join("desc"), &dir.join("features.txt"), Some(&dir.join("symmetry.txt")), true, &cfg, &dir.join("eval")).unwrap();
}
