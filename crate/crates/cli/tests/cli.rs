use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "\
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

fn mvdesc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvdesc")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = mvdesc(dir, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn full_pipeline_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("tiny.cfg"), TINY).unwrap();
    let c = ["--config", "tiny.cfg", "--workers", "1"];
    let run = |rest: &[&str]| ok(d, &[&c[..], rest].concat());
    run(&["toy", "--out", "toy", "--train-per-class", "2", "--test-per-class", "2"]);
    run(&["sample", "--manifest", "toy/train.manifest", "--out", "samples"]);
    run(&["sample", "--manifest", "toy/test.manifest", "--out", "samples"]);
    let table = run(&["register", "--manifest", "toy/train.manifest", "--samples", "samples", "--all-pairs-per-category", "--out", "reg"]);
    assert!(table.contains("legs, 2, 1,"), "{table}");
    run(&["train", "--manifest", "toy/train.manifest", "--samples", "samples", "--correspondences", "reg/correspondences.txt", "--out", "model.bin"]);
    assert_eq!(fs::read_to_string(d.join("model.loss.csv")).unwrap().lines().count(), 4);
    run(&[
        "embed", "--manifest", "toy/test.manifest", "--model", "model.bin", "--samples", "samples", "--features", "toy/features.txt", "--out", "desc",
    ]);
    let out = run(&[
        "evaluate", "--descriptors", "desc", "--features", "toy/features.txt", "--symmetry", "toy/symmetry.txt", "--symmetric", "--candidates", "features",
        "--out", "eval",
    ]);
    assert!(out.contains("cmc_sym"), "{out}");
    for f in ["cmc_sym", "cmc_nonsym", "accuracy_sym", "accuracy_nonsym"] {
        assert!(d.join("eval").join(format!("{f}.csv")).is_file());
    }
    run(&["match", "--a", "toy/meshes/0.obj", "--b", "toy/meshes/2.obj", "--model", "model.bin", "--out", "match"]);
    let colored = fs::read_to_string(d.join("match/b_colored.txt")).unwrap();
    assert_eq!(colored.lines().next().unwrap().split_whitespace().count(), 6);
}

#[test]
fn config_prints_every_key_and_reloads() {
    let tmp = tempfile::tempdir().unwrap();
    let text = ok(tmp.path(), &["--seed", "9", "config"]);
    assert!(text.contains("seed = 9\n"));
    assert!(text.contains("train.positives = 32\n"));
    fs::write(tmp.path().join("all.cfg"), &text).unwrap();
    assert_eq!(ok(tmp.path(), &["--config", "all.cfg", "config"]), text);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(mvdesc(d, &["--help"]).status.code(), Some(0));
    assert_eq!(mvdesc(d, &["frobnicate"]).status.code(), Some(1));
    let o = mvdesc(d, &["sample", "--manifest", "missing.manifest", "--out", "s"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.manifest"));

    fs::write(d.join("bad.cfg"), "train.colour = 3\n").unwrap();
    assert_eq!(mvdesc(d, &["--config", "bad.cfg", "config"]).status.code(), Some(1));

    // a runaway learning rate overflows the weights
    fs::write(d.join("blowup.cfg"), format!("{TINY}train.learning_rate = 1e300\n")).unwrap();
    let c = ["--config", "blowup.cfg"];
    ok(d, &[&c[..], &["toy", "--out", "toy", "--train-per-class", "2", "--test-per-class", "1"]].concat());
    ok(d, &[&c[..], &["sample", "--manifest", "toy/train.manifest", "--out", "samples"]].concat());
    ok(d, &[&c[..], &["register", "--manifest", "toy/train.manifest", "--samples", "samples", "--all-pairs-per-category", "--out", "reg"]].concat());
    let o = mvdesc(
        d,
        &[&c[..], &["train", "--manifest", "toy/train.manifest", "--samples", "samples", "--correspondences", "reg/correspondences.txt", "--out", "m.bin"]]
            .concat(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
