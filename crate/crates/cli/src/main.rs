use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mvdesc::evaluation::Candidates;
use mvdesc::pipeline::{
    cmd_embed, cmd_evaluate, cmd_match, cmd_register, cmd_sample, cmd_toy, cmd_train, load_model, EmbedInputs, Manifest,
    PairSpec, PipelineConfig, PipelineError,
};

#[derive(Parser)]
#[command(name = "mvdesc", version, about = "Multi-view local shape descriptors")]
struct Cli {
    /// Worker threads for per-point and per-pair stages (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Configuration file (`key = value`); unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CandidateArg {
    Dense,
    Features,
}

#[derive(Subcommand)]
enum Command {
    /// Print the full configuration with every key.
    Config,
    /// Write a synthetic labeled dataset of two shape classes.
    Toy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        train_per_class: usize,
        #[arg(long, default_value_t = 2)]
        test_per_class: usize,
    },
    /// Sample every shape's surface.
    Sample {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Points per shape (default: `sample.points` from the config).
        #[arg(long)]
        points: Option<usize>,
    },
    /// Part-based registration of shape pairs into point correspondences.
    Register {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        /// File of `a b` shape id pairs.
        #[arg(long, conflicts_with = "all_pairs_per_category", required_unless_present = "all_pairs_per_category")]
        pairs: Option<PathBuf>,
        #[arg(long)]
        all_pairs_per_category: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a descriptor network on correspondences.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        correspondences: PathBuf,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Loss log CSV (default: next to the model, `.loss.csv`).
        #[arg(long)]
        loss_log: Option<PathBuf>,
    },
    /// Compute descriptors for sample points and/or feature points.
    Embed {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// CMC and correspondence-accuracy curves.
    Evaluate {
        #[arg(long)]
        descriptors: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        symmetry: Option<PathBuf>,
        /// Also write the symmetric curves (needs --symmetry).
        #[arg(long)]
        symmetric: bool,
        /// Ranking candidates (default: `eval.candidates` from the config).
        #[arg(long, value_enum)]
        candidates: Option<CandidateArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Color-coded dense matching of a mesh or point cloud against a mesh.
    Match {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Config => print!("{cfg}"),
        Command::Toy {
            out,
            train_per_class,
            test_per_class,
        } => {
            cmd_toy(&out, train_per_class, test_per_class, cfg.seed)?;
            println!("wrote toy dataset to {}", out.display());
        }
        Command::Sample { manifest, out, points } => {
            let m = Manifest::load(&manifest)?;
            // the dataset seed applies unless a global seed is given
            let seed = cli.seed.unwrap_or(m.seed);
            let n = cmd_sample(&m, points.unwrap_or(cfg.sample_points), seed, &cfg, &out)?;
            println!("sampled {n} shapes");
        }
        Command::Register {
            manifest,
            samples,
            pairs,
            all_pairs_per_category,
            out,
        } => {
            let m = Manifest::load(&manifest)?;
            let spec = match pairs {
                Some(p) if !all_pairs_per_category => PairSpec::read(&p)?,
                _ => PairSpec::AllPerCategory,
            };
            let s = cmd_register(&m, &samples, &spec, &cfg, &out)?;
            println!("category, #shapes, #pairs, #correspondences");
            for (c, n, p, k) in &s.rows {
                println!("{c}, {n}, {p}, {k}");
            }
            for (a, b, why) in &s.skipped {
                eprintln!("skipped {a} {b}: {why}");
            }
        }
        Command::Train {
            manifest,
            samples,
            correspondences,
            out,
            loss_log,
        } => {
            let m = Manifest::load(&manifest)?;
            let log = loss_log.unwrap_or_else(|| out.with_extension("loss.csv"));
            let every = (cfg.training.iterations / 20).max(1);
            let s = cmd_train(&m, &samples, &correspondences, &cfg, &out, &log, |i, l| {
                if i % every == 0 {
                    eprintln!("iteration {i}: loss {l:.6}");
                }
            })?;
            println!(
                "trained on {} correspondences over {} shapes; final loss {:.6}",
                s.correspondences,
                s.shapes,
                s.losses.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Embed {
            manifest,
            model,
            samples,
            features,
            out,
        } => {
            let m = Manifest::load(&manifest)?;
            let model = load_model(&model)?;
            let n = cmd_embed(&m, &model, &EmbedInputs { samples_dir: samples, features }, &cfg, &out)?;
            println!("wrote {n} descriptors");
        }
        Command::Evaluate {
            descriptors,
            features,
            symmetry,
            symmetric,
            candidates,
            out,
        } => {
            let mut cfg = cfg;
            match candidates {
                Some(CandidateArg::Dense) => cfg.evaluation.candidates = Candidates::DenseAndFeatures,
                Some(CandidateArg::Features) => cfg.evaluation.candidates = Candidates::FeaturesOnly,
                None => {}
            }
            let curves = cmd_evaluate(&descriptors, &features, symmetry.as_deref(), symmetric, &cfg, &out)?;
            for (name, c) in curves {
                println!("{name}: first value {:.4}", c.y.first().copied().unwrap_or(f64::NAN));
            }
        }
        Command::Match { a, b, model, out } => {
            let model = load_model(&model)?;
            let (na, nb) = cmd_match(&a, &b, &model, &cfg, &out)?;
            println!("colored {na} points of {} and {nb} points of {}", show(&a), show(&b));
        }
    }
    Ok(())
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
