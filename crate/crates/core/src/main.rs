use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lcanet::gradcheck::{self, GradcheckConfig, Target};
use lcanet::hazegen::{self, CorpusConfig, DatasetManifest, Split};
use lcanet::pipeline::{self, Dehazer, EvalOptions, Identity, Resolution, TrainConfig};
use lcanet::{Model, Precision};

#[derive(Parser)]
#[command(name = "lcanet", version, about = "Light convolutional autoencoder for single-image dehazing")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "LCA_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a hazy corpus and manifest from a directory of clear images.
    Synthesize {
        #[arg(long)]
        clear_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON array of haze levels; defaults to the 35-level grid.
        #[arg(long)]
        levels: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fraction of clear images whose hazy variants go to the test split.
        #[arg(long, default_value_t = 0.0)]
        test_fraction: f64,
    },
    /// Train from a manifest's train split.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = pipeline::DEFAULT_EPOCHS)]
        epochs: usize,
        #[arg(long, default_value_t = pipeline::DEFAULT_BATCH)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = pipeline::DEFAULT_RESOLUTION)]
        resolution: usize,
        /// Epochs between checkpoints; 0 keeps only the final one.
        #[arg(long, default_value_t = 10)]
        checkpoint_every: usize,
        #[arg(long, value_enum, default_value_t = PrecisionArg::F32)]
        precision: PrecisionArg,
        /// Start from an existing checkpoint instead of a fresh initialisation.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Dehaze one image.
    Dehaze {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        res: ResolutionArg,
    },
    /// Score a model (or the identity baseline) on a manifest.
    Evaluate {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Write JSON instead of CSV.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Finite-difference and adjoint checks of every backward pass.
    Gradcheck {
        #[arg(long, default_value = "all", value_parser = ["conv", "deconv", "avgpool", "upsample", "dense", "relu", "model", "all"])]
        layer: String,
        #[arg(long, default_value_t = GradcheckConfig::default().tolerance)]
        tolerance: f64,
        #[arg(long, default_value_t = GradcheckConfig::default().samples)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time a model over a manifest next to published reference scores.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    All,
    Train,
    Test,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ModelSource {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Score the hazy input itself (no dehazing).
    #[arg(long)]
    identity: bool,
}

#[derive(Args)]
struct ResolutionArg {
    /// Square working size (multiple of 4); default rounds each side down to a multiple of 4.
    #[arg(long)]
    resolution: Option<usize>,
}

impl ResolutionArg {
    fn get(&self) -> Resolution {
        self.resolution.map_or(Resolution::Native, Resolution::Fixed)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    split: SplitArg,
    /// Average SSIM over RGB channels instead of luma.
    #[arg(long)]
    per_channel_ssim: bool,
    #[command(flatten)]
    res: ResolutionArg,
}

impl EvalArgs {
    fn options(&self) -> EvalOptions {
        let split = match self.split {
            SplitArg::All => None,
            SplitArg::Train => Some(Split::Train),
            SplitArg::Test => Some(Split::Test),
        };
        EvalOptions { split, per_channel_ssim: self.per_channel_ssim }
    }
}

fn run(cli: Cli) -> lcanet::Result<bool> {
    match cli.command {
        Command::Synthesize { clear_dir, out, levels, seed, test_fraction } => {
            let levels = match levels {
                Some(p) => hazegen::load_levels(p)?,
                None => hazegen::default_levels(),
            };
            let cfg = CorpusConfig { levels, seed, test_fraction, ..Default::default() };
            let m = hazegen::build_corpus(&clear_dir, &out, &cfg)?;
            println!("wrote {} hazy images and {}", m.len(), out.join("manifest.jsonl").display());
        }
        Command::Train { manifest, out_dir, epochs, batch, seed, resolution, checkpoint_every, precision, init } => {
            let cfg = TrainConfig {
                manifest,
                out_dir: Some(out_dir.clone()),
                epochs,
                batch_size: batch,
                seed,
                checkpoint_every,
                resolution,
                precision: match precision {
                    PrecisionArg::F32 => Precision::F32,
                    PrecisionArg::F64 => Precision::F64,
                },
                ..Default::default()
            };
            cfg.validate()?;
            let model = match init {
                Some(p) => Model::load(p)?,
                None => Model::init(seed),
            };
            let (_, logs) = pipeline::train(&cfg, model)?;
            for l in &logs {
                println!("epoch {:>4}  loss {:.6e}  {:.2}s", l.epoch, l.mean_loss, l.seconds);
            }
            println!("final checkpoint {}", out_dir.join("final.lcan").display());
        }
        Command::Dehaze { model, input, output, res } => {
            let model = Model::load(model)?;
            let rec = pipeline::dehaze_one(&Dehazer::new(&model, res.get()), &input, &output)?;
            println!("{} ({}x{}) -> {} in {:.4}s", rec.image, rec.width, rec.height, output.display(), rec.time_s);
        }
        Command::Evaluate { source, manifest, report, json, eval } => {
            let manifest = DatasetManifest::load(manifest)?;
            let r = match source.model {
                Some(p) => {
                    let model = Model::load(p)?;
                    pipeline::evaluate(&manifest, &Dehazer::new(&model, eval.res.get()), eval.options())?
                }
                None => pipeline::evaluate(&manifest, &Identity, eval.options())?,
            };
            r.write(&report, json)?;
            let a = &r.aggregate;
            println!("{} image(s): psnr {:.4} dB, ssim {:.4}, {:.4}s/image", a.count, a.psnr_db, a.ssim, a.time_s);
        }
        Command::Gradcheck { layer, tolerance, samples, seed } => {
            let targets = if layer == "all" { Target::ALL.to_vec() } else { vec![layer.parse()?] };
            let cfg = GradcheckConfig { tolerance, samples, seed, ..Default::default() };
            let mut ok = true;
            for t in targets {
                let r = gradcheck::gradcheck(t, &cfg)?;
                ok &= r.passed();
                println!(
                    "{:<8} {}  max rel err {:.3e} (tol {:.1e}) over {} samples, {} kink(s) skipped",
                    t,
                    if r.passed() { "ok  " } else { "FAIL" },
                    r.max_rel_error,
                    tolerance,
                    r.checked,
                    r.skipped_kinks
                );
                if Target::LINEAR.contains(&t) {
                    let res = gradcheck::adjoint_residual(t, seed)?;
                    ok &= res < 1e-9;
                    println!("{:<8} {}  adjoint residual {res:.3e} (tol 1e-9)", t, if res < 1e-9 { "ok  " } else { "FAIL" });
                }
            }
            return Ok(ok);
        }
        Command::Bench { model, manifest, eval } => {
            let model = Model::load(model)?;
            let manifest = DatasetManifest::load(manifest)?;
            let r = pipeline::bench(&manifest, &Dehazer::new(&model, eval.res.get()), eval.options())?;
            print!("{}", r.table());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
