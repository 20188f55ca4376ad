use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oneshot_restore::degrade::DegradationSpec;
use oneshot_restore::harness::{self, MismatchParams, Pattern, SampleSizeParams, ScDemoParams, SynthParams};
use oneshot_restore::model::{LossKind, TrainConfig};
use oneshot_restore::patching::PatchMode;

#[derive(Parser)]
#[command(name = "osr", version, about = "One-shot image restoration with recurrent sparse-coding networks")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for every random stream of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Patch geometry: p2p (patch-to-patch) or p2x (patch-to-pixel).
    #[arg(long, global = true)]
    mode: Option<PatchMode>,
    /// Content loss.
    #[arg(long, global = true, value_parser = parse_loss)]
    loss: Option<LossKind>,
    /// Enable the adversarial fine-tuning stage.
    #[arg(long, global = true)]
    gan: bool,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Clone, Copy)]
struct SpecArgs {
    #[arg(long, default_value_t = 25)]
    kernel_size: usize,
    #[arg(long, default_value_t = 1.6)]
    blur_sigma: f64,
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 1)]
    decimation: usize,
}

impl From<SpecArgs> for DegradationSpec {
    fn from(a: SpecArgs) -> Self {
        DegradationSpec {
            kernel_size: a.kernel_size,
            blur_sigma: a.blur_sigma,
            noise_sigma: a.noise_sigma,
            decimation: a.decimation,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Blur, decimate and add noise to images.
    Degrade {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Train a model on one degraded/clean pair.
    Train {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        degraded: PathBuf,
    },
    /// Restore images with a trained checkpoint.
    Restore {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Clean image or directory of same-named clean images.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// PSNR and SSIM between reference and estimated images.
    Eval {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
    },
    /// Restoration quality across noise levels.
    SweepNoise {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        clean: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sigmas: Vec<f64>,
    },
    /// Recovery error against the number of training patches.
    SampleSize {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        degraded: PathBuf,
        #[arg(long = "m", value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Target empirical risk that stops training.
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 200)]
        max_epochs: usize,
        #[arg(long)]
        eval_dir: PathBuf,
    },
    /// Residual-blur check for a model applied at the wrong blur level.
    Mismatch {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        clean: PathBuf,
        #[arg(long = "sigma-t", value_delimiter = ',', required = true)]
        sigma_t: Vec<f64>,
        #[arg(long, default_value_t = 55)]
        column: usize,
        #[arg(long, default_value_t = 0.15)]
        threshold: f64,
    },
    /// Write a synthetic clean/degraded training pair.
    SynthPairs {
        #[arg(long, default_value = "chessboard")]
        pattern: Pattern,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 16)]
        cell: usize,
        #[arg(long, default_value_t = 0.0)]
        low: f64,
        #[arg(long, default_value_t = 255.0)]
        high: f64,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// ISTA on a random sparse-coding problem, with the recurrent-cell check.
    ScDemo {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 16)]
        m: usize,
        #[arg(long, default_value_t = 3)]
        sparsity: usize,
        #[arg(long, default_value_t = 0.05)]
        lambda: f64,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long)]
        orthonormal: bool,
    },
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "l1" => Ok(LossKind::L1),
        "l2" => Ok(LossKind::L2),
        other => Err(format!("unknown loss '{other}' (l1, l2)")),
    }
}

/// Epochs of adversarial training used by `--gan` when the configuration
/// does not set any.
const DEFAULT_GAN_EPOCHS: usize = 10;

fn train_config(g: &Global) -> oneshot_restore::Result<TrainConfig> {
    let mut cfg = match &g.config {
        Some(p) => harness::load_train_config(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(m) = g.mode {
        cfg.mode = m;
    }
    if let Some(l) = g.loss {
        cfg.loss = l;
    }
    if g.gan && cfg.epochs_stage2 == 0 {
        cfg.epochs_stage2 = DEFAULT_GAN_EPOCHS;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("reports serialise"));
}

fn run(cli: Cli) -> oneshot_restore::Result<()> {
    let g = &cli.global;
    let out: &Path = &g.out;
    let seed = g.seed.unwrap_or(0);
    match cli.command {
        Command::Degrade { inputs, spec } => {
            let r = harness::cmd_degrade(&inputs, &spec.into(), seed, out)?;
            let failed = r.files.iter().filter(|f| f.error.is_some()).count();
            println!("degraded {} of {} files into {}", r.files.len() - failed, r.files.len(), out.display());
        }
        Command::Train { clean, degraded } => {
            let cfg = train_config(g)?;
            let r = harness::cmd_train(&clean, &degraded, &cfg, out)?;
            println!(
                "{} epochs, probe risk {:.4e} -> {:.4e}, checkpoint {}",
                r.epochs,
                r.initial_risk,
                r.final_risk,
                r.checkpoint.display()
            );
        }
        Command::Restore {
            checkpoint,
            inputs,
            ground_truth,
        } => {
            let r = harness::cmd_restore(&checkpoint, &inputs, out, g.mode, ground_truth.as_deref())?;
            println!("restored {} images into {}", r.rows.len(), out.display());
            if let (Some(b), Some(m)) = (r.mean_baseline, r.mean_restored) {
                println!(
                    "mean input {:.2} dB / {:.4}, restored {:.2} dB / {:.4}",
                    b.psnr_db, b.ssim, m.psnr_db, m.ssim
                );
            }
        }
        Command::Eval { reference, estimate } => {
            let r = harness::cmd_eval(&reference, &estimate, out)?;
            print_json(&r);
        }
        Command::SweepNoise {
            checkpoint,
            clean,
            sigmas,
        } => {
            for r in harness::cmd_sweep_noise(&checkpoint, &clean, &sigmas, seed, out)? {
                println!("sigma_n {:>7.3}: {:.2} dB -> {:.2} dB", r.sigma_n, r.degraded.psnr_db, r.restored.psnr_db);
            }
        }
        Command::SampleSize {
            clean,
            degraded,
            sizes,
            delta,
            max_epochs,
            eval_dir,
        } => {
            let cfg = train_config(g)?;
            let params = SampleSizeParams {
                sizes,
                target_risk: delta,
                max_epochs,
            };
            for r in harness::cmd_sample_size(&clean, &degraded, &cfg, &params, &eval_dir, out)? {
                println!(
                    "m {:>6}: {:>4} epochs, risk {:.3e}, recovery error {:.4e}",
                    r.m, r.epochs, r.train_risk, r.recovery_error
                );
            }
        }
        Command::Mismatch {
            checkpoint,
            clean,
            sigma_t,
            column,
            threshold,
        } => {
            let params = MismatchParams {
                sigma_t,
                seed,
                column,
                threshold,
            };
            for r in harness::cmd_mismatch(&checkpoint, &clean, &params, out)? {
                println!(
                    "sigma_t {:.3} (residual {:.3}): column {:.4}, interior max {:.4} {}",
                    r.sigma_t,
                    r.residual_sigma,
                    r.column_deviation,
                    r.max_interior_deviation,
                    if r.pass { "PASS" } else { "FAIL" }
                );
            }
        }
        Command::SynthPairs {
            pattern,
            size,
            cell,
            low,
            high,
            spec,
        } => {
            let p = SynthParams {
                pattern,
                size,
                cell,
                low,
                high,
                spec: spec.into(),
                seed,
            };
            harness::cmd_synth_pairs(&p, out)?;
            println!("wrote clean.png and degraded.png to {}", out.display());
        }
        Command::ScDemo {
            n,
            m,
            sparsity,
            lambda,
            iters,
            orthonormal,
        } => {
            let p = ScDemoParams {
                n,
                m,
                sparsity,
                lambda,
                iters,
                orthonormal,
                seed,
            };
            let r = harness::cmd_sc_demo(&p, out)?;
            println!(
                "{} iterations, cost {:.6e} -> {:.6e}, max increase {:.1e}, equivalence deviation {:.1e}",
                r.iterations, r.initial_cost, r.final_cost, r.max_cost_increase, r.max_equivalence_deviation
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
