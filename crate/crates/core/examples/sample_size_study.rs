//! Recovery error on held-out images as a function of the number of training
//! patches, each model trained to the same empirical risk.
//!
//! ```text
//! cargo run --release --example sample_size_study [out_dir]
//! ```

use std::path::{Path, PathBuf};

use oneshot_restore::degrade::degrade;
use oneshot_restore::harness::{self, SampleSizeParams};
use oneshot_restore::image::{load_image, save_image};
use oneshot_restore::model::TrainConfig;
use oneshot_restore::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "out/sample_size".into());
    std::fs::create_dir_all(&out)?;

    let cfg = TrainConfig {
        stride: Some(1),
        ..TrainConfig::default()
    };
    let clean = data.join("train/astronaut.png");
    let degraded_path = out.join("train_degraded.png");
    save_image(&degrade(&load_image(&clean)?, &cfg.degradation(), &mut Rng::new(1))?, &degraded_path)?;

    let params = SampleSizeParams {
        sizes: vec![128, 512, 2048, 8192],
        target_risk: 3e-3,
        max_epochs: 2000,
    };
    for r in harness::cmd_sample_size(&clean, &degraded_path, &cfg, &params, &data.join("eval"), &out)? {
        println!(
            "m {:>5}: {:>4} epochs to risk {:.2e}, recovery error {:.3e}, mean PSNR {:.2} dB",
            r.m, r.epochs, r.train_risk, r.recovery_error, r.mean_psnr
        );
    }
    println!("curve in {}", out.join("sample_size.csv").display());
    Ok(())
}
