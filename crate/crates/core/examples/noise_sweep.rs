//! Train once at the default noise level, then measure restoration quality as
//! the test-time noise grows.
//!
//! ```text
//! cargo run --release --example noise_sweep [out_dir]
//! ```

use std::path::{Path, PathBuf};

use oneshot_restore::degrade::degrade;
use oneshot_restore::harness;
use oneshot_restore::image::{load_image, save_image};
use oneshot_restore::model::TrainConfig;
use oneshot_restore::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "out/noise".into());
    std::fs::create_dir_all(&out)?;

    // A shorter schedule than the full desk config keeps this under a minute.
    let cfg = TrainConfig {
        epochs_stage1: 15,
        ..harness::deblur_desk_config()
    };
    let clean = data.join("train/astronaut.png");
    let degraded_path = out.join("train_degraded.png");
    save_image(&degrade(&load_image(&clean)?, &cfg.degradation(), &mut Rng::new(1))?, &degraded_path)?;
    let report = harness::cmd_train(&clean, &degraded_path, &cfg, &out)?;

    let sigmas: Vec<f64> = (0..=10).map(|k| k as f64 * std::f64::consts::SQRT_2).collect();
    for r in harness::cmd_sweep_noise(&report.checkpoint, &data.join("eval/camera.png"), &sigmas, 0, &out)? {
        println!(
            "sigma_n {:>6.2}: degraded {:.2} dB, restored {:.2} dB",
            r.sigma_n, r.degraded.psnr_db, r.restored.psnr_db
        );
    }
    Ok(())
}
