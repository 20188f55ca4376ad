//! Restore an image blurred less than the training data and check that the
//! result equals the matched restoration up to the residual Gaussian blur.
//!
//! ```text
//! cargo run --release --example system_mismatch [out_dir]
//! ```

use std::path::{Path, PathBuf};

use oneshot_restore::degrade::{compose_sigma, degrade, residual_sigma};
use oneshot_restore::harness::{self, MismatchParams};
use oneshot_restore::image::{load_image, save_image};
use oneshot_restore::model::TrainConfig;
use oneshot_restore::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "out/mismatch".into());
    std::fs::create_dir_all(&out)?;

    let sigma_s = 2.0;
    println!("residual for sigma 1 -> 2: {:.4} (compose check {:.4})", residual_sigma(1.0, sigma_s)?, compose_sigma(1.0, 3f64.sqrt()));

    let cfg = TrainConfig {
        blur_sigma: sigma_s,
        ..harness::deblur_desk_config()
    };
    let clean = data.join("train/astronaut.png");
    let degraded = degrade(&load_image(&clean)?, &cfg.degradation(), &mut Rng::new(1))?;
    let degraded_path = out.join("train_degraded.png");
    save_image(&degraded, &degraded_path)?;
    let report = harness::cmd_train(&clean, &degraded_path, &cfg, &out)?;

    let params = MismatchParams {
        sigma_t: vec![1.0, 1.6, 2.0],
        seed: 0,
        column: 55,
        threshold: 0.15,
    };
    for r in harness::cmd_mismatch(&report.checkpoint, &data.join("eval/camera.png"), &params, &out)? {
        println!(
            "sigma_t {:.1}: residual {:.3}, column 55 deviation {:.4}, worst interior column {:.4}",
            r.sigma_t, r.residual_sigma, r.column_deviation, r.max_interior_deviation
        );
    }
    println!("profiles in {}", out.join("mismatch_profile.csv").display());
    Ok(())
}
