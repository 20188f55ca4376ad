//! Train a deblurring network on a single degraded/clean pair and apply it to
//! five images it has never seen.
//!
//! ```text
//! cargo run --release --example deblur_one_shot [out_dir]
//! ```

use std::path::{Path, PathBuf};

use oneshot_restore::degrade::degrade;
use oneshot_restore::harness::{self, evaluation};
use oneshot_restore::image::{load_image, save_image};
use oneshot_restore::model::{restore, train_one_shot, ModelMeta, TrainedModel};
use oneshot_restore::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "out/deblur".into());
    std::fs::create_dir_all(&out)?;

    let cfg = harness::deblur_desk_config();
    let clean = load_image(data.join("train/astronaut.png"))?;
    let degraded = degrade(&clean, &cfg.degradation(), &mut Rng::new(1))?;

    let outcome = train_one_shot(&degraded, &clean, &cfg)?;
    println!(
        "trained {} epochs, probe loss {:.3e} -> {:.3e}",
        outcome.history.len(),
        outcome.initial_risk,
        outcome.final_risk
    );
    let tm = TrainedModel {
        model: outcome.model,
        meta: ModelMeta::from_config(&cfg)?,
    };

    let set = evaluation::degrade_set(&evaluation::load_set(&data.join("eval"))?, &cfg.degradation(), 7)?;
    let rows = evaluation::evaluate_model(&tm, &set)?;
    for (img, row) in set.iter().zip(&rows) {
        println!(
            "{:<8} blurred {:.2} dB / {:.3}   restored {:.2} dB / {:.3}",
            img.name, row.baseline.psnr_db, row.baseline.ssim, row.restored.psnr_db, row.restored.ssim
        );
        save_image(&img.degraded, out.join(format!("{}_blurred.png", img.name)))?;
        save_image(&restore(&tm, &img.degraded, None)?, out.join(format!("{}_restored.png", img.name)))?;
    }
    if let Some((base, rest)) = evaluation::summarize(&rows) {
        println!("mean     blurred {:.2} dB / {:.3}   restored {:.2} dB / {:.3}", base.psnr_db, base.ssim, rest.psnr_db, rest.ssim);
    }
    Ok(())
}
