//! x3 super-resolution from one training pair, compared with bicubic
//! interpolation.
//!
//! ```text
//! cargo run --release --example super_resolution [out_dir]
//! ```

use std::path::{Path, PathBuf};

use oneshot_restore::degrade::degrade;
use oneshot_restore::harness::{self, evaluation};
use oneshot_restore::image::{load_image, save_image};
use oneshot_restore::model::{bicubic_baseline, restore, train_one_shot, ModelMeta, TrainedModel};
use oneshot_restore::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "out/sr".into());
    std::fs::create_dir_all(&out)?;

    // Residual mode: the network refines the bicubic upsampling.
    let cfg = harness::sr_desk_config();
    let clean = load_image(data.join("train/astronaut.png"))?;
    let low_res = degrade(&clean, &cfg.degradation(), &mut Rng::new(1))?;
    println!("training on {}x{} -> {}x{}", low_res.height(), low_res.width(), clean.height(), clean.width());

    let tm = TrainedModel {
        model: train_one_shot(&low_res, &clean, &cfg)?.model,
        meta: ModelMeta::from_config(&cfg)?,
    };

    let set = evaluation::degrade_set(&evaluation::load_set(&data.join("eval"))?, &cfg.degradation(), 7)?;
    let rows = evaluation::evaluate_model(&tm, &set)?;
    for (img, row) in set.iter().zip(&rows) {
        let shape = Some((img.clean.height(), img.clean.width()));
        println!("{:<8} bicubic {:.2} dB   network {:.2} dB", img.name, row.baseline.psnr_db, row.restored.psnr_db);
        save_image(&bicubic_baseline(&img.degraded, cfg.decimation, shape)?, out.join(format!("{}_bicubic.png", img.name)))?;
        save_image(&restore(&tm, &img.degraded, shape)?, out.join(format!("{}_x3.png", img.name)))?;
    }
    let wins = rows.iter().filter(|r| r.restored.psnr_db >= r.baseline.psnr_db).count();
    println!("network at or above bicubic on {wins} of {} images", rows.len());
    Ok(())
}
