//! Render a synthetic pattern and its degraded copy, usable as a training
//! pair with `osr train`.
//!
//! ```text
//! cargo run --release --example synthetic_training_pair [out_dir]
//! ```

use std::path::PathBuf;

use oneshot_restore::degrade::DegradationSpec;
use oneshot_restore::harness::{self, Pattern, SynthParams};
use oneshot_restore::metrics::compute_metrics;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "out/synth".into());
    for pattern in [Pattern::Chessboard, Pattern::Stripes, Pattern::Dots] {
        let dir = out.join(format!("{pattern:?}").to_lowercase());
        let p = SynthParams {
            pattern,
            size: 128,
            cell: 16,
            low: 0.0,
            high: 255.0,
            spec: DegradationSpec::deblur_default(),
            seed: 0,
        };
        let (clean, degraded) = harness::cmd_synth_pairs(&p, &dir)?;
        let m = compute_metrics(&clean, &degraded)?;
        println!("{:<10} degraded copy {:.2} dB / SSIM {:.3} -> {}", format!("{pattern:?}"), m.psnr_db, m.ssim, dir.display());
    }
    Ok(())
}
