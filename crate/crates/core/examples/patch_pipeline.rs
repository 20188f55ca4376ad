//! Patch decomposition and overlap-averaging without a network: an identity
//! predictor must give the input back in both patch modes.
//!
//! ```text
//! cargo run --release --example patch_pipeline
//! ```

use oneshot_restore::patching::{extract_patch, iterate_anchors, scatter_patch, Accumulator, PatchGeometry, PatchMode};
use oneshot_restore::{Matrix, Rng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = Rng::new(0);
    let (h, w) = (40, 52);
    let img = Matrix::from_fn(h, w, |_, _| rng.uniform(0.0, 255.0));

    for mode in [PatchMode::Patch2Patch, PatchMode::Patch2Pixel] {
        let geom = PatchGeometry::new(9, 9, mode)?;
        let anchors = iterate_anchors(h, w, &geom)?;
        let mut acc = Accumulator::new(h, w);
        for &a in &anchors {
            // Each time step is one patch row, scanned top to bottom.
            let p = extract_patch(&img, &geom, a.row, a.col)?;
            let estimate = match mode {
                PatchMode::Patch2Patch => Matrix::from_fn(9, 9, |t, l| p.time_step(t)[l]),
                PatchMode::Patch2Pixel => Matrix::filled(1, 1, p.time_step(8)[geom.left()]),
            };
            scatter_patch(&mut acc, &estimate, a, &geom)?;
        }
        let rebuilt = acc.finalize()?;
        println!(
            "{mode:?}: {} anchors, max overlap {} estimates per pixel, reconstruction error {:.1e}",
            anchors.len(),
            acc.weight_plane().max_abs(),
            rebuilt.max_abs_diff(&img)
        );
    }
    Ok(())
}
