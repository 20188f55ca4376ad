//! Held-out evaluation of trained models.

use std::path::Path;

use serde::Serialize;

use crate::degrade::{degrade, DegradationSpec};
use crate::error::Result;
use crate::image::{load_image, PlanarImage};
use crate::metrics::{compute_metrics, mean_metrics, Metrics};
use crate::model::{bicubic_baseline, restore, TrainedModel};
use crate::rng::Rng;

use super::{list_images, stem};

#[derive(Debug, Clone)]
pub struct EvalImage {
    pub name: String,
    pub clean: PlanarImage,
    pub degraded: PlanarImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalRow {
    /// Degraded input (deblurring) or bicubic upsampling (super-resolution).
    pub baseline: Metrics,
    pub restored: Metrics,
}

/// Named clean images from a file or directory.
pub fn load_set(path: &Path) -> Result<Vec<(String, PlanarImage)>> {
    list_images(path)?
        .into_iter()
        .map(|p| Ok((stem(&p), load_image(&p)?)))
        .collect()
}

/// Degrades image `i` with its own stream `Rng::derive(seed, i)`.
pub fn degrade_set(clean: &[(String, PlanarImage)], spec: &DegradationSpec, seed: u64) -> Result<Vec<EvalImage>> {
    clean
        .iter()
        .enumerate()
        .map(|(i, (name, img))| {
            Ok(EvalImage {
                name: name.clone(),
                clean: img.clone(),
                degraded: degrade(img, spec, &mut Rng::derive(seed, i as u64))?,
            })
        })
        .collect()
}

/// Baseline input to compare against: the degraded image itself, or its
/// bicubic upsampling onto the clean grid.
pub fn baseline_image(degraded: &PlanarImage, decimation: usize, shape: (usize, usize)) -> Result<PlanarImage> {
    if decimation > 1 {
        bicubic_baseline(degraded, decimation, Some(shape))
    } else {
        Ok(degraded.clone())
    }
}

pub fn evaluate_model(tm: &TrainedModel, set: &[EvalImage]) -> Result<Vec<EvalRow>> {
    let factor = tm.meta.degradation.decimation;
    set.iter()
        .map(|e| {
            let shape = (e.clean.height(), e.clean.width());
            let base = baseline_image(&e.degraded, factor, shape)?;
            let out = restore(tm, &e.degraded, Some(shape))?;
            Ok(EvalRow {
                baseline: compute_metrics(&e.clean, &base)?,
                restored: compute_metrics(&e.clean, &out)?,
            })
        })
        .collect()
}

/// Mean baseline and restored metrics.
pub fn summarize(rows: &[EvalRow]) -> Option<(Metrics, Metrics)> {
    let b: Vec<Metrics> = rows.iter().map(|r| r.baseline).collect();
    let r: Vec<Metrics> = rows.iter().map(|r| r.restored).collect();
    Some((mean_metrics(&b)?, mean_metrics(&r)?))
}
