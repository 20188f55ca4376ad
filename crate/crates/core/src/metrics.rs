//! Full-reference quality metrics on the luminance channel.
//!
//! PSNR uses a peak of 255. SSIM averages the index over every 8x8 window
//! (stride 1, no padding) with population statistics and
//! `C1 = (0.01 * 255)^2`, `C2 = (0.03 * 255)^2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::linalg::Matrix;

pub const PEAK: f64 = 255.0;
pub const SSIM_WINDOW: usize = 8;
const C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
const C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    /// `+inf` when the images are identical.
    pub psnr_db: f64,
    pub ssim: f64,
}

fn same_shape(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

pub fn mse(reference: &Matrix, estimate: &Matrix) -> Result<f64> {
    same_shape(reference, estimate)?;
    let s: f64 = reference
        .as_slice()
        .iter()
        .zip(estimate.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s / reference.len() as f64)
}

pub fn psnr(reference: &Matrix, estimate: &Matrix) -> Result<f64> {
    let m = mse(reference, estimate)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / m).log10())
}

pub fn ssim(reference: &Matrix, estimate: &Matrix) -> Result<f64> {
    same_shape(reference, estimate)?;
    let (h, w) = reference.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::contract(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels")));
    }
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..=h - SSIM_WINDOW {
        for j in 0..=w - SSIM_WINDOW {
            let (mut sx, mut sy) = (0.0, 0.0);
            for r in i..i + SSIM_WINDOW {
                let (x, y) = (&reference.row(r)[j..j + SSIM_WINDOW], &estimate.row(r)[j..j + SSIM_WINDOW]);
                sx += x.iter().sum::<f64>();
                sy += y.iter().sum::<f64>();
            }
            let (mx, my) = (sx / n, sy / n);
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for r in i..i + SSIM_WINDOW {
                let (x, y) = (&reference.row(r)[j..j + SSIM_WINDOW], &estimate.row(r)[j..j + SSIM_WINDOW]);
                for (&a, &b) in x.iter().zip(y) {
                    let (da, db) = (a - mx, b - my);
                    vx += da * da;
                    vy += db * db;
                    cxy += da * db;
                }
            }
            let (vx, vy, cxy) = (vx / n, vy / n, cxy / n);
            total += ((2.0 * mx * my + C1) * (2.0 * cxy + C2))
                / ((mx * mx + my * my + C1) * (vx + vy + C2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

pub fn plane_metrics(reference: &Matrix, estimate: &Matrix) -> Result<Metrics> {
    Ok(Metrics {
        psnr_db: psnr(reference, estimate)?,
        ssim: ssim(reference, estimate)?,
    })
}

/// PSNR and SSIM between the luminance channels of two images.
pub fn compute_metrics(reference: &PlanarImage, estimate: &PlanarImage) -> Result<Metrics> {
    plane_metrics(&reference.luminance(), &estimate.luminance())
}

/// Arithmetic mean of each field.
pub fn mean_metrics(rows: &[Metrics]) -> Option<Metrics> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    Some(Metrics {
        psnr_db: rows.iter().map(|m| m.psnr_db).sum::<f64>() / n,
        ssim: rows.iter().map(|m| m.ssim).sum::<f64>() / n,
    })
}
