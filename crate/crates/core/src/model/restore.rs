//! Inference: scan the (upsampled) degraded luminance with analysis patches,
//! predict, reassemble, and recombine with chroma.

use crate::error::{Error, Result};
use crate::image::{to_ycbcr, ycbcr_to_rgb, ColorSpace, PlanarImage};
use crate::linalg::Matrix;
use crate::model::checkpoint::TrainedModel;
use crate::model::rnn::RnnModel;
use crate::model::train::INTENSITY_SCALE;
use crate::patching::{iterate_anchors, scatter_patch, write_time_step, Accumulator, PatchMode};
use crate::resample::bicubic_upsample;

const CHUNK: usize = 512;

/// Network output over a whole `[0, 1]`-scaled plane. Patch-to-pixel keeps
/// the last time step of each patch; patch-to-patch averages footprints.
pub fn predict_plane(model: &RnnModel, input: &Matrix) -> Result<Matrix> {
    let geom = *model.geometry();
    let (h, w) = input.shape();
    if h < geom.rows() || w < geom.cols() {
        return Err(Error::contract(format!(
            "{h}x{w} image is smaller than the {}x{} patch",
            geom.rows(),
            geom.cols()
        )));
    }
    let anchors = iterate_anchors(h, w, &geom)?;
    let mut acc = Accumulator::new(h, w);
    let mut out = Matrix::zeros(h, w);
    for chunk in anchors.chunks(CHUNK) {
        let xs: Vec<Matrix> = (0..geom.rows())
            .map(|t| {
                let mut x = Matrix::zeros(chunk.len(), geom.cols());
                for (r, &a) in chunk.iter().enumerate() {
                    write_time_step(input, &geom, a, t, x.row_mut(r));
                }
                x
            })
            .collect();
        let cache = model.forward_batch(&xs)?;
        match geom.mode() {
            PatchMode::Patch2Pixel => {
                let last = cache.outputs.last().expect("at least one step");
                for (r, &a) in chunk.iter().enumerate() {
                    out[(a.row, a.col)] = last[(r, 0)];
                }
            }
            PatchMode::Patch2Patch => {
                let mut est = Matrix::zeros(geom.rows(), geom.cols());
                for (r, &a) in chunk.iter().enumerate() {
                    for (t, step) in cache.outputs.iter().enumerate() {
                        est.row_mut(t).copy_from_slice(step.row(r));
                    }
                    scatter_patch(&mut acc, &est, a, &geom)?;
                }
            }
        }
    }
    match geom.mode() {
        PatchMode::Patch2Pixel => Ok(out),
        PatchMode::Patch2Patch => acc.finalize(),
    }
}

fn output_shape(img: &PlanarImage, factor: usize, out_shape: Option<(usize, usize)>) -> (usize, usize) {
    out_shape.unwrap_or((img.height() * factor, img.width() * factor))
}

/// Upsamples every YCbCr plane of `img` by `factor` (identity when 1).
fn upsampled_ycbcr(img: &PlanarImage, factor: usize, out_shape: Option<(usize, usize)>) -> Result<Vec<Matrix>> {
    let ycc = to_ycbcr(img)?;
    if factor <= 1 {
        return Ok(ycc.into_planes());
    }
    let (rows, cols) = output_shape(img, factor, out_shape);
    ycc.planes()
        .iter()
        .map(|p| bicubic_upsample(p, factor, rows, cols))
        .collect()
}

fn recombine(source: ColorSpace, planes: Vec<Matrix>) -> Result<PlanarImage> {
    match source {
        ColorSpace::Gray => Ok(PlanarImage::gray(planes.into_iter().next().expect("Y plane"))),
        ColorSpace::YCbCr => PlanarImage::new(ColorSpace::YCbCr, planes),
        ColorSpace::Rgb => ycbcr_to_rgb(&PlanarImage::new(ColorSpace::YCbCr, planes)?),
    }
}

/// Bicubic upsampling of all channels, in the colour space of `img`.
pub fn bicubic_baseline(img: &PlanarImage, factor: usize, out_shape: Option<(usize, usize)>) -> Result<PlanarImage> {
    recombine(img.colorspace(), upsampled_ycbcr(img, factor, out_shape)?)
}

/// Restored luminance on the `[0, 255]` scale. `out_shape` fixes the output
/// grid for decimated tasks (default: input size times the factor).
pub fn restore_luminance(tm: &TrainedModel, degraded: &Matrix, out_shape: Option<(usize, usize)>) -> Result<Matrix> {
    let factor = tm.meta.degradation.decimation;
    let base = if factor > 1 {
        let (rows, cols) = out_shape.unwrap_or((degraded.rows() * factor, degraded.cols() * factor));
        bicubic_upsample(degraded, factor, rows, cols)?
    } else {
        degraded.clone()
    };
    let pred = predict_plane(&tm.model, &base.scale(1.0 / INTENSITY_SCALE))?;
    if tm.meta.residual {
        base.zip_with(&pred, |b, p| b + INTENSITY_SCALE * p)
    } else {
        Ok(pred.scale(INTENSITY_SCALE))
    }
}

/// Restores an image: luminance through the network, chroma passed through
/// (deblurring) or bicubically upsampled (super-resolution).
pub fn restore(tm: &TrainedModel, degraded: &PlanarImage, out_shape: Option<(usize, usize)>) -> Result<PlanarImage> {
    let factor = tm.meta.degradation.decimation;
    let mut planes = upsampled_ycbcr(degraded, factor, out_shape)?;
    let shape = planes[0].shape();
    let y = restore_luminance(tm, &degraded.luminance(), Some(shape))?;
    planes[0] = y;
    recombine(degraded.colorspace(), planes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::checkpoint::ModelMeta;
    use crate::model::train::TrainConfig;
    use crate::patching::PatchGeometry;
    use crate::rng::Rng;

    fn random_rgb(h: usize, w: usize, seed: u64) -> PlanarImage {
        let mut rng = Rng::new(seed);
        let planes = (0..3)
            .map(|_| Matrix::from_fn(h, w, |_, _| rng.uniform(0.0, 255.0)))
            .collect();
        PlanarImage::new(ColorSpace::Rgb, planes).unwrap()
    }

    /// A patch-to-patch model whose recurrence copies its input: with
    /// `W_zy = [I, -I]`, `W_zz = 0` and `W_xz = [I; -I]` the output equals
    /// the input row exactly.
    fn identity_model(rows: usize, cols: usize, mode: PatchMode) -> RnnModel {
        let geom = PatchGeometry::new(rows, cols, mode).unwrap();
        let n = 2 * cols;
        let mut m = RnnModel::zeros(geom, n);
        for l in 0..cols {
            m.cell.w_zy[(l, l)] = 1.0;
            m.cell.w_zy[(l, cols + l)] = -1.0;
        }
        let p = geom.output_width();
        for k in 0..p {
            let src = if p == 1 { geom.left() } else { k };
            m.w_xz[(src, k)] = 1.0;
            m.w_xz[(cols + src, k)] = -1.0;
        }
        m
    }

    fn wrap(model: RnnModel, residual: bool, decimation: usize) -> TrainedModel {
        let cfg = TrainConfig {
            residual,
            decimation,
            patch_rows: model.geometry().rows(),
            patch_cols: model.geometry().cols(),
            mode: model.geometry().mode(),
            n_n: model.hidden(),
            ..TrainConfig::default()
        };
        TrainedModel {
            model,
            meta: ModelMeta::from_config(&cfg).unwrap(),
        }
    }

    #[test]
    fn identity_model_reproduces_input() {
        for mode in [PatchMode::Patch2Patch, PatchMode::Patch2Pixel] {
            let tm = wrap(identity_model(7, 7, mode), false, 1);
            let img = random_rgb(20, 23, 1);
            let out = restore(&tm, &img, None).unwrap();
            let diff = out.luminance().max_abs_diff(&img.luminance());
            assert!(diff < 1e-9, "{mode:?}: {diff}");
        }
    }

    #[test]
    fn zero_decoder_sr_equals_bicubic() {
        let geom = PatchGeometry::new(7, 7, PatchMode::Patch2Patch).unwrap();
        let mut model = RnnModel::init(geom, 16, &mut Rng::new(3));
        model.w_xz.fill(0.0);
        let tm = wrap(model, true, 3);
        let lr = random_rgb(12, 10, 2);
        let out = restore(&tm, &lr, Some((35, 30))).unwrap();
        let bic = bicubic_baseline(&lr, 3, Some((35, 30))).unwrap();
        assert_eq!(out, bic);
    }

    #[test]
    fn small_image_is_rejected() {
        let tm = wrap(identity_model(7, 7, PatchMode::Patch2Patch), false, 1);
        let img = PlanarImage::gray(Matrix::filled(5, 5, 1.0));
        assert!(matches!(restore(&tm, &img, None), Err(Error::Contract(_))));
    }
}
