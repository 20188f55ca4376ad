//! Planar float images, 8-bit file I/O, and BT.601 full-range YCbCr.
//!
//! Intensities stay in floating point on the [0, 255] scale for the whole
//! pipeline. Rounding and clipping only happen when an image is written.

use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ColorSpace {
    Gray,
    Rgb,
    YCbCr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarImage {
    colorspace: ColorSpace,
    planes: Vec<Matrix>,
}

impl PlanarImage {
    pub fn new(colorspace: ColorSpace, planes: Vec<Matrix>) -> Result<Self> {
        let expected = match colorspace {
            ColorSpace::Gray => 1,
            ColorSpace::Rgb | ColorSpace::YCbCr => 3,
        };
        if planes.len() != expected {
            return Err(Error::contract(format!(
                "{colorspace:?} image needs {expected} planes, got {}",
                planes.len()
            )));
        }
        let shape = planes[0].shape();
        if planes.iter().any(|p| p.shape() != shape) {
            return Err(Error::shape("image planes differ in size"));
        }
        if planes.iter().any(|p| !p.is_finite()) {
            return Err(Error::contract("image contains non-finite values"));
        }
        Ok(PlanarImage { colorspace, planes })
    }

    pub fn gray(plane: Matrix) -> Self {
        PlanarImage::new(ColorSpace::Gray, vec![plane]).expect("single finite plane")
    }

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn height(&self) -> usize {
        self.planes[0].rows()
    }

    pub fn width(&self) -> usize {
        self.planes[0].cols()
    }

    pub fn channels(&self) -> usize {
        self.planes.len()
    }

    pub fn planes(&self) -> &[Matrix] {
        &self.planes
    }

    pub fn plane(&self, c: usize) -> &Matrix {
        &self.planes[c]
    }

    pub fn into_planes(self) -> Vec<Matrix> {
        self.planes
    }

    /// Applies `f` to every plane, keeping the colour space.
    pub fn try_map_planes(&self, mut f: impl FnMut(&Matrix) -> Result<Matrix>) -> Result<Self> {
        let planes = self.planes.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        PlanarImage::new(self.colorspace, planes)
    }

    /// The luminance plane: Y of a YCbCr image, the plane of a gray image, or
    /// the BT.601 luma of an RGB image.
    pub fn luminance(&self) -> Matrix {
        match self.colorspace {
            ColorSpace::Gray | ColorSpace::YCbCr => self.planes[0].clone(),
            ColorSpace::Rgb => {
                let (r, g, b) = (&self.planes[0], &self.planes[1], &self.planes[2]);
                Matrix::from_fn(self.height(), self.width(), |i, j| {
                    luma(r[(i, j)], g[(i, j)], b[(i, j)])
                })
            }
        }
    }
}

#[inline]
fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}

/// Loads an 8-bit PNG or binary PGM/PPM. Alpha channels are dropped; any
/// other sample depth is rejected.
pub fn load_image(path: impl AsRef<Path>) -> Result<PlanarImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = image::load_from_memory(&bytes)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    from_dynamic(decoded, path)
}

fn from_dynamic(img: DynamicImage, path: &Path) -> Result<PlanarImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => {
            let data = buf.into_raw().into_iter().map(f64::from).collect();
            Ok(PlanarImage::gray(Matrix::from_vec(h, w, data)?))
        }
        DynamicImage::ImageLumaA8(_) => {
            let buf = img.to_luma8();
            let data = buf.into_raw().into_iter().map(f64::from).collect();
            Ok(PlanarImage::gray(Matrix::from_vec(h, w, data)?))
        }
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => {
            let raw = img.to_rgb8().into_raw();
            let planes = (0..3)
                .map(|c| {
                    let data = raw.iter().skip(c).step_by(3).map(|&v| f64::from(v)).collect();
                    Matrix::from_vec(h, w, data)
                })
                .collect::<Result<Vec<_>>>()?;
            PlanarImage::new(ColorSpace::Rgb, planes)
        }
        other => Err(Error::format(format!(
            "{}: unsupported sample format {:?} (only 8-bit gray/RGB)",
            path.display(),
            other.color()
        ))),
    }
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Writes an image as PNG, PGM or PPM depending on the extension. YCbCr
/// images are converted to RGB first. This is the only place values are
/// rounded and clipped to [0, 255].
pub fn save_image(img: &PlanarImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let rgb;
    let img = if img.colorspace == ColorSpace::YCbCr {
        rgb = ycbcr_to_rgb(img)?;
        &rgb
    } else {
        img
    };
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = match img.colorspace {
        ColorSpace::Gray => {
            let raw = img.planes[0].as_slice().iter().map(|&v| quantize(v)).collect();
            DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, raw).expect("buffer size"))
        }
        _ => {
            let n = img.height() * img.width();
            let mut raw = Vec::with_capacity(3 * n);
            for k in 0..n {
                for p in &img.planes {
                    raw.push(quantize(p.as_slice()[k]));
                }
            }
            DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, raw).expect("buffer size"))
        }
    };
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let format = match ext.as_str() {
        "png" => image::ImageFormat::Png,
        "pgm" | "ppm" | "pnm" => image::ImageFormat::Pnm,
        _ => {
            return Err(Error::format(format!(
                "{}: unknown image extension (png, pgm, ppm)",
                path.display()
            )))
        }
    };
    ensure_parent(path)?;
    dynamic
        .save_with_format(path, format)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

/// BT.601 full-range RGB to YCbCr.
pub fn rgb_to_ycbcr(img: &PlanarImage) -> Result<PlanarImage> {
    if img.colorspace != ColorSpace::Rgb {
        return Err(Error::contract(format!(
            "rgb_to_ycbcr expects RGB, got {:?}",
            img.colorspace
        )));
    }
    let (r, g, b) = (&img.planes[0], &img.planes[1], &img.planes[2]);
    let (h, w) = (img.height(), img.width());
    let y = Matrix::from_fn(h, w, |i, j| luma(r[(i, j)], g[(i, j)], b[(i, j)]));
    let cb = Matrix::from_fn(h, w, |i, j| 128.0 + (b[(i, j)] - y[(i, j)]) / 1.772);
    let cr = Matrix::from_fn(h, w, |i, j| 128.0 + (r[(i, j)] - y[(i, j)]) / 1.402);
    PlanarImage::new(ColorSpace::YCbCr, vec![y, cb, cr])
}

/// Inverse of [`rgb_to_ycbcr`]. No clipping; that is deferred to save time.
pub fn ycbcr_to_rgb(img: &PlanarImage) -> Result<PlanarImage> {
    if img.colorspace != ColorSpace::YCbCr {
        return Err(Error::contract(format!(
            "ycbcr_to_rgb expects YCbCr, got {:?}",
            img.colorspace
        )));
    }
    let (y, cb, cr) = (&img.planes[0], &img.planes[1], &img.planes[2]);
    let (h, w) = (img.height(), img.width());
    let r = Matrix::from_fn(h, w, |i, j| y[(i, j)] + 1.402 * (cr[(i, j)] - 128.0));
    let b = Matrix::from_fn(h, w, |i, j| y[(i, j)] + 1.772 * (cb[(i, j)] - 128.0));
    // Solve the luma equation for G so the round trip is exact up to rounding.
    let g = Matrix::from_fn(h, w, |i, j| (y[(i, j)] - 0.299 * r[(i, j)] - 0.114 * b[(i, j)]) / 0.587);
    PlanarImage::new(ColorSpace::Rgb, vec![r, g, b])
}

/// Converts any image to YCbCr; gray images become Y with neutral chroma.
pub fn to_ycbcr(img: &PlanarImage) -> Result<PlanarImage> {
    match img.colorspace {
        ColorSpace::YCbCr => Ok(img.clone()),
        ColorSpace::Rgb => rgb_to_ycbcr(img),
        ColorSpace::Gray => {
            let y = img.planes[0].clone();
            let neutral = Matrix::filled(y.rows(), y.cols(), 128.0);
            PlanarImage::new(ColorSpace::YCbCr, vec![y, neutral.clone(), neutral])
        }
    }
}

/// Replaces the luminance of `img` with `y`, returning an image in the
/// original colour space (gray stays gray, RGB goes through YCbCr).
pub fn replace_luminance(img: &PlanarImage, y: Matrix) -> Result<PlanarImage> {
    if y.shape() != (img.height(), img.width()) {
        return Err(Error::shape("luminance plane size differs from image"));
    }
    match img.colorspace {
        ColorSpace::Gray => Ok(PlanarImage::gray(y)),
        ColorSpace::YCbCr => {
            let mut planes = img.planes.clone();
            planes[0] = y;
            PlanarImage::new(ColorSpace::YCbCr, planes)
        }
        ColorSpace::Rgb => {
            let mut planes = rgb_to_ycbcr(img)?.planes;
            planes[0] = y;
            ycbcr_to_rgb(&PlanarImage::new(ColorSpace::YCbCr, planes)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn rgb_pixel(r: f64, g: f64, b: f64) -> PlanarImage {
        let p = |v| Matrix::filled(1, 1, v);
        PlanarImage::new(ColorSpace::Rgb, vec![p(r), p(g), p(b)]).unwrap()
    }

    fn random_rgb(h: usize, w: usize, seed: u64) -> PlanarImage {
        let mut rng = Rng::new(seed);
        let planes = (0..3)
            .map(|_| Matrix::from_fn(h, w, |_, _| rng.below(256) as f64))
            .collect();
        PlanarImage::new(ColorSpace::Rgb, planes).unwrap()
    }

    #[test]
    fn pgm_bytes_map_directly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 128, 255, 64]);
        std::fs::write(&path, bytes).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.colorspace(), ColorSpace::Gray);
        assert_eq!(img.plane(0).as_slice(), &[0.0, 128.0, 255.0, 64.0]);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = random_rgb(5, 7, 1);
        for name in ["a.png", "a.ppm"] {
            let path = dir.path().join(name);
            save_image(&img, &path).unwrap();
            assert_eq!(load_image(&path).unwrap(), img);
        }
        let gray = PlanarImage::gray(img.plane(1).clone());
        let path = dir.path().join("g.png");
        save_image(&gray, &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), gray);
    }

    #[test]
    fn sixteen_bit_png_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.png");
        let buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(2, 2, vec![0, 1000, 2000, 65535])
            .unwrap();
        buf.save(&path).unwrap();
        assert!(matches!(load_image(&path), Err(Error::Format(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_image("/nonexistent/x.png"), Err(Error::Io { .. })));
    }

    #[test]
    fn white_and_black() {
        let w = rgb_to_ycbcr(&rgb_pixel(255.0, 255.0, 255.0)).unwrap();
        assert!((w.plane(0)[(0, 0)] - 255.0).abs() <= 0.5);
        assert!((w.plane(1)[(0, 0)] - 128.0).abs() <= 0.5);
        assert!((w.plane(2)[(0, 0)] - 128.0).abs() <= 0.5);
        let k = rgb_to_ycbcr(&rgb_pixel(0.0, 0.0, 0.0)).unwrap();
        assert!(k.plane(0)[(0, 0)].abs() <= 0.5);
        assert!((k.plane(1)[(0, 0)] - 128.0).abs() <= 0.5);
        assert!((k.plane(2)[(0, 0)] - 128.0).abs() <= 0.5);

        let back = ycbcr_to_rgb(&w).unwrap();
        for c in 0..3 {
            assert!((back.plane(c)[(0, 0)] - 255.0).abs() <= 1.0);
        }
    }

    #[test]
    fn wrong_colorspace_is_contract_error() {
        let g = PlanarImage::gray(Matrix::zeros(2, 2));
        assert!(matches!(rgb_to_ycbcr(&g), Err(Error::Contract(_))));
        assert!(matches!(ycbcr_to_rgb(&g), Err(Error::Contract(_))));
    }

    #[test]
    fn round_trip_under_one_level() {
        let img = random_rgb(16, 16, 3);
        let back = ycbcr_to_rgb(&rgb_to_ycbcr(&img).unwrap()).unwrap();
        for c in 0..3 {
            assert!(back.plane(c).max_abs_diff(img.plane(c)) < 1.0);
        }
    }

    #[test]
    fn gray_pixel_luma_is_its_value() {
        for v in [0.0, 17.0, 128.0, 254.0] {
            let y = rgb_to_ycbcr(&rgb_pixel(v, v, v)).unwrap();
            assert!((y.plane(0)[(0, 0)] - v).abs() <= 0.5);
        }
    }

    #[test]
    fn conversion_commutes_with_pixel_permutation() {
        let img = random_rgb(4, 4, 9);
        let perm = |m: &Matrix| Matrix::from_fn(4, 4, |i, j| m[(3 - j, (i + 1) % 4)]);
        let a = rgb_to_ycbcr(&img.try_map_planes(|p| Ok(perm(p))).unwrap()).unwrap();
        let b = rgb_to_ycbcr(&img).unwrap().try_map_planes(|p| Ok(perm(p))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replace_luminance_keeps_chroma() {
        let img = random_rgb(6, 6, 4);
        let y = img.luminance();
        let back = replace_luminance(&img, y).unwrap();
        for c in 0..3 {
            assert!(back.plane(c).max_abs_diff(img.plane(c)) < 1e-9);
        }
    }
}
