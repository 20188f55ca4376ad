//! Analysis patches, scan orders, and overlap-averaged reassembly.
//!
//! An analysis patch anchored at image point `(i, j)` holds
//! `A[k, l] = Y[i - k, j + l]` for `0 <= k < rows` and `-left <= l <= right`,
//! so row `k = 0` is the anchor row and higher `k` reach upward. Indices that
//! fall outside the image are mirrored back in.
//!
//! The recurrent model consumes a patch top to bottom: time step `t` is
//! image row `i - (rows - 1) + t`, i.e. patch row `rows - 1 - t`, and the
//! last step lands on the anchor row.

use serde::{Deserialize, Serialize};

use crate::degrade::mirror_index;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatchMode {
    /// Each patch predicts the single pixel at its anchor.
    #[serde(rename = "p2x", alias = "patch2pixel")]
    Patch2Pixel,
    /// Each patch predicts its whole footprint; overlaps are averaged.
    #[serde(rename = "p2p", alias = "patch2patch")]
    Patch2Patch,
}

impl std::str::FromStr for PatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p2x" | "patch2pixel" => Ok(PatchMode::Patch2Pixel),
            "p2p" | "patch2patch" => Ok(PatchMode::Patch2Patch),
            other => Err(Error::Config(format!("unknown mode '{other}' (p2p, p2x)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGeometry {
    rows: usize,
    cols: usize,
    left: usize,
    right: usize,
    mode: PatchMode,
    stride: usize,
}

impl PatchGeometry {
    /// Centred horizontal split (`left = (cols - 1) / 2`) and, for
    /// patch-to-patch, a stride of `cols / 2`.
    pub fn new(rows: usize, cols: usize, mode: PatchMode) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::contract(format!("patch must be at least 1x1, got {rows}x{cols}")));
        }
        if rows < 7 || cols < 7 {
            log::warn!("analysis patch {rows}x{cols} is below the recommended 7x7 minimum");
        }
        let left = (cols - 1) / 2;
        let stride = match mode {
            PatchMode::Patch2Pixel => 1,
            PatchMode::Patch2Patch => (cols / 2).max(1),
        };
        Ok(PatchGeometry {
            rows,
            cols,
            left,
            right: cols - 1 - left,
            mode,
            stride,
        })
    }

    /// Overrides the horizontal split; `left + right` must equal `cols - 1`.
    pub fn with_split(mut self, left: usize, right: usize) -> Result<Self> {
        if left + right + 1 != self.cols {
            return Err(Error::contract(format!(
                "left {left} + right {right} must equal cols - 1 = {}",
                self.cols - 1
            )));
        }
        self.left = left;
        self.right = right;
        Ok(self)
    }

    pub fn with_stride(mut self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::contract("stride must be >= 1"));
        }
        self.stride = stride;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn mode(&self) -> PatchMode {
        self.mode
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Width of one decoded time step: 1 or `cols`.
    pub fn output_width(&self) -> usize {
        match self.mode {
            PatchMode::Patch2Pixel => 1,
            PatchMode::Patch2Patch => self.cols,
        }
    }

    /// Shape of the estimate handed to [`scatter_patch`].
    pub fn estimate_shape(&self) -> (usize, usize) {
        match self.mode {
            PatchMode::Patch2Pixel => (1, 1),
            PatchMode::Patch2Patch => (self.rows, self.cols),
        }
    }

    /// Top-left image coordinate of the footprint of `anchor` (may be
    /// negative near the top/left border).
    pub fn footprint_origin(&self, anchor: Anchor) -> (isize, isize) {
        (
            anchor.row as isize - (self.rows as isize - 1),
            anchor.col as isize - self.left as isize,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Anchor {
    pub row: usize,
    pub col: usize,
}

impl Anchor {
    pub fn new(row: usize, col: usize) -> Self {
        Anchor { row, col }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisPatch {
    pub data: Matrix,
    pub anchor: Anchor,
}

impl AnalysisPatch {
    /// Input row fed to the recurrence at time step `t`.
    pub fn time_step(&self, t: usize) -> &[f64] {
        self.data.row(self.data.rows() - 1 - t)
    }
}

fn check_anchor(plane: &Matrix, anchor: Anchor) -> Result<()> {
    if anchor.row >= plane.rows() || anchor.col >= plane.cols() {
        return Err(Error::contract(format!(
            "anchor ({}, {}) outside {}x{} plane",
            anchor.row,
            anchor.col,
            plane.rows(),
            plane.cols()
        )));
    }
    Ok(())
}

pub fn extract_patch(plane: &Matrix, geom: &PatchGeometry, i: usize, j: usize) -> Result<AnalysisPatch> {
    let anchor = Anchor::new(i, j);
    check_anchor(plane, anchor)?;
    let (h, w) = plane.shape();
    let left = geom.left as isize;
    let data = Matrix::from_fn(geom.rows, geom.cols, |k, c| {
        let r = mirror_index(i as isize - k as isize, h);
        let col = mirror_index(j as isize - left + c as isize, w);
        plane[(r, col)]
    });
    Ok(AnalysisPatch { data, anchor })
}

/// Writes the input row for time step `t` of the patch at `anchor` into
/// `out` (length `cols`). Equivalent to `extract_patch(..).time_step(t)`
/// without building the patch.
pub fn write_time_step(plane: &Matrix, geom: &PatchGeometry, anchor: Anchor, t: usize, out: &mut [f64]) {
    let (h, w) = plane.shape();
    let (r0, c0) = geom.footprint_origin(anchor);
    let src = plane.row(mirror_index(r0 + t as isize, h));
    if c0 >= 0 && c0 as usize + geom.cols <= w {
        out.copy_from_slice(&src[c0 as usize..c0 as usize + geom.cols]);
    } else {
        for (l, o) in out.iter_mut().enumerate() {
            *o = src[mirror_index(c0 + l as isize, w)];
        }
    }
}

/// Writes the target values for time step `t`: the anchor column for
/// patch-to-pixel, the full footprint row for patch-to-patch.
pub fn write_target_step(plane: &Matrix, geom: &PatchGeometry, anchor: Anchor, t: usize, out: &mut [f64]) {
    match geom.mode {
        PatchMode::Patch2Patch => write_time_step(plane, geom, anchor, t, out),
        PatchMode::Patch2Pixel => {
            let (h, _) = plane.shape();
            let (r0, _) = geom.footprint_origin(anchor);
            out[0] = plane[(mirror_index(r0 + t as isize, h), anchor.col)];
        }
    }
}

/// Footprint start positions along one axis. Steps larger than the
/// footprint would leave gaps, so the step is capped at `span`.
fn grid_positions(len: usize, span: usize, stride: usize) -> Vec<usize> {
    let last = len - span;
    let mut pos: Vec<usize> = (0..=last).step_by(stride.min(span)).collect();
    if *pos.last().expect("non-empty") != last {
        pos.push(last);
    }
    pos
}

/// Anchors visited by a full scan, in row-major order. Patch-to-pixel visits
/// every pixel. Patch-to-patch places footprints on a stride grid inside the
/// image, with a final row/column forced so every pixel is covered.
pub fn iterate_anchors(h: usize, w: usize, geom: &PatchGeometry) -> Result<Vec<Anchor>> {
    if h == 0 || w == 0 {
        return Err(Error::contract("empty image"));
    }
    match geom.mode {
        PatchMode::Patch2Pixel => Ok((0..h)
            .flat_map(|i| (0..w).map(move |j| Anchor::new(i, j)))
            .collect()),
        PatchMode::Patch2Patch => {
            if h < geom.rows || w < geom.cols {
                return Err(Error::contract(format!(
                    "{h}x{w} image smaller than {}x{} patch",
                    geom.rows, geom.cols
                )));
            }
            let rows = grid_positions(h, geom.rows, geom.stride);
            let cols = grid_positions(w, geom.cols, geom.stride);
            Ok(rows
                .iter()
                .flat_map(|&r| {
                    cols.iter()
                        .map(move |&c| Anchor::new(r + geom.rows - 1, c + geom.left))
                })
                .collect())
        }
    }
}

/// Every anchor usable for training: all pixels for patch-to-pixel, every
/// fully interior footprint for patch-to-patch.
pub fn training_anchors(h: usize, w: usize, geom: &PatchGeometry) -> Result<Vec<Anchor>> {
    match geom.mode {
        PatchMode::Patch2Pixel => iterate_anchors(h, w, geom),
        PatchMode::Patch2Patch => {
            let dense = geom.with_stride(1)?;
            iterate_anchors(h, w, &dense)
        }
    }
}

/// The last value of a decoded output segment.
pub fn select_output_pixel(segment: &[f64]) -> Result<f64> {
    segment
        .last()
        .copied()
        .ok_or_else(|| Error::contract("empty output segment"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    sum: Matrix,
    weight: Matrix,
}

impl Accumulator {
    pub fn new(h: usize, w: usize) -> Self {
        Accumulator {
            sum: Matrix::zeros(h, w),
            weight: Matrix::zeros(h, w),
        }
    }

    pub fn sum_plane(&self) -> &Matrix {
        &self.sum
    }

    pub fn weight_plane(&self) -> &Matrix {
        &self.weight
    }

    /// Adds another accumulator over the same image (e.g. from a worker).
    pub fn merge(&mut self, other: &Accumulator) -> Result<()> {
        self.sum.axpy(1.0, &other.sum)?;
        self.weight.axpy(1.0, &other.weight)
    }

    /// Pixel-wise `sum / weight`. Fails if any pixel was never covered.
    pub fn finalize(&self) -> Result<Matrix> {
        if self.weight.as_slice().iter().any(|&w| w <= 0.0) {
            return Err(Error::contract("accumulator has uncovered pixels"));
        }
        self.sum.zip_with(&self.weight, |s, w| s / w)
    }
}

/// Adds a patch estimate over its footprint. Footprint pixels outside the
/// image are dropped.
pub fn scatter_patch(acc: &mut Accumulator, estimate: &Matrix, anchor: Anchor, geom: &PatchGeometry) -> Result<()> {
    if estimate.shape() != geom.estimate_shape() {
        return Err(Error::contract(format!(
            "estimate {:?} does not match output shape {:?}",
            estimate.shape(),
            geom.estimate_shape()
        )));
    }
    let (h, w) = acc.sum.shape();
    if anchor.row >= h || anchor.col >= w {
        return Err(Error::contract("anchor outside accumulator"));
    }
    match geom.mode {
        PatchMode::Patch2Pixel => {
            acc.sum[(anchor.row, anchor.col)] += estimate[(0, 0)];
            acc.weight[(anchor.row, anchor.col)] += 1.0;
        }
        PatchMode::Patch2Patch => {
            let (r0, c0) = geom.footprint_origin(anchor);
            for t in 0..geom.rows {
                let r = r0 + t as isize;
                if r < 0 || r as usize >= h {
                    continue;
                }
                for l in 0..geom.cols {
                    let c = c0 + l as isize;
                    if c < 0 || c as usize >= w {
                        continue;
                    }
                    acc.sum[(r as usize, c as usize)] += estimate[(t, l)];
                    acc.weight[(r as usize, c as usize)] += 1.0;
                }
            }
        }
    }
    Ok(())
}
