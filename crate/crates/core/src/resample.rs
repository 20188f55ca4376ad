//! Bicubic (Catmull-Rom, a = -0.5) upsampling.
//!
//! Grid alignment follows the decimation in [`crate::degrade`]: low-res
//! sample `k` sits on high-res pixel `factor * k`, so high-res pixel `i` is
//! interpolated at low-res coordinate `i / factor`.

use crate::degrade::mirror_index;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

const A: f64 = -0.5;

fn cubic_weight(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Taps and weights for each output position along one axis.
fn axis_taps(out_len: usize, in_len: usize, factor: usize) -> Vec<[(usize, f64); 4]> {
    (0..out_len)
        .map(|i| {
            let x = i as f64 / factor as f64;
            let base = x.floor() as isize;
            let frac = x - base as f64;
            let mut taps = [(0usize, 0.0); 4];
            for (slot, off) in (-1..=2).enumerate() {
                taps[slot] = (mirror_index(base + off, in_len), cubic_weight(frac - off as f64));
            }
            taps
        })
        .collect()
}

/// Upsamples `plane` by an integer `factor` onto an `out_rows x out_cols`
/// grid with mirror boundaries.
pub fn bicubic_upsample(
    plane: &Matrix,
    factor: usize,
    out_rows: usize,
    out_cols: usize,
) -> Result<Matrix> {
    if factor == 0 {
        return Err(Error::contract("upsampling factor must be >= 1"));
    }
    if out_rows == 0 || out_cols == 0 {
        return Err(Error::contract("empty output grid"));
    }
    let row_taps = axis_taps(out_rows, plane.rows(), factor);
    let col_taps = axis_taps(out_cols, plane.cols(), factor);

    // Separable: columns first into an (in_rows x out_cols) buffer, then rows.
    let mut tmp = Matrix::zeros(plane.rows(), out_cols);
    for r in 0..plane.rows() {
        let src = plane.row(r);
        let dst = tmp.row_mut(r);
        for (o, taps) in dst.iter_mut().zip(&col_taps) {
            *o = taps.iter().map(|&(k, w)| w * src[k]).sum();
        }
    }
    let mut out = Matrix::zeros(out_rows, out_cols);
    for (r, taps) in row_taps.iter().enumerate() {
        let dst = out.row_mut(r);
        for &(k, w) in taps {
            for (o, &v) in dst.iter_mut().zip(tmp.row(k)) {
                *o += w * v;
            }
        }
    }
    Ok(out)
}
