//! ReLU recurrent encoder with a linear decoder.
//!
//! For an input sequence `y_0 .. y_{L-1}` (rows of an analysis patch):
//!
//! ```text
//! z_t = relu(W_zy^T y_t + W_zz^T z_{t-1} + b),   z_{-1} = 0
//! x_t = W_xz^T z_t
//! ```
//!
//! Batches are stored one matrix per time step with one row per sequence, so
//! the products above become `Y_t W_zy + Z_{t-1} W_zz` on row-major data.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::patching::{AnalysisPatch, PatchGeometry};
use crate::rng::Rng;

/// The recurrent cell parameters: `W_zy` (N x n), `W_zz` (n x n), `b` (1 x n).
#[derive(Debug, Clone, PartialEq)]
pub struct RnnCell {
    pub w_zy: Matrix,
    pub w_zz: Matrix,
    pub b: Matrix,
}

impl RnnCell {
    pub fn new(w_zy: Matrix, w_zz: Matrix, b: Matrix) -> Result<Self> {
        let n = w_zz.rows();
        if w_zz.cols() != n || w_zy.cols() != n || b.shape() != (1, n) {
            return Err(Error::shape(format!(
                "inconsistent cell: W_zy {:?}, W_zz {:?}, b {:?}",
                w_zy.shape(),
                w_zz.shape(),
                b.shape()
            )));
        }
        Ok(RnnCell { w_zy, w_zz, b })
    }

    pub fn input_dim(&self) -> usize {
        self.w_zy.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w_zz.rows()
    }

    /// Pre-activation `W_zy^T y + W_zz^T z_prev + b` for a single sequence.
    pub fn preactivation(&self, y: &[f64], z_prev: &[f64]) -> Result<Vec<f64>> {
        let a = self.w_zy.matvec_t(y)?;
        let r = self.w_zz.matvec_t(z_prev)?;
        Ok(a.iter()
            .zip(&r)
            .zip(self.b.as_slice())
            .map(|((a, r), b)| a + r + b)
            .collect())
    }

    /// One state update `z_t = relu(...)` for a single sequence.
    pub fn step(&self, y: &[f64], z_prev: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .preactivation(y, z_prev)?
            .into_iter()
            .map(relu)
            .collect())
    }
}

#[inline]
pub(crate) fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnModel {
    pub cell: RnnCell,
    /// Decoder `W_xz` (n x P).
    pub w_xz: Matrix,
    geom: PatchGeometry,
}

/// Gradients with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnGrads {
    pub w_zy: Matrix,
    pub w_zz: Matrix,
    pub b: Matrix,
    pub w_xz: Matrix,
}

impl RnnGrads {
    pub fn zeros_like(model: &RnnModel) -> Self {
        RnnGrads {
            w_zy: Matrix::zeros(model.cell.w_zy.rows(), model.cell.w_zy.cols()),
            w_zz: Matrix::zeros(model.hidden(), model.hidden()),
            b: Matrix::zeros(1, model.hidden()),
            w_xz: Matrix::zeros(model.w_xz.rows(), model.w_xz.cols()),
        }
    }

    pub fn tensors(&self) -> [&Matrix; 4] {
        [&self.w_zy, &self.w_zz, &self.b, &self.w_xz]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 4] {
        [&mut self.w_zy, &mut self.w_zz, &mut self.b, &mut self.w_xz]
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors().iter().map(|t| t.max_abs()).fold(0.0, f64::max)
    }
}

/// Everything the backward pass needs from a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Pre-activations per time step (B x n).
    pub pre: Vec<Matrix>,
    /// States `z_t` per time step (B x n).
    pub states: Vec<Matrix>,
    /// Decoded outputs `x_t` per time step (B x P).
    pub outputs: Vec<Matrix>,
}

impl ForwardCache {
    /// Fraction of exactly-zero latent activations across the batch.
    pub fn latent_sparsity(&self) -> f64 {
        let total: usize = self.states.iter().map(Matrix::len).sum();
        let zeros: usize = self
            .states
            .iter()
            .map(|s| s.as_slice().iter().filter(|&&v| v == 0.0).count())
            .sum();
        zeros as f64 / total as f64
    }
}

pub const TENSOR_NAMES: [&str; 4] = ["W_zy", "W_zz", "b", "W_xz"];

fn round_f32(m: &mut Matrix) {
    m.as_mut_slice()
        .iter_mut()
        .for_each(|v| *v = *v as f32 as f64);
}

impl RnnModel {
    pub fn new(cell: RnnCell, w_xz: Matrix, geom: PatchGeometry) -> Result<Self> {
        if cell.input_dim() != geom.cols() {
            return Err(Error::shape(format!(
                "W_zy has {} rows but patches are {} wide",
                cell.input_dim(),
                geom.cols()
            )));
        }
        if w_xz.shape() != (cell.hidden(), geom.output_width()) {
            return Err(Error::shape(format!(
                "W_xz is {:?}, expected {:?}",
                w_xz.shape(),
                (cell.hidden(), geom.output_width())
            )));
        }
        let model = RnnModel { cell, w_xz, geom };
        if model.tensors().iter().any(|t| !t.is_finite()) {
            return Err(Error::contract("non-finite model parameters"));
        }
        Ok(model)
    }

    /// All-zero parameters.
    pub fn zeros(geom: PatchGeometry, hidden: usize) -> Self {
        let n_in = geom.cols();
        let cell = RnnCell {
            w_zy: Matrix::zeros(n_in, hidden),
            w_zz: Matrix::zeros(hidden, hidden),
            b: Matrix::zeros(1, hidden),
        };
        RnnModel {
            cell,
            w_xz: Matrix::zeros(hidden, geom.output_width()),
            geom,
        }
    }

    /// Uniform `[-a, a]` weights with `a = sqrt(6 / (fan_in + fan_out))`,
    /// zero bias. Values are rounded to `f32` so the model is exactly
    /// representable in a checkpoint.
    pub fn init(geom: PatchGeometry, hidden: usize, rng: &mut Rng) -> Self {
        let mut model = RnnModel::zeros(geom, hidden);
        let fill = |m: &mut Matrix, rng: &mut Rng| {
            let a = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
            m.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = rng.uniform(-a, a));
            round_f32(m);
        };
        fill(&mut model.cell.w_zy, rng);
        fill(&mut model.cell.w_zz, rng);
        fill(&mut model.w_xz, rng);
        model
    }

    pub fn geometry(&self) -> &PatchGeometry {
        &self.geom
    }

    pub fn hidden(&self) -> usize {
        self.cell.hidden()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn tensors(&self) -> [&Matrix; 4] {
        [&self.cell.w_zy, &self.cell.w_zz, &self.cell.b, &self.w_xz]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 4] {
        [
            &mut self.cell.w_zy,
            &mut self.cell.w_zz,
            &mut self.cell.b,
            &mut self.w_xz,
        ]
    }

    /// Rounds every parameter to the nearest `f32`.
    pub fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            round_f32(t);
        }
    }

    fn check_inputs(&self, inputs: &[Matrix]) -> Result<usize> {
        if inputs.len() != self.geom.rows() {
            return Err(Error::shape(format!(
                "expected {} time steps, got {}",
                self.geom.rows(),
                inputs.len()
            )));
        }
        let batch = inputs[0].rows();
        for y in inputs {
            if y.shape() != (batch, self.geom.cols()) {
                return Err(Error::shape(format!(
                    "time-step input {:?}, expected {:?}",
                    y.shape(),
                    (batch, self.geom.cols())
                )));
            }
        }
        Ok(batch)
    }

    /// Batched forward pass over `inputs[t]` (B x N each).
    pub fn forward_batch(&self, inputs: &[Matrix]) -> Result<ForwardCache> {
        let batch = self.check_inputs(inputs)?;
        let n = self.hidden();
        let steps = inputs.len();
        let mut pre = Vec::with_capacity(steps);
        let mut states: Vec<Matrix> = Vec::with_capacity(steps);
        let mut outputs = Vec::with_capacity(steps);
        for (t, y) in inputs.iter().enumerate() {
            let mut a = Matrix::zeros(batch, n);
            for r in 0..batch {
                a.row_mut(r).copy_from_slice(self.cell.b.as_slice());
            }
            linalg::matmul_acc(y, &self.cell.w_zy, &mut a)?;
            if t > 0 {
                linalg::matmul_acc(&states[t - 1], &self.cell.w_zz, &mut a)?;
            }
            let z = a.map(relu);
            outputs.push(linalg::matmul(&z, &self.w_xz)?);
            pre.push(a);
            states.push(z);
        }
        Ok(ForwardCache {
            pre,
            states,
            outputs,
        })
    }

    /// Backpropagation through time given `d_outputs[t] = dL/dx_t`
    /// (B x P each). ReLU's derivative at exactly zero is taken as zero.
    pub fn backward_batch(
        &self,
        inputs: &[Matrix],
        cache: &ForwardCache,
        d_outputs: &[Matrix],
    ) -> Result<RnnGrads> {
        let batch = self.check_inputs(inputs)?;
        if d_outputs.len() != inputs.len()
            || d_outputs
                .iter()
                .any(|d| d.shape() != (batch, self.geom.output_width()))
        {
            return Err(Error::shape("output gradients do not match outputs"));
        }
        let n = self.hidden();
        let mut grads = RnnGrads::zeros_like(self);
        // dL/dz_t flowing back from step t+1 through W_zz.
        let mut carry: Option<Matrix> = None;
        for t in (0..inputs.len()).rev() {
            linalg::matmul_tn_acc(&cache.states[t], &d_outputs[t], &mut grads.w_xz)?;
            let mut dz = linalg::matmul_nt(&d_outputs[t], &self.w_xz)?;
            if let Some(c) = carry.take() {
                dz.axpy(1.0, &c)?;
            }
            let da = dz.zip_with(&cache.pre[t], |g, a| if a > 0.0 { g } else { 0.0 })?;
            linalg::matmul_tn_acc(&inputs[t], &da, &mut grads.w_zy)?;
            if t > 0 {
                linalg::matmul_tn_acc(&cache.states[t - 1], &da, &mut grads.w_zz)?;
                carry = Some(linalg::matmul_nt(&da, &self.cell.w_zz)?);
            }
            let db = grads.b.as_mut_slice();
            for r in 0..batch {
                for (acc, &g) in db.iter_mut().zip(da.row(r)) {
                    *acc += g;
                }
            }
            debug_assert_eq!(db.len(), n);
        }
        Ok(grads)
    }

    /// Time-step inputs (1 x N each) of a single patch, top row first.
    pub fn patch_inputs(&self, patch: &AnalysisPatch) -> Result<Vec<Matrix>> {
        if patch.data.shape() != (self.geom.rows(), self.geom.cols()) {
            return Err(Error::shape(format!(
                "patch {:?} does not match geometry {}x{}",
                patch.data.shape(),
                self.geom.rows(),
                self.geom.cols()
            )));
        }
        (0..self.geom.rows())
            .map(|t| Matrix::from_vec(1, self.geom.cols(), patch.time_step(t).to_vec()))
            .collect()
    }

    /// Per-step latent states and decoded outputs for one analysis patch.
    pub fn forward(&self, patch: &AnalysisPatch) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let cache = self.forward_batch(&self.patch_inputs(patch)?)?;
        Ok((
            cache.states.into_iter().map(Matrix::into_vec).collect(),
            cache.outputs.into_iter().map(Matrix::into_vec).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patching::{extract_patch, PatchMode};

    fn small_model(seed: u64, rows: usize, cols: usize, hidden: usize, mode: PatchMode) -> RnnModel {
        let geom = PatchGeometry::new(rows, cols, mode).unwrap();
        let mut rng = Rng::new(seed);
        let mut m = RnnModel::init(geom, hidden, &mut rng);
        for v in m.cell.b.as_mut_slice() {
            *v = rng.uniform(-0.1, 0.1);
        }
        m
    }

    fn random_patch(rows: usize, cols: usize, seed: u64) -> AnalysisPatch {
        let mut rng = Rng::new(seed);
        let plane = Matrix::from_fn(rows + 4, cols + 4, |_, _| rng.uniform(0.0, 1.0));
        let geom = PatchGeometry::new(rows, cols, PatchMode::Patch2Pixel).unwrap();
        extract_patch(&plane, &geom, rows + 1, 2).unwrap()
    }

    #[test]
    fn zero_model_outputs_zero() {
        let geom = PatchGeometry::new(5, 5, PatchMode::Patch2Patch).unwrap();
        let m = RnnModel::zeros(geom, 8);
        let (_, outputs) = m.forward(&random_patch(5, 5, 1)).unwrap();
        assert!(outputs.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_is_an_mlp() {
        let mut m = small_model(2, 1, 5, 6, PatchMode::Patch2Pixel);
        m.cell.w_zz.fill(0.0);
        let patch = random_patch(1, 5, 3);
        let (_, out) = m.forward(&patch).unwrap();
        let z: Vec<f64> = m
            .cell
            .w_zy
            .matvec_t(patch.time_step(0))
            .unwrap()
            .iter()
            .zip(m.cell.b.as_slice())
            .map(|(a, b)| relu(a + b))
            .collect();
        let x = m.w_xz.matvec_t(&z).unwrap();
        assert!((out[0][0] - x[0]).abs() < 1e-14);
    }

    #[test]
    fn matches_hand_rolled_loop() {
        let m = small_model(4, 4, 3, 5, PatchMode::Patch2Patch);
        let patch = random_patch(4, 3, 5);
        let (states, outputs) = m.forward(&patch).unwrap();
        let mut z = vec![0.0; 5];
        for t in 0..4 {
            let y = patch.time_step(t);
            let mut next = vec![0.0; 5];
            for k in 0..5 {
                let mut s = m.cell.b[(0, k)];
                for i in 0..3 {
                    s += m.cell.w_zy[(i, k)] * y[i];
                }
                for i in 0..5 {
                    s += m.cell.w_zz[(i, k)] * z[i];
                }
                next[k] = s.max(0.0);
            }
            z = next;
            for p in 0..3 {
                let x: f64 = (0..5).map(|k| m.w_xz[(k, p)] * z[k]).sum();
                assert!((outputs[t][p] - x).abs() < 1e-12);
            }
            for k in 0..5 {
                assert!((states[t][k] - z[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_input_zero_bias_stays_zero() {
        let mut m = small_model(6, 5, 5, 8, PatchMode::Patch2Patch);
        m.cell.b.fill(0.0);
        let patch = AnalysisPatch {
            data: Matrix::zeros(5, 5),
            anchor: crate::patching::Anchor::new(0, 0),
        };
        let (states, outputs) = m.forward(&patch).unwrap();
        assert!(states.iter().flatten().all(|&v| v == 0.0));
        assert!(outputs.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn outputs_are_causal() {
        let m = small_model(7, 6, 4, 10, PatchMode::Patch2Patch);
        let patch = random_patch(6, 4, 8);
        let (_, base) = m.forward(&patch).unwrap();
        for t in 0..6 {
            // Perturb every time step after t.
            let mut p = patch.clone();
            for future in t + 1..6 {
                let row = 6 - 1 - future;
                for v in p.data.row_mut(row) {
                    *v += 3.0;
                }
            }
            let (_, out) = m.forward(&p).unwrap();
            for s in 0..=t {
                assert_eq!(out[s], base[s], "step {s} changed when perturbing after {t}");
            }
        }
    }

    #[test]
    fn shape_checks() {
        let m = small_model(1, 3, 3, 4, PatchMode::Patch2Pixel);
        let bad = AnalysisPatch {
            data: Matrix::zeros(3, 4),
            anchor: crate::patching::Anchor::new(0, 0),
        };
        assert!(matches!(m.forward(&bad), Err(Error::Shape(_))));
        let geom = PatchGeometry::new(3, 3, PatchMode::Patch2Patch).unwrap();
        assert!(RnnModel::new(m.cell.clone(), Matrix::zeros(4, 1), geom).is_err());
    }

    #[test]
    fn init_is_f32_exact_and_seeded() {
        let a = small_model(9, 3, 3, 16, PatchMode::Patch2Patch);
        let b = small_model(9, 3, 3, 16, PatchMode::Patch2Patch);
        assert_eq!(a, b);
        let geom = PatchGeometry::new(3, 3, PatchMode::Patch2Patch).unwrap();
        let m = RnnModel::init(geom, 16, &mut Rng::new(1));
        for t in m.tensors() {
            assert!(t.as_slice().iter().all(|&v| v as f32 as f64 == v));
        }
        let limit = (6.0f64 / (16.0 + 16.0)).sqrt();
        assert!(m.cell.w_zz.max_abs() <= limit);
        assert_eq!(m.cell.b.max_abs(), 0.0);
    }
}
