//! Two-layer fully-connected patch discriminator:
//! `D(p) = sigmoid(w2^T relu(W1^T p + b1) + b2)` on flattened patches.
//!
//! Losses are evaluated on logits through softplus so saturated outputs stay
//! finite.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::rnn::relu;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscGrads {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

impl DiscGrads {
    pub fn tensors(&self) -> [&Matrix; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }
}

struct Hidden {
    pre: Matrix,
    act: Matrix,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Discriminator {
    pub fn init(input_dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut uniform = |rows: usize, cols: usize| {
            let a = (6.0 / (rows + cols) as f64).sqrt();
            Matrix::from_fn(rows, cols, |_, _| rng.uniform(-a, a))
        };
        let w1 = uniform(input_dim, hidden);
        let w2 = uniform(hidden, 1);
        Discriminator {
            w1,
            b1: Matrix::zeros(1, hidden),
            w2,
            b2: Matrix::zeros(1, 1),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn tensors(&self) -> [&Matrix; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn hidden(&self, x: &Matrix) -> Result<Hidden> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "discriminator expects {} inputs, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let mut pre = Matrix::zeros(x.rows(), self.w1.cols());
        for r in 0..x.rows() {
            pre.row_mut(r).copy_from_slice(self.b1.as_slice());
        }
        linalg::matmul_acc(x, &self.w1, &mut pre)?;
        let act = pre.map(relu);
        Ok(Hidden { pre, act })
    }

    fn logits_from(&self, h: &Hidden) -> Result<Vec<f64>> {
        let l = linalg::matmul(&h.act, &self.w2)?;
        Ok(l.as_slice().iter().map(|v| v + self.b2[(0, 0)]).collect())
    }

    pub fn logits(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.logits_from(&self.hidden(x)?)
    }

    /// Probability that each row of `x` is a real patch, kept strictly inside
    /// (0, 1).
    pub fn probability(&self, x: &Matrix) -> Result<Vec<f64>> {
        let lo = f64::EPSILON;
        Ok(self
            .logits(x)?
            .into_iter()
            .map(|l| sigmoid(l).clamp(lo, 1.0 - lo))
            .collect())
    }

    /// Backprop of `dL/dlogit` to parameter gradients and input gradients.
    fn backward(&self, x: &Matrix, h: &Hidden, d_logits: &[f64]) -> Result<(DiscGrads, Matrix)> {
        let dl = Matrix::column(d_logits);
        let w2 = linalg::matmul_tn(&h.act, &dl)?;
        let b2 = Matrix::filled(1, 1, d_logits.iter().sum());
        let dh = linalg::matmul_nt(&dl, &self.w2)?;
        let dpre = dh.zip_with(&h.pre, |g, a| if a > 0.0 { g } else { 0.0 })?;
        let w1 = linalg::matmul_tn(x, &dpre)?;
        let mut b1 = Matrix::zeros(1, self.w1.cols());
        for r in 0..dpre.rows() {
            for (acc, &g) in b1.as_mut_slice().iter_mut().zip(dpre.row(r)) {
                *acc += g;
            }
        }
        let dx = linalg::matmul_nt(&dpre, &self.w1)?;
        Ok((DiscGrads { w1, b1, w2, b2 }, dx))
    }

    /// Binary cross-entropy `-mean log D(real) - mean log(1 - D(fake))` and
    /// its parameter gradients.
    pub fn loss_and_grads(&self, real: &Matrix, fake: &Matrix) -> Result<(f64, DiscGrads)> {
        let hr = self.hidden(real)?;
        let hf = self.hidden(fake)?;
        let lr = self.logits_from(&hr)?;
        let lf = self.logits_from(&hf)?;
        let (nr, nf) = (lr.len() as f64, lf.len() as f64);
        let loss = lr.iter().map(|&l| softplus(-l)).sum::<f64>() / nr
            + lf.iter().map(|&l| softplus(l)).sum::<f64>() / nf;
        let dr: Vec<f64> = lr.iter().map(|&l| (sigmoid(l) - 1.0) / nr).collect();
        let df: Vec<f64> = lf.iter().map(|&l| sigmoid(l) / nf).collect();
        let (gr, _) = self.backward(real, &hr, &dr)?;
        let (gf, _) = self.backward(fake, &hf, &df)?;
        let sum = |a: &Matrix, b: &Matrix| a.add(b);
        Ok((
            loss,
            DiscGrads {
                w1: sum(&gr.w1, &gf.w1)?,
                b1: sum(&gr.b1, &gf.b1)?,
                w2: sum(&gr.w2, &gf.w2)?,
                b2: sum(&gr.b2, &gf.b2)?,
            },
        ))
    }

    /// Non-saturating generator loss `-mean log D(fake)` and its gradient
    /// with respect to the fake patches.
    pub fn generator_loss_and_input_grad(&self, fake: &Matrix) -> Result<(f64, Matrix)> {
        let h = self.hidden(fake)?;
        let l = self.logits_from(&h)?;
        let n = l.len() as f64;
        let loss = l.iter().map(|&v| softplus(-v)).sum::<f64>() / n;
        let d: Vec<f64> = l.iter().map(|&v| (sigmoid(v) - 1.0) / n).collect();
        let (_, dx) = self.backward(fake, &h, &d)?;
        Ok((loss, dx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::adam::{AdamConfig, AdamState};

    #[test]
    fn probabilities_in_open_interval() {
        let mut rng = Rng::new(1);
        let d = Discriminator::init(9, 16, &mut rng);
        let x = Matrix::from_fn(50, 9, |_, _| rng.uniform(-50.0, 50.0));
        for p in d.probability(&x).unwrap() {
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = Rng::new(2);
        let d = Discriminator::init(4, 6, &mut rng);
        let real = Matrix::from_fn(5, 4, |_, _| rng.uniform(0.0, 1.0));
        let fake = Matrix::from_fn(3, 4, |_, _| rng.uniform(0.0, 1.0));
        let (_, g) = d.loss_and_grads(&real, &fake).unwrap();
        let h = 1e-6;
        for (ti, gt) in g.tensors().iter().enumerate() {
            for k in 0..gt.len() {
                let mut plus = d.clone();
                plus.tensors_mut()[ti].as_mut_slice()[k] += h;
                let mut minus = d.clone();
                minus.tensors_mut()[ti].as_mut_slice()[k] -= h;
                let fd = (plus.loss_and_grads(&real, &fake).unwrap().0
                    - minus.loss_and_grads(&real, &fake).unwrap().0)
                    / (2.0 * h);
                assert!((fd - gt.as_slice()[k]).abs() < 1e-7, "tensor {ti} idx {k}");
            }
        }
        let (_, dx) = d.generator_loss_and_input_grad(&fake).unwrap();
        for k in 0..fake.len() {
            let mut p = fake.clone();
            p.as_mut_slice()[k] += h;
            let mut m = fake.clone();
            m.as_mut_slice()[k] -= h;
            let fd = (d.generator_loss_and_input_grad(&p).unwrap().0
                - d.generator_loss_and_input_grad(&m).unwrap().0)
                / (2.0 * h);
            assert!((fd - dx.as_slice()[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn learns_separable_toy_set() {
        let mut rng = Rng::new(3);
        let mut d = Discriminator::init(6, 16, &mut rng);
        let real = Matrix::from_fn(32, 6, |_, _| rng.uniform(0.6, 1.0));
        let fake = Matrix::from_fn(32, 6, |_, _| rng.uniform(0.0, 0.4));
        let sizes: Vec<usize> = d.tensors().iter().map(|t| t.len()).collect();
        let mut adam = AdamState::new(
            AdamConfig {
                lr: 1e-2,
                ..AdamConfig::default()
            },
            &sizes,
        );
        let initial = d.loss_and_grads(&real, &fake).unwrap().0;
        for _ in 0..200 {
            let (_, g) = d.loss_and_grads(&real, &fake).unwrap();
            let grads: Vec<&[f64]> = g.tensors().iter().map(|t| t.as_slice()).collect();
            let mut params: Vec<&mut [f64]> =
                d.tensors_mut().into_iter().map(|t| t.as_mut_slice()).collect();
            adam.step(&mut params, &grads).unwrap();
        }
        let fin = d.loss_and_grads(&real, &fake).unwrap().0;
        assert!(fin < 0.1 * initial, "{initial} -> {fin}");
    }
}
