use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Mean absolute error.
    L1,
    /// Mean squared error.
    L2,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(LossKind::L1),
            "l2" | "mse" => Ok(LossKind::L2),
            other => Err(Error::Config(format!("unknown loss '{other}' (l1, l2)"))),
        }
    }
}

/// Mean loss over every element of every time step, and its gradient with
/// respect to the outputs. The L1 subgradient at zero residual is zero.
pub fn loss_and_grad(outputs: &[Matrix], targets: &[Matrix], kind: LossKind) -> Result<(f64, Vec<Matrix>)> {
    if outputs.len() != targets.len() {
        return Err(Error::shape("outputs and targets differ in length"));
    }
    let count: usize = outputs.iter().map(Matrix::len).sum();
    if count == 0 {
        return Err(Error::shape("empty loss"));
    }
    let inv = 1.0 / count as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(outputs.len());
    for (x, y) in outputs.iter().zip(targets) {
        if x.shape() != y.shape() {
            return Err(Error::shape(format!("output {:?} vs target {:?}", x.shape(), y.shape())));
        }
        let mut g = Matrix::zeros(x.rows(), x.cols());
        for ((d, &a), &b) in g.as_mut_slice().iter_mut().zip(x.as_slice()).zip(y.as_slice()) {
            let r = a - b;
            *d = match kind {
                LossKind::L2 => {
                    total += r * r;
                    2.0 * r * inv
                }
                LossKind::L1 => {
                    total += r.abs();
                    if r > 0.0 {
                        inv
                    } else if r < 0.0 {
                        -inv
                    } else {
                        0.0
                    }
                }
            };
        }
        grads.push(g);
    }
    Ok((total * inv, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_and_gradients() {
        let x = vec![Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, -1.0]]).unwrap()];
        let y = vec![Matrix::from_rows(&[vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap()];
        let (l2, g2) = loss_and_grad(&x, &y, LossKind::L2).unwrap();
        assert!((l2 - 6.0 / 4.0).abs() < 1e-15);
        assert_eq!(g2[0].as_slice(), &[0.5, 0.0, -0.5, -1.0]);
        let (l1, g1) = loss_and_grad(&x, &y, LossKind::L1).unwrap();
        assert!((l1 - 4.0 / 4.0).abs() < 1e-15);
        assert_eq!(g1[0].as_slice(), &[0.25, 0.0, -0.25, -0.25]);
    }

    #[test]
    fn parse() {
        assert_eq!("L1".parse::<LossKind>().unwrap(), LossKind::L1);
        assert!("huber".parse::<LossKind>().is_err());
    }
}
