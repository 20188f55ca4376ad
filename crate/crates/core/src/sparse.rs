//! L1-regularised least squares and its ISTA solver.
//!
//! ```text
//! f(z)        = 1/2 ||y - D z||^2 + lambda ||z||_1
//! Q(z, z')    = f(z) + c/2 ||z - z'||^2 - 1/2 ||D z - D z'||^2
//! z_{k+1}     = S_{lambda/c}( D^T (y - D z_k) / c + z_k )
//! ```
//!
//! Written as `relu(W_zy^T y + W_zz^T z + b)` with `W_zy = D / c`,
//! `W_zz = I - D^T D / c` and `b = -lambda / c`, one ISTA step restricted to
//! nonnegative codes is exactly one state update of the recurrent cell in
//! [`crate::model::rnn`]. Signed codes are covered by running the
//! nonnegative iteration on the compound dictionary `[D, -D]`.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::rnn::{relu, RnnCell};

/// `S_beta(z) = sign(z) max(|z| - beta, 0)`.
pub fn soft_threshold(z: f64, beta: f64) -> f64 {
    if z > beta {
        z - beta
    } else if z < -beta {
        z + beta
    } else {
        0.0
    }
}

/// `H_beta(z) = z` if `|z| > beta`, else 0.
pub fn hard_threshold(z: f64, beta: f64) -> f64 {
    if z.abs() > beta {
        z
    } else {
        0.0
    }
}

/// Checks `S_beta(z) == relu(z - beta) - relu(-z - beta)` bit for bit on
/// every element.
pub fn relu_soft_identity_check(z: &[f64], beta: f64) -> bool {
    z.iter()
        .all(|&v| soft_threshold(v, beta) == relu(v - beta) - relu(-v - beta))
}

/// `[D, -D]`: nonnegative codes over it represent signed codes over `D`.
pub fn compound_dictionary(d: &Matrix) -> Matrix {
    let m = d.cols();
    Matrix::from_fn(d.rows(), 2 * m, |i, j| if j < m { d[(i, j)] } else { -d[(i, j - m)] })
}

fn column_norms(d: &Matrix) -> Vec<f64> {
    (0..d.cols())
        .map(|j| (0..d.rows()).map(|i| d[(i, j)] * d[(i, j)]).sum::<f64>().sqrt())
        .collect()
}

/// Largest normalised inner product between two distinct columns.
pub fn mutual_coherence(d: &Matrix) -> Result<f64> {
    if d.cols() < 2 {
        return Err(Error::domain("coherence needs at least two columns"));
    }
    let norms = column_norms(d);
    if norms.iter().any(|&n| n == 0.0) {
        return Err(Error::domain("dictionary has a zero column"));
    }
    let g = linalg::gram(d);
    let mut mu: f64 = 0.0;
    for i in 0..d.cols() {
        for j in i + 1..d.cols() {
            mu = mu.max((g[(i, j)] / (norms[i] * norms[j])).abs());
        }
    }
    Ok(mu.min(1.0))
}

/// Whether `||z||_0 < (1 + 1/mu(D)) / 2`, the uniqueness bound for exact
/// recovery. Always true for an orthogonal dictionary.
pub fn recovery_bound_ok(d: &Matrix, z: &[f64]) -> Result<bool> {
    if z.len() != d.cols() {
        return Err(Error::shape(format!("code has {} entries, D has {} columns", z.len(), d.cols())));
    }
    let mu = mutual_coherence(d)?;
    let support = z.iter().filter(|&&v| v != 0.0).count() as f64;
    if mu == 0.0 {
        return Ok(true);
    }
    Ok(support < 0.5 * (1.0 + 1.0 / mu))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseProblem {
    d: Matrix,
    y: Vec<f64>,
    lambda: f64,
    c: f64,
    gram: Matrix,
    dty: Vec<f64>,
    gram_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IstaState {
    pub z: Vec<f64>,
    pub iteration: usize,
    /// Cost of the starting point followed by the cost after every step.
    pub cost_history: Vec<f64>,
    pub converged: bool,
}

impl SparseProblem {
    /// Normalises the columns of `d` and sets `c = 1.01 ||D^T D||_2`.
    pub fn new(d: &Matrix, y: &[f64], lambda: f64) -> Result<Self> {
        if y.len() != d.rows() {
            return Err(Error::shape(format!("y has {} entries, D has {} rows", y.len(), d.rows())));
        }
        if !(lambda >= 0.0) {
            return Err(Error::domain(format!("lambda must be >= 0, got {lambda}")));
        }
        let norms = column_norms(d);
        if norms.iter().any(|&n| n == 0.0) {
            return Err(Error::domain("dictionary has a zero column"));
        }
        let d = Matrix::from_fn(d.rows(), d.cols(), |i, j| d[(i, j)] / norms[j]);
        let gram = linalg::gram(&d);
        let gram_norm = linalg::spectral_norm_sym(&gram)?;
        let dty = d.matvec_t(y)?;
        Ok(SparseProblem {
            d,
            y: y.to_vec(),
            lambda,
            c: 1.01 * gram_norm,
            gram,
            dty,
            gram_norm,
        })
    }

    /// Overrides the step constant; it must exceed `||D^T D||_2`.
    pub fn with_c(mut self, c: f64) -> Result<Self> {
        if !(c > self.gram_norm) {
            return Err(Error::domain(format!(
                "c = {c} must exceed ||D^T D||_2 = {}",
                self.gram_norm
            )));
        }
        self.c = c;
        Ok(self)
    }

    pub fn dictionary(&self) -> &Matrix {
        &self.d
    }

    pub fn observation(&self) -> &[f64] {
        &self.y
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn gram_norm(&self) -> f64 {
        self.gram_norm
    }

    pub fn code_len(&self) -> usize {
        self.d.cols()
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.d.cols() {
            return Err(Error::shape(format!("code has {} entries, expected {}", z.len(), self.d.cols())));
        }
        Ok(())
    }

    pub fn cost_f(&self, z: &[f64]) -> Result<f64> {
        self.check(z)?;
        let dz = self.d.matvec(z)?;
        let fit: f64 = self.y.iter().zip(&dz).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(0.5 * fit + self.lambda * z.iter().map(|v| v.abs()).sum::<f64>())
    }

    pub fn surrogate_q(&self, z: &[f64], z_prev: &[f64]) -> Result<f64> {
        self.check(z_prev)?;
        let diff: Vec<f64> = z.iter().zip(z_prev).map(|(a, b)| a - b).collect();
        let dd = self.d.matvec(&diff)?;
        let dist: f64 = diff.iter().map(|v| v * v).sum();
        let proj: f64 = dd.iter().map(|v| v * v).sum();
        Ok(self.cost_f(z)? + 0.5 * self.c * dist - 0.5 * proj)
    }

    /// Gradient step `z + D^T (y - D z) / c` before shrinkage.
    fn gradient_point(&self, z: &[f64]) -> Vec<f64> {
        let gz = self.gram.matvec(z).expect("checked");
        z.iter()
            .zip(&self.dty)
            .zip(&gz)
            .map(|((zi, b), g)| zi + (b - g) / self.c)
            .collect()
    }

    pub fn ista_step(&self, z_prev: &[f64]) -> Result<Vec<f64>> {
        self.check(z_prev)?;
        let beta = self.lambda / self.c;
        Ok(self
            .gradient_point(z_prev)
            .into_iter()
            .map(|v| soft_threshold(v, beta))
            .collect())
    }

    /// ISTA step with the one-sided shrinkage `relu(v - lambda/c)`, i.e. the
    /// proximal step for `lambda ||z||_1` restricted to `z >= 0`.
    pub fn ista_step_nonneg(&self, z_prev: &[f64]) -> Result<Vec<f64>> {
        self.check(z_prev)?;
        let beta = self.lambda / self.c;
        Ok(self
            .gradient_point(z_prev)
            .into_iter()
            .map(|v| relu(v - beta))
            .collect())
    }

    /// Runs ISTA from `z0` until `||z_{k+1} - z_k||_inf < tol` or `max_iter`.
    pub fn ista_solve_from(&self, z0: &[f64], max_iter: usize, tol: f64) -> Result<IstaState> {
        self.check(z0)?;
        let mut z = z0.to_vec();
        let mut cost_history = vec![self.cost_f(&z)?];
        let mut converged = false;
        let mut iteration = 0;
        while iteration < max_iter {
            let next = self.ista_step(&z)?;
            let delta = next
                .iter()
                .zip(&z)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            z = next;
            iteration += 1;
            cost_history.push(self.cost_f(&z)?);
            if delta < tol {
                converged = true;
                break;
            }
        }
        Ok(IstaState {
            z,
            iteration,
            cost_history,
            converged,
        })
    }

    /// ISTA from `z = 0`.
    pub fn ista_solve(&self, max_iter: usize, tol: f64) -> Result<IstaState> {
        self.ista_solve_from(&vec![0.0; self.code_len()], max_iter, tol)
    }

    /// The recurrent cell whose state update is one nonnegative ISTA step.
    pub fn as_rnn_cell(&self) -> RnnCell {
        let m = self.code_len();
        let inv_c = 1.0 / self.c;
        let w_zy = self.d.scale(inv_c);
        let w_zz = Matrix::from_fn(m, m, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - self.gram[(i, j)] * inv_c
        });
        let b = Matrix::filled(1, m, -self.lambda * inv_c);
        RnnCell { w_zy, w_zz, b }
    }
}

/// Max absolute difference between one cell update `relu(W_zy^T y_t +
/// W_zz^T z_prev + b)` under [`SparseProblem::as_rnn_cell`] and the
/// nonnegative ISTA step on observation `y_t` from `z_prev`.
pub fn rnn_equiv_check(p: &SparseProblem, z_prev: &[f64], y_t: &[f64]) -> Result<f64> {
    let cell = p.as_rnn_cell();
    let rnn = cell.step(y_t, z_prev)?;
    let q = SparseProblem {
        y: y_t.to_vec(),
        dty: p.d.matvec_t(y_t)?,
        ..p.clone()
    };
    let ista = q.ista_step_nonneg(z_prev)?;
    Ok(rnn
        .iter()
        .zip(&ista)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn random_problem(n: usize, m: usize, lambda: f64, seed: u64) -> SparseProblem {
        let mut rng = Rng::new(seed);
        let d = Matrix::from_fn(n, m, |_, _| rng.standard_normal());
        let y: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        SparseProblem::new(&d, &y, lambda).unwrap()
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(soft_threshold(5.0, 2.0), 3.0);
        assert_eq!(soft_threshold(-1.0, 2.0), 0.0);
        assert_eq!(soft_threshold(-3.5, 0.0), -3.5);
        assert_eq!(hard_threshold(5.0, 2.0), 5.0);
        assert_eq!(hard_threshold(2.0, 2.0), 0.0);
        assert_eq!(hard_threshold(-0.25, 0.0), -0.25);
    }

    #[test]
    fn relu_identity_on_many_values() {
        let mut rng = Rng::new(1);
        let z: Vec<f64> = (0..100_000).map(|_| rng.uniform(-10.0, 10.0)).collect();
        assert!(relu_soft_identity_check(&z, 1.0));
        assert!(relu_soft_identity_check(&z, 0.0));
    }

    #[test]
    fn cost_examples() {
        let d = Matrix::identity(4);
        let y = [1.0, -2.0, 0.5, 3.0];
        let p = SparseProblem::new(&d, &y, 0.0).unwrap();
        assert_eq!(p.cost_f(&[0.0; 4]).unwrap(), 0.5 * (1.0 + 4.0 + 0.25 + 9.0));
        assert_eq!(p.cost_f(&y).unwrap(), 0.0);

        let p = random_problem(5, 7, 0.3, 2);
        let mut rng = Rng::new(3);
        let z: Vec<f64> = (0..7).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let d = p.dictionary();
        let mut fit = 0.0;
        for i in 0..5 {
            let mut r = p.observation()[i];
            for j in 0..7 {
                r -= d[(i, j)] * z[j];
            }
            fit += r * r;
        }
        let direct = 0.5 * fit + 0.3 * z.iter().map(|v| v.abs()).sum::<f64>();
        assert!((p.cost_f(&z).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn surrogate_majorizes_and_touches() {
        let p = random_problem(6, 10, 0.2, 4);
        let mut rng = Rng::new(5);
        for _ in 0..200 {
            let z: Vec<f64> = (0..10).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let zp: Vec<f64> = (0..10).map(|_| rng.uniform(-2.0, 2.0)).collect();
            assert_eq!(p.surrogate_q(&z, &z).unwrap(), p.cost_f(&z).unwrap());
            assert!(p.surrogate_q(&z, &zp).unwrap() >= p.cost_f(&z).unwrap());
        }
    }

    #[test]
    fn identity_dictionary_first_step_thresholds_projection() {
        let y = [3.0, -0.2, 1.5, -4.0];
        let p = SparseProblem::new(&Matrix::identity(4), &y, 0.5).unwrap();
        let c = p.c();
        let z1 = p.ista_step(&[0.0; 4]).unwrap();
        for (z, v) in z1.iter().zip(&y) {
            assert!((z - soft_threshold(v / c, 0.5 / c)).abs() < 1e-15);
        }
        // c = 1.01 for the identity, so one step nearly lands on S_lambda(y).
        for (z, v) in z1.iter().zip(&y) {
            assert!((z - soft_threshold(*v, 0.5)).abs() < 0.05);
        }
    }

    #[test]
    fn converged_code_is_a_fixed_point() {
        let p = random_problem(8, 16, 0.1, 6);
        let st = p.ista_solve(200_000, 1e-15).unwrap();
        let next = p.ista_step(&st.z).unwrap();
        let dev = next.iter().zip(&st.z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-12, "{dev}");
    }

    #[test]
    fn large_lambda_gives_zero_code() {
        let p = random_problem(8, 16, 0.0, 7);
        let lam = p.dictionary().matvec_t(p.observation()).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let p = SparseProblem::new(p.dictionary(), p.observation(), lam).unwrap();
        let st = p.ista_solve(100, 1e-12).unwrap();
        assert!(st.z.iter().all(|&v| v == 0.0));
        assert!(st.converged && st.iteration == 1);
    }

    #[test]
    fn orthonormal_dictionary_recovers_projection() {
        // Rotation matrix: orthonormal columns.
        let (s, c) = (0.6f64, 0.8f64);
        let d = Matrix::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
        let y = [1.0, 2.0];
        let p = SparseProblem::new(&d, &y, 0.0).unwrap();
        let st = p.ista_solve(10_000, 1e-14).unwrap();
        let expect = d.matvec_t(&y).unwrap();
        for (a, b) in st.z.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn monotone_cost_on_random_problems() {
        for seed in 0..100 {
            let p = random_problem(8, 16, 0.1, 100 + seed);
            let st = p.ista_solve(500, 0.0).unwrap();
            for w in st.cost_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }

    #[test]
    fn c_must_exceed_gram_norm() {
        let p = random_problem(4, 6, 0.1, 8);
        let g = p.gram_norm();
        assert!(p.clone().with_c(g).is_err());
        assert!(p.with_c(1.5 * g).is_ok());
    }

    #[test]
    fn coherence_examples() {
        assert_eq!(mutual_coherence(&Matrix::identity(3)).unwrap(), 0.0);
        let d = Matrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 1.0]]).unwrap();
        assert!((mutual_coherence(&d).unwrap() - 1.0).abs() < 1e-15);
        let z = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(mutual_coherence(&z), Err(Error::Domain(_))));

        let mut rng = Rng::new(9);
        let d = Matrix::from_fn(6, 10, |_, _| rng.standard_normal());
        let mut brute: f64 = 0.0;
        for i in 0..10 {
            for j in 0..10 {
                if i != j {
                    let (a, b) = (d.col(i), d.col(j));
                    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                    brute = brute.max(dot.abs() / (na * nb));
                }
            }
        }
        assert!((mutual_coherence(&d).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn recovery_bound_examples() {
        let mut z = vec![0.0; 5];
        z[..4].copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert!(recovery_bound_ok(&Matrix::identity(5), &z).unwrap());
        let d = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(!recovery_bound_ok(&d, &[1.0, 0.0]).unwrap());

        let mut rng = Rng::new(10);
        let d = Matrix::from_fn(20, 30, |_, _| rng.standard_normal());
        let mu = mutual_coherence(&d).unwrap();
        for k in 0..6 {
            let mut z = vec![0.0; 30];
            for v in z.iter_mut().take(k) {
                *v = 1.0;
            }
            assert_eq!(recovery_bound_ok(&d, &z).unwrap(), (k as f64) < 0.5 * (1.0 + 1.0 / mu));
        }
    }

    #[test]
    fn rnn_step_matches_nonnegative_ista() {
        let p = random_problem(8, 16, 0.0, 11);
        let mut rng = Rng::new(12);
        let y: Vec<f64> = (0..8).map(|_| rng.standard_normal()).collect();
        let dev = rnn_equiv_check(&p, &[0.0; 16], &y).unwrap();
        assert!(dev < 1e-15, "{dev}");

        let p = random_problem(8, 16, 0.3, 13);
        for _ in 0..100 {
            let z: Vec<f64> = (0..16).map(|_| rng.uniform(0.0, 1.0)).collect();
            let y: Vec<f64> = (0..8).map(|_| rng.standard_normal()).collect();
            assert!(rnn_equiv_check(&p, &z, &y).unwrap() < 1e-12);
        }
    }

    #[test]
    fn rnn_step_is_positively_homogeneous_without_lambda() {
        let p = random_problem(6, 9, 0.0, 14);
        let cell = p.as_rnn_cell();
        let mut rng = Rng::new(15);
        let z: Vec<f64> = (0..9).map(|_| rng.uniform(0.0, 1.0)).collect();
        let y: Vec<f64> = (0..6).map(|_| rng.standard_normal()).collect();
        let a = 2.5;
        let base = cell.step(&y, &z).unwrap();
        let ya: Vec<f64> = y.iter().map(|v| a * v).collect();
        let za: Vec<f64> = z.iter().map(|v| a * v).collect();
        let scaled = cell.step(&ya, &za).unwrap();
        for (s, b) in scaled.iter().zip(&base) {
            assert!((s - a * b).abs() < 1e-12);
        }
    }

    #[test]
    fn compound_dictionary_reaches_two_sided_optimum() {
        let p = random_problem(6, 8, 0.15, 16);
        let two = p.ista_solve(200_000, 1e-14).unwrap();
        let dd = compound_dictionary(p.dictionary());
        let q = SparseProblem::new(&dd, p.observation(), 0.15).unwrap();
        let mut z = vec![0.0; 16];
        for _ in 0..200_000 {
            z = q.ista_step_nonneg(&z).unwrap();
        }
        let (f2, fc) = (p.cost_f(&two.z).unwrap(), q.cost_f(&z).unwrap());
        assert!((f2 - fc).abs() < 1e-9, "{f2} vs {fc}");
        // Recombined signed code is optimal for the original problem.
        let signed: Vec<f64> = (0..8).map(|j| z[j] - z[8 + j]).collect();
        assert!((p.cost_f(&signed).unwrap() - f2).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn shrinkage_is_nonexpansive(a in -50.0f64..50.0, b in -50.0f64..50.0, beta in 0.0f64..10.0) {
            prop_assert!((soft_threshold(a, beta) - soft_threshold(b, beta)).abs() <= (a - b).abs() + 1e-12);
        }

        #[test]
        fn coherence_in_unit_interval(seed in 0u64..1000) {
            let mut rng = Rng::new(seed);
            let d = Matrix::from_fn(4, 7, |_, _| rng.standard_normal());
            let mu = mutual_coherence(&d).unwrap();
            prop_assert!((0.0..=1.0).contains(&mu));
        }

        #[test]
        fn ista_step_never_increases_cost(seed in 0u64..1000, lambda in 0.0f64..1.0) {
            let p = random_problem(8, 16, lambda, seed);
            let mut rng = Rng::new(seed ^ 0xabc);
            let z: Vec<f64> = (0..16).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let next = p.ista_step(&z).unwrap();
            prop_assert!(p.cost_f(&next).unwrap() <= p.cost_f(&z).unwrap() + 1e-12);
        }

        #[test]
        fn rnn_equivalence_holds(seed in 0u64..1000, lambda in 0.0f64..1.0) {
            let p = random_problem(5, 9, lambda, seed);
            let mut rng = Rng::new(seed + 1);
            let z: Vec<f64> = (0..9).map(|_| rng.uniform(0.0, 2.0)).collect();
            let y: Vec<f64> = (0..5).map(|_| rng.standard_normal()).collect();
            prop_assert!(rnn_equiv_check(&p, &z, &y).unwrap() < 1e-12);
        }
    }
}
