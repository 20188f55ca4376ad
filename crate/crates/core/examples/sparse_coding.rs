//! ISTA on a random sparse-coding problem, and the recurrent cell that runs
//! the same iteration.
//!
//! ```text
//! cargo run --release --example sparse_coding
//! ```

use oneshot_restore::sparse::{mutual_coherence, rnn_equiv_check, soft_threshold, SparseProblem};
use oneshot_restore::{Matrix, Rng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = Rng::new(3);
    let (n, m) = (8, 16);
    let d = Matrix::from_fn(n, m, |_, _| rng.standard_normal());

    // A 3-sparse nonnegative code and its noisy observation.
    let mut z_true = vec![0.0; m];
    for k in [2, 7, 11] {
        z_true[k] = rng.uniform(0.5, 1.5);
    }
    let p0 = SparseProblem::new(&d, &vec![0.0; n], 0.0)?;
    let y: Vec<f64> = p0
        .dictionary()
        .matvec(&z_true)?
        .into_iter()
        .map(|v| v + 0.01 * rng.standard_normal())
        .collect();

    let p = SparseProblem::new(&d, &y, 0.05)?;
    println!("||D^T D||_2 = {:.4}, c = {:.4}, coherence {:.3}", p.gram_norm(), p.c(), mutual_coherence(p.dictionary())?);

    let state = p.ista_solve(5000, 1e-12)?;
    let rises = state.cost_history.windows(2).filter(|w| w[1] > w[0] + 1e-12).count();
    println!(
        "ISTA: {} iterations, cost {:.6} -> {:.6}, {} increases",
        state.iteration,
        state.cost_history[0],
        state.cost_history.last().unwrap(),
        rises
    );
    println!("estimate  {:?}", state.z.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());
    println!("true code {:?}", z_true.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());

    // One cell update with W_zy = D / c, W_zz = I - D^T D / c, b = -lambda / c.
    let z_prev: Vec<f64> = (0..m).map(|_| rng.uniform(0.0, 1.0)).collect();
    println!("cell vs nonnegative ISTA step: max deviation {:.1e}", rnn_equiv_check(&p, &z_prev, &y)?);
    println!("soft_threshold(0.3, 0.1) = {}, relu(0.3 - 0.1) = {}", soft_threshold(0.3, 0.1), (0.3f64 - 0.1).max(0.0));
    Ok(())
}
