//! With the ideal weights from the Riccati solution the Bellman error vanishes
//! everywhere, not just along trajectories. This samples the concatenated state
//! on a ball and reports the largest residual, for the exact basis and for a
//! basis that also carries the `e x_d` and `x_d x_d` terms (whose ideal weights
//! are zero).
//!
//!     cargo run --release --example hjb_residual

use adp_track::actor_critic::{bellman_error, regressor};
use adp_track::gain_toolkit::ball_samples;
use adp_track::lq_oracle::{closed_loop_spectrum, ideal_weights, solve_care};
use adp_track::system_model::make_linear_benchmark;
use adp_track::tracking_transform::{ConcatenatedState, CostWeights};
use adp_track::value_approximator::{policy, quadratic_basis};
use adp_track::{DMatrix, DVector};

fn main() -> adp_track::Result<()> {
    let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
    let b = DMatrix::identity(2, 2);
    let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let xd0 = DVector::from_column_slice(&[1.0, 0.0]);
    let (model, traj) = make_linear_benchmark(&a, &b, &s, &xd0)?;
    let weights = CostWeights::new(
        DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 3.0])),
        DMatrix::identity(2, 2),
    )?;

    let sol = solve_care(&a, &b, weights.q(), weights.r())?;
    println!(
        "P = {:.10?}, residual {:.2e}",
        sol.p.as_slice(),
        sol.residual
    );
    println!(
        "closed loop: {:?}",
        closed_loop_spectrum(&a, &b, weights.r(), &sol.p)
    );

    for cross in [false, true] {
        let basis = quadratic_basis(2, cross);
        let w = ideal_weights(&sol.p, &basis)?.w;
        let mut worst: f64 = 0.0;
        for z in ball_samples(4, 3.0, 10_000, 11) {
            let zeta = ConcatenatedState::from_flat(&z)?;
            let mu = policy(&w, &basis, &zeta, &model, &weights);
            let omega = regressor(&basis, &zeta, &mu, &model, &traj)?;
            worst = worst.max(bellman_error(&w, &omega, &zeta, &mu, &weights).abs());
        }
        println!(
            "basis with {:>2} terms: max |delta| = {worst:.3e}",
            basis.len()
        );
    }
    Ok(())
}
