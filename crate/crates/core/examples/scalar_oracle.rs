//! Learn the value function of a scalar linear tracking problem and compare the
//! critic and actor weights against the Riccati solution.
//!
//!     cargo run --release --example scalar_oracle

use adp_track::actor_critic::{AdaptationGains, LearnerState, ProbingSignal};
use adp_track::lq_oracle::{ideal_weights, solve_care};
use adp_track::sim_engine::{run_episode, OracleReference, Problem, SimConfig};
use adp_track::system_model::make_linear_benchmark;
use adp_track::tracking_transform::CostWeights;
use adp_track::value_approximator::quadratic_basis;
use adp_track::{DMatrix, DVector};

fn main() -> adp_track::Result<()> {
    let s1 = |v: f64| DMatrix::from_element(1, 1, v);
    let (model, traj) = make_linear_benchmark(&s1(-1.0), &s1(1.0), &s1(0.0), &DVector::zeros(1))?;
    let weights = CostWeights::new(s1(1.0), s1(1.0))?;
    let basis = quadratic_basis(1, false);
    let p = solve_care(&s1(-1.0), &s1(1.0), weights.q(), weights.r())?.p;
    let w = ideal_weights(&p, &basis)?.w;

    let gains = AdaptationGains::new(10.0, 5.0, 0.001, 1.0, 0.01)?;
    let problem = Problem {
        model: &model,
        traj: &traj,
        basis: &basis,
        weights: &weights,
        gains: &gains,
    };
    let mut cfg = SimConfig::new(
        1e-3,
        60.0,
        ProbingSignal::default_for(1, 0.5, 30.0),
        DVector::from_element(1, 1.0),
        LearnerState::uniform(basis.len(), 0.3, 0.3, 10.0)?,
    );
    cfg.log_stride = 10;
    cfg.oracle = Some(OracleReference { p, w: w.clone() });

    let log = run_episode(&cfg, &problem)?;
    let s = log.summary.as_ref().expect("summary is attached");
    println!("ideal W        = {:.8}", w[0]);
    println!("final w_c      = {:.8}", s.w_c_final[0]);
    println!("final w_a      = {:.8}", s.w_a_final[0]);
    println!(
        "rel. error w_c = {:.3e}",
        s.w_c_rel_error.unwrap_or(f64::NAN)
    );
    println!(
        "rel. error w_a = {:.3e}",
        s.w_a_rel_error.unwrap_or(f64::NAN)
    );
    println!(
        "RMS delta      = {:.3e} (first 10%) -> {:.3e} (last 10%)",
        s.rms_delta_initial, s.rms_delta_final
    );
    println!("max |e| final  = {:.3e}", s.max_e_final);
    println!(
        "gamma range    = [{:.3e}, {:.3e}]",
        s.phi_lo_attained, s.phi_hi_attained
    );
    Ok(())
}
