//! Double integrator tracking a harmonic reference. The feedforward cancels the
//! reference dynamics, so the error system is an LQ problem and the learned
//! weights can be checked against the Riccati solution. Runtime monitors are
//! evaluated on the resulting log.
//!
//!     cargo run --release --example tracking_2d

use adp_track::actor_critic::{AdaptationGains, LearnerState, ProbingSignal};
use adp_track::lq_oracle::{ideal_weights, solve_care};
use adp_track::sim_engine::{
    monitor_report, run_episode, MonitorSpec, OracleReference, Problem, SimConfig,
};
use adp_track::system_model::make_linear_benchmark;
use adp_track::tracking_transform::CostWeights;
use adp_track::value_approximator::quadratic_basis;
use adp_track::{DMatrix, DVector};

fn main() -> adp_track::Result<()> {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let xd0 = DVector::from_column_slice(&[1.0, 0.0]);
    let (model, traj) = make_linear_benchmark(&a, &b, &s, &xd0)?;
    let weights = CostWeights::new(DMatrix::identity(2, 2), DMatrix::identity(1, 1))?;
    let basis = quadratic_basis(2, false);

    let p = solve_care(&a, &b, weights.q(), weights.r())?.p;
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
        80.0,
        ProbingSignal::default_for(1, 1.0, 40.0),
        DVector::from_column_slice(&[0.0, 0.5]),
        LearnerState::uniform(basis.len(), 1.0, 1.0, 10.0)?,
    );
    cfg.log_stride = 20;
    cfg.oracle = Some(OracleReference { p, w: w.clone() });

    let log = run_episode(&cfg, &problem)?;
    let s = log.summary.as_ref().expect("summary is attached");
    let show = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    println!("ideal W   = [{}]", show(w.as_slice()));
    println!("final W_c = [{}]", show(&s.w_c_final));
    println!("final W_a = [{}]", show(&s.w_a_final));
    println!(
        "rel. error W_c {:.3e}, W_a {:.3e}",
        s.w_c_rel_error.unwrap(),
        s.w_a_rel_error.unwrap()
    );
    println!(
        "|e| at probe cutoff {:.3e}, max |e| over the last 10% {:.3e}",
        s.e_at_probe_cutoff.unwrap(),
        s.max_e_final
    );
    println!(
        "max |x_d - closed form| = {:.3e}",
        s.xd_drift_max.unwrap_or(0.0)
    );

    let spec = MonitorSpec {
        d: Some(traj.bound_d()),
        ..MonitorSpec::default()
    };
    print!("{}", monitor_report(&log, &spec));
    Ok(())
}
