//! Two-link planar arm with friction tracking a periodic joint trajectory, using
//! the 23-term polynomial basis. The probe is on for the first 30 s.
//!
//!     cargo run --release --example manipulator

use adp_track::actor_critic::{manipulator_probe, AdaptationGains, LearnerState};
use adp_track::sim_engine::{monitor_report, run_episode, MonitorSpec, Problem, SimConfig};
use adp_track::system_model::make_manipulator_benchmark;
use adp_track::tracking_transform::CostWeights;
use adp_track::value_approximator::manipulator_basis;
use adp_track::{DMatrix, DVector};

fn main() -> adp_track::Result<()> {
    let (model, traj) = make_manipulator_benchmark();
    let basis = manipulator_basis();
    let q = DMatrix::from_diagonal(&DVector::from_column_slice(&[10.0, 10.0, 2.0, 2.0]));
    let weights = CostWeights::new(q, DMatrix::identity(2, 2))?;
    let gains = AdaptationGains::new(1.25, 5.0, 0.001, 0.005, 0.001)?;
    let problem = Problem {
        model: &model,
        traj: &traj,
        basis: &basis,
        weights: &weights,
        gains: &gains,
    };
    let mut cfg = SimConfig::new(
        2e-3,
        120.0,
        manipulator_probe(30.0),
        DVector::from_column_slice(&[1.8, 1.6, 0.0, 0.0]),
        LearnerState::uniform(basis.len(), 10.0, 6.0, 2000.0)?,
    );
    cfg.log_stride = 50;

    let log = run_episode(&cfg, &problem)?;
    println!("{:>6} {:>12} {:>12} {:>12}", "t", "|e|", "|W_c|", "delta");
    for r in log.records.iter().step_by(100) {
        println!(
            "{:>6.1} {:>12.4e} {:>12.4e} {:>12.4e}",
            r.t,
            r.e.norm(),
            r.w_c.norm(),
            r.delta
        );
    }
    let s = log.summary.as_ref().expect("summary is attached");
    println!(
        "|e| at probe cutoff {:.3e}, max |e| over the last 10% {:.3e}, max |x| {:.3}",
        s.e_at_probe_cutoff.unwrap_or(f64::NAN),
        s.max_e_final,
        s.max_state_norm
    );
    let spec = MonitorSpec {
        d: Some(traj.bound_d()),
        ..MonitorSpec::default()
    };
    print!("{}", monitor_report(&log, &spec));
    Ok(())
}
