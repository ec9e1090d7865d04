//! Excitation with and without a probing signal. Without the probe the regressor
//! dies out with the tracking error and the windowed PE level collapses; with it
//! the level stays bounded away from zero until the probe is switched off.
//!
//!     cargo run --release --example pe_probe

use adp_track::actor_critic::{probe, AdaptationGains, LearnerState, ProbingSignal};
use adp_track::sim_engine::{pe_metric_records, run_episode, Problem, SimConfig};
use adp_track::system_model::make_linear_benchmark;
use adp_track::tracking_transform::CostWeights;
use adp_track::value_approximator::quadratic_basis;
use adp_track::{DMatrix, DVector};

fn main() -> adp_track::Result<()> {
    let s1 = |v: f64| DMatrix::from_element(1, 1, v);
    let (model, traj) = make_linear_benchmark(&s1(-1.0), &s1(1.0), &s1(0.0), &DVector::zeros(1))?;
    let weights = CostWeights::new(s1(1.0), s1(1.0))?;
    let basis = quadratic_basis(1, false);
    let gains = AdaptationGains::new(10.0, 5.0, 0.001, 1.0, 0.01)?;
    let problem = Problem {
        model: &model,
        traj: &traj,
        basis: &basis,
        weights: &weights,
        gains: &gains,
    };

    let signal = ProbingSignal::default_for(1, 0.5, 20.0);
    print!("probe samples:");
    for t in [0.0, 0.25, 1.0, 5.0, 19.9, 20.0] {
        print!(" p({t}) = {:+.4}", probe(&signal, 1, t)[0]);
    }
    println!();

    let window = 2.0;
    for (name, sig) in [("no probe", ProbingSignal::off()), ("probe", signal)] {
        let mut cfg = SimConfig::new(
            1e-3,
            40.0,
            sig,
            DVector::from_element(1, 1.0),
            LearnerState::uniform(1, 0.3, 0.3, 10.0)?,
        );
        cfg.log_stride = 10;
        let log = run_episode(&cfg, &problem)?;
        let split = |lo: f64, hi: f64| -> Vec<_> {
            log.records
                .iter()
                .filter(|r| r.t >= lo && r.t <= hi)
                .cloned()
                .collect()
        };
        let (early, _) = pe_metric_records(&split(5.0, 20.0), window);
        let (late, _) = pe_metric_records(&split(25.0, 40.0), window);
        let s = log.summary.as_ref().expect("summary is attached");
        println!(
            "{name:>8}: PE level over {window} s windows {early:.3e} (5-20 s), {late:.3e} (25-40 s); final W_c {:.5}",
            s.w_c_final[0]
        );
    }
    Ok(())
}
