//! Three-stage compact-set selection on the scalar benchmark: once with the
//! estimated constants, where the first ball already contains Zbar, and once with
//! the first-stage iota inflated, which forces a second, larger ball.
//!
//!     cargo run --release --example gain_selection

use adp_track::actor_critic::AdaptationGains;
use adp_track::gain_toolkit::{
    select_gains, ApproximationSpec, CompactSetSpec, ExcitationSpec, SelectionOptions,
};
use adp_track::lq_oracle::solve_care;
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
    let gains = AdaptationGains::new(2.0, 1.0, 0.001, 1.0, 0.5)?;
    let set = CompactSetSpec {
        sample_count: 4_000,
        ..CompactSetSpec::default()
    };
    let mut opts = SelectionOptions::new(
        ApproximationSpec {
            oracle_p: Some(p),
            ..ApproximationSpec::default()
        },
        ExcitationSpec {
            phi_lo: 10.0,
            phi_hi: 20.0,
            psi_lo: 0.05,
            t_window: 0.02,
        },
    );

    for (z0, inflation) in [(0.01, 1.0), (0.002, 100.0)] {
        opts.iota_inflation = inflation;
        let r = select_gains(z0, &model, &traj, &basis, &gains, &weights, &set, &opts)?;
        println!("Z0 = {z0}, iota inflated x{inflation}:");
        for s in &r.stages {
            println!(
                "  stage {} radius {:.4e} Zbar {:.4e} {}",
                s.stage,
                s.radius,
                s.z_bar,
                if s.accepted { "accepted" } else { "rejected" }
            );
        }
        println!(
            "  selected radius {:.4e} contains Zbar {:.4e}; conditions hold: {}",
            r.radius,
            r.z_bar,
            r.report.all_pass()
        );
    }
    Ok(())
}
