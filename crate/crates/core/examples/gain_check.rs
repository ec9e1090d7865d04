//! Estimates the bounds entering the stability analysis on a ball around the
//! origin, computes the constants, and prints the sufficient gain conditions one
//! line at a time. A second call with a weak forgetting factor shows a failing line.
//!
//!     cargo run --release --example gain_check

use adp_track::actor_critic::AdaptationGains;
use adp_track::gain_toolkit::{
    assess_gains, estimate_bounds, ultimate_bound, ApproximationSpec, CompactSetSpec,
    ExcitationSpec,
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

    let set = CompactSetSpec {
        radius: 0.2,
        sample_count: 4_000,
        ..CompactSetSpec::default()
    };
    let approx = ApproximationSpec {
        oracle_p: Some(p),
        ..ApproximationSpec::default()
    };
    // excitation levels as a pilot run would report them
    let excitation = ExcitationSpec {
        phi_lo: 10.0,
        phi_hi: 20.0,
        psi_lo: 0.05,
        t_window: 0.02,
    };
    let bounds = estimate_bounds(&model, &traj, &basis, &weights, &set, &approx, &excitation)?;
    println!(
        "L_F = {:.4}, iota2 = {:.4}, iota4 = {:.4}, kappa_e = {:.4}",
        bounds.l_f, bounds.iota2, bounds.iota4, bounds.kappa_e
    );

    let gains = AdaptationGains::new(2.0, 1.0, 0.001, 1.0, 0.5)?;
    let report = assess_gains(&gains, &bounds, &weights, 0.1, 1.0, 0.5)?;
    print!("{report}");
    let consts = report.constants.as_ref().expect("constants are attached");
    println!(
        "Zbar = {:.6e}, ultimate bound = {:.6e}",
        consts.z_bar,
        ultimate_bound(consts)?
    );

    let weak = AdaptationGains {
        lambda: 0.05,
        ..gains
    };
    let report = assess_gains(&weak, &bounds, &weights, 0.1, 1.0, 0.5)?;
    println!(
        "with lambda = 0.05 the failing lines are {:?}",
        report.failures()
    );
    Ok(())
}
