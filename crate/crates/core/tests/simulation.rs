use adp_track::actor_critic::{AdaptationGains, LearnerState, ProbingSignal};
use adp_track::cli::{run_and_monitor, RunConfig, Scenario};
use adp_track::sim_engine::{step, BellmanMode, JointState, Problem};
use adp_track::system_model::make_linear_benchmark;
use adp_track::tracking_transform::CostWeights;
use adp_track::value_approximator::quadratic_basis;
use adp_track::{DMatrix, DVector, Error};
use std::path::Path;

fn s1(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

fn load(name: &str) -> RunConfig {
    RunConfig::load(
        &Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("configs")
            .join(name),
    )
    .unwrap()
}

fn flat(s: &JointState) -> DVector<f64> {
    let l = &s.learner;
    DVector::from_column_slice(&[s.x[0], l.w_c[0], l.w_a[0], l.gamma[(0, 0)]])
}

#[test]
fn local_error_is_fifth_order() {
    let (model, traj) =
        make_linear_benchmark(&s1(-1.0), &s1(1.0), &s1(0.0), &DVector::zeros(1)).unwrap();
    let weights = CostWeights::new(s1(1.0), s1(1.0)).unwrap();
    let basis = quadratic_basis(1, false);
    let gains = AdaptationGains::new(10.0, 5.0, 0.001, 1.0, 0.01).unwrap();
    let problem = Problem {
        model: &model,
        traj: &traj,
        basis: &basis,
        weights: &weights,
        gains: &gains,
    };
    let probe = ProbingSignal::default_for(1, 0.5, 30.0);
    let s0 = JointState {
        x: DVector::from_element(1, 1.0),
        xd: DVector::zeros(1),
        learner: LearnerState::uniform(1, 0.3, 0.3, 10.0).unwrap(),
    };
    let t0 = 0.3;
    let local = |dt: f64| {
        let one = step(&s0, &problem, &probe, BellmanMode::Policy, t0, dt).unwrap();
        let mut r = s0.clone();
        let h = dt / 100.0;
        for k in 0..100 {
            r = step(
                &r,
                &problem,
                &probe,
                BellmanMode::Policy,
                t0 + k as f64 * h,
                h,
            )
            .unwrap();
        }
        (flat(&one) - flat(&r)).norm()
    };
    let errs = [local(1e-2), local(5e-3), local(2.5e-3)];
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!(
            (24.0..40.0).contains(&ratio),
            "local error ratio {ratio}, errors {errs:?}"
        );
    }
}

#[test]
fn gamma_stays_symmetric() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let (model, traj) =
        make_linear_benchmark(&a, &b, &s, &DVector::from_column_slice(&[1.0, 0.0])).unwrap();
    let weights = CostWeights::new(DMatrix::identity(2, 2), s1(1.0)).unwrap();
    let basis = quadratic_basis(2, true);
    let gains = AdaptationGains::new(10.0, 5.0, 0.001, 1.0, 0.01).unwrap();
    let problem = Problem {
        model: &model,
        traj: &traj,
        basis: &basis,
        weights: &weights,
        gains: &gains,
    };
    let probe = ProbingSignal::default_for(1, 1.0, 5.0);
    let mut st = JointState {
        x: DVector::from_column_slice(&[0.0, 0.5]),
        xd: traj.initial_xd().clone(),
        learner: LearnerState::uniform(basis.len(), 1.0, 1.0, 10.0).unwrap(),
    };
    let dt = 1e-3;
    for k in 0..5000 {
        st = step(
            &st,
            &problem,
            &probe,
            BellmanMode::Policy,
            k as f64 * dt,
            dt,
        )
        .unwrap();
        let g = &st.learner.gamma;
        assert!(
            (g - g.transpose()).norm() < 1e-9,
            "asymmetric gamma at step {k}"
        );
    }
}

#[test]
fn halving_dt_barely_moves_the_critic() {
    let run = |dt: f64| {
        let mut cfg = load("scalar_oracle.json");
        cfg.sim.dt = dt;
        cfg.sim.log_stride = 100;
        let sc = Scenario::build(cfg).unwrap();
        run_and_monitor(&sc).unwrap().1.summary.w_c_final[0]
    };
    let (coarse, fine) = (run(1e-3), run(5e-4));
    assert!(
        (coarse - fine).abs() / fine.abs() < 1e-4,
        "{coarse} vs {fine}"
    );
}

#[test]
fn error_decays_monotonically_once_the_probe_is_off() {
    let sc = Scenario::build(load("scalar_oracle.json")).unwrap();
    let (log, _) = run_and_monitor(&sc).unwrap();
    let cutoff = sc.sim.probe.cutoff_time;
    let after: Vec<f64> = log
        .records
        .iter()
        .filter(|r| r.t >= cutoff)
        .map(|r| r.e.norm())
        .collect();
    let start = after
        .iter()
        .position(|e| *e < 1e-2)
        .expect("error falls below 1e-2");
    for w in after[start..].windows(2) {
        assert!(
            w[1] <= w[0] * (1.0 + 1e-9) + 1e-300,
            "error grew from {} to {}",
            w[0],
            w[1]
        );
    }
}

#[test]
fn oversized_probe_never_passes_silently() {
    let mut cfg = load("scalar_oracle.json");
    let adp_track::cli::ProbeConfig::Default { amplitude, cutoff } = cfg.probe else {
        panic!("fixture uses the default probe");
    };
    cfg.probe = adp_track::cli::ProbeConfig::Default {
        amplitude: amplitude * 100.0,
        cutoff,
    };
    let sc = Scenario::build(cfg).unwrap();
    match run_and_monitor(&sc) {
        Ok((_, report)) => assert!(
            !report.monitors.all_passed(),
            "x100 probe passed every monitor"
        ),
        Err(e) => assert!(
            matches!(
                e,
                Error::NumericalBlowup { .. } | Error::GainMatrixDegenerate(_)
            ),
            "unexpected error {e}"
        ),
    }
}
