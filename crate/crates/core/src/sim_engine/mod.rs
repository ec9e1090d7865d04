//! Fixed-step RK4 integration of plant, desired trajectory and learner, with
//! trajectory logging and runtime monitors.

mod log;
mod monitor;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use log::{LogRecord, RunMetadata, Summary, TrajectoryLog};
pub use monitor::{
    monitor_report, pe_metric, pe_metric_records, MonitorCheck, MonitorReport, MonitorSpec,
};

use crate::actor_critic::{
    actor_derivative, critic_derivative, gain_matrix_derivative, normalization, probe,
    AdaptationGains, LearnerState, ProbingSignal,
};
use crate::linalg;
use crate::system_model::{steady_state_control, DesiredTrajectoryModel, SystemModel};
use crate::tracking_transform::{
    concatenated_drift, concatenated_input, lift, local_cost, ConcatenatedState, CostWeights,
};
use crate::value_approximator::{policy_from_parts, BasisSet};
use crate::{Error, Result};

/// Which control the Bellman error is evaluated at.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BellmanMode {
    /// The actor's policy `μ`; the probe only perturbs the plant. With this choice
    /// `δ` vanishes identically at the ideal weights.
    #[default]
    Policy,
    /// The applied perturbation `μ + probe`.
    Applied,
}

/// Exact quantities available on linear benchmarks, used for diagnostics only.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReference {
    pub p: DMatrix<f64>,
    pub w: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub probe: ProbingSignal,
    pub x0: DVector<f64>,
    pub learner0: LearnerState,
    pub log_stride: usize,
    pub bellman_mode: BellmanMode,
    pub oracle: Option<OracleReference>,
    pub metadata: RunMetadata,
}

impl SimConfig {
    pub fn new(
        dt: f64,
        horizon: f64,
        probe: ProbingSignal,
        x0: DVector<f64>,
        learner0: LearnerState,
    ) -> Self {
        Self {
            dt,
            horizon,
            probe,
            x0,
            learner0,
            log_stride: 1,
            bellman_mode: BellmanMode::Policy,
            oracle: None,
            metadata: RunMetadata::default(),
        }
    }

    pub fn validate(&self, problem: &Problem<'_>) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.horizon >= self.dt) {
            return Err(Error::Config("horizon must be at least dt".into()));
        }
        if self.log_stride == 0 {
            return Err(Error::Config("log_stride must be at least 1".into()));
        }
        let n = problem.model.state_dim();
        if self.x0.len() != n {
            return Err(Error::Dimension(format!(
                "x0 has length {}, plant has {n}",
                self.x0.len()
            )));
        }
        if self.learner0.len() != problem.basis.len() {
            return Err(Error::Dimension(format!(
                "learner has {} weights, basis has {}",
                self.learner0.len(),
                problem.basis.len()
            )));
        }
        self.learner0.validate()?;
        self.probe.validate(problem.model.input_dim())?;
        Ok(())
    }
}

/// Everything that stays fixed over an episode.
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub model: &'a SystemModel,
    pub traj: &'a DesiredTrajectoryModel,
    pub basis: &'a BasisSet,
    pub weights: &'a CostWeights,
    pub gains: &'a AdaptationGains,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    pub x: DVector<f64>,
    pub xd: DVector<f64>,
    pub learner: LearnerState,
}

impl JointState {
    fn flatten(&self) -> DVector<f64> {
        let l = &self.learner;
        let mut v = Vec::with_capacity(2 * self.x.len() + 2 * l.len() + l.gamma.len());
        v.extend_from_slice(self.x.as_slice());
        v.extend_from_slice(self.xd.as_slice());
        v.extend_from_slice(l.w_c.as_slice());
        v.extend_from_slice(l.gamma.as_slice());
        v.extend_from_slice(l.w_a.as_slice());
        DVector::from_vec(v)
    }

    fn unflatten(y: &DVector<f64>, n: usize, nb: usize) -> Self {
        let s = y.as_slice();
        let mut at = 0;
        let mut take = |len: usize| {
            let out = &s[at..at + len];
            at += len;
            out
        };
        let x = DVector::from_column_slice(take(n));
        let xd = DVector::from_column_slice(take(n));
        let w_c = DVector::from_column_slice(take(nb));
        let gamma = DMatrix::from_column_slice(nb, nb, take(nb * nb));
        let w_a = DVector::from_column_slice(take(nb));
        Self {
            x,
            xd,
            learner: LearnerState { w_c, w_a, gamma },
        }
    }
}

/// Signals evaluated at one point of the joint state.
#[derive(Clone, Debug)]
pub struct Signals {
    pub zeta: ConcatenatedState,
    pub u: DVector<f64>,
    pub mu: DVector<f64>,
    pub omega: DVector<f64>,
    pub rho: f64,
    pub delta: f64,
}

pub fn signals(
    state: &JointState,
    problem: &Problem<'_>,
    probe_signal: &ProbingSignal,
    mode: BellmanMode,
    t: f64,
) -> Result<Signals> {
    let zeta = lift(&state.x, &state.xd)?;
    let flat = zeta.flatten();
    let jac = problem.basis.jacobian(&flat);
    let g_big = concatenated_input(&zeta, problem.model);
    let f_big = concatenated_drift(&zeta, problem.model, problem.traj)?;
    let mu = policy_from_parts(&state.learner.w_a, &jac, &g_big, problem.weights);
    let ud = steady_state_control(problem.model, problem.traj, &state.xd)?;
    let p = probe(probe_signal, problem.model.input_dim(), t);
    let u = &mu + &ud + &p;
    let mu_learn = match mode {
        BellmanMode::Policy => mu.clone(),
        BellmanMode::Applied => &mu + &p,
    };
    let omega = &jac * (f_big + &g_big * &mu_learn);
    let rho = normalization(&omega, &state.learner.gamma, problem.gains.nu);
    let delta = state.learner.w_c.dot(&omega) + local_cost(&zeta, &mu_learn, problem.weights);
    Ok(Signals {
        zeta,
        u,
        mu,
        omega,
        rho,
        delta,
    })
}

fn check_finite(v: &[f64], component: &str, t: f64) -> Result<()> {
    if linalg::all_finite(v) {
        Ok(())
    } else {
        Err(Error::NumericalBlowup {
            component: component.to_string(),
            time: t,
        })
    }
}

fn derivative(
    y: &DVector<f64>,
    problem: &Problem<'_>,
    probe_signal: &ProbingSignal,
    mode: BellmanMode,
    t: f64,
) -> Result<DVector<f64>> {
    let n = problem.model.state_dim();
    let nb = problem.basis.len();
    let state = JointState::unflatten(y, n, nb);
    let s = signals(&state, problem, probe_signal, mode, t)?;
    let xdot = problem.model.drift(&state.x) + problem.model.input_matrix(&state.x) * &s.u;
    let xd_dot = problem.traj.generator(&state.xd);
    let l = &state.learner;
    let wc_dot = critic_derivative(&l.gamma, &s.omega, s.delta, problem.gains);
    let gamma_dot = gain_matrix_derivative(&l.gamma, &s.omega, problem.gains);
    let wa_dot = actor_derivative(&l.w_a, &l.w_c, problem.gains);
    check_finite(xdot.as_slice(), "x", t)?;
    check_finite(xd_dot.as_slice(), "x_d", t)?;
    check_finite(wc_dot.as_slice(), "w_c", t)?;
    check_finite(gamma_dot.as_slice(), "gamma", t)?;
    check_finite(wa_dot.as_slice(), "w_a", t)?;
    let d = JointState {
        x: xdot,
        xd: xd_dot,
        learner: LearnerState {
            w_c: wc_dot,
            w_a: wa_dot,
            gamma: gamma_dot,
        },
    };
    Ok(d.flatten())
}

/// One classical RK4 step of the joint system, followed by symmetrization of Γ
/// and a positive-definiteness check.
pub fn step(
    state: &JointState,
    problem: &Problem<'_>,
    probe_signal: &ProbingSignal,
    mode: BellmanMode,
    t: f64,
    dt: f64,
) -> Result<JointState> {
    let y = state.flatten();
    let k1 = derivative(&y, problem, probe_signal, mode, t)?;
    let k2 = derivative(
        &(&y + &k1 * (0.5 * dt)),
        problem,
        probe_signal,
        mode,
        t + 0.5 * dt,
    )?;
    let k3 = derivative(
        &(&y + &k2 * (0.5 * dt)),
        problem,
        probe_signal,
        mode,
        t + 0.5 * dt,
    )?;
    let k4 = derivative(&(&y + &k3 * dt), problem, probe_signal, mode, t + dt)?;
    let y_next = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let mut next = JointState::unflatten(&y_next, problem.model.state_dim(), problem.basis.len());
    let g = &next.learner.gamma;
    next.learner.gamma = (g + g.transpose()) * 0.5;
    if !linalg::is_positive_definite(&next.learner.gamma, 1e-12) {
        return Err(Error::GainMatrixDegenerate(format!(
            "lambda_min(gamma) <= 1e-12 at t = {}",
            t + dt
        )));
    }
    Ok(next)
}

/// Integrates the full horizon. Records the initial point and every
/// `log_stride`-th step (always including the last).
pub fn run_episode(config: &SimConfig, problem: &Problem<'_>) -> Result<TrajectoryLog> {
    config.validate(problem)?;
    let steps = (config.horizon / config.dt).round().max(1.0) as usize;
    let mut state = JointState {
        x: config.x0.clone(),
        xd: problem.traj.initial_xd().clone(),
        learner: config.learner0.clone(),
    };
    let mut log = TrajectoryLog::new(config, problem);
    log.push(&state, problem, config, 0.0)?;
    for k in 0..steps {
        let t = k as f64 * config.dt;
        state = step(
            &state,
            problem,
            &config.probe,
            config.bellman_mode,
            t,
            config.dt,
        )?;
        let t_next = (k + 1) as f64 * config.dt;
        if (k + 1) % config.log_stride == 0 || k + 1 == steps {
            log.push(&state, problem, config, t_next)?;
        }
    }
    log.steps = steps;
    log.finalize(config);
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lq_oracle::{ideal_weights, solve_care};
    use crate::system_model::make_linear_benchmark;
    use crate::value_approximator::quadratic_basis;
    use std::sync::Arc;

    fn s1(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn zero_dynamics_fixed_point_and_gamma_growth() {
        let model = SystemModel::new(
            "zero",
            1,
            1,
            Arc::new(|_x: &DVector<f64>| DVector::zeros(1)),
            Arc::new(|_x: &DVector<f64>| DMatrix::identity(1, 1)),
        );
        let traj = DesiredTrajectoryModel::new(
            Arc::new(|_x: &DVector<f64>| DVector::zeros(1)),
            0.0,
            DVector::zeros(1),
        );
        let basis = quadratic_basis(1, false);
        let weights = CostWeights::new(s1(1.0), s1(1.0)).unwrap();
        let gains = AdaptationGains::new(2.0, 1.0, 0.1, 1.0, 0.25).unwrap();
        let problem = Problem {
            model: &model,
            traj: &traj,
            basis: &basis,
            weights: &weights,
            gains: &gains,
        };
        let state = JointState {
            x: DVector::zeros(1),
            xd: DVector::zeros(1),
            learner: LearnerState::new(DVector::zeros(1), DVector::zeros(1), s1(3.0)).unwrap(),
        };
        let mut s = state.clone();
        let dt = 0.01;
        for k in 0..100 {
            s = step(
                &s,
                &problem,
                &ProbingSignal::off(),
                BellmanMode::Policy,
                k as f64 * dt,
                dt,
            )
            .unwrap();
        }
        assert_eq!(s.x, state.x);
        assert_eq!(s.xd, state.xd);
        let exact = 3.0 * (gains.eta_c * gains.lambda * 1.0).exp();
        assert!((s.learner.gamma[(0, 0)] - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn horizon_of_one_step() {
        let (model, traj) =
            make_linear_benchmark(&s1(-1.0), &s1(1.0), &s1(0.0), &DVector::zeros(1)).unwrap();
        let basis = quadratic_basis(1, false);
        let weights = CostWeights::new(s1(1.0), s1(1.0)).unwrap();
        let gains = AdaptationGains::new(2.0, 1.0, 0.1, 1.0, 0.25).unwrap();
        let problem = Problem {
            model: &model,
            traj: &traj,
            basis: &basis,
            weights: &weights,
            gains: &gains,
        };
        let cfg = SimConfig::new(
            1e-3,
            1e-3,
            ProbingSignal::off(),
            DVector::from_element(1, 1.0),
            LearnerState::uniform(1, 1.0, 1.0, 10.0).unwrap(),
        );
        let log = run_episode(&cfg, &problem).unwrap();
        assert_eq!(log.steps, 1);
        assert_eq!(log.records.len(), 2);
        assert_eq!(log.records[1].t, 1e-3);
    }

    #[test]
    fn oracle_weights_are_an_equilibrium_of_the_learner() {
        let (model, traj) =
            make_linear_benchmark(&s1(-1.0), &s1(1.0), &s1(0.0), &DVector::zeros(1)).unwrap();
        let basis = quadratic_basis(1, false);
        let weights = CostWeights::new(s1(1.0), s1(1.0)).unwrap();
        let p = solve_care(&s1(-1.0), &s1(1.0), &s1(1.0), &s1(1.0))
            .unwrap()
            .p;
        let w = ideal_weights(&p, &basis).unwrap().w;
        // with η_a2 the actor settles at η_a1/η_a12 W; keep it tiny
        let gains = AdaptationGains::new(2.0, 1.0, 1e-12, 1.0, 0.25).unwrap();
        let problem = Problem {
            model: &model,
            traj: &traj,
            basis: &basis,
            weights: &weights,
            gains: &gains,
        };
        let mut cfg = SimConfig::new(
            1e-3,
            2.0,
            ProbingSignal::default_for(1, 0.5, 2.0),
            DVector::from_element(1, 1.0),
            LearnerState::new(w.clone(), w.clone(), s1(5.0)).unwrap(),
        );
        cfg.log_stride = 100;
        let log = run_episode(&cfg, &problem).unwrap();
        let last = log.records.last().unwrap();
        assert!((&last.w_c - &w).amax() < 1e-9);
        assert!(log.records.iter().all(|r| r.delta.abs() < 1e-9));
    }
}
