//! Learning laws: Bellman error, normalized least-squares critic with forgetting,
//! gain-matrix dynamics, consensus actor, and probing signals.

use std::f64::consts::{E, PI, TAU};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::system_model::{DesiredTrajectoryModel, SystemModel};
use crate::tracking_transform::{
    concatenated_drift, concatenated_input, local_cost, ConcatenatedState, CostWeights,
};
use crate::value_approximator::BasisSet;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerState {
    pub w_c: DVector<f64>,
    pub w_a: DVector<f64>,
    pub gamma: DMatrix<f64>,
}

impl LearnerState {
    pub fn new(w_c: DVector<f64>, w_a: DVector<f64>, gamma: DMatrix<f64>) -> Result<Self> {
        let n = w_c.len();
        if w_a.len() != n || gamma.nrows() != n || gamma.ncols() != n {
            return Err(Error::Dimension(format!(
                "learner state: w_c {}, w_a {}, gamma {}x{}",
                n,
                w_a.len(),
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        let s = Self { w_c, w_a, gamma };
        s.validate()?;
        Ok(s)
    }

    /// Uniform initial weights with `Γ = gamma0 I`.
    pub fn uniform(n_basis: usize, w_c0: f64, w_a0: f64, gamma0: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(n_basis, w_c0),
            DVector::from_element(n_basis, w_a0),
            DMatrix::identity(n_basis, n_basis) * gamma0,
        )
    }

    pub fn len(&self) -> usize {
        self.w_c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w_c.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !linalg::all_finite(self.w_c.as_slice())
            || !linalg::all_finite(self.w_a.as_slice())
            || !linalg::all_finite(self.gamma.as_slice())
        {
            return Err(Error::InvalidWeights(
                "learner state has non-finite entries".into(),
            ));
        }
        if linalg::asymmetry(&self.gamma) > 1e-9 {
            return Err(Error::GainMatrixDegenerate("gamma is not symmetric".into()));
        }
        if !linalg::is_positive_definite(&self.gamma, 0.0) {
            return Err(Error::GainMatrixDegenerate(
                "gamma is not positive definite".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationGains {
    pub eta_c: f64,
    pub eta_a1: f64,
    pub eta_a2: f64,
    pub nu: f64,
    pub lambda: f64,
}

impl AdaptationGains {
    pub fn new(eta_c: f64, eta_a1: f64, eta_a2: f64, nu: f64, lambda: f64) -> Result<Self> {
        let g = Self {
            eta_c,
            eta_a1,
            eta_a2,
            nu,
            lambda,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta_c", self.eta_c),
            ("eta_a1", self.eta_a1),
            ("eta_a2", self.eta_a2),
            ("nu", self.nu),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidGains(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidGains(format!(
                "lambda must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// `η_a1 + η_a2`.
    pub fn eta_a12(&self) -> f64 {
        self.eta_a1 + self.eta_a2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeComponent {
    pub amplitude: f64,
    /// Hz.
    pub frequency: f64,
    /// rad.
    pub phase: f64,
    pub channel: usize,
}

/// Sum of sinusoids added to the applied control, ramped in by `tanh(t / ramp_time)`
/// and switched off at `cutoff_time`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbingSignal {
    pub components: Vec<ProbeComponent>,
    pub ramp_time: f64,
    pub cutoff_time: f64,
}

impl ProbingSignal {
    pub fn off() -> Self {
        Self {
            components: Vec::new(),
            ramp_time: 0.5,
            cutoff_time: 0.0,
        }
    }

    /// Six incommensurate sinusoids per channel (√2, √3, √5, e, π, √7 rad/s,
    /// stretched by a channel-dependent factor).
    pub fn default_for(m: usize, amplitude: f64, cutoff_time: f64) -> Self {
        let base = [2f64.sqrt(), 3f64.sqrt(), 5f64.sqrt(), E, PI, 7f64.sqrt()];
        let mut components = Vec::with_capacity(6 * m);
        for ch in 0..m {
            let stretch = 1.0 + 0.37 * ch as f64;
            for (k, w) in base.iter().enumerate() {
                components.push(ProbeComponent {
                    amplitude,
                    frequency: w * stretch / TAU,
                    phase: 0.5 * (k + ch) as f64,
                    channel: ch,
                });
            }
        }
        Self {
            components,
            ramp_time: 0.5,
            cutoff_time,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.cutoff_time >= 0.0) || !(self.ramp_time >= 0.0) {
            return Err(Error::Config("probe times must be nonnegative".into()));
        }
        for c in &self.components {
            if !c.amplitude.is_finite() || !c.frequency.is_finite() || !c.phase.is_finite() {
                return Err(Error::Config("probe component is not finite".into()));
            }
            if c.channel >= m {
                return Err(Error::Config(format!(
                    "probe channel {} exceeds input dimension {m}",
                    c.channel
                )));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        for c in &mut s.components {
            c.amplitude *= factor;
        }
        s
    }
}

/// Probing signal used with the two-link arm: products of sinusoids expanded into
/// single tones, channel 0 scaled by 2.55 and channel 1 by 0.01.
pub fn manipulator_probe(cutoff_time: f64) -> ProbingSignal {
    let hz = |w: f64| w / TAU;
    let sin = |amplitude: f64, w: f64, channel: usize| ProbeComponent {
        amplitude,
        frequency: hz(w),
        phase: 0.0,
        channel,
    };
    let cos = |amplitude: f64, w: f64, channel: usize| ProbeComponent {
        phase: PI / 2.0,
        ..sin(amplitude, w, channel)
    };
    let (a0, a1) = (2.55, 0.01);
    let s232 = 232f64.sqrt() * PI;
    let s20 = 20f64.sqrt() * PI;
    let s132 = 132f64.sqrt() * PI;
    let s10 = 10f64.sqrt() * PI;
    let components = vec![
        // 20 sin(a) cos(b) = 10 sin(a+b) + 10 sin(a-b)
        sin(a0 * 10.0, s232 + s20, 0),
        sin(a0 * 10.0, s232 - s20, 0),
        sin(a0 * 6.0, 18.0 * E * E, 0),
        // 20 cos(40t) cos(21t) = 10 cos(19t) + 10 cos(61t)
        cos(a0 * 10.0, 19.0, 0),
        cos(a0 * 10.0, 61.0, 0),
        sin(a1 * 10.0, s132 + s10, 1),
        sin(a1 * 10.0, s132 - s10, 1),
        sin(a1 * 6.0, 8.0 * E, 1),
        cos(a1 * 10.0, 1.0, 1),
        cos(a1 * 10.0, 21.0, 1),
    ];
    ProbingSignal {
        components,
        ramp_time: 0.5,
        cutoff_time,
    }
}

/// Probe value at time `t`; zero at `t = 0` and for `t >= cutoff_time`.
pub fn probe(signal: &ProbingSignal, m: usize, t: f64) -> DVector<f64> {
    let mut out = DVector::zeros(m);
    if t >= signal.cutoff_time {
        return out;
    }
    let ramp = if signal.ramp_time > 0.0 {
        (t / signal.ramp_time).tanh()
    } else {
        1.0
    };
    for c in &signal.components {
        out[c.channel] += c.amplitude * (TAU * c.frequency * t + c.phase).sin();
    }
    out * ramp
}

/// `ω = σ'(zeta) (F(zeta) + G(zeta) μ)`.
pub fn regressor(
    basis: &BasisSet,
    zeta: &ConcatenatedState,
    mu: &DVector<f64>,
    model: &SystemModel,
    traj: &DesiredTrajectoryModel,
) -> Result<DVector<f64>> {
    let f = concatenated_drift(zeta, model, traj)?;
    let g = concatenated_input(zeta, model);
    Ok(basis.jacobian(&zeta.flatten()) * (f + g * mu))
}

/// `1 + ν ωᵀΓω`.
pub fn normalization(omega: &DVector<f64>, gamma: &DMatrix<f64>, nu: f64) -> f64 {
    1.0 + nu * omega.dot(&(gamma * omega))
}

/// `ψ = ω / sqrt(1 + ν ωᵀΓω)`.
pub fn normalized_regressor(
    omega: &DVector<f64>,
    gamma: &DMatrix<f64>,
    nu: f64,
) -> Result<DVector<f64>> {
    if !linalg::is_positive_definite(gamma, 0.0) {
        return Err(Error::GainMatrixDegenerate(
            "normalization requires a positive definite gain matrix".into(),
        ));
    }
    Ok(omega / normalization(omega, gamma, nu).sqrt())
}

/// Pointwise regressor bound `1 / sqrt(ν λ_min(Γ))`.
pub fn regressor_bound(nu: f64, gamma_min: f64) -> f64 {
    1.0 / (nu * gamma_min).sqrt()
}

/// Measurable Bellman error `δ = Ŵ_cᵀω + r(zeta, μ)`.
pub fn bellman_error(
    w_c: &DVector<f64>,
    omega: &DVector<f64>,
    zeta: &ConcatenatedState,
    mu: &DVector<f64>,
    weights: &CostWeights,
) -> f64 {
    w_c.dot(omega) + local_cost(zeta, mu, weights)
}

/// `Ẇ_c = -η_c Γ ω δ / (1 + ν ωᵀΓω)`.
pub fn critic_derivative(
    gamma: &DMatrix<f64>,
    omega: &DVector<f64>,
    delta: f64,
    gains: &AdaptationGains,
) -> DVector<f64> {
    let rho = normalization(omega, gamma, gains.nu);
    (gamma * omega) * (-gains.eta_c * delta / rho)
}

/// `Γ̇ = η_c λ Γ - η_c Γωωᵀ Γ / (1 + ν ωᵀΓω)`.
pub fn gain_matrix_derivative(
    gamma: &DMatrix<f64>,
    omega: &DVector<f64>,
    gains: &AdaptationGains,
) -> DMatrix<f64> {
    let g_omega = gamma * omega;
    let rho = 1.0 + gains.nu * omega.dot(&g_omega);
    gamma * (gains.eta_c * gains.lambda) - (&g_omega * g_omega.transpose()) * (gains.eta_c / rho)
}

/// `Ẇ_a = -η_a1 (Ŵ_a - Ŵ_c) - η_a2 Ŵ_a`.
pub fn actor_derivative(
    w_a: &DVector<f64>,
    w_c: &DVector<f64>,
    gains: &AdaptationGains,
) -> DVector<f64> {
    (w_a - w_c) * -gains.eta_a1 - w_a * gains.eta_a2
}

/// `𝒢_σ = σ' G R⁻¹ Gᵀ σ'ᵀ`.
pub fn g_sigma(
    sigma_jac: &DMatrix<f64>,
    g_big: &DMatrix<f64>,
    weights: &CostWeights,
) -> DMatrix<f64> {
    let sg = sigma_jac * g_big;
    &sg * weights.r_inv() * sg.transpose()
}

/// Oracle diagnostics, valid only when the ideal weights are known and the basis
/// represents the value function exactly.
pub mod oracle {
    use super::*;

    /// `δ = -W̃_cᵀω + ¼ W̃_aᵀ 𝒢_σ W̃_a` with `W̃ = W - Ŵ`.
    pub fn unmeasurable_bellman_error(
        w_tilde_c: &DVector<f64>,
        w_tilde_a: &DVector<f64>,
        omega: &DVector<f64>,
        g_sigma: &DMatrix<f64>,
    ) -> f64 {
        -w_tilde_c.dot(omega) + 0.25 * w_tilde_a.dot(&(g_sigma * w_tilde_a))
    }

    /// Critic estimation-error dynamics
    /// `W̃_c' = -η_c Γψψᵀ W̃_c + η_c Γω/(1+νωᵀΓω) · ¼ W̃_aᵀ 𝒢_σ W̃_a`.
    pub fn critic_error_derivative(
        w_tilde_c: &DVector<f64>,
        w_tilde_a: &DVector<f64>,
        omega: &DVector<f64>,
        gamma: &DMatrix<f64>,
        g_sigma: &DMatrix<f64>,
        gains: &AdaptationGains,
    ) -> DVector<f64> {
        let rho = normalization(omega, gamma, gains.nu);
        let psi = omega / rho.sqrt();
        let quad = 0.25 * w_tilde_a.dot(&(g_sigma * w_tilde_a));
        (gamma * &psi) * (-gains.eta_c * psi.dot(w_tilde_c))
            + (gamma * omega) * (gains.eta_c * quad / rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system_model::make_linear_benchmark;
    use crate::value_approximator::{policy, quadratic_basis};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn s1(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    fn gains(eta_c: f64, nu: f64, lambda: f64) -> AdaptationGains {
        AdaptationGains::new(eta_c, 5.0, 0.001, nu, lambda).unwrap()
    }

    fn scalar() -> (SystemModel, DesiredTrajectoryModel, CostWeights) {
        let (m, t) =
            make_linear_benchmark(&s1(-1.0), &s1(1.0), &s1(0.0), &DVector::zeros(1)).unwrap();
        (m, t, CostWeights::new(s1(1.0), s1(1.0)).unwrap())
    }

    #[test]
    fn regressor_examples() {
        let (model, traj, _) = scalar();
        let basis = BasisSet::new(vec![vec![2, 0]], 1.0).unwrap();
        let zero = ConcatenatedState::zeros(1);
        assert_eq!(
            regressor(&basis, &zero, &v(&[0.0]), &model, &traj).unwrap(),
            v(&[0.0])
        );
        let z = ConcatenatedState::new(v(&[1.0]), v(&[0.0])).unwrap();
        let w = regressor(&basis, &z, &v(&[0.0]), &model, &traj).unwrap();
        assert_abs_diff_eq!(w[0], -2.0, epsilon = 1e-15);
    }

    #[test]
    fn regressor_affine_in_mu() {
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let (model, traj) =
            make_linear_benchmark(&a, &DMatrix::identity(2, 2), &s, &v(&[1.0, 0.0])).unwrap();
        let basis = quadratic_basis(2, true);
        let z = ConcatenatedState::new(v(&[0.3, -0.2]), v(&[0.5, 0.1])).unwrap();
        let mu = v(&[0.7, -1.1]);
        let diff = regressor(&basis, &z, &mu, &model, &traj).unwrap()
            - regressor(&basis, &z, &DVector::zeros(2), &model, &traj).unwrap();
        let expected = basis.jacobian(&z.flatten()) * concatenated_input(&z, &model) * &mu;
        assert!((diff - expected).amax() < 1e-14);
    }

    #[test]
    fn normalized_regressor_examples() {
        let gamma = s1(4.0);
        assert_eq!(
            normalized_regressor(&v(&[0.0]), &gamma, 0.25).unwrap(),
            v(&[0.0])
        );
        let psi = normalized_regressor(&v(&[10.0]), &gamma, 0.25).unwrap();
        // 1 + ν Γ ω² = 101
        assert_abs_diff_eq!(psi[0], 10.0 / 101f64.sqrt(), epsilon = 1e-15);
        assert!(psi[0] <= regressor_bound(0.25, 4.0));
        let neg = normalized_regressor(&v(&[-10.0]), &gamma, 0.25).unwrap();
        assert_eq!(neg[0], -psi[0]);
        assert!(matches!(
            normalized_regressor(&v(&[1.0]), &s1(-1.0), 0.25),
            Err(Error::GainMatrixDegenerate(_))
        ));
    }

    #[test]
    fn bellman_error_examples() {
        let (model, traj, w) = scalar();
        let basis = quadratic_basis(1, false);
        let z = ConcatenatedState::new(v(&[1.0]), v(&[0.0])).unwrap();
        let mu = v(&[0.3]);
        let omega = regressor(&basis, &z, &mu, &model, &traj).unwrap();
        let r = local_cost(&z, &mu, &w);
        assert_eq!(bellman_error(&v(&[0.0]), &omega, &z, &mu, &w), r);

        let wstar = v(&[2.0 * (2f64.sqrt() - 1.0)]);
        let mu_star = policy(&wstar, &basis, &z, &model, &w);
        assert_abs_diff_eq!(mu_star[0], -0.41421356, epsilon = 1e-8);
        let omega = regressor(&basis, &z, &mu_star, &model, &traj).unwrap();
        assert!(bellman_error(&wstar, &omega, &z, &mu_star, &w).abs() < 1e-9);

        let (w1, w2) = (v(&[0.4]), v(&[-1.3]));
        let lhs = bellman_error(&(&w1 + &w2), &omega, &z, &mu, &w);
        let rhs = bellman_error(&w1, &omega, &z, &mu, &w) + bellman_error(&w2, &omega, &z, &mu, &w)
            - local_cost(&z, &mu, &w);
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn critic_derivative_examples() {
        let g = gains(1.0, 1.0, 0.5);
        assert_eq!(critic_derivative(&s1(1.0), &v(&[1.0]), 0.0, &g), v(&[0.0]));
        assert_eq!(critic_derivative(&s1(1.0), &v(&[0.0]), 3.0, &g), v(&[0.0]));
        assert_abs_diff_eq!(
            critic_derivative(&s1(1.0), &v(&[1.0]), 1.0, &g)[0],
            -0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn gain_matrix_derivative_examples() {
        let g = gains(1.0, 1.0, 0.5);
        let gm = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        assert_abs_diff_eq!(
            gain_matrix_derivative(&gm, &v(&[0.0, 0.0]), &g),
            &gm * 0.5,
            epsilon = 1e-15
        );
        let d = gain_matrix_derivative(&s1(2.0), &v(&[1.0]), &g);
        assert_abs_diff_eq!(d[(0, 0)], 1.0 - 4.0 / 3.0, epsilon = 1e-15);
        let d = gain_matrix_derivative(&gm, &v(&[0.4, -2.0]), &g);
        assert!(linalg::asymmetry(&d) < 1e-15);
    }

    #[test]
    fn actor_derivative_examples() {
        let g = AdaptationGains::new(1.0, 5.0, 0.001, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(
            actor_derivative(&v(&[6.0]), &v(&[10.0]), &g)[0],
            19.994,
            epsilon = 1e-12
        );
        assert_eq!(actor_derivative(&v(&[0.0]), &v(&[0.0]), &g), v(&[0.0]));
        let g0 = AdaptationGains { eta_a2: 0.0, ..g };
        assert_eq!(
            actor_derivative(&v(&[2.5, -1.0]), &v(&[2.5, -1.0]), &g0),
            v(&[0.0, 0.0])
        );
    }

    #[test]
    fn gains_validation() {
        assert!(AdaptationGains::new(1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(AdaptationGains::new(1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(AdaptationGains::new(0.0, 1.0, 1.0, 1.0, 0.5).is_err());
        assert!(AdaptationGains::new(1.0, 1.0, 1.0, -1.0, 0.5).is_err());
    }

    #[test]
    fn probe_examples() {
        let single = ProbingSignal {
            components: vec![ProbeComponent {
                amplitude: 1.0,
                frequency: 1.0,
                phase: 0.0,
                channel: 0,
            }],
            ramp_time: 0.5,
            cutoff_time: 30.0,
        };
        assert_abs_diff_eq!(probe(&single, 1, 0.25)[0], 0.5f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(probe(&single, 1, 0.25)[0], 0.46212, epsilon = 1e-5);
        assert_eq!(probe(&single, 1, 0.0)[0], 0.0);
        assert_eq!(probe(&single, 1, 30.0)[0], 0.0);
        assert_eq!(probe(&single, 1, 45.0)[0], 0.0);
        let d = ProbingSignal::default_for(2, 1.0, 30.0);
        assert_eq!(d.components.len(), 12);
        assert!(d.validate(2).is_ok());
        assert!(d.validate(1).is_err());
        assert!(manipulator_probe(30.0).validate(2).is_ok());
    }

    #[test]
    fn critic_step_reduces_squared_bellman_error() {
        // d/dt δ² through Ẇ_c alone is -2 η_c δ² ωᵀΓω / ρ
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = gains(2.0, 0.5, 0.1);
        for _ in 0..200 {
            let n = 4;
            let omega = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
            let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let gamma = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
            let delta: f64 = rng.random_range(-5.0..5.0);
            let wdot = critic_derivative(&gamma, &omega, delta, &g);
            let rate = 2.0 * delta * omega.dot(&wdot);
            let expected = -2.0 * g.eta_c * delta * delta * omega.dot(&(&gamma * &omega))
                / normalization(&omega, &gamma, g.nu);
            assert!(rate <= 1e-12);
            assert!((rate - expected).abs() < 1e-9 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn actor_contracts_to_scaled_critic() {
        let g = AdaptationGains::new(1.0, 5.0, 0.5, 1.0, 0.5).unwrap();
        let w_c = v(&[1.0, -2.0]);
        let target = &w_c * (g.eta_a1 / g.eta_a12());
        let mut w_a = v(&[10.0, 3.0]);
        let dt = 1e-3;
        let mut prev = (&w_a - &target).norm();
        for _ in 0..5000 {
            w_a += actor_derivative(&w_a, &w_c, &g) * dt;
            let d = (&w_a - &target).norm();
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn oracle_bellman_decomposition_matches_measurable_form() {
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let (model, traj) =
            make_linear_benchmark(&a, &DMatrix::identity(2, 2), &s, &v(&[1.0, 0.0])).unwrap();
        let w = CostWeights::new(DMatrix::identity(2, 2), DMatrix::identity(2, 2)).unwrap();
        let basis = quadratic_basis(2, true);
        let sol = crate::lq_oracle::solve_care(&a, &DMatrix::identity(2, 2), w.q(), w.r()).unwrap();
        let wstar = crate::lq_oracle::ideal_weights(&sol.p, &basis).unwrap().w;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let z = ConcatenatedState::from_flat(&DVector::from_fn(4, |_, _| {
                rng.random_range(-1.5..1.5)
            }))
            .unwrap();
            let w_c = &wstar + DVector::from_fn(10, |_, _| rng.random_range(-0.5..0.5));
            let w_a = &wstar + DVector::from_fn(10, |_, _| rng.random_range(-0.5..0.5));
            let mu = policy(&w_a, &basis, &z, &model, &w);
            let omega = regressor(&basis, &z, &mu, &model, &traj).unwrap();
            let measured = bellman_error(&w_c, &omega, &z, &mu, &w);
            let gs = g_sigma(
                &basis.jacobian(&z.flatten()),
                &concatenated_input(&z, &model),
                &w,
            );
            let unmeasured =
                oracle::unmeasurable_bellman_error(&(&wstar - &w_c), &(&wstar - &w_a), &omega, &gs);
            assert!((measured - unmeasured).abs() < 1e-10 * (1.0 + measured.abs()));

            let gamma = DMatrix::from_diagonal_element(10, 10, 3.0);
            let g = gains(1.5, 0.2, 0.1);
            let err_dot = oracle::critic_error_derivative(
                &(&wstar - &w_c),
                &(&wstar - &w_a),
                &omega,
                &gamma,
                &gs,
                &g,
            );
            let wc_dot = critic_derivative(&gamma, &omega, measured, &g);
            assert!((err_dot + wc_dot).amax() < 1e-9);
        }
    }
}
