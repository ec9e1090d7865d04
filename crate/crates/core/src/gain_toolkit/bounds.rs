use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::ball_samples;
use crate::linalg;
use crate::lq_oracle::ideal_weights;
use crate::system_model::{steady_state_control, DesiredTrajectoryModel, SystemModel};
use crate::tracking_transform::{
    concatenated_drift, concatenated_input, ConcatenatedState, CostWeights,
};
use crate::value_approximator::BasisSet;
use crate::{Error, Result};

/// Ball on which suprema are sampled. The same radius bounds `‖Z‖` in the
/// analysis and `‖ζ‖` in the sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompactSetSpec {
    pub radius: f64,
    pub sample_count: usize,
    pub beta1: f64,
    pub beta2: f64,
    /// Multiplier applied to every sampled supremum.
    pub safety_factor: f64,
    pub seed: u64,
}

impl Default for CompactSetSpec {
    fn default() -> Self {
        Self {
            radius: 1.0,
            sample_count: 100_000,
            beta1: 1.5,
            beta2: 1.5,
            safety_factor: 1.1,
            seed: 0,
        }
    }
}

impl CompactSetSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!(
                "compact set radius must be positive, got {}",
                self.radius
            )));
        }
        if self.sample_count == 0 {
            return Err(Error::Config("compact set has no samples".into()));
        }
        if !(self.beta1 > 1.0 && self.beta2 > 1.0) {
            return Err(Error::Config(
                "expansion factors beta1, beta2 must exceed 1".into(),
            ));
        }
        if !(self.safety_factor >= 1.0) {
            return Err(Error::Config("safety factor must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        Self {
            radius,
            ..self.clone()
        }
    }
}

/// What is known about the ideal weights. With `oracle_p` set the basis is taken
/// as exact (`ε ≡ 0`) and `W` comes from the Riccati solution; otherwise the
/// approximation errors and `W̄` must be supplied.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ApproximationSpec {
    pub oracle_p: Option<DMatrix<f64>>,
    pub eps_bar: f64,
    pub eps_prime_bar: f64,
    pub w_bar: Option<f64>,
}

/// Γ spectrum bounds and the excitation level over windows of length `t_window`.
/// Not derivable from the model; measured from a pilot run or chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationSpec {
    pub phi_lo: f64,
    pub phi_hi: f64,
    pub psi_lo: f64,
    pub t_window: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundEstimates {
    pub l_f: f64,
    pub eps_bar: f64,
    pub eps_prime_bar: f64,
    pub w_bar: f64,
    pub d: f64,
    pub iota1: f64,
    pub iota2: f64,
    pub iota3: f64,
    pub iota4: f64,
    pub iota5: f64,
    pub phi_lo: f64,
    pub phi_hi: f64,
    pub psi_lo: f64,
    pub t_window: f64,
    pub n: usize,
    pub n_basis: usize,
    /// `sup ‖g R⁻¹ Gᵀ σ'ᵀ‖`.
    pub kappa_a: f64,
    /// `sup ‖g g_d⁺ (h_d - f_d) - ½ g R⁻¹ Gᵀ σ'ᵀ W - h_d‖`.
    pub kappa_e: f64,
    /// Quadratic lower envelope coefficient of the value function in `e`.
    pub q_proxy: f64,
    /// Quadratic upper envelope coefficient of the value function.
    pub value_env: f64,
}

impl BoundEstimates {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("l_f", self.l_f),
            ("eps_bar", self.eps_bar),
            ("eps_prime_bar", self.eps_prime_bar),
            ("w_bar", self.w_bar),
            ("d", self.d),
            ("iota1", self.iota1),
            ("iota2", self.iota2),
            ("iota3", self.iota3),
            ("iota4", self.iota4),
            ("iota5", self.iota5),
            ("phi_lo", self.phi_lo),
            ("phi_hi", self.phi_hi),
            ("psi_lo", self.psi_lo),
            ("t_window", self.t_window),
            ("kappa_a", self.kappa_a),
            ("kappa_e", self.kappa_e),
            ("q_proxy", self.q_proxy),
            ("value_env", self.value_env),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "bound {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("phi_lo", self.phi_lo),
            ("t_window", self.t_window),
            ("q_proxy", self.q_proxy),
            ("value_env", self.value_env),
        ] {
            if v <= 0.0 {
                return Err(Error::Config(format!("bound {name} must be positive")));
            }
        }
        if self.phi_lo > self.phi_hi {
            return Err(Error::Config("phi_lo exceeds phi_hi".into()));
        }
        if self.n == 0 || self.n_basis == 0 {
            return Err(Error::Config(
                "state and basis dimensions must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Default)]
struct Sups {
    l_f: f64,
    g_sigma: f64,
    g_big: f64,
    w_sigma_prime: f64,
    half_w_g_sigma: f64,
    g_sigma_prime: f64,
    kappa_a: f64,
    kappa_e_exact: f64,
    kappa_e_free: f64,
    xd: f64,
    sigma: f64,
}

impl Sups {
    fn max(self, o: Self) -> Self {
        Self {
            l_f: self.l_f.max(o.l_f),
            g_sigma: self.g_sigma.max(o.g_sigma),
            g_big: self.g_big.max(o.g_big),
            w_sigma_prime: self.w_sigma_prime.max(o.w_sigma_prime),
            half_w_g_sigma: self.half_w_g_sigma.max(o.half_w_g_sigma),
            g_sigma_prime: self.g_sigma_prime.max(o.g_sigma_prime),
            kappa_a: self.kappa_a.max(o.kappa_a),
            kappa_e_exact: self.kappa_e_exact.max(o.kappa_e_exact),
            kappa_e_free: self.kappa_e_free.max(o.kappa_e_free),
            xd: self.xd.max(o.xd),
            sigma: self.sigma.max(o.sigma),
        }
    }
}

fn sqrt_lambda_max(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    linalg::sym_eigenvalues(m)
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(0.0)
        .sqrt()
}

/// Spectral norm of the central-difference Jacobian of `f` at `x`.
fn jacobian_norm(
    f: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>>,
    x: &DVector<f64>,
) -> Result<f64> {
    let h = 1e-6 * (1.0 + x.amax());
    let mut cols = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[k] += h;
        xm[k] -= h;
        cols.push((f(&xp)? - f(&xm)?) / (2.0 * h));
    }
    Ok(linalg::spectral_norm(&DMatrix::from_columns(&cols)))
}

/// Sampled suprema of the quantities entering the stability constants.
///
/// `L_F` is the largest of the ratio `‖F(ζ)‖/‖ζ‖` and the Jacobian norms of `F`
/// and `f`, so it serves both as a linear-growth bound and as a Lipschitz
/// constant on the (convex) ball. With an oracle the ε'-terms vanish
/// and `W` is exact; otherwise every term carrying `ε'` or `W` is bounded by the
/// triangle inequality with `ε̄'` and `W̄`.
pub fn estimate_bounds(
    model: &SystemModel,
    traj: &DesiredTrajectoryModel,
    basis: &BasisSet,
    weights: &CostWeights,
    set: &CompactSetSpec,
    approx: &ApproximationSpec,
    excitation: &ExcitationSpec,
) -> Result<BoundEstimates> {
    set.validate()?;
    let n = model.state_dim();
    if basis.input_dim() != 2 * n {
        return Err(Error::BasisMismatch(format!(
            "basis acts on dimension {}, concatenated state has {}",
            basis.input_dim(),
            2 * n
        )));
    }
    let w_exact = match &approx.oracle_p {
        Some(p) => Some(ideal_weights(p, basis)?.w),
        None => None,
    };
    let w_bar = match (&w_exact, approx.w_bar) {
        (Some(w), _) => w.norm(),
        (None, Some(b)) => b,
        (None, None) => {
            return Err(Error::Config(
                "without an oracle an ideal-weight bound w_bar is required".into(),
            ))
        }
    };
    let (eps_bar, eps_prime_bar) = if w_exact.is_some() {
        (0.0, 0.0)
    } else {
        (approx.eps_bar, approx.eps_prime_bar)
    };

    let samples = ball_samples(2 * n, set.radius, set.sample_count, set.seed);
    if samples.is_empty() {
        return Err(Error::Config("empty sample set".into()));
    }
    // Cholesky factor of R⁻¹ so that G R⁻¹ Gᵀ = (G L)(G L)ᵀ.
    let l = weights
        .r_inv()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Config("R⁻¹ is not positive definite".into()))?
        .l();

    let eval = |zeta: &DVector<f64>| -> Result<Sups> {
        let z = ConcatenatedState::from_flat(zeta)?;
        let f_big = concatenated_drift(&z, model, traj)?;
        let g_big = concatenated_input(&z, model);
        let jac = basis.jacobian(zeta);
        let gl = &g_big * &l;
        let a = &jac * &gl;
        let mut s = Sups {
            g_sigma: sqrt_lambda_max(&a.tr_mul(&a)).powi(2),
            g_big: sqrt_lambda_max(&gl.tr_mul(&gl)).powi(2),
            xd: z.xd.norm(),
            sigma: basis.eval(zeta).norm(),
            ..Sups::default()
        };
        let zn = zeta.norm();
        if zn > 0.0 {
            s.l_f = f_big.norm() / zn;
        }
        let x = z.plant_state();
        s.l_f = s.l_f.max(jacobian_norm(&|v| Ok(model.drift(v)), &x)?);
        s.l_f = s.l_f.max(jacobian_norm(
            &|v| concatenated_drift(&ConcatenatedState::from_flat(v)?, model, traj),
            zeta,
        )?);
        let g = model.input_matrix(&x);
        // g R⁻¹ Gᵀ σ'ᵀ = (g L)(σ' G L)ᵀ
        let m_a = (&g * &l) * a.transpose();
        s.kappa_a = sqrt_lambda_max(&(&m_a * m_a.transpose()));
        let ud = steady_state_control(model, traj, &z.xd)?;
        let hd = traj.generator(&z.xd);
        let base = &g * &ud - &hd;
        s.kappa_e_free = base.norm() + 0.5 * s.kappa_a * w_bar;
        s.g_sigma_prime = s.g_big.sqrt() * s.g_sigma.sqrt();
        match &w_exact {
            Some(w) => {
                s.w_sigma_prime = jac.tr_mul(w).norm();
                let atw = a.tr_mul(w);
                s.half_w_g_sigma = 0.5 * (&a * &atw).norm();
                s.kappa_e_exact = (base - &m_a * w * 0.5).norm();
            }
            None => {
                s.w_sigma_prime = w_bar * linalg::spectral_norm(&jac);
                s.half_w_g_sigma = 0.5 * w_bar * s.g_sigma;
            }
        }
        Ok(s)
    };

    let sups = samples
        .par_iter()
        .map(eval)
        .try_reduce(Sups::default, |a, b| Ok(a.max(b)))?;

    let k = set.safety_factor;
    let ep = eps_prime_bar;
    let g_norm = sups.g_big;
    let (iota1, iota3, iota4, iota5, kappa_e) = match w_exact {
        Some(_) => (0.0, 0.0, sups.half_w_g_sigma, 0.0, sups.kappa_e_exact),
        None => (
            (ep / 4.0 + 0.5 * sups.w_sigma_prime) * g_norm * ep,
            ep * ep * g_norm,
            sups.half_w_g_sigma + 0.5 * ep * sups.g_sigma_prime,
            0.25 * ep * ep * g_norm + 0.5 * sups.w_sigma_prime * g_norm * ep,
            sups.kappa_e_free,
        ),
    };
    let l_f = k * sups.l_f;
    // ε̄' L_F ‖x_d‖ term of ι₁ uses the inflated Lipschitz estimate
    let iota1 = k * iota1 + ep * l_f * sups.xd;

    let (q_proxy, value_env) = match &approx.oracle_p {
        Some(p) => {
            let ev = linalg::sym_eigenvalues(p);
            (ev[0], ev[ev.len() - 1])
        }
        None => {
            let q_proxy = if l_f > 0.0 {
                weights.q_min() / (2.0 * l_f)
            } else {
                weights.q_min()
            };
            (q_proxy, w_bar * k * sups.sigma / (set.radius * set.radius))
        }
    };

    let b = BoundEstimates {
        l_f,
        eps_bar,
        eps_prime_bar,
        w_bar,
        d: traj.bound_d(),
        iota1,
        iota2: k * sups.g_sigma,
        iota3: k * iota3,
        iota4: k * iota4,
        iota5: k * iota5,
        phi_lo: excitation.phi_lo,
        phi_hi: excitation.phi_hi,
        psi_lo: excitation.psi_lo,
        t_window: excitation.t_window,
        n,
        n_basis: basis.len(),
        kappa_a: k * sups.kappa_a,
        kappa_e: k * kappa_e,
        q_proxy,
        value_env,
    };
    Ok(b)
}
