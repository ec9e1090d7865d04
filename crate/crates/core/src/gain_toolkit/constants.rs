use serde::{Deserialize, Serialize};

use super::bounds::BoundEstimates;
use crate::actor_critic::AdaptationGains;
use crate::tracking_transform::CostWeights;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConstants {
    pub varpi0: f64,
    pub varpi1: f64,
    pub varpi2: f64,
    pub varpi3: f64,
    pub varpi4: f64,
    pub varpi5: f64,
    pub varpi6: f64,
    pub varpi7: f64,
    pub varpi8: f64,
    pub varpi9: f64,
    pub varpi10: f64,
    pub varpi11: f64,
    pub iota: f64,
    pub eta_a12: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub z0: f64,
    /// NaN when `ϖ₁₁ <= 0`.
    pub z_bar: f64,
    /// `1 - 6N(η_c φ̄ T)² / (ν φ̲)²`, shared by ϖ₄, ϖ₅, ϖ₆.
    pub denominator: f64,
    pub q_lo: f64,
    pub c1: f64,
    pub c2: f64,
    pub t_window: f64,
}

/// `ξ₁ = max(4 ε̄' L_F, 1)`, `ξ₂ = ½`.
pub fn default_xi(bounds: &BoundEstimates) -> (f64, f64) {
    ((4.0 * bounds.eps_prime_bar * bounds.l_f).max(1.0), 0.5)
}

/// Coefficients of the quadratic envelopes `v̲(s) = c₁s²`, `v̄(s) = c₂s²`.
pub fn envelopes(bounds: &BoundEstimates) -> (f64, f64) {
    let c1 = 0.5 * bounds.q_proxy.min(1.0 / bounds.phi_hi).min(1.0);
    let c2 = 2.0 * bounds.value_env.max(1.0 / bounds.phi_lo).max(1.0);
    (c1, c2)
}

/// `v̲⁻¹(v̄(s) + a)` for the quadratic envelopes.
fn envelope_radius(c1: f64, c2: f64, s: f64, a: f64) -> f64 {
    ((c2 * s * s + a) / c1).sqrt()
}

/// Every constant, without rejecting a non-positive shared denominator; the
/// affected entries are then NaN.
pub(crate) fn constants_unchecked(
    b: &BoundEstimates,
    gains: &AdaptationGains,
    q_lo: f64,
    z0: f64,
    xi1: f64,
    xi2: f64,
    iota_scale: f64,
) -> StabilityConstants {
    let n = b.n as f64;
    let nn = b.n_basis as f64;
    let t = b.t_window;
    let (eta_c, eta_a1, eta_a2, nu) = (gains.eta_c, gains.eta_a1, gains.eta_a2, gains.nu);
    let eta_a12 = gains.eta_a12();
    let (phi_lo, phi_hi) = (b.phi_lo, b.phi_hi);
    let ep = b.eps_prime_bar;
    let lf = b.l_f;
    let d = b.d;

    let den = 1.0 - 6.0 * nn * (eta_c * phi_hi * t).powi(2) / (nu * phi_lo).powi(2);
    let den_ok = den > 0.0;

    let varpi0 = (1.0 - 6.0 * n * t * t * lf * lf) / 2.0;
    let varpi1 = 0.75 * n * b.kappa_a * b.kappa_a;
    // 3n²T²(·)²/n, i.e. 3nT²L_e² with L_e = d L_F + κ_e
    let varpi2 = 3.0 * n * n * t * t * (d * lf + b.kappa_e).powi(2) / n;
    let varpi3 = (1.0 - 6.0 * nn * eta_a12 * eta_a12 * t * t) / 2.0;
    let (varpi4, varpi5, varpi6) = if den_ok {
        (
            6.0 * nn * eta_a1 * eta_a1 * t * t / den,
            18.0 * (eta_a1 * nn * eta_c * phi_hi * ep * lf * t * t).powi(2) / (nu * phi_lo * den),
            18.0 * (nn * eta_a1 * eta_c * phi_hi * (ep * lf * d + b.iota5) * t * t).powi(2)
                / (nu * phi_lo * den)
                + 3.0 * nn * (eta_a2 * b.w_bar * t).powi(2),
        )
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    let varpi7 =
        (nu * phi_lo).powi(2) / (2.0 * ((nu * phi_lo).powi(2) + (eta_c * phi_hi * t).powi(2)));
    let varpi8 = 3.0 * ep * ep * lf * lf;
    let varpi9 = 2.0 * (b.iota5 * b.iota5 + ep * ep * lf * lf * d * d);

    let iota = iota_scale
        * ((eta_a2 * b.w_bar + b.iota4).powi(2) / eta_a12
            + 2.0 * eta_c * b.iota1 * b.iota1
            + 0.25 * b.iota3);
    let varpi10 = (varpi6 * eta_a12 + 2.0 * varpi2 * q_lo + eta_c * varpi9) / 8.0 + iota;
    let varpi11 = (eta_c * b.psi_lo * varpi7)
        .min(2.0 * varpi0 * q_lo * t)
        .min(varpi3 * eta_a12 * t)
        / 16.0;

    let (c1, c2) = envelopes(b);
    let z_bar = if varpi11 > 0.0 && varpi10.is_finite() {
        let s = (z0 * z0).max(varpi10 * t / varpi11);
        envelope_radius(c1, c2, s, iota * t)
    } else {
        f64::NAN
    };

    StabilityConstants {
        varpi0,
        varpi1,
        varpi2,
        varpi3,
        varpi4,
        varpi5,
        varpi6,
        varpi7,
        varpi8,
        varpi9,
        varpi10,
        varpi11,
        iota,
        eta_a12,
        xi1,
        xi2,
        z0,
        z_bar,
        denominator: den,
        q_lo,
        c1,
        c2,
        t_window: t,
    }
}

pub fn compute_constants(
    bounds: &BoundEstimates,
    gains: &AdaptationGains,
    weights: &CostWeights,
    z0: f64,
    xi1: f64,
    xi2: f64,
) -> Result<StabilityConstants> {
    bounds.validate()?;
    gains.validate()?;
    if !(z0 >= 0.0 && z0.is_finite()) {
        return Err(Error::Config(format!(
            "Z0 must be finite and nonnegative, got {z0}"
        )));
    }
    if !(xi1 > 0.0 && xi2 > 0.0) {
        return Err(Error::Config("xi1 and xi2 must be positive".into()));
    }
    let c = constants_unchecked(bounds, gains, weights.q_min(), z0, xi1, xi2, 1.0);
    if c.denominator <= 0.0 {
        return Err(Error::TWindowTooLarge {
            denominator: c.denominator,
        });
    }
    Ok(c)
}

/// `v̲⁻¹(v̄(ϖ₁₀T/ϖ₁₁) + ιT)` with the quadratic envelopes.
pub fn ultimate_bound(consts: &StabilityConstants) -> Result<f64> {
    if !(consts.varpi11 > 0.0) {
        return Err(Error::ConditionsNotMet(format!(
            "varpi11 = {} is not positive",
            consts.varpi11
        )));
    }
    if !consts.varpi10.is_finite() {
        return Err(Error::ConditionsNotMet("varpi10 is not finite".into()));
    }
    let s = consts.varpi10 * consts.t_window / consts.varpi11;
    Ok(envelope_radius(
        consts.c1,
        consts.c2,
        s,
        consts.iota * consts.t_window,
    ))
}
