use serde::Serialize;

use super::bounds::{
    estimate_bounds, ApproximationSpec, BoundEstimates, CompactSetSpec, ExcitationSpec,
};
use super::conditions::{assess_gains, ConditionReport};
use super::constants::{constants_unchecked, default_xi, envelopes, StabilityConstants};
use crate::actor_critic::AdaptationGains;
use crate::system_model::{DesiredTrajectoryModel, SystemModel};
use crate::tracking_transform::CostWeights;
use crate::value_approximator::BasisSet;
use crate::{Error, Result};

/// Smallest admissible radius; a zero initial bound would leave nothing to sample.
pub const MIN_RADIUS: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct SelectionOptions {
    pub approx: ApproximationSpec,
    pub excitation: ExcitationSpec,
    /// Richer bases with their gradient-error bounds, tried in order in stage 3.
    pub ladder: Vec<(BasisSet, f64)>,
    /// Multiplies ι in the first stage only.
    pub iota_inflation: f64,
    pub xi: Option<(f64, f64)>,
}

impl SelectionOptions {
    pub fn new(approx: ApproximationSpec, excitation: ExcitationSpec) -> Self {
        Self {
            approx,
            excitation,
            ladder: Vec::new(),
            iota_inflation: 1.0,
            xi: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    pub radius: f64,
    pub z_bar: f64,
    pub basis_size: usize,
    pub accepted: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GainSelectionResult {
    pub iterations: usize,
    pub radius: f64,
    pub z_bar: f64,
    pub gains: AdaptationGains,
    #[serde(skip)]
    pub basis: BasisSet,
    pub stages: Vec<StageRecord>,
    pub bounds: BoundEstimates,
    pub constants: StabilityConstants,
    pub report: ConditionReport,
}

struct Stage {
    bounds: BoundEstimates,
    consts: StabilityConstants,
}

/// Three-stage compact-set selection.
///
/// Stage 1 samples a ball of radius `β₁ v̲⁻¹(v̄(Z₀))` and stops if `Z̄` fits in it.
/// Stage 2 grows the ball to `β₂ Z̄₁` and stops if `Z̄₂ <= Z̄₁`. Stage 3 moves to
/// the first basis on the ladder with `L_F ε̄'` no larger than in stage 1 whose
/// `Z̄` fits in `β₂ Z̄₁`. The gains are taken from the template throughout and the
/// sufficient-condition report for the final set is attached.
#[allow(clippy::too_many_arguments)]
pub fn select_gains(
    z0: f64,
    model: &SystemModel,
    traj: &DesiredTrajectoryModel,
    basis: &BasisSet,
    gains_template: &AdaptationGains,
    weights: &CostWeights,
    set: &CompactSetSpec,
    opts: &SelectionOptions,
) -> Result<GainSelectionResult> {
    if !(z0 >= 0.0 && z0.is_finite()) {
        return Err(Error::Config(format!(
            "Z0 must be finite and nonnegative, got {z0}"
        )));
    }
    set.validate()?;
    gains_template.validate()?;
    let q_lo = weights.q_min();

    let run = |basis: &BasisSet,
               radius: f64,
               approx: &ApproximationSpec,
               iota_scale: f64|
     -> Result<Stage> {
        let bounds = estimate_bounds(
            model,
            traj,
            basis,
            weights,
            &set.with_radius(radius),
            approx,
            &opts.excitation,
        )?;
        bounds.validate()?;
        let (xi1, xi2) = opts.xi.unwrap_or_else(|| default_xi(&bounds));
        let consts = constants_unchecked(&bounds, gains_template, q_lo, z0, xi1, xi2, iota_scale);
        if !consts.z_bar.is_finite() {
            return Err(Error::SelectionFailed(format!(
                "Zbar undefined at radius {radius:.6e} (varpi11 = {:.6e}, denominator = {:.6e})",
                consts.varpi11, consts.denominator
            )));
        }
        Ok(Stage { bounds, consts })
    };
    let finish = |iterations: usize,
                  radius: f64,
                  basis: &BasisSet,
                  stage: Stage,
                  stages: Vec<StageRecord>| {
        let Stage { bounds, consts } = stage;
        let report = assess_gains(gains_template, &bounds, weights, z0, consts.xi1, consts.xi2)?;
        Ok(GainSelectionResult {
            iterations,
            radius,
            z_bar: consts.z_bar,
            gains: *gains_template,
            basis: basis.clone(),
            stages,
            bounds,
            constants: consts,
            report,
        })
    };

    let mut stages = Vec::new();

    // envelope coefficients from a pilot set around the initial condition
    let pilot = estimate_bounds(
        model,
        traj,
        basis,
        weights,
        &set.with_radius(z0.max(MIN_RADIUS)),
        &opts.approx,
        &opts.excitation,
    )?;
    let (c1, c2) = envelopes(&pilot);
    let r1 = (set.beta1 * (c2 / c1).sqrt() * z0).max(MIN_RADIUS);
    let s1 = run(basis, r1, &opts.approx, opts.iota_inflation)?;
    let z1 = s1.consts.z_bar;
    let ok1 = z1 <= r1;
    stages.push(StageRecord {
        stage: 1,
        radius: r1,
        z_bar: z1,
        basis_size: basis.len(),
        accepted: ok1,
    });
    if ok1 {
        return finish(1, r1, basis, s1, stages);
    }

    let r2 = set.beta2 * z1;
    let s2 = run(basis, r2, &opts.approx, 1.0)?;
    let z2 = s2.consts.z_bar;
    let ok2 = z2 <= z1;
    stages.push(StageRecord {
        stage: 2,
        radius: r2,
        z_bar: z2,
        basis_size: basis.len(),
        accepted: ok2,
    });
    if ok2 {
        return finish(2, r2, basis, s2, stages);
    }

    let product1 = s1.bounds.l_f * s1.bounds.eps_prime_bar;
    let l_f2 = s2.bounds.l_f;
    let mut tried = 0;
    for (candidate, eps3) in &opts.ladder {
        if l_f2 * eps3 > product1 {
            continue;
        }
        tried += 1;
        let approx = ApproximationSpec {
            eps_prime_bar: *eps3,
            ..opts.approx.clone()
        };
        let s3 = match run(candidate, r2, &approx, 1.0) {
            Ok(s) => s,
            Err(Error::SelectionFailed(_)) => continue,
            Err(e) => return Err(e),
        };
        let z3 = s3.consts.z_bar;
        let ok3 = z3 <= r2;
        stages.push(StageRecord {
            stage: 3,
            radius: r2,
            z_bar: z3,
            basis_size: candidate.len(),
            accepted: ok3,
        });
        if ok3 {
            return finish(3, r2, candidate, s3, stages);
        }
    }
    Err(Error::SelectionFailed(format!(
        "Zbar2 = {z2:.6e} exceeds Zbar1 = {z1:.6e} and none of the {} admissible richer bases ({} on the ladder) brings Zbar within {r2:.6e}",
        tried,
        opts.ladder.len()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lq_oracle::solve_care;
    use crate::system_model::make_linear_benchmark;
    use crate::value_approximator::quadratic_basis;
    use crate::{DMatrix, DVector};

    fn s1(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    fn fixture() -> (
        SystemModel,
        DesiredTrajectoryModel,
        CostWeights,
        SelectionOptions,
        AdaptationGains,
    ) {
        let (model, traj) =
            make_linear_benchmark(&s1(-1.0), &s1(1.0), &s1(0.0), &DVector::zeros(1)).unwrap();
        let w = CostWeights::new(s1(1.0), s1(1.0)).unwrap();
        let p = solve_care(&s1(-1.0), &s1(1.0), &s1(1.0), &s1(1.0))
            .unwrap()
            .p;
        let opts = SelectionOptions::new(
            ApproximationSpec {
                oracle_p: Some(p),
                ..Default::default()
            },
            ExcitationSpec {
                phi_lo: 1.0,
                phi_hi: 2.0,
                psi_lo: 0.05,
                t_window: 0.01,
            },
        );
        let g = AdaptationGains::new(1.0, 1.0, 0.001, 1.0, 0.5).unwrap();
        (model, traj, w, opts, g)
    }

    fn set() -> CompactSetSpec {
        CompactSetSpec {
            sample_count: 2_000,
            safety_factor: 1.0,
            ..CompactSetSpec::default()
        }
    }

    #[test]
    fn oracle_terminates_in_first_stage() {
        let (m, t, w, opts, g) = fixture();
        let r = select_gains(
            0.05,
            &m,
            &t,
            &quadratic_basis(1, false),
            &g,
            &w,
            &set(),
            &opts,
        )
        .unwrap();
        assert_eq!(r.iterations, 1, "{:?}", r.stages);
        assert!(r.z_bar <= r.radius);
    }

    #[test]
    fn inflated_iota_reaches_second_stage() {
        let (m, t, w, mut opts, g) = fixture();
        opts.iota_inflation = 1e3;
        opts.ladder = vec![(quadratic_basis(1, true), 0.0)];
        let r = select_gains(
            0.005,
            &m,
            &t,
            &quadratic_basis(1, false),
            &g,
            &w,
            &set(),
            &opts,
        )
        .unwrap();
        assert_eq!(r.iterations, 2, "{:?}", r.stages);
        assert!(r.z_bar <= r.radius);
    }

    #[test]
    fn zero_initial_bound_uses_minimum_radius() {
        let (m, t, w, opts, g) = fixture();
        let r = select_gains(
            0.0,
            &m,
            &t,
            &quadratic_basis(1, false),
            &g,
            &w,
            &set(),
            &opts,
        );
        match r {
            Ok(r) => {
                assert_eq!(r.stages[0].radius, MIN_RADIUS);
                assert!(r.z_bar <= r.radius);
            }
            Err(e) => assert!(matches!(e, Error::SelectionFailed(_))),
        }
    }
}
