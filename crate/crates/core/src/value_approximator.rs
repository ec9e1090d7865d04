//! Monomial basis `sigma(zeta)`, value estimate `V̂ = Ŵ_cᵀσ`, policy and controller.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::system_model::{steady_state_control, DesiredTrajectoryModel, SystemModel};
use crate::tracking_transform::{concatenated_input, ConcatenatedState, CostWeights};
use crate::{Error, Result};

/// A set of monomials over the `2n` entries of the concatenated state.
///
/// Every monomial has total degree at least two, so `σ(0) = 0` and `σ'(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    exponents: Vec<Vec<u32>>,
    scale: f64,
}

impl BasisSet {
    pub fn new(exponents: Vec<Vec<u32>>, scale: f64) -> Result<Self> {
        let dim = exponents
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidBasis("empty exponent table".into()))?;
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::InvalidBasis(format!(
                "exponent vectors must have even length 2n, got {dim}"
            )));
        }
        if !scale.is_finite() || scale == 0.0 {
            return Err(Error::InvalidBasis(format!(
                "scale must be finite and nonzero, got {scale}"
            )));
        }
        let mut seen = HashSet::new();
        for (k, row) in exponents.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidBasis(format!(
                    "monomial {k} has {} exponents, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().sum::<u32>() < 2 {
                return Err(Error::InvalidBasis(format!(
                    "monomial {k} has total degree < 2"
                )));
            }
            if !seen.insert(row.clone()) {
                return Err(Error::InvalidBasis(format!("duplicate monomial {row:?}")));
            }
        }
        Ok(Self { exponents, scale })
    }

    /// Number of basis functions `N`.
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Length of the concatenated state, `2n`.
    pub fn input_dim(&self) -> usize {
        self.exponents[0].len()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Index of the monomial with exactly these exponents.
    pub fn position(&self, exps: &[u32]) -> Option<usize> {
        self.exponents.iter().position(|row| row == exps)
    }

    fn check_dim(&self, zeta: &DVector<f64>) {
        assert_eq!(
            zeta.len(),
            self.input_dim(),
            "basis expects a concatenated state of length {}",
            self.input_dim()
        );
    }

    pub fn eval(&self, zeta: &DVector<f64>) -> DVector<f64> {
        self.check_dim(zeta);
        DVector::from_iterator(
            self.len(),
            self.exponents.iter().map(|row| {
                self.scale
                    * row
                        .iter()
                        .zip(zeta.iter())
                        .map(|(&a, &z)| z.powi(a as i32))
                        .product::<f64>()
            }),
        )
    }

    /// Analytic Jacobian `σ'(zeta)`, shape `N x 2n`.
    pub fn jacobian(&self, zeta: &DVector<f64>) -> DMatrix<f64> {
        self.check_dim(zeta);
        let dim = self.input_dim();
        let mut jac = DMatrix::zeros(self.len(), dim);
        for (k, row) in self.exponents.iter().enumerate() {
            for j in 0..dim {
                if row[j] == 0 {
                    continue;
                }
                let mut term = self.scale * f64::from(row[j]);
                for (i, (&a, &z)) in row.iter().zip(zeta.iter()).enumerate() {
                    let p = if i == j { a - 1 } else { a };
                    term *= z.powi(p as i32);
                }
                jac[(k, j)] = term;
            }
        }
        jac
    }
}

/// Degree-2 monomials in `e` (`n(n+1)/2` terms), optionally extended by the
/// `e_i x_dj` cross terms and the degree-2 monomials in `x_d`. Scale `1/2`.
pub fn quadratic_basis(n: usize, include_cross_xd: bool) -> BasisSet {
    assert!(n >= 1, "state dimension must be positive");
    let dim = 2 * n;
    let pair = |a: usize, b: usize| {
        let mut v = vec![0u32; dim];
        v[a] += 1;
        v[b] += 1;
        v
    };
    let mut exps = Vec::new();
    for i in 0..n {
        for j in i..n {
            exps.push(pair(i, j));
        }
    }
    if include_cross_xd {
        for i in 0..n {
            for j in 0..n {
                exps.push(pair(i, n + j));
            }
        }
        for i in 0..n {
            for j in i..n {
                exps.push(pair(n + i, n + j));
            }
        }
    }
    BasisSet::new(exps, 0.5).expect("quadratic basis is well formed")
}

/// 23-term polynomial basis on `zeta in R^8` used with the two-link arm: six
/// quadratic error terms, `zeta1^2 zeta2^2`, and every `zeta_i^2 zeta_j^2` with
/// `i` an error coordinate and `j` a desired-state coordinate. Scale `1/2`.
pub fn manipulator_basis() -> BasisSet {
    let mono = |pairs: &[(usize, u32)]| {
        let mut v = vec![0u32; 8];
        for &(i, p) in pairs {
            v[i] += p;
        }
        v
    };
    let mut exps = vec![
        mono(&[(0, 2)]),
        mono(&[(1, 2)]),
        mono(&[(0, 1), (2, 1)]),
        mono(&[(0, 1), (3, 1)]),
        mono(&[(1, 1), (2, 1)]),
        mono(&[(1, 1), (3, 1)]),
        mono(&[(0, 2), (1, 2)]),
    ];
    for i in 0..4 {
        for j in 4..8 {
            exps.push(mono(&[(i, 2), (j, 2)]));
        }
    }
    BasisSet::new(exps, 0.5).expect("manipulator basis is well formed")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightRole {
    Critic,
    Actor,
    Ideal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    pub w: DVector<f64>,
    pub role: WeightRole,
}

impl WeightVector {
    pub fn new(w: DVector<f64>, role: WeightRole, basis: &BasisSet) -> Result<Self> {
        if w.len() != basis.len() {
            return Err(Error::Dimension(format!(
                "{role:?} weights have length {}, basis has {}",
                w.len(),
                basis.len()
            )));
        }
        if !linalg::all_finite(w.as_slice()) {
            return Err(Error::InvalidWeights(format!(
                "{role:?} weights are not finite"
            )));
        }
        Ok(Self { w, role })
    }
}

/// `V̂ = Ŵ_cᵀσ(zeta)`.
pub fn value_estimate(w_c: &DVector<f64>, basis: &BasisSet, zeta: &ConcatenatedState) -> f64 {
    w_c.dot(&basis.eval(&zeta.flatten()))
}

/// `μ = -½ R⁻¹ Gᵀ σ'ᵀ Ŵ_a` from an already evaluated `σ'` and `G`.
pub fn policy_from_parts(
    w_a: &DVector<f64>,
    sigma_jac: &DMatrix<f64>,
    g_big: &DMatrix<f64>,
    weights: &CostWeights,
) -> DVector<f64> {
    let grad = sigma_jac.tr_mul(w_a);
    (weights.r_inv() * g_big.tr_mul(&grad)) * -0.5
}

pub fn policy(
    w_a: &DVector<f64>,
    basis: &BasisSet,
    zeta: &ConcatenatedState,
    model: &SystemModel,
    weights: &CostWeights,
) -> DVector<f64> {
    let jac = basis.jacobian(&zeta.flatten());
    let g_big = concatenated_input(zeta, model);
    policy_from_parts(w_a, &jac, &g_big, weights)
}

/// Full tracking controller `u = μ(zeta) + u_d(x_d)`.
pub fn controller(
    w_a: &DVector<f64>,
    basis: &BasisSet,
    zeta: &ConcatenatedState,
    model: &SystemModel,
    traj: &DesiredTrajectoryModel,
    weights: &CostWeights,
) -> Result<DVector<f64>> {
    let ud = steady_state_control(model, traj, &zeta.xd)?;
    Ok(policy(w_a, basis, zeta, model, weights) + ud)
}
