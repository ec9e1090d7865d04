//! Exact solution for linear benchmarks: continuous algebraic Riccati equation,
//! the matching basis weights, and the optimal feedback.
//!
//! With the basis scale `½`, a quadratic value `eᵀPe` maps to weights
//! `W = P_ii / ½` on `e_i²` and `2 P_ij / ½` on `e_i e_j`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linalg;
use crate::value_approximator::{BasisSet, WeightRole, WeightVector};
use crate::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RiccatiSolution {
    #[serde(serialize_with = "ser_matrix")]
    pub p: DMatrix<f64>,
    pub residual: f64,
}

fn ser_matrix<S: serde::Serializer>(
    m: &DMatrix<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    linalg::to_rows(m).serialize(s)
}

/// `AᵀP + PA - PBR⁻¹BᵀP + Q`.
pub fn riccati_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let r_inv = r.clone().try_inverse()?;
    Some(a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q)
}

fn check_inputs(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<()> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "care: A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    if !linalg::is_positive_definite(r, 0.0) {
        return Err(Error::OracleUnavailable(
            "R is not positive definite".into(),
        ));
    }
    if linalg::sym_eigenvalues(q)[0] < -1e-12 {
        return Err(Error::OracleUnavailable(
            "Q is not positive semidefinite".into(),
        ));
    }
    Ok(())
}

/// Stabilizing feedback `K` with `A - BK` Hurwitz. Zero when `A` already is;
/// otherwise the shifted-Lyapunov construction `K = Bᵀ X⁻¹`,
/// `(A + αI) X + X (A + αI)ᵀ = 2 B Bᵀ`.
fn stabilizing_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if linalg::max_real_eigenvalue(a) < -1e-9 {
        return Ok(DMatrix::zeros(b.ncols(), n));
    }
    let alpha = a.norm() + 1.0;
    let shifted = a + DMatrix::identity(n, n) * alpha;
    let x = linalg::solve_lyapunov(&(-shifted.transpose()), &(b * b.transpose() * 2.0))
        .ok_or_else(|| Error::OracleUnavailable("shifted Lyapunov equation is singular".into()))?;
    let x_inv = x
        .cholesky()
        .ok_or_else(|| {
            Error::OracleUnavailable("(A, B) is not controllable enough to seed".into())
        })?
        .inverse();
    let k = b.transpose() * x_inv;
    if linalg::max_real_eigenvalue(&(a - b * &k)) >= 0.0 {
        return Err(Error::OracleUnavailable("no stabilizing seed gain".into()));
    }
    Ok(k)
}

/// Solves `AᵀP + PA - PBR⁻¹BᵀP + Q = 0` by Newton refinement from a stabilizing gain.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<RiccatiSolution> {
    check_inputs(a, b, q, r)?;
    let r_inv = r
        .clone()
        .try_inverse()
        .expect("R checked positive definite");
    let mut k = stabilizing_gain(a, b)?;
    let mut p = DMatrix::zeros(a.nrows(), a.nrows());
    for it in 0..MAX_NEWTON {
        let ak = a - b * &k;
        let rhs = q + k.transpose() * r * &k;
        let p_next = linalg::solve_lyapunov(&ak, &rhs)
            .ok_or_else(|| Error::OracleUnavailable("Lyapunov step is singular".into()))?;
        if !linalg::all_finite(p_next.as_slice()) {
            return Err(Error::OracleUnavailable("Newton iteration diverged".into()));
        }
        let step = (&p_next - &p).norm();
        p = p_next;
        k = &r_inv * b.transpose() * &p;
        if it > 0 && step <= 1e-14 * (1.0 + p.norm()) {
            break;
        }
    }
    let p = (&p + p.transpose()) * 0.5;
    let residual = riccati_residual(a, b, q, r, &p).map_or(f64::INFINITY, |m| m.norm());
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::OracleUnavailable(format!(
            "Riccati residual {residual:e}"
        )));
    }
    let closed = a - b * &r_inv * b.transpose() * &p;
    if linalg::max_real_eigenvalue(&closed) >= 0.0 {
        return Err(Error::OracleUnavailable("closed loop is not stable".into()));
    }
    if linalg::sym_eigenvalues(&p)[0] < -1e-10 {
        return Err(Error::OracleUnavailable(
            "Riccati solution is not positive semidefinite".into(),
        ));
    }
    Ok(RiccatiSolution { p, residual })
}

/// Weights reproducing `eᵀPe` on the given basis. Monomials that involve `x_d` or
/// have degree above two receive zero weight.
pub fn ideal_weights(p: &DMatrix<f64>, basis: &BasisSet) -> Result<WeightVector> {
    let n = p.nrows();
    if basis.input_dim() != 2 * n {
        return Err(Error::BasisMismatch(format!(
            "basis acts on dimension {}, P is {n}x{n}",
            basis.input_dim()
        )));
    }
    let mut w = DVector::zeros(basis.len());
    for i in 0..n {
        for j in i..n {
            let mut exps = vec![0u32; 2 * n];
            exps[i] += 1;
            exps[j] += 1;
            let coeff = if i == j {
                p[(i, i)]
            } else {
                p[(i, j)] + p[(j, i)]
            };
            match basis.position(&exps) {
                Some(k) => w[k] = coeff / basis.scale(),
                None if coeff.abs() > 0.0 => {
                    return Err(Error::BasisMismatch(format!(
                        "basis lacks the monomial e{}*e{} required by P",
                        i + 1,
                        j + 1
                    )))
                }
                None => {}
            }
        }
    }
    WeightVector::new(w, WeightRole::Ideal, basis)
}

/// `μ* = -R⁻¹BᵀPe`.
pub fn optimal_policy_linear(
    p: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
    e: &DVector<f64>,
) -> DVector<f64> {
    let r_inv = r.clone().try_inverse().expect("R must be invertible");
    -(r_inv * b.transpose() * p * e)
}

/// Eigenvalues `(re, im)` of `A - BR⁻¹BᵀP`.
pub fn closed_loop_spectrum(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Vec<(f64, f64)> {
    let r_inv = r.clone().try_inverse().expect("R must be invertible");
    let closed = a - b * r_inv * b.transpose() * p;
    let mut ev: Vec<(f64, f64)> = closed
        .complex_eigenvalues()
        .iter()
        .map(|c| (c.re, c.im))
        .collect();
    ev.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    ev
}
