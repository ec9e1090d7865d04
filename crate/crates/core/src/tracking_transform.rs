//! Time-invariant reformulation of the tracking problem on `zeta = [e; x_d]`.

use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::system_model::{steady_state_control, DesiredTrajectoryModel, SystemModel};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ConcatenatedState {
    pub e: DVector<f64>,
    pub xd: DVector<f64>,
}

impl ConcatenatedState {
    pub fn new(e: DVector<f64>, xd: DVector<f64>) -> Result<Self> {
        if e.len() != xd.len() {
            return Err(Error::Dimension(format!(
                "tracking error has length {}, desired state {}",
                e.len(),
                xd.len()
            )));
        }
        Ok(Self { e, xd })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            e: DVector::zeros(n),
            xd: DVector::zeros(n),
        }
    }

    /// Splits a flat `2n` vector into its error and desired-state halves.
    pub fn from_flat(zeta: &DVector<f64>) -> Result<Self> {
        if !zeta.len().is_multiple_of(2) {
            return Err(Error::Dimension(format!(
                "odd concatenated length {}",
                zeta.len()
            )));
        }
        let n = zeta.len() / 2;
        Ok(Self {
            e: zeta.rows(0, n).into_owned(),
            xd: zeta.rows(n, n).into_owned(),
        })
    }

    pub fn dim(&self) -> usize {
        self.e.len()
    }

    pub fn flatten(&self) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(2 * n, |i, _| if i < n { self.e[i] } else { self.xd[i - n] })
    }

    /// Plant state `x = e + x_d`.
    pub fn plant_state(&self) -> DVector<f64> {
        &self.e + &self.xd
    }
}

/// `(x, x_d) -> (e = x - x_d, x_d)`.
pub fn lift(x: &DVector<f64>, xd: &DVector<f64>) -> Result<ConcatenatedState> {
    if x.len() != xd.len() {
        return Err(Error::Dimension(format!(
            "plant state has length {}, desired state {}",
            x.len(),
            xd.len()
        )));
    }
    Ok(ConcatenatedState {
        e: x - xd,
        xd: xd.clone(),
    })
}

/// Quadratic cost weights for the local cost `eᵀQe + μᵀRμ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostWeights {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    q_min: f64,
}

impl CostWeights {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        check_spd(&q, "Q")?;
        check_spd(&r, "R")?;
        let q_min = linalg::sym_eigenvalues(&q)[0];
        let r_inv = r
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidWeights("R is singular".into()))?
            .inverse();
        Ok(Self { q, r, r_inv, q_min })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn r_inv(&self) -> &DMatrix<f64> {
        &self.r_inv
    }

    /// Smallest eigenvalue of `Q`.
    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    /// Replaces `Q` by `scale * Q` (used by monotonicity checks).
    pub fn scaled_q(&self, scale: f64) -> Result<Self> {
        Self::new(&self.q * scale, self.r.clone())
    }
}

fn check_spd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidWeights(format!(
            "{name} must be square and non-empty"
        )));
    }
    if !linalg::all_finite(m.as_slice()) {
        return Err(Error::InvalidWeights(format!(
            "{name} has non-finite entries"
        )));
    }
    if linalg::asymmetry(m) > 1e-12 {
        return Err(Error::InvalidWeights(format!("{name} is not symmetric")));
    }
    if linalg::sym_eigenvalues(m)[0] <= 0.0 {
        return Err(Error::InvalidWeights(format!(
            "{name} is not positive definite"
        )));
    }
    Ok(())
}

/// Transformed drift `F(zeta)`: top block `f(e+x_d) - h_d(x_d) + g(e+x_d) u_d(x_d)`,
/// bottom block `h_d(x_d)`.
pub fn concatenated_drift(
    zeta: &ConcatenatedState,
    model: &SystemModel,
    traj: &DesiredTrajectoryModel,
) -> Result<DVector<f64>> {
    let x = zeta.plant_state();
    let hd = traj.generator(&zeta.xd);
    let ud = steady_state_control(model, traj, &zeta.xd)?;
    let top = model.drift(&x) - &hd + model.input_matrix(&x) * ud;
    let n = zeta.dim();
    Ok(DVector::from_fn(2 * n, |i, _| {
        if i < n {
            top[i]
        } else {
            hd[i - n]
        }
    }))
}

/// Transformed input matrix `G(zeta) = [g(e+x_d); 0]`.
pub fn concatenated_input(zeta: &ConcatenatedState, model: &SystemModel) -> DMatrix<f64> {
    let n = zeta.dim();
    let g = model.input_matrix(&zeta.plant_state());
    let mut big = DMatrix::zeros(2 * n, g.ncols());
    big.view_mut((0, 0), (n, g.ncols())).copy_from(&g);
    big
}

/// `r(zeta, mu) = eᵀQe + μᵀRμ`; the zero blocks of `Q̄` are never formed.
pub fn local_cost(zeta: &ConcatenatedState, mu: &DVector<f64>, weights: &CostWeights) -> f64 {
    let e = &zeta.e;
    e.dot(&(weights.q() * e)) + mu.dot(&(weights.r() * mu))
}

/// Block-diagonal `Q̄ = diag(Q, 0)`.
pub fn q_bar(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_spd(q, "Q")?;
    let n = q.nrows();
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(q);
    Ok(big)
}

/// Applied control `u = mu + u_d`.
pub fn untransform_control(mu: &DVector<f64>, ud: &DVector<f64>) -> DVector<f64> {
    mu + ud
}
