//! Plant `x' = f(x) + g(x) u` and desired-trajectory generator `x_d' = h_d(x_d)`.
//!
//! Evaluators are stored as shared closures so a model can be cloned cheaply and
//! handed to concurrent episodes.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::{Error, Result};

pub type VectorField = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type TimeSignal = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// Smallest singular value below which an input matrix counts as rank deficient.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Clone)]
pub struct SystemModel {
    name: String,
    n: usize,
    m: usize,
    drift: VectorField,
    input_matrix: MatrixField,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .finish()
    }
}

impl SystemModel {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        m: usize,
        drift: VectorField,
        input_matrix: MatrixField,
    ) -> Self {
        Self {
            name: name.into(),
            n,
            m,
            drift,
            input_matrix,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.drift)(x)
    }

    pub fn input_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.input_matrix)(x)
    }

    /// `g⁺(x)`; the error names `x` when `g(x)` loses column rank.
    pub fn input_pinv(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        pseudo_inverse(&self.input_matrix(x)).map_err(|e| match e {
            Error::RankDeficiency { sigma_min, .. } => Error::RankDeficiency {
                state: x.iter().copied().collect(),
                sigma_min,
            },
            other => other,
        })
    }
}

#[derive(Clone)]
pub struct DesiredTrajectoryModel {
    generator: VectorField,
    bound_d: f64,
    initial_xd: DVector<f64>,
    closed_form: Option<TimeSignal>,
}

impl fmt::Debug for DesiredTrajectoryModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DesiredTrajectoryModel")
            .field("bound_d", &self.bound_d)
            .field("initial_xd", &self.initial_xd.as_slice())
            .field("closed_form", &self.closed_form.is_some())
            .finish()
    }
}

impl DesiredTrajectoryModel {
    pub fn new(generator: VectorField, bound_d: f64, initial_xd: DVector<f64>) -> Self {
        Self {
            generator,
            bound_d,
            initial_xd,
            closed_form: None,
        }
    }

    /// Attaches an analytic `x_d(t)` used by the drift monitor.
    pub fn with_closed_form(mut self, signal: TimeSignal) -> Self {
        self.closed_form = Some(signal);
        self
    }

    pub fn generator(&self, xd: &DVector<f64>) -> DVector<f64> {
        (self.generator)(xd)
    }

    pub fn bound_d(&self) -> f64 {
        self.bound_d
    }

    pub fn initial_xd(&self) -> &DVector<f64> {
        &self.initial_xd
    }

    pub fn closed_form(&self, t: f64) -> Option<DVector<f64>> {
        self.closed_form.as_ref().map(|s| s(t))
    }

    pub fn with_initial_xd(mut self, xd0: DVector<f64>, bound_d: f64) -> Self {
        self.initial_xd = xd0;
        self.bound_d = bound_d;
        self.closed_form = None;
        self
    }
}

/// `g⁺ = (gᵀg)⁻¹gᵀ` for a full-column-rank `g`.
pub fn pseudo_inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if g.nrows() < g.ncols() {
        return Err(Error::Dimension(format!(
            "input matrix {}x{} cannot have full column rank",
            g.nrows(),
            g.ncols()
        )));
    }
    let sigma_min = linalg::min_singular_value(g);
    if sigma_min.is_nan() || sigma_min <= RANK_TOL {
        return Err(Error::RankDeficiency {
            state: Vec::new(),
            sigma_min,
        });
    }
    let gt = g.transpose();
    let gram = &gt * g;
    let inv = gram
        .cholesky()
        .ok_or(Error::RankDeficiency {
            state: Vec::new(),
            sigma_min,
        })?
        .inverse();
    Ok(inv * gt)
}

/// Feedforward `u_d = g⁺(x_d) (h_d(x_d) - f(x_d))` that holds the plant on the
/// desired trajectory.
pub fn steady_state_control(
    model: &SystemModel,
    traj: &DesiredTrajectoryModel,
    xd: &DVector<f64>,
) -> Result<DVector<f64>> {
    let pinv = model.input_pinv(xd)?;
    Ok(pinv * (traj.generator(xd) - model.drift(xd)))
}

/// Linear plant `x' = A x + B u` tracking `x_d' = S x_d`.
///
/// The range condition `(I - B B⁺)(S - A) = 0` guarantees the transformed drift
/// decouples into `e' = A e + B mu`, which is what makes the Riccati oracle exact.
pub fn make_linear_benchmark(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    s: &DMatrix<f64>,
    xd0: &DVector<f64>,
) -> Result<(SystemModel, DesiredTrajectoryModel)> {
    let n = a.nrows();
    if a.ncols() != n || s.nrows() != n || s.ncols() != n || b.nrows() != n || xd0.len() != n {
        return Err(Error::Dimension(format!(
            "linear benchmark expects A,S {n}x{n}, B {n}xm, x_d0 of length {n}"
        )));
    }
    let m = b.ncols();
    let b_pinv = pseudo_inverse(b)?;
    let proj = DMatrix::<f64>::identity(n, n) - b * &b_pinv;
    let residual = (proj * (s - a)).norm();
    if residual >= 1e-9 {
        return Err(Error::IncompatibleFeedforward { residual });
    }
    let growth = linalg::max_real_eigenvalue(s);
    if growth > 1e-9 {
        return Err(Error::UnboundedTrajectory(format!(
            "S has an eigenvalue with real part {growth:e}"
        )));
    }

    let a_f = a.clone();
    let b_g = b.clone();
    let s_h = s.clone();
    let s_cf = s.clone();
    let model = SystemModel::new(
        "linear",
        n,
        m,
        Arc::new(move |x: &DVector<f64>| &a_f * x),
        Arc::new(move |_x: &DVector<f64>| b_g.clone()),
    );
    let bound_d = linear_trajectory_bound(s, xd0);
    let xd0_cf = xd0.clone();
    let traj = DesiredTrajectoryModel::new(
        Arc::new(move |xd: &DVector<f64>| &s_h * xd),
        bound_d,
        xd0.clone(),
    )
    .with_closed_form(Arc::new(move |t: f64| (&s_cf * t).exp() * &xd0_cf));
    Ok((model, traj))
}

/// Sampled `sup_t ||exp(S t) x_d0||` over a long horizon, inflated by 1e-9 relative.
fn linear_trajectory_bound(s: &DMatrix<f64>, xd0: &DVector<f64>) -> f64 {
    let h = 0.01;
    let step = (s * h).exp();
    let mut x = xd0.clone();
    let mut sup = x.norm();
    for _ in 0..20_000 {
        x = &step * x;
        sup = sup.max(x.norm());
    }
    sup * (1.0 + 1e-9)
}

/// Two-link planar arm parameters (no gravity).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManipulatorParams {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    /// Viscous friction diagonal.
    pub fd: [f64; 2],
    /// Static friction gains, smoothed with tanh.
    pub fs: [f64; 2],
}

impl Default for ManipulatorParams {
    fn default() -> Self {
        Self {
            p1: 3.473,
            p2: 0.196,
            p3: 0.242,
            fd: [5.3, 1.1],
            fs: [8.45, 2.35],
        }
    }
}

impl ManipulatorParams {
    pub fn inertia(&self, q2: f64) -> DMatrix<f64> {
        let c2 = q2.cos();
        let off = self.p2 + self.p3 * c2;
        DMatrix::from_row_slice(2, 2, &[self.p1 + 2.0 * self.p3 * c2, off, off, self.p2])
    }

    pub fn coriolis(&self, q2: f64, qd: [f64; 2]) -> DMatrix<f64> {
        let s2 = q2.sin();
        let h = self.p3 * s2;
        DMatrix::from_row_slice(2, 2, &[-h * qd[1], -h * (qd[0] + qd[1]), h * qd[0], 0.0])
    }

    fn inertia_inverse(&self, q2: f64) -> DMatrix<f64> {
        let m = self.inertia(q2);
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        DMatrix::from_row_slice(2, 2, &[m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]]) / det
    }

    /// Kinetic energy `½ q̇ᵀ M(q) q̇`.
    pub fn kinetic_energy(&self, x: &DVector<f64>) -> f64 {
        let qd = DVector::from_column_slice(&[x[2], x[3]]);
        0.5 * (qd.transpose() * self.inertia(x[1]) * &qd)[(0, 0)]
    }
}

/// Two-link arm with the default parameters tracking
/// `x_d = [0.5 cos 2t, 0.33 cos 3t, -sin 2t, -0.99 sin 3t]`, the solution of
/// `h_d = [x_d3, x_d4, -4 x_d1, -9 x_d2]` from `x_d(0) = [0.5, 0.33, 0, 0]`.
pub fn make_manipulator_benchmark() -> (SystemModel, DesiredTrajectoryModel) {
    make_manipulator_with(ManipulatorParams::default())
}

pub fn make_manipulator_with(params: ManipulatorParams) -> (SystemModel, DesiredTrajectoryModel) {
    let p = params;
    let drift = Arc::new(move |x: &DVector<f64>| {
        let qd = [x[2], x[3]];
        let qd_v = DVector::from_column_slice(&qd);
        let fric = DVector::from_column_slice(&[
            p.fd[0] * qd[0] + p.fs[0] * qd[0].tanh(),
            p.fd[1] * qd[1] + p.fs[1] * qd[1].tanh(),
        ]);
        let acc = p.inertia_inverse(x[1]) * (-(p.coriolis(x[1], qd) * qd_v) - fric);
        DVector::from_column_slice(&[x[2], x[3], acc[0], acc[1]])
    });
    let input = Arc::new(move |x: &DVector<f64>| {
        let minv = p.inertia_inverse(x[1]);
        let mut g = DMatrix::zeros(4, 2);
        g.view_mut((2, 0), (2, 2)).copy_from(&minv);
        g
    });
    let model = SystemModel::new("manipulator", 4, 2, drift, input);

    let generator = Arc::new(|xd: &DVector<f64>| {
        DVector::from_column_slice(&[xd[2], xd[3], -4.0 * xd[0], -9.0 * xd[1]])
    });
    let closed = |t: f64| {
        DVector::from_column_slice(&[
            0.5 * (2.0 * t).cos(),
            0.33 * (3.0 * t).cos(),
            -(2.0 * t).sin(),
            -0.99 * (3.0 * t).sin(),
        ])
    };
    // the signal is 2π-periodic
    let bound_d = (0..=200_000)
        .map(|k| closed(k as f64 * std::f64::consts::TAU / 200_000.0).norm())
        .fold(0.0, f64::max)
        * (1.0 + 1e-6);
    let traj = DesiredTrajectoryModel::new(generator, bound_d, closed(0.0))
        .with_closed_form(Arc::new(closed));
    (model, traj)
}
