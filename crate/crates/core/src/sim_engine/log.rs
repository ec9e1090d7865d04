use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{signals, JointState, Problem, SimConfig};
use crate::linalg;
use crate::Result;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub x: DVector<f64>,
    pub xd: DVector<f64>,
    pub e: DVector<f64>,
    pub u: DVector<f64>,
    pub mu: DVector<f64>,
    pub delta: f64,
    pub omega_norm: f64,
    pub psi_norm: f64,
    pub w_c: DVector<f64>,
    pub w_a: DVector<f64>,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub psi: DVector<f64>,
    /// `‖[e; W̃_c; W̃_a]‖` when the ideal weights are known, `‖e‖` otherwise.
    pub z_norm: f64,
    /// `eᵀPe + ½W̃_cᵀΓ⁻¹W̃_c + ½W̃_aᵀW̃_a`, oracle runs only.
    pub v_l: Option<f64>,
    /// Distance of the integrated `x_d` from its closed form, when one exists.
    pub xd_drift: Option<f64>,
}

impl LogRecord {
    pub fn zeta(&self) -> DVector<f64> {
        let n = self.e.len();
        DVector::from_fn(2 * n, |i, _| if i < n { self.e[i] } else { self.xd[i - n] })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub steps: usize,
    pub horizon: f64,
    pub logged: usize,
    pub rms_delta_initial: f64,
    pub rms_delta_final: f64,
    pub max_e_final: f64,
    pub e_at_probe_cutoff: Option<f64>,
    pub phi_lo_attained: f64,
    pub phi_hi_attained: f64,
    pub max_xd_norm: f64,
    pub max_state_norm: f64,
    pub xd_drift_max: Option<f64>,
    pub w_c_final: Vec<f64>,
    pub w_a_final: Vec<f64>,
    pub w_c_rel_error: Option<f64>,
    pub w_a_rel_error: Option<f64>,
    pub config_hash: String,
    pub seed: u64,
}

impl Summary {
    /// Flat `key=value` lines; vectors are written element-wise.
    pub fn to_key_value(&self) -> String {
        let value = serde_json::to_value(self).expect("summary serializes");
        let mut out = String::new();
        if let serde_json::Value::Object(map) = value {
            for (k, v) in map {
                match v {
                    serde_json::Value::Array(items) => {
                        for (i, item) in items.iter().enumerate() {
                            let _ = writeln!(out, "{k}.{i}={item}");
                        }
                    }
                    serde_json::Value::String(s) => {
                        let _ = writeln!(out, "{k}={s}");
                    }
                    other => {
                        let _ = writeln!(out, "{k}={other}");
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryLog {
    pub records: Vec<LogRecord>,
    pub steps: usize,
    pub metadata: RunMetadata,
    pub nu: f64,
    pub probe_cutoff: f64,
    pub summary: Option<Summary>,
    n: usize,
    m: usize,
    n_basis: usize,
}

fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (s, k) = v.fold((0.0, 0usize), |(s, k), x| (s + x * x, k + 1));
    if k == 0 {
        0.0
    } else {
        (s / k as f64).sqrt()
    }
}

impl TrajectoryLog {
    pub(super) fn new(config: &SimConfig, problem: &Problem<'_>) -> Self {
        Self {
            records: Vec::new(),
            steps: 0,
            metadata: config.metadata.clone(),
            nu: problem.gains.nu,
            probe_cutoff: if config.probe.components.is_empty() {
                0.0
            } else {
                config.probe.cutoff_time
            },
            summary: None,
            n: problem.model.state_dim(),
            m: problem.model.input_dim(),
            n_basis: problem.basis.len(),
        }
    }

    /// Builds an empty log for externally assembled records.
    pub fn from_records(records: Vec<LogRecord>, nu: f64, probe_cutoff: f64) -> Self {
        let first = records.first();
        let n = first.map_or(0, |r| r.x.len());
        let m = first.map_or(0, |r| r.u.len());
        let n_basis = first.map_or(0, |r| r.w_c.len());
        Self {
            steps: records.len().saturating_sub(1),
            records,
            metadata: RunMetadata::default(),
            nu,
            probe_cutoff,
            summary: None,
            n,
            m,
            n_basis,
        }
    }

    pub(super) fn push(
        &mut self,
        state: &JointState,
        problem: &Problem<'_>,
        config: &SimConfig,
        t: f64,
    ) -> Result<()> {
        let s = signals(state, problem, &config.probe, config.bellman_mode, t)?;
        let l = &state.learner;
        let psi = &s.omega / s.rho.sqrt();
        let (gamma_min, gamma_max) = linalg::sym_extreme_eigenvalues(&l.gamma);
        let e = s.zeta.e.clone();
        let (z_norm, v_l) = match &config.oracle {
            Some(o) => {
                let wc = &o.w - &l.w_c;
                let wa = &o.w - &l.w_a;
                let z2 = e.norm_squared() + wc.norm_squared() + wa.norm_squared();
                let gamma_inv_wc = l
                    .gamma
                    .clone()
                    .cholesky()
                    .map(|c| c.solve(&wc))
                    .unwrap_or_else(|| DVector::from_element(wc.len(), f64::NAN));
                let v = e.dot(&(&o.p * &e)) + 0.5 * wc.dot(&gamma_inv_wc) + 0.5 * wa.norm_squared();
                (z2.sqrt(), Some(v))
            }
            None => (e.norm(), None),
        };
        let xd_drift = problem.traj.closed_form(t).map(|c| (&c - &state.xd).norm());
        self.records.push(LogRecord {
            t,
            x: state.x.clone(),
            xd: state.xd.clone(),
            e,
            u: s.u,
            mu: s.mu,
            delta: s.delta,
            omega_norm: s.omega.norm(),
            psi_norm: psi.norm(),
            w_c: l.w_c.clone(),
            w_a: l.w_a.clone(),
            gamma_min,
            gamma_max,
            psi,
            z_norm,
            v_l,
            xd_drift,
        });
        Ok(())
    }

    pub(super) fn finalize(&mut self, config: &SimConfig) {
        self.summary = Some(self.summarize(config.horizon, config.oracle.as_ref().map(|o| &o.w)));
    }

    /// Records with `t >= (1 - fraction) * t_end`.
    pub fn tail(&self, fraction: f64) -> &[LogRecord] {
        let t_end = self.records.last().map_or(0.0, |r| r.t);
        let cut = t_end * (1.0 - fraction);
        let start = self.records.partition_point(|r| r.t < cut);
        &self.records[start..]
    }

    /// Records with `t <= fraction * t_end`.
    pub fn head(&self, fraction: f64) -> &[LogRecord] {
        let t_end = self.records.last().map_or(0.0, |r| r.t);
        let end = self.records.partition_point(|r| r.t <= fraction * t_end);
        &self.records[..end]
    }

    pub fn summarize(&self, horizon: f64, ideal: Option<&DVector<f64>>) -> Summary {
        let last = self.records.last();
        let e_at_probe_cutoff = if self.probe_cutoff > 0.0 {
            self.records
                .iter()
                .min_by(|a, b| {
                    (a.t - self.probe_cutoff)
                        .abs()
                        .total_cmp(&(b.t - self.probe_cutoff).abs())
                })
                .map(|r| r.e.norm())
        } else {
            None
        };
        let drift: Vec<f64> = self.records.iter().filter_map(|r| r.xd_drift).collect();
        let rel = |w: Option<&DVector<f64>>| match (ideal, w) {
            (Some(ideal), Some(w)) if ideal.norm() > 0.0 => Some((w - ideal).norm() / ideal.norm()),
            _ => None,
        };
        Summary {
            steps: self.steps,
            horizon,
            logged: self.records.len(),
            rms_delta_initial: rms(self.head(0.1).iter().map(|r| r.delta)),
            rms_delta_final: rms(self.tail(0.1).iter().map(|r| r.delta)),
            max_e_final: self
                .tail(0.1)
                .iter()
                .map(|r| r.e.norm())
                .fold(0.0, f64::max),
            e_at_probe_cutoff,
            phi_lo_attained: self
                .records
                .iter()
                .map(|r| r.gamma_min)
                .fold(f64::INFINITY, f64::min),
            phi_hi_attained: self.records.iter().map(|r| r.gamma_max).fold(0.0, f64::max),
            max_xd_norm: self.records.iter().map(|r| r.xd.norm()).fold(0.0, f64::max),
            max_state_norm: self.records.iter().map(|r| r.x.norm()).fold(0.0, f64::max),
            xd_drift_max: if drift.is_empty() {
                None
            } else {
                Some(drift.iter().copied().fold(0.0, f64::max))
            },
            w_c_final: last.map_or_else(Vec::new, |r| r.w_c.as_slice().to_vec()),
            w_a_final: last.map_or_else(Vec::new, |r| r.w_a.as_slice().to_vec()),
            w_c_rel_error: rel(last.map(|r| &r.w_c)),
            w_a_rel_error: rel(last.map(|r| &r.w_a)),
            config_hash: self.metadata.config_hash.clone(),
            seed: self.metadata.seed,
        }
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec!["t".to_string()];
        let vec_cols = |cols: &mut Vec<String>, name: &str, len: usize| {
            for i in 0..len {
                cols.push(format!("{name}_{i}"));
            }
        };
        vec_cols(&mut cols, "x", self.n);
        vec_cols(&mut cols, "xd", self.n);
        vec_cols(&mut cols, "e", self.n);
        vec_cols(&mut cols, "zeta", 2 * self.n);
        vec_cols(&mut cols, "u", self.m);
        vec_cols(&mut cols, "mu", self.m);
        cols.extend(["delta", "omega_norm", "psi_norm"].map(String::from));
        vec_cols(&mut cols, "wc", self.n_basis);
        vec_cols(&mut cols, "wa", self.n_basis);
        cols.extend(["gamma_min", "gamma_max", "z_norm", "v_l"].map(String::from));
        vec_cols(&mut cols, "psi", self.n_basis);
        cols.join(",")
    }

    /// One row per logged step, floats with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        let mut row: Vec<String> = Vec::new();
        let f = |v: f64| format!("{v:.16e}");
        for r in &self.records {
            row.clear();
            row.push(f(r.t));
            for v in [&r.x, &r.xd, &r.e] {
                row.extend(v.iter().map(|&x| f(x)));
            }
            row.extend(r.zeta().iter().map(|&x| f(x)));
            row.extend(r.u.iter().map(|&x| f(x)));
            row.extend(r.mu.iter().map(|&x| f(x)));
            row.extend([f(r.delta), f(r.omega_norm), f(r.psi_norm)]);
            row.extend(r.w_c.iter().map(|&x| f(x)));
            row.extend(r.w_a.iter().map(|&x| f(x)));
            row.extend([f(r.gamma_min), f(r.gamma_max), f(r.z_norm)]);
            row.push(r.v_l.map_or_else(String::new, f));
            row.extend(r.psi.iter().map(|&x| f(x)));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}
