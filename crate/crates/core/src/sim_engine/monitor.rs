use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use super::log::{LogRecord, TrajectoryLog};
use crate::gain_toolkit::{ultimate_bound, BoundEstimates, StabilityConstants};
use crate::linalg;

/// Smallest eigenvalue of `∫ψψᵀ` over sliding windows of length `window_t`
/// (trapezoidal rule on the logged samples) and the start of the worst window.
pub fn pe_metric(log: &TrajectoryLog, window_t: f64) -> (f64, f64) {
    pe_metric_records(&log.records, window_t)
}

pub fn pe_metric_records(records: &[LogRecord], window_t: f64) -> (f64, f64) {
    if records.len() < 2 {
        return (0.0, records.first().map_or(0.0, |r| r.t));
    }
    let nb = records[0].psi.len();
    let panel = |k: usize| -> DMatrix<f64> {
        let (a, b) = (&records[k], &records[k + 1]);
        (&a.psi * a.psi.transpose() + &b.psi * b.psi.transpose()) * (0.5 * (b.t - a.t))
    };
    let tol = 1e-9 * window_t.max(1e-300);
    let span = records[records.len() - 1].t - records[0].t;
    if span + tol < window_t {
        let mut acc = DMatrix::zeros(nb, nb);
        for k in 0..records.len() - 1 {
            acc += panel(k);
        }
        return (linalg::sym_eigenvalues(&acc)[0].max(0.0), records[0].t);
    }
    let mut acc = DMatrix::zeros(nb, nb);
    let mut j = 0;
    let mut worst = (f64::INFINITY, records[0].t);
    for i in 0..records.len() - 1 {
        let target = records[i].t + window_t - tol;
        while j < records.len() - 1 && records[j].t < target {
            acc += panel(j);
            j += 1;
        }
        if records[j].t < target {
            break;
        }
        let lam = linalg::sym_eigenvalues(&acc)[0].max(0.0);
        if lam < worst.0 {
            worst = (lam, records[i].t);
        }
        acc -= panel(i);
    }
    worst
}

/// Thresholds the monitors check against. Unset entries are skipped.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MonitorSpec {
    pub phi_bounds: Option<(f64, f64)>,
    pub ultimate_bound: Option<f64>,
    pub d: Option<f64>,
    pub radius: Option<f64>,
}

impl MonitorSpec {
    pub fn from_constants(
        bounds: &BoundEstimates,
        consts: &StabilityConstants,
        radius: Option<f64>,
    ) -> Self {
        Self {
            phi_bounds: Some((bounds.phi_lo, bounds.phi_hi)),
            ultimate_bound: ultimate_bound(consts).ok(),
            d: Some(bounds.d),
            radius,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorCheck {
    pub name: &'static str,
    pub passed: bool,
    pub margin: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MonitorReport {
    pub checks: Vec<MonitorCheck>,
}

impl MonitorReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<&MonitorCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for MonitorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<18} margin {:>14.6e}  {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.margin,
                c.detail
            )?;
        }
        Ok(())
    }
}

pub fn monitor_report(log: &TrajectoryLog, spec: &MonitorSpec) -> MonitorReport {
    let recs = &log.records;
    let mut checks = Vec::new();

    let gmin = recs
        .iter()
        .map(|r| r.gamma_min)
        .fold(f64::INFINITY, f64::min);
    let gmax = recs.iter().map(|r| r.gamma_max).fold(0.0, f64::max);
    checks.push(MonitorCheck {
        name: "gamma_positive",
        passed: gmin > 0.0,
        margin: gmin,
        detail: format!("min lambda_min(gamma) = {gmin:.6e}"),
    });

    let mut worst_ratio: f64 = 0.0;
    let mut violations = 0usize;
    for r in recs {
        let ratio = r.psi_norm * (log.nu * r.gamma_min).max(0.0).sqrt();
        if !(ratio <= 1.0 + 1e-12) || r.gamma_min <= 0.0 {
            violations += 1;
        }
        worst_ratio = worst_ratio.max(ratio);
    }
    checks.push(MonitorCheck {
        name: "psi_bound",
        passed: violations == 0,
        margin: 1.0 - worst_ratio,
        detail: format!(
            "max |psi| sqrt(nu lambda_min) = {worst_ratio:.6e}, {violations} violations"
        ),
    });

    if let Some((lo, hi)) = spec.phi_bounds {
        let margin = (gmin - lo).min(hi - gmax);
        checks.push(MonitorCheck {
            name: "gamma_spectrum",
            passed: margin >= 0.0,
            margin,
            detail: format!("attained [{gmin:.6e}, {gmax:.6e}] vs [{lo:.6e}, {hi:.6e}]"),
        });
    }

    if let Some(bound) = spec.ultimate_bound {
        let max_e = log.tail(0.1).iter().map(|r| r.e.norm()).fold(0.0, f64::max);
        checks.push(MonitorCheck {
            name: "ultimate_bound",
            passed: max_e <= bound,
            margin: bound - max_e,
            detail: format!("max |e| over final 10% = {max_e:.6e}, bound {bound:.6e}"),
        });
    }

    if let Some(d) = spec.d {
        let max_xd = recs.iter().map(|r| r.xd.norm()).fold(0.0, f64::max);
        let tol = 1e-9 * (1.0 + d);
        checks.push(MonitorCheck {
            name: "trajectory_bound",
            passed: max_xd <= d + tol,
            margin: d - max_xd,
            detail: format!("max |x_d| = {max_xd:.6e}, d = {d:.6e}"),
        });
    }

    if let Some(radius) = spec.radius {
        let max_z = recs.iter().map(|r| r.z_norm).fold(0.0, f64::max);
        checks.push(MonitorCheck {
            name: "containment",
            passed: max_z <= radius,
            margin: radius - max_z,
            detail: format!("max |Z| = {max_z:.6e}, radius {radius:.6e}"),
        });
    }

    MonitorReport { checks }
}
