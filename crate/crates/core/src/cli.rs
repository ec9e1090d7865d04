//! JSON run configuration and the `adp` subcommands.
//!
//! Every subcommand reads one config file, writes its artifacts into the output
//! directory and maps the outcome to an exit code: 0 when everything checked
//! passes, 2 when a monitor, a gain condition or the selection fails, 1 on any
//! configuration or I/O error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::actor_critic::{
    manipulator_probe, regressor, AdaptationGains, LearnerState, ProbingSignal,
};
use crate::gain_toolkit::{
    assess_gains, ball_samples, compute_constants, default_xi, estimate_bounds, select_gains,
    ultimate_bound, ApproximationSpec, BoundEstimates, CompactSetSpec, ConditionReport,
    ExcitationSpec, SelectionOptions,
};
use crate::lq_oracle::{closed_loop_spectrum, ideal_weights, solve_care};
use crate::sim_engine::{
    monitor_report, pe_metric_records, run_episode, BellmanMode, MonitorCheck, MonitorReport,
    MonitorSpec, OracleReference, Problem, RunMetadata, SimConfig, TrajectoryLog,
};
use crate::system_model::{
    make_linear_benchmark, make_manipulator_benchmark, DesiredTrajectoryModel, SystemModel,
};
use crate::tracking_transform::{local_cost, ConcatenatedState, CostWeights};
use crate::value_approximator::{manipulator_basis, policy, quadratic_basis, BasisSet};
use crate::{linalg, Error, Result};

// ---------------------------------------------------------------------------
// configuration

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub benchmark: BenchmarkConfig,
    pub basis: BasisConfig,
    pub cost: CostConfig,
    pub gains: AdaptationGains,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisConfig>,
    #[serde(default)]
    pub seed: u64,
}

/// Matrices are row-major nested arrays.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BenchmarkConfig {
    /// `x' = A x + B u`, `x_d' = S x_d`; `S` and `x_d0` default to zero.
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        xd0: Option<Vec<f64>>,
    },
    Manipulator,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BasisConfig {
    Quadratic {
        #[serde(default)]
        include_cross_xd: bool,
    },
    Manipulator23,
    Explicit {
        exponents: Vec<Vec<u32>>,
        #[serde(default = "half")]
        scale: f64,
    },
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

/// A scalar fills every entry.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightInit {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl WeightInit {
    fn build(&self, len: usize, name: &str) -> Result<DVector<f64>> {
        match self {
            WeightInit::Scalar(v) => Ok(DVector::from_element(len, *v)),
            WeightInit::Vector(v) if v.len() == len => Ok(DVector::from_column_slice(v)),
            WeightInit::Vector(v) => Err(Error::Dimension(format!(
                "learner.{name} has {} entries, basis has {len}",
                v.len()
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub w_c0: WeightInit,
    pub w_a0: WeightInit,
    /// `Γ(0) = gamma0 I`.
    pub gamma0: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            w_c0: WeightInit::Scalar(0.0),
            w_a0: WeightInit::Scalar(0.0),
            gamma0: 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProbeConfig {
    /// Six sinusoids per input channel.
    Default {
        amplitude: f64,
        cutoff: f64,
    },
    /// The two-link arm probe.
    Manipulator {
        cutoff: f64,
    },
    Custom(ProbingSignal),
    #[default]
    Off,
}

impl ProbeConfig {
    fn build(&self, m: usize) -> ProbingSignal {
        match self {
            ProbeConfig::Default { amplitude, cutoff } => {
                ProbingSignal::default_for(m, *amplitude, *cutoff)
            }
            ProbeConfig::Manipulator { cutoff } => manipulator_probe(*cutoff),
            ProbeConfig::Custom(s) => s.clone(),
            ProbeConfig::Off => ProbingSignal::off(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub horizon: f64,
    pub x0: Vec<f64>,
    #[serde(default = "one")]
    pub log_stride: usize,
    #[serde(default)]
    pub bellman_mode: BellmanMode,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderRung {
    pub basis: BasisConfig,
    pub eps_prime_bar: f64,
}

/// Inputs of the stability analysis. Unset excitation levels are measured from
/// the configured simulation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excitation: Option<ExcitationSpec>,
    /// Window for the measured excitation level. Defaults to half the largest
    /// window the gain-matrix condition admits.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pe_window: Option<f64>,
    pub set: CompactSetSpec,
    /// Take the basis as exact and the ideal weights from the Riccati solution
    /// when the benchmark is linear.
    pub use_oracle: bool,
    pub eps_bar: f64,
    pub eps_prime_bar: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_bar: Option<f64>,
    /// Skips sampling altogether.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundEstimates>,
    pub iota_inflation: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ladder: Vec<LadderRung>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monitor_radius: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            z0: None,
            xi1: None,
            xi2: None,
            excitation: None,
            pe_window: None,
            set: CompactSetSpec::default(),
            use_oracle: true,
            eps_bar: 0.0,
            eps_prime_bar: 0.0,
            w_bar: None,
            bounds: None,
            iota_inflation: 1.0,
            ladder: Vec::new(),
            monitor_radius: None,
        }
    }
}

fn matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let m = linalg::from_rows(rows).map_err(|e| Error::Config(format!("{name}: {e}")))?;
    if m.is_empty() {
        return Err(Error::Config(format!("{name} is empty")));
    }
    Ok(m)
}

impl BasisConfig {
    pub fn build(&self, n: usize) -> Result<BasisSet> {
        match self {
            BasisConfig::Quadratic { include_cross_xd } => {
                Ok(quadratic_basis(n, *include_cross_xd))
            }
            BasisConfig::Manipulator23 => Ok(manipulator_basis()),
            BasisConfig::Explicit { exponents, scale } => BasisSet::new(exponents.clone(), *scale),
        }
    }

    fn from_basis(b: &BasisSet) -> Self {
        BasisConfig::Explicit {
            exponents: b.exponents().to_vec(),
            scale: b.scale(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a config file; parse errors carry the file name, line and column.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// JSON Schema of [`RunConfig`], published alongside the binary.
pub const CONFIG_SCHEMA: &str = include_str!("../config.schema.json");

// ---------------------------------------------------------------------------
// scenario assembly

/// Everything a subcommand needs, built once from a config.
pub struct Scenario {
    pub config: RunConfig,
    pub model: SystemModel,
    pub traj: DesiredTrajectoryModel,
    pub basis: BasisSet,
    pub weights: CostWeights,
    pub gains: AdaptationGains,
    /// `(A, B)` for linear benchmarks.
    pub linear: Option<(DMatrix<f64>, DMatrix<f64>)>,
    /// Riccati solution and ideal weights when the oracle applies.
    pub oracle: Option<OracleReference>,
    pub sim: SimConfig,
}

impl Scenario {
    pub fn build(config: RunConfig) -> Result<Self> {
        let (model, traj, linear) = match &config.benchmark {
            BenchmarkConfig::Linear { a, b, s, xd0 } => {
                let a = matrix(a, "benchmark.a")?;
                let b = matrix(b, "benchmark.b")?;
                let n = a.nrows();
                let s = match s {
                    Some(s) => matrix(s, "benchmark.s")?,
                    None => DMatrix::zeros(n, n),
                };
                let xd0 = xd0
                    .as_ref()
                    .map_or_else(|| DVector::zeros(n), |v| DVector::from_column_slice(v));
                let (model, traj) = make_linear_benchmark(&a, &b, &s, &xd0)?;
                (model, traj, Some((a, b)))
            }
            BenchmarkConfig::Manipulator => {
                let (model, traj) = make_manipulator_benchmark();
                (model, traj, None)
            }
        };
        let n = model.state_dim();
        let basis = config.basis.build(n)?;
        if basis.input_dim() != 2 * n {
            return Err(Error::BasisMismatch(format!(
                "basis acts on dimension {}, concatenated state has {}",
                basis.input_dim(),
                2 * n
            )));
        }
        let weights = CostWeights::new(
            matrix(&config.cost.q, "cost.q")?,
            matrix(&config.cost.r, "cost.r")?,
        )?;
        if weights.q().nrows() != n || weights.r().nrows() != model.input_dim() {
            return Err(Error::Dimension(format!(
                "cost expects Q {n}x{n} and R {m}x{m}",
                m = model.input_dim()
            )));
        }
        let gains = config.gains;
        gains.validate()?;

        let use_oracle = config.analysis.as_ref().is_none_or(|a| a.use_oracle);
        let oracle = match &linear {
            Some((a, b)) if use_oracle => solve_care(a, b, weights.q(), weights.r())
                .and_then(|sol| {
                    ideal_weights(&sol.p, &basis).map(|w| OracleReference { p: sol.p, w: w.w })
                })
                .map_err(|e| log::info!("oracle not used: {e}"))
                .ok(),
            _ => None,
        };

        let nb = basis.len();
        let l = &config.learner;
        let learner0 = LearnerState::new(
            l.w_c0.build(nb, "w_c0")?,
            l.w_a0.build(nb, "w_a0")?,
            DMatrix::identity(nb, nb) * l.gamma0,
        )?;
        let s = &config.sim;
        let mut sim = SimConfig::new(
            s.dt,
            s.horizon,
            config.probe.build(model.input_dim()),
            DVector::from_column_slice(&s.x0),
            learner0,
        );
        sim.log_stride = s.log_stride;
        sim.bellman_mode = s.bellman_mode;
        sim.oracle = oracle.clone();
        sim.metadata = RunMetadata {
            config_hash: config.hash(),
            seed: config.seed,
        };
        let scenario = Self {
            config,
            model,
            traj,
            basis,
            weights,
            gains,
            linear,
            oracle,
            sim,
        };
        scenario.sim.validate(&scenario.problem())?;
        Ok(scenario)
    }

    pub fn problem(&self) -> Problem<'_> {
        Problem {
            model: &self.model,
            traj: &self.traj,
            basis: &self.basis,
            weights: &self.weights,
            gains: &self.gains,
        }
    }

    pub fn analysis(&self) -> AnalysisConfig {
        self.config.analysis.clone().unwrap_or_default()
    }

    pub fn compact_set(&self) -> CompactSetSpec {
        let mut set = self.analysis().set;
        set.seed = self.config.seed;
        set
    }

    fn approximation(&self) -> ApproximationSpec {
        let a = self.analysis();
        ApproximationSpec {
            oracle_p: self.oracle.as_ref().map(|o| o.p.clone()),
            eps_bar: a.eps_bar,
            eps_prime_bar: a.eps_prime_bar,
            w_bar: a.w_bar,
        }
    }

    /// `‖[e(0); W - Ŵ_c(0); W - Ŵ_a(0)]‖` with the oracle, `‖e(0)‖` without.
    pub fn default_z0(&self) -> f64 {
        let e0 = (&self.sim.x0 - self.traj.initial_xd()).norm_squared();
        let l = &self.sim.learner0;
        let w = self.oracle.as_ref().map_or(0.0, |o| {
            (&o.w - &l.w_c).norm_squared() + (&o.w - &l.w_a).norm_squared()
        });
        (e0 + w).sqrt()
    }

    pub fn z0(&self) -> f64 {
        self.analysis().z0.unwrap_or_else(|| self.default_z0())
    }

    pub fn xi(&self, bounds: &BoundEstimates) -> (f64, f64) {
        let a = self.analysis();
        let (d1, d2) = default_xi(bounds);
        (a.xi1.unwrap_or(d1), a.xi2.unwrap_or(d2))
    }

    /// Excitation levels attained by a simulated run: the Γ spectrum over the
    /// whole run and the PE level over the probing phase.
    pub fn measured_excitation(&self, log: &TrajectoryLog) -> ExcitationSpec {
        let s = log
            .summary
            .clone()
            .unwrap_or_else(|| log.summarize(self.sim.horizon, None));
        let (phi_lo, phi_hi) = (s.phi_lo_attained, s.phi_hi_attained);
        let t_window = self.analysis().pe_window.unwrap_or_else(|| {
            let g = &self.gains;
            0.5 * g.nu * phi_lo / ((6.0 * self.basis.len() as f64).sqrt() * g.eta_c * phi_hi)
        });
        let probing: Vec<_> = if log.probe_cutoff > 0.0 {
            log.records
                .iter()
                .filter(|r| r.t <= log.probe_cutoff)
                .cloned()
                .collect()
        } else {
            log.records.clone()
        };
        let (psi_lo, _) = pe_metric_records(&probing, t_window);
        ExcitationSpec {
            phi_lo,
            phi_hi,
            psi_lo,
            t_window,
        }
    }

    /// Configured excitation, or one measured from a pilot run of the configured simulation.
    pub fn excitation(&self) -> Result<ExcitationSpec> {
        match self.analysis().excitation {
            Some(x) => Ok(x),
            None => {
                log::info!("measuring excitation from a pilot run");
                let log = run_episode(&self.sim, &self.problem())?;
                Ok(self.measured_excitation(&log))
            }
        }
    }

    pub fn bounds(&self, excitation: &ExcitationSpec) -> Result<BoundEstimates> {
        if let Some(b) = self.analysis().bounds {
            return Ok(b);
        }
        estimate_bounds(
            &self.model,
            &self.traj,
            &self.basis,
            &self.weights,
            &self.compact_set(),
            &self.approximation(),
            excitation,
        )
    }
}

// ---------------------------------------------------------------------------
// outputs

/// Writes through a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
# Plots tracking error, Bellman error and weight traces from trajectory.csv.
import csv
import os
import sys

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "trajectory.csv")
with open(path) as fh:
    rows = list(csv.DictReader(fh))
cols = rows[0].keys()
t = [float(r["t"]) for r in rows]


def series(prefix):
    names = [c for c in cols if c.startswith(prefix) and c[len(prefix):].isdigit()]
    return {c: [float(r[c]) for r in rows] for c in names}


fig, ax = plt.subplots(4, 1, figsize=(8, 10), sharex=True)
for name, v in series("e_").items():
    ax[0].plot(t, v, label=name)
ax[0].set_ylabel("e")
ax[0].legend(loc="upper right", fontsize="small")
ax[1].plot(t, [float(r["delta"]) for r in rows])
ax[1].set_ylabel("delta")
for v in series("wc_").values():
    ax[2].plot(t, v)
ax[2].set_ylabel("W_c")
for v in series("wa_").values():
    ax[3].plot(t, v)
ax[3].set_ylabel("W_a")
ax[3].set_xlabel("t [s]")
fig.tight_layout()
out = os.path.join(os.path.dirname(os.path.abspath(path)), "trajectory.png")
fig.savefig(out, dpi=120)
print(out)
"#;

/// Outcome of a subcommand that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    fn of(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }

    pub fn code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 2,
        }
    }
}

/// Errors that mean "ran, but the answer is negative" rather than "could not run".
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::SelectionFailed(_)
        | Error::OracleUnavailable(_)
        | Error::ConditionsNotMet(_)
        | Error::TWindowTooLarge { .. }
        | Error::NumericalBlowup { .. }
        | Error::GainMatrixDegenerate(_) => 2,
        _ => 1,
    }
}

// ---------------------------------------------------------------------------
// subcommands

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub summary: crate::sim_engine::Summary,
    pub monitors: MonitorReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excitation: Option<ExcitationSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundEstimates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ultimate_bound: Option<f64>,
}

/// Simulates the episode and evaluates the monitors. With an analysis section
/// the ultimate bound and, if configured, the containment radius are checked too.
pub fn run_and_monitor(sc: &Scenario) -> Result<(TrajectoryLog, RunReport)> {
    let log = run_episode(&sc.sim, &sc.problem())?;
    let summary = log.summary.clone().expect("episode summary");
    let mut extra = Vec::new();
    let (spec, excitation, bounds, ub) = match &sc.config.analysis {
        None => (
            MonitorSpec {
                d: Some(sc.traj.bound_d()),
                ..MonitorSpec::default()
            },
            None,
            None,
            None,
        ),
        Some(a) => {
            let excitation = a.excitation.unwrap_or_else(|| sc.measured_excitation(&log));
            let bounds = sc.bounds(&excitation)?;
            let (xi1, xi2) = sc.xi(&bounds);
            let mut spec = MonitorSpec {
                phi_bounds: Some((bounds.phi_lo, bounds.phi_hi)),
                ultimate_bound: None,
                d: Some(bounds.d),
                radius: a.monitor_radius.or(Some(sc.compact_set().radius)),
            };
            let mut ub = None;
            match compute_constants(&bounds, &sc.gains, &sc.weights, sc.z0(), xi1, xi2) {
                Ok(c) => match ultimate_bound(&c) {
                    Ok(b) => {
                        spec.ultimate_bound = Some(b);
                        ub = Some(b);
                    }
                    Err(e) => extra.push(MonitorCheck {
                        name: "ultimate_bound",
                        passed: false,
                        margin: c.varpi11,
                        detail: format!("bound undefined: {e}"),
                    }),
                },
                Err(Error::TWindowTooLarge { denominator }) => extra.push(MonitorCheck {
                    name: "stability_constants",
                    passed: false,
                    margin: denominator,
                    detail: format!(
                        "window T = {:.6e} too long for the gains: 1 - 6N(eta_c phi_hi T)^2/(nu phi_lo)^2 = {denominator:.6e}",
                        bounds.t_window
                    ),
                }),
                Err(e) => return Err(e),
            }
            (spec, Some(excitation), Some(bounds), ub)
        }
    };
    let mut monitors = monitor_report(&log, &spec);
    monitors.checks.extend(extra);
    Ok((
        log,
        RunReport {
            summary,
            monitors,
            excitation,
            bounds,
            ultimate_bound: ub,
        },
    ))
}

fn run_cmd(sc: &Scenario, out: &Path, w: &mut String) -> Result<Outcome> {
    let (log, report) = run_and_monitor(sc)?;
    write_atomic(&out.join("trajectory.csv"), log.to_csv().as_bytes())?;
    write_atomic(
        &out.join("summary.json"),
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    let mut txt = report.summary.to_key_value();
    if let Some(b) = report.ultimate_bound {
        let _ = writeln!(txt, "ultimate_bound={b}");
    }
    for c in &report.monitors.checks {
        let _ = writeln!(
            txt,
            "monitor.{}={}",
            c.name,
            if c.passed { "pass" } else { "fail" }
        );
    }
    write_atomic(&out.join("summary.txt"), txt.as_bytes())?;
    write_atomic(&out.join("plot.py"), PLOT_SCRIPT.as_bytes())?;
    w.push_str(&txt);
    let _ = write!(w, "{}", report.monitors);
    let ok = report.monitors.all_passed();
    if !ok {
        let _ = writeln!(
            w,
            "failing monitors: {}",
            report.monitors.failed().join(", ")
        );
    }
    let _ = writeln!(w, "wrote {}", out.display());
    Ok(Outcome::of(ok))
}

/// The report that `check-gains` prints.
pub fn check_gains_report(sc: &Scenario) -> Result<(BoundEstimates, ConditionReport)> {
    let excitation = sc.excitation()?;
    let bounds = sc.bounds(&excitation)?;
    let (xi1, xi2) = sc.xi(&bounds);
    let report = assess_gains(&sc.gains, &bounds, &sc.weights, sc.z0(), xi1, xi2)?;
    Ok((bounds, report))
}

fn check_gains_cmd(sc: &Scenario, out: &Path, w: &mut String) -> Result<Outcome> {
    let (bounds, report) = check_gains_report(sc)?;
    write_atomic(&out.join("conditions.csv"), report.to_csv().as_bytes())?;
    let json = serde_json::json!({ "bounds": bounds, "constants": report.constants });
    write_atomic(
        &out.join("bounds.json"),
        serde_json::to_string_pretty(&json)?.as_bytes(),
    )?;
    let _ = write!(w, "{report}");
    let failures = report.failures();
    if !failures.is_empty() {
        let _ = writeln!(w, "failing conditions: {}", failures.join(", "));
    }
    Ok(Outcome::of(report.all_pass()))
}

fn select_gains_cmd(sc: &Scenario, out: &Path, w: &mut String) -> Result<Outcome> {
    let a = sc.analysis();
    let z0 =
        a.z0.ok_or_else(|| Error::Config("select-gains needs analysis.z0".into()))?;
    let excitation = sc.excitation()?;
    let mut opts = SelectionOptions::new(sc.approximation(), excitation);
    opts.iota_inflation = a.iota_inflation;
    opts.xi = match (a.xi1, a.xi2) {
        (Some(x1), Some(x2)) => Some((x1, x2)),
        (None, None) => None,
        _ => {
            return Err(Error::Config(
                "set both analysis.xi1 and analysis.xi2 or neither".into(),
            ))
        }
    };
    for rung in &a.ladder {
        opts.ladder
            .push((rung.basis.build(sc.model.state_dim())?, rung.eps_prime_bar));
    }
    let res = select_gains(
        z0,
        &sc.model,
        &sc.traj,
        &sc.basis,
        &sc.gains,
        &sc.weights,
        &sc.compact_set(),
        &opts,
    )?;
    for s in &res.stages {
        let _ = writeln!(
            w,
            "stage {}: radius {:.6e}  Zbar {:.6e}  basis {:>3}  {}",
            s.stage,
            s.radius,
            s.z_bar,
            s.basis_size,
            if s.accepted { "accepted" } else { "rejected" }
        );
    }
    let g = &res.gains;
    let _ = writeln!(w, "terminated in stage {}", res.iterations);
    let _ = writeln!(
        w,
        "gains: eta_c {} eta_a1 {} eta_a2 {} nu {} lambda {}",
        g.eta_c, g.eta_a1, g.eta_a2, g.nu, g.lambda
    );
    let _ = writeln!(w, "radius {:.6e}  Zbar {:.6e}", res.radius, res.z_bar);
    let _ = write!(w, "{}", res.report);

    let mut cfg = sc.config.clone();
    cfg.gains = res.gains;
    if res.iterations == 3 {
        cfg.basis = BasisConfig::from_basis(&res.basis);
        cfg.learner = LearnerConfig {
            w_c0: WeightInit::Scalar(0.0),
            w_a0: WeightInit::Scalar(0.0),
            ..cfg.learner
        };
    }
    let mut an = a.clone();
    an.set.radius = res.radius;
    an.excitation = Some(excitation);
    an.xi1 = Some(res.constants.xi1);
    an.xi2 = Some(res.constants.xi2);
    an.iota_inflation = 1.0;
    an.ladder.clear();
    if res.iterations == 3 {
        an.eps_prime_bar = res.bounds.eps_prime_bar;
    }
    cfg.analysis = Some(an);
    write_atomic(
        &out.join("gains.json"),
        serde_json::to_string_pretty(&cfg)?.as_bytes(),
    )?;
    write_atomic(&out.join("conditions.csv"), res.report.to_csv().as_bytes())?;
    write_atomic(
        &out.join("selection.json"),
        serde_json::to_string_pretty(&res)?.as_bytes(),
    )?;
    let ok = res.report.all_pass();
    if !ok {
        let _ = writeln!(
            w,
            "selected set does not satisfy: {}",
            res.report.failures().join(", ")
        );
    }
    let _ = writeln!(w, "wrote {}", out.join("gains.json").display());
    Ok(Outcome::of(ok))
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub p: Vec<Vec<f64>>,
    pub residual: f64,
    pub w: Vec<f64>,
    pub closed_loop: Vec<(f64, f64)>,
    pub samples: usize,
    pub radius: f64,
    pub max_abs_delta: f64,
}

/// Riccati solution, ideal weights, closed-loop spectrum and the largest Bellman
/// error of the ideal weights over the sampled compact set.
pub fn oracle_report(sc: &Scenario) -> Result<OracleReport> {
    let (a, b) = sc.linear.as_ref().ok_or_else(|| {
        Error::OracleUnavailable(format!(
            "the {} benchmark is nonlinear; the Riccati oracle only covers linear benchmarks",
            sc.model.name()
        ))
    })?;
    let sol = solve_care(a, b, sc.weights.q(), sc.weights.r())?;
    let w = ideal_weights(&sol.p, &sc.basis)?.w;
    let set = sc.compact_set();
    let count = set.sample_count.min(10_000);
    let n = sc.model.state_dim();
    let samples = ball_samples(2 * n, set.radius, count, set.seed);
    let deltas = samples
        .par_iter()
        .map(|z| -> Result<f64> {
            let zeta = ConcatenatedState::from_flat(z)?;
            let mu = policy(&w, &sc.basis, &zeta, &sc.model, &sc.weights);
            let omega = regressor(&sc.basis, &zeta, &mu, &sc.model, &sc.traj)?;
            Ok((w.dot(&omega) + local_cost(&zeta, &mu, &sc.weights)).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(OracleReport {
        p: linalg::to_rows(&sol.p),
        residual: sol.residual,
        w: w.as_slice().to_vec(),
        closed_loop: closed_loop_spectrum(a, b, sc.weights.r(), &sol.p),
        samples: deltas.len(),
        radius: set.radius,
        max_abs_delta: deltas.iter().copied().fold(0.0, f64::max),
    })
}

fn oracle_cmd(sc: &Scenario, out: &Path, w: &mut String) -> Result<Outcome> {
    let r = oracle_report(sc)?;
    for (i, row) in r.p.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.10}")).collect();
        let _ = writeln!(
            w,
            "{} [{}]",
            if i == 0 { "P =" } else { "   " },
            cells.join(", ")
        );
    }
    let _ = writeln!(w, "riccati residual = {:.3e}", r.residual);
    let cells: Vec<String> = r.w.iter().map(|v| format!("{v:.10}")).collect();
    let _ = writeln!(w, "W = [{}]", cells.join(", "));
    let eig: Vec<String> = r
        .closed_loop
        .iter()
        .map(|(re, im)| {
            if *im == 0.0 {
                format!("{re:.8}")
            } else {
                format!("{re:.8}{im:+.8}i")
            }
        })
        .collect();
    let _ = writeln!(w, "closed-loop eigenvalues = [{}]", eig.join(", "));
    let _ = writeln!(
        w,
        "max |delta| = {:.3e} over {} samples of radius {}",
        r.max_abs_delta, r.samples, r.radius
    );
    write_atomic(
        &out.join("oracle.json"),
        serde_json::to_string_pretty(&r)?.as_bytes(),
    )?;
    Ok(Outcome::Pass)
}

// ---------------------------------------------------------------------------
// dispatch

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate one episode, write trajectory.csv, summary and plot script, check the monitors.
    Run,
    /// Evaluate the sufficient gain conditions.
    CheckGains,
    /// Run the three-stage compact-set selection and write gains.json.
    SelectGains,
    /// Riccati solution, ideal weights and Bellman residual on a linear benchmark.
    Oracle,
}

#[derive(Debug, Parser)]
#[command(
    name = "adp",
    version,
    about = "Approximate-optimal tracking: simulate, certify and select gains"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// `dotted.path:v1,v2,...` fans the config out over the listed values.
    #[arg(long, global = true)]
    pub sweep: Option<String>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default)]
pub struct CliOptions {
    pub out: PathBuf,
    pub sweep: Option<String>,
    pub seed: Option<u64>,
}

fn run_one(cmd: Command, cfg: RunConfig, out: &Path) -> (i32, String) {
    let mut w = String::new();
    let res = Scenario::build(cfg).and_then(|sc| match cmd {
        Command::Run => run_cmd(&sc, out, &mut w),
        Command::CheckGains => check_gains_cmd(&sc, out, &mut w),
        Command::SelectGains => select_gains_cmd(&sc, out, &mut w),
        Command::Oracle => oracle_cmd(&sc, out, &mut w),
    });
    match res {
        Ok(o) => (o.code(), w),
        Err(e) => {
            let _ = writeln!(w, "error: {e}");
            (exit_code_for(&e), w)
        }
    }
}

fn set_path(root: &mut serde_json::Value, path: &str, value: serde_json::Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        let last = k + 1 == parts.len();
        cur = match cur {
            serde_json::Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string())
                    .or_insert_with(|| serde_json::Value::Object(Default::default()))
            }
            serde_json::Value::Array(items) => {
                let i: usize = part.parse().map_err(|_| {
                    Error::Config(format!("sweep path {path}: {part} is not an index"))
                })?;
                let len = items.len();
                let slot = items.get_mut(i).ok_or_else(|| {
                    Error::Config(format!("sweep path {path}: index {i} out of range {len}"))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(Error::Config(format!(
                    "sweep path {path} does not name a config entry"
                )))
            }
        };
    }
    Err(Error::Config("empty sweep path".into()))
}

/// Expands `path:v1,v2,...` into one config per value.
pub fn expand_sweep(config: &RunConfig, sweep: &str) -> Result<Vec<(String, RunConfig)>> {
    let (path, values) = sweep
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("sweep must look like path:v1,v2, got {sweep}")))?;
    let base = serde_json::to_value(config)?;
    let mut out = Vec::new();
    for raw in values.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let v: serde_json::Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut doc = base.clone();
        set_path(&mut doc, path, v)?;
        let cfg: RunConfig = serde_json::from_value(doc)
            .map_err(|e| Error::Config(format!("sweep {path}={raw}: {e}")))?;
        let label: String = format!("{path}={raw}")
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || "._=-".contains(c) {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        out.push((label, cfg));
    }
    if out.is_empty() {
        return Err(Error::Config(format!("sweep {path} has no values")));
    }
    Ok(out)
}

/// Runs a subcommand on a config file and returns the exit code; diagnostics go
/// to standard output (results) and standard error (errors).
pub fn execute(cmd: Command, config_path: &Path, opts: &CliOptions) -> i32 {
    let (code, text) = execute_captured(cmd, config_path, opts);
    if code == 1 {
        eprint!("{text}");
    } else {
        print!("{text}");
    }
    code
}

/// Like [`execute`] but returns the text instead of printing it.
pub fn execute_captured(cmd: Command, config_path: &Path, opts: &CliOptions) -> (i32, String) {
    let mut cfg = match RunConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => return (1, format!("error: {e}\n")),
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let Some(sweep) = &opts.sweep else {
        return run_one(cmd, cfg, &opts.out);
    };
    let variants = match expand_sweep(&cfg, sweep) {
        Ok(v) => v,
        Err(e) => return (1, format!("error: {e}\n")),
    };
    let results: Vec<(String, i32, String)> = variants
        .into_par_iter()
        .map(|(label, cfg)| {
            let (code, text) = run_one(cmd, cfg, &opts.out.join(&label));
            (label, code, text)
        })
        .collect();
    let mut text = String::new();
    let mut code = 0;
    for (label, c, t) in &results {
        let _ = writeln!(text, "== {label} (exit {c})");
        text.push_str(t);
        code = match (code, *c) {
            (1, _) | (_, 1) => 1,
            (a, b) => a.max(b),
        };
    }
    (code, text)
}

pub fn cmd_run(config_path: &Path, opts: &CliOptions) -> i32 {
    execute(Command::Run, config_path, opts)
}

pub fn cmd_check_gains(config_path: &Path, opts: &CliOptions) -> i32 {
    execute(Command::CheckGains, config_path, opts)
}

pub fn cmd_select_gains(config_path: &Path, opts: &CliOptions) -> i32 {
    execute(Command::SelectGains, config_path, opts)
}

pub fn cmd_oracle(config_path: &Path, opts: &CliOptions) -> i32 {
    execute(Command::Oracle, config_path, opts)
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("ADP_LOG_LEVEL", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

/// Entry point of the `adp` binary.
pub fn main() -> i32 {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let Some(config) = cli.config else {
        eprintln!("error: --config <path> is required");
        return 1;
    };
    let opts = CliOptions {
        out: cli.out,
        sweep: cli.sweep,
        seed: cli.seed,
    };
    execute(cli.command, &config, &opts)
}
