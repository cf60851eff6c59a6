//! Sweep execution: one generator per grid point, rates by diagonalization
//! and optionally by fitting, next to the closed-form predictions.

use std::time::Instant;

use purcell_core::fockspace::{Storage, TruncatedSpace};
use purcell_core::liouvillian::{build_blackbox, build_displaced, build_jc, GeneratorBundle};
use purcell_core::model::{displaced_frame, drive_for_photons, polariton_frame, DisplacedFrame, PolaritonFrame};
use purcell_core::perturbation::{
    diagnostics, gamma_coherent_analytic, gamma_jc_analytic, gamma_thermal_analytic, pt_coherent, pt_thermal,
    Gamma2Breakdown,
};
use purcell_core::spectral::{t1_rate_diag, t1_rate_fit};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Kind, ScenarioConfig};

/// Largest relative shift of Γ under cutoffs +2 that still counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-3;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub gamma_diag: Option<f64>,
    pub gamma_by_weight: Option<f64>,
    pub gamma_fit: Option<f64>,
    pub fit_residual: Option<f64>,
    pub gamma_pt: Option<f64>,
    pub gamma_analytic: Option<f64>,
    pub base: Option<f64>,
    pub nc_nc: Option<f64>,
    pub nc_cd: Option<f64>,
    pub cd_cd: Option<f64>,
    pub drive: Option<f64>,
    pub kappa_eff_nc: Option<f64>,
    pub gamma4_estimate: Option<f64>,
    pub regime: Option<String>,
    pub mode_label: Option<String>,
    pub converged: Option<bool>,
    pub convergence_shift: Option<f64>,
    /// `;`-separated guard and convergence flags.
    pub flags: String,
    pub t1_us: Option<f64>,
    /// Hard error for this point, if any.
    pub error: Option<String>,
    /// Not written to the CSV, so output stays byte-identical between runs.
    #[serde(skip)]
    pub wall_time: f64,
}

impl SweepRow {
    pub fn flag_list(&self) -> Vec<&str> {
        self.flags.split(';').filter(|s| !s.is_empty()).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub name: String,
    pub variable: String,
    pub cutoffs: [usize; 2],
    pub rows: usize,
    pub errors: usize,
    pub unconverged: usize,
    pub flagged: usize,
    pub wall_time_s: f64,
    pub row_wall_time_s: Vec<f64>,
}

impl Summary {
    pub fn ok(&self) -> bool {
        self.errors == 0
    }
}

enum Setup {
    Thermal(PolaritonFrame),
    Drive { frame: PolaritonFrame, dframe: DisplacedFrame },
    Jc,
}

fn setup(cfg: &ScenarioConfig, x: f64) -> purcell_core::Result<Setup> {
    let p = cfg.params_at(x);
    Ok(match cfg.kind() {
        Kind::Jc => Setup::Jc,
        Kind::Thermal => Setup::Thermal(polariton_frame(&p)?),
        Kind::Drive => {
            let omega_d = cfg.drive.as_ref().expect("validated").omega_d;
            let drive = drive_for_photons(&p, omega_d, x)?;
            Setup::Drive { frame: polariton_frame(&p)?, dframe: displaced_frame(&p, &drive)? }
        }
    })
}

fn bundle(cfg: &ScenarioConfig, x: f64, s: &Setup, dims: [usize; 2]) -> purcell_core::Result<GeneratorBundle> {
    let space = TruncatedSpace::new(&dims)?;
    match s {
        Setup::Thermal(f) => build_blackbox(f, &space, cfg.toggles, Storage::Sparse),
        Setup::Drive { dframe, .. } => build_displaced(dframe, &space, cfg.toggles, Storage::Sparse),
        Setup::Jc => build_jc(&cfg.params_at(x), &space, Storage::Sparse),
    }
}

fn put_breakdown(row: &mut SweepRow, b: &Gamma2Breakdown) {
    row.gamma_analytic = Some(b.total);
    row.base = Some(b.base);
    row.nc_nc = Some(b.nc_nc);
    row.nc_cd = Some(b.nc_cd);
    row.cd_cd = Some(b.cd_cd);
    row.drive = Some(b.drive);
    row.regime = Some(serde_json::to_value(b.regime).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
}

fn evaluate(cfg: &ScenarioConfig, index: usize, x: f64) -> purcell_core::Result<SweepRow> {
    let mut row = SweepRow { index, value: x, ..Default::default() };
    let mut flags: Vec<String> = Vec::new();
    let dims = [cfg.truncation.cavity, cfg.truncation.qubit];
    let s = setup(cfg, x)?;

    match &s {
        Setup::Thermal(f) => {
            let b = gamma_thermal_analytic(f)?;
            flags.extend(b.flags.iter().map(|f| f.to_string()));
            put_breakdown(&mut row, &b);
            let d = diagnostics(f)?;
            row.kappa_eff_nc = Some(d.kappa_eff_nc);
            row.gamma4_estimate = d.gamma4_estimate.is_finite().then_some(d.gamma4_estimate);
            flags.extend(d.flags.iter().map(|f| f.to_string()));
        }
        Setup::Drive { frame, dframe } => {
            let kc = cfg.drive.as_ref().and_then(|d| d.kappa_c_at_qubit);
            let b = gamma_coherent_analytic(dframe, frame, kc)?;
            flags.extend(b.flags.iter().map(|f| f.to_string()));
            put_breakdown(&mut row, &b);
            let d = diagnostics(frame)?;
            row.kappa_eff_nc = Some(d.kappa_eff_nc);
            flags.extend(d.flags.iter().map(|f| f.to_string()));
        }
        Setup::Jc => row.gamma_analytic = Some(gamma_jc_analytic(&cfg.params_at(x))?),
    }

    let b = bundle(cfg, x, &s, dims)?;
    let t1 = t1_rate_diag(&b)?;
    row.gamma_diag = Some(t1.gamma);
    row.gamma_by_weight = Some(t1.gamma_by_weight);
    row.mode_label = t1.mode.label.map(|l| format!("({},{},{})", l.m_c, l.m_a, l.k));
    if !t1.criteria_agree {
        flags.push("mode_criteria_disagree".into());
    }
    if t1.steady.clipped {
        flags.push("steady_state_clipped".into());
    }

    if cfg.protocol.wants_fit() {
        let fit = t1_rate_fit(&b, cfg.protocol.horizon, cfg.protocol.window)?;
        row.gamma_fit = Some(fit.gamma);
        row.fit_residual = Some(fit.residual);
        if fit.flagged {
            flags.push("fit_residual".into());
        }
    }

    if cfg.protocol.perturbation {
        let space = TruncatedSpace::new(&dims)?;
        let pt = match &s {
            Setup::Thermal(f) => Some(pt_thermal(f, &space, Storage::Sparse)?),
            Setup::Drive { dframe, .. } => Some(pt_coherent(dframe, &space, Storage::Sparse)?),
            Setup::Jc => None,
        };
        row.gamma_pt = pt.map(|p| p.gamma());
    }

    if cfg.truncation.convergence_check {
        let bigger = bundle(cfg, x, &s, [dims[0] + 2, dims[1] + 2])?;
        let g2 = t1_rate_diag(&bigger)?.gamma;
        let shift = (g2 - t1.gamma).abs() / t1.gamma.abs();
        row.convergence_shift = Some(shift);
        row.converged = Some(shift <= CONVERGENCE_TOL);
        if shift > CONVERGENCE_TOL {
            log::warn!("point {index} ({x}): rate shifts by {shift:.2e} at larger cutoffs");
            flags.push("unconverged".into());
        }
    }

    if let Some(ph) = &cfg.physical {
        // Γ [1/µs] = Γ_rel · 2π · f_GHz · 1e3
        row.t1_us = Some(1.0 / (t1.gamma * 2.0 * std::f64::consts::PI * ph.delta_ghz * 1e3));
    }
    flags.sort();
    flags.dedup();
    row.flags = flags.join(";");
    Ok(row)
}

/// Run every grid point; rows come back in grid order. Per-point failures
/// become rows with `error` set rather than aborting the sweep.
pub fn run_scenario(cfg: &ScenarioConfig) -> (Vec<SweepRow>, Summary) {
    let start = Instant::now();
    let rows: Vec<SweepRow> = cfg
        .sweep
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let t = Instant::now();
            let mut row = evaluate(cfg, i, x).unwrap_or_else(|e| {
                log::error!("point {i} ({x}): {e}");
                SweepRow { index: i, value: x, error: Some(e.to_string()), ..Default::default() }
            });
            row.wall_time = t.elapsed().as_secs_f64();
            row
        })
        .collect();
    let summary = Summary {
        name: cfg.name.clone(),
        variable: cfg.sweep.variable.name().into(),
        cutoffs: [cfg.truncation.cavity, cfg.truncation.qubit],
        rows: rows.len(),
        errors: rows.iter().filter(|r| r.error.is_some()).count(),
        unconverged: rows.iter().filter(|r| r.converged == Some(false)).count(),
        flagged: rows.iter().filter(|r| !r.flags.is_empty()).count(),
        wall_time_s: start.elapsed().as_secs_f64(),
        row_wall_time_s: rows.iter().map(|r| r.wall_time).collect(),
    };
    (rows, summary)
}
