//! Config-driven sweeps over the cavity-transmon relaxation model.

pub mod config;
pub mod report;
pub mod run;
pub mod table;

use std::fs;
use std::path::{Path, PathBuf};

use purcell_core::fockspace::{Storage, TruncatedSpace};
use purcell_core::liouvillian::{build_blackbox, build_displaced, build_jc};
use purcell_core::model::{displaced_frame, drive_for_photons, polariton_frame};
use purcell_core::spectral::block_labels;
use serde::Serialize;

use config::{Kind, ScenarioConfig};
use run::{run_scenario, Summary, SweepRow};

pub const THREADS_ENV: &str = "PURCELL_LAB_THREADS";

/// Worker count: the environment variable wins over `--jobs`.
pub fn thread_count(jobs: Option<usize>) -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .or(jobs)
        .unwrap_or(0)
}

pub struct SweepOutput {
    pub csv: PathBuf,
    pub summary_path: PathBuf,
    pub rows: Vec<SweepRow>,
    pub summary: Summary,
}

/// Run a validated scenario and write `<name>.csv` and `<name>.summary.json`.
pub fn sweep_to_dir(cfg: &ScenarioConfig, out_dir: &Path, threads: usize) -> anyhow::Result<SweepOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let (rows, summary) = pool.install(|| run_scenario(cfg));
    fs::create_dir_all(out_dir)?;
    let csv = out_dir.join(format!("{}.csv", cfg.name));
    table::write_rows(fs::File::create(&csv)?, cfg.sweep.variable.name(), &rows)?;
    let summary_path = out_dir.join(format!("{}.summary.json", cfg.name));
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(SweepOutput { csv, summary_path, rows, summary })
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumLine {
    pub re: f64,
    pub im: f64,
    pub label: Option<String>,
}

/// The `count` slowest generator eigenvalues at grid point `point`.
pub fn spectrum_at(cfg: &ScenarioConfig, point: usize, count: usize) -> anyhow::Result<Vec<SpectrumLine>> {
    let x = *cfg
        .sweep
        .grid
        .get(point)
        .ok_or_else(|| anyhow::anyhow!("grid has {} points, asked for {point}", cfg.sweep.grid.len()))?;
    let p = cfg.params_at(x);
    let space = TruncatedSpace::new(&[cfg.truncation.cavity, cfg.truncation.qubit])?;
    let bundle = match cfg.kind() {
        Kind::Thermal => build_blackbox(&polariton_frame(&p)?, &space, cfg.toggles, Storage::Sparse)?,
        Kind::Jc => build_jc(&p, &space, Storage::Sparse)?,
        Kind::Drive => {
            let omega_d = cfg.drive.as_ref().expect("validated").omega_d;
            let d = displaced_frame(&p, &drive_for_photons(&p, omega_d, x)?)?;
            build_displaced(&d, &space, cfg.toggles, Storage::Sparse)?
        }
    };
    Ok(block_labels(&bundle, count)?
        .into_iter()
        .map(|(v, l)| SpectrumLine {
            re: v.re,
            im: v.im,
            label: l.map(|l| format!("({},{},{})", l.m_c, l.m_a, l.k)),
        })
        .collect())
}
