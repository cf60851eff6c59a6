//! Fixed-format CSV for sweep rows.
//!
//! The first line is `#schema=<version>;variable=<name>;columns=<list>`, then
//! a header row. Floats are written with 15 significant digits, and missing
//! values are empty fields.

use std::io::{Read, Write};

use crate::run::SweepRow;

pub const SCHEMA: &str = "purcell-lab.sweep.v1";

pub const COLUMNS: [&str; 22] = [
    "index",
    "value",
    "gamma_diag",
    "gamma_by_weight",
    "gamma_fit",
    "fit_residual",
    "gamma_pt",
    "gamma_analytic",
    "base",
    "nc_nc",
    "nc_cd",
    "cd_cd",
    "drive",
    "kappa_eff_nc",
    "gamma4_estimate",
    "regime",
    "mode_label",
    "converged",
    "convergence_shift",
    "flags",
    "t1_us",
    "error",
];

pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0.00000000000000e0"
        return "0.00000000000000e0".into();
    }
    format!("{x:.14e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn record(r: &SweepRow) -> Vec<String> {
    vec![
        r.index.to_string(),
        fmt_f64(r.value),
        opt(r.gamma_diag),
        opt(r.gamma_by_weight),
        opt(r.gamma_fit),
        opt(r.fit_residual),
        opt(r.gamma_pt),
        opt(r.gamma_analytic),
        opt(r.base),
        opt(r.nc_nc),
        opt(r.nc_cd),
        opt(r.cd_cd),
        opt(r.drive),
        opt(r.kappa_eff_nc),
        opt(r.gamma4_estimate),
        r.regime.clone().unwrap_or_default(),
        r.mode_label.clone().unwrap_or_default(),
        r.converged.map(|b| b.to_string()).unwrap_or_default(),
        opt(r.convergence_shift),
        r.flags.clone(),
        opt(r.t1_us),
        r.error.clone().unwrap_or_default(),
    ]
}

pub fn write_rows<W: Write>(mut out: W, variable: &str, rows: &[SweepRow]) -> csv::Result<()> {
    writeln!(out, "#schema={SCHEMA};variable={variable};columns={}", COLUMNS.join(","))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record(record(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Rows and the sweep variable recorded in the schema line.
pub fn read_rows<R: Read>(input: R) -> Result<(String, Vec<SweepRow>), String> {
    let mut text = String::new();
    let mut input = input;
    input.read_to_string(&mut text).map_err(|e| e.to_string())?;
    let first = text.lines().next().unwrap_or_default();
    let meta = first.strip_prefix("#schema=").ok_or("missing #schema= line")?;
    let mut parts = meta.split(';');
    let version = parts.next().unwrap_or_default();
    if version != SCHEMA {
        return Err(format!("unsupported schema {version:?}"));
    }
    let variable = parts
        .find_map(|p| p.strip_prefix("variable="))
        .ok_or("schema line has no variable")?
        .to_string();
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows = rd.deserialize::<SweepRow>().collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    Ok((variable, rows))
}
