//! Comparison report over completed sweep rows.

use serde::Serialize;

use crate::run::SweepRow;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeComparison {
    pub numeric: f64,
    pub analytic: f64,
    /// `numeric / analytic`; undefined when the analytic slope is zero.
    pub ratio: Option<f64>,
    pub sign_agrees: bool,
}

impl SlopeComparison {
    fn new(numeric: f64, analytic: f64) -> Self {
        let ratio = (analytic != 0.0).then(|| numeric / analytic);
        Self { numeric, analytic, ratio, sign_agrees: numeric.signum() == analytic.signum() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Discrepancy {
    pub points: usize,
    pub max_rel: f64,
    pub mean_rel: f64,
}

impl Discrepancy {
    fn of(pairs: impl Iterator<Item = (f64, f64)>) -> Option<Self> {
        let rel: Vec<f64> = pairs.map(|(x, reference)| ((x - reference) / reference).abs()).collect();
        if rel.is_empty() {
            return None;
        }
        Some(Self {
            points: rel.len(),
            max_rel: rel.iter().cloned().fold(0.0, f64::max),
            mean_rel: rel.iter().sum::<f64>() / rel.len() as f64,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub variable: String,
    pub rows: usize,
    /// Finite difference over the first two grid points.
    pub first_slope: SlopeComparison,
    /// Least-squares slope over all rows.
    pub fitted_slope: SlopeComparison,
    pub diag_vs_fit: Option<Discrepancy>,
    pub analytic_vs_diag: Option<Discrepancy>,
    pub pt_vs_diag: Option<Discrepancy>,
    pub all_converged: bool,
    pub degraded: bool,
    /// Every flag seen, with the number of rows carrying it.
    pub flags: Vec<(String, usize)>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("need at least 2 usable rows, got {0}")]
    TooFewRows(usize),
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn compare_report(variable: &str, rows: &[SweepRow]) -> Result<CompareReport, ReportError> {
    let usable: Vec<&SweepRow> =
        rows.iter().filter(|r| r.error.is_none() && r.gamma_diag.is_some() && r.gamma_analytic.is_some()).collect();
    if usable.len() < 2 {
        return Err(ReportError::TooFewRows(usable.len()));
    }
    let x: Vec<f64> = usable.iter().map(|r| r.value).collect();
    let num: Vec<f64> = usable.iter().map(|r| r.gamma_diag.unwrap()).collect();
    let th: Vec<f64> = usable.iter().map(|r| r.gamma_analytic.unwrap()).collect();
    let dx = x[1] - x[0];
    let first_slope = SlopeComparison::new((num[1] - num[0]) / dx, (th[1] - th[0]) / dx);
    let fitted_slope = SlopeComparison::new(ls_slope(&x, &num), ls_slope(&x, &th));

    let diag_vs_fit = Discrepancy::of(usable.iter().filter_map(|r| Some((r.gamma_fit?, r.gamma_diag?))));
    let analytic_vs_diag = Discrepancy::of(usable.iter().filter_map(|r| Some((r.gamma_analytic?, r.gamma_diag?))));
    let pt_vs_diag = Discrepancy::of(usable.iter().filter_map(|r| Some((r.gamma_pt?, r.gamma_diag?))));

    let mut counts: std::collections::BTreeMap<String, usize> = Default::default();
    for r in rows {
        for f in r.flag_list() {
            // strip the numeric payload so equal flags group together
            let key = f.split('(').next().unwrap_or(f).to_string();
            *counts.entry(key).or_default() += 1;
        }
    }
    Ok(CompareReport {
        variable: variable.into(),
        rows: rows.len(),
        first_slope,
        fitted_slope,
        diag_vs_fit,
        analytic_vs_diag,
        pt_vs_diag,
        all_converged: rows.iter().all(|r| r.converged != Some(false)),
        degraded: counts.contains_key("analytic_formula_degraded"),
        flags: counts.into_iter().collect(),
    })
}
