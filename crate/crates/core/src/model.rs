//! Physical parameters and the two effective frames: the dispersive
//! polariton ("blackbox") frame and the coherently displaced frame.
//!
//! Everything is dimensionless, in units of |Δ| with ħ = 1.

use std::fmt;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STRONG_COUPLING_WARN: f64 = 0.3;
pub const STRONG_COUPLING_MAX: f64 = 0.5;
pub const DISPLACEMENT_WARN: f64 = 0.2;
pub const DISPLACEMENT_MAX: f64 = 1.0;
pub const DRIVE_COND_MAX: f64 = 1e12;

/// Non-fatal guard conditions raised while building frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Flag {
    StrongCoupling(f64),
    LargeQubitDisplacement(f64),
    ThermalWithDrive,
    /// Thermal occupation above the low-temperature validity range.
    HighTemperature(f64),
    /// `|ω̃_a - ω_D - U| / κ̃_a` below the perturbative drive guard.
    NearDriveResonance(f64),
    /// Closed-form rates expected to miss higher-order corrections.
    AnalyticDegraded,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::StrongCoupling(r) => write!(f, "strong_coupling(|g/Δ|={r:.3})"),
            Flag::LargeQubitDisplacement(a) => write!(f, "large_displacement(|α_a|²={a:.3})"),
            Flag::ThermalWithDrive => write!(f, "thermal_with_drive"),
            Flag::HighTemperature(n) => write!(f, "high_temperature(n̄={n:.3})"),
            Flag::NearDriveResonance(r) => write!(f, "near_drive_resonance(ratio={r:.3})"),
            Flag::AnalyticDegraded => write!(f, "analytic_formula_degraded"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega_a: f64,
    pub omega_c: f64,
    pub g: f64,
    pub u: f64,
    pub kappa_a: f64,
    pub kappa_c: f64,
    pub nbar_a0: f64,
    pub nbar_c0: f64,
}

impl SystemParams {
    /// Parameters with the cavity at zero frequency and the qubit at `delta`.
    pub fn from_detuning(delta: f64, g: f64, u: f64, kappa_a: f64, kappa_c: f64) -> Self {
        Self { omega_a: delta, omega_c: 0.0, g, u, kappa_a, kappa_c, nbar_a0: 0.0, nbar_c0: 0.0 }
    }

    pub fn with_thermal(mut self, nbar_a0: f64, nbar_c0: f64) -> Self {
        self.nbar_a0 = nbar_a0;
        self.nbar_c0 = nbar_c0;
        self
    }

    pub fn delta(&self) -> f64 {
        self.omega_a - self.omega_c
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.nbar_a0 == 0.0 && self.nbar_c0 == 0.0
    }

    pub fn validate(&self) -> Result<Vec<Flag>> {
        let all = [
            self.omega_a,
            self.omega_c,
            self.g,
            self.u,
            self.kappa_a,
            self.kappa_c,
            self.nbar_a0,
            self.nbar_c0,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        for r in [self.kappa_a, self.kappa_c] {
            if r < 0.0 {
                return Err(Error::NegativeRate(r));
            }
        }
        if self.nbar_a0 < 0.0 || self.nbar_c0 < 0.0 {
            return Err(Error::InvalidParams("negative thermal occupation".into()));
        }
        let delta = self.delta();
        if delta == 0.0 {
            return Err(Error::ZeroDetuning);
        }
        let ratio = (self.g / delta).abs();
        if ratio >= STRONG_COUPLING_MAX {
            return Err(Error::Guard(format!("|g/Δ| = {ratio:.3} is outside the dispersive regime")));
        }
        let mut flags = Vec::new();
        if ratio > STRONG_COUPLING_WARN {
            log::warn!("|g/Δ| = {ratio:.3} exceeds {STRONG_COUPLING_WARN}");
            flags.push(Flag::StrongCoupling(ratio));
        }
        Ok(flags)
    }
}

/// Dispersive-frame coefficients to second order in g/Δ.
#[derive(Clone, Debug, PartialEq)]
pub struct PolaritonFrame {
    pub params: SystemParams,
    pub delta: f64,
    pub omega_a_t: f64,
    pub omega_c_t: f64,
    pub chi_aa: f64,
    pub chi_ca: f64,
    pub chi_t: f64,
    pub kappa_a_t: f64,
    pub kappa_c_t: f64,
    pub kappa_purcell: f64,
    pub nbar_a_t: f64,
    pub nbar_c_t: f64,
    pub gamma_up: f64,
    pub gamma_down: f64,
    pub flags: Vec<Flag>,
}

pub fn polariton_frame(params: &SystemParams) -> Result<PolaritonFrame> {
    let flags = params.validate()?;
    let p = params;
    let delta = p.delta();
    let r = p.g / delta;
    let r2 = r * r;

    let kappa_a_t = p.kappa_a + r2 * (p.kappa_c - p.kappa_a);
    let kappa_c_t = p.kappa_c + r2 * (p.kappa_a - p.kappa_c);
    let flux_a = p.kappa_a * p.nbar_a0 + r2 * (p.kappa_c * p.nbar_c0 - p.kappa_a * p.nbar_a0);
    let flux_c = p.kappa_c * p.nbar_c0 + r2 * (p.kappa_a * p.nbar_a0 - p.kappa_c * p.nbar_c0);
    let nbar_a_t = if kappa_a_t > 0.0 { flux_a / kappa_a_t } else { p.nbar_a0 };
    let nbar_c_t = if kappa_c_t > 0.0 { flux_c / kappa_c_t } else { p.nbar_c0 };

    Ok(PolaritonFrame {
        params: *p,
        delta,
        omega_a_t: p.omega_a + p.g * p.g / delta,
        omega_c_t: p.omega_c - p.g * p.g / delta,
        chi_aa: -0.5 * p.u * (1.0 - 0.5 * r2),
        chi_ca: -2.0 * r2 * p.u,
        chi_t: p.g * p.u / delta,
        kappa_a_t,
        kappa_c_t,
        kappa_purcell: r2 * (p.kappa_c - p.kappa_a),
        nbar_a_t,
        nbar_c_t,
        gamma_up: r * (p.kappa_c * p.nbar_c0 - p.kappa_a * p.nbar_a0),
        gamma_down: r * (p.kappa_c * (1.0 + p.nbar_c0) - p.kappa_a * (1.0 + p.nbar_a0)),
        flags,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub omega_d: f64,
    /// Complex cavity drive amplitude as `[re, im]`.
    pub f_c: [f64; 2],
}

impl DriveParams {
    pub fn new(omega_d: f64, f_c: c64) -> Self {
        Self { omega_d, f_c: [f_c.re, f_c.im] }
    }

    pub fn f_c(&self) -> c64 {
        c64::new(self.f_c[0], self.f_c[1])
    }
}

/// Frame displaced by the classical response `(α_c, α_a)` and rotating at ω_D.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacedFrame {
    pub params: SystemParams,
    pub drive: DriveParams,
    pub alpha_c: c64,
    pub alpha_a: c64,
    pub delta_prime: f64,
    pub omega_a_tp: f64,
    pub omega_c_tp: f64,
    pub chi_aa_p: f64,
    pub chi_ca_p: f64,
    pub chi_t_p: f64,
    pub kappa_a_tp: f64,
    pub kappa_c_tp: f64,
    pub gamma_down_p: f64,
    /// Coefficient of `a†a†a` in the drive term, `-U α_a`.
    pub drive_coeff: c64,
    pub condition: f64,
    pub flags: Vec<Flag>,
}

impl DisplacedFrame {
    pub fn alpha_a_sq(&self) -> f64 {
        self.alpha_a.norm_sqr()
    }

    pub fn cavity_photons(&self) -> f64 {
        self.alpha_c.norm_sqr()
    }
}

/// Linear response of the drive equations and the 2-norm condition number.
fn linear_response(p: &SystemParams, omega_d: f64, f_c: c64) -> Result<(c64, c64, f64)> {
    let a11 = c64::new(p.omega_c - omega_d, -0.5 * p.kappa_c);
    let a12 = c64::new(p.g, 0.0);
    let a22 = c64::new(p.omega_a - omega_d, -0.5 * p.kappa_a);
    let det = a11 * a22 - a12 * a12;
    let fro2 = a11.norm_sqr() + 2.0 * a12.norm_sqr() + a22.norm_sqr();
    let detn = det.norm();
    let disc = (fro2 * fro2 - 4.0 * detn * detn).max(0.0).sqrt();
    let smax2 = 0.5 * (fro2 + disc);
    let smin2 = if smax2 > 0.0 { detn * detn / smax2 } else { 0.0 };
    let cond = if smin2 > 0.0 { (smax2 / smin2).sqrt() } else { f64::INFINITY };
    if !(cond < DRIVE_COND_MAX) {
        return Err(Error::IllConditioned(cond));
    }
    let alpha_c = -f_c * a22 / det;
    let alpha_a = f_c * a12 / det;
    Ok((alpha_c, alpha_a, cond))
}

pub fn displaced_frame(params: &SystemParams, drive: &DriveParams) -> Result<DisplacedFrame> {
    let mut flags = params.validate()?;
    if !drive.omega_d.is_finite() || !drive.f_c.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidParams("non-finite drive".into()));
    }
    if !params.is_zero_temperature() {
        log::warn!("displaced frame assumes zero temperature");
        flags.push(Flag::ThermalWithDrive);
    }
    let p = params;
    let (alpha_c, alpha_a, condition) = linear_response(p, drive.omega_d, drive.f_c())?;
    let a2 = alpha_a.norm_sqr();
    if a2 > DISPLACEMENT_MAX {
        return Err(Error::Guard(format!("|α_a|² = {a2:.3} beyond {DISPLACEMENT_MAX}")));
    }
    if a2 > DISPLACEMENT_WARN {
        log::warn!("|α_a|² = {a2:.3} exceeds {DISPLACEMENT_WARN}");
        flags.push(Flag::LargeQubitDisplacement(a2));
    }
    let delta_prime = p.delta() - 2.0 * p.u * a2;
    if delta_prime.abs() < 1e-12 * p.delta().abs() {
        return Err(Error::Resonance("Kerr-shifted detuning vanishes".into()));
    }
    let r = p.g / delta_prime;
    let r2 = r * r;
    Ok(DisplacedFrame {
        params: *p,
        drive: *drive,
        alpha_c,
        alpha_a,
        delta_prime,
        omega_a_tp: p.omega_a - drive.omega_d - 2.0 * p.u * a2 + p.g * p.g / delta_prime,
        omega_c_tp: p.omega_c - drive.omega_d - p.g * p.g / delta_prime,
        chi_aa_p: -0.5 * p.u * (1.0 - 0.5 * r2),
        chi_ca_p: -2.0 * r2 * p.u,
        chi_t_p: p.g * p.u / delta_prime,
        kappa_a_tp: p.kappa_a + r2 * (p.kappa_c - p.kappa_a),
        kappa_c_tp: p.kappa_c + r2 * (p.kappa_a - p.kappa_c),
        gamma_down_p: r * (p.kappa_c - p.kappa_a),
        drive_coeff: -alpha_a * p.u,
        condition,
        flags,
    })
}

/// Real drive amplitude that puts `photons` coherent photons in the cavity.
pub fn drive_for_photons(params: &SystemParams, omega_d: f64, photons: f64) -> Result<DriveParams> {
    if !(photons >= 0.0) || !photons.is_finite() {
        return Err(Error::InvalidParams(format!("cavity photon number {photons}")));
    }
    let (alpha_c, _, _) = linear_response(params, omega_d, c64::new(1.0, 0.0))?;
    Ok(DriveParams::new(omega_d, c64::new(photons.sqrt() / alpha_c.norm(), 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weak_kerr(delta: f64, nbar: f64) -> SystemParams {
        SystemParams::from_detuning(delta, 0.1, 0.01, 0.0, 0.01).with_thermal(0.0, nbar)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn dispersive_coefficients() {
        let f = polariton_frame(&weak_kerr(1.0, 0.0)).unwrap();
        assert!(close(f.kappa_a_t, 1e-4, 1e-12));
        assert!(close(f.kappa_c_t, 0.0099, 1e-12));
        assert!(close(f.chi_t, 1e-3, 1e-12));
        assert!(close(f.chi_ca, -2e-4, 1e-12));
        assert!(close(f.chi_aa, -0.005 * 0.995, 1e-12));
        assert!(close(f.omega_a_t, 1.01, 1e-12));
        assert!(close(f.omega_c_t, -0.01, 1e-12));
        assert!(close(f.gamma_down, 1e-3, 1e-12));
        assert_eq!(f.gamma_up, 0.0);
    }

    #[test]
    fn purely_purcell_qubit_inherits_cavity_temperature() {
        for nbar in [0.01, 0.1, 0.3] {
            let f = polariton_frame(&weak_kerr(1.0, nbar)).unwrap();
            assert!(close(f.nbar_a_t, nbar, 1e-12));
            assert!(close(f.nbar_c_t, nbar, 1e-12));
        }
    }

    #[test]
    fn equal_losses_remove_purcell_terms() {
        let p = SystemParams::from_detuning(1.0, 0.1, 0.01, 0.02, 0.02).with_thermal(0.05, 0.2);
        let f = polariton_frame(&p).unwrap();
        assert_eq!(f.kappa_purcell, 0.0);
        assert!(close(f.kappa_a_t, 0.02, 1e-14));
        assert!(close(f.gamma_down, 0.1 * 0.02 * (0.2 - 0.05), 1e-12));
        assert!(close(f.gamma_up, 0.1 * 0.02 * (0.2 - 0.05), 1e-12));
    }

    #[test]
    fn uncoupled_limit() {
        let p = SystemParams::from_detuning(1.0, 0.0, 0.01, 0.0, 0.01).with_thermal(0.07, 0.1);
        let f = polariton_frame(&p).unwrap();
        assert_eq!(f.kappa_a_t, 0.0);
        assert_eq!(f.nbar_a_t, 0.07);
        assert_eq!(f.chi_t, 0.0);
    }

    #[test]
    fn detuning_sign_flips_odd_terms() {
        let fp = polariton_frame(&weak_kerr(1.0, 0.1)).unwrap();
        let fm = polariton_frame(&weak_kerr(-1.0, 0.1)).unwrap();
        assert!(close(fm.chi_t, -fp.chi_t, 1e-14));
        assert!(close(fm.gamma_up, -fp.gamma_up, 1e-14));
        assert!(close(fm.gamma_down, -fp.gamma_down, 1e-14));
        assert!(close(fm.kappa_a_t, fp.kappa_a_t, 1e-14));
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            polariton_frame(&SystemParams::from_detuning(0.0, 0.1, 0.0, 0.0, 0.1)),
            Err(Error::ZeroDetuning)
        ));
        assert!(matches!(
            polariton_frame(&SystemParams::from_detuning(1.0, 0.1, 0.0, -0.1, 0.1)),
            Err(Error::NegativeRate(_))
        ));
        assert!(polariton_frame(&SystemParams::from_detuning(1.0, f64::NAN, 0.0, 0.0, 0.1)).is_err());
        assert!(matches!(
            polariton_frame(&SystemParams::from_detuning(1.0, 0.6, 0.0, 0.0, 0.1)),
            Err(Error::Guard(_))
        ));
        let f = polariton_frame(&SystemParams::from_detuning(1.0, 0.35, 0.0, 0.0, 0.1)).unwrap();
        assert!(matches!(f.flags[0], Flag::StrongCoupling(_)));
    }

    #[test]
    fn weak_drive_recovers_bare_detuning() {
        let p = SystemParams::from_detuning(1.0, 0.1, 0.1, 0.0, 0.01);
        let d = displaced_frame(&p, &DriveParams::new(-0.1, c64::new(1e-9, 0.0))).unwrap();
        assert!(close(d.delta_prime, 1.0, 1e-12));
        assert!(close(d.kappa_a_tp, 1e-4, 1e-10));
    }

    #[test]
    fn qubit_response_ratio() {
        let p = SystemParams::from_detuning(1.0, 0.1, 0.1, 0.0, 0.01);
        let d = displaced_frame(&p, &DriveParams::new(-0.1, c64::new(0.01, 0.0))).unwrap();
        let ratio = d.alpha_a.norm_sqr() / d.alpha_c.norm_sqr();
        // second drive equation: g α_c + (ω_a - ω_D) α_a = 0 when κ_a = 0
        assert!(close(ratio, 0.01 / 1.1f64.powi(2), 1e-12));
        let resid = d.alpha_c * 0.1 + d.alpha_a * 1.1;
        assert!(resid.norm() < 1e-15);
    }

    #[test]
    fn purcell_rate_slope_in_qubit_photons() {
        let p = SystemParams::from_detuning(1.0, 0.1, 0.1, 0.0, 0.01);
        let eval = |photons: f64| {
            let d = drive_for_photons(&p, -0.1, photons).unwrap();
            let d = displaced_frame(&p, &d).unwrap();
            (d.alpha_a_sq(), d.kappa_a_tp)
        };
        let (x0, y0) = eval(1e-4);
        let (x1, y1) = eval(2e-4);
        let slope = (y1 - y0) / (x1 - x0);
        let expect = 4.0 * 0.01 * 0.1 * 0.01;
        assert!(close(slope, expect, 1e-3));
    }

    #[test]
    fn photon_targeting() {
        let p = SystemParams::from_detuning(-1.0, 0.1, 0.1, 0.0, 0.01);
        let d = drive_for_photons(&p, -0.1, 3.0).unwrap();
        let f = displaced_frame(&p, &d).unwrap();
        assert!(close(f.cavity_photons(), 3.0, 1e-12));
    }

    #[test]
    fn singular_drive_solve() {
        let p = SystemParams::from_detuning(1.0, 0.0, 0.1, 0.0, 0.0);
        assert!(matches!(
            displaced_frame(&p, &DriveParams::new(0.0, c64::new(0.1, 0.0))),
            Err(Error::IllConditioned(_))
        ));
    }

    #[test]
    fn thermal_drive_is_flagged() {
        let p = weak_kerr(1.0, 0.1);
        let d = displaced_frame(&p, &DriveParams::new(-0.1, c64::new(0.001, 0.0))).unwrap();
        assert!(d.flags.contains(&Flag::ThermalWithDrive));
    }
}
