//! The four generator variants: bare, dispersive blackbox, displaced
//! (coherently driven) and Jaynes-Cummings.
//!
//! Mode 0 is always the cavity, mode 1 the qubit.

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{
    ladder_operators, Ladder, OperatorMatrix, Storage, Superoperator, SuperoperatorBuilder,
    TruncatedSpace,
};
use crate::model::{polariton_frame, DisplacedFrame, PolaritonFrame, SystemParams};

pub const CAVITY: usize = 0;
pub const QUBIT: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TermToggles {
    pub include_crs: bool,
    pub include_nc: bool,
    pub include_cd: bool,
    pub include_drive: bool,
}

impl Default for TermToggles {
    fn default() -> Self {
        Self { include_crs: true, include_nc: true, include_cd: true, include_drive: true }
    }
}

impl TermToggles {
    pub fn none() -> Self {
        Self { include_crs: false, include_nc: false, include_cd: false, include_drive: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Bare,
    Blackbox,
    Displaced,
    Jc,
}

#[derive(Clone, Debug)]
pub enum Frame {
    Bare(SystemParams),
    Polariton(PolaritonFrame),
    Displaced(DisplacedFrame),
}

#[derive(Clone, Debug)]
pub struct GeneratorBundle {
    pub superop: Superoperator,
    pub frame: Frame,
    pub basis: Basis,
    pub toggles: TermToggles,
}

impl GeneratorBundle {
    pub fn space(&self) -> &TruncatedSpace {
        self.superop.space()
    }

    pub fn params(&self) -> &SystemParams {
        match &self.frame {
            Frame::Bare(p) => p,
            Frame::Polariton(f) => &f.params,
            Frame::Displaced(d) => &d.params,
        }
    }

    pub fn qubit_ladder(&self) -> Ladder {
        ladder_operators(self.space(), QUBIT).expect("bundles are two-mode")
    }

    /// Leading-order qubit decay rate, used to scale time horizons.
    pub fn reference_rate(&self) -> f64 {
        let p = self.params();
        match (&self.frame, self.basis) {
            (Frame::Displaced(d), _) => d.kappa_a_tp,
            (Frame::Polariton(f), _) => f.kappa_a_t,
            (Frame::Bare(_), Basis::Jc) => {
                let r = p.g / p.delta();
                r * r * p.kappa_c * (1.0 + 2.0 * p.nbar_c0)
            }
            (Frame::Bare(_), _) => {
                let r = p.g / p.delta();
                p.kappa_a + r * r * (p.kappa_c - p.kappa_a)
            }
        }
    }
}

fn check_two_mode(space: &TruncatedSpace) -> Result<()> {
    if space.n_modes() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "expected a cavity-qubit space, got {} modes",
            space.n_modes()
        )));
    }
    Ok(())
}

fn re(x: f64) -> c64 {
    c64::new(x, 0.0)
}

fn thermal_channels(
    b: &mut SuperoperatorBuilder,
    l: &Ladder,
    kappa: f64,
    nbar: f64,
) -> Result<()> {
    b.dissipator(&l.lower, kappa * (1.0 + nbar))?;
    b.dissipator(&l.raise, kappa * nbar)?;
    Ok(())
}

/// Two-mode operators shared by the builders.
struct Ops {
    c: Ladder,
    a: Ladder,
}

impl Ops {
    fn new(space: &TruncatedSpace) -> Result<Self> {
        check_two_mode(space)?;
        Ok(Self { c: ladder_operators(space, CAVITY)?, a: ladder_operators(space, QUBIT)? })
    }

    fn self_kerr(&self) -> OperatorMatrix {
        &self.a.raise * &(&self.a.raise * &(&self.a.lower * &self.a.lower))
    }

    fn cross_kerr(&self) -> OperatorMatrix {
        &self.c.number * &self.a.number
    }

    /// `a†a†ac + c†a†aa`.
    fn conversion(&self) -> OperatorMatrix {
        let up = &(&self.a.raise * &self.a.raise) * &(&self.a.lower * &self.c.lower);
        &up + &up.adjoint()
    }

    /// `a†c + c†a`.
    fn hopping(&self) -> OperatorMatrix {
        let x = &self.a.raise * &self.c.lower;
        &x + &x.adjoint()
    }

    fn correlated(&self, b: &mut SuperoperatorBuilder, up: f64, down: f64) -> Result<()> {
        let (a, c) = (&self.a, &self.c);
        b.anticommutator(&self.hopping(), re(-0.5 * (up + down)))?;
        b.sandwich(Some(&a.lower), Some(&c.raise), re(down))?;
        b.sandwich(Some(&c.lower), Some(&a.raise), re(down))?;
        b.sandwich(Some(&a.raise), Some(&c.lower), re(up))?;
        b.sandwich(Some(&c.raise), Some(&a.lower), re(up))?;
        Ok(())
    }
}

pub fn build_bare(params: &SystemParams, space: &TruncatedSpace, storage: Storage) -> Result<GeneratorBundle> {
    params.validate()?;
    let o = Ops::new(space)?;
    let p = params;
    let h = &(&(&o.c.number * p.omega_c) + &(&o.a.number * p.omega_a))
        + &(&(&o.self_kerr() * (-0.5 * p.u)) + &(&o.hopping() * p.g));
    let mut b = SuperoperatorBuilder::new(space);
    b.hamiltonian(&h)?;
    thermal_channels(&mut b, &o.c, p.kappa_c, p.nbar_c0)?;
    thermal_channels(&mut b, &o.a, p.kappa_a, p.nbar_a0)?;
    Ok(GeneratorBundle {
        superop: b.build(storage),
        frame: Frame::Bare(*p),
        basis: Basis::Bare,
        toggles: TermToggles::none(),
    })
}

/// Blackbox generator split into the decoupled part and its couplings.
#[derive(Clone, Debug)]
pub struct BlackboxParts {
    pub l0: Superoperator,
    pub crs: Superoperator,
    pub nc: Superoperator,
    pub cd: Superoperator,
}

pub fn blackbox_parts(frame: &PolaritonFrame, space: &TruncatedSpace, storage: Storage) -> Result<BlackboxParts> {
    let o = Ops::new(space)?;
    let f = frame;
    let h0 = &(&(&o.c.number * f.omega_c_t) + &(&o.a.number * f.omega_a_t)) + &(&o.self_kerr() * f.chi_aa);
    let mut b0 = SuperoperatorBuilder::new(space);
    b0.hamiltonian(&h0)?;
    thermal_channels(&mut b0, &o.c, f.kappa_c_t, f.nbar_c_t)?;
    thermal_channels(&mut b0, &o.a, f.kappa_a_t, f.nbar_a_t)?;

    let mut bc = SuperoperatorBuilder::new(space);
    bc.hamiltonian(&(&o.cross_kerr() * f.chi_ca))?;
    let mut bn = SuperoperatorBuilder::new(space);
    bn.hamiltonian(&(&o.conversion() * f.chi_t))?;
    let mut bd = SuperoperatorBuilder::new(space);
    o.correlated(&mut bd, f.gamma_up, f.gamma_down)?;

    Ok(BlackboxParts {
        l0: b0.build(storage),
        crs: bc.build(storage),
        nc: bn.build(storage),
        cd: bd.build(storage),
    })
}

pub fn build_blackbox(
    frame: &PolaritonFrame,
    space: &TruncatedSpace,
    toggles: TermToggles,
    storage: Storage,
) -> Result<GeneratorBundle> {
    let parts = blackbox_parts(frame, space, storage)?;
    let mut l = parts.l0;
    if toggles.include_crs {
        l = l.sum(&parts.crs)?;
    }
    if toggles.include_nc {
        l = l.sum(&parts.nc)?;
    }
    if toggles.include_cd {
        l = l.sum(&parts.cd)?;
    }
    Ok(GeneratorBundle {
        superop: l,
        frame: Frame::Polariton(frame.clone()),
        basis: Basis::Blackbox,
        toggles,
    })
}

pub fn build_displaced(
    dframe: &DisplacedFrame,
    space: &TruncatedSpace,
    toggles: TermToggles,
    storage: Storage,
) -> Result<GeneratorBundle> {
    if !dframe.params.is_zero_temperature() {
        return Err(Error::Unsupported(
            "the displaced generator is zero-temperature only; set nbar_a0 = nbar_c0 = 0".into(),
        ));
    }
    let o = Ops::new(space)?;
    let d = dframe;
    let mut h = &(&(&o.c.number * d.omega_c_tp) + &(&o.a.number * d.omega_a_tp)) + &(&o.self_kerr() * d.chi_aa_p);
    if toggles.include_crs {
        h = &h + &(&o.cross_kerr() * d.chi_ca_p);
    }
    if toggles.include_nc {
        h = &h + &(&o.conversion() * d.chi_t_p);
    }
    if toggles.include_drive {
        let v = &(&o.a.raise * &o.a.raise) * &o.a.lower;
        h = &h + &(&(&v * d.drive_coeff) + &(&v.adjoint() * d.drive_coeff.conj()));
    }
    let mut b = SuperoperatorBuilder::new(space);
    b.hamiltonian(&h)?;
    b.dissipator(&o.c.lower, d.kappa_c_tp)?;
    b.dissipator(&o.a.lower, d.kappa_a_tp)?;
    if toggles.include_cd {
        o.correlated(&mut b, 0.0, d.gamma_down_p)?;
    }
    Ok(GeneratorBundle {
        superop: b.build(storage),
        frame: Frame::Displaced(d.clone()),
        basis: Basis::Displaced,
        toggles,
    })
}

/// Jaynes-Cummings generator; the qubit cutoff of `space` is replaced by 2.
pub fn build_jc(params: &SystemParams, space: &TruncatedSpace, storage: Storage) -> Result<GeneratorBundle> {
    params.validate()?;
    check_two_mode(space)?;
    if params.kappa_a != 0.0 {
        return Err(Error::Unsupported("the JC generator assumes kappa_a = 0".into()));
    }
    let space = TruncatedSpace::new(&[space.dims()[CAVITY], 2])?;
    let o = Ops::new(&space)?;
    let p = params;
    let h = &(&(&o.c.number * p.omega_c) + &(&o.a.number * p.omega_a)) + &(&o.hopping() * p.g);
    let mut b = SuperoperatorBuilder::new(&space);
    b.hamiltonian(&h)?;
    thermal_channels(&mut b, &o.c, p.kappa_c, p.nbar_c0)?;
    Ok(GeneratorBundle {
        superop: b.build(storage),
        frame: Frame::Bare(*p),
        basis: Basis::Jc,
        toggles: TermToggles::none(),
    })
}

/// Convenience: polariton frame plus blackbox generator.
pub fn blackbox_from_params(
    params: &SystemParams,
    space: &TruncatedSpace,
    toggles: TermToggles,
    storage: Storage,
) -> Result<GeneratorBundle> {
    build_blackbox(&polariton_frame(params)?, space, toggles, storage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{displaced_frame, DriveParams};

    fn space() -> TruncatedSpace {
        TruncatedSpace::new(&[5, 4]).unwrap()
    }

    fn weak_kerr(nbar: f64) -> SystemParams {
        SystemParams::from_detuning(1.0, 0.1, 0.01, 0.0, 0.01).with_thermal(0.0, nbar)
    }

    #[test]
    fn builders_are_trace_preserving() {
        let s = space();
        let p = weak_kerr(0.1);
        assert!(build_bare(&p, &s, Storage::Sparse).unwrap().superop.trace_defect() < 1e-13);
        let bb = blackbox_from_params(&p, &s, TermToggles::default(), Storage::Sparse).unwrap();
        assert!(bb.superop.trace_defect() < 1e-13);
        let jc = build_jc(&p, &s, Storage::Sparse).unwrap();
        assert!(jc.superop.trace_defect() < 1e-13);
        assert_eq!(jc.space().dims(), &[5, 2]);
        let p0 = weak_kerr(0.0);
        let d = displaced_frame(&p0, &DriveParams::new(-0.1, c64::new(0.02, 0.0))).unwrap();
        let disp = build_displaced(&d, &s, TermToggles::default(), Storage::Sparse).unwrap();
        assert!(disp.superop.trace_defect() < 1e-13);
    }

    #[test]
    fn correlated_dissipation_vanishes_without_coupling() {
        let p = SystemParams::from_detuning(1.0, 0.0, 0.01, 0.001, 0.01).with_thermal(0.02, 0.1);
        let f = polariton_frame(&p).unwrap();
        let parts = blackbox_parts(&f, &space(), Storage::Sparse).unwrap();
        assert_eq!(parts.cd.max_abs(), 0.0);
        assert_eq!(parts.nc.max_abs(), 0.0);
    }

    #[test]
    fn undriven_displaced_equals_blackbox_in_rotating_frame() {
        let s = space();
        let wd = -0.1;
        let p = weak_kerr(0.0);
        let d = displaced_frame(&p, &DriveParams::new(wd, c64::new(0.0, 0.0))).unwrap();
        let disp = build_displaced(&d, &s, TermToggles::default(), Storage::Dense).unwrap();
        let mut rot = p;
        rot.omega_a -= wd;
        rot.omega_c -= wd;
        let bb = blackbox_from_params(&rot, &s, TermToggles::default(), Storage::Dense).unwrap();
        let diff = &disp.superop.to_dense() - &bb.superop.to_dense();
        assert!(diff.norm_max() < 1e-15);
    }

    #[test]
    fn displaced_rejects_thermal_baths() {
        let p = weak_kerr(0.1);
        let d = displaced_frame(&p, &DriveParams::new(-0.1, c64::new(0.01, 0.0))).unwrap();
        assert!(matches!(
            build_displaced(&d, &space(), TermToggles::default(), Storage::Sparse),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn jc_requires_lossless_qubit() {
        let p = SystemParams::from_detuning(1.0, 0.1, 0.0, 0.001, 0.01);
        assert!(build_jc(&p, &space(), Storage::Sparse).is_err());
    }

    #[test]
    fn one_mode_space_rejected() {
        let s = TruncatedSpace::new(&[4]).unwrap();
        assert!(build_bare(&weak_kerr(0.0), &s, Storage::Sparse).is_err());
    }
}
