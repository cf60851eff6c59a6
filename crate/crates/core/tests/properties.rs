use faer::c64;
use proptest::prelude::*;

use purcell_core::fockspace::{
    ladder_operators, lindblad_adjoint, lindblad_superoperator, unvectorize, vectorize, OperatorMatrix, Storage,
    TruncatedSpace,
};
use purcell_core::liouvillian::*;
use purcell_core::model::*;
use purcell_core::perturbation::*;
use purcell_core::spectral::*;

fn hermitian_from(space: &TruncatedSpace, seed: &[f64]) -> OperatorMatrix {
    let d = space.dim();
    let m = OperatorMatrix::from_fn(space, |i, j| {
        let k = (i * d + j) % seed.len();
        c64::new(seed[k], seed[(k + 3) % seed.len()])
    });
    &m + &m.adjoint()
}

fn params() -> impl Strategy<Value = SystemParams> {
    (
        prop_oneof![Just(1.0), Just(-1.0)],
        0.02..0.12f64,
        0.005..0.15f64,
        0.0..0.003f64,
        0.003..0.02f64,
        0.0..0.2f64,
        0.0..0.2f64,
    )
        .prop_map(|(d, g, u, ka, kc, na, nc)| SystemParams::from_detuning(d, g, u, ka, kc).with_thermal(na, nc))
}

fn zero_temperature(p: SystemParams) -> SystemParams {
    p.with_thermal(0.0, 0.0)
}

fn every_builder(p: &SystemParams, space: &TruncatedSpace) -> Vec<GeneratorBundle> {
    let mut out = vec![
        build_bare(p, space, Storage::Sparse).unwrap(),
        blackbox_from_params(p, space, TermToggles::default(), Storage::Sparse).unwrap(),
    ];
    let z = zero_temperature(*p);
    let drive = DriveParams::new(-0.1, c64::new(0.004, 0.002));
    let d = displaced_frame(&z, &drive).unwrap();
    out.push(build_displaced(&d, space, TermToggles::default(), Storage::Sparse).unwrap());
    let mut jc = *p;
    jc.kappa_a = 0.0;
    out.push(build_jc(&jc, space, Storage::Sparse).unwrap());
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generators_preserve_trace(p in params(), nc in 3usize..6, na in 3usize..6) {
        let space = TruncatedSpace::new(&[nc, na]).unwrap();
        for b in every_builder(&p, &space) {
            let scale = b.superop.max_abs();
            prop_assert!(b.superop.trace_defect() <= 1e-12 * scale, "{:?}", b.basis);
        }
    }

    #[test]
    fn generators_preserve_hermiticity(p in params(), seed in prop::collection::vec(-1.0..1.0f64, 7)) {
        let space = TruncatedSpace::new(&[4, 4]).unwrap();
        for b in every_builder(&p, &space) {
            let rho = hermitian_from(b.space(), &seed);
            let drho = b.superop.apply_op(&rho);
            prop_assert!(drho.hermiticity_defect() <= 1e-12 * drho.max_abs().max(1.0));
        }
    }

    #[test]
    fn adjoint_generator_is_consistent(
        w in 0.1..2.0f64, u in 0.0..0.3f64, k in 0.0..0.1f64, n in 0.0..0.5f64,
        a in prop::collection::vec(-1.0..1.0f64, 5),
        r in prop::collection::vec(-1.0..1.0f64, 5),
    ) {
        let space = TruncatedSpace::new(&[3, 4]).unwrap();
        let c = ladder_operators(&space, CAVITY).unwrap();
        let q = ladder_operators(&space, QUBIT).unwrap();
        let kerr = &q.raise * &(&q.raise * &(&q.lower * &q.lower));
        let hop = &(&q.raise * &c.lower) + &(&c.raise * &q.lower);
        let h = &(&(&c.number * w) + &(&kerr * (-0.5 * u))) + &(&hop * 0.05);
        let ch = vec![(k * (1.0 + n), c.lower.clone()), (k * n, c.raise.clone()), (0.5 * k, q.lower.clone())];
        let l = lindblad_superoperator(&h, &ch, Storage::Sparse).unwrap();
        let la = lindblad_adjoint(&h, &ch, Storage::Sparse).unwrap();
        let aop = OperatorMatrix::from_fn(&space, |i, j| c64::new(a[(i + j) % 5], a[(2 * i + j) % 5]));
        let rho = OperatorMatrix::from_fn(&space, |i, j| c64::new(r[(i * j) % 5], r[(i + 3 * j) % 5]));
        let lhs = la.apply_op(&aop).inner(&rho);
        let rhs = aop.inner(&l.apply_op(&rho));
        prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn spectrum_comes_in_conjugate_pairs(p in params()) {
        let space = TruncatedSpace::new(&[3, 4]).unwrap();
        let b = blackbox_from_params(&p, &space, TermToggles::default(), Storage::Dense).unwrap();
        let vals = spectrum_values(&b).unwrap();
        let tol = 1e-9 * b.superop.norm_one();
        for v in &vals {
            let nearest = vals.iter().map(|w| (w - v.conj()).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(nearest <= tol, "{v:?} has no partner");
        }
    }

    #[test]
    fn steady_state_is_a_density_matrix(p in params()) {
        let space = TruncatedSpace::new(&[4, 4]).unwrap();
        for b in every_builder(&p, &space) {
            let ss = steady_state(&b).unwrap();
            prop_assert!((ss.rho.trace().re - 1.0).abs() < 1e-10);
            prop_assert!(ss.min_eigenvalue >= -1e-10 || ss.clipped);
            prop_assert!(ss.rho.hermiticity_defect() < 1e-10);
        }
    }

    #[test]
    fn population_block_ignores_kerr(u1 in 0.0..0.5f64, u2 in 0.0..0.5f64, n in 0.0..0.3f64) {
        let space = TruncatedSpace::new(&[2, 8]).unwrap();
        let osc = |u| Decoupled {
            cavity: Oscillator { omega: 0.0, kappa: 0.01, nbar: n, kerr: 0.0 },
            qubit: Oscillator { omega: 1.0, kappa: 1e-3, nbar: n, kerr: u },
        };
        let idx: Vec<usize> = (0..space.dim() * space.dim()).filter(|&v| space.coherence(v) == [0, 0]).collect();
        let ev = |u| {
            let l = osc(u).generator(&space, Storage::Sparse).unwrap();
            let mut v = eigenvalues(l.block(&idx).as_ref()).unwrap();
            v.sort_by(|a, b| a.re.total_cmp(&b.re));
            v
        };
        for (a, b) in ev(u1).iter().zip(ev(u2)) {
            prop_assert!((a - b).norm() <= 1e-10);
        }
    }

    #[test]
    fn thermal_channels_vanish_at_zero_temperature(p in params()) {
        let f = polariton_frame(&zero_temperature(p)).unwrap();
        if let Ok(b) = gamma_thermal_analytic(&f) {
            prop_assert_eq!(b.nc_nc, 0.0);
            prop_assert_eq!(b.nc_cd, 0.0);
        }
    }

    #[test]
    fn nc_cd_sign_law(p in params()) {
        let f = polariton_frame(&p).unwrap();
        let Ok(b) = gamma_thermal_analytic(&f) else { return Ok(()) };
        let drive = 8.0 * (p.kappa_c - p.kappa_a) * f.nbar_a_t - 4.0 * (p.kappa_c * p.nbar_c0 - p.kappa_a * p.nbar_a0);
        let expected = (p.delta() - p.u).signum() * drive.signum();
        if b.nc_cd.abs() > 1e-15 {
            prop_assert_eq!(b.nc_cd.signum(), expected);
        }
    }

    #[test]
    fn frame_signs_follow_detuning(p in params()) {
        let mut q = p;
        q.omega_a = q.omega_c - p.delta();
        let (f, g) = (polariton_frame(&p).unwrap(), polariton_frame(&q).unwrap());
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1e-30);
        prop_assert!(close(f.chi_t, -g.chi_t));
        prop_assert!(close(f.gamma_up, -g.gamma_up));
        prop_assert!(close(f.gamma_down, -g.gamma_down));
        prop_assert!(close(f.kappa_a_t, g.kappa_a_t));
        prop_assert!(close(f.kappa_purcell, g.kappa_purcell));
    }

    #[test]
    fn weak_drive_limit_is_the_undriven_frame(p in params()) {
        let z = zero_temperature(p);
        let f = polariton_frame(&z).unwrap();
        let d = displaced_frame(&z, &DriveParams::new(-0.1, c64::new(1e-9, 0.0))).unwrap();
        prop_assert!((d.kappa_a_tp - f.kappa_a_t).abs() <= 1e-12);
        prop_assert!((d.kappa_c_tp - f.kappa_c_t).abs() <= 1e-12);
        prop_assert!((d.chi_t_p - f.chi_t).abs() <= 1e-12);
    }
}

#[test]
fn weights_reconstruct_the_initial_state() {
    let p = SystemParams::from_detuning(1.0, 0.1, 0.05, 1e-3, 0.02).with_thermal(0.02, 0.1);
    let space = TruncatedSpace::new(&[4, 4]).unwrap();
    let b = blackbox_from_params(&p, &space, TermToggles::default(), Storage::Dense).unwrap();
    let ss = steady_state(&b).unwrap();
    let rho0 = excited_initial_state(&b, &ss.rho);
    let v0 = vectorize(&rho0);
    let vss = vectorize(&ss.rho);
    let modes = spectrum(&b, usize::MAX, true).unwrap();
    let mut sum = vec![c64::new(0.0, 0.0); v0.len()];
    for m in modes.iter().filter(|m| m.lambda.norm() > 1e-12) {
        let w: c64 = m.left.iter().zip(&v0).map(|(l, x)| l.conj() * x).sum();
        for (s, r) in sum.iter_mut().zip(&m.right) {
            *s += w * r;
        }
    }
    let err = sum.iter().zip(v0.iter().zip(&vss)).map(|(s, (a, b))| (s - (a - b)).norm()).fold(0.0, f64::max);
    assert!(err < 1e-8, "reconstruction error {err:e}");
}

#[test]
fn evolution_matches_spectral_resolution() {
    let p = SystemParams::from_detuning(-1.0, 0.1, 0.1, 0.0, 0.01).with_thermal(0.0, 0.1);
    let space = TruncatedSpace::new(&[4, 5]).unwrap();
    let b = blackbox_from_params(&p, &space, TermToggles::default(), Storage::Dense).unwrap();
    let ss = steady_state(&b).unwrap();
    let rho0 = excited_initial_state(&b, &ss.rho);
    let v0 = vectorize(&rho0);
    let modes = spectrum(&b, usize::MAX, true).unwrap();
    let times = [0.0, 50.0, 3e3, 2e4];
    let traj = evolve(&b, &rho0, &times).unwrap();
    for (t, state) in times.iter().zip(&traj.states) {
        let mut v = vec![c64::new(0.0, 0.0); v0.len()];
        for m in &modes {
            let w: c64 = m.left.iter().zip(&v0).map(|(l, x)| l.conj() * x).sum();
            let e = (m.lambda * *t).exp() * w;
            for (s, r) in v.iter_mut().zip(&m.right) {
                *s += e * r;
            }
        }
        let expect = unvectorize(&space, &v).unwrap();
        let diff = (state - &expect).max_abs();
        assert!(diff < 1e-9, "t = {t}: {diff:e}");
    }
}
