//! Steady states, Liouvillian spectra, coherence-sector labels and the two
//! numerical T1 protocols (spectral weights and direct time evolution).
//!
//! Generators that conserve the total coherence number
//! `M = Σ_modes (n_ket - n_bra)` are diagonalized block by block.

use std::collections::{BTreeMap, HashMap};

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{evd_cplx, evd_scratch, ComputeEigenvectors};
use faer::linalg::solvers::Solve;
use faer::diag::Diag;
use faer::{c64, Mat, MatRef, Par};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::fockspace::{unvectorize, vectorize, OperatorMatrix, Superoperator, TruncatedSpace};
use crate::liouvillian::GeneratorBundle;

pub const WEIGHT_THRESHOLD: f64 = 1e-8;
pub const CLUSTER_TOL: f64 = 1e-9;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const PSD_FLOOR: f64 = -1e-10;
pub const STEADY_GAP_TOL: f64 = 1e-6;
pub const TRACE_TOL: f64 = 1e-9;
pub const LABEL_SUPPORT: f64 = 0.9;
pub const FIT_FLOOR: f64 = 1e-13;
pub const FIT_RESIDUAL_FLAG: f64 = 1e-4;
pub const DEFAULT_HORIZON_DECAYS: f64 = 20.0;
pub const DEFAULT_WINDOW: f64 = 0.95;

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeKind {
    T1,
    T2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeLabel {
    pub m_c: i64,
    pub m_a: i64,
    pub k: usize,
    pub kind: ModeKind,
}

impl ModeLabel {
    pub fn new(m_c: i64, m_a: i64, k: usize) -> Self {
        let kind = if m_c == 0 && m_a == 0 { ModeKind::T1 } else { ModeKind::T2 };
        Self { m_c, m_a, k, kind }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralMode {
    pub lambda: c64,
    pub right: Vec<c64>,
    pub left: Vec<c64>,
    pub label: Option<ModeLabel>,
    pub weight: Option<c64>,
}

impl SpectralMode {
    pub fn decay_rate(&self) -> f64 {
        -self.lambda.re
    }

    pub fn right_op(&self, space: &TruncatedSpace) -> OperatorMatrix {
        unvectorize(space, &self.right).expect("mode vectors match their space")
    }

    pub fn left_op(&self, space: &TruncatedSpace) -> OperatorMatrix {
        unvectorize(space, &self.left).expect("mode vectors match their space")
    }
}

/// Eigen-decomposition with biorthonormal left/right vectors, `Tr l†l = 1`.
#[derive(Clone, Debug)]
pub struct BlockEigen {
    pub values: Vec<c64>,
    pub right: Mat<c64>,
    pub left: Mat<c64>,
}

impl BlockEigen {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rescale so that right vectors have unit norm instead of left ones.
    pub fn normalize_right(&mut self) {
        for j in 0..self.len() {
            let n = (0..self.right.nrows()).map(|i| self.right[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            if n > 0.0 {
                for i in 0..self.right.nrows() {
                    self.right[(i, j)] /= n;
                    self.left[(i, j)] *= n;
                }
            }
        }
    }
}

pub fn eigenvalues(a: MatRef<'_, c64>) -> Result<Vec<c64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    a.eigenvalues().map_err(|_| Error::NoConvergence)
}

pub fn eig_biorthonormal(a: MatRef<'_, c64>) -> Result<BlockEigen> {
    let n = a.nrows();
    if n == 0 {
        return Ok(BlockEigen { values: vec![], right: Mat::zeros(0, 0), left: Mat::zeros(0, 0) });
    }
    let par = Par::Seq;
    let mut s = Diag::<c64>::zeros(n);
    let mut ul = Mat::<c64>::zeros(n, n);
    let mut ur = Mat::<c64>::zeros(n, n);
    let req = evd_scratch::<c64>(n, ComputeEigenvectors::Yes, ComputeEigenvectors::Yes, par, Default::default());
    let mut mem = MemBuffer::new(req);
    evd_cplx(a, s.as_mut(), Some(ul.as_mut()), Some(ur.as_mut()), par, MemStack::new(&mut mem), Default::default())
        .map_err(|_| Error::NoConvergence)?;
    let values: Vec<c64> = (0..n).map(|i| s[i]).collect();

    let scale = a.norm_l2().max(f64::MIN_POSITIVE);
    let ar = a * &ur;
    for j in 0..n {
        let rn = (0..n).map(|i| ur[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        let res = (0..n).map(|i| (ar[(i, j)] - ur[(i, j)] * values[j]).norm_sqr()).sum::<f64>().sqrt();
        if res > RESIDUAL_TOL * scale * rn {
            return Err(Error::Defective(format!("eigenpair residual {:.3e}", res / (scale * rn))));
        }
    }

    // group near-degenerate eigenvalues
    let tol = CLUSTER_TOL * scale;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut k = i;
        while p[k] != r {
            let next = p[k];
            p[k] = r;
            k = next;
        }
        r
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].re.total_cmp(&values[j].re));
    for (oi, &i) in order.iter().enumerate() {
        for &j in &order[oi + 1..] {
            if values[j].re - values[i].re > tol {
                break;
            }
            if (values[i] - values[j]).norm() < tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        clusters.entry(r).or_default().push(i);
    }

    for idx in clusters.values() {
        let k = idx.len();
        let smat = Mat::from_fn(k, k, |p, q| {
            (0..n).map(|i| ul[(i, idx[p])].conj() * ur[(i, idx[q])]).sum::<c64>()
        });
        if k == 1 {
            let s0 = smat[(0, 0)];
            if s0.norm() < 1e-13 {
                return Err(Error::Defective(format!("vanishing left-right overlap {:.3e}", s0.norm())));
            }
            let f = s0.conj().inv();
            for i in 0..n {
                ul[(i, idx[0])] *= f;
            }
            continue;
        }
        let svd = smat.svd().map_err(|_| Error::NoConvergence)?;
        let sv: Vec<f64> = (0..k).map(|i| svd.S()[i].re).collect();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if smin <= 1e-10 * smax {
            return Err(Error::Defective(format!("singular overlap in a {k}-fold cluster")));
        }
        // L ← L S^{-H} with S^{-H} = U Σ^{-1} V^H
        let (u, v) = (svd.U(), svd.V());
        let sinv_h = Mat::from_fn(k, k, |p, q| (0..k).map(|m| u[(p, m)] * (v[(q, m)].conj() / sv[m])).sum::<c64>());
        let lc = Mat::from_fn(n, k, |i, p| ul[(i, idx[p])]);
        let lnew = &lc * &sinv_h;
        for (p, &col) in idx.iter().enumerate() {
            for i in 0..n {
                ul[(i, col)] = lnew[(i, p)];
            }
        }
    }

    for j in 0..n {
        let c = (0..n).map(|i| ul[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            ul[(i, j)] /= c;
            ur[(i, j)] *= c;
        }
    }
    Ok(BlockEigen { values, right: ur, left: ul })
}

/// A set of vectorized indices closed under the generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sector {
    pub total_m: Option<i64>,
    pub indices: Vec<usize>,
}

fn total_coherence(space: &TruncatedSpace, v: usize) -> i64 {
    space.coherence(v).iter().sum()
}

/// Total-coherence blocks of `superop`, or one block if `M` is not conserved.
pub fn coherence_sectors(superop: &Superoperator) -> Vec<Sector> {
    let space = superop.space();
    let n = superop.dim();
    let m: Vec<i64> = (0..n).map(|v| total_coherence(space, v)).collect();
    let conserved = superop.entries().iter().all(|&(r, c, _)| m[r] == m[c]);
    if !conserved {
        return vec![Sector { total_m: None, indices: (0..n).collect() }];
    }
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (v, &mv) in m.iter().enumerate() {
        groups.entry(mv).or_default().push(v);
    }
    groups.into_iter().map(|(mv, indices)| Sector { total_m: Some(mv), indices }).collect()
}

/// The block containing populations (`M = 0`).
pub fn population_sector(superop: &Superoperator) -> Sector {
    coherence_sectors(superop)
        .into_iter()
        .find(|s| s.total_m.is_none() || s.total_m == Some(0))
        .expect("a population sector always exists")
}

fn embed(n: usize, indices: &[usize], local: impl Fn(usize) -> c64) -> Vec<c64> {
    let mut v = vec![ZERO; n];
    for (i, &g) in indices.iter().enumerate() {
        v[g] = local(i);
    }
    v
}

/// Per-mode coherence sector `(m_c, m_a)` holding at least 90% of the weight.
fn dominant_sector(space: &TruncatedSpace, indices: &[usize], col: impl Fn(usize) -> c64) -> Option<(i64, i64)> {
    let mut w: HashMap<(i64, i64), f64> = HashMap::new();
    let mut total = 0.0;
    for (i, &g) in indices.iter().enumerate() {
        let x = col(i).norm_sqr();
        if x == 0.0 {
            continue;
        }
        let coh = space.coherence(g);
        let key = (coh[0], *coh.get(1).unwrap_or(&0));
        *w.entry(key).or_default() += x;
        total += x;
    }
    w.into_iter()
        .filter(|(_, x)| *x >= LABEL_SUPPORT * total)
        .map(|(k, _)| k)
        .next()
}

fn by_decay(a: c64, b: c64) -> std::cmp::Ordering {
    a.re.abs().total_cmp(&b.re.abs()).then(a.im.total_cmp(&b.im))
}

struct SectorEigen {
    sector: Sector,
    eig: BlockEigen,
}

fn diagonalize_sectors(bundle: &GeneratorBundle, normalize: bool) -> Result<Vec<SectorEigen>> {
    coherence_sectors(&bundle.superop)
        .into_iter()
        .map(|sector| {
            let block = bundle.superop.block(&sector.indices);
            let mut eig = eig_biorthonormal(block.as_ref())?;
            if !normalize {
                eig.normalize_right();
            }
            Ok(SectorEigen { sector, eig })
        })
        .collect()
}

/// The `count` slowest modes, sorted by `|Re λ|`.
///
/// With `normalize` the left vectors satisfy `Tr l†l = 1`; otherwise the
/// right vectors are unit-norm. Both conventions are biorthonormal.
pub fn spectrum(bundle: &GeneratorBundle, count: usize, normalize: bool) -> Result<Vec<SpectralMode>> {
    let blocks = diagonalize_sectors(bundle, normalize)?;
    let space = bundle.space();
    let n = bundle.superop.dim();

    let mut all: Vec<(c64, usize, usize, Option<(i64, i64)>)> = Vec::new();
    for (b, se) in blocks.iter().enumerate() {
        for j in 0..se.eig.len() {
            let dom = dominant_sector(space, &se.sector.indices, |i| se.eig.right[(i, j)]);
            all.push((se.eig.values[j], b, j, dom));
        }
    }
    all.sort_by(|x, y| by_decay(x.0, y.0));
    let mut rank: HashMap<(i64, i64), usize> = HashMap::new();
    let labels: Vec<Option<ModeLabel>> = all
        .iter()
        .map(|&(_, _, _, dom)| {
            dom.map(|(mc, ma)| {
                let k = rank.entry((mc, ma)).or_default();
                let label = ModeLabel::new(mc, ma, *k);
                *k += 1;
                label
            })
        })
        .collect();

    Ok(all
        .iter()
        .zip(labels)
        .take(count)
        .map(|(&(lambda, b, j, _), label)| {
            let se = &blocks[b];
            SpectralMode {
                lambda,
                right: embed(n, &se.sector.indices, |i| se.eig.right[(i, j)]),
                left: embed(n, &se.sector.indices, |i| se.eig.left[(i, j)]),
                label,
                weight: None,
            }
        })
        .collect())
}

/// Eigenvalues only, sorted by `|Re λ|`.
pub fn spectrum_values(bundle: &GeneratorBundle) -> Result<Vec<c64>> {
    let mut out = Vec::new();
    for sector in coherence_sectors(&bundle.superop) {
        out.extend(eigenvalues(bundle.superop.block(&sector.indices).as_ref())?);
    }
    out.sort_by(|a, b| by_decay(*a, *b));
    Ok(out)
}

/// Labels of the `count` slowest modes; `None` marks a mixed mode.
pub fn block_labels(bundle: &GeneratorBundle, count: usize) -> Result<Vec<(c64, Option<ModeLabel>)>> {
    Ok(spectrum(bundle, count, true)?.into_iter().map(|m| (m.lambda, m.label)).collect())
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: OperatorMatrix,
    pub min_eigenvalue: f64,
    pub clipped: bool,
}

fn steady_from_block(superop: &Superoperator, sector: &Sector, values: &[c64]) -> Result<SteadyState> {
    let space = superop.space();
    let d = space.dim();
    let diss = values.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
    let near_zero = values.iter().filter(|v| v.norm() <= STEADY_GAP_TOL * diss).count();
    if near_zero > 1 {
        return Err(Error::DegenerateSteadyState(near_zero));
    }

    let block = superop.block(&sector.indices);
    let k = sector.indices.len();
    let is_diag = |g: usize| g % d == g / d;
    let anchor = sector.indices.iter().position(|&g| g == 0).expect("vacuum population lies in the sector");
    let mut sys = block;
    for (j, &g) in sector.indices.iter().enumerate() {
        sys[(anchor, j)] = if is_diag(g) { c64::new(1.0, 0.0) } else { ZERO };
    }
    let mut rhs = Mat::<c64>::zeros(k, 1);
    rhs[(anchor, 0)] = c64::new(1.0, 0.0);
    let x = sys.partial_piv_lu().solve(&rhs);
    let v = embed(d * d, &sector.indices, |i| x[(i, 0)]);
    let rho = unvectorize(space, &v)?.hermitized();
    let tr = rho.trace().re;
    let rho = rho.scaled(c64::new(1.0 / tr, 0.0));
    physical_state(rho)
}

/// Enforce the PSD floor, clipping small negative eigenvalues.
fn physical_state(rho: OperatorMatrix) -> Result<SteadyState> {
    let evd = rho.data().self_adjoint_eigen(faer::Side::Lower).map_err(|_| Error::NoConvergence)?;
    let n = rho.dim();
    let ev: Vec<f64> = (0..n).map(|i| evd.S()[i].re).collect();
    let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    if min >= PSD_FLOOR {
        return Ok(SteadyState { rho, min_eigenvalue: min, clipped: false });
    }
    let neg: f64 = ev.iter().filter(|&&x| x < 0.0).map(|x| -x).sum();
    if neg > 1e-6 {
        return Err(Error::NonPhysicalState(min));
    }
    log::warn!("steady state eigenvalue {min:.3e} below floor; clipping");
    let u = evd.U();
    let kept: Vec<f64> = ev.iter().map(|&x| x.max(0.0)).collect();
    let tr: f64 = kept.iter().sum();
    let m = Mat::from_fn(n, n, |i, j| (0..n).map(|k| u[(i, k)] * u[(j, k)].conj() * (kept[k] / tr)).sum::<c64>());
    Ok(SteadyState { rho: OperatorMatrix::from_mat(rho.space(), m)?, min_eigenvalue: min, clipped: true })
}

pub fn steady_state(bundle: &GeneratorBundle) -> Result<SteadyState> {
    let sector = population_sector(&bundle.superop);
    let values = eigenvalues(bundle.superop.block(&sector.indices).as_ref())?;
    steady_from_block(&bundle.superop, &sector, &values)
}

/// `a† ρ a / Tr(·)` for the qubit ladder of the bundle.
pub fn excited_initial_state(bundle: &GeneratorBundle, rho_ss: &OperatorMatrix) -> OperatorMatrix {
    let a = bundle.qubit_ladder();
    let x = &(&a.raise * rho_ss) * &a.lower;
    let tr = x.trace().re;
    x.scaled(c64::new(1.0 / tr, 0.0))
}

#[derive(Clone, Debug)]
pub struct T1Diag {
    /// `-Re λ` of the slowest excited mode with non-negligible weight.
    pub gamma: f64,
    /// `-Re λ` of the excited mode with the largest weight.
    pub gamma_by_weight: f64,
    pub criteria_agree: bool,
    pub mode: SpectralMode,
    pub steady: SteadyState,
}

pub fn t1_rate_diag(bundle: &GeneratorBundle) -> Result<T1Diag> {
    let sector = population_sector(&bundle.superop);
    let block = bundle.superop.block(&sector.indices);
    let eig = eig_biorthonormal(block.as_ref())?;
    let steady = steady_from_block(&bundle.superop, &sector, &eig.values)?;
    let rho0 = excited_initial_state(bundle, &steady.rho);
    let v0 = vectorize(&rho0);
    let local: Vec<c64> = sector.indices.iter().map(|&g| v0[g]).collect();
    let k = eig.len();
    let weights: Vec<c64> = (0..k).map(|j| (0..k).map(|i| eig.left[(i, j)].conj() * local[i]).sum()).collect();

    let ss = (0..k).min_by(|&i, &j| eig.values[i].norm().total_cmp(&eig.values[j].norm())).unwrap();
    // A drive mixes coherence orders; keep modes that live mostly at M = 0.
    let space = bundle.space();
    let mixed = sector.total_m.is_none();
    let population_like = |j: usize| {
        let (mut zero, mut total) = (0.0, 0.0);
        for (i, &g) in sector.indices.iter().enumerate() {
            let x = eig.right[(i, j)].norm_sqr();
            total += x;
            if total_coherence(space, g) == 0 {
                zero += x;
            }
        }
        zero >= 0.5 * total
    };
    let cand: Vec<usize> = (0..k)
        .filter(|&j| j != ss && weights[j].norm() > WEIGHT_THRESHOLD && (!mixed || population_like(j)))
        .collect();
    if cand.is_empty() {
        return Err(Error::NoExcitedMode);
    }
    let slowest = *cand
        .iter()
        .min_by(|&&i, &&j| {
            (-eig.values[i].re)
                .total_cmp(&-eig.values[j].re)
                .then(weights[j].norm().total_cmp(&weights[i].norm()))
        })
        .unwrap();
    let largest = *cand.iter().max_by(|&&i, &&j| weights[i].norm().total_cmp(&weights[j].norm())).unwrap();
    let (g1, g2) = (-eig.values[slowest].re, -eig.values[largest].re);
    let agree = (g1 - g2).abs() <= 1e-6 * g1.abs().max(g2.abs());
    if !agree {
        log::warn!("T1 mode criteria disagree: slowest {g1:.6e}, largest weight {g2:.6e}");
    }

    let n = bundle.superop.dim();
    let dom = dominant_sector(space, &sector.indices, |i| eig.right[(i, slowest)]);
    let mode = SpectralMode {
        lambda: eig.values[slowest],
        right: embed(n, &sector.indices, |i| eig.right[(i, slowest)]),
        left: embed(n, &sector.indices, |i| eig.left[(i, slowest)]),
        label: dom.map(|(mc, ma)| ModeLabel::new(mc, ma, 1)),
        weight: Some(weights[slowest]),
    };
    Ok(T1Diag { gamma: g1, gamma_by_weight: g2, criteria_agree: agree, mode, steady })
}

/// Propagate `rho0` through `times`, calling `visit` on each state.
pub fn evolve_with(
    bundle: &GeneratorBundle,
    rho0: &OperatorMatrix,
    times: &[f64],
    mut visit: impl FnMut(usize, &OperatorMatrix),
) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidParams("times must be finite and non-negative".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParams("times must be sorted".into()));
    }
    let space = bundle.space();
    let n = bundle.superop.dim();
    let v0 = vectorize(rho0);
    let tr0 = rho0.trace();

    struct Active {
        indices: Vec<usize>,
        block: Mat<c64>,
        state: Mat<c64>,
        cache: HashMap<u64, Mat<c64>>,
    }
    let mut active: Vec<Active> = coherence_sectors(&bundle.superop)
        .into_iter()
        .filter(|s| s.indices.iter().any(|&g| v0[g] != ZERO))
        .map(|s| {
            let state = Mat::from_fn(s.indices.len(), 1, |i, _| v0[s.indices[i]]);
            Active { block: bundle.superop.block(&s.indices), indices: s.indices, state, cache: HashMap::new() }
        })
        .collect();

    let mut t_prev = 0.0;
    for (step, &t) in times.iter().enumerate() {
        let dt = t - t_prev;
        t_prev = t;
        let mut v = vec![ZERO; n];
        for a in &mut active {
            if dt > 0.0 {
                let block = &a.block;
                let p = a.cache.entry(dt.to_bits()).or_insert_with(|| {
                    let scaled = Mat::from_fn(block.nrows(), block.ncols(), |i, j| block[(i, j)] * dt);
                    expm(scaled.as_ref())
                });
                a.state = &*p * &a.state;
            }
            for (i, &g) in a.indices.iter().enumerate() {
                v[g] = a.state[(i, 0)];
            }
        }
        let rho = unvectorize(space, &v)?;
        let drift = (rho.trace() - tr0).norm();
        if drift > TRACE_TOL {
            return Err(Error::TraceDrift(drift));
        }
        visit(step, &rho);
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<OperatorMatrix>,
}

pub fn evolve(bundle: &GeneratorBundle, rho0: &OperatorMatrix, times: &[f64]) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(times.len());
    evolve_with(bundle, rho0, times, |_, r| states.push(r.clone()))?;
    Ok(Trajectory { times: times.to_vec(), states })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub gamma: f64,
    pub amplitude: f64,
    pub fit_window: (f64, f64),
    /// RMS relative deviation of the data from the fitted exponential.
    pub residual: f64,
    pub flagged: bool,
}

/// Least-squares fit of `log y = log A - Γ t`.
pub fn fit_exponential(times: &[f64], values: &[f64]) -> Result<FitResult> {
    if times.len() != values.len() || times.len() < 3 {
        return Err(Error::FitRejected("need at least three samples".into()));
    }
    if let Some(v) = values.iter().find(|&&v| !(v > FIT_FLOOR)) {
        return Err(Error::FitRejected(format!("observable {v:.3e} below numerical floor")));
    }
    if values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::FitRejected("observable is not monotonically decaying".into()));
    }
    let n = times.len() as f64;
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let tm = times.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = times.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = times.iter().zip(&y).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let residual = (times
        .iter()
        .zip(values)
        .map(|(t, v)| ((intercept + slope * t).exp() / v - 1.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(FitResult {
        gamma: -slope,
        amplitude: intercept.exp(),
        fit_window: (times[0], times[times.len() - 1]),
        residual,
        flagged: residual > FIT_RESIDUAL_FLAG,
    })
}

/// Time-domain T1 estimate from `⟨a†a⟩(t) - ⟨a†a⟩_ss` on `[window·T, T]`.
///
/// The default horizon is 20 inverse leading-order qubit rates.
pub fn t1_rate_fit(bundle: &GeneratorBundle, horizon: Option<f64>, window: f64) -> Result<FitResult> {
    if !(window > 0.0 && window < 1.0) {
        return Err(Error::InvalidParams(format!("window fraction {window} outside (0, 1)")));
    }
    let horizon = match horizon {
        Some(t) => t,
        None => DEFAULT_HORIZON_DECAYS / bundle.reference_rate(),
    };
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParams(format!("horizon {horizon}")));
    }
    let ss = steady_state(bundle)?;
    let rho0 = excited_initial_state(bundle, &ss.rho);
    let num = bundle.qubit_ladder().number;
    let n_ss = num.expectation(&ss.rho).re;

    let steps = 400usize.max((40.0 / (1.0 - window)).ceil() as usize);
    let times: Vec<f64> = (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect();
    let start = window * horizon;
    let (mut ts, mut ys) = (Vec::new(), Vec::new());
    evolve_with(bundle, &rho0, &times, |i, rho| {
        if times[i] >= start * (1.0 - 1e-12) {
            ts.push(times[i]);
            ys.push(num.expectation(rho).re - n_ss);
        }
    })?;
    fit_exponential(&ts, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{ladder_operators, lindblad_superoperator, Storage};
    use crate::liouvillian::{Basis, Frame, TermToggles};
    use crate::model::SystemParams;

    fn damped(n: usize, kappa: f64, nbar: f64, omega: f64) -> GeneratorBundle {
        let s = TruncatedSpace::new(&[2, n]).unwrap();
        let a = ladder_operators(&s, 1).unwrap();
        let l = lindblad_superoperator(
            &(&a.number * omega),
            &[(kappa * (1.0 + nbar), a.lower.clone()), (kappa * nbar, a.raise.clone())],
            Storage::Sparse,
        )
        .unwrap();
        let c = ladder_operators(&s, 0).unwrap();
        let l = l
            .sum(&lindblad_superoperator(&c.number, &[(1.0, c.lower.clone())], Storage::Sparse).unwrap())
            .unwrap();
        GeneratorBundle {
            superop: l,
            frame: Frame::Bare(SystemParams::from_detuning(1.0, 0.0, 0.0, kappa, 1.0)),
            basis: Basis::Bare,
            toggles: TermToggles::none(),
        }
    }

    #[test]
    fn left_vectors_solve_the_adjoint_problem() {
        let a = Mat::from_fn(4, 4, |i, j| c64::new((i * 3 + j) as f64 % 5.0 - 2.0, (i as f64 - j as f64) * 0.3));
        let e = eig_biorthonormal(a.as_ref()).unwrap();
        let ah = a.adjoint().to_owned();
        for j in 0..4 {
            let l = Mat::from_fn(4, 1, |i, _| e.left[(i, j)]);
            let r = &ah * &l;
            for i in 0..4 {
                assert!((r[(i, 0)] - l[(i, 0)] * e.values[j].conj()).norm() < 1e-12);
            }
        }
        let s = e.left.adjoint() * &e.right;
        for p in 0..4 {
            for q in 0..4 {
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((s[(p, q)] - c64::new(want, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn degenerate_eigenvalues_are_biorthonormalized() {
        let mut a = Mat::<c64>::zeros(4, 4);
        a[(0, 0)] = c64::new(-1.0, 0.0);
        a[(1, 1)] = c64::new(-1.0, 0.0);
        a[(2, 2)] = c64::new(-2.0, 0.0);
        a[(3, 3)] = c64::new(-1.0, 0.0);
        a[(0, 2)] = c64::new(0.5, 0.0);
        a[(3, 2)] = c64::new(0.2, 0.1);
        let e = eig_biorthonormal(a.as_ref()).unwrap();
        let s = e.left.adjoint() * &e.right;
        let id = Mat::<c64>::identity(4, 4);
        assert!((&s - &id).norm_max() < 1e-10);
    }

    #[test]
    fn jordan_block_is_defective() {
        let mut a = Mat::<c64>::zeros(2, 2);
        a[(0, 0)] = c64::new(-1.0, 0.0);
        a[(1, 1)] = c64::new(-1.0, 0.0);
        a[(0, 1)] = c64::new(1.0, 0.0);
        assert!(matches!(eig_biorthonormal(a.as_ref()), Err(Error::Defective(_))));
    }

    #[test]
    fn thermal_oscillator_steady_state_is_geometric() {
        let b = damped(14, 0.3, 0.1, 1.0);
        let ss = steady_state(&b).unwrap();
        for n in 0..6 {
            let idx = b.space().index_of(&[0, n]).unwrap();
            let p = (1.0 / 1.1) * (1.0f64 / 11.0).powi(n as i32);
            assert!((ss.rho.get(idx, idx).re - p).abs() < 1e-10);
        }
    }

    #[test]
    fn population_block_eigenvalues() {
        for nbar in [0.0, 0.05, 0.2] {
            let b = damped(28, 0.3, nbar, 1.0);
            let sector = population_sector(&b.superop);
            let mut v = eigenvalues(b.superop.block(&sector.indices).as_ref()).unwrap();
            v.sort_by(|a, b| by_decay(*a, *b));
            // the qubit-only ladder −kκ, cavity excursions excluded by rank
            let q: Vec<f64> = v.iter().map(|x| -x.re).filter(|r| (r / 0.3 - (r / 0.3).round()).abs() < 1e-6).collect();
            for k in 0..4 {
                assert!(q.iter().any(|r| (r - 0.3 * k as f64).abs() < 1e-9), "nbar {nbar} k {k}");
            }
        }
    }

    #[test]
    fn decay_rate_of_a_single_excitation() {
        let b = damped(6, 0.2, 0.0, 1.0);
        let d = t1_rate_diag(&b).unwrap();
        assert!((d.gamma - 0.2).abs() < 1e-12);
        assert!(d.criteria_agree);
    }

    #[test]
    fn evolution_matches_exponential_decay() {
        let b = damped(4, 0.5, 0.0, 2.0);
        let s = b.space().clone();
        let rho0 = OperatorMatrix::outer(&s, &[0, 1], &[0, 1]).unwrap();
        let times: Vec<f64> = (0..20).map(|k| 0.37 * k as f64).collect();
        let num = ladder_operators(&s, 1).unwrap().number;
        let tr = evolve(&b, &rho0, &times).unwrap();
        for (t, r) in times.iter().zip(&tr.states) {
            assert!((num.expectation(r).re - (-0.5 * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn unitary_evolution_keeps_populations() {
        let s = TruncatedSpace::new(&[2, 4]).unwrap();
        let a = ladder_operators(&s, 1).unwrap();
        let l = lindblad_superoperator(&(&a.number * 1.7), &[], Storage::Sparse).unwrap();
        let b = GeneratorBundle {
            superop: l,
            frame: Frame::Bare(SystemParams::from_detuning(1.0, 0.0, 0.0, 0.0, 0.0)),
            basis: Basis::Bare,
            toggles: TermToggles::none(),
        };
        let psi: Vec<f64> = vec![0.6, 0.48, 0.64];
        let rho0 = OperatorMatrix::from_fn(&s, |i, j| {
            let (oi, oj) = (s.occupations(i), s.occupations(j));
            if oi[0] == 0 && oj[0] == 0 && oi[1] < 3 && oj[1] < 3 {
                c64::new(psi[oi[1]] * psi[oj[1]], 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        let tr = evolve(&b, &rho0, &[0.0, 0.5, 3.3]).unwrap();
        for r in &tr.states {
            for n in 0..3 {
                let idx = s.index_of(&[0, n]).unwrap();
                assert!((r.get(idx, idx).re - psi[n] * psi[n]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn unsorted_times_rejected() {
        let b = damped(3, 0.5, 0.0, 1.0);
        let rho0 = OperatorMatrix::outer(b.space(), &[0, 1], &[0, 1]).unwrap();
        assert!(evolve(&b, &rho0, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn synthetic_single_exponential() {
        let t: Vec<f64> = (0..30).map(|k| 10.0 + 0.5 * k as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.7 * (-0.13 * t).exp()).collect();
        let f = fit_exponential(&t, &y).unwrap();
        assert!((f.gamma - 0.13).abs() < 1e-12);
        assert!((f.amplitude - 0.7).abs() < 1e-10);
        assert!(!f.flagged);
    }

    #[test]
    fn synthetic_transient_is_flagged() {
        let t: Vec<f64> = (0..30).map(|k| 0.2 * k as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.5 * (-0.1 * t).exp() + 0.5 * (-2.0 * t).exp()).collect();
        let f = fit_exponential(&t, &y).unwrap();
        assert!(f.flagged);
    }

    #[test]
    fn rising_signal_rejected() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert!(matches!(fit_exponential(&t, &[1.0, 0.5, 0.6, 0.2]), Err(Error::FitRejected(_))));
        assert!(matches!(fit_exponential(&t, &[1.0, 0.5, 0.0, -0.1]), Err(Error::FitRejected(_))));
    }

    #[test]
    fn fit_protocol_on_pure_decay() {
        let b = damped(5, 0.2, 0.0, 1.0);
        let f = t1_rate_fit(&b, Some(40.0), 0.95).unwrap();
        assert!((f.gamma - 0.2).abs() < 1e-9);
    }
}
