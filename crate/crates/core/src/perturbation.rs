//! Closed-form eigenmodes of the decoupled generator, a generic second-order
//! Lindblad perturbation engine and the analytic relaxation-rate formulas.
//!
//! Unperturbed modes are products `r_cavity ⊗ r_qubit` of single-oscillator
//! modes. Population (T1) modes are exact thermal-oscillator modes; qubit
//! coherence (T2) modes are Fock outer products, valid for `U ≫ κ̃_a`.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{ladder_operators, Storage, Superoperator, SuperoperatorBuilder, TruncatedSpace};
use crate::liouvillian::{blackbox_parts, build_displaced, TermToggles, CAVITY, QUBIT};
use crate::model::{DisplacedFrame, Flag, PolaritonFrame, SystemParams};
use crate::spectral::{eigenvalues, ModeLabel, SpectralMode};

pub const COVERAGE_TOL: f64 = 1e-6;
pub const GAP_TOL: f64 = 1e-9;
pub const KERR_GUARD: f64 = 10.0;
pub const DRIVE_GUARD: f64 = 10.0;
pub const LOW_TEMPERATURE_MAX: f64 = 0.2;
pub const DEGRADED_KERR: f64 = 0.05;

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

fn dot(l: &[c64], r: &[c64]) -> c64 {
    l.iter().zip(r).map(|(a, b)| a.conj() * b).sum()
}

fn norm(v: &[c64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Right and left population profiles of the k-th thermal-oscillator T1 mode.
///
/// `r_k(n)` and `l_k(n)` are Meixner polynomials weighted by the thermal
/// distribution; the eigenvalue is `-k κ` independent of `nbar`. The k = 1
/// pair is normalized so that `Σ l_1 r_1 = 1`.
pub fn thermal_population_mode(cutoff: usize, k: usize, nbar: f64) -> (Vec<f64>, Vec<f64>) {
    let q = 1.0 + nbar;
    let right = (0..cutoff)
        .map(|n| {
            let s: f64 = (0..=k.min(n))
                .map(|j| binomial(k, j) * binomial(n, j) * (-1f64).powi(j as i32) * nbar.powi((n - j) as i32))
                .sum();
            q.powi(k as i32) * s / q.powi(n as i32 + 1)
        })
        .collect();
    let left = (0..cutoff)
        .map(|n| {
            let s: f64 = (0..=k.min(n))
                .map(|j| binomial(k, j) * binomial(n, j) * (-1f64).powi(j as i32) * nbar.powi((k - j) as i32))
                .sum();
            s / q.powi(2 * k as i32)
        })
        .collect();
    (right, left)
}

/// Raising-type (`m = +1`, k = 0) coherence mode of a thermal oscillator:
/// `r = Σ c^{n-1} √n |n⟩⟨n-1|` and `l = Σ √n/(1+n̄) |n⟩⟨n-1|`, `c = n̄/(1+n̄)`.
///
/// As written the pair has overlap `1 + n̄`; callers renormalize.
pub fn thermal_coherence_mode(cutoff: usize, nbar: f64) -> (Mat<c64>, Mat<c64>) {
    let c = nbar / (1.0 + nbar);
    let mut r = Mat::<c64>::zeros(cutoff, cutoff);
    let mut l = Mat::<c64>::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        let s = (n as f64).sqrt();
        r[(n, n - 1)] = c64::new(c.powi(n as i32 - 1) * s, 0.0);
        l[(n, n - 1)] = c64::new(s / (1.0 + nbar), 0.0);
    }
    (r, l)
}

/// Parameters of one decoupled oscillator in a generator's rotating frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oscillator {
    pub omega: f64,
    pub kappa: f64,
    pub nbar: f64,
    /// Kerr constant `U` (the self-Kerr term is `-(U/2) a†a†aa`); zero for the cavity.
    pub kerr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decoupled {
    pub cavity: Oscillator,
    pub qubit: Oscillator,
}

impl Decoupled {
    pub fn from_polariton(f: &PolaritonFrame) -> Self {
        Self {
            cavity: Oscillator { omega: f.omega_c_t, kappa: f.kappa_c_t, nbar: f.nbar_c_t, kerr: 0.0 },
            qubit: Oscillator { omega: f.omega_a_t, kappa: f.kappa_a_t, nbar: f.nbar_a_t, kerr: f.params.u },
        }
    }

    pub fn from_displaced(d: &DisplacedFrame) -> Self {
        Self {
            cavity: Oscillator { omega: d.omega_c_tp, kappa: d.kappa_c_tp, nbar: 0.0, kerr: 0.0 },
            qubit: Oscillator { omega: d.omega_a_tp, kappa: d.kappa_a_tp, nbar: 0.0, kerr: d.params.u },
        }
    }
}

impl Decoupled {
    /// Exact generator of the two independent oscillators, the reference the
    /// closed-form modes are checked against.
    pub fn generator(&self, space: &TruncatedSpace, storage: Storage) -> Result<Superoperator> {
        if space.n_modes() != 2 {
            return Err(Error::ShapeMismatch("the decoupled generator needs a cavity-qubit space".into()));
        }
        let mut b = SuperoperatorBuilder::new(space);
        for (mode, osc) in [(CAVITY, &self.cavity), (QUBIT, &self.qubit)] {
            let l = ladder_operators(space, mode)?;
            let kerr = &l.raise * &(&l.raise * &(&l.lower * &l.lower));
            b.hamiltonian(&(&(&l.number * osc.omega) + &(&kerr * (-0.5 * osc.kerr))))?;
            b.dissipator(&l.lower, osc.kappa * (1.0 + osc.nbar))?;
            b.dissipator(&l.raise, osc.kappa * osc.nbar)?;
        }
        Ok(b.build(storage))
    }
}

/// Single-oscillator factor of a product mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocalMode {
    /// k-th population (T1) mode; k = 0 is the thermal steady state.
    Population(usize),
    /// Coherence mode in sector `m = ±1`. For the cavity only k = 0 has a
    /// closed form; for the qubit it is the Fock outer product
    /// `|k+1⟩⟨k|` (m = +1) or `|k⟩⟨k+1|` (m = -1).
    Coherence { m: i64, k: usize },
}

impl LocalMode {
    pub fn m(&self) -> i64 {
        match self {
            LocalMode::Population(_) => 0,
            LocalMode::Coherence { m, .. } => *m,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            LocalMode::Population(k) | LocalMode::Coherence { k, .. } => *k,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeRequest {
    pub cavity: LocalMode,
    pub qubit: LocalMode,
}

impl ModeRequest {
    pub fn new(cavity: LocalMode, qubit: LocalMode) -> Self {
        Self { cavity, qubit }
    }

    /// Label with `k` taken from the qubit factor.
    pub fn label(&self) -> ModeLabel {
        ModeLabel::new(self.cavity.m(), self.qubit.m(), self.qubit.k())
    }

    /// The qubit T1 mode: cavity steady state times the first qubit population mode.
    pub fn qubit_t1() -> Self {
        Self::new(LocalMode::Population(0), LocalMode::Population(1))
    }
}

impl From<ModeLabel> for ModeRequest {
    /// Maps `(m_c, m_a, k)`: a cavity factor in its steady state (m_c = 0) or
    /// k = 0 coherence mode, and a qubit factor with index k.
    fn from(l: ModeLabel) -> Self {
        let cavity = if l.m_c == 0 { LocalMode::Population(0) } else { LocalMode::Coherence { m: l.m_c, k: 0 } };
        let qubit =
            if l.m_a == 0 { LocalMode::Population(l.k) } else { LocalMode::Coherence { m: l.m_a, k: l.k } };
        Self { cavity, qubit }
    }
}

struct LocalPair {
    right: Mat<c64>,
    left: Mat<c64>,
    lambda: c64,
}

fn normalize_pair(mut p: LocalPair) -> Result<LocalPair> {
    let s: c64 = (0..p.right.nrows())
        .flat_map(|i| (0..p.right.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| p.left[(i, j)].conj() * p.right[(i, j)])
        .sum();
    if s.norm() < 1e-14 {
        return Err(Error::Defective("closed-form pair has vanishing overlap".into()));
    }
    let f = s.conj().inv();
    for i in 0..p.left.nrows() {
        for j in 0..p.left.ncols() {
            p.left[(i, j)] *= f;
        }
    }
    Ok(p)
}

fn local_mode(osc: &Oscillator, cutoff: usize, mode: LocalMode, is_qubit: bool) -> Result<LocalPair> {
    let outside = |what: String| Error::InvalidParams(format!("{what} lies outside a cutoff of {cutoff}"));
    match mode {
        LocalMode::Population(k) => {
            if k >= cutoff {
                return Err(outside(format!("population mode k = {k}")));
            }
            let (r, l) = thermal_population_mode(cutoff, k, osc.nbar);
            let right = Mat::from_fn(cutoff, cutoff, |i, j| if i == j { c64::new(r[i], 0.0) } else { ZERO });
            let left = Mat::from_fn(cutoff, cutoff, |i, j| if i == j { c64::new(l[i], 0.0) } else { ZERO });
            normalize_pair(LocalPair { right, left, lambda: c64::new(-(k as f64) * osc.kappa, 0.0) })
        }
        LocalMode::Coherence { m, k } => {
            if m.abs() != 1 {
                return Err(Error::Unsupported(format!("no closed form for coherence sector m = {m}")));
            }
            let sign = m as f64;
            if !is_qubit {
                if k != 0 {
                    return Err(Error::Unsupported("cavity coherence modes are available for k = 0 only".into()));
                }
                let (r, l) = thermal_coherence_mode(cutoff, osc.nbar);
                let lambda = c64::new(-osc.kappa / 2.0, -osc.omega);
                let pair = LocalPair { right: r, left: l, lambda };
                let pair = normalize_pair(pair)?;
                return Ok(if m > 0 {
                    pair
                } else {
                    LocalPair { right: pair.right.adjoint().to_owned(), left: pair.left.adjoint().to_owned(), lambda: pair.lambda.conj() }
                });
            }
            if k + 1 >= cutoff {
                return Err(outside(format!("qubit coherence mode k = {k}")));
            }
            if osc.kerr.abs() < KERR_GUARD * osc.kappa {
                return Err(Error::Guard(format!(
                    "Kerr coherence modes need U ≥ {KERR_GUARD} κ̃_a (U = {:.3e}, κ̃_a = {:.3e})",
                    osc.kerr, osc.kappa
                )));
            }
            let n = osc.nbar;
            let kf = k as f64;
            let re = -(osc.kappa / 2.0) * (n * (2.0 * kf + 3.0) + (1.0 + n) * (2.0 * kf + 1.0));
            let lambda = c64::new(re, -sign * (osc.omega - osc.kerr * kf));
            let (ket, bra) = if m > 0 { (k + 1, k) } else { (k, k + 1) };
            let e = Mat::from_fn(cutoff, cutoff, |i, j| if i == ket && j == bra { c64::new(1.0, 0.0) } else { ZERO });
            Ok(LocalPair { right: e.clone(), left: e, lambda })
        }
    }
}

/// Vectorized `cav ⊗ qub` on a (cavity, qubit) space, column stacking.
fn product_vector(space: &TruncatedSpace, cav: &Mat<c64>, qub: &Mat<c64>) -> Vec<c64> {
    let dims = space.dims();
    let (nc, na) = (dims[CAVITY], dims[QUBIT]);
    let d = nc * na;
    let mut v = vec![ZERO; d * d];
    let nz = |m: &Mat<c64>| -> Vec<(usize, usize, c64)> {
        let mut out = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != ZERO {
                    out.push((i, j, m[(i, j)]));
                }
            }
        }
        out
    };
    let (cz, az) = (nz(cav), nz(qub));
    for &(ic, jc, x) in &cz {
        for &(ia, ja, y) in &az {
            let (i, j) = (ic * na + ia, jc * na + ja);
            v[j * d + i] = x * y;
        }
    }
    v
}

/// Closed-form unperturbed modes on a cavity-qubit space.
#[derive(Clone, Debug)]
pub struct UnperturbedModeSet {
    pub space: TruncatedSpace,
    pub params: Decoupled,
    pub requests: Vec<ModeRequest>,
    pub modes: Vec<SpectralMode>,
}

impl UnperturbedModeSet {
    pub fn build(params: Decoupled, space: &TruncatedSpace, requests: &[ModeRequest]) -> Result<Self> {
        if space.n_modes() != 2 {
            return Err(Error::ShapeMismatch("closed-form modes need a cavity-qubit space".into()));
        }
        let dims = space.dims();
        let mut modes = Vec::with_capacity(requests.len());
        for req in requests {
            let c = local_mode(&params.cavity, dims[CAVITY], req.cavity, false)?;
            let a = local_mode(&params.qubit, dims[QUBIT], req.qubit, true)?;
            let mut right = product_vector(space, &c.right, &a.right);
            let mut left = product_vector(space, &c.left, &a.left);
            // Tr l†l = 1, keeping ⟨l, r⟩ = 1
            let s = norm(&left);
            left.iter_mut().for_each(|x| *x /= s);
            right.iter_mut().for_each(|x| *x *= s);
            modes.push(SpectralMode { lambda: c.lambda + a.lambda, right, left, label: Some(req.label()), weight: None });
        }
        Ok(Self { space: space.clone(), params, requests: requests.to_vec(), modes })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn find(&self, request: &ModeRequest) -> Option<usize> {
        self.requests.iter().position(|r| r == request)
    }

    /// Residuals of each mode against a generator, plus the distance of the
    /// closed-form eigenvalue to the nearest eigenvalue of its sector block.
    ///
    /// Components touching the top two Fock levels of either mode are ignored.
    pub fn validate(&self, l0: &Superoperator) -> Result<Vec<ModeCheck>> {
        let space = &self.space;
        let dims = space.dims();
        let d = space.dim();
        let scale = l0.norm_one();
        let interior: Vec<bool> = (0..d * d)
            .map(|v| {
                let (ket, bra) = (space.occupations(v % d), space.occupations(v / d));
                (0..2).all(|m| ket[m] + 2 < dims[m] && bra[m] + 2 < dims[m])
            })
            .collect();
        let masked = |v: Vec<c64>| -> f64 {
            norm(&v.iter().zip(&interior).map(|(x, &keep)| if keep { *x } else { ZERO }).collect::<Vec<_>>())
        };
        let mut sector_values: std::collections::HashMap<(i64, i64), Vec<c64>> = Default::default();
        let mut out = Vec::with_capacity(self.len());
        for (req, mode) in self.requests.iter().zip(&self.modes) {
            let lr = l0.apply(&mode.right);
            let rr = masked(lr.iter().zip(&mode.right).map(|(a, b)| a - b * mode.lambda).collect());
            let ll = l0.apply_adjoint(&mode.left);
            let rl = masked(ll.iter().zip(&mode.left).map(|(a, b)| a - b * mode.lambda.conj()).collect());
            let key = (req.cavity.m(), req.qubit.m());
            if !sector_values.contains_key(&key) {
                let idx: Vec<usize> = (0..d * d).filter(|&v| space.coherence(v) == [key.0, key.1]).collect();
                sector_values.insert(key, eigenvalues(l0.block(&idx).as_ref())?);
            }
            let nearest = sector_values[&key]
                .iter()
                .map(|v| (v - mode.lambda).norm())
                .fold(f64::INFINITY, f64::min);
            out.push(ModeCheck {
                request: *req,
                lambda: mode.lambda,
                right_residual: rr / (scale * norm(&mode.right)),
                left_residual: rl / (scale * norm(&mode.left)),
                eigenvalue_error: nearest,
                scale,
            });
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct ModeCheck {
    pub request: ModeRequest,
    pub lambda: c64,
    /// `‖L r - λ r‖ / (‖L‖₁ ‖r‖)` away from the truncation edge.
    pub right_residual: f64,
    pub left_residual: f64,
    /// Distance to the nearest brute-force eigenvalue of the same sector.
    pub eigenvalue_error: f64,
    pub scale: f64,
}

impl ModeCheck {
    pub fn worst(&self) -> f64 {
        self.right_residual.max(self.left_residual).max(self.eigenvalue_error / self.scale)
    }
}

pub fn unperturbed_modes(
    frame: &PolaritonFrame,
    space: &TruncatedSpace,
    requests: &[ModeRequest],
) -> Result<UnperturbedModeSet> {
    UnperturbedModeSet::build(Decoupled::from_polariton(frame), space, requests)
}

/// Qubit T1 mode plus the `(m_c, m_a) = (∓1, ±1)` intermediates reached by
/// nonlinear conversion and correlated dissipation.
pub fn thermal_requests(space: &TruncatedSpace) -> Vec<ModeRequest> {
    let na = space.dims()[QUBIT];
    let mut out = vec![ModeRequest::qubit_t1()];
    for k in 0..na - 1 {
        out.push(ModeRequest::new(LocalMode::Coherence { m: -1, k: 0 }, LocalMode::Coherence { m: 1, k }));
        out.push(ModeRequest::new(LocalMode::Coherence { m: 1, k: 0 }, LocalMode::Coherence { m: -1, k }));
    }
    out
}

/// Qubit T1 mode plus the `(0, ±1)` qubit coherences reached by the drive term.
pub fn drive_requests(space: &TruncatedSpace) -> Vec<ModeRequest> {
    let na = space.dims()[QUBIT];
    let mut out = vec![ModeRequest::qubit_t1()];
    for k in 0..na - 1 {
        for m in [1, -1] {
            out.push(ModeRequest::new(LocalMode::Population(0), LocalMode::Coherence { m, k }));
        }
    }
    out
}

/// A named perturbing superoperator.
#[derive(Clone, Copy, Debug)]
pub struct Channel<'a> {
    pub name: &'a str,
    pub superop: &'a Superoperator,
}

#[derive(Clone, Debug)]
pub struct PairSum {
    pub left: String,
    pub right: String,
    pub value: c64,
}

#[derive(Clone, Debug)]
pub struct Intermediate {
    pub request: ModeRequest,
    pub value: c64,
}

#[derive(Clone, Debug)]
pub struct PtResult {
    pub target: ModeRequest,
    pub lambda0: c64,
    pub lambda1: c64,
    pub lambda2: c64,
    pub first_order: Vec<(String, c64)>,
    /// `Σ_β ⟨l_α, L_left r_β⟩⟨l_β, L_right r_α⟩ / (λ_α - λ_β)`.
    pub pair_sums: Vec<PairSum>,
    /// Contributions per intermediate mode, largest first.
    pub intermediates: Vec<Intermediate>,
    /// Largest relative weight of `L_μ r_α` outside the supplied modes.
    pub coverage_residual: f64,
}

impl PtResult {
    /// Second-order eigenvalue shift from channels `a` and `b`, both orders.
    pub fn channel(&self, a: &str, b: &str) -> c64 {
        self.pair_sums
            .iter()
            .filter(|p| (p.left == a && p.right == b) || (p.left == b && p.right == a))
            .map(|p| p.value)
            .sum()
    }

    /// Rate contribution `-Re λ` of a channel pair.
    pub fn rate(&self, a: &str, b: &str) -> f64 {
        -self.channel(a, b).re
    }

    pub fn gamma(&self) -> f64 {
        -(self.lambda0 + self.lambda1 + self.lambda2).re
    }
}

/// First- and second-order eigenvalue corrections of `target` under the sum
/// of `channels`, using only the modes in `modes` as intermediates.
pub fn pt_corrections(
    modes: &UnperturbedModeSet,
    channels: &[Channel<'_>],
    target: &ModeRequest,
) -> Result<PtResult> {
    let alpha = modes
        .find(target)
        .ok_or_else(|| Error::InvalidParams(format!("target {target:?} is not in the mode set")))?;
    let d2 = modes.space.dim().pow(2);
    for ch in channels {
        if ch.superop.space() != &modes.space {
            return Err(Error::ShapeMismatch(format!("channel {} acts on another space", ch.name)));
        }
    }
    let ma = &modes.modes[alpha];
    let scale = channels.iter().map(|c| c.superop.norm_one()).fold(0.0, f64::max).max(ma.lambda.norm());
    for (b, mb) in modes.modes.iter().enumerate() {
        let gap = (mb.lambda - ma.lambda).norm();
        if b != alpha && gap < GAP_TOL * scale.max(1.0) {
            return Err(Error::DegenerateTarget(gap));
        }
    }

    let on_target: Vec<Vec<c64>> = channels.iter().map(|c| c.superop.apply(&ma.right)).collect();
    let mut coverage: f64 = 0.0;
    for v in &on_target {
        let vn = norm(v);
        if vn == 0.0 {
            continue;
        }
        let mut rest = v.clone();
        for m in &modes.modes {
            let w = dot(&m.left, v);
            rest.iter_mut().zip(&m.right).for_each(|(x, r)| *x -= w * r);
        }
        coverage = coverage.max(norm(&rest) / vn);
    }
    if coverage > COVERAGE_TOL {
        log::warn!("perturbation reaches modes outside the supplied set (residual {coverage:.2e})");
    }

    let first_order: Vec<(String, c64)> =
        channels.iter().zip(&on_target).map(|(c, v)| (c.name.to_string(), dot(&ma.left, v))).collect();
    let lambda1 = first_order.iter().map(|x| x.1).sum();

    let nch = channels.len();
    let mut pairs = vec![ZERO; nch * nch];
    let mut intermediates = Vec::new();
    for (b, mb) in modes.modes.iter().enumerate() {
        if b == alpha {
            continue;
        }
        let into: Vec<c64> = on_target.iter().map(|v| dot(&mb.left, v)).collect();
        if into.iter().all(|x| *x == ZERO) {
            continue;
        }
        let out: Vec<c64> = channels
            .iter()
            .map(|c| {
                let v = c.superop.apply(&mb.right);
                debug_assert_eq!(v.len(), d2);
                dot(&ma.left, &v)
            })
            .collect();
        let denom = ma.lambda - mb.lambda;
        let mut total = ZERO;
        for i in 0..nch {
            for j in 0..nch {
                let x = out[i] * into[j] / denom;
                pairs[i * nch + j] += x;
                total += x;
            }
        }
        intermediates.push(Intermediate { request: modes.requests[b], value: total });
    }
    intermediates.sort_by(|x, y| y.value.norm().total_cmp(&x.value.norm()));
    let lambda2 = pairs.iter().sum();
    let pair_sums = (0..nch)
        .flat_map(|i| (0..nch).map(move |j| (i, j)))
        .map(|(i, j)| PairSum {
            left: channels[i].name.to_string(),
            right: channels[j].name.to_string(),
            value: pairs[i * nch + j],
        })
        .collect();
    Ok(PtResult {
        target: *target,
        lambda0: ma.lambda,
        lambda1,
        lambda2,
        first_order,
        pair_sums,
        intermediates,
        coverage_residual: coverage,
    })
}

/// Engine run on the blackbox split: cross-Kerr, nonlinear conversion and
/// correlated dissipation as separate channels around the qubit T1 mode.
pub fn pt_thermal(frame: &PolaritonFrame, space: &TruncatedSpace, storage: Storage) -> Result<PtResult> {
    let parts = blackbox_parts(frame, space, storage)?;
    let modes = unperturbed_modes(frame, space, &thermal_requests(space))?;
    let channels =
        [Channel { name: "crs", superop: &parts.crs }, Channel { name: "nc", superop: &parts.nc }, Channel { name: "cd", superop: &parts.cd }];
    pt_corrections(&modes, &channels, &ModeRequest::qubit_t1())
}

/// Engine run on the displaced generator with the drive term as perturbation.
pub fn pt_coherent(dframe: &DisplacedFrame, space: &TruncatedSpace, storage: Storage) -> Result<PtResult> {
    let l0 = build_displaced(dframe, space, TermToggles::none(), storage)?.superop;
    let drive_only = TermToggles { include_drive: true, ..TermToggles::none() };
    let full = build_displaced(dframe, space, drive_only, storage)?.superop;
    let drive = full.sum(&l0.scaled(c64::new(-1.0, 0.0)))?;
    let modes = UnperturbedModeSet::build(Decoupled::from_displaced(dframe), space, &drive_requests(space))?;
    pt_corrections(&modes, &[Channel { name: "drive", superop: &drive }], &ModeRequest::qubit_t1())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// κ_P ≥ 10 κ_a
    PurcellDominated,
    /// κ_P ≤ κ_a / 10
    IntrinsicDominated,
    Intermediate,
}

fn regime(kappa_a: f64, kappa_p: f64) -> Regime {
    if kappa_p >= 10.0 * kappa_a {
        Regime::PurcellDominated
    } else if 10.0 * kappa_p <= kappa_a {
        Regime::IntrinsicDominated
    } else {
        Regime::Intermediate
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gamma2Breakdown {
    pub base: f64,
    pub nc_nc: f64,
    pub nc_cd: f64,
    pub cd_cd: f64,
    /// Drive-term correction of the coherent result; zero for thermal rates.
    pub drive: f64,
    pub total: f64,
    /// `κ̃_a + 4g²U κ_c n̄_c⁰ / [Δ²(Δ-U)]`, the κ_P ≫ κ_a limit.
    pub purcell_limit: f64,
    /// `κ̃_a - 4g²U κ_c n̄_c⁰ / [Δ²(Δ-U)]`, the κ_P ≪ κ_a limit.
    pub intrinsic_limit: f64,
    pub regime: Regime,
    /// Correction channel with the largest magnitude.
    pub dominant: String,
    pub flags: Vec<Flag>,
}

fn dominant(named: &[(&str, f64)]) -> String {
    named
        .iter()
        .filter(|(_, v)| *v != 0.0)
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(n, _)| n.to_string())
        .unwrap_or_else(|| "none".into())
}

fn kerr_pole(delta: f64, u: f64) -> Result<f64> {
    let dm = delta - u;
    if dm.abs() <= 1e-12 * delta.abs() {
        return Err(Error::Resonance("Δ = U: nonlinear conversion is resonant".into()));
    }
    Ok(dm)
}

/// Second-order thermal relaxation rate of the qubit polariton.
pub fn gamma_thermal_analytic(frame: &PolaritonFrame) -> Result<Gamma2Breakdown> {
    let p = &frame.params;
    let delta = frame.delta;
    let dm = kerr_pole(delta, p.u)?;
    let r2 = (p.g / delta).powi(2);
    let (na, nc) = (frame.nbar_a_t, frame.nbar_c_t);
    let nc_cd = r2 * p.u / dm * (8.0 * (p.kappa_c - p.kappa_a) * na - 4.0 * (p.kappa_c * p.nbar_c0 - p.kappa_a * p.nbar_a0));
    let nc_nc = r2 * (p.u / dm).powi(2) * (frame.kappa_a_t + frame.kappa_c_t) * (4.0 * na - 2.0 * nc);
    let base = frame.kappa_a_t;
    let shift = 4.0 * r2 * p.u / dm * p.kappa_c * p.nbar_c0;
    let mut flags = frame.flags.clone();
    let hottest = p.nbar_a0.max(p.nbar_c0);
    if hottest > LOW_TEMPERATURE_MAX {
        log::warn!("n̄ = {hottest:.3} beyond the low-temperature range of the thermal formula");
        flags.push(Flag::HighTemperature(hottest));
    }
    Ok(Gamma2Breakdown {
        base,
        nc_nc,
        nc_cd,
        cd_cd: 0.0,
        drive: 0.0,
        total: base + nc_nc + nc_cd,
        purcell_limit: base + shift,
        intrinsic_limit: base - shift,
        regime: regime(p.kappa_a, frame.kappa_purcell),
        dominant: dominant(&[("nc_nc", nc_nc), ("nc_cd", nc_cd)]),
        flags,
    })
}

/// Zero-temperature relaxation rate under a coherent cavity drive.
///
/// With `kappa_c_at_qubit`, the cavity bath seen at the qubit frequency
/// replaces κ_c in both the hybridization term and the drive correction.
pub fn gamma_coherent_analytic(
    dframe: &DisplacedFrame,
    frame: &PolaritonFrame,
    kappa_c_at_qubit: Option<f64>,
) -> Result<Gamma2Breakdown> {
    let p = &frame.params;
    if !p.is_zero_temperature() {
        return Err(Error::Unsupported("the coherent-drive rate is a zero-temperature result".into()));
    }
    if let Some(k) = kappa_c_at_qubit {
        if !(k >= 0.0) {
            return Err(Error::NegativeRate(k));
        }
    }
    let detuning = frame.omega_a_t - dframe.drive.omega_d - p.u;
    if detuning.abs() <= 1e-12 * frame.delta.abs() {
        return Err(Error::Resonance("ω̃_a - ω_D = U: drive term is resonant".into()));
    }
    let r2 = (p.g / frame.delta).powi(2);
    let kc = kappa_c_at_qubit.unwrap_or(p.kappa_c);
    let kappa_a_t = match kappa_c_at_qubit {
        Some(k) => r2 * k,
        None => frame.kappa_a_t,
    };
    let mut flags = dframe.flags.clone();
    let ratio = detuning.abs() / kappa_a_t;
    if ratio < DRIVE_GUARD {
        log::warn!("|ω̃_a - ω_D - U| / κ̃_a = {ratio:.2} is below {DRIVE_GUARD}");
        flags.push(Flag::NearDriveResonance(ratio));
    }
    let a2 = dframe.alpha_a_sq();
    let base = p.kappa_a + (p.g / dframe.delta_prime).powi(2) * (kc - p.kappa_a);
    let drive = -2.0 * p.u * p.u / (detuning * detuning) * kappa_a_t * a2;
    Ok(Gamma2Breakdown {
        base,
        nc_nc: 0.0,
        nc_cd: 0.0,
        cd_cd: 0.0,
        drive,
        total: base + drive,
        purcell_limit: base,
        intrinsic_limit: base,
        regime: regime(p.kappa_a, frame.kappa_purcell),
        dominant: dominant(&[("hybridization", base - frame.kappa_a_t), ("drive", drive)]),
        flags,
    })
}

/// Leading-order `dΓ/d|α_a|²` of the coherent-drive rate.
pub fn coherent_slope(frame: &PolaritonFrame, omega_d: f64) -> Result<f64> {
    let p = &frame.params;
    let detuning = frame.omega_a_t - omega_d - p.u;
    if detuning.abs() <= 1e-12 * frame.delta.abs() {
        return Err(Error::Resonance("ω̃_a - ω_D = U: drive term is resonant".into()));
    }
    let d = frame.delta;
    Ok(4.0 * p.g * p.g * p.u * (p.kappa_c - p.kappa_a) / d.powi(3)
        - 2.0 * p.u * p.u / (detuning * detuning) * frame.kappa_a_t)
}

/// Golden-rule relaxation rate of the two-level (Jaynes-Cummings) model.
pub fn gamma_jc_analytic(params: &SystemParams) -> Result<f64> {
    params.validate()?;
    if params.kappa_a != 0.0 {
        return Err(Error::InvalidParams("the two-level rate assumes kappa_a = 0".into()));
    }
    Ok((params.g / params.delta()).powi(2) * params.kappa_c * (1.0 + 2.0 * params.nbar_c0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Golden-rule rate of the (1,1) ↔ (0,2) conversion.
    pub kappa_eff_nc: f64,
    /// Order-of-magnitude resonant fourth-order correction.
    pub gamma4_estimate: f64,
    pub degraded: bool,
    pub flags: Vec<Flag>,
}

pub fn diagnostics(frame: &PolaritonFrame) -> Result<Diagnostics> {
    let p = &frame.params;
    let delta = frame.delta;
    let dm = kerr_pole(delta, p.u)?;
    let r2 = (p.g / delta).powi(2);
    let kappa_eff_nc = frame.chi_t.powi(2) * (frame.kappa_a_t + frame.kappa_c_t) / (dm * dm);
    let gamma4_estimate = if frame.kappa_a_t > 0.0 {
        r2 * r2 * (p.u / dm).powi(2) * (p.kappa_c - p.kappa_a).powi(2) / frame.kappa_a_t * frame.nbar_c_t
    } else {
        f64::INFINITY
    };
    let degraded = p.kappa_a < frame.kappa_purcell && p.u >= DEGRADED_KERR * delta.abs();
    let mut flags = Vec::new();
    if degraded {
        flags.push(Flag::AnalyticDegraded);
    }
    Ok(Diagnostics { kappa_eff_nc, gamma4_estimate, degraded, flags })
}

/// Numeric and analytic rates side by side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub gamma_diag: f64,
    pub gamma_fit: Option<f64>,
    pub gamma_analytic: Gamma2Breakdown,
    pub gamma_pt_numeric: Option<f64>,
    pub fit_discrepancy: Option<f64>,
    pub analytic_discrepancy: f64,
    pub pt_discrepancy: Option<f64>,
}

impl RateReport {
    pub fn new(gamma_diag: f64, gamma_fit: Option<f64>, gamma_analytic: Gamma2Breakdown, gamma_pt_numeric: Option<f64>) -> Self {
        let rel = |x: f64| (x - gamma_diag) / gamma_diag;
        Self {
            gamma_diag,
            gamma_fit,
            analytic_discrepancy: rel(gamma_analytic.total),
            gamma_analytic,
            gamma_pt_numeric,
            fit_discrepancy: gamma_fit.map(rel),
            pt_discrepancy: gamma_pt_numeric.map(rel),
        }
    }
}
