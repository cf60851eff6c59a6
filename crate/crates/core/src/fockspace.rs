//! Truncated multi-mode Fock spaces, dense operators on them and
//! column-stacked superoperators.
//!
//! Basis ordering is the tensor order of the space: mode 0 is the most
//! significant digit. Vectorization stacks columns, so `vec(A X B) =
//! (Bᵀ ⊗ A) vec(X)` and the element `X[i, j]` lives at `j * d + i`.

use std::ops::{Add, Mul, Sub};

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_CUTOFF: usize = 2;

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
const ONE: c64 = c64 { re: 1.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedSpace {
    dims: Vec<usize>,
    total: usize,
}

impl TruncatedSpace {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidParams("a space needs at least one mode".into()));
        }
        if let Some(&d) = dims.iter().find(|&&d| d < MIN_CUTOFF) {
            return Err(Error::CutoffTooSmall(d));
        }
        Ok(Self { dims: dims.to_vec(), total: dims.iter().product() })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.total
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.dims.len()];
        for (slot, &d) in occ.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        occ
    }

    pub fn index_of(&self, occ: &[usize]) -> Result<usize> {
        if occ.len() != self.dims.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} occupations for {} modes",
                occ.len(),
                self.dims.len()
            )));
        }
        let mut idx = 0;
        for (&n, &d) in occ.iter().zip(&self.dims) {
            if n >= d {
                return Err(Error::InvalidParams(format!("occupation {n} beyond cutoff {d}")));
            }
            idx = idx * d + n;
        }
        Ok(idx)
    }

    /// Per-mode coherence numbers `n_ket - n_bra` of a vectorized index.
    pub fn coherence(&self, vec_index: usize) -> Vec<i64> {
        let ket = self.occupations(vec_index % self.total);
        let bra = self.occupations(vec_index / self.total);
        ket.iter().zip(&bra).map(|(&k, &b)| k as i64 - b as i64).collect()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.dims.len() {
            return Err(Error::InvalidMode { index: mode, modes: self.dims.len() });
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    space: TruncatedSpace,
    data: Mat<c64>,
}

impl OperatorMatrix {
    pub fn zeros(space: &TruncatedSpace) -> Self {
        let d = space.dim();
        Self { space: space.clone(), data: Mat::zeros(d, d) }
    }

    pub fn identity(space: &TruncatedSpace) -> Self {
        let d = space.dim();
        Self { space: space.clone(), data: Mat::identity(d, d) }
    }

    pub fn from_mat(space: &TruncatedSpace, data: Mat<c64>) -> Result<Self> {
        let d = space.dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix on a space of dimension {d}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { space: space.clone(), data })
    }

    pub fn from_fn(space: &TruncatedSpace, f: impl FnMut(usize, usize) -> c64) -> Self {
        let d = space.dim();
        Self { space: space.clone(), data: Mat::from_fn(d, d, f) }
    }

    /// `|ket⟩⟨bra|` for occupation lists.
    pub fn outer(space: &TruncatedSpace, ket: &[usize], bra: &[usize]) -> Result<Self> {
        let (i, j) = (space.index_of(ket)?, space.index_of(bra)?);
        let mut op = Self::zeros(space);
        op.data[(i, j)] = ONE;
        Ok(op)
    }

    pub fn space(&self) -> &TruncatedSpace {
        &self.space
    }

    pub fn data(&self) -> MatRef<'_, c64> {
        self.data.as_ref()
    }

    pub fn into_mat(self) -> Mat<c64> {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.data[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: c64) {
        self.data[(i, j)] = v;
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), data: self.data.adjoint().to_owned() }
    }

    pub fn transpose(&self) -> Self {
        Self { space: self.space.clone(), data: self.data.transpose().to_owned() }
    }

    pub fn trace(&self) -> c64 {
        (0..self.dim()).map(|i| self.data[(i, i)]).sum()
    }

    pub fn scaled(&self, s: c64) -> Self {
        let data = Mat::from_fn(self.dim(), self.dim(), |i, j| self.data[(i, j)] * s);
        Self { space: self.space.clone(), data }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        &(self * other) + &(other * self)
    }

    /// `Tr(self · rho)`.
    pub fn expectation(&self, rho: &Self) -> c64 {
        self.assert_same_space(rho);
        let d = self.dim();
        let mut acc = ZERO;
        for i in 0..d {
            for k in 0..d {
                acc += self.data[(i, k)] * rho.data[(k, i)];
            }
        }
        acc
    }

    /// Hilbert-Schmidt inner product `Tr(self† · other)`.
    pub fn inner(&self, other: &Self) -> c64 {
        self.assert_same_space(other);
        let d = self.dim();
        let mut acc = ZERO;
        for j in 0..d {
            for i in 0..d {
                acc += self.data[(i, j)].conj() * other.data[(i, j)];
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        let d = self.dim();
        let mut m = 0.0f64;
        for j in 0..d {
            for i in 0..d {
                m = m.max(self.data[(i, j)].norm());
            }
        }
        m
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (self - &self.adjoint()).max_abs()
    }

    pub fn hermitized(&self) -> Self {
        (self + &self.adjoint()).scaled(c64::new(0.5, 0.0))
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        let h = self.hermitized();
        h.data
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|_| Error::NoConvergence)
    }

    pub fn nonzeros(&self) -> Vec<(usize, usize, c64)> {
        let d = self.dim();
        let mut out = Vec::new();
        for j in 0..d {
            for i in 0..d {
                let v = self.data[(i, j)];
                if v != ZERO {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    fn assert_same_space(&self, other: &Self) {
        assert_eq!(self.space, other.space, "operators live on different spaces");
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.assert_same_space(rhs);
        OperatorMatrix { space: self.space.clone(), data: &self.data + &rhs.data }
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.assert_same_space(rhs);
        OperatorMatrix { space: self.space.clone(), data: &self.data - &rhs.data }
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.assert_same_space(rhs);
        OperatorMatrix { space: self.space.clone(), data: &self.data * &rhs.data }
    }
}

impl Mul<f64> for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: f64) -> OperatorMatrix {
        self.scaled(c64::new(rhs, 0.0))
    }
}

impl Mul<c64> for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: c64) -> OperatorMatrix {
        self.scaled(rhs)
    }
}

#[derive(Clone, Debug)]
pub struct Ladder {
    pub lower: OperatorMatrix,
    pub raise: OperatorMatrix,
    pub number: OperatorMatrix,
}

/// Truncated `a`, `a†` and `a†a` for one mode, embedded in the full space.
pub fn ladder_operators(space: &TruncatedSpace, mode: usize) -> Result<Ladder> {
    space.check_mode(mode)?;
    let mut lower = OperatorMatrix::zeros(space);
    for col in 0..space.dim() {
        let occ = space.occupations(col);
        let n = occ[mode];
        if n == 0 {
            continue;
        }
        let mut target = occ;
        target[mode] = n - 1;
        let row = space.index_of(&target)?;
        lower.data[(row, col)] = c64::new((n as f64).sqrt(), 0.0);
    }
    let raise = lower.adjoint();
    let number = &raise * &lower;
    Ok(Ladder { lower, raise, number })
}

pub fn vectorize(op: &OperatorMatrix) -> Vec<c64> {
    let d = op.dim();
    let mut v = Vec::with_capacity(d * d);
    for j in 0..d {
        for i in 0..d {
            v.push(op.data[(i, j)]);
        }
    }
    v
}

pub fn unvectorize(space: &TruncatedSpace, v: &[c64]) -> Result<OperatorMatrix> {
    let d = space.dim();
    if v.len() != d * d {
        return Err(Error::ShapeMismatch(format!("vector of length {} for dimension {d}", v.len())));
    }
    Ok(OperatorMatrix::from_fn(space, |i, j| v[j * d + i]))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Storage {
    #[default]
    Sparse,
    Dense,
}

/// Compressed sparse rows over complex entries.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<c64>,
}

impl CsrMatrix {
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, c64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<c64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut m = Self { n, row_ptr, col_idx, values };
        m.prune();
        m
    }

    fn prune(&mut self) {
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.values.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.values[k] != ZERO {
                    col_idx.push(self.col_idx[k]);
                    values.push(self.values[k]);
                }
            }
            row_ptr[r + 1] = values.len();
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.values = values;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, r: usize, c: usize) -> c64 {
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(k) => self.values[self.row_ptr[r] + k],
            Err(_) => ZERO,
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        (0..self.n).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }
}

#[derive(Clone, Debug)]
enum Repr {
    Dense(Mat<c64>),
    Sparse(CsrMatrix),
}

/// Linear map on vectorized operators of a truncated space.
#[derive(Clone, Debug)]
pub struct Superoperator {
    space: TruncatedSpace,
    repr: Repr,
}

impl Superoperator {
    pub fn zeros(space: &TruncatedSpace, storage: Storage) -> Self {
        SuperoperatorBuilder::new(space).build(storage)
    }

    pub fn space(&self) -> &TruncatedSpace {
        &self.space
    }

    /// Side length `d²` of the matrix.
    pub fn dim(&self) -> usize {
        let d = self.space.dim();
        d * d
    }

    pub fn storage(&self) -> Storage {
        match self.repr {
            Repr::Dense(_) => Storage::Dense,
            Repr::Sparse(_) => Storage::Sparse,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> c64 {
        match &self.repr {
            Repr::Dense(m) => m[(r, c)],
            Repr::Sparse(s) => s.get(r, c),
        }
    }

    /// Nonzero entries in row-major order.
    pub fn entries(&self) -> Vec<(usize, usize, c64)> {
        match &self.repr {
            Repr::Sparse(s) => s.triplets().collect(),
            Repr::Dense(m) => {
                let n = m.nrows();
                let mut out = Vec::new();
                for r in 0..n {
                    for c in 0..n {
                        let v = m[(r, c)];
                        if v != ZERO {
                            out.push((r, c, v));
                        }
                    }
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> Mat<c64> {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Sparse(s) => {
                let mut m = Mat::zeros(s.n, s.n);
                for (r, c, v) in s.triplets() {
                    m[(r, c)] = v;
                }
                m
            }
        }
    }

    pub fn with_storage(&self, storage: Storage) -> Self {
        if storage == self.storage() {
            return self.clone();
        }
        let repr = match storage {
            Storage::Dense => Repr::Dense(self.to_dense()),
            Storage::Sparse => Repr::Sparse(CsrMatrix::from_triplets(self.dim(), self.entries())),
        };
        Self { space: self.space.clone(), repr }
    }

    pub fn apply(&self, v: &[c64]) -> Vec<c64> {
        assert_eq!(v.len(), self.dim(), "vector length does not match superoperator");
        match &self.repr {
            Repr::Sparse(s) => (0..s.n).map(|r| s.row(r).map(|(c, x)| x * v[c]).sum()).collect(),
            Repr::Dense(m) => {
                let n = m.nrows();
                let mut out = vec![ZERO; n];
                for c in 0..n {
                    let vc = v[c];
                    if vc == ZERO {
                        continue;
                    }
                    for (r, o) in out.iter_mut().enumerate() {
                        *o += m[(r, c)] * vc;
                    }
                }
                out
            }
        }
    }

    /// `ℒ† v`, the Hilbert-Schmidt adjoint applied to `v`.
    pub fn apply_adjoint(&self, v: &[c64]) -> Vec<c64> {
        assert_eq!(v.len(), self.dim(), "vector length does not match superoperator");
        let n = self.dim();
        let mut out = vec![ZERO; n];
        match &self.repr {
            Repr::Sparse(s) => {
                for (r, c, x) in s.triplets() {
                    out[c] += x.conj() * v[r];
                }
            }
            Repr::Dense(m) => {
                for (c, o) in out.iter_mut().enumerate() {
                    *o = (0..n).map(|r| m[(r, c)].conj() * v[r]).sum();
                }
            }
        }
        out
    }

    pub fn apply_op(&self, op: &OperatorMatrix) -> OperatorMatrix {
        unvectorize(&self.space, &self.apply(&vectorize(op))).expect("shapes agree")
    }

    pub fn adjoint(&self) -> Self {
        let repr = match &self.repr {
            Repr::Dense(m) => Repr::Dense(m.adjoint().to_owned()),
            Repr::Sparse(s) => Repr::Sparse(CsrMatrix::from_triplets(
                s.n,
                s.triplets().map(|(r, c, v)| (c, r, v.conj())).collect(),
            )),
        };
        Self { space: self.space.clone(), repr }
    }

    pub fn scaled(&self, s: c64) -> Self {
        let repr = match &self.repr {
            Repr::Dense(m) => Repr::Dense(Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)),
            Repr::Sparse(c) => {
                let mut c = c.clone();
                c.values.iter_mut().for_each(|v| *v *= s);
                c.prune();
                Repr::Sparse(c)
            }
        };
        Self { space: self.space.clone(), repr }
    }

    /// Sum of two superoperators; the result keeps the storage of `self`.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::ShapeMismatch("superoperators on different spaces".into()));
        }
        let repr = match &self.repr {
            Repr::Dense(m) => {
                let mut m = m.clone();
                for (r, c, v) in other.entries() {
                    m[(r, c)] += v;
                }
                Repr::Dense(m)
            }
            Repr::Sparse(s) => {
                let mut t: Vec<_> = s.triplets().collect();
                t.extend(other.entries());
                Repr::Sparse(CsrMatrix::from_triplets(s.n, t))
            }
        };
        Ok(Self { space: self.space.clone(), repr })
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().map(|e| e.2.norm()).fold(0.0, f64::max)
    }

    /// Largest absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut cols = vec![0.0; self.dim()];
        for (_, c, v) in self.entries() {
            cols[c] += v.norm();
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    /// `max_c |Σ_i ℒ[(i,i), c]|`, zero for a trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        let id = vectorize(&OperatorMatrix::identity(&self.space));
        self.apply_adjoint(&id).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Dense principal submatrix on `indices`.
    pub fn block(&self, indices: &[usize]) -> Mat<c64> {
        let k = indices.len();
        match &self.repr {
            Repr::Dense(m) => Mat::from_fn(k, k, |i, j| m[(indices[i], indices[j])]),
            Repr::Sparse(s) => {
                let mut pos = vec![usize::MAX; s.n];
                for (i, &g) in indices.iter().enumerate() {
                    pos[g] = i;
                }
                let mut b = Mat::zeros(k, k);
                for (i, &g) in indices.iter().enumerate() {
                    for (c, v) in s.row(g) {
                        if pos[c] != usize::MAX {
                            b[(i, pos[c])] = v;
                        }
                    }
                }
                b
            }
        }
    }
}

/// Accumulates `A ρ B` terms into a superoperator.
#[derive(Clone, Debug)]
pub struct SuperoperatorBuilder {
    space: TruncatedSpace,
    triplets: Vec<(usize, usize, c64)>,
}

impl SuperoperatorBuilder {
    pub fn new(space: &TruncatedSpace) -> Self {
        Self { space: space.clone(), triplets: Vec::new() }
    }

    fn check(&self, op: &OperatorMatrix) -> Result<()> {
        if op.space != self.space {
            return Err(Error::ShapeMismatch("operator lives on a different space".into()));
        }
        Ok(())
    }

    fn identity_nz(&self) -> Vec<(usize, usize, c64)> {
        (0..self.space.dim()).map(|i| (i, i, ONE)).collect()
    }

    /// Adds `coef · A ρ B`; `None` stands for the identity.
    pub fn sandwich(
        &mut self,
        a: Option<&OperatorMatrix>,
        b: Option<&OperatorMatrix>,
        coef: c64,
    ) -> Result<&mut Self> {
        if coef == ZERO {
            return Ok(self);
        }
        let a_nz = match a {
            Some(a) => {
                self.check(a)?;
                a.nonzeros()
            }
            None => self.identity_nz(),
        };
        let b_nz = match b {
            Some(b) => {
                self.check(b)?;
                b.nonzeros()
            }
            None => self.identity_nz(),
        };
        let d = self.space.dim();
        for &(l, j, bv) in &b_nz {
            for &(i, k, av) in &a_nz {
                self.triplets.push((j * d + i, l * d + k, coef * av * bv));
            }
        }
        Ok(self)
    }

    /// Adds `-i [H, ρ]`.
    pub fn hamiltonian(&mut self, h: &OperatorMatrix) -> Result<&mut Self> {
        let mi = c64::new(0.0, -1.0);
        self.sandwich(Some(h), None, mi)?;
        self.sandwich(None, Some(h), -mi)
    }

    /// Adds `coef · {K, ρ}`.
    pub fn anticommutator(&mut self, k: &OperatorMatrix, coef: c64) -> Result<&mut Self> {
        self.sandwich(Some(k), None, coef)?;
        self.sandwich(None, Some(k), coef)
    }

    /// Adds `rate · D[L]ρ = rate (L ρ L† - ½{L†L, ρ})`.
    pub fn dissipator(&mut self, l: &OperatorMatrix, rate: f64) -> Result<&mut Self> {
        if rate < 0.0 || !rate.is_finite() {
            return Err(Error::NegativeRate(rate));
        }
        if rate == 0.0 {
            return Ok(self);
        }
        let ld = l.adjoint();
        let ldl = &ld * l;
        self.sandwich(Some(l), Some(&ld), c64::new(rate, 0.0))?;
        self.anticommutator(&ldl, c64::new(-0.5 * rate, 0.0))
    }

    pub fn build(&self, storage: Storage) -> Superoperator {
        let n = self.space.dim() * self.space.dim();
        let repr = match storage {
            Storage::Sparse => Repr::Sparse(CsrMatrix::from_triplets(n, self.triplets.clone())),
            Storage::Dense => {
                let mut m = Mat::zeros(n, n);
                for &(r, c, v) in &self.triplets {
                    m[(r, c)] += v;
                }
                Repr::Dense(m)
            }
        };
        Superoperator { space: self.space.clone(), repr }
    }
}

/// `ℒρ = -i[H, ρ] + Σ rate · D[L]ρ`.
pub fn lindblad_superoperator(
    h: &OperatorMatrix,
    channels: &[(f64, OperatorMatrix)],
    storage: Storage,
) -> Result<Superoperator> {
    let mut b = SuperoperatorBuilder::new(h.space());
    b.hamiltonian(h)?;
    for (rate, l) in channels {
        b.dissipator(l, *rate)?;
    }
    Ok(b.build(storage))
}

/// Heisenberg-picture generator `ℒ†A = i[H, A] + Σ rate (L†AL - ½{L†L, A})`.
pub fn lindblad_adjoint(
    h: &OperatorMatrix,
    channels: &[(f64, OperatorMatrix)],
    storage: Storage,
) -> Result<Superoperator> {
    let mut b = SuperoperatorBuilder::new(h.space());
    let i = c64::new(0.0, 1.0);
    b.sandwich(Some(h), None, i)?;
    b.sandwich(None, Some(h), -i)?;
    for (rate, l) in channels {
        if *rate < 0.0 {
            return Err(Error::NegativeRate(*rate));
        }
        let ld = l.adjoint();
        let ldl = &ld * l;
        b.sandwich(Some(&ld), Some(l), c64::new(*rate, 0.0))?;
        b.anticommutator(&ldl, c64::new(-0.5 * rate, 0.0))?;
    }
    Ok(b.build(storage))
}
