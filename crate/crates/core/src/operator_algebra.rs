//! Complex sparse operators over the truncated cavity ⊗ emitters space.
//!
//! Operators are stored in compressed sparse row form with sorted column
//! indices. Assembly goes through triplets, duplicate entries are summed.
//! Basis ordering is cavity first, then emitter 1 … emitter N; for a two-level
//! factor index 0 is the ground state and 1 the excited state.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Anything that can be applied to a vector: `y = A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseOperator {
    /// Assemble from `(row, col, value)` triplets. Duplicates are summed;
    /// explicit zeros are kept until [`SparseOperator::normalize`].
    pub fn from_triplets<I>(rows: usize, cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimension(format!(
                "operator shape {rows}x{cols} must be positive"
            )));
        }
        let mut entries: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= rows || c >= cols {
                return Err(Error::InvalidDimension(format!(
                    "entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<C64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::from_triplets(rows, cols, std::iter::empty())
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::diagonal(&vec![ONE; n])
    }

    pub fn diagonal(diag: &[C64]) -> Result<Self> {
        let n = diag.len();
        Self::from_triplets(n, n, diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    pub fn from_dense(m: &Mat<C64>) -> Result<Self> {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != ZERO {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Stored entries, including explicit zeros.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => ZERO,
        }
    }

    /// Drop stored entries with magnitude `<= tol`.
    pub fn normalize(&self, tol: f64) -> Self {
        let t: Vec<_> = self.triplets().filter(|(_, _, v)| v.norm() > tol).collect();
        Self::from_triplets(self.rows, self.cols, t).expect("shape already validated")
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.cols, self.rows, t).expect("shape already validated")
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v.conj())).collect();
        Self::from_triplets(self.cols, self.rows, t).expect("shape already validated")
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, ONE)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -ONE)
    }

    fn combine(&self, other: &Self, c: C64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let t = self
            .triplets()
            .chain(other.triplets().map(|(i, j, v)| (i, j, c * v)));
        Self::from_triplets(self.rows, self.cols, t.collect::<Vec<_>>())
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut t = Vec::new();
        let mut acc = vec![ZERO; other.cols];
        let mut touched = vec![false; other.cols];
        let mut pattern = Vec::new();
        for i in 0..self.rows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !touched[j] {
                        touched[j] = true;
                        pattern.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &pattern {
                t.push((i, j, acc[j]));
                acc[j] = ZERO;
                touched[j] = false;
            }
            pattern.clear();
        }
        Self::from_triplets(self.rows, other.cols, t)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (rb, cb) = (other.rows, other.cols);
        let mut t = Vec::with_capacity(self.nnz() * other.nnz());
        for (ia, ja, a) in self.triplets() {
            for (ib, jb, b) in other.triplets() {
                t.push((ia * rb + ib, ja * cb + jb, a * b));
            }
        }
        Self::from_triplets(self.rows * rb, self.cols * cb, t).expect("positive shapes")
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.cols, "vector length must match columns");
        assert_eq!(y.len(), self.rows, "output length must match rows");
        for (i, yi) in y.iter_mut().enumerate() {
            let span = self.indptr[i]..self.indptr[i + 1];
            let mut s = ZERO;
            for (&j, &v) in self.indices[span.clone()].iter().zip(&self.values[span]) {
                s += v * x[j];
            }
            *yi = s;
        }
    }

    /// `x† · self`, returned as a row vector (conjugation applied to `x` only).
    pub fn left_mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![ZERO; self.cols];
        for (i, xi) in x.iter().enumerate() {
            let xc = xi.conj();
            for (j, v) in self.row(i) {
                y[j] += xc * v;
            }
        }
        y
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest elementwise distance between two equally shaped operators.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square()
            && self
                .max_abs_diff(&self.dagger())
                .map(|d| d <= tol)
                .unwrap_or(false)
    }
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.mul_vec_into(x, y)
    }
}

pub fn kron(a: &SparseOperator, b: &SparseOperator) -> SparseOperator {
    a.kron(b)
}

pub fn dagger(a: &SparseOperator) -> SparseOperator {
    a.dagger()
}

/// Cavity annihilation operator on `n_levels` Fock states: `a|m⟩ = √m |m−1⟩`.
pub fn fock_annihilation(n_levels: usize) -> Result<SparseOperator> {
    if n_levels == 0 {
        return Err(Error::InvalidDimension(
            "Fock space needs at least one level".into(),
        ));
    }
    SparseOperator::from_triplets(
        n_levels,
        n_levels,
        (1..n_levels).map(|m| (m - 1, m, C64::new((m as f64).sqrt(), 0.0))),
    )
}

/// Two-level lowering operator, `|g⟩⟨e|` with ground = 0, excited = 1.
pub fn two_level_lowering() -> SparseOperator {
    SparseOperator::from_triplets(2, 2, [(0, 1, ONE)]).expect("2x2")
}

/// Tensor-product layout: cavity (`n_max + 1` Fock levels) ⊗ N two-level emitters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HilbertLayout {
    n_max: usize,
    n_emitters: usize,
    dim: usize,
}

/// A tensor factor of [`HilbertLayout`]. Emitters are indexed from 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Site {
    Cavity,
    Emitter(usize),
}

impl HilbertLayout {
    pub fn new(n_max: usize, n_emitters: usize) -> Result<Self> {
        if n_emitters > 20 {
            return Err(Error::InvalidDimension(format!(
                "{n_emitters} emitters is beyond what a dense Hilbert layout can hold"
            )));
        }
        let dim = (n_max + 1)
            .checked_mul(1usize << n_emitters)
            .ok_or_else(|| Error::InvalidDimension("dimension overflow".into()))?;
        Ok(Self {
            n_max,
            n_emitters,
            dim,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn n_emitters(&self) -> usize {
        self.n_emitters
    }

    pub fn fock_levels(&self) -> usize {
        self.n_max + 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn local_dim(&self, site: Site) -> Result<usize> {
        match site {
            Site::Cavity => Ok(self.fock_levels()),
            Site::Emitter(i) if i < self.n_emitters => Ok(2),
            Site::Emitter(i) => Err(Error::InvalidEmbedding(format!(
                "emitter {i} does not exist in a layout with {} emitters",
                self.n_emitters
            ))),
        }
    }

    /// Basis index of `|n⟩ ⊗ |s_1 … s_N⟩`.
    pub fn basis_index(&self, photons: usize, excited: &[bool]) -> usize {
        assert!(photons <= self.n_max && excited.len() == self.n_emitters);
        let bits = excited
            .iter()
            .fold(0usize, |acc, &e| (acc << 1) | usize::from(e));
        (photons << self.n_emitters) | bits
    }

    pub fn photon_number(&self, index: usize) -> usize {
        index >> self.n_emitters
    }

    pub fn is_excited(&self, index: usize, emitter: usize) -> bool {
        let shift = self.n_emitters - 1 - emitter;
        (index >> shift) & 1 == 1
    }

    /// Total excitation number (photons plus excited emitters) of a basis state.
    pub fn excitation(&self, index: usize) -> usize {
        let mask = (1usize << self.n_emitters) - 1;
        self.photon_number(index) + (index & mask).count_ones() as usize
    }
}

/// Lift a local operator onto the full space, identity on every other factor.
pub fn embed(op: &SparseOperator, site: Site, layout: &HilbertLayout) -> Result<SparseOperator> {
    let local = layout.local_dim(site)?;
    if op.rows() != local || op.cols() != local {
        return Err(Error::InvalidEmbedding(format!(
            "{site:?} has local dimension {local}, operator is {}x{}",
            op.rows(),
            op.cols()
        )));
    }
    let (left, right) = match site {
        Site::Cavity => (1, 1usize << layout.n_emitters()),
        Site::Emitter(i) => (
            layout.fock_levels() << i,
            1usize << (layout.n_emitters() - 1 - i),
        ),
    };
    let mut t = Vec::with_capacity(op.nnz() * left * right);
    for l in 0..left {
        for (i, j, v) in op.triplets() {
            for r in 0..right {
                t.push(((l * local + i) * right + r, (l * local + j) * right + r, v));
            }
        }
    }
    SparseOperator::from_triplets(layout.dim(), layout.dim(), t)
}
