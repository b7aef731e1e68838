//! Krylov-subspace action of `e^{L t}` on a vector.
//!
//! An Arnoldi factorization built with modified Gram-Schmidt projects `L`
//! onto a small upper-Hessenberg matrix `H = V†LV`. With `H = U D U⁻¹`,
//! `e^{L t} v ≈ V [U e^{D t} U⁻¹] [V† v] = β V U e^{D t} U⁻¹ e₁`, which is
//! cheap to re-evaluate for many `t` from one basis. Steps whose residual
//! estimate `h_{m+1,m} |y_m(t)|` exceeds the tolerance are halved.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Mat;

use crate::error::{Error, Result};
use crate::model::{DensityMatrix, Liouvillian};
use crate::operator_algebra::{LinearOperator, C64, ONE, ZERO};

/// Number of Krylov vectors kept per step.
pub const DEFAULT_KRYLOV_DIM: usize = 20;

/// Subdiagonal magnitude (relative to `‖L v_j‖`) that signals an invariant subspace.
pub const HAPPY_BREAKDOWN: f64 = 1e-14;

/// Largest eigenvector-matrix condition number trusted for `U e^{Dt} U⁻¹`.
const MAX_EIGENVECTOR_CONDITION: f64 = 1e7;

#[derive(Clone, Debug)]
pub struct KrylovBasis {
    vectors: Vec<Vec<C64>>,
    hessenberg: Mat<C64>,
    next_coupling: f64,
    beta: f64,
    invariant: bool,
}

impl KrylovBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Orthonormal columns of `V`.
    pub fn vectors(&self) -> &[Vec<C64>] {
        &self.vectors
    }

    /// `V† L V`, `dim × dim` upper Hessenberg.
    pub fn hessenberg(&self) -> &Mat<C64> {
        &self.hessenberg
    }

    /// `h_{m+1,m}`, zero after a happy breakdown.
    pub fn next_coupling(&self) -> f64 {
        self.next_coupling
    }

    /// Norm of the seed vector.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// True when the basis spans an invariant subspace of `L`.
    pub fn is_invariant(&self) -> bool {
        self.invariant
    }

    /// `V y`.
    pub fn combine(&self, y: &[C64]) -> Vec<C64> {
        let n = self.vectors.first().map_or(0, Vec::len);
        let mut out = vec![ZERO; n];
        for (v, &c) in self.vectors.iter().zip(y) {
            if c == ZERO {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
        }
        out
    }
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Arnoldi factorization of `op` seeded with `v0`, orthonormalized by
/// modified Gram-Schmidt (with one conditional re-orthogonalization pass).
pub fn arnoldi(op: &dyn LinearOperator, v0: &[C64], m: usize) -> Result<KrylovBasis> {
    let n = op.dim();
    if v0.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "seed vector has length {}, operator dimension {n}",
            v0.len()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidDimension(
            "Krylov dimension must be >= 1".into(),
        ));
    }
    let beta = norm(v0);
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::InvalidDimension(
            "Arnoldi seed vector is zero".into(),
        ));
    }
    let m = m.min(n);
    let mut vectors = Vec::with_capacity(m);
    vectors.push(v0.iter().map(|x| x / beta).collect::<Vec<_>>());
    let mut h = Mat::<C64>::zeros(m + 1, m);
    let mut w = vec![ZERO; n];
    let mut next_coupling = 0.0;
    let mut invariant = false;

    for j in 0..m {
        op.apply(&vectors[j], &mut w);
        let w_norm = norm(&w);
        for pass in 0..2 {
            let before = norm(&w);
            for (i, v) in vectors.iter().enumerate() {
                let c = dot(v, &w);
                h[(i, j)] += c;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= c * vk;
                }
            }
            if pass == 0 && norm(&w) > 0.7 * before {
                break;
            }
        }
        let sub = norm(&w);
        if sub <= HAPPY_BREAKDOWN * w_norm || sub == 0.0 {
            invariant = true;
            next_coupling = 0.0;
            let k = j + 1;
            let hess = Mat::from_fn(k, k, |r, c| h[(r, c)]);
            return Ok(KrylovBasis {
                vectors,
                hessenberg: hess,
                next_coupling,
                beta,
                invariant,
            });
        }
        h[(j + 1, j)] = C64::new(sub, 0.0);
        if j + 1 < m {
            vectors.push(w.iter().map(|x| x / sub).collect());
        } else {
            next_coupling = sub;
        }
    }
    if m == n {
        // A full basis of the space is invariant by construction.
        invariant = true;
        next_coupling = 0.0;
    }
    Ok(KrylovBasis {
        vectors,
        hessenberg: Mat::from_fn(m, m, |r, c| h[(r, c)]),
        next_coupling,
        beta,
        invariant,
    })
}

/// `e^{H t} e₁` for a small matrix, via eigendecomposition when it is well
/// conditioned and scaling-and-squaring otherwise.
pub(crate) enum SmallExponential {
    Eigen {
        u: Mat<C64>,
        eigenvalues: Vec<C64>,
        coeffs: Vec<C64>,
    },
    Dense(Mat<C64>),
}

impl SmallExponential {
    pub(crate) fn new(h: &Mat<C64>) -> Self {
        Self::try_eigen(h).unwrap_or_else(|| SmallExponential::Dense(h.clone()))
    }

    fn try_eigen(h: &Mat<C64>) -> Option<Self> {
        let k = h.nrows();
        let evd = h.eigen().ok()?;
        let u = evd.U().to_owned();
        let eigenvalues: Vec<C64> = (0..k).map(|i| evd.S().column_vector()[i]).collect();
        if eigenvalues.iter().any(|l| !l.is_finite()) {
            return None;
        }
        let lu = u.partial_piv_lu();
        let u_inv = lu.inverse();
        let cond = norm1(&u) * norm1(&u_inv);
        if !cond.is_finite() || cond > MAX_EIGENVECTOR_CONDITION {
            return None;
        }
        // U D U⁻¹ must reproduce H.
        let scale = max_abs(h).max(1.0);
        for r in 0..k {
            for c in 0..k {
                let mut s = ZERO;
                for p in 0..k {
                    s += u[(r, p)] * eigenvalues[p] * u_inv[(p, c)];
                }
                if (s - h[(r, c)]).norm() > 1e-10 * scale {
                    return None;
                }
            }
        }
        let mut e1 = Mat::<C64>::zeros(k, 1);
        e1[(0, 0)] = ONE;
        let c = lu.solve(&e1);
        Some(SmallExponential::Eigen {
            coeffs: (0..k).map(|i| c[(i, 0)]).collect(),
            u,
            eigenvalues,
        })
    }

    #[cfg(test)]
    pub(crate) fn is_eigen(&self) -> bool {
        matches!(self, SmallExponential::Eigen { .. })
    }

    /// `e^{H t} e₁`.
    pub(crate) fn eval(&self, t: f64) -> Vec<C64> {
        match self {
            SmallExponential::Eigen {
                u,
                eigenvalues,
                coeffs,
            } => {
                let k = u.nrows();
                let scaled: Vec<C64> = eigenvalues
                    .iter()
                    .zip(coeffs)
                    .map(|(l, c)| (l * t).exp() * c)
                    .collect();
                (0..k)
                    .map(|r| (0..k).map(|p| u[(r, p)] * scaled[p]).sum())
                    .collect()
            }
            SmallExponential::Dense(h) => {
                let e = dense_expm(&Mat::from_fn(h.nrows(), h.ncols(), |r, c| h[(r, c)] * t));
                (0..h.nrows()).map(|r| e[(r, 0)]).collect()
            }
        }
    }
}

fn norm1(m: &Mat<C64>) -> f64 {
    (0..m.ncols())
        .map(|c| (0..m.nrows()).map(|r| m[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn max_abs(m: &Mat<C64>) -> f64 {
    let mut worst: f64 = 0.0;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            worst = worst.max(m[(r, c)].norm());
        }
    }
    worst
}

/// Dense matrix exponential, degree-13 Padé approximant with scaling and squaring.
pub fn dense_expm(a: &Mat<C64>) -> Mat<C64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let nrm = norm1(a);
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scale = 0.5f64.powi(s);
    let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let id = Mat::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let c = |k: usize| C64::new(B[k], 0.0);
    let lin = |x: [(usize, &Mat<C64>); 4]| {
        Mat::from_fn(n, n, |i, j| {
            x.iter().map(|(k, m)| c(*k) * m[(i, j)]).sum::<C64>()
        })
    };
    let u_inner = lin([(13, &a6), (11, &a4), (9, &a2), (0, &Mat::zeros(n, n))]);
    let u_tail = lin([(7, &a6), (5, &a4), (3, &a2), (1, &id)]);
    let u = &a * &(&(&a6 * &u_inner) + &u_tail);
    let v_inner = lin([(12, &a6), (10, &a4), (8, &a2), (0, &Mat::zeros(n, n))]);
    let v_tail = lin([(6, &a6), (4, &a4), (2, &a2), (0, &id)]);
    let v = &(&a6 * &v_inner) + &v_tail;
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorOptions {
    pub krylov_dim: usize,
    /// Per-step bound on the residual estimate, relative to the state norm.
    pub step_tol: f64,
    /// Consecutive halvings of one step before giving up.
    pub max_halvings: usize,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self {
            krylov_dim: DEFAULT_KRYLOV_DIM,
            step_tol: 1e-9,
            max_halvings: 60,
        }
    }
}

/// Advance `v0` through ascending times, calling `emit(k, step, basis, y)`
/// with the state at `times[k]` represented as `basis · y`. `step` counts
/// Krylov bases, so callers can cache projections per basis. An empty basis
/// means the zero vector. Returns the state at the last time.
pub(crate) fn evolve<F>(
    op: &dyn LinearOperator,
    v0: &[C64],
    times: &[f64],
    opts: &PropagatorOptions,
    mut emit: F,
) -> Result<Vec<C64>>
where
    F: FnMut(usize, usize, &[Vec<C64>], &[C64]),
{
    check_times(times)?;
    let mut x = v0.to_vec();
    let mut t_cur = 0.0;
    let mut next = 0usize;
    let mut step_hint: Option<f64> = None;
    let mut step_id = 0usize;
    let t_end = match times.last() {
        Some(&t) => t,
        None => return Ok(x),
    };
    while next < times.len() {
        let beta = norm(&x);
        if beta == 0.0 {
            for k in next..times.len() {
                emit(k, step_id, &[], &[]);
            }
            return Ok(x);
        }
        let basis = arnoldi(op, &x, opts.krylov_dim)?;
        let small = SmallExponential::new(&basis.hessenberg);
        let remaining = t_end - t_cur;
        let mut step = if basis.invariant {
            remaining
        } else {
            step_hint.unwrap_or(remaining).min(remaining)
        };
        let mut halvings = 0;
        let y_end = loop {
            let y: Vec<C64> = small.eval(step).into_iter().map(|c| c * beta).collect();
            let err = basis.next_coupling * y.last().map_or(0.0, |c| c.norm());
            if basis.invariant || err <= opts.step_tol * beta || step == 0.0 {
                break y;
            }
            halvings += 1;
            if halvings > opts.max_halvings {
                return Err(Error::Convergence {
                    iterations: halvings,
                    residual: err / beta,
                });
            }
            step *= 0.5;
        };
        let t_new = t_cur + step;
        let reached_end = step >= remaining;
        while next < times.len() && (reached_end || times[next] <= t_new) {
            let tau = (times[next] - t_cur).max(0.0);
            let y: Vec<C64> = if tau == step {
                y_end.clone()
            } else {
                small.eval(tau).into_iter().map(|c| c * beta).collect()
            };
            emit(next, step_id, &basis.vectors, &y);
            next += 1;
        }
        x = basis.combine(&y_end);
        t_cur = if reached_end { t_end } else { t_new };
        step_hint = Some(if halvings == 0 { 2.0 * step } else { step });
        step_id += 1;
    }
    Ok(x)
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidTime("times must be finite and >= 0".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidTime("times must be ascending".into()));
    }
    Ok(())
}

/// `e^{L dt} v` with the default error control and `m` Krylov vectors.
pub fn expm_apply(op: &dyn LinearOperator, v: &[C64], dt: f64, m: usize) -> Result<Vec<C64>> {
    let opts = PropagatorOptions {
        krylov_dim: m,
        ..PropagatorOptions::default()
    };
    expm_apply_with(op, v, dt, &opts)
}

pub fn expm_apply_with(
    op: &dyn LinearOperator,
    v: &[C64],
    dt: f64,
    opts: &PropagatorOptions,
) -> Result<Vec<C64>> {
    if !dt.is_finite() || dt < 0.0 {
        return Err(Error::InvalidTime(format!("dt must be >= 0, got {dt}")));
    }
    if v.len() != op.dim() {
        return Err(Error::ShapeMismatch(format!(
            "vector length {} for operator dimension {}",
            v.len(),
            op.dim()
        )));
    }
    if dt == 0.0 || norm(v) == 0.0 {
        return Ok(v.to_vec());
    }
    evolve(op, v, &[dt], opts, |_, _, _, _| {})
}

/// `ρ(t)` for each `t` in an ascending grid starting at `ρ(0) = rho`.
pub fn propagate_density(
    rho: &DensityMatrix,
    l: &Liouvillian,
    t_grid: &[f64],
) -> Result<Vec<DensityMatrix>> {
    propagate_density_with(rho, l, t_grid, &PropagatorOptions::default())
}

pub fn propagate_density_with(
    rho: &DensityMatrix,
    l: &Liouvillian,
    t_grid: &[f64],
    opts: &PropagatorOptions,
) -> Result<Vec<DensityMatrix>> {
    if rho.layout() != l.layout() {
        return Err(Error::ShapeMismatch(
            "density matrix layout differs from generator".into(),
        ));
    }
    let layout = *rho.layout();
    let n = rho.as_slice().len();
    let mut out = vec![None; t_grid.len()];
    evolve(
        l.matrix(),
        rho.as_slice(),
        t_grid,
        opts,
        |k, _, basis, y| {
            let v = if basis.is_empty() {
                vec![ZERO; n]
            } else {
                combine(basis, y)
            };
            out[k] = Some(v);
        },
    )?;
    out.into_iter()
        .map(|v| DensityMatrix::from_vec(v.expect("every time emitted"), layout))
        .collect()
}

pub(crate) fn combine(basis: &[Vec<C64>], y: &[C64]) -> Vec<C64> {
    let n = basis[0].len();
    let mut out = vec![ZERO; n];
    for (v, &c) in basis.iter().zip(y) {
        for (o, &x) in out.iter_mut().zip(v) {
            *o += c * x;
        }
    }
    out
}
