//! Stationary states `L ρ_s = 0`.
//!
//! The production path factorizes `L − σI` for a small negative shift and runs
//! restarted Arnoldi on `(L − σI)⁻¹`, whose dominant eigenvector is the null
//! vector of `L`. It works on the excitation-conserving block of `L`, which
//! holds the steady state. A dense trace-constrained solve serves as oracle.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};
use crate::model::{DensityMatrix, Liouvillian, SystemParams};
use crate::operator_algebra::{LinearOperator, SparseOperator, C64, ONE, ZERO};
use crate::propagator::{arnoldi, norm};

/// Default cap on `D²` for the dense oracle.
pub const DENSE_ORACLE_CAP: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyStateOptions {
    /// Bound on `‖L vec(ρ_s)‖₂` for a unit-trace `ρ_s`.
    pub tol: f64,
    pub shift: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// A second Ritz value closer than this to zero means a degenerate null space.
    pub degeneracy_tol: f64,
    /// Restrict to the zero excitation-difference block (exact for this model).
    pub use_sectors: bool,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            shift: -1e-6,
            krylov_dim: 30,
            max_restarts: 40,
            degeneracy_tol: 1e-9,
            use_sectors: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SteadyStateResult {
    pub rho: DensityMatrix,
    /// `‖L vec(ρ_s)‖₂`.
    pub residual: f64,
    /// `|λ₁|` of the smallest nonzero Ritz value, when the Krylov space found one.
    pub spectral_gap_estimate: Option<f64>,
    /// Population of the highest retained Fock level.
    pub truncation_tail: f64,
    pub restarts: usize,
}

/// Sparse LU of `A − σI` applied as a linear operator.
struct ShiftInvert {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, C64>,
}

impl ShiftInvert {
    fn new(a: &SparseOperator, shift: C64) -> Result<Self> {
        let n = a.rows();
        let mut t: Vec<Triplet<usize, usize, C64>> = a
            .triplets()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        t.extend((0..n).map(|i| Triplet::new(i, i, -shift)));
        let m = SparseColMat::<usize, C64>::try_new_from_triplets(n, n, &t).map_err(|e| {
            Error::SingularShift {
                shift: format!("{shift}"),
                reason: format!("{e:?}"),
            }
        })?;
        let lu = m.sp_lu().map_err(|e| Error::SingularShift {
            shift: format!("{shift}"),
            reason: format!("{e:?}"),
        })?;
        // Probe: a singular factor yields non-finite solutions.
        let mut probe = Mat::<C64>::from_fn(n, 1, |i, _| C64::new(1.0 + (i % 7) as f64, 0.0));
        lu.solve_in_place(probe.as_mut());
        if (0..n).any(|i| !probe[(i, 0)].is_finite()) {
            return Err(Error::SingularShift {
                shift: format!("{shift}"),
                reason: "factorization produced non-finite values".into(),
            });
        }
        Ok(Self { n, lu })
    }
}

impl LinearOperator for ShiftInvert {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let mut rhs = Mat::<C64>::from_fn(self.n, 1, |i, _| x[i]);
        self.lu.solve_in_place(rhs.as_mut());
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = rhs[(i, 0)];
        }
    }
}

/// Stationary state by shift-and-invert Arnoldi.
pub fn solve_steady(l: &Liouvillian, opts: &SteadyStateOptions) -> Result<SteadyStateResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::param("tol", "must be > 0"));
    }
    let d = l.hilbert_dim();
    let (matrix, indices): (SparseOperator, Option<Vec<usize>>) = if opts.use_sectors {
        let s = l.sector(0)?;
        (s.matrix, Some(s.indices))
    } else {
        (l.matrix().clone(), None)
    };
    let n = matrix.rows();
    // Trace functional restricted to the working space.
    let diag_mask: Vec<bool> = match &indices {
        Some(idx) => idx.iter().map(|&k| k % d == k / d).collect(),
        None => (0..n).map(|k| k % d == k / d).collect(),
    };

    let mut shift = C64::new(opts.shift, 0.0);
    let mut inverse = None;
    let mut last_err = None;
    for attempt in 0..4 {
        match ShiftInvert::new(&matrix, shift) {
            Ok(op) => {
                inverse = Some(op);
                break;
            }
            Err(e) => {
                last_err = Some(e);
                shift = shift * 1.7 + C64::new(0.0, opts.shift.abs() * (attempt + 1) as f64);
            }
        }
    }
    let inverse = match inverse {
        Some(op) => op,
        None => return Err(last_err.expect("at least one attempt")),
    };

    // Maximally mixed seed.
    let mut seed: Vec<C64> = diag_mask
        .iter()
        .map(|&on| if on { ONE } else { ZERO })
        .collect();
    let mut residual = f64::INFINITY;
    let mut work = vec![ZERO; n];
    for restart in 0..opts.max_restarts.max(1) {
        let basis = arnoldi(&inverse, &seed, opts.krylov_dim)?;
        let k = basis.dim();
        let evd = basis.hessenberg().eigen().map_err(|_| Error::Convergence {
            iterations: restart,
            residual: f64::NAN,
        })?;
        let theta: Vec<C64> = (0..k).map(|i| evd.S().column_vector()[i]).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| theta[b].norm().total_cmp(&theta[a].norm()));
        let lambda = |i: usize| shift + ONE / theta[i];

        let u = evd.U();
        let coeffs: Vec<C64> = (0..k).map(|r| u[(r, order[0])]).collect();
        let mut x = basis.combine(&coeffs);
        let tr: C64 = x
            .iter()
            .zip(&diag_mask)
            .filter(|(_, &on)| on)
            .map(|(v, _)| *v)
            .sum();
        if tr.norm() == 0.0 || !tr.is_finite() {
            return Err(Error::Convergence {
                iterations: restart,
                residual: f64::NAN,
            });
        }
        x.iter_mut().for_each(|v| *v /= tr);
        matrix.mul_vec_into(&x, &mut work);
        residual = norm(&work);

        let gap = (k >= 2).then(|| lambda(order[1]).norm());
        if let Some(g) = gap {
            if g < opts.degeneracy_tol {
                return Err(Error::NonUniqueSteadyState(format!(
                    "two Ritz values within {:.1e} of zero ({:.3e}, {:.3e})",
                    opts.degeneracy_tol,
                    lambda(order[0]).norm(),
                    g
                )));
            }
        }
        if residual <= opts.tol {
            let full = match &indices {
                Some(idx) => {
                    let mut v = vec![ZERO; d * d];
                    for (&kk, &val) in idx.iter().zip(&x) {
                        v[kk] = val;
                    }
                    v
                }
                None => x,
            };
            let mut rho = DensityMatrix::from_vec(full, *l.layout())?;
            rho.symmetrize_and_normalize()?;
            let final_residual = match &indices {
                Some(idx) => {
                    let part: Vec<C64> = idx.iter().map(|&kk| rho.as_slice()[kk]).collect();
                    matrix.mul_vec_into(&part, &mut work);
                    norm(&work)
                }
                None => norm(&matrix.mul_vec(rho.as_slice())),
            };
            let tail = *rho
                .photon_distribution()
                .last()
                .expect("at least one level");
            return Ok(SteadyStateResult {
                rho,
                residual: final_residual,
                spectral_gap_estimate: gap,
                truncation_tail: tail,
                restarts: restart,
            });
        }
        seed = x;
    }
    Err(Error::Convergence {
        iterations: opts.max_restarts,
        residual,
    })
}

/// Dense oracle: solve `{L x = 0, vec(I)† x = 1}` by replacing the first
/// equation with the trace constraint.
pub fn dense_null_space(l: &Liouvillian, cap: usize) -> Result<DensityMatrix> {
    let n = l.liouville_dim();
    if n > cap {
        return Err(Error::OracleTooLarge { dim: n, cap });
    }
    let d = l.hilbert_dim();
    let mut a = l.matrix().to_dense();
    for j in 0..n {
        a[(0, j)] = if j % d == j / d { ONE } else { ZERO };
    }
    let lu = a.partial_piv_lu();
    let u = lu.U();
    let pivots: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let largest = pivots.iter().cloned().fold(0.0, f64::max);
    let smallest = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smallest > 1e-11 * largest) {
        return Err(Error::NonUniqueSteadyState(format!(
            "trace-constrained system is rank deficient (pivot ratio {:.2e})",
            smallest / largest
        )));
    }
    let mut b = Mat::<C64>::zeros(n, 1);
    b[(0, 0)] = ONE;
    let x = lu.solve(&b);
    let v: Vec<C64> = (0..n).map(|i| x[(i, 0)]).collect();
    let mut rho = DensityMatrix::from_vec(v, *l.layout())?;
    rho.symmetrize_and_normalize()?;
    Ok(rho)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncationVerdict {
    pub adequate: bool,
    pub top_population: f64,
    pub mean_photons: f64,
    /// Larger truncation to try when inadequate (doubling rule).
    pub recommended_n_max: Option<usize>,
}

/// Default bound on the top Fock population relative to `max(n, 1)`.
pub const DEFAULT_TRUNCATION_THRESHOLD: f64 = 1e-6;

pub fn check_truncation(result: &SteadyStateResult, threshold: f64) -> TruncationVerdict {
    let p = result.rho.photon_distribution();
    let mean: f64 = p.iter().enumerate().map(|(m, pm)| m as f64 * pm).sum();
    let top = *p.last().expect("at least one level");
    let adequate = top <= threshold * mean.max(1.0);
    let n_max = result.rho.layout().n_max();
    TruncationVerdict {
        adequate,
        top_population: top,
        mean_photons: mean,
        recommended_n_max: (!adequate).then(|| (2 * n_max).max(n_max + 1)),
    }
}

/// Solve, doubling `n_max` until the truncation check passes or `max_n_max`
/// is reached. Returns the parameters actually used.
pub fn solve_with_adequate_truncation(
    params: &SystemParams,
    opts: &SteadyStateOptions,
    threshold: f64,
    max_n_max: usize,
) -> Result<(SystemParams, SteadyStateResult, TruncationVerdict)> {
    let mut p = params.clone();
    loop {
        let l = Liouvillian::new(&p)?;
        let result = solve_steady(&l, opts)?;
        let verdict = check_truncation(&result, threshold);
        match verdict.recommended_n_max {
            Some(next) if next <= max_n_max => p.n_max = next,
            _ => return Ok((p, result, verdict)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::expectation;
    use crate::operator_algebra::{embed, fock_annihilation, Site};

    fn n_of(rho: &DensityMatrix) -> f64 {
        let layout = *rho.layout();
        let a = embed(
            &fock_annihilation(layout.fock_levels()).unwrap(),
            Site::Cavity,
            &layout,
        )
        .unwrap();
        expectation(rho, &a.dagger().matmul(&a).unwrap())
            .unwrap()
            .re
    }

    #[test]
    fn decoupled_pumped_emitters_are_inverted() {
        let p = SystemParams::resonant(2, 0.0, 0.3, 2);
        let l = Liouvillian::new(&p).unwrap();
        let r = solve_steady(&l, &SteadyStateOptions::default()).unwrap();
        let layout = *l.layout();
        let target = layout.basis_index(0, &[true, true]);
        for (k, v) in r.rho.as_slice().iter().enumerate() {
            let expect = if k == target + layout.dim() * target {
                1.0
            } else {
                0.0
            };
            assert!((v - C64::new(expect, 0.0)).norm() < 1e-10);
        }
        assert!(r.residual <= 1e-10);
        assert!(check_truncation(&r, DEFAULT_TRUNCATION_THRESHOLD).adequate);
    }

    #[test]
    fn matches_dense_oracle_single_emitter() {
        for (i, pump) in [0.01, 0.05, 0.2, 0.7, 2.0].into_iter().enumerate() {
            let mut p = SystemParams::resonant(1, 0.4, pump, 3 + i % 3);
            p.dephasing = 0.05;
            let l = Liouvillian::new(&p).unwrap();
            let r = solve_steady(&l, &SteadyStateOptions::default()).unwrap();
            let oracle = dense_null_space(&l, DENSE_ORACLE_CAP).unwrap();
            for (a, b) in r.rho.as_slice().iter().zip(oracle.as_slice()) {
                assert!((a - b).norm() < 1e-8);
            }
            assert!(r.spectral_gap_estimate.unwrap() > 0.0);
        }
    }

    #[test]
    fn full_space_and_sector_paths_agree() {
        let mut p = SystemParams::resonant(2, 0.5, 0.3, 2);
        p.detunings = vec![0.2, -0.1];
        let l = Liouvillian::new(&p).unwrap();
        let sector = solve_steady(&l, &SteadyStateOptions::default()).unwrap();
        let full = solve_steady(
            &l,
            &SteadyStateOptions {
                use_sectors: false,
                ..SteadyStateOptions::default()
            },
        )
        .unwrap();
        for (a, b) in sector.rho.as_slice().iter().zip(full.rho.as_slice()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_pump_has_degenerate_null_space() {
        // Without pump or loss of emitter excitation the dark states are stationary too.
        let p = SystemParams::resonant(2, 0.5, 0.0, 1);
        let l = Liouvillian::new(&p).unwrap();
        assert!(matches!(
            solve_steady(&l, &SteadyStateOptions::default()),
            Err(Error::NonUniqueSteadyState(_))
        ));
        assert!(matches!(
            dense_null_space(&l, DENSE_ORACLE_CAP),
            Err(Error::NonUniqueSteadyState(_))
        ));
    }

    #[test]
    fn oracle_refuses_large_systems() {
        let p = SystemParams::resonant(3, 0.1, 0.1, 8);
        let l = Liouvillian::new(&p).unwrap();
        assert!(matches!(
            dense_null_space(&l, DENSE_ORACLE_CAP),
            Err(Error::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn truncation_doubling_converges_for_a_laser() {
        let p = SystemParams::resonant(2, 10.0, 10.0, 4);
        let l = Liouvillian::new(&p).unwrap();
        let r = solve_steady(&l, &SteadyStateOptions::default()).unwrap();
        let v = check_truncation(&r, DEFAULT_TRUNCATION_THRESHOLD);
        assert!(!v.adequate);
        assert_eq!(v.recommended_n_max, Some(8));

        let (used, r, v) = solve_with_adequate_truncation(
            &p,
            &SteadyStateOptions::default(),
            DEFAULT_TRUNCATION_THRESHOLD,
            256,
        )
        .unwrap();
        assert!(v.adequate);
        let mut bigger = used.clone();
        bigger.n_max *= 2;
        let r2 = solve_steady(
            &Liouvillian::new(&bigger).unwrap(),
            &SteadyStateOptions::default(),
        )
        .unwrap();
        let (n1, n2) = (n_of(&r.rho), n_of(&r2.rho));
        assert!((n1 - n2).abs() < 1e-3 * n2, "n {n1} vs {n2}");
    }

    #[test]
    fn observables_insensitive_to_shift() {
        let p = SystemParams::resonant(2, 0.3, 0.2, 4);
        let l = Liouvillian::new(&p).unwrap();
        let mut ns = Vec::new();
        for shift in [-1e-6, -3e-6, -1e-5] {
            let opts = SteadyStateOptions {
                shift,
                ..SteadyStateOptions::default()
            };
            ns.push(n_of(&solve_steady(&l, &opts).unwrap().rho));
        }
        assert!(ns.iter().all(|n| (n - ns[0]).abs() < 1e-8));
    }
}
