use coopcav::cooperativity::{cooperative_fraction, SolveOptions};
use coopcav::observables::{
    emission_spectrum, observe, CorrelationOptions, HorizonOptions, SpectrumOptions,
};
use coopcav::steady_state::{dense_null_space, solve_steady, SteadyStateOptions, DENSE_ORACLE_CAP};
use coopcav::{Liouvillian, SystemParams};

fn steady(p: &SystemParams) -> (Liouvillian, coopcav::DensityMatrix) {
    let l = Liouvillian::new(p).unwrap();
    let rho = solve_steady(&l, &SteadyStateOptions::default())
        .unwrap()
        .rho;
    (l, rho)
}

#[test]
fn mirrored_detunings_mirror_the_spectrum() {
    let base = SystemParams {
        detunings: vec![0.8, -0.2],
        ..SystemParams::resonant(2, 0.4, 0.3, 4)
    };
    let mirrored = SystemParams {
        detunings: vec![-0.8, 0.2],
        ..base.clone()
    };
    let spec = |p: &SystemParams| {
        let (l, rho) = steady(p);
        emission_spectrum(
            &rho,
            &l,
            &HorizonOptions::default(),
            &CorrelationOptions::default(),
            &SpectrumOptions::default(),
        )
        .unwrap()
    };
    let (a, b) = (spec(&base), spec(&mirrored));
    assert_eq!(a.omega.len(), b.omega.len());
    let m = a.omega.len();
    let scale = a.max();
    // The grid is symmetric apart from the unpaired Nyquist bin.
    let mut checked = 0;
    for k in 0..m {
        let w = a.omega[k];
        if let Some(j) = b
            .omega
            .iter()
            .position(|&x| (x + w).abs() < 1e-12 * (1.0 + w.abs()))
        {
            assert!((a.s[k] - b.s[j]).abs() < 1e-7 * scale, "ω = {w}");
            checked += 1;
        }
    }
    assert!(checked >= m - 1);
    let (ra, rb) = (
        observe(&steady(&base).1, &base).unwrap(),
        observe(&steady(&mirrored).1, &mirrored).unwrap(),
    );
    assert!((ra.n - rb.n).abs() < 1e-10 * ra.n);
}

#[test]
fn cooperativity_sign_matches_collective_reference() {
    // Bad cavity: subradiant at weak pump, superradiant near P ≈ Γ.
    let opts = SolveOptions::default();
    for (pump, sign) in [(0.003, -1.0), (0.06, 1.0)] {
        let p = SystemParams::resonant(3, 0.1, pump, 5);
        let point = cooperative_fraction(&p, &opts).unwrap();
        let cf = point.cf.unwrap();
        let reference = point.reference.unwrap();
        assert_eq!(cf.signum(), sign, "P = {pump}: cf = {cf}");
        assert_eq!(
            reference.signum(),
            sign,
            "P = {pump}: reference = {reference}"
        );
    }
}

#[test]
fn cooperativity_identity_holds() {
    let p = SystemParams {
        detunings: vec![0.5, -0.5],
        dephasing: 0.2,
        ..SystemParams::resonant(2, 0.8, 1.5, 10)
    };
    let point = cooperative_fraction(&p, &SolveOptions::default()).unwrap();
    let cf = point.cf.unwrap();
    assert!(
        (cf * point.shared_n - (point.shared_n - point.independent_total())).abs()
            < 1e-12 * point.shared_n
    );
    // ±δ share one single-emitter reference by symmetry.
    assert!(
        (point.independent_n[0] - point.independent_n[1]).abs() < 1e-10 * point.independent_n[0]
    );
}

#[test]
fn shared_cavity_is_less_sensitive_to_detuning() {
    // Detuning decouples each lone emitter from its cavity faster than it
    // decouples the pair from their shared one.
    let opts = SolveOptions {
        max_n_max: Some(128),
        ..SolveOptions::default()
    };
    let at = |delta: f64| {
        let p = SystemParams {
            detunings: vec![delta, -delta],
            ..SystemParams::resonant(2, 5.0, 10.0, 16)
        };
        cooperative_fraction(&p, &opts).unwrap()
    };
    let (on, off) = (at(0.0), at(5.0));
    let shared_drop = off.shared_n / on.shared_n;
    let independent_drop = off.independent_total() / on.independent_total();
    assert!(
        shared_drop > independent_drop,
        "{shared_drop} vs {independent_drop}"
    );
    assert!(off.cf.unwrap() > on.cf.unwrap());
}

#[test]
fn oracle_agrees_on_a_detuned_dephased_pair() {
    let p = SystemParams {
        detunings: vec![0.3, -1.2],
        dephasing: 0.4,
        ..SystemParams::resonant(2, 0.9, 0.7, 6)
    };
    let l = Liouvillian::new(&p).unwrap();
    let fast = solve_steady(&l, &SteadyStateOptions::default())
        .unwrap()
        .rho;
    let dense = dense_null_space(&l, DENSE_ORACLE_CAP).unwrap();
    let worst = fast
        .as_slice()
        .iter()
        .zip(dense.as_slice())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    assert!(worst < 1e-10, "{worst}");
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<coopcav::C64>>, mut b: Vec<coopcav::C64>) -> Vec<coopcav::C64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f.norm() == 0.0 {
                continue;
            }
            for c in col..n {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    let mut x = vec![coopcav::C64::new(0.0, 0.0); n];
    for r in (0..n).rev() {
        let s: coopcav::C64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

#[test]
fn elimination_oracle_with_trace_row() {
    use coopcav::C64;
    for p in [
        SystemParams::resonant(1, 0.7, 0.4, 3),
        SystemParams {
            detunings: vec![0.6, -0.1],
            dephasing: 0.3,
            ..SystemParams::resonant(2, 0.5, 1.2, 2)
        },
    ] {
        let l = Liouvillian::new(&p).unwrap();
        let d = l.hilbert_dim();
        let m = l.matrix().to_dense();
        let n = d * d;
        let mut a: Vec<Vec<C64>> = (0..n)
            .map(|i| (0..n).map(|j| m[(i, j)]).collect())
            .collect();
        // Row 0 becomes the trace functional Σ_i ρ_ii = 1.
        a[0] = vec![C64::new(0.0, 0.0); n];
        for i in 0..d {
            a[0][i + d * i] = C64::new(1.0, 0.0);
        }
        let mut b = vec![C64::new(0.0, 0.0); n];
        b[0] = C64::new(1.0, 0.0);
        let x = gauss_solve(a, b);
        let fast = solve_steady(&l, &SteadyStateOptions::default())
            .unwrap()
            .rho;
        let worst = fast
            .as_slice()
            .iter()
            .zip(&x)
            .fold(0.0f64, |w, (u, v)| w.max((u - v).norm()));
        assert!(worst < 1e-10, "{worst}");
    }
}

#[test]
fn coherent_state_is_poissonian() {
    use coopcav::observables::g2_zero;
    use coopcav::{DensityMatrix, HilbertLayout, C64};
    let layout = HilbertLayout::new(20, 1).unwrap();
    let d = layout.dim();
    let mut v = vec![C64::new(0.0, 0.0); d * d];
    let mut p = (-2.0f64).exp();
    for m in 0..=20usize {
        if m > 0 {
            p *= 2.0 / m as f64;
        }
        let i = layout.basis_index(m, &[false]);
        v[i + d * i] = C64::new(p, 0.0);
    }
    let mut rho = DensityMatrix::from_vec(v, layout).unwrap();
    rho.symmetrize_and_normalize().unwrap();
    assert!((g2_zero(&rho).unwrap() - 1.0).abs() < 1e-4);
}

#[test]
fn symmetric_detuning_gives_a_symmetric_spectrum() {
    let p = SystemParams {
        detunings: vec![0.7, -0.7],
        ..SystemParams::resonant(2, 0.5, 0.4, 5)
    };
    let (l, rho) = steady(&p);
    let s = emission_spectrum(
        &rho,
        &l,
        &HorizonOptions::default(),
        &CorrelationOptions::default(),
        &SpectrumOptions::default(),
    )
    .unwrap();
    let scale = s.max();
    assert!(s.imaginary_residue <= 1e-10);
    assert!(s.negative_excursion <= 1e-3);
    let n = observe(&rho, &p).unwrap().n;
    assert!((s.integral() - n).abs() <= 0.01 * n);
    let mut checked = 0;
    for (k, &w) in s.omega.iter().enumerate() {
        if let Some(j) = s
            .omega
            .iter()
            .position(|&x| (x + w).abs() < 1e-12 * (1.0 + w.abs()))
        {
            assert!((s.s[k] - s.s[j]).abs() <= 0.01 * scale, "ω = {w}");
            checked += 1;
        }
    }
    assert!(checked + 1 >= s.omega.len());
}
