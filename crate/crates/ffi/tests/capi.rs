use std::ffi::CStr;
use std::ptr;

use coopcav_ffi::*;

fn last_error() -> String {
    unsafe {
        let needed = coop_last_error_message(ptr::null_mut(), 0);
        assert!(needed > 0);
        let mut buf = vec![0 as std::ffi::c_char; needed];
        assert_eq!(coop_last_error_message(buf.as_mut_ptr(), buf.len()), needed);
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn decoupled_round_trip() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(
            coop_params_new(2, 0.0, 1.0, 0.5, 0.0, 2, &mut p),
            CoopStatus::Ok
        );
        let mut s = ptr::null_mut();
        assert_eq!(coop_steady_state_solve(p, 0.0, &mut s), CoopStatus::Ok);
        let mut obs = CoopObservables::default();
        assert_eq!(coop_steady_state_observables(s, &mut obs), CoopStatus::Ok);
        assert!(obs.n.abs() < 1e-12);
        assert!((obs.z - 2.0).abs() < 1e-10);
        assert!(obs.g2.is_nan());
        assert!(obs.spectral_gap > 0.0);
        coop_steady_state_free(s);
        coop_params_free(p);
    }
}

#[test]
fn cooperativity_and_spectrum() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(
            coop_params_new(2, 0.5, 1.0, 0.3, 0.0, 5, &mut p),
            CoopStatus::Ok
        );
        assert_eq!(coop_params_set_detuning(p, 0, 0.2), CoopStatus::Ok);
        assert_eq!(coop_params_set_detuning(p, 1, -0.2), CoopStatus::Ok);
        assert_eq!(
            coop_params_set_detuning(p, 2, 0.0),
            CoopStatus::InvalidArgument
        );
        assert!(last_error().contains("out of range"));

        let mut c = CoopCooperativity::default();
        assert_eq!(coop_cooperative_fraction(p, &mut c), CoopStatus::Ok);
        let cf = (c.shared_n - c.independent_n_total) / c.shared_n;
        assert!((cf - c.cf).abs() < 1e-14);

        let mut s = ptr::null_mut();
        assert_eq!(coop_steady_state_solve(p, 0.0, &mut s), CoopStatus::Ok);
        let mut spec = ptr::null_mut();
        assert_eq!(coop_spectrum_compute(s, &mut spec), CoopStatus::Ok);
        let len = coop_spectrum_len(spec);
        assert!(len > 16);
        let mut omega = vec![0.0; len];
        let mut density = vec![0.0; len];
        assert_eq!(
            coop_spectrum_copy(spec, omega.as_mut_ptr(), density.as_mut_ptr(), len - 1),
            CoopStatus::BufferTooSmall
        );
        assert_eq!(
            coop_spectrum_copy(spec, omega.as_mut_ptr(), density.as_mut_ptr(), len),
            CoopStatus::Ok
        );
        assert!(omega.windows(2).all(|w| w[1] > w[0]));
        let integral: f64 =
            density.iter().sum::<f64>() * (omega[1] - omega[0]) / (2.0 * std::f64::consts::PI);
        assert!((integral - c.shared_n).abs() < 0.01 * c.shared_n);
        let mut fwhm = 0.0;
        assert_eq!(coop_spectrum_fwhm(spec, &mut fwhm), CoopStatus::Ok);
        assert!(fwhm > 0.0);
        coop_spectrum_free(spec);
        coop_steady_state_free(s);
        coop_params_free(p);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(
            coop_params_new(0, 0.1, 1.0, 0.1, 0.0, 2, &mut p),
            CoopStatus::InvalidArgument
        );
        assert!(p.is_null());
        assert!(last_error().contains("n_emitters"));
        assert_eq!(
            coop_params_new(1, 0.1, 1.0, 0.1, 0.0, 2, ptr::null_mut()),
            CoopStatus::NullPointer
        );
        let mut obs = CoopObservables::default();
        assert_eq!(
            coop_steady_state_observables(ptr::null(), &mut obs),
            CoopStatus::NullPointer
        );
        // No pump and no emitter decay: the null space is degenerate.
        assert_eq!(
            coop_params_new(2, 0.5, 1.0, 0.0, 0.0, 1, &mut p),
            CoopStatus::Ok
        );
        let mut s = ptr::null_mut();
        assert_eq!(
            coop_steady_state_solve(p, 0.0, &mut s),
            CoopStatus::SolverFailure
        );
        assert!(last_error().contains("not unique"));
        coop_params_free(p);
        coop_params_free(ptr::null_mut());
        assert_eq!(coop_spectrum_len(ptr::null()), 0);
    }
}

#[test]
fn version_and_header() {
    let v = unsafe { CStr::from_ptr(coop_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/coopcav.h")).unwrap();
    for name in [
        "coop_params_new",
        "coop_steady_state_solve",
        "coop_cooperative_fraction",
        "coop_spectrum_copy",
        "coop_last_error_message",
        "COOP_STATUS_BUFFER_TOO_SMALL",
        "typedef struct CoopParams CoopParams",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/coopcav.h");
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler on PATH; skipping");
        return;
    };
    assert!(status.success());
}
