use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
plots = true

[[sweep]]
name = "pair"
axis = "pump"
grid = { kind = "log", start = 0.01, stop = 3.0, points = 6 }
outputs = { cooperativity = true, spectrum = true }
[sweep.base]
n_emitters = 2
g = 0.3
n_max = 6
detunings = [0.2, -0.2]

[[sweep]]
name = "detuning"
axis = "detuning_symmetric"
grid = { kind = "list", values = [0.0, 0.5, 2.0] }
[sweep.base]
n_emitters = 2
g = 1.0
pump = 0.5
n_max = 6
"#;

fn simulate(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_config(dir: &Path, config: &str, out: &str, workers: &str) -> std::process::Output {
    let cfg = dir.join(format!("{out}.toml"));
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join(out);
    simulate(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--workers",
        workers,
    ])
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref())
        .unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

#[test]
fn runs_are_deterministic_and_reproducible_from_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_config(tmp.path(), CONFIG, "a", "1");
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run_config(tmp.path(), CONFIG, "b", "3");
    assert!(b.status.success());
    for sweep in ["pair", "detuning"] {
        let ra = read(tmp.path().join("a").join(sweep).join("results.csv"));
        let rb = read(tmp.path().join("b").join(sweep).join("results.csv"));
        assert_eq!(ra, rb, "sweep {sweep} differs between worker counts");
    }
    for i in 0..6 {
        assert_eq!(
            read(tmp.path().join(format!("a/pair/spectrum_{i}.csv"))),
            read(tmp.path().join(format!("b/pair/spectrum_{i}.csv")))
        );
    }
    for plot in [
        "cooperativity.svg",
        "population.svg",
        "g2.svg",
        "spectra.svg",
    ] {
        assert!(read(tmp.path().join("a/pair").join(plot)).starts_with("<svg"));
    }

    let manifest = tmp.path().join("a/manifest.toml");
    let rerun = simulate(&[
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        tmp.path().join("c").to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert!(
        rerun.status.success(),
        "{}",
        String::from_utf8_lossy(&rerun.stderr)
    );
    for sweep in ["pair", "detuning"] {
        assert_eq!(
            read(tmp.path().join("a").join(sweep).join("results.csv")),
            read(tmp.path().join("c").join(sweep).join("results.csv"))
        );
    }
}

#[test]
fn csv_columns_are_self_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_config(tmp.path(), CONFIG, "run", "2");
    assert!(out.status.success());
    let mut reader = csv::Reader::from_path(tmp.path().join("run/pair/results.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (n_col, ind_col, cf_col, status_col) =
        (col("n"), col("n_independent"), col("cf"), col("status"));
    let (nn_col, z_col, nz_col) = (col("n_over_N"), col("Z"), col("n_over_Z"));
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[status_col], "ok");
        let n: f64 = rec[n_col].parse().unwrap();
        let ind: f64 = rec[ind_col].parse().unwrap();
        let cf: f64 = rec[cf_col].parse().unwrap();
        // Each field carries 12 significant digits.
        let bound = 1e-11 * (1.0 + ind / n);
        assert!(
            (cf - (n - ind) / n).abs() <= bound,
            "{cf} vs {}",
            (n - ind) / n
        );
        let z: f64 = rec[z_col].parse().unwrap();
        assert!((rec[nn_col].parse::<f64>().unwrap() - n / 2.0).abs() <= 1e-11 * n);
        assert!((rec[nz_col].parse::<f64>().unwrap() - n / z).abs() <= 1e-11 * n / z);
        rows += 1;
    }
    assert_eq!(rows, 6);
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_key = run_config(tmp.path(), "[[sweep]]\ngg = 1\n", "bad", "1");
    assert_eq!(bad_key.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_key.stderr).contains("gg"));

    let negative = CONFIG.replace("g = 0.3", "g = -0.3");
    let neg = run_config(tmp.path(), &negative, "neg", "1");
    assert_eq!(neg.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&neg.stderr).contains("pair"));

    let unknown = simulate(&[
        "--preset",
        "nope",
        "--out",
        tmp.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("fig2"));

    let nothing = simulate(&[]);
    assert_eq!(nothing.status.code(), Some(2));
}
