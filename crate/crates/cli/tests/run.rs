use std::fs;
use std::process::Command;

use rabi_cli::output::{
    ANTICROSSING_HEADER, CALIBRATION_HEADER, COUPLING_HEADER, DYNAMICS_HEADER, GHZ_HEADER,
    SPECTRUM_HEADER,
};
use rabi_cli::{execute, manifest_path, parse_config, run, ExperimentSpec};
use rabi_core::{find_anticrossing, BareLabel, SystemConfig};

fn system(mu: &str, n_fock: usize) -> String {
    format!(
        "[system]
n_qubits = 2
omega_q = 1
omega_c = 2 wq
lambda = 0.1 wq
theta = \"pi/6\"
mu = {mu}
kappa = 0 wq
gamma = 0 wq
n_fock = {n_fock}
"
    )
}

fn spec(experiment: &str) -> ExperimentSpec {
    let text = format!("{}\n[experiment]\n{experiment}\n", system("0.05 wq", 20));
    parse_config(&text).unwrap_or_else(|e| panic!("{e}"))
}

fn csv(spec: &ExperimentSpec) -> String {
    execute(spec).unwrap().table.to_csv()
}

fn header(csv: &str) -> &str {
    csv.lines().next().unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let idx = header(csv)
        .split(", ")
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    csv.lines()
        .skip(1)
        .map(|l| l.split(", ").nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn spectrum_csv() {
    let s = spec("kind = spectrum_sweep\nomega_c_min = 0.5 wq\nomega_c_max = 1.5 wq\nn_points = 101\nn_levels = 4");
    let out = csv(&s);
    assert_eq!(
        header(&out),
        "omega_c_over_wq, level_index, omega_i0_over_wq"
    );
    assert_eq!(header(&out), SPECTRUM_HEADER.join(", "));
    assert_eq!(out.lines().count(), 1 + 101 * 4);
    // grid order, levels innermost
    let w = column(&out, "omega_c_over_wq");
    assert_eq!(w[0], 0.5);
    assert_eq!(w[4], 0.51);
    assert_eq!(*w.last().unwrap(), 1.5);
    let levels = column(&out, "level_index");
    assert_eq!(&levels[..5], &[0.0, 1.0, 2.0, 3.0, 0.0]);
    // ground branch sits at zero
    assert!(column(&out, "omega_i0_over_wq")
        .iter()
        .step_by(4)
        .all(|e| *e == 0.0));
}

#[test]
fn coarse_tracked_sweep_is_an_error() {
    let s = spec("kind = spectrum_sweep\nomega_c_min = 0.5 wq\nomega_c_max = 1.5 wq\nn_points = 11\nn_levels = 4");
    let err = execute(&s).unwrap_err();
    assert!(err.to_string().contains("too coarse"), "{err}");
}

#[test]
fn untracked_spectrum_is_sorted() {
    let s = spec("kind = spectrum_sweep\nomega_c_min = 1.8 wq\nomega_c_max = 2.2 wq\nn_points = 5\nn_levels = 6\ntrack = false");
    let out = csv(&s);
    let e = column(&out, "omega_i0_over_wq");
    for point in e.chunks(6) {
        assert!(point.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn anticrossing_csv_matches_library() {
    let s = spec("kind = anticrossing");
    let out = csv(&s);
    assert_eq!(header(&out), ANTICROSSING_HEADER.join(", "));
    assert_eq!(
        header(&out),
        "omega_c_star_over_wq, gap_over_wq, overlap_bareA_sq, overlap_bareB_sq"
    );
    let direct = find_anticrossing(
        &SystemConfig::reference(2),
        &BareLabel::all_ground(2, 1),
        &BareLabel::all_excited(2, 0),
        (1.9, 2.1),
    )
    .unwrap();
    let gaps = column(&out, "gap_over_wq");
    assert_eq!(gaps, vec![direct.gap; 2]);
    // both hybridized levels are close to an even mixture
    for name in ["overlap_bareA_sq", "overlap_bareB_sq"] {
        assert!(column(&out, name).iter().all(|p| (p - 0.5).abs() < 0.05));
    }
}

#[test]
fn effective_coupling_csv() {
    let text = format!(
        "{}\n[experiment]\nkind = effective_coupling\nlambda_grid = 0.02 wq, 0.05 wq, 0.1 wq\n",
        system("0 wq", 20)
    );
    let out = csv(&parse_config(&text).unwrap());
    assert_eq!(header(&out), COUPLING_HEADER.join(", "));
    assert_eq!(column(&out, "lambda_over_wq"), vec![0.02, 0.05, 0.1]);
    let analytic = column(&out, "two_omega_analytic");
    let exact = column(&out, "two_omega_exact");
    assert!((analytic[2] - 2e-3).abs() < 1e-15);
    // third order is accurate at weak coupling
    assert!((exact[0] - analytic[0]).abs() / exact[0] < 2e-3);
}

#[test]
fn lossless_dynamics_reaches_joint_absorption() {
    let s = spec("kind = dynamics\nstart = hybrid\nduration_pi = 1.2\nn_samples = 61");
    let out = csv(&s);
    assert_eq!(header(&out), DYNAMICS_HEADER.join(", "));
    assert_eq!(
        header(&out),
        "time_wq, omega_eff_t_over_pi, photon_XX, qubit1_CC, qubit2_CC, Gq2, Gc2, Gqc2"
    );
    assert_eq!(out.lines().count(), 62);
    let phase = column(&out, "omega_eff_t_over_pi");
    assert_eq!(phase[0], 0.0);
    assert!((phase[60] - 1.2).abs() < 1e-12);
    let peak = column(&out, "qubit1_CC").into_iter().fold(0.0, f64::max);
    assert!(peak >= 0.9, "qubit excitation peaks at {peak}");
    let c2 = column(&out, "qubit2_CC");
    let c1 = column(&out, "qubit1_CC");
    assert!(c1.iter().zip(&c2).all(|(a, b)| (a - b).abs() < 1e-9));
}

#[test]
fn ghz_csv() {
    let out = csv(&spec("kind = ghz"));
    assert_eq!(header(&out), GHZ_HEADER.join(", "));
    let f = column(&out, "fidelity")[0];
    assert!(f > 0.95 && f <= 1.0 + 1e-9, "fidelity {f}");
}

#[test]
fn calibration_csv() {
    // a small space and a loose integrator keep this quick
    let text = format!(
        "{}\n[experiment]\nkind = calibrate\nscan = pi/2, pi, 3pi/2\nn_levels = 10\nrtol = 1e-6\natol = 1e-8\n",
        system("0.05 wq", 8)
    );
    let out = csv(&parse_config(&text).unwrap());
    assert_eq!(header(&out), CALIBRATION_HEADER.join(", "));
    let flags = column(&out, "calibrated");
    assert_eq!(flags, vec![0.0, 0.0, 0.0, 1.0]);
    let transfer = column(&out, "transfer");
    assert!(transfer[3] >= transfer[..3].iter().copied().fold(0.0, f64::max));
    assert!(transfer[3] > 0.9, "transfer {}", transfer[3]);
}

#[test]
fn output_is_independent_of_thread_count() {
    let specs = [
        spec("kind = spectrum_sweep\nomega_c_min = 0.5 wq\nomega_c_max = 1.9 wq\nn_points = 29\nn_levels = 6"),
        spec("kind = effective_coupling\nlambda_grid = 0.1 wq, 0.03 wq, 0.07 wq, 0.05 wq"),
    ];
    for s in &specs {
        let reference = csv(s);
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let again = pool.install(|| csv(s));
            assert_eq!(again, reference, "{threads} thread(s)");
        }
    }
    // rows follow the input grid, not sorted order
    let lambdas = column(&csv(&specs[1]), "lambda_over_wq");
    assert_eq!(lambdas, vec![0.1, 0.03, 0.07, 0.05]);
}

#[test]
fn run_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gap.csv");
    let s = spec("kind = anticrossing");
    let report = run(&s, &out).unwrap();
    assert_eq!(report.rows, 2);
    assert_eq!(report.manifest_path, manifest_path(&out));

    let first = fs::read(&out).unwrap();
    run(&s, &out).unwrap();
    assert_eq!(fs::read(&out).unwrap(), first, "CSV must be bit-identical");

    let manifest = fs::read_to_string(&report.manifest_path).unwrap();
    assert!(manifest.contains(&format!("library_version = {}", rabi_core::VERSION)));
    assert!(manifest.contains("wall_time_s = "));
    assert!(manifest.contains("kind = anticrossing"));
    // the echoed config is the resolved spec, readable as a config again
    let echo = &manifest[manifest.find("[system]").unwrap()..];
    let back = parse_config(echo).unwrap();
    assert_eq!(
        back,
        ExperimentSpec {
            output_path: Some(out.clone()),
            ..s
        }
    );
}

fn write_config(dir: &std::path::Path, experiment: &str) -> std::path::PathBuf {
    let path = dir.join("exp.conf");
    fs::write(
        &path,
        format!("{}\n[experiment]\n{experiment}\n", system("0.05 wq", 20)),
    )
    .unwrap();
    path
}

#[test]
fn binary_runs_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[output]\npath = \"from_config.csv\"");
    let out = dir.path().join("gap.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_rabi"))
        .args(["anticross", "--threads", "2", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    assert!(out.exists());
    assert!(manifest_path(&out).exists());
    assert!(
        !dir.path().join("from_config.csv").exists(),
        "--out takes precedence"
    );

    // without --out the [output] path is used
    let status = Command::new(env!("CARGO_BIN_EXE_rabi"))
        .args(["anticross", "--config"])
        .arg(&config)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(status.status.success());
    assert_eq!(
        fs::read(dir.path().join("from_config.csv")).unwrap(),
        fs::read(&out).unwrap()
    );
}

#[test]
fn binary_reports_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "kind = anticrossing\nbraket = 1.9, 2.1");
    let output = Command::new(env!("CARGO_BIN_EXE_rabi"))
        .args(["anticross", "--out", "x.csv", "--config"])
        .arg(&config)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 14: unknown key `braket`"), "{stderr}");
    assert!(!dir.path().join("x.csv").exists());

    // a kind that does not match the subcommand is rejected
    let output = Command::new(env!("CARGO_BIN_EXE_rabi"))
        .args(["ghz", "--out", "x.csv", "--config"])
        .arg(&config)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn binary_rejects_zero_threads() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "kind = anticrossing");
    let output = Command::new(env!("CARGO_BIN_EXE_rabi"))
        .args(["anticross", "--threads", "0", "--out", "x.csv", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("--threads"));
}
