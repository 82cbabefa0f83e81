use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use rabi_cli::{
    parse_config, parse_config_for, render, ConfigError, ExperimentKind, ExperimentParams,
    ExperimentSpec, Numerics, StartState,
};
use rabi_core::{BareLabel, SystemConfig};

const SYSTEM: &str = "\
[system]
n_qubits = 2
omega_q = 1
omega_c = 2 wq
lambda = 0.1 wq
theta = \"pi/6\"
mu = 0.05 wq
kappa = 3e-5 wq
gamma = 3e-5 wq
n_fock = 20
";

fn with_experiment(experiment: &str) -> String {
    format!("{SYSTEM}\n[experiment]\n{experiment}\n")
}

fn problems(err: &ConfigError) -> Vec<String> {
    err.problems.iter().map(|p| p.to_string()).collect()
}

fn assert_mentions(err: &ConfigError, needle: &str) {
    assert!(
        err.problems.iter().any(|p| p.to_string().contains(needle)),
        "no problem mentions {needle:?}: {:#?}",
        problems(err)
    );
}

#[test]
fn reference_config_parses() {
    let spec = parse_config(&with_experiment("kind = anticrossing")).unwrap();
    let s = &spec.system;
    assert_eq!(s.n_qubits, 2);
    assert_eq!(s.lambdas, vec![0.1, 0.1]);
    assert_eq!(s.theta, 0.5235987755982988);
    assert_eq!(s.mu, 0.05);
    assert_eq!(s.kappa, 3e-5);
    assert_eq!(s.n_fock, 20);
    assert_eq!(spec.kind(), ExperimentKind::Anticrossing);
    assert_eq!(spec.output_path, None);
}

#[test]
fn wq_suffix_scales_by_omega_q() {
    let text = with_experiment("kind = anticrossing")
        .replace("omega_q = 1", "omega_q = 2")
        .replace("kappa = 3e-5 wq", "kappa = 3e-5");
    let spec = parse_config(&text).unwrap();
    assert_eq!(spec.system.lambdas, vec![0.2, 0.2]);
    assert_eq!(spec.system.omega_c, 4.0);
    // bare numbers are absolute
    assert_eq!(spec.system.kappa, 3e-5);
    assert_eq!(spec.system.gamma, 6e-5);
}

#[test]
fn per_qubit_couplings() {
    let text = with_experiment("kind = anticrossing")
        .replace("lambda = 0.1 wq", "lambdas = 0.08 wq, 0.12 wq");
    let spec = parse_config(&text).unwrap();
    assert_eq!(spec.system.lambdas, vec![0.08, 0.12]);
}

#[test]
fn defaults_are_resolved() {
    let spec = parse_config(&with_experiment("kind = anticrossing")).unwrap();
    let ExperimentParams::Anticrossing {
        bracket,
        state_a,
        state_b,
    } = &spec.params
    else {
        panic!("wrong kind");
    };
    assert_eq!(*bracket, (2.0 - 0.1, 2.0 + 0.1));
    assert_eq!(*state_a, BareLabel::all_ground(2, 1));
    assert_eq!(*state_b, BareLabel::all_excited(2, 0));

    let spec = parse_config(&with_experiment("kind = dynamics")).unwrap();
    assert_eq!(
        spec.params,
        ExperimentParams::Dynamics {
            start: StartState::Ground,
            bracket: (1.9, 2.1),
            duration_pi: 2.5,
            n_samples: 801,
            numerics: Numerics::default(),
        }
    );
}

#[test]
fn comments_and_quotes() {
    let text = format!(
        "# experiment file\n{SYSTEM}\n[experiment]  # trailing\nkind = \"ghz\"\n\n[output]\npath = \"out#1.csv\" # not part of the path\n"
    );
    let spec = parse_config(&text).unwrap();
    assert_eq!(spec.kind(), ExperimentKind::Ghz);
    assert_eq!(spec.output_path, Some(PathBuf::from("out#1.csv")));
}

#[test]
fn missing_n_fock_names_the_key() {
    let text = with_experiment("kind = ghz").replace("n_fock = 20\n", "");
    let err = parse_config(&text).unwrap_err();
    assert_mentions(&err, "missing key `n_fock` in [system]");
}

#[test]
fn unknown_key_reports_its_line() {
    let text = with_experiment("kind = ghz\nn_level = 12");
    let err = parse_config(&text).unwrap_err();
    // SYSTEM is 10 lines, then a blank, [experiment], kind
    assert_mentions(
        &err,
        "line 14: unknown key `n_level` in [experiment] for kind ghz",
    );
}

#[test]
fn keys_of_other_kinds_are_rejected() {
    let err = parse_config(&with_experiment("kind = ghz\nn_samples = 10")).unwrap_err();
    assert_mentions(&err, "unknown key `n_samples`");
}

#[test]
fn syntax_errors_carry_line_numbers() {
    let text = "[system]\nn_qubits 2\n[sytem]\n";
    let err = parse_config(text).unwrap_err();
    assert_mentions(&err, "line 2: expected `key = value`");
    assert_mentions(&err, "line 3: unknown section [sytem]");
}

#[test]
fn bad_values_carry_line_numbers() {
    let text = with_experiment("kind = ghz").replace("n_fock = 20", "n_fock = twenty");
    let err = parse_config(&text).unwrap_err();
    assert_mentions(&err, "line 10: n_fock: expected a non-negative integer");
}

#[test]
fn duplicate_keys_are_errors() {
    let text = with_experiment("kind = ghz").replace("n_fock = 20", "n_fock = 20\nn_fock = 30");
    let err = parse_config(&text).unwrap_err();
    assert_mentions(&err, "line 11: duplicate key `n_fock` (first at line 10)");
}

#[test]
fn lambda_and_lambdas_conflict() {
    let text = with_experiment("kind = ghz")
        .replace("lambda = 0.1 wq", "lambda = 0.1\nlambdas = 0.1, 0.1");
    let err = parse_config(&text).unwrap_err();
    assert_mentions(&err, "either `lambda` or `lambdas`");
}

#[test]
fn validation_is_aggregated() {
    let text = with_experiment("kind = dynamics\nduration_pi = -1\nn_samples = 1\nrtol = 0")
        .replace("kappa = 3e-5 wq", "kappa = -1")
        .replace("lambda = 0.1 wq", "lambdas = 0.1");
    let err = parse_config(&text).unwrap_err();
    for needle in [
        "kappa must be >= 0",
        "lambdas has 1 entries for 2 qubit(s)",
        "duration_pi must be > 0",
        "n_samples must be >= 2",
        "rtol must be > 0",
    ] {
        assert_mentions(&err, needle);
    }
    assert!(err.problems.len() >= 5);
    let report = err.to_string();
    assert!(report.lines().count() > 5, "{report}");
}

#[test]
fn dynamics_needs_two_qubits() {
    let text = with_experiment("kind = dynamics").replace("n_qubits = 2", "n_qubits = 3");
    let err = parse_config(&text).unwrap_err();
    assert_mentions(&err, "two-qubit columns");
}

#[test]
fn labels_must_fit_the_system() {
    let err = parse_config(&with_experiment(
        "kind = anticrossing\nstate_a = \"g,1\"\nstate_b = \"e,e,30\"",
    ))
    .unwrap_err();
    assert_mentions(&err, "state_a |g,1> has 1 qubit state(s)");
    assert_mentions(&err, "state_b |e,e,30> needs n_fock > 30");
}

#[test]
fn subcommand_supplies_or_checks_the_kind() {
    let text = format!("{SYSTEM}\n[experiment]\n");
    assert!(parse_config(&text).is_err());
    let spec = parse_config_for(&text, ExperimentKind::Ghz).unwrap();
    assert_eq!(spec.kind(), ExperimentKind::Ghz);

    let err =
        parse_config_for(&with_experiment("kind = ghz"), ExperimentKind::Dynamics).unwrap_err();
    assert_mentions(&err, "kind ghz cannot be run by the `dynamics` command");
}

#[test]
fn missing_sections_are_reported() {
    let err = parse_config("[output]\npath = \"x.csv\"\n").unwrap_err();
    assert_mentions(&err, "missing section [system]");
    assert_mentions(&err, "missing section [experiment]");
}

#[test]
fn angle_literals() {
    for (literal, want) in [
        ("\"pi/6\"", PI / 6.0),
        ("pi/6", 0.5235987755982988),
        ("-pi/4", -PI / 4.0),
        ("2*pi/3", 2.0 * PI / 3.0),
        ("0", 0.0),
    ] {
        let text = with_experiment("kind = ghz").replace("\"pi/6\"", literal);
        assert_eq!(parse_config(&text).unwrap().system.theta, want, "{literal}");
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "conf") {
            let spec = parse_config(&std::fs::read_to_string(&path).unwrap())
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(
                parse_config(&render(&spec)).unwrap(),
                spec,
                "{}",
                path.display()
            );
            seen += 1;
        }
    }
    assert_eq!(seen, ExperimentKind::ALL.len());
}

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

fn arb_system() -> impl Strategy<Value = SystemConfig> {
    (1usize..=3, finite(0.5, 2.0), 2usize..30).prop_flat_map(|(n, wq, n_fock)| {
        (
            finite(0.1, 4.0),
            prop::collection::vec(finite(0.0, 0.3), n),
            finite(-PI, PI),
            finite(0.0, 0.1),
            finite(0.0, 1e-3),
            finite(0.0, 1e-3),
        )
            .prop_map(
                move |(omega_c, lambdas, theta, mu, kappa, gamma)| SystemConfig {
                    n_qubits: n,
                    omega_q: wq,
                    omega_c,
                    lambdas,
                    theta,
                    mu,
                    kappa,
                    gamma,
                    n_fock,
                },
            )
    })
}

fn arb_numerics() -> impl Strategy<Value = Numerics> {
    (2usize..40, finite(1e-12, 1e-3), finite(1e-14, 1e-6)).prop_map(|(n_levels, rtol, atol)| {
        Numerics {
            n_levels,
            rtol,
            atol,
        }
    })
}

fn arb_bracket() -> impl Strategy<Value = (f64, f64)> {
    (finite(0.1, 3.0), finite(1e-3, 1.0)).prop_map(|(lo, w)| (lo, lo + w))
}

fn arb_label(n: usize) -> impl Strategy<Value = BareLabel> {
    (prop::collection::vec(any::<bool>(), n), 0usize..2).prop_map(|(bits, photons)| {
        let qubits = bits
            .into_iter()
            .map(|e| {
                if e {
                    rabi_core::QubitState::E
                } else {
                    rabi_core::QubitState::G
                }
            })
            .collect();
        BareLabel::new(qubits, photons)
    })
}

fn arb_params(n: usize) -> impl Strategy<Value = ExperimentParams> {
    prop_oneof![
        (
            finite(0.1, 1.0),
            finite(0.1, 2.0),
            2usize..500,
            1usize..8,
            any::<bool>()
        )
            .prop_map(|(lo, w, n_points, n_levels, track)| {
                ExperimentParams::SpectrumSweep {
                    omega_c_min: lo,
                    omega_c_max: lo + w,
                    n_points,
                    n_levels,
                    track,
                }
            }),
        (arb_bracket(), arb_label(n), arb_label(n)).prop_map(|(bracket, state_a, state_b)| {
            ExperimentParams::Anticrossing {
                bracket,
                state_a,
                state_b,
            }
        }),
        prop::collection::vec(finite(1e-3, 0.5), 1..12)
            .prop_map(|lambda_grid| ExperimentParams::EffectiveCoupling { lambda_grid }),
        (
            prop_oneof![Just(StartState::Ground), Just(StartState::Hybrid)],
            arb_bracket(),
            finite(0.01, 10.0),
            2usize..5000,
            arb_numerics()
        )
            .prop_map(|(start, bracket, duration_pi, n_samples, numerics)| {
                ExperimentParams::Dynamics {
                    start,
                    bracket,
                    duration_pi,
                    n_samples,
                    numerics,
                }
            }),
        (
            arb_bracket(),
            prop::collection::vec(finite(0.01, 10.0), 3..12),
            arb_numerics()
        )
            .prop_map(|(bracket, scan, numerics)| ExperimentParams::Calibrate {
                bracket,
                scan,
                numerics,
            }),
        (arb_bracket(), arb_numerics())
            .prop_map(|(bracket, numerics)| ExperimentParams::Ghz { bracket, numerics }),
    ]
}

fn arb_spec() -> impl Strategy<Value = ExperimentSpec> {
    arb_system().prop_flat_map(|system| {
        let n = system.n_qubits;
        (
            Just(system),
            arb_params(n),
            prop::option::of("[a-z0-9_/.-]{1,20}"),
        )
            .prop_map(|(system, params, path)| ExperimentSpec {
                system,
                params,
                output_path: path.map(PathBuf::from),
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    // Render is defined for any spec, valid or not; parsing additionally
    // validates, so the property is checked on specs that validate.
    #[test]
    fn render_then_parse_is_identity(spec in arb_spec()) {
        prop_assume!(spec.validate().is_ok());
        let text = render(&spec);
        let back = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn arbitrary_text_never_panics(text in "[\\[\\]a-z_=#\" .,0-9\n-]{0,200}") {
        let _ = parse_config(&text);
    }
}
