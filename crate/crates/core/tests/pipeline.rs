use grade2::basis::build_basis;
use grade2::config::parse_config;
use grade2::experiments::{run_ensemble, run_ensemble_with_stats};
use grade2::geometry::build_grid;
use grade2::probes::observed_constants;
use grade2::runner::{run, study_from_config, Command, Manifest, Overrides};
use grade2::spaces::PhysicalParams;
use grade2::verify::verify_identities;
use grade2::Error;

const SMALL: &str = r#"{"geometry": {"n_radial": 16, "n_angular_modes": 8}, "basis": {"n_modes": 6},
    "time": {"t_final": 0.25, "dt": 0.00390625}}"#;

#[test]
fn tampered_gamma_fails_only_the_curl_trace() {
    let cfg = parse_config(r#"{"verify": {"samples": 10, "stokes_samples": 5, "states": 5, "tamper_gamma": 0.5}}"#).unwrap();
    let study = study_from_config(&cfg, cfg.basis.n_modes).unwrap();
    let r = verify_identities(&study, &cfg.verify, 3).unwrap();
    assert!(!r.all_passed);
    let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    assert_eq!(failed, ["curl_trace"]);
}

#[test]
fn zero_field_config_has_zero_residuals() {
    let cfg = parse_config(
        r#"{"initial": {"kind": "zero"}, "verify": {"field_amplitude": 0, "samples": 10, "stokes_samples": 5, "states": 5},
            "noise": {"channels": [{"sigma": 1, "rho": 1, "shape_mode_index": 0}]}}"#,
    )
    .unwrap();
    let study = study_from_config(&cfg, cfg.basis.n_modes).unwrap();
    let r = verify_identities(&study, &cfg.verify, 4).unwrap();
    assert!(r.all_passed);
    for c in &r.checks {
        assert_eq!(c.residual, 0.0, "{}", c.name);
    }
}

#[test]
fn first_eigenvalue_is_refinement_stable() {
    let p = PhysicalParams::new(0.5, 1.0, 1.0).unwrap();
    let coarse = build_basis(&build_grid(24, 12).unwrap(), &p, 4).unwrap();
    let fine = build_basis(&build_grid(48, 12).unwrap(), &p, 4).unwrap();
    let rel = (coarse.eigenvalues[0] - fine.eigenvalues[0]).abs() / fine.eigenvalues[0];
    assert!(rel < 1e-6, "{rel}");
}

#[test]
fn observed_constants_are_refinement_stable() {
    let p = PhysicalParams::new(0.5, 1.0, 1.0).unwrap();
    let coarse = observed_constants(&build_grid(20, 10).unwrap(), &p, 20, 9).unwrap();
    let fine = observed_constants(&build_grid(40, 20).unwrap(), &p, 20, 9).unwrap();
    for ((name, a), (_, b)) in coarse.ratios().into_iter().zip(fine.ratios()) {
        assert!(a.is_finite() && b.is_finite() && a > 0.0, "{name}");
        assert!(a / b <= 2.0 && b / a <= 2.0, "{name}: {a} vs {b}");
    }
}

#[test]
fn ensemble_is_invariant_under_path_permutation() {
    let cfg = parse_config(
        r#"{"geometry": {"n_radial": 16, "n_angular_modes": 8}, "basis": {"n_modes": 6},
            "noise": {"channels": [{"sigma": 0.4, "rho": 0.2, "shape_mode_index": 0}]},
            "time": {"t_final": 0.25, "dt": 0.00390625}}"#,
    )
    .unwrap();
    let study = study_from_config(&cfg, 6).unwrap();
    let (summary, stats) = run_ensemble_with_stats(&study, 12, 1, 4.0).unwrap();
    let mut sup: Vec<f64> = stats.iter().flatten().map(|s| s.sup_v_sq).collect();
    let forward = grade2::par::mean_and_stderr(&sup);
    sup.reverse();
    assert_eq!(forward, grade2::par::mean_and_stderr(&sup));
    assert_eq!(forward.0, summary.sup_v_sq.mean);
}

#[test]
fn standard_errors_shrink_like_inverse_root_paths() {
    let cfg = parse_config(
        r#"{"geometry": {"n_radial": 16, "n_angular_modes": 8}, "basis": {"n_modes": 6},
            "noise": {"channels": [{"sigma": 0.5, "rho": 0.0, "shape_mode_index": 0}]},
            "time": {"t_final": 0.25, "dt": 0.00390625}}"#,
    )
    .unwrap();
    let study = study_from_config(&cfg, 6).unwrap();
    let small = run_ensemble(&study, 100, 8, 4.0).unwrap();
    let large = run_ensemble(&study, 400, 8, 4.0).unwrap();
    let ratio = small.sup_v_sq.stderr / large.sup_v_sq.stderr;
    assert!((1.5..2.7).contains(&ratio), "{ratio}");
}

#[test]
fn doubling_initial_state_doubles_root_sup_energy() {
    let doc = |amp: f64| {
        format!(
            r#"{{"geometry": {{"n_radial": 16, "n_angular_modes": 8}}, "basis": {{"n_modes": 6}},
                "initial": {{"kind": "spectrum", "amplitude": {amp}, "decay": 1}},
                "noise": {{"channels": [{{"sigma": 0, "rho": 0.5, "shape_mode_index": 0}}]}},
                "time": {{"t_final": 0.25, "dt": 0.00390625}}}}"#
        )
    };
    let run_amp = |amp: f64| {
        let cfg = parse_config(&doc(amp)).unwrap();
        let study = study_from_config(&cfg, 6).unwrap();
        run_ensemble(&study, 50, 2, 4.0).unwrap().sup_v_sq.mean.sqrt()
    };
    let ratio = run_amp(0.2) / run_amp(0.1);
    assert!((ratio - 2.0).abs() < 0.05 * 2.0, "{ratio}");
}

#[test]
fn manifest_echo_reparses_to_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = parse_config(SMALL).unwrap();
    cfg.output.directory = dir.path().to_path_buf();
    run(Command::Basis, &cfg).unwrap();
    let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let m: Manifest = serde_json::from_str(&text).unwrap();
    let echoed = serde_json::to_string(&m.config).unwrap();
    assert_eq!(parse_config(&echoed).unwrap(), cfg);
    assert!(m.success);
    assert_eq!(m.outputs, ["basis.json"]);
}

#[test]
fn outputs_stay_inside_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = parse_config(SMALL).unwrap();
    cfg.output.directory = dir.path().join("out");
    cfg.ensemble.paths = 2;
    run(Command::Simulate, &cfg).unwrap();
    let entries: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().to_string())
        .collect();
    assert_eq!(entries, ["out"]);
    let mut files: Vec<String> = std::fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().to_string())
        .collect();
    files.sort();
    assert_eq!(files, ["manifest.json", "path_00000.csv", "path_00001.csv", "simulate.json"]);
}

#[test]
fn overrides_are_validated() {
    let cfg = parse_config(SMALL).unwrap();
    let bad = Overrides {
        paths: Some(0),
        ..Default::default()
    };
    assert!(matches!(bad.apply(&cfg), Err(Error::Config { .. })));
    let good = Overrides {
        seed: Some(42),
        ..Default::default()
    };
    assert_eq!(good.apply(&cfg).unwrap().ensemble.base_seed, 42);
}

#[test]
fn convergence_rejects_noise_outside_smallest_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = parse_config(
        r#"{"geometry": {"n_radial": 16, "n_angular_modes": 8}, "basis": {"n_modes": 8},
            "noise": {"channels": [{"sigma": 1, "rho": 0, "shape_mode_index": 5}]},
            "converge": {"n_list": [2, 4]}}"#,
    )
    .unwrap();
    cfg.output.directory = dir.path().to_path_buf();
    let err = run(Command::Converge, &cfg).unwrap_err();
    assert!(err.to_string().contains("shape_mode_index"), "{err}");
}
