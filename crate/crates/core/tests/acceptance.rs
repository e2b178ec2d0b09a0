//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Desk scale: grid 24×12, at most 48 modes per run (64 in the master basis
//! of the convergence study), T ≤ 1, at most 10⁴ paths.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use grade2::config::{parse_config, RunConfig};
use grade2::experiments::{convergence_study, run_ensemble, stability_experiment, Study, WeightConstants};
use grade2::runner::{run, study_from_config, Command};
use grade2::sde::{simulate_path, NoiseModel, SimulationSpec, WienerIncrements};
use grade2::spaces::deformation_inner;
use grade2::verify::verify_identities;

const IDENTITY_TOL: f64 = 1e-7;
const STOKES_ROUND_TRIP_TOL: f64 = 1e-7;
const STOKES_ENERGY_TOL: f64 = 1e-8;
const ITO_TOL: f64 = 1e-6;
const HALVING: (f64, f64) = (1.5, 2.5);
const MONOTONE_SLACK: f64 = 1e-10;
const SIGMA_BAND: f64 = 3.0;
const SLOPE: (f64, f64) = (1.8, 2.2);
const C_OBS_BAND: f64 = 2.0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn config(doc: &str) -> RunConfig {
    parse_config(doc).expect("acceptance config")
}

fn noisy_doc() -> &'static str {
    r#"{"noise": {"channels": [
        {"sigma": 0.5, "rho": 0.3, "shape_mode_index": 0},
        {"sigma": 0.2, "rho": -0.1, "shape_mode_index": 3, "envelope": {"kind": "cosine", "frequency": 0.5}}
    ]}}"#
}

fn identity_suite() -> Outcome {
    let cfg = config(noisy_doc());
    let study = study_from_config(&cfg, cfg.basis.n_modes).unwrap();
    let r = verify_identities(&study, &cfg.verify, 0).unwrap();
    let names = [
        "curl_trace",
        "integration_by_parts",
        "b_antisymmetry",
        "bb1_dual_formula",
        "antis",
        "energy_neutrality",
        "curl_of_nonlinearity",
    ];
    let mut worst = 0.0_f64;
    let mut ok = cfg.verify.samples == 100;
    for n in names {
        let c = r.check(n).expect("named check");
        worst = worst.max(c.residual);
        ok &= c.residual <= IDENTITY_TOL;
    }
    outcome(ok && r.all_passed, format!("worst relative residual {worst:.2e} over 100 fields (tol {IDENTITY_TOL:.0e}); full report all_passed = {}", r.all_passed))
}

fn stokes_round_trip() -> Outcome {
    let cfg = config("{}");
    let study = study_from_config(&cfg, cfg.basis.n_modes).unwrap();
    let mut opts = cfg.verify.clone();
    opts.samples = 0;
    opts.states = 0;
    opts.stokes_samples = 50;
    let r = verify_identities(&study, &opts, 11).unwrap();
    let rt = r.check("stokes_round_trip").unwrap().residual;
    let en = r.check("stokes_energy").unwrap().residual;
    outcome(
        rt <= STOKES_ROUND_TRIP_TOL && en <= STOKES_ENERGY_TOL,
        format!("round trip {rt:.2e} (tol {STOKES_ROUND_TRIP_TOL:.0e}), energy identity {en:.2e} (tol {STOKES_ENERGY_TOL:.0e})"),
    )
}

fn ito_correction() -> Outcome {
    let cfg = config(noisy_doc());
    let study = study_from_config(&cfg, cfg.basis.n_modes).unwrap();
    let mut opts = cfg.verify.clone();
    opts.samples = 0;
    opts.stokes_samples = 0;
    opts.states = 20;
    let r = verify_identities(&study, &opts, 12).unwrap();
    let c = r.check("ito_correction").unwrap().residual;
    outcome(c <= ITO_TOL, format!("20 states, worst relative gap {c:.2e} (tol {ITO_TOL:.0e})"))
}

fn deterministic_energy_law() -> Outcome {
    let cfg = config(r#"{"basis": {"n_modes": 48}}"#);
    let mut study = study_from_config(&cfg, 48).unwrap();
    study.system.noise = NoiseModel::none();
    let mut sums = Vec::new();
    let mut worst_rise = f64::NEG_INFINITY;
    for steps in [1024usize, 2048, 4096] {
        let spec = SimulationSpec::new(1.0, 1.0 / steps as f64, 1, study.spec.scheme, vec![]).unwrap();
        let r = simulate_path(&study.system, &spec, &study.c0, &WienerIncrements::zeros(0, steps), 0, 0).unwrap();
        for w in r.ledger.windows(2) {
            worst_rise = worst_rise.max(w[1].v_norm_sq - w[0].v_norm_sq);
        }
        sums.push((r.last().energy_residual_cumulative, r.last().enstrophy_residual_cumulative));
    }
    let ratios: Vec<(f64, f64)> = sums.windows(2).map(|w| (w[0].0 / w[1].0, w[0].1 / w[1].1)).collect();
    let in_band = |r: f64| r >= HALVING.0 && r <= HALVING.1;
    let ok = ratios.iter().all(|(e, s)| in_band(*e) && in_band(*s)) && worst_rise <= MONOTONE_SLACK;
    outcome(
        ok,
        format!(
            "n=48, energy ratios {:.3}/{:.3}, enstrophy ratios {:.3}/{:.3}, max per-step rise of |Y|_V^2 {:.1e}",
            ratios[0].0, ratios[1].0, ratios[0].1, ratios[1].1, worst_rise
        ),
    )
}

fn ornstein_uhlenbeck() -> Outcome {
    let sigma = 0.8;
    let c0 = 1.0;
    let t = 1.0;
    let doc = format!(
        r#"{{"basis": {{"n_modes": 1}},
            "noise": {{"channels": [{{"sigma": {sigma}, "rho": 0, "shape_mode_index": 0}}]}},
            "initial": {{"kind": "modes", "coefficients": [{c0}]}},
            "time": {{"t_final": {t}, "dt": {}, "save_stride": 1024}}}}"#,
        t / 1024.0
    );
    let cfg = config(&doc);
    let study = study_from_config(&cfg, 1).unwrap();
    // Rate and noise amplitude by direct quadrature of the single mode.
    let e = &study.basis.modes[0];
    let p = study.system.params;
    let a = p.nu * (2.0 * deformation_inner(&study.grid, e, e) + p.gamma * study.grid.boundary_inner_vec(e, e));
    let sbar = sigma * study.grid.inner_vec(e, e);
    let expected = c0 * c0 * (-2.0 * a * t).exp() + sbar * sbar / (2.0 * a) * (1.0 - (-2.0 * a * t).exp());
    let s = run_ensemble(&study, 10_000, 2024, 4.0).unwrap();
    let got = s.terminal_v_sq;
    let z = (got.mean - expected) / got.stderr;
    outcome(
        z.abs() <= SIGMA_BAND,
        format!("10^4 paths, E c(T)^2 = {:.5} +- {:.5}, closed form {expected:.5} (a = {a:.4}), {z:+.2} SE", got.mean, got.stderr),
    )
}

fn martingale_mean_zero() -> Outcome {
    let doc = r#"{"basis": {"n_modes": 8},
        "noise": {"channels": [
            {"sigma": 0.5, "rho": 0.4, "shape_mode_index": 0},
            {"sigma": 0.3, "rho": 0.0, "shape_mode_index": 2}]},
        "time": {"t_final": 1.0, "dt": 0.0009765625}}"#;
    let cfg = config(doc);
    let study = study_from_config(&cfg, 8).unwrap();
    let s = run_ensemble(&study, 1000, 99, 4.0).unwrap();
    let m = s.terminal_martingale;
    let z = m.mean / m.stderr;
    outcome(z.abs() <= SIGMA_BAND, format!("10^3 paths, mean {:.3e} +- {:.3e} ({z:+.2} SE)", m.mean, m.stderr))
}

fn stability_scaling() -> Outcome {
    let doc = r#"{"basis": {"n_modes": 16},
        "noise": {"channels": [{"sigma": 0.3, "rho": 0.3, "shape_mode_index": 0}]},
        "time": {"t_final": 1.0, "dt": 0.0009765625}}"#;
    let cfg = config(doc);
    let study = study_from_config(&cfg, 16).unwrap();
    let r = stability_experiment(&study, &[1e-2, 5e-3, 2.5e-3], 200, 5, WeightConstants::default()).unwrap();
    let slope = r.fitted_slope.unwrap_or(f64::NAN);
    outcome(
        slope >= SLOPE.0 && slope <= SLOPE.1,
        format!(
            "200 pairs, slope {slope:.4}, halving ratios {:.3}/{:.3}",
            r.consecutive_ratios[0], r.consecutive_ratios[1]
        ),
    )
}

fn galerkin_convergence() -> Outcome {
    let cfg = config("{}");
    let study: Study = study_from_config(&cfg, 64).unwrap();
    let t = convergence_study(&study, &cfg.forcing, &[8, 16, 32], 1, 0, true).unwrap();
    let d: Vec<String> = t.rows.iter().map(|r| format!("{:.3e}", r.difference.mean)).collect();
    outcome(t.strictly_decreasing(), format!("|Y_n - Y_2n| over n = 8,16,32: [{}]", d.join(", ")))
}

fn estimate_probes() -> Outcome {
    let sweep = [(0.5, 1.0, 1.0), (0.25, 0.5, 2.0), (1.0, 2.0, 0.5)];
    let mut ok = true;
    let mut worst = 1.0_f64;
    for (nu, alpha, gamma) in sweep {
        let doc = format!(
            r#"{{"physics": {{"nu": {nu}, "alpha": {alpha}, "gamma": {gamma}}},
                "basis": {{"n_modes": 8}},
                "noise": {{"channels": [{{"sigma": 0.4, "rho": 0.3, "shape_mode_index": 0}}]}},
                "forcing": {{"kind": "rotation", "amplitude": 0.5}},
                "time": {{"t_final": 1.0, "dt": 0.00390625}}}}"#
        );
        let cfg = config(&doc);
        let base = study_from_config(&cfg, 8).unwrap();
        let fine = base.with_dt(base.spec.dt() / 2.0).unwrap();
        let a = run_ensemble(&base, 200, 3, cfg.ensemble.p).unwrap().observed_constants;
        let b = run_ensemble(&fine, 400, 3, cfg.ensemble.p).unwrap().observed_constants;
        for (x, y) in [(a.ineq1, b.ineq1), (a.ineq222, b.ineq222), (a.lp1, b.lp1)] {
            let ratio = (x / y).max(y / x);
            ok &= x.is_finite() && y.is_finite() && x > 0.0 && y > 0.0 && ratio <= C_OBS_BAND;
            worst = worst.max(ratio);
        }
    }
    outcome(ok, format!("3-point (nu, alpha, gamma) sweep, worst C_obs change under dt/2 and 2x paths: {worst:.3}x"))
}

fn read_outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        let mut bytes = fs::read(&p).unwrap();
        if name == "manifest.json" {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            v.as_object_mut().unwrap().remove("wall_time_seconds");
            v["config"]["output"]["directory"] = serde_json::Value::Null;
            bytes = serde_json::to_vec(&v).unwrap();
        }
        out.insert(name, bytes);
    }
    out
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let doc = r#"{"geometry": {"n_radial": 16, "n_angular_modes": 8},
        "basis": {"n_modes": 8},
        "noise": {"channels": [{"sigma": 0.4, "rho": 0.2, "shape_mode_index": 1}]},
        "stopping": {"n_h3": 5.0, "n_v": 0.1},
        "time": {"t_final": 0.25, "dt": 0.001953125},
        "ensemble": {"paths": 6, "base_seed": 7},
        "converge": {"n_list": [2, 4], "paths": 2},
        "verify": {"samples": 5, "stokes_samples": 5, "states": 5},
        "probes": {"samples": 5},
        "output": {"per_path_csv": true}}"#;
    let base = config(doc);
    let commands = [
        Command::Basis,
        Command::Simulate,
        Command::Ensemble,
        Command::Stability,
        Command::Converge,
        Command::Verify,
    ];
    let mut files = 0;
    let mut mismatched = Vec::new();
    for cmd in commands {
        let mut runs = Vec::new();
        for rep in 0..2 {
            let mut cfg = base.clone();
            cfg.output.directory = tmp.path().join(format!("{}-{rep}", cmd.name()));
            run(cmd, &cfg).unwrap();
            runs.push(read_outputs(&cfg.output.directory));
        }
        files += runs[0].len();
        if runs[0] != runs[1] {
            mismatched.push(cmd.name());
        }
    }
    outcome(
        mismatched.is_empty(),
        format!("6 subcommands x 2 runs, {files} files compared byte-for-byte (manifest wall time excluded); mismatches: {mismatched:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("identity suite", identity_suite),
        ("modified Stokes round trip", stokes_round_trip),
        ("Ito correction equality", ito_correction),
        ("deterministic energy law", deterministic_energy_law),
        ("Ornstein-Uhlenbeck closed form", ornstein_uhlenbeck),
        ("martingale mean zero", martingale_mean_zero),
        ("stability scaling", stability_scaling),
        ("Galerkin self-convergence", galerkin_convergence),
        ("a priori estimate probes", estimate_probes),
        ("reproducibility", reproducibility),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        if !o.passed {
            failures += 1;
        }
        println!(
            "[{}] {:>2}. {name}: {} ({:.1}s)",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
