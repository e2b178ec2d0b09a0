//! Subcommand orchestration: build the study from a config, run one
//! experiment, write its artifacts and the manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::basis::{build_basis_cached, GalerkinBasis, ModeLabel};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{
    convergence_study, run_ensemble, stability_experiment, ConvergenceTable, EnsembleSummary, StabilityReport, Study,
    WeightConstants,
};
use crate::geometry::{build_grid, DiskGrid};
use crate::probes::observed_constants;
use crate::sde::{format_float, SimulationSpec};
use crate::verify::verify_identities;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Basis,
    Simulate,
    Ensemble,
    Stability,
    Converge,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Basis => "basis",
            Command::Simulate => "simulate",
            Command::Ensemble => "ensemble",
            Command::Stability => "stability",
            Command::Converge => "converge",
            Command::Verify => "verify",
        }
    }
}

/// Command-line overrides applied on top of the config.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Config with the overrides folded in, revalidated.
    pub fn apply(&self, cfg: &RunConfig) -> Result<RunConfig> {
        let mut c = cfg.clone();
        if let Some(s) = self.seed {
            c.ensemble.base_seed = s;
        }
        if let Some(p) = self.paths {
            c.ensemble.paths = p;
        }
        if let Some(o) = &self.out {
            c.output.directory = o.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    /// Effective configuration with every default resolved.
    pub config: RunConfig,
    pub base_seed: u64,
    pub noise_model: String,
    pub outputs: Vec<String>,
    pub success: bool,
    pub wall_time_seconds: f64,
}

pub const NOISE_MODEL: &str = "affine: G^k(t,Y) = s_k(t) (sigma_k e_{j_k} + rho_k Y)";

/// Result of one subcommand; `success` is false for a failing verification.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub manifest: Manifest,
    pub summary: String,
}

pub fn study_from_config(cfg: &RunConfig, n_modes: usize) -> Result<Study> {
    let grid = build_grid(cfg.geometry.n_radial, cfg.geometry.n_angular_modes)?;
    let params = cfg.params()?;
    let basis = build_basis_cached(cfg.basis.cache_dir.as_deref(), &grid, &params, n_modes)?;
    study_with_basis(cfg, grid, basis)
}

pub fn study_with_basis(cfg: &RunConfig, grid: DiskGrid, basis: GalerkinBasis) -> Result<Study> {
    let spec = SimulationSpec::new(
        cfg.time.t_final,
        cfg.time.dt(),
        cfg.time.save_stride,
        cfg.time.scheme,
        cfg.stopping.rules()?,
    )?;
    let c0 = cfg.initial.coefficients(&basis.eigenvalues);
    Study::new(
        grid,
        basis,
        cfg.noise.channels.clone(),
        cfg.forcing.clone(),
        spec,
        c0,
        cfg.ensemble.execution,
    )
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T, outputs: &mut Vec<String>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    outputs.push(name.to_string());
    Ok(())
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<f64>], outputs: &mut Vec<String>) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format_float(*v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    outputs.push(name.to_string());
    Ok(())
}

fn path_csv_name(i: usize) -> String {
    format!("path_{i:05}.csv")
}

#[derive(Serialize)]
struct BasisOutput<'a> {
    n_radial: usize,
    n_angular_modes: usize,
    n_modes: usize,
    eigenvalues: &'a [f64],
    labels: &'a [ModeLabel],
}

#[derive(Serialize)]
struct SimulateOutput {
    base_seed: u64,
    dt: f64,
    paths: Vec<SimulatedPath>,
}

#[derive(Serialize)]
struct SimulatedPath {
    path_index: u64,
    csv: String,
    final_coefficients: Vec<f64>,
    stops: Vec<crate::sde::StopHit>,
    blew_up_at: Option<f64>,
}

/// Run one subcommand with an already-resolved config, writing into
/// `cfg.output.directory`.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    let start = Instant::now();
    let dir = cfg.output.directory.clone();
    fs::create_dir_all(&dir)?;
    let seed = cfg.ensemble.base_seed;
    let paths = cfg.ensemble.paths;
    let mut outputs = Vec::new();
    let mut success = true;
    let summary = match command {
        Command::Basis => {
            let grid = build_grid(cfg.geometry.n_radial, cfg.geometry.n_angular_modes)?;
            let params = cfg.params()?;
            let b = build_basis_cached(cfg.basis.cache_dir.as_deref(), &grid, &params, cfg.basis.n_modes)?;
            write_json(
                &dir,
                "basis.json",
                &BasisOutput {
                    n_radial: grid.n_radial(),
                    n_angular_modes: grid.n_angular_modes(),
                    n_modes: b.n_modes(),
                    eigenvalues: &b.eigenvalues,
                    labels: &b.labels,
                },
                &mut outputs,
            )?;
            format!("basis: {} modes, lambda_1 = {:.6}", b.n_modes(), b.eigenvalues[0])
        }
        Command::Simulate => {
            let study = study_from_config(cfg, cfg.basis.n_modes)?;
            let mut out = SimulateOutput {
                base_seed: seed,
                dt: study.spec.dt(),
                paths: Vec::new(),
            };
            for i in 0..paths {
                let rec = study.simulate(seed, i as u64)?;
                let name = path_csv_name(i);
                let mut w = BufWriter::new(File::create(dir.join(&name))?);
                rec.write_csv(&mut w)?;
                w.flush()?;
                outputs.push(name.clone());
                out.paths.push(SimulatedPath {
                    path_index: i as u64,
                    csv: name,
                    final_coefficients: rec.final_coefficients().to_vec(),
                    stops: rec.stops.clone(),
                    blew_up_at: rec.blew_up_at,
                });
            }
            write_json(&dir, "simulate.json", &out, &mut outputs)?;
            format!("simulate: {paths} path(s), dt = {}", out.dt)
        }
        Command::Ensemble => {
            let study = study_from_config(cfg, cfg.basis.n_modes)?;
            let s: EnsembleSummary = run_ensemble(&study, paths, seed, cfg.ensemble.p)?;
            if cfg.output.per_path_csv {
                for i in 0..paths {
                    let rec = study.simulate(seed, i as u64)?;
                    let name = path_csv_name(i);
                    let mut w = BufWriter::new(File::create(dir.join(&name))?);
                    rec.write_csv(&mut w)?;
                    w.flush()?;
                    outputs.push(name);
                }
            }
            write_json(&dir, "ensemble.json", &s, &mut outputs)?;
            format!(
                "ensemble: {} paths ({} blown up), E sup |Y|_V^2 = {:.6e} +- {:.2e}, C_obs ineq1 = {:.4e}",
                s.paths, s.blown_up_paths, s.sup_v_sq.mean, s.sup_v_sq.stderr, s.observed_constants.ineq1
            )
        }
        Command::Stability => {
            let study = study_from_config(cfg, cfg.basis.n_modes)?;
            let k = WeightConstants {
                c3: cfg.stability.c3,
                c1: cfg.stability.c1,
                c2: cfg.stability.c2,
            };
            let r: StabilityReport = stability_experiment(&study, &cfg.stability.eps, paths, seed, k)?;
            let rows: Vec<Vec<f64>> = r
                .points
                .iter()
                .map(|p| {
                    vec![
                        p.eps,
                        p.weighted_sq_difference.mean,
                        p.weighted_sq_difference.stderr,
                        p.energy_weighted_sq_difference.mean,
                        p.energy_weighted_sq_difference.stderr,
                    ]
                })
                .collect();
            write_csv(
                &dir,
                "stability.csv",
                &["eps", "weighted_mean", "weighted_stderr", "energy_weighted_mean", "energy_weighted_stderr"],
                &rows,
                &mut outputs,
            )?;
            write_json(&dir, "stability.json", &r, &mut outputs)?;
            match r.fitted_slope {
                Some(s) => format!("stability: fitted slope {s:.4}"),
                None => "stability: too few positive eps for a slope".to_string(),
            }
        }
        Command::Converge => {
            let n_list = &cfg.converge.n_list;
            let n_min = n_list[0];
            for (k, ch) in cfg.noise.channels.iter().enumerate() {
                if ch.shape_mode_index >= n_min {
                    return Err(Error::config(
                        format!("noise.channels[{k}].shape_mode_index"),
                        format!("must be < the smallest truncation {n_min}"),
                    ));
                }
            }
            let master = 2 * n_list[n_list.len() - 1];
            let study = study_from_config(cfg, master)?;
            let forcing = match &cfg.forcing {
                crate::sde::Forcing::Modes { coefficients } if coefficients.len() > n_min => {
                    return Err(Error::config(
                        "forcing.coefficients",
                        format!("must have at most {n_min} entries for the convergence study"),
                    ))
                }
                f => f.clone(),
            };
            let t: ConvergenceTable =
                convergence_study(&study, &forcing, n_list, cfg.converge.paths, seed, cfg.converge.nonlinear)?;
            let rows: Vec<Vec<f64>> = t
                .rows
                .iter()
                .map(|r| vec![r.n as f64, r.difference.mean, r.difference.stderr])
                .collect();
            write_csv(&dir, "converge.csv", &["n", "difference_mean", "difference_stderr"], &rows, &mut outputs)?;
            write_json(&dir, "converge.json", &t, &mut outputs)?;
            let d: Vec<String> = t.rows.iter().map(|r| format!("{:.3e}", r.difference.mean)).collect();
            format!("converge: |Y_n - Y_2n| = [{}]", d.join(", "))
        }
        Command::Verify => {
            let study = study_from_config(cfg, cfg.basis.n_modes)?;
            let report = verify_identities(&study, &cfg.verify, seed)?;
            let probes = observed_constants(&study.grid, &study.system.params, cfg.probes.samples, seed)?;
            write_json(&dir, "verify.json", &report, &mut outputs)?;
            write_json(&dir, "probes.json", &probes, &mut outputs)?;
            success = report.all_passed;
            let lines: Vec<String> = report
                .checks
                .iter()
                .map(|c| format!("  {} {} residual {:.3e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.residual))
                .collect();
            format!("verify: {}\n{}", if success { "all checks passed" } else { "FAILED" }, lines.join("\n"))
        }
    };
    let manifest = Manifest {
        tool: "grade2".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        config: cfg.clone(),
        base_seed: seed,
        noise_model: NOISE_MODEL.into(),
        outputs: outputs.clone(),
        success,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let mut dummy = Vec::new();
    write_json(&dir, "manifest.json", &manifest, &mut dummy)?;
    Ok(Outcome { manifest, summary })
}
