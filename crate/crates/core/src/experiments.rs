//! Monte Carlo ensembles, stability scaling, Galerkin self-convergence and
//! the identity verification pass.

use serde::{Deserialize, Serialize};

use crate::basis::GalerkinBasis;
use crate::error::{Error, Result};
use crate::geometry::DiskGrid;
use crate::par::{map_indexed, mean_and_stderr, pairwise_sum, Execution};
use crate::sde::{
    simulate_path, Forcing, GalerkinSystem, NoiseChannel, NoiseModel, SimulationSpec, StoppingRule,
    TrajectoryRecord, WienerIncrements,
};

/// Everything needed to run paths: one grid, one basis, one coefficient SDE.
#[derive(Clone, Debug)]
pub struct Study {
    pub grid: DiskGrid,
    pub basis: GalerkinBasis,
    pub system: GalerkinSystem,
    pub channels: Vec<NoiseChannel>,
    pub spec: SimulationSpec,
    pub c0: Vec<f64>,
    pub exec: Execution,
}

impl Study {
    pub fn new(
        grid: DiskGrid,
        basis: GalerkinBasis,
        channels: Vec<NoiseChannel>,
        forcing: Forcing,
        spec: SimulationSpec,
        c0: Vec<f64>,
        exec: Execution,
    ) -> Result<Self> {
        let noise = NoiseModel::new(channels.clone(), basis.n_modes())?;
        let system = GalerkinSystem::new(&grid, &basis, noise, forcing)?;
        if c0.len() != basis.n_modes() {
            return Err(Error::Shape {
                expected: basis.n_modes(),
                found: c0.len(),
            });
        }
        Ok(Study {
            grid,
            basis,
            system,
            channels,
            spec,
            c0,
            exec,
        })
    }

    /// Same study with the time step replaced.
    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        let mut s = self.clone();
        s.spec = SimulationSpec::new(self.spec.t_final, dt, self.spec.save_stride, self.spec.scheme, self.spec.stopping.clone())?;
        Ok(s)
    }

    pub fn increments(&self, base_seed: u64, path_index: u64) -> WienerIncrements {
        WienerIncrements::generate(base_seed, path_index, self.system.noise.len(), self.spec.steps, self.spec.dt())
    }

    pub fn simulate(&self, base_seed: u64, path_index: u64) -> Result<TrajectoryRecord> {
        let inc = self.increments(base_seed, path_index);
        simulate_path(&self.system, &self.spec, &self.c0, &inc, path_index, base_seed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        let (mean, stderr) = mean_and_stderr(xs);
        Estimate { mean, stderr }
    }
}

/// Per-path reductions kept by ensembles instead of full records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub sup_v_sq: f64,
    pub dissipation: f64,
    pub sup_enstrophy: f64,
    pub enstrophy_integral: f64,
    pub v_sq_integral: f64,
    pub sup_wtilde_sq: f64,
    pub terminal_v_sq: f64,
    pub terminal_martingale: f64,
    pub energy_residual: f64,
    pub enstrophy_residual: f64,
    pub stops: Vec<Option<f64>>,
    pub blew_up: bool,
}

impl PathStats {
    pub fn from_record(r: &TrajectoryRecord) -> Self {
        let rows = &r.ledger;
        let mut v_int = 0.0;
        let mut e_int = 0.0;
        for w in rows.windows(2) {
            let h = w[1].t - w[0].t;
            v_int += w[0].v_norm_sq * h;
            e_int += w[0].enstrophy * h;
        }
        let last = r.last();
        PathStats {
            sup_v_sq: rows.iter().map(|l| l.v_norm_sq).fold(0.0, f64::max),
            dissipation: last.dissipation_integral,
            sup_enstrophy: rows.iter().map(|l| l.enstrophy).fold(0.0, f64::max),
            enstrophy_integral: e_int,
            v_sq_integral: v_int,
            sup_wtilde_sq: rows.iter().map(|l| l.enstrophy + l.v_norm_sq).fold(0.0, f64::max),
            terminal_v_sq: last.v_norm_sq,
            terminal_martingale: last.martingale_cumulative,
            energy_residual: last.energy_residual_cumulative,
            enstrophy_residual: last.enstrophy_residual_cumulative,
            stops: r.stops.iter().map(|s| s.t).collect(),
            blew_up: r.blew_up_at.is_some(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservedConstants {
    /// `[½E sup‖Y‖_V² + E∫(4ν‖DY‖² + 2νγ‖Y‖_Γ²)] / (1 + E‖Y₀‖_V² + ‖U‖²_{L²(0,T;L²)})`
    pub ineq1: f64,
    /// `[½E sup‖curl υ(Y)‖² + (2ν/α)E∫‖curl υ(Y)‖²] / (E‖curl υ(Y₀)‖² + ∫‖curl U‖² + E∫(1 + ‖Y‖_V²))`
    pub ineq222: f64,
    /// Left side of the enstrophy estimate minus `E‖curl υ(Y₀)‖²`.
    pub ineq222_excess: f64,
    /// `E sup‖Y‖²_W̃ / (E‖Y₀‖²_W̃ + ‖U‖²_{L²(0,T;H(curl))})`; `None` for zero data.
    pub ineq2: Option<f64>,
    /// `E sup‖Y‖_V^p / (E‖Y₀‖_V^p + 1 + ∫‖U‖^p)`
    pub lp1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopFraction {
    pub rule: StoppingRule,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub paths: usize,
    pub completed_paths: usize,
    pub blown_up_paths: usize,
    pub base_seed: u64,
    pub t_final: f64,
    pub dt: f64,
    pub save_stride: usize,
    pub p: f64,
    pub sup_v_sq: Estimate,
    pub dissipation: Estimate,
    pub sup_enstrophy: Estimate,
    pub sup_v_p: Estimate,
    pub sup_wtilde_sq: Estimate,
    pub terminal_v_sq: Estimate,
    pub terminal_martingale: Estimate,
    pub energy_residual: Estimate,
    pub enstrophy_residual: Estimate,
    pub observed_constants: ObservedConstants,
    pub stop_fractions: Vec<StopFraction>,
}

/// Simulate `paths` independent paths and reduce them; per-path stats come
/// back in path order.
pub fn run_ensemble_with_stats(
    study: &Study,
    paths: usize,
    base_seed: u64,
    p_exponent: f64,
) -> Result<(EnsembleSummary, Vec<Option<PathStats>>)> {
    if paths < 2 {
        return Err(Error::config("ensemble.paths", format!("an ensemble needs at least 2 paths, got {paths}")));
    }
    if !(p_exponent >= 1.0 && p_exponent.is_finite()) {
        return Err(Error::config("ensemble.p", "must be finite and >= 1"));
    }
    let results: Vec<Result<PathStats>> = map_indexed(paths, study.exec, |i| {
        study.simulate(base_seed, i as u64).map(|r| PathStats::from_record(&r))
    });
    let mut stats = Vec::with_capacity(paths);
    for r in results {
        match r {
            Ok(s) => stats.push(Some(s)),
            Err(Error::BlowUp { .. }) => stats.push(None),
            Err(e) => return Err(e),
        }
    }
    let summary = summarize(study, &stats, base_seed, p_exponent)?;
    Ok((summary, stats))
}

pub fn run_ensemble(study: &Study, paths: usize, base_seed: u64, p_exponent: f64) -> Result<EnsembleSummary> {
    run_ensemble_with_stats(study, paths, base_seed, p_exponent).map(|(s, _)| s)
}

fn summarize(study: &Study, stats: &[Option<PathStats>], base_seed: u64, p: f64) -> Result<EnsembleSummary> {
    let good: Vec<&PathStats> = stats.iter().flatten().filter(|s| !s.blew_up).collect();
    let blown = stats.len() - good.len();
    if good.is_empty() {
        return Err(Error::EnsembleFailure { paths: stats.len() });
    }
    let col = |f: &dyn Fn(&PathStats) -> f64| -> Vec<f64> { good.iter().map(|s| f(s)).collect() };
    let sys = &study.system;
    let prm = sys.params;
    let t = study.spec.t_final;

    let sup_v_sq = Estimate::of(&col(&|s| s.sup_v_sq));
    let dissipation = Estimate::of(&col(&|s| s.dissipation));
    let sup_enstrophy = Estimate::of(&col(&|s| s.sup_enstrophy));
    let sup_v_p = Estimate::of(&col(&|s| s.sup_v_sq.sqrt().powf(p)));
    let sup_wtilde_sq = Estimate::of(&col(&|s| s.sup_wtilde_sq));
    let ens_int = Estimate::of(&col(&|s| s.enstrophy_integral));
    let v_int = Estimate::of(&col(&|s| s.v_sq_integral));

    let v0_sq: f64 = study.c0.iter().map(|x| x * x).sum();
    let ens0 = sys.enstrophy(&study.c0);
    let u_sq = sys.forcing_l2 * sys.forcing_l2;
    let curl_u_sq = sys.forcing_curl_l2 * sys.forcing_curl_l2;

    let ineq1 = (0.5 * sup_v_sq.mean + dissipation.mean) / (1.0 + v0_sq + t * u_sq);
    let lhs222 = 0.5 * sup_enstrophy.mean + 2.0 * prm.nu / prm.alpha * ens_int.mean;
    let rhs222 = ens0 + t * curl_u_sq + (t + v_int.mean);
    let ineq2_den = ens0 + v0_sq + t * (u_sq + curl_u_sq);
    let lp1 = sup_v_p.mean / (v0_sq.sqrt().powf(p) + 1.0 + t * sys.forcing_l2.powf(p));

    let stop_fractions = study
        .spec
        .stopping
        .iter()
        .enumerate()
        .map(|(k, rule)| {
            let hits: Vec<f64> = good.iter().map(|s| if s.stops[k].is_some() { 1.0 } else { 0.0 }).collect();
            StopFraction {
                rule: *rule,
                fraction: pairwise_sum(&hits) / good.len() as f64,
            }
        })
        .collect();

    Ok(EnsembleSummary {
        paths: stats.len(),
        completed_paths: good.len(),
        blown_up_paths: blown,
        base_seed,
        t_final: t,
        dt: study.spec.dt(),
        save_stride: study.spec.save_stride,
        p,
        sup_v_sq,
        dissipation,
        sup_enstrophy,
        sup_v_p,
        sup_wtilde_sq,
        terminal_v_sq: Estimate::of(&col(&|s| s.terminal_v_sq)),
        terminal_martingale: Estimate::of(&col(&|s| s.terminal_martingale)),
        energy_residual: Estimate::of(&col(&|s| s.energy_residual)),
        enstrophy_residual: Estimate::of(&col(&|s| s.enstrophy_residual)),
        observed_constants: ObservedConstants {
            ineq1,
            ineq222: lhs222 / rhs222,
            ineq222_excess: lhs222 - ens0,
            ineq2: if ineq2_den > 0.0 { Some(sup_wtilde_sq.mean / ineq2_den) } else { None },
            lp1,
        },
        stop_fractions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub eps: f64,
    /// `E sup_t ξ(t) ‖Y₁ − Y₂‖²_W`
    pub weighted_sq_difference: Estimate,
    /// Same with the energy-method weight `exp(−C₂t − 2C₁∫‖Y₁‖_W̃)`.
    pub energy_weighted_sq_difference: Estimate,
}

/// Constants of the two weights; none of them is known in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightConstants {
    pub c3: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for WeightConstants {
    fn default() -> Self {
        WeightConstants { c3: 1.0, c1: 1.0, c2: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub constants: WeightConstants,
    pub paths: usize,
    pub base_seed: u64,
    pub points: Vec<StabilityPoint>,
    /// Least-squares slope of log E sup ξ‖Y₁ − Y₂‖²_W against log ε (positive ε only).
    pub fitted_slope: Option<f64>,
    /// Ratios between consecutive ε points ordered as given.
    pub consecutive_ratios: Vec<f64>,
    /// Minimum over paths of the terminal weight ξ(T) of the first ε.
    pub min_terminal_xi: f64,
}

/// Unit-W-norm perturbation direction built from the first (up to) three modes.
pub fn perturbation_direction(system: &GalerkinSystem) -> Vec<f64> {
    let n = system.n_modes();
    let mut d = vec![0.0; n];
    for (i, w) in [1.0, 0.5, 0.25].iter().enumerate().take(n) {
        d[i] = *w;
    }
    let norm = system.w_norm(&d);
    d.iter().map(|x| x / norm).collect()
}

/// Weighted sups of `‖Y₁ − Y₂‖²_W` over saved rows: `ξ(t) = exp(−C₃∫(‖Y₁‖_H3 + ‖Y₂‖_H3))`
/// and `exp(−C₂t − 2C₁∫‖Y₁‖_W̃)`, both integrals by the trapezoid rule.
/// Returns `(sup ξ‖·‖², sup energy-weighted ‖·‖², ξ(T))`.
pub fn weighted_difference(
    system: &GalerkinSystem,
    a: &TrajectoryRecord,
    b: &TrajectoryRecord,
    k: &WeightConstants,
) -> (f64, f64, f64) {
    let rows = a.ledger.len().min(b.ledger.len());
    let wtilde = |j: usize| (a.ledger[j].enstrophy + a.ledger[j].v_norm_sq).max(0.0).sqrt();
    let (mut int_h3, mut int_w) = (0.0, 0.0);
    let (mut best, mut best_energy) = (0.0_f64, 0.0_f64);
    let mut xi = 1.0;
    for j in 0..rows {
        if j > 0 {
            let h = a.ledger[j].t - a.ledger[j - 1].t;
            let f0 = a.ledger[j - 1].h3_norm + b.ledger[j - 1].h3_norm;
            let f1 = a.ledger[j].h3_norm + b.ledger[j].h3_norm;
            int_h3 += 0.5 * h * (f0 + f1);
            int_w += 0.5 * h * (wtilde(j - 1) + wtilde(j));
            xi = (-k.c3 * int_h3).exp();
        }
        let energy_weight = (-k.c2 * a.ledger[j].t - 2.0 * k.c1 * int_w).exp();
        let diff: Vec<f64> = a.coefficients[j].iter().zip(&b.coefficients[j]).map(|(x, y)| x - y).collect();
        let w = system.w_norm(&diff);
        best = best.max(xi * w * w);
        best_energy = best_energy.max(energy_weight * w * w);
    }
    (best, best_energy, xi)
}

/// Paired paths from `Y₀` and `Y₀ + ε δ` sharing every Wiener increment.
pub fn stability_experiment(
    study: &Study,
    eps_list: &[f64],
    paths: usize,
    base_seed: u64,
    constants: WeightConstants,
) -> Result<StabilityReport> {
    if paths < 1 {
        return Err(Error::config("ensemble.paths", "must be >= 1"));
    }
    for (name, v) in [("c3", constants.c3), ("c1", constants.c1), ("c2", constants.c2)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::config(format!("stability.{name}"), "must be finite and >= 0"));
        }
    }
    let sys = &study.system;
    let delta = perturbation_direction(sys);
    let per_path: Vec<Result<(Vec<(f64, f64)>, f64)>> = map_indexed(paths, study.exec, |i| {
        let inc = study.increments(base_seed, i as u64);
        let base = simulate_path(sys, &study.spec, &study.c0, &inc, i as u64, base_seed)?;
        let mut values = Vec::with_capacity(eps_list.len());
        let mut first_xi = 1.0;
        for (k, eps) in eps_list.iter().enumerate() {
            let c: Vec<f64> = study.c0.iter().zip(&delta).map(|(a, d)| a + eps * d).collect();
            let other = simulate_path(sys, &study.spec, &c, &inc, i as u64, base_seed)?;
            let (v, e, xi) = weighted_difference(sys, &base, &other, &constants);
            if k == 0 {
                first_xi = xi;
            }
            values.push((v, e));
        }
        Ok((values, first_xi))
    });
    let per_path: Vec<(Vec<(f64, f64)>, f64)> = per_path.into_iter().collect::<Result<_>>()?;
    let points: Vec<StabilityPoint> = eps_list
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            let xs: Vec<f64> = per_path.iter().map(|(v, _)| v[k].0).collect();
            let es: Vec<f64> = per_path.iter().map(|(v, _)| v[k].1).collect();
            StabilityPoint {
                eps,
                weighted_sq_difference: Estimate::of(&xs),
                energy_weighted_sq_difference: Estimate::of(&es),
            }
        })
        .collect();
    let fit: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.eps > 0.0 && p.weighted_sq_difference.mean > 0.0)
        .map(|p| (p.eps.ln(), p.weighted_sq_difference.mean.ln()))
        .collect();
    let fitted_slope = if fit.len() >= 2 {
        let n = fit.len() as f64;
        let mx = fit.iter().map(|p| p.0).sum::<f64>() / n;
        let my = fit.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = fit.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    let consecutive_ratios = points
        .windows(2)
        .map(|w| w[0].weighted_sq_difference.mean / w[1].weighted_sq_difference.mean)
        .collect();
    Ok(StabilityReport {
        constants,
        paths,
        base_seed,
        points,
        fitted_slope,
        consecutive_ratios,
        min_terminal_xi: per_path.iter().map(|p| p.1).fold(1.0, f64::min),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// `‖Y_n − Y_2n‖_{L²(0,T;V)}`, averaged over paths.
    pub difference: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub nonlinear: bool,
    pub stochastic: bool,
    pub paths: usize,
    pub base_seed: u64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].difference.mean < w[0].difference.mean)
    }
}

/// `‖a − b‖_{L²(0,T;V)}` over saved rows, shorter coefficient vectors zero-padded.
pub fn l2_time_v_distance(a: &TrajectoryRecord, b: &TrajectoryRecord) -> f64 {
    let rows = a.times.len().min(b.times.len());
    let mut acc = 0.0;
    for j in 0..rows.saturating_sub(1) {
        let h = a.times[j + 1] - a.times[j];
        let (x, y) = (&a.coefficients[j], &b.coefficients[j]);
        let len = x.len().max(y.len());
        let d: f64 = (0..len)
            .map(|i| {
                let d = x.get(i).copied().unwrap_or(0.0) - y.get(i).copied().unwrap_or(0.0);
                d * d
            })
            .sum();
        acc += d * h;
    }
    acc.sqrt()
}

/// Self-convergence of nested Galerkin truncations taken from the study's basis,
/// which must hold at least `2 max(n_list)` modes.
pub fn convergence_study(
    study: &Study,
    forcing: &Forcing,
    n_list: &[usize],
    paths: usize,
    base_seed: u64,
    nonlinear: bool,
) -> Result<ConvergenceTable> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("converge.n_list", "must be non-empty and strictly ascending"));
    }
    let n_max = 2 * n_list[n_list.len() - 1];
    if n_max > study.basis.n_modes() {
        return Err(Error::config(
            "converge.n_list",
            format!("needs {n_max} modes but the basis has {}", study.basis.n_modes()),
        ));
    }
    if paths < 1 {
        return Err(Error::config("ensemble.paths", "must be >= 1"));
    }
    let mut sizes: Vec<usize> = n_list.iter().flat_map(|&n| [n, 2 * n]).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let systems: Vec<(usize, GalerkinSystem)> = sizes
        .iter()
        .map(|&n| {
            let b = study.basis.truncate(n)?;
            let noise = NoiseModel::new(study.channels.clone(), n)?;
            let sys = GalerkinSystem::new(&study.grid, &b, noise, forcing.clone())?;
            Ok((n, if nonlinear { sys } else { sys.without_nonlinearity() }))
        })
        .collect::<Result<_>>()?;
    let per_path: Vec<Result<Vec<f64>>> = map_indexed(paths, study.exec, |i| {
        let inc = study.increments(base_seed, i as u64);
        let records: Vec<(usize, TrajectoryRecord)> = systems
            .iter()
            .map(|(n, sys)| {
                let c0 = &study.c0[..*n];
                simulate_path(sys, &study.spec, c0, &inc, i as u64, base_seed).map(|r| (*n, r))
            })
            .collect::<Result<_>>()?;
        let find = |n: usize| &records.iter().find(|(m, _)| *m == n).expect("simulated size").1;
        Ok(n_list.iter().map(|&n| l2_time_v_distance(find(n), find(2 * n))).collect())
    });
    let per_path: Vec<Vec<f64>> = per_path.into_iter().collect::<Result<_>>()?;
    let rows = n_list
        .iter()
        .enumerate()
        .map(|(k, &n)| ConvergenceRow {
            n,
            difference: Estimate::of(&per_path.iter().map(|v| v[k]).collect::<Vec<_>>()),
        })
        .collect();
    Ok(ConvergenceTable {
        nonlinear,
        stochastic: !study.channels.is_empty(),
        paths,
        base_seed,
        rows,
    })
}
