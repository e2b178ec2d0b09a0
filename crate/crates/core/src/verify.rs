//! One pass over every discrete identity: boundary traces, integration by
//! parts, trilinear symmetries, the Stokes solve, the Itô correction and the
//! pathwise energy and enstrophy budgets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiments::Study;
use crate::geometry::{DiskGrid, VectorField};
use crate::nonlinear::{
    advect_scalar, cross, curl_cross_pairing, curl_cross_pairing_trilinear, trilinear_b, vorticity_pairing,
};
use crate::sde::{Envelope, NoiseChannel, NoiseModel, SimulationSpec, WienerIncrements};
use crate::spaces::{
    curl_upsilon, deformation_inner, inner_v, navier_residuals_with_gamma, sobolev_norm, upsilon,
};
use crate::stokes::StokesSolver;
use crate::trial::{random_polynomial_vector, TrialSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    /// Random trial fields per identity.
    pub samples: usize,
    /// Random fields for the Stokes round trip.
    pub stokes_samples: usize,
    /// Random coefficient states for the Itô and drift checks.
    pub states: usize,
    /// Scale applied to every random field, state, initial condition and probe noise.
    pub field_amplitude: f64,
    /// Offset added to γ when the boundary conditions of the random fields are
    /// built but not when the curl trace is tested.
    pub tamper_gamma: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 100,
            stokes_samples: 50,
            states: 20,
            field_amplitude: 1.0,
            tamper_gamma: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Worst relative residual, or the finer-step path sum for halving checks.
    pub residual: f64,
    /// Relative tolerance; `None` for halving checks.
    pub tolerance: Option<f64>,
    /// Ratio of path sums at `dt` and `dt/2` for halving checks.
    pub halving_ratio: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub options: VerifyOptions,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const IDENTITY_TOL: f64 = 1e-7;
pub const STOKES_ROUND_TRIP_TOL: f64 = 1e-7;
pub const STOKES_ENERGY_TOL: f64 = 1e-8;
pub const ITO_TOL: f64 = 1e-6;
pub const DRIFT_ENERGY_TOL: f64 = 1e-7;
pub const HALVING_BAND: (f64, f64) = (1.5, 2.5);
/// Per-step slack on the decay of `‖Y‖_V²` without noise and forcing.
pub const MONOTONE_SLACK: f64 = 1e-10;

fn rel(abs: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        abs / scale
    } else {
        abs
    }
}

struct Worst(f64);

impl Worst {
    fn push(&mut self, v: f64) {
        // NaN must fail the check, so it wins.
        if v.is_nan() || v > self.0 {
            self.0 = v;
        }
    }
}

fn tol_check(name: &str, residual: f64, tol: f64) -> Check {
    Check {
        name: name.into(),
        residual,
        tolerance: Some(tol),
        halving_ratio: None,
        passed: residual <= tol,
    }
}

/// Ratio of path sums; two exact zeros pass, anything else needs the band.
pub fn halving_check(name: &str, coarse: f64, fine: f64) -> Check {
    let (passed, ratio) = if coarse == 0.0 && fine == 0.0 {
        (true, None)
    } else {
        let r = coarse / fine;
        (r >= HALVING_BAND.0 && r <= HALVING_BAND.1, Some(r))
    };
    Check {
        name: name.into(),
        residual: fine,
        tolerance: None,
        halving_ratio: ratio,
        passed,
    }
}

fn tangential_field(grid: &DiskGrid, rng: &mut ChaCha8Rng, amp: f64) -> VectorField {
    let bubble = grid.field_from_fn(|x, y| 1.0 - x * x - y * y);
    let free = random_polynomial_vector(grid, rng, 6);
    VectorField::new(bubble.mul(&free.x1), bubble.mul(&free.x2)).scale(amp)
}

/// Random fields for the identity checks: products of three fields and their
/// third derivatives must stay resolved, so the angular mode is capped at a
/// third of the grid's and the radial degree at half the ring count.
pub fn verification_space(grid: &DiskGrid, gamma: f64) -> Result<TrialSpace> {
    let degree = (grid.n_radial() / 2).clamp(4, 10);
    let mode = (grid.n_angular_modes() / 3).max(1);
    TrialSpace::new(grid, gamma, degree, mode)
}

pub fn verify_identities(study: &Study, options: &VerifyOptions, seed: u64) -> Result<VerificationReport> {
    let grid = &study.grid;
    let p = study.system.params;
    let amp = options.field_amplitude;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tampered = verification_space(grid, p.gamma + options.tamper_gamma)?;
    let space = verification_space(grid, p.gamma)?;
    let mut checks = Vec::new();

    let mut trace = Worst(0.0);
    let mut ibp = Worst(0.0);
    let mut ra = Worst(0.0);
    let mut bb1 = Worst(0.0);
    let mut antis = Worst(0.0);
    let mut curl_nl = Worst(0.0);
    let mut adv_energy = Worst(0.0);
    for _ in 0..options.samples {
        let yt = tampered.random_field(grid, &mut rng).scale(amp);
        let (a, b) = navier_residuals_with_gamma(grid, &yt, p.gamma);
        trace.push(rel(a.max(b), grid.curl(&yt).max_abs().max(yt.max_abs())));

        let y = space.random_field(grid, &mut rng).scale(amp);
        let z = space.random_field(grid, &mut rng).scale(amp);
        let phi = space.random_field(grid, &mut rng).scale(amp);
        let tang = tangential_field(grid, &mut rng, amp);
        let free = random_polynomial_vector(grid, &mut rng, 5).scale(amp);

        let lhs = -grid.inner_vec(&grid.vector_laplacian(&y), &tang);
        let rhs = p.gamma * grid.boundary_inner_vec(&y, &tang) + 2.0 * deformation_inner(grid, &y, &tang);
        ibp.push(rel((lhs - rhs).abs(), grid.l2_norm(&grid.vector_laplacian(&y)) * grid.l2_norm(&tang)));

        let (y1, y3) = (sobolev_norm(grid, &y, 1), sobolev_norm(grid, &y, 3));
        let (z1, z3) = (sobolev_norm(grid, &z, 1), sobolev_norm(grid, &z, 3));
        let phi1 = sobolev_norm(grid, &phi, 1);
        let sum = trilinear_b(grid, &phi, &free, &y) + trilinear_b(grid, &phi, &y, &free);
        ra.push(rel(sum.abs(), grid.l2_norm(&phi) * sobolev_norm(grid, &free, 1) * y1));

        let dual = curl_cross_pairing(grid, &y, &z, &phi, &p) - curl_cross_pairing_trilinear(grid, &y, &z, &phi, &p);
        bb1.push(rel(dual.abs(), y3 * z1 * phi1));

        let omega = curl_upsilon(grid, &y, &p);
        antis.push(rel(vorticity_pairing(grid, &omega, &z, &z).abs(), y3 * z1 * z3));

        let adv = advect_scalar(grid, &y, &omega);
        let curl_of_cross = grid.curl(&cross(&omega, &y));
        curl_nl.push(rel(grid.l2_norm_scalar(&(&curl_of_cross - &adv)), grid.l2_norm_scalar(&adv)));
        adv_energy.push(rel(
            grid.inner(&adv, &omega).abs(),
            grid.l2_norm_scalar(&adv) * grid.l2_norm_scalar(&omega),
        ));
    }
    checks.push(tol_check("curl_trace", trace.0, IDENTITY_TOL));
    checks.push(tol_check("integration_by_parts", ibp.0, IDENTITY_TOL));
    checks.push(tol_check("b_antisymmetry", ra.0, IDENTITY_TOL));
    checks.push(tol_check("bb1_dual_formula", bb1.0, IDENTITY_TOL));
    checks.push(tol_check("antis", antis.0, IDENTITY_TOL));
    checks.push(tol_check("curl_of_nonlinearity", curl_nl.0, IDENTITY_TOL));
    checks.push(tol_check("vorticity_transport_neutrality", adv_energy.0, IDENTITY_TOL));

    // Galerkin energy neutrality: ⟨c, N(c)⟩ = 0 through the precomputed tensor.
    let sys = &study.system;
    let n = sys.n_modes();
    let random_state = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        sys.eigenvalues
            .iter()
            .map(|l| {
                let x: f64 = StandardNormal.sample(rng);
                amp * x / l.sqrt()
            })
            .collect()
    };
    let mut neutral = Worst(0.0);
    for _ in 0..options.samples {
        let c = random_state(&mut rng);
        let nl = sys.nonlinear_term(&c);
        let dot: f64 = c.iter().zip(&nl).map(|(a, b)| a * b).sum();
        let scale = sys.v_norm(&c) * nl.iter().map(|x| x * x).sum::<f64>().sqrt();
        neutral.push(rel(dot.abs(), scale));
    }
    checks.push(tol_check("energy_neutrality", neutral.0, IDENTITY_TOL));

    let stokes = StokesSolver::new(grid, &p)?;
    let mut round = Worst(0.0);
    let mut energy = Worst(0.0);
    for _ in 0..options.stokes_samples {
        let y = space.random_field(grid, &mut rng).scale(amp);
        let h = stokes.solve(grid, &upsilon(grid, &y, &p))?;
        round.push(rel((&h - &y).max_abs(), y.max_abs()));
        let f = random_polynomial_vector(grid, &mut rng, 6).scale(amp);
        let h = stokes.solve(grid, &f)?;
        let work = grid.inner_vec(&f, &h);
        energy.push(rel((inner_v(grid, &h, &h, &p) - work).abs(), work.abs()));
    }
    checks.push(tol_check("stokes_round_trip", round.0, STOKES_ROUND_TRIP_TOL));
    checks.push(tol_check("stokes_energy", energy.0, STOKES_ENERGY_TOL));

    // Itô correction: Σᵢₖ (Gᵏ, eᵢ)² against Σₖ ‖Pₙ G̃ᵏ‖_V².
    let channels = if sys.noise.is_empty() {
        vec![NoiseChannel {
            sigma: 1.0,
            rho: 0.5,
            shape_mode_index: 0,
            envelope: Envelope::Constant,
        }]
    } else {
        sys.noise.channels.clone()
    };
    let mut noisy = sys.clone();
    noisy.noise = NoiseModel::new(channels, n)?;
    let mut ito = Worst(0.0);
    let mut drift_energy = Worst(0.0);
    for s in 0..options.states {
        let c = random_state(&mut rng);
        let t = s as f64 / options.states.max(1) as f64;
        let diff = noisy.diffusion(&c, t)?;
        let lhs: f64 = diff.iter().map(|d| amp * amp * d * d).sum();
        let y = study.basis.reconstruct(grid, &c)?;
        let mut rhs = 0.0;
        for ch in &noisy.noise.channels {
            let s = ch.envelope.at(t);
            let mut g = study.basis.modes[ch.shape_mode_index].scale(s * ch.sigma);
            g.axpy(s * ch.rho, &y);
            let tilde = stokes.solve(grid, &g.scale(amp))?;
            rhs += study.basis.project(grid, &tilde).iter().map(|x| x * x).sum::<f64>();
        }
        ito.push(rel((lhs - rhs).abs(), lhs.abs().max(rhs.abs())));

        let f = sys.drift(&c, t)?;
        let lhs: f64 = 2.0 * c.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>();
        let def = deformation_inner(grid, &y, &y);
        let bnd = grid.boundary_inner_vec(&y, &y);
        let forcing: f64 = c.iter().zip(&sys.forcing_pairings).map(|(a, b)| a * b).sum();
        let rhs = -4.0 * p.nu * def - 2.0 * p.nu * p.gamma * bnd + 2.0 * forcing;
        let scale = 4.0 * p.nu * def + 2.0 * p.nu * p.gamma * bnd + 2.0 * forcing.abs();
        drift_energy.push(rel((lhs - rhs).abs(), scale));
    }
    checks.push(tol_check("ito_correction", ito.0, ITO_TOL));
    checks.push(tol_check("drift_energy", drift_energy.0, DRIFT_ENERGY_TOL));

    checks.extend(path_checks(study, amp)?);

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerificationReport {
        seed,
        options: options.clone(),
        checks,
        all_passed,
    })
}

/// Energy and enstrophy budgets of the noise-free path at `dt` and `dt/2`,
/// plus monotone decay of `‖Y‖_V²` when the forcing also vanishes.
fn path_checks(study: &Study, amp: f64) -> Result<Vec<Check>> {
    let mut sys = study.system.clone();
    sys.noise = NoiseModel::none();
    let c0: Vec<f64> = study.c0.iter().map(|c| amp * c).collect();
    let spec = &study.spec;
    let run = |steps: usize| {
        let s = SimulationSpec::new(spec.t_final, spec.t_final / steps as f64, 1, spec.scheme, vec![])?;
        crate::sde::simulate_path(&sys, &s, &c0, &WienerIncrements::zeros(0, steps), 0, 0)
    };
    let coarse = run(spec.steps)?;
    let fine = run(2 * spec.steps)?;
    let mut out = vec![
        halving_check(
            "energy_identity_halving",
            coarse.last().energy_residual_cumulative,
            fine.last().energy_residual_cumulative,
        ),
        halving_check(
            "enstrophy_identity_halving",
            coarse.last().enstrophy_residual_cumulative,
            fine.last().enstrophy_residual_cumulative,
        ),
    ];
    if sys.forcing_l2 == 0.0 {
        let worst = fine
            .ledger
            .windows(2)
            .map(|w| w[1].v_norm_sq - w[0].v_norm_sq)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0);
        out.push(Check {
            name: "energy_nonincreasing".into(),
            residual: worst,
            tolerance: Some(MONOTONE_SLACK),
            halving_ratio: None,
            passed: worst <= MONOTONE_SLACK,
        });
    }
    Ok(out)
}
