//! Galerkin coefficient SDE: assembly, noise, time stepping and the energy ledger.

use std::io::Write;

use nalgebra::{DMatrix, DVector, LU, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::GalerkinBasis;
use crate::error::{Error, Result};
use crate::geometry::{DiskGrid, ScalarField, VectorField};
use crate::spaces::{deformation, derivative_energies, upsilon, HelmholtzProjector, PhysicalParams};

/// `‖Y‖_H3` above which a path is stopped and flagged.
pub const BLOWUP_H3: f64 = 1e6;

/// Time modulation `s(t)` of a noise channel, `|s| ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    #[default]
    Constant,
    /// `cos(2π f t)`
    Cosine { frequency: f64 },
}

impl Envelope {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Envelope::Constant => 1.0,
            Envelope::Cosine { frequency } => (2.0 * std::f64::consts::PI * frequency * t).cos(),
        }
    }
}

/// One channel `Gᵏ(t, Y) = s(t) (σ e_j + ρ Y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseChannel {
    pub sigma: f64,
    pub rho: f64,
    pub shape_mode_index: usize,
    #[serde(default)]
    pub envelope: Envelope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub channels: Vec<NoiseChannel>,
    /// Constant of the Lipschitz and linear-growth bounds in the channel-sum norm.
    pub lipschitz_k: f64,
}

impl NoiseModel {
    /// Validate the channels against an `n_modes` basis and compute `K`.
    /// Shape fields are basis modes, so `‖φ_k‖_V = 1`.
    pub fn new(channels: Vec<NoiseChannel>, n_modes: usize) -> Result<Self> {
        for (k, ch) in channels.iter().enumerate() {
            if !(ch.sigma.is_finite() && ch.sigma >= 0.0) {
                return Err(Error::config(format!("noise.channels[{k}].sigma"), "must be finite and >= 0"));
            }
            if !ch.rho.is_finite() {
                return Err(Error::config(format!("noise.channels[{k}].rho"), "must be finite"));
            }
            if ch.shape_mode_index >= n_modes {
                return Err(Error::config(
                    format!("noise.channels[{k}].shape_mode_index"),
                    format!("must be < n_modes = {n_modes}"),
                ));
            }
            if let Envelope::Cosine { frequency } = ch.envelope {
                if !frequency.is_finite() {
                    return Err(Error::config(format!("noise.channels[{k}].envelope.frequency"), "must be finite"));
                }
            }
        }
        let rho: f64 = channels.iter().map(|c| c.rho.abs()).sum();
        let sigma: f64 = channels.iter().map(|c| c.sigma).sum();
        let lipschitz_k = rho.max(rho * rho).max(sigma);
        Ok(NoiseModel {
            channels,
            lipschitz_k,
        })
    }

    pub fn none() -> Self {
        NoiseModel {
            channels: Vec::new(),
            lipschitz_k: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Coefficients of `Gᵏ(t, Y)` in the basis.
    pub fn channel_coeffs(&self, k: usize, c: &[f64], t: f64) -> Vec<f64> {
        let ch = &self.channels[k];
        let s = ch.envelope.at(t);
        let mut g: Vec<f64> = c.iter().map(|ci| s * ch.rho * ci).collect();
        g[ch.shape_mode_index] += s * ch.sigma;
        g
    }

    /// Check both bounds of the noise assumption on `pairs` random coefficient
    /// pairs; returns the largest observed ratios `(lipschitz, growth)` relative to `K`.
    pub fn check_bounds(&self, n_modes: usize, pairs: usize, seed: u64) -> Result<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (mut lip, mut growth) = (0.0_f64, 0.0_f64);
        for _ in 0..pairs {
            let t: f64 = rng.random::<f64>();
            let y: Vec<f64> = (0..n_modes).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let z: Vec<f64> = (0..n_modes).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let diff: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a - b).collect();
            let (mut d_sum, mut g_sum) = (0.0, 0.0);
            for k in 0..self.len() {
                let gy = self.channel_coeffs(k, &y, t);
                let gz = self.channel_coeffs(k, &z, t);
                let dg: Vec<f64> = gy.iter().zip(&gz).map(|(a, b)| a - b).collect();
                d_sum += norm(&dg);
                g_sum += norm(&gy);
            }
            let k = self.lipschitz_k.max(f64::MIN_POSITIVE);
            lip = lip.max(d_sum * d_sum / (k * norm(&diff).powi(2)));
            growth = growth.max(g_sum / (k * (1.0 + norm(&y))));
        }
        if lip > 1.0 + 1e-12 || growth > 1.0 + 1e-12 {
            return Err(Error::config(
                "noise",
                format!("noise bounds violated: lipschitz ratio {lip}, growth ratio {growth}"),
            ));
        }
        Ok((lip, growth))
    }
}

/// Body force `U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Forcing {
    #[default]
    None,
    /// `U = Σ aᵢ eᵢ`
    Modes { coefficients: Vec<f64> },
    /// `U = a (−x₂, x₁)`
    Rotation { amplitude: f64 },
}

/// Which norm a stopping rule watches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    H3,
    V,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub threshold: f64,
    pub kind: NormKind,
}

impl StoppingRule {
    pub fn new(threshold: f64, kind: NormKind) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(Error::config("stopping", format!("threshold must be > 0, got {threshold}")));
        }
        Ok(StoppingRule { threshold, kind })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Explicit,
    SemiImplicit,
}

/// Everything the coefficient SDE needs, precomputed from one basis.
#[derive(Clone, Debug)]
pub struct GalerkinSystem {
    pub params: PhysicalParams,
    pub eigenvalues: Vec<f64>,
    pub noise: NoiseModel,
    pub nonlinear: bool,
    n: usize,
    /// `(eᵢ, eⱼ)`
    pub mass: DMatrix<f64>,
    /// `(Deᵢ, Deⱼ)`
    pub deformation: DMatrix<f64>,
    /// `∫_Γ eᵢ·eⱼ`
    pub boundary: DMatrix<f64>,
    /// `2(Deᵢ, Deⱼ) + γ ∫_Γ eᵢ·eⱼ`
    pub viscous: DMatrix<f64>,
    /// `(curl υ(eᵢ), curl υ(eⱼ))`
    pub enstrophy: DMatrix<f64>,
    /// `(curl eᵢ, curl υ(eⱼ))`
    pub curl_cross: DMatrix<f64>,
    /// `Σ_{|a|≤3} (∂ᵃeᵢ, ∂ᵃeⱼ)`
    pub h3: DMatrix<f64>,
    /// `(Pυ(eᵢ), Pυ(eⱼ))`
    pub projected_upsilon: DMatrix<f64>,
    /// `T[i][j][k] = ∫ curl υ(e_j) (e_k,1 e_i,2 − e_k,2 e_i,1)`
    tensor: Vec<f64>,
    pub forcing: Forcing,
    /// `(U, eᵢ)`
    pub forcing_pairings: Vec<f64>,
    /// `(curl U, curl υ(eⱼ))`
    pub forcing_curl_pairings: Vec<f64>,
    pub forcing_l2: f64,
    pub forcing_curl_l2: f64,
    pub h_curl_ok: bool,
}

fn gram_of(grid: &DiskGrid, a: &[ScalarField], b: &[ScalarField]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| grid.inner(&a[i], &b[j]))
}

fn sym_gram(grid: &DiskGrid, fields: &[Vec<ScalarField>]) -> DMatrix<f64> {
    let n = fields.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = fields[i].iter().zip(&fields[j]).map(|(a, b)| grid.inner(a, b)).sum();
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// All partial derivatives of a vector field through order 3, distinct multi-indices only.
fn derivative_stack(grid: &DiskGrid, y: &VectorField) -> Vec<ScalarField> {
    let mut out = Vec::new();
    for comp in [&y.x1, &y.x2] {
        let mut level = vec![comp.clone()];
        for k in 0..=3 {
            out.extend(level.iter().cloned());
            if k == 3 {
                break;
            }
            let mut next = vec![grid.d_x1(&level[0])];
            next.extend(level.iter().map(|f| grid.d_x2(f)));
            level = next;
        }
    }
    out
}

impl GalerkinSystem {
    pub fn new(grid: &DiskGrid, basis: &GalerkinBasis, noise: NoiseModel, forcing: Forcing) -> Result<Self> {
        let p = basis.params;
        let n = basis.n_modes();
        let modes = &basis.modes;
        let x1: Vec<ScalarField> = modes.iter().map(|e| e.x1.clone()).collect();
        let x2: Vec<ScalarField> = modes.iter().map(|e| e.x2.clone()).collect();
        let mass = gram_of(grid, &x1, &x1) + gram_of(grid, &x2, &x2);
        let defs: Vec<Vec<ScalarField>> = modes
            .iter()
            .map(|e| {
                let (a, b, c) = deformation(grid, e);
                vec![a, b.scale(std::f64::consts::SQRT_2), c]
            })
            .collect();
        let deformation_g = sym_gram(grid, &defs);
        let boundary = DMatrix::from_fn(n, n, |i, j| grid.boundary_inner_vec(&modes[i], &modes[j]));
        let viscous = &deformation_g * 2.0 + &boundary * p.gamma;
        let omegas: Vec<ScalarField> = modes.iter().map(|e| crate::spaces::curl_upsilon(grid, e, &p)).collect();
        let curls: Vec<ScalarField> = modes.iter().map(|e| grid.curl(e)).collect();
        let enstrophy = gram_of(grid, &omegas, &omegas);
        let curl_cross = gram_of(grid, &curls, &omegas);
        let stacks: Vec<Vec<ScalarField>> = modes.iter().map(|e| derivative_stack(grid, e)).collect();
        let h3 = sym_gram(grid, &stacks);
        let projector = HelmholtzProjector::new(grid)?;
        let pu: Vec<Vec<ScalarField>> = modes
            .iter()
            .map(|e| {
                let v = projector.project(grid, &upsilon(grid, e, &p))?;
                Ok(vec![v.x1, v.x2])
            })
            .collect::<Result<_>>()?;
        let projected_upsilon = sym_gram(grid, &pu);

        let weights = grid.domain_weights();
        let omega_w: Vec<Vec<f64>> = omegas
            .iter()
            .map(|o| o.values().iter().zip(&weights).map(|(a, w)| a * w).collect())
            .collect();
        let mut tensor = vec![0.0; n * n * n];
        let mut cross = vec![0.0; grid.len()];
        for i in 0..n {
            for k in (i + 1)..n {
                let (ei, ek) = (&modes[i], &modes[k]);
                for (q, slot) in cross.iter_mut().enumerate() {
                    *slot = ek.x1.values()[q] * ei.x2.values()[q] - ek.x2.values()[q] * ei.x1.values()[q];
                }
                for j in 0..n {
                    let v: f64 = omega_w[j].iter().zip(&cross).map(|(a, b)| a * b).sum();
                    tensor[(i * n + j) * n + k] = v;
                    tensor[(k * n + j) * n + i] = -v;
                }
            }
        }

        let (u_field, u_curl) = match &forcing {
            Forcing::None => (grid.zero_vector(), grid.zeros()),
            Forcing::Modes { coefficients } => {
                if coefficients.len() > n {
                    return Err(Error::config(
                        "forcing.coefficients",
                        format!("has {} entries but the basis has {n} modes", coefficients.len()),
                    ));
                }
                let mut full = coefficients.clone();
                full.resize(n, 0.0);
                let u = basis.reconstruct(grid, &full)?;
                let cu = grid.curl(&u);
                (u, cu)
            }
            Forcing::Rotation { amplitude } => {
                let a = *amplitude;
                let u = grid.vector_from_fn(|_, y| -a * y, |x, _| a * x);
                let cu = grid.curl(&u);
                (u, cu)
            }
        };
        let forcing_pairings = modes.iter().map(|e| grid.inner_vec(&u_field, e)).collect();
        let forcing_curl_pairings = omegas.iter().map(|o| grid.inner(&u_curl, o)).collect();
        let forcing_l2 = grid.l2_norm(&u_field);
        let forcing_curl_l2 = grid.l2_norm_scalar(&u_curl);
        let h_curl_ok = forcing_l2.is_finite() && forcing_curl_l2.is_finite();
        if !h_curl_ok {
            return Err(Error::config("forcing", "forcing or its curl is not square integrable"));
        }
        noise.check_bounds(n, 100, 0x5eed)?;

        Ok(GalerkinSystem {
            params: p,
            eigenvalues: basis.eigenvalues.clone(),
            noise,
            nonlinear: true,
            n,
            mass,
            deformation: deformation_g,
            boundary,
            viscous,
            enstrophy,
            curl_cross,
            h3,
            projected_upsilon,
            tensor,
            forcing,
            forcing_pairings,
            forcing_curl_pairings,
            forcing_l2,
            forcing_curl_l2,
            h_curl_ok,
        })
    }

    /// Drop the nonlinearity (linear Stokes-type dynamics).
    pub fn without_nonlinearity(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    fn check_len(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.n {
            return Err(Error::Shape {
                expected: self.n,
                found: c.len(),
            });
        }
        Ok(())
    }

    /// `(curl υ(Y) × Y, eᵢ)` for `Y = Σ cⱼ eⱼ`.
    pub fn nonlinear_term(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        if !self.nonlinear {
            return out;
        }
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, cj) in c.iter().enumerate() {
                if *cj == 0.0 {
                    continue;
                }
                let row = &self.tensor[(i * n + j) * n..(i * n + j + 1) * n];
                let inner: f64 = row.iter().zip(c).map(|(t, ck)| t * ck).sum();
                acc += cj * inner;
            }
            *o = acc;
        }
        out
    }

    /// `−ν(2(DY, Deᵢ) + γ∫_Γ Y·eᵢ) − (curl υ(Y) × Y, eᵢ) + (U, eᵢ)`
    pub fn drift(&self, c: &[f64], _t: f64) -> Result<Vec<f64>> {
        self.check_len(c)?;
        let cv = DVector::from_column_slice(c);
        let visc = &self.viscous * &cv;
        let nl = self.nonlinear_term(c);
        Ok((0..self.n)
            .map(|i| -self.params.nu * visc[i] - nl[i] + self.forcing_pairings[i])
            .collect())
    }

    /// `n × m` array of `(Gᵏ(t, Y), eᵢ)`.
    pub fn diffusion(&self, c: &[f64], t: f64) -> Result<DMatrix<f64>> {
        self.check_len(c)?;
        let m = self.noise.len();
        let mc = &self.mass * DVector::from_column_slice(c);
        let mut out = DMatrix::zeros(self.n, m);
        for (k, ch) in self.noise.channels.iter().enumerate() {
            let s = ch.envelope.at(t);
            for i in 0..self.n {
                out[(i, k)] = s * (ch.sigma * self.mass[(i, ch.shape_mode_index)] + ch.rho * mc[i]);
            }
        }
        Ok(out)
    }

    fn quad(&self, m: &DMatrix<f64>, c: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            if c[i] == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for j in 0..n {
                row += m[(i, j)] * c[j];
            }
            acc += c[i] * row;
        }
        acc
    }

    /// `‖Y‖_H3`
    pub fn h3_norm(&self, c: &[f64]) -> f64 {
        self.quad(&self.h3, c).max(0.0).sqrt()
    }

    /// `‖Y‖_V`
    pub fn v_norm(&self, c: &[f64]) -> f64 {
        c.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `‖Y‖_W = ‖Y‖_V + ‖Pυ(Y)‖₂`
    pub fn w_norm(&self, c: &[f64]) -> f64 {
        self.v_norm(c) + self.quad(&self.projected_upsilon, c).max(0.0).sqrt()
    }

    /// `‖curl υ(Y)‖₂²`
    pub fn enstrophy(&self, c: &[f64]) -> f64 {
        self.quad(&self.enstrophy, c)
    }

    fn state_terms(&self, c: &[f64], t: f64) -> Result<StateTerms> {
        let diff = self.diffusion(c, t)?;
        let p = &self.params;
        let def = self.quad(&self.deformation, c);
        let bnd = self.quad(&self.boundary, c);
        let forcing: f64 = c.iter().zip(&self.forcing_pairings).map(|(a, b)| a * b).sum();
        let ito: f64 = diff.iter().map(|d| d * d).sum();
        let ens = self.enstrophy(c);
        let curl_omega = self.quad(&self.curl_cross, c);
        let curl_u_omega: f64 = c.iter().zip(&self.forcing_curl_pairings).map(|(a, b)| a * b).sum();
        let mut ens_corr = 0.0;
        for (i, lam) in self.eigenvalues.iter().enumerate() {
            let row: f64 = diff.row(i).iter().map(|d| d * d).sum();
            ens_corr += (lam - 1.0) * row;
        }
        // (Gᵏ, Y) and (curl Gᵏ, curl υ(Y)) per channel
        let mut pair = Vec::with_capacity(self.noise.len());
        let mut curl_pair = Vec::with_capacity(self.noise.len());
        for (k, ch) in self.noise.channels.iter().enumerate() {
            pair.push((0..self.n).map(|i| c[i] * diff[(i, k)]).sum::<f64>());
            let s = ch.envelope.at(t);
            let shape: f64 = (0..self.n).map(|j| self.curl_cross[(ch.shape_mode_index, j)] * c[j]).sum();
            curl_pair.push(s * (ch.sigma * shape + ch.rho * curl_omega));
        }
        Ok(StateTerms {
            v_sq: c.iter().map(|x| x * x).sum(),
            def_sq: def,
            boundary_sq: bnd,
            forcing,
            ito,
            energy_rate: 2.0 * (-2.0 * p.nu * def - p.nu * p.gamma * bnd + forcing),
            enstrophy: ens,
            enstrophy_source: 2.0 * (p.nu / p.alpha * curl_omega + curl_u_omega) - 2.0 * p.nu / p.alpha * ens,
            enstrophy_correction: ens_corr,
            h3: self.h3_norm(c),
            w: self.w_norm(c),
            pair,
            curl_pair,
        })
    }
}

struct StateTerms {
    v_sq: f64,
    def_sq: f64,
    boundary_sq: f64,
    forcing: f64,
    ito: f64,
    energy_rate: f64,
    enstrophy: f64,
    enstrophy_source: f64,
    enstrophy_correction: f64,
    h3: f64,
    w: f64,
    pair: Vec<f64>,
    curl_pair: Vec<f64>,
}

/// Time stepper with its scheme-specific factorization.
#[derive(Clone, Debug)]
pub struct Stepper<'a> {
    pub system: &'a GalerkinSystem,
    pub dt: f64,
    pub scheme: Scheme,
    implicit: Option<LU<f64, Dyn, Dyn>>,
}

impl<'a> Stepper<'a> {
    pub fn new(system: &'a GalerkinSystem, dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("time.dt", format!("must be > 0, got {dt}")));
        }
        let implicit = match scheme {
            Scheme::Explicit => None,
            Scheme::SemiImplicit => {
                let n = system.n_modes();
                let m = DMatrix::identity(n, n) + &system.viscous * (dt * system.params.nu);
                Some(m.lu())
            }
        };
        Ok(Stepper {
            system,
            dt,
            scheme,
            implicit,
        })
    }

    /// Advance one step with Wiener increments `dw` (one per channel).
    pub fn step(&self, c: &[f64], t: f64, dw: &[f64]) -> Result<Vec<f64>> {
        let sys = self.system;
        if dw.len() != sys.noise.len() {
            return Err(Error::Shape {
                expected: sys.noise.len(),
                found: dw.len(),
            });
        }
        let dt = self.dt;
        let diff = sys.diffusion(c, t)?;
        let noise = &diff * DVector::from_column_slice(dw);
        let next: Vec<f64> = match &self.implicit {
            None => {
                let f = sys.drift(c, t)?;
                (0..c.len()).map(|i| c[i] + dt * f[i] + noise[i]).collect()
            }
            Some(lu) => {
                let nl = sys.nonlinear_term(c);
                let rhs = DVector::from_fn(c.len(), |i, _| {
                    c[i] + dt * (sys.forcing_pairings[i] - nl[i]) + noise[i]
                });
                let sol = lu
                    .solve(&rhs)
                    .ok_or_else(|| Error::Conditioning("implicit viscous system is singular".into()))?;
                sol.iter().copied().collect()
            }
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                t: t + dt,
                detail: format!("non-finite coefficients; ‖Y‖_V was {:.6e} before the step", sys.v_norm(c)),
            });
        }
        Ok(next)
    }
}

/// Pregenerated Wiener increments, `steps × channels`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct WienerIncrements {
    pub channels: usize,
    pub steps: usize,
    pub values: Vec<f64>,
}

impl WienerIncrements {
    /// Channel `k` of path `p` draws from its own ChaCha stream
    /// `(p << 16) | k` under `base_seed`, so any path is replayable alone.
    pub fn generate(base_seed: u64, path_index: u64, channels: usize, steps: usize, dt: f64) -> Self {
        let mut values = vec![0.0; steps * channels];
        let sd = dt.sqrt();
        for k in 0..channels {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
            rng.set_stream((path_index << 16) | k as u64);
            for s in 0..steps {
                let z: f64 = rng.sample(StandardNormal);
                values[s * channels + k] = sd * z;
            }
        }
        WienerIncrements {
            channels,
            steps,
            values,
        }
    }

    pub fn zeros(channels: usize, steps: usize) -> Self {
        WienerIncrements {
            channels,
            steps,
            values: vec![0.0; steps * channels],
        }
    }

    pub fn step(&self, s: usize) -> &[f64] {
        &self.values[s * self.channels..(s + 1) * self.channels]
    }
}

/// Time discretization and stopping settings of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationSpec {
    pub t_final: f64,
    pub steps: usize,
    pub save_stride: usize,
    pub scheme: Scheme,
    pub stopping: Vec<StoppingRule>,
}

impl SimulationSpec {
    /// `dt` is rounded so that an integer number of uniform steps covers `[0, T]`.
    pub fn new(t_final: f64, dt: f64, save_stride: usize, scheme: Scheme, stopping: Vec<StoppingRule>) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::config("time.t_final", "must be finite and > 0"));
        }
        if !(dt > 0.0 && dt < t_final) {
            return Err(Error::config("time.dt", format!("must lie in (0, {t_final}), got {dt}")));
        }
        if save_stride == 0 {
            return Err(Error::config("time.save_stride", "must be >= 1"));
        }
        let steps = (t_final / dt - 1e-9).ceil().max(1.0) as usize;
        Ok(SimulationSpec {
            t_final,
            steps,
            save_stride,
            scheme,
            stopping,
        })
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }
}

/// One saved step of the energy and enstrophy budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: f64,
    pub v_norm_sq: f64,
    pub deformation_sq: f64,
    pub boundary_sq: f64,
    pub forcing_pairing: f64,
    pub ito_correction: f64,
    /// `2 Σₖ (Gᵏ, Y) ΔWᵏ` summed over the steps since the previous row.
    pub martingale_increment: f64,
    pub enstrophy: f64,
    /// `2(ν/α curl Y + curl U, curl υ(Y)) − (2ν/α)‖curl υ(Y)‖²`
    pub enstrophy_source: f64,
    /// `Σᵢ (λᵢ − 1) Σₖ (Gᵏ, eᵢ)²`
    pub enstrophy_correction: f64,
    pub h3_norm: f64,
    pub w_norm: f64,
    pub martingale_cumulative: f64,
    pub enstrophy_martingale_cumulative: f64,
    /// Running `Σ |Δ‖Y‖_V² − budget|` over all steps so far.
    pub energy_residual_cumulative: f64,
    pub enstrophy_residual_cumulative: f64,
    /// Running `∫ (4ν‖DY‖² + 2νγ‖Y‖_Γ²) dt` (left Riemann sum).
    pub dissipation_integral: f64,
}

impl LedgerRow {
    pub const COLUMNS: [&'static str; 17] = [
        "t",
        "v_norm_sq",
        "deformation_sq",
        "boundary_sq",
        "forcing_pairing",
        "ito_correction",
        "martingale_increment",
        "enstrophy",
        "enstrophy_source",
        "enstrophy_correction",
        "h3_norm",
        "w_norm",
        "martingale_cumulative",
        "enstrophy_martingale_cumulative",
        "energy_residual_cumulative",
        "enstrophy_residual_cumulative",
        "dissipation_integral",
    ];

    pub fn values(&self) -> [f64; 17] {
        [
            self.t,
            self.v_norm_sq,
            self.deformation_sq,
            self.boundary_sq,
            self.forcing_pairing,
            self.ito_correction,
            self.martingale_increment,
            self.enstrophy,
            self.enstrophy_source,
            self.enstrophy_correction,
            self.h3_norm,
            self.w_norm,
            self.martingale_cumulative,
            self.enstrophy_martingale_cumulative,
            self.energy_residual_cumulative,
            self.enstrophy_residual_cumulative,
            self.dissipation_integral,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopHit {
    pub rule: StoppingRule,
    pub t: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub path_index: u64,
    pub base_seed: u64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
    pub ledger: Vec<LedgerRow>,
    pub stops: Vec<StopHit>,
    /// Set when `‖Y‖_H3` exceeded the blow-up threshold; the record ends there.
    pub blew_up_at: Option<f64>,
}

impl TrajectoryRecord {
    pub fn last(&self) -> &LedgerRow {
        self.ledger.last().expect("a record always holds the initial row")
    }

    pub fn final_coefficients(&self) -> &[f64] {
        self.coefficients.last().expect("a record always holds the initial state")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", LedgerRow::COLUMNS.join(","))?;
        for row in &self.ledger {
            let cells: Vec<String> = row.values().iter().map(|v| format_float(*v)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Integrate one path from `c0` with the given increments.
pub fn simulate_path(
    system: &GalerkinSystem,
    spec: &SimulationSpec,
    c0: &[f64],
    increments: &WienerIncrements,
    path_index: u64,
    base_seed: u64,
) -> Result<TrajectoryRecord> {
    system.check_len(c0)?;
    if increments.steps < spec.steps || increments.channels != system.noise.len() {
        return Err(Error::Shape {
            expected: spec.steps * system.noise.len(),
            found: increments.values.len(),
        });
    }
    let dt = spec.dt();
    let stepper = Stepper::new(system, dt, spec.scheme)?;
    let p = system.params;
    let mut c = c0.to_vec();
    let mut terms = system.state_terms(&c, 0.0)?;
    let mut record = TrajectoryRecord {
        path_index,
        base_seed,
        dt,
        times: Vec::new(),
        coefficients: Vec::new(),
        ledger: Vec::new(),
        stops: spec.stopping.iter().map(|r| StopHit { rule: *r, t: None }).collect(),
        blew_up_at: None,
    };
    let mut cum = Cumulative::default();
    let check_stops = |record: &mut TrajectoryRecord, terms: &StateTerms, t: f64| {
        for hit in record.stops.iter_mut() {
            if hit.t.is_none() {
                let value = match hit.rule.kind {
                    NormKind::H3 => terms.h3,
                    NormKind::V => terms.v_sq.sqrt(),
                };
                if value >= hit.rule.threshold {
                    hit.t = Some(t);
                }
            }
        }
    };
    check_stops(&mut record, &terms, 0.0);
    push_row(&mut record, &c, 0.0, &terms, &cum);
    if terms.h3 > BLOWUP_H3 {
        record.blew_up_at = Some(0.0);
        return Ok(record);
    }
    for s in 0..spec.steps {
        let t = s as f64 * dt;
        let dw = increments.step(s);
        let next = stepper.step(&c, t, dw)?;
        let t_next = (s + 1) as f64 * dt;
        let next_terms = system.state_terms(&next, t_next)?;

        let mart: f64 = 2.0 * terms.pair.iter().zip(dw).map(|(a, w)| a * w).sum::<f64>();
        let ens_mart: f64 = 2.0 * terms.curl_pair.iter().zip(dw).map(|(a, w)| a * w).sum::<f64>();
        let energy_res = next_terms.v_sq - terms.v_sq - (terms.energy_rate * dt + mart + terms.ito * dt);
        let ens_res = next_terms.enstrophy
            - terms.enstrophy
            - (terms.enstrophy_source * dt + ens_mart + terms.enstrophy_correction * dt);
        cum.martingale += mart;
        cum.step_martingale += mart;
        cum.enstrophy_martingale += ens_mart;
        cum.energy_residual += energy_res.abs();
        cum.enstrophy_residual += ens_res.abs();
        cum.dissipation += (4.0 * p.nu * terms.def_sq + 2.0 * p.nu * p.gamma * terms.boundary_sq) * dt;

        c = next;
        terms = next_terms;
        check_stops(&mut record, &terms, t_next);
        let blown = terms.h3 > BLOWUP_H3;
        if (s + 1) % spec.save_stride == 0 || s + 1 == spec.steps || blown {
            push_row(&mut record, &c, t_next, &terms, &cum);
            cum.step_martingale = 0.0;
        }
        if blown {
            record.blew_up_at = Some(t_next);
            break;
        }
    }
    Ok(record)
}

#[derive(Default)]
struct Cumulative {
    martingale: f64,
    step_martingale: f64,
    enstrophy_martingale: f64,
    energy_residual: f64,
    enstrophy_residual: f64,
    dissipation: f64,
}

fn push_row(record: &mut TrajectoryRecord, c: &[f64], t: f64, terms: &StateTerms, cum: &Cumulative) {
    record.times.push(t);
    record.coefficients.push(c.to_vec());
    record.ledger.push(LedgerRow {
        t,
        v_norm_sq: terms.v_sq,
        deformation_sq: terms.def_sq,
        boundary_sq: terms.boundary_sq,
        forcing_pairing: terms.forcing,
        ito_correction: terms.ito,
        martingale_increment: cum.step_martingale,
        enstrophy: terms.enstrophy,
        enstrophy_source: terms.enstrophy_source,
        enstrophy_correction: terms.enstrophy_correction,
        h3_norm: terms.h3,
        w_norm: terms.w,
        martingale_cumulative: cum.martingale,
        enstrophy_martingale_cumulative: cum.enstrophy_martingale,
        energy_residual_cumulative: cum.energy_residual,
        enstrophy_residual_cumulative: cum.enstrophy_residual,
        dissipation_integral: cum.dissipation,
    });
}

/// Generate the increments for `path_index` and integrate.
pub fn simulate_seeded(
    system: &GalerkinSystem,
    spec: &SimulationSpec,
    c0: &[f64],
    base_seed: u64,
    path_index: u64,
) -> Result<TrajectoryRecord> {
    let inc = WienerIncrements::generate(base_seed, path_index, system.noise.len(), spec.steps, spec.dt());
    simulate_path(system, spec, c0, &inc, path_index, base_seed)
}

/// Derivative energies of a nodal field, re-exported for callers that check
/// the precomputed `H³` Gram matrix against direct differentiation.
pub fn nodal_h3_norm(grid: &DiskGrid, y: &VectorField) -> f64 {
    derivative_energies(grid, y, 3).iter().sum::<f64>().sqrt()
}
