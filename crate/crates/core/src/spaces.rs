//! Inner products, norms and projections of the second-grade function spaces.

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DiskGrid, ScalarField, VectorField};

/// Viscosity `nu`, material modulus `alpha`, boundary friction `gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub nu: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl PhysicalParams {
    pub fn new(nu: f64, alpha: f64, gamma: f64) -> Result<Self> {
        let p = PhysicalParams { nu, alpha, gamma };
        p.validate("physics")?;
        Ok(p)
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [("nu", self.nu), ("alpha", self.alpha), ("gamma", self.gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    format!("{prefix}.{name}"),
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Norms of a single field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub l2: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "Wtilde")]
    pub wtilde: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "H1")]
    pub h1: f64,
    #[serde(rename = "H2")]
    pub h2: f64,
    #[serde(rename = "H3")]
    pub h3: f64,
}

/// Symmetric gradient `Dy = (∇y + ∇yᵀ)/2` as `(D11, D12, D22)`.
pub fn deformation(grid: &DiskGrid, y: &VectorField) -> (ScalarField, ScalarField, ScalarField) {
    let d11 = grid.d_x1(&y.x1);
    let d22 = grid.d_x2(&y.x2);
    let d12 = (&grid.d_x2(&y.x1) + &grid.d_x1(&y.x2)).scale(0.5);
    (d11, d12, d22)
}

/// `(Dy, Dz) = ∫ Σᵢⱼ (Dy)ᵢⱼ (Dz)ᵢⱼ`
pub fn deformation_inner(grid: &DiskGrid, y: &VectorField, z: &VectorField) -> f64 {
    let (a11, a12, a22) = deformation(grid, y);
    let (b11, b12, b22) = deformation(grid, z);
    grid.inner(&a11, &b11) + 2.0 * grid.inner(&a12, &b12) + grid.inner(&a22, &b22)
}

/// `υ(y) = y − αΔy`
pub fn upsilon(grid: &DiskGrid, y: &VectorField, p: &PhysicalParams) -> VectorField {
    let lap = grid.vector_laplacian(y);
    let mut out = y.clone();
    out.axpy(-p.alpha, &lap);
    out
}

/// `curl υ(y)`
pub fn curl_upsilon(grid: &DiskGrid, y: &VectorField, p: &PhysicalParams) -> ScalarField {
    grid.curl(&upsilon(grid, y, p))
}

/// `(y, z)_V = (y, z) + 2α(Dy, Dz) + αγ ∫_Γ y·z`
pub fn inner_v(grid: &DiskGrid, y: &VectorField, z: &VectorField, p: &PhysicalParams) -> f64 {
    grid.inner_vec(y, z)
        + 2.0 * p.alpha * deformation_inner(grid, y, z)
        + p.alpha * p.gamma * grid.boundary_inner_vec(y, z)
}

/// `(y, z)_W̃ = (curl υ(y), curl υ(z)) + (y, z)_V`
pub fn inner_wtilde(grid: &DiskGrid, y: &VectorField, z: &VectorField, p: &PhysicalParams) -> f64 {
    let cy = curl_upsilon(grid, y, p);
    let cz = curl_upsilon(grid, z, p);
    grid.inner(&cy, &cz) + inner_v(grid, y, z, p)
}

pub fn norm_v(grid: &DiskGrid, y: &VectorField, p: &PhysicalParams) -> f64 {
    inner_v(grid, y, y, p).max(0.0).sqrt()
}

/// Squared `L²` norms of all partial derivatives grouped by order `0..=order`.
pub fn derivative_energies(grid: &DiskGrid, y: &VectorField, order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    for comp in [&y.x1, &y.x2] {
        // Distinct multi-indices: build level k+1 from level k by appending
        // ∂₂ to everything and ∂₁ only to the first entry (∂₁^k).
        let mut level = vec![comp.clone()];
        for k in 0..=order {
            let e: f64 = level.iter().map(|f| grid.inner(f, f)).sum();
            if out.len() <= k {
                out.push(0.0);
            }
            out[k] += e;
            if k == order {
                break;
            }
            let mut next = Vec::with_capacity(level.len() + 1);
            next.push(grid.d_x1(&level[0]));
            for f in &level {
                next.push(grid.d_x2(f));
            }
            level = next;
        }
    }
    out
}

/// `‖y‖_{H^k}`
pub fn sobolev_norm(grid: &DiskGrid, y: &VectorField, k: usize) -> f64 {
    derivative_energies(grid, y, k).iter().sum::<f64>().sqrt()
}

pub fn sobolev_norm_scalar(grid: &DiskGrid, f: &ScalarField, k: usize) -> f64 {
    let v = VectorField::new(f.clone(), grid.zeros());
    sobolev_norm(grid, &v, k)
}

/// Per-wavenumber Neumann solver realising the Helmholtz–Leray projector.
#[derive(Clone, Debug)]
pub struct HelmholtzProjector {
    /// Factorised Neumann operators for each spectral slot's wavenumber (index by m).
    solvers: Vec<NeumannSolver>,
}

#[derive(Clone, Debug)]
enum NeumannSolver {
    Lu(LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    /// Singular (m = 0): least-squares through the pseudo-inverse.
    Pinv(DMatrix<f64>),
}

impl HelmholtzProjector {
    pub fn new(grid: &DiskGrid) -> Result<Self> {
        let nr = grid.n_radial();
        let bnd = grid.boundary_ring();
        let mut solvers = Vec::new();
        for m in 0..=grid.n_angular_modes() + 1 {
            let mut a = grid.radial_laplacian(m);
            let (d1, _) = grid.radial_mode_operators(m);
            for l in 0..nr {
                a[(bnd, l)] = d1[(bnd, l)];
            }
            if m == 0 {
                let pinv = a
                    .pseudo_inverse(1e-10)
                    .map_err(|e| Error::Conditioning(format!("Neumann pseudo-inverse: {e}")))?;
                solvers.push(NeumannSolver::Pinv(pinv));
            } else {
                solvers.push(NeumannSolver::Lu(a.lu()));
            }
        }
        Ok(HelmholtzProjector { solvers })
    }

    /// Solve `Δφ = g` in O, `∂φ/∂n = h` on Γ, returning the nodal potential.
    pub fn neumann_potential(&self, grid: &DiskGrid, g: &ScalarField, h: &[f64]) -> Result<ScalarField> {
        let bnd = grid.boundary_ring();
        let spec_g = grid.to_spectral(g);
        // Boundary data as a one-ring field, transformed alongside.
        let mut hb = vec![0.0; grid.len()];
        hb[bnd * grid.n_theta()..].copy_from_slice(h);
        let spec_h = grid.to_spectral(&ScalarField::from_values(hb));
        let mut out = vec![0.0; grid.len()];
        for (m, slot) in grid.spectral_slots() {
            let mut rhs = grid.spectral_profile(&spec_g, slot);
            rhs[bnd] = spec_h[bnd * grid.n_theta() + slot];
            let sol: DVector<f64> = match &self.solvers[m] {
                NeumannSolver::Lu(lu) => lu
                    .solve(&rhs)
                    .ok_or_else(|| Error::Conditioning(format!("Neumann system singular at m = {m}")))?,
                NeumannSolver::Pinv(p) => p * rhs,
            };
            grid.set_spectral_profile(&mut out, slot, &sol);
        }
        Ok(grid.from_spectral(&out))
    }

    /// `P u`: the divergence-free, tangential part of `u`.
    pub fn project(&self, grid: &DiskGrid, u: &VectorField) -> Result<VectorField> {
        let div = grid.divergence(u);
        let (normal, _) = grid.boundary_components(u);
        let phi = self.neumann_potential(grid, &div, &normal)?;
        Ok(u - &grid.gradient(&phi))
    }
}

/// One-shot Helmholtz projection; build a [`HelmholtzProjector`] to reuse factorizations.
pub fn helmholtz_project(grid: &DiskGrid, u: &VectorField) -> Result<VectorField> {
    HelmholtzProjector::new(grid)?.project(grid, u)
}

/// `(max_Γ |y·n|, max_Γ |curl y − (2k − γ) y·τ|)`
pub fn navier_residuals(grid: &DiskGrid, y: &VectorField, p: &PhysicalParams) -> (f64, f64) {
    navier_residuals_with_gamma(grid, y, p.gamma)
}

pub fn navier_residuals_with_gamma(grid: &DiskGrid, y: &VectorField, gamma: f64) -> (f64, f64) {
    let (normal, tangent) = grid.boundary_components(y);
    let curl = grid.curl(y);
    let cb = grid.boundary_values(&curl);
    let g = 2.0 * grid.curvature() - gamma;
    let r1 = normal.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let r2 = cb
        .iter()
        .zip(&tangent)
        .fold(0.0_f64, |m, (c, t)| m.max((c - g * t).abs()));
    (r1, r2)
}

/// Every norm of `y` at once.
pub fn norms(
    grid: &DiskGrid,
    projector: &HelmholtzProjector,
    y: &VectorField,
    p: &PhysicalParams,
) -> Result<NormReport> {
    let e = derivative_energies(grid, y, 3);
    let v = norm_v(grid, y, p);
    let cu = curl_upsilon(grid, y, p);
    let wt = (v * v + grid.inner(&cu, &cu)).max(0.0).sqrt();
    let pu = projector.project(grid, &upsilon(grid, y, p))?;
    Ok(NormReport {
        l2: e[0].sqrt(),
        v,
        wtilde: wt,
        w: v + grid.l2_norm(&pu),
        h1: (e[0] + e[1]).sqrt(),
        h2: (e[0] + e[1] + e[2]).sqrt(),
        h3: e.iter().sum::<f64>().sqrt(),
    })
}

/// `‖h‖_B = Σ ‖hᵏ‖_B` for a multi-channel field, given per-channel norms.
pub fn channel_sum_norm(channel_norms: &[f64]) -> f64 {
    channel_norms.iter().sum()
}

/// `|(h, v)_B| = (Σ (hᵏ, v)_B²)^{1/2}`, given per-channel pairings.
pub fn pairing_modulus(pairings: &[f64]) -> f64 {
    pairings.iter().map(|p| p * p).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;
    use crate::trial::{random_polynomial, random_polynomial_vector, TrialSpace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn setup() -> (DiskGrid, PhysicalParams) {
        (build_grid(16, 8).unwrap(), PhysicalParams::new(0.5, 0.8, 1.3).unwrap())
    }

    #[test]
    fn params_must_be_positive() {
        assert!(PhysicalParams::new(1.0, 1.0, 0.0).is_err());
        assert!(PhysicalParams::new(-1.0, 1.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn upsilon_leaves_linear_fields_alone() {
        let (g, p) = setup();
        let rot = g.vector_from_fn(|_, y| -y, |x, _| x);
        assert!((&upsilon(&g, &rot, &p) - &rot).max_abs() < 1e-10);
        let y = g.grad_perp(&g.field_from_fn(|x, y| 1.0 - x * x - y * y));
        assert!((&upsilon(&g, &y, &p) - &y).max_abs() < 1e-8);
    }

    #[test]
    fn upsilon_matches_finite_differences() {
        let (g, p) = setup();
        // ψ = (1 − r²)², y = ∇^⊥ψ = (4 x2 (1 − r²), −4 x1 (1 − r²))
        let psi = |x: f64, y: f64| (1.0 - x * x - y * y).powi(2);
        let y = g.grad_perp(&g.field_from_fn(psi));
        let ups = upsilon(&g, &y, &p);
        let h = 1e-3;
        let comp = |x: f64, yy: f64, c: usize| {
            let r2 = 1.0 - x * x - yy * yy;
            if c == 0 {
                4.0 * yy * r2
            } else {
                -4.0 * x * r2
            }
        };
        for (i, &r) in g.radial_nodes().iter().enumerate().step_by(3) {
            for (k, &t) in g.thetas().iter().enumerate().step_by(4) {
                let (x, yy) = (r * t.cos(), r * t.sin());
                for c in 0..2 {
                    let lap = (comp(x + h, yy, c) + comp(x - h, yy, c) + comp(x, yy + h, c)
                        + comp(x, yy - h, c)
                        - 4.0 * comp(x, yy, c))
                        / (h * h);
                    let expected = comp(x, yy, c) - p.alpha * lap;
                    let got = if c == 0 { &ups.x1 } else { &ups.x2 }.values()[g.index(i, k)];
                    assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
                }
            }
        }
    }

    #[test]
    fn inner_products_of_rigid_rotation() {
        let (g, p) = setup();
        let rot = g.vector_from_fn(|_, y| -y, |x, _| x);
        let v = inner_v(&g, &rot, &rot, &p);
        assert!((v - (PI / 2.0 + 2.0 * PI * p.alpha * p.gamma)).abs() < 1e-10);
        let wt = inner_wtilde(&g, &rot, &rot, &p);
        assert!((wt - (4.0 * PI + PI / 2.0 + 2.0 * PI * p.alpha * p.gamma)).abs() < 1e-9);
        let zero = g.zero_vector();
        assert_eq!(inner_v(&g, &zero, &zero, &p), 0.0);
        assert_eq!(inner_wtilde(&g, &zero, &zero, &p), 0.0);
    }

    #[test]
    fn inner_products_symmetric_and_ordered() {
        let (g, p) = setup();
        let space = TrialSpace::new(&g, p.gamma, 10, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let y = space.random_field(&g, &mut rng);
            let z = space.random_field(&g, &mut rng);
            let a = inner_v(&g, &y, &z, &p);
            let b = inner_v(&g, &z, &y, &p);
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300));
            let vv = inner_v(&g, &y, &y, &p);
            assert!(vv >= g.inner_vec(&y, &y));
            let ww = inner_wtilde(&g, &y, &y, &p);
            let cu = curl_upsilon(&g, &y, &p);
            assert!((ww - vv - g.inner(&cu, &cu)).abs() <= 1e-10 * ww);
        }
    }

    #[test]
    fn integration_by_parts_on_trial_space() {
        let (g, p) = setup();
        let space = TrialSpace::new(&g, p.gamma, 10, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let y = space.random_field(&g, &mut rng);
            // Any field tangent to Γ: a bubble times a free field.
            let bubble = g.field_from_fn(|x, y| 1.0 - x * x - y * y);
            let free = random_polynomial_vector(&g, &mut rng, 6);
            let z = VectorField::new(bubble.mul(&free.x1), bubble.mul(&free.x2));
            let lhs = -g.inner_vec(&g.vector_laplacian(&y), &z);
            let rhs = p.gamma * g.boundary_inner_vec(&y, &z) + 2.0 * deformation_inner(&g, &y, &z);
            assert!((lhs - rhs).abs() < 1e-8 * (1.0 + lhs.abs()), "{lhs} {rhs}");
        }
    }

    #[test]
    fn helmholtz_examples() {
        let (g, _) = setup();
        let proj = HelmholtzProjector::new(&g).unwrap();
        let grad = g.vector_from_fn(|x, _| x, |_, y| y);
        assert!(proj.project(&g, &grad).unwrap().max_abs() < 1e-8);
        let rot = g.vector_from_fn(|_, y| -y, |x, _| x);
        assert!((&proj.project(&g, &rot).unwrap() - &rot).max_abs() < 1e-8);
        let mix = &rot + &grad.scale(0.7);
        assert!((&proj.project(&g, &mix).unwrap() - &rot).max_abs() < 1e-8);
    }

    #[test]
    fn helmholtz_properties() {
        let (g, _) = setup();
        let proj = HelmholtzProjector::new(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let u = random_polynomial_vector(&g, &mut rng, 6);
            let pu = proj.project(&g, &u).unwrap();
            let scale = u.max_abs();
            assert!(g.divergence(&pu).max_abs() < 1e-8 * scale);
            let (normal, _) = g.boundary_components(&pu);
            assert!(normal.iter().all(|n| n.abs() < 1e-8 * scale));
            assert!(g.curl(&(&u - &pu)).max_abs() < 1e-8 * scale);
            let ppu = proj.project(&g, &pu).unwrap();
            assert!((&ppu - &pu).max_abs() < 1e-8 * scale);
            let phi = random_polynomial(&g, &mut rng, 6);
            assert!(g.inner_vec(&pu, &g.gradient(&phi)).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn navier_residual_examples() {
        let g = build_grid(16, 8).unwrap();
        let rot = g.vector_from_fn(|_, y| -y, |x, _| x);
        let (a, b) = navier_residuals_with_gamma(&g, &rot, 0.0);
        assert!(a < 1e-12 && b < 1e-10);
        let y = g.grad_perp(&g.field_from_fn(|x, y| 1.0 - x * x - y * y));
        let (a, b) = navier_residuals_with_gamma(&g, &y, 0.0);
        assert!(a < 1e-10 && b < 1e-10);
        let (_, b) = navier_residuals_with_gamma(&g, &y, 1.0);
        assert!((b - 2.0).abs() < 1e-10);
    }

    #[test]
    fn norm_examples() {
        let (g, p) = setup();
        let proj = HelmholtzProjector::new(&g).unwrap();
        let z = norms(&g, &proj, &g.zero_vector(), &p).unwrap();
        assert_eq!(z.l2 + z.v + z.wtilde + z.w + z.h1 + z.h2 + z.h3, 0.0);
        let rot = g.vector_from_fn(|_, y| -y, |x, _| x);
        let n = norms(&g, &proj, &rot, &p).unwrap();
        assert!((n.w - n.v - (PI / 2.0).sqrt()).abs() < 1e-8);
        assert!(n.v >= n.l2 && n.wtilde >= n.v);
        assert!(n.h1 >= n.l2 && n.h2 >= n.h1 && n.h3 >= n.h2);
    }

    #[test]
    fn sobolev_norm_of_linear_field() {
        let (g, _) = setup();
        // y = (x1, 0): ‖y‖² = π/4, ‖∂₁y₁‖² = π
        let y = g.vector_from_fn(|x, _| x, |_, _| 0.0);
        assert!((sobolev_norm(&g, &y, 0).powi(2) - PI / 4.0).abs() < 1e-10);
        assert!((sobolev_norm(&g, &y, 3).powi(2) - (PI / 4.0 + PI)).abs() < 1e-10);
    }

    #[test]
    fn multi_channel_norms() {
        assert_eq!(channel_sum_norm(&[3.0, 4.0]), 7.0);
        assert_eq!(pairing_modulus(&[3.0, 4.0]), 5.0);
    }
}
