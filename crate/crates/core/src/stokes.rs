//! Modified Stokes problem `h − αΔh + ∇p = f`, `div h = 0`, Navier slip on Γ.
//!
//! Taking the curl turns the problem into a coupled stream-function/vorticity
//! system for `h = ∇^⊥φ`, `u = Δφ`:
//!
//! ```text
//! Δφ = u,             φ = 0 on Γ
//! u − αΔu = curl f,   u = (2k − γ) ∂φ/∂n on Γ
//! ```
//!
//! which decouples over Fourier modes. Each mode is one bordered linear
//! system of size `2 n_radial`, factorized once.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::geometry::{DiskGrid, ScalarField, VectorField};
use crate::spaces::PhysicalParams;

/// Largest accepted condition-number estimate of a per-mode system.
const MAX_CONDITION: f64 = 1e13;

#[derive(Clone, Debug)]
pub struct StokesSolver {
    params: PhysicalParams,
    n_radial: usize,
    n_theta: usize,
    /// One factorization per wavenumber `0..=M+1`.
    factors: Vec<LU<f64, Dyn, Dyn>>,
}

impl StokesSolver {
    pub fn new(grid: &DiskGrid, params: &PhysicalParams) -> Result<Self> {
        params.validate("physics")?;
        let nr = grid.n_radial();
        let bnd = grid.boundary_ring();
        let slip = 2.0 * grid.curvature() - params.gamma;
        let mut factors = Vec::new();
        for m in 0..=grid.n_angular_modes() + 1 {
            let lap = grid.radial_laplacian(m);
            let (d1, _) = grid.radial_mode_operators(m);
            let mut a = DMatrix::zeros(2 * nr, 2 * nr);
            for i in 0..nr {
                if i == bnd {
                    a[(i, i)] = 1.0;
                    a[(nr + i, nr + i)] = 1.0;
                    for l in 0..nr {
                        a[(nr + i, l)] = -slip * d1[(i, l)];
                    }
                } else {
                    for l in 0..nr {
                        a[(i, l)] = lap[(i, l)];
                        a[(nr + i, nr + l)] = -params.alpha * lap[(i, l)];
                    }
                    a[(i, nr + i)] -= 1.0;
                    a[(nr + i, nr + i)] += 1.0;
                }
            }
            let sv = a.singular_values();
            let (smax, smin) = (sv.max(), sv.min());
            if !(smin > 0.0 && smax / smin < MAX_CONDITION) {
                return Err(Error::Conditioning(format!(
                    "modified Stokes system for wavenumber {m} has condition estimate {:.3e}",
                    smax / smin
                )));
            }
            factors.push(a.lu());
        }
        Ok(StokesSolver {
            params: *params,
            n_radial: nr,
            n_theta: grid.n_theta(),
            factors,
        })
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    fn check_grid(&self, grid: &DiskGrid) -> Result<()> {
        let expected = self.n_radial * self.n_theta;
        if grid.len() != expected {
            return Err(Error::Shape {
                expected,
                found: grid.len(),
            });
        }
        Ok(())
    }

    /// Stream function `φ` of the solution for a prescribed `curl f`.
    pub fn stream_from_curl(&self, grid: &DiskGrid, curl_f: &ScalarField) -> Result<ScalarField> {
        self.check_grid(grid)?;
        grid.check(curl_f)?;
        let nr = self.n_radial;
        let bnd = grid.boundary_ring();
        let spec = grid.to_spectral(curl_f);
        let mut out = vec![0.0; grid.len()];
        for (m, slot) in grid.spectral_slots() {
            let g = grid.spectral_profile(&spec, slot);
            let mut rhs = DVector::zeros(2 * nr);
            for i in 0..nr {
                if i != bnd {
                    rhs[nr + i] = g[i];
                }
            }
            let sol = self.factors[m].solve(&rhs).ok_or_else(|| {
                Error::Conditioning(format!("modified Stokes solve failed at wavenumber {m}"))
            })?;
            let phi = DVector::from_fn(nr, |i, _| sol[i]);
            grid.set_spectral_profile(&mut out, slot, &phi);
        }
        Ok(grid.from_spectral(&out))
    }

    /// Stream function `φ` with `h = ∇^⊥φ`.
    pub fn solve_stream(&self, grid: &DiskGrid, f: &VectorField) -> Result<ScalarField> {
        self.stream_from_curl(grid, &grid.curl(f))
    }

    /// The velocity `h`; the pressure is not recovered.
    pub fn solve(&self, grid: &DiskGrid, f: &VectorField) -> Result<VectorField> {
        Ok(grid.grad_perp(&self.solve_stream(grid, f)?))
    }
}

/// One-shot solve; build a [`StokesSolver`] to reuse its factorizations.
pub fn solve_modified_stokes(
    grid: &DiskGrid,
    f: &VectorField,
    params: &PhysicalParams,
) -> Result<VectorField> {
    StokesSolver::new(grid, params)?.solve(grid, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;
    use crate::spaces::{inner_v, navier_residuals, upsilon, HelmholtzProjector};
    use crate::trial::{random_polynomial_vector, TrialSpace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (DiskGrid, PhysicalParams, StokesSolver) {
        let g = build_grid(20, 10).unwrap();
        let p = PhysicalParams::new(0.5, 0.6, 1.4).unwrap();
        let s = StokesSolver::new(&g, &p).unwrap();
        (g, p, s)
    }

    fn rel(a: &VectorField, b: &VectorField) -> f64 {
        (a - b).max_abs() / b.max_abs().max(1e-300)
    }

    #[test]
    fn inverts_upsilon_on_trial_fields() {
        let (g, p, s) = setup();
        let space = TrialSpace::new(&g, p.gamma, 12, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let y = space.random_field(&g, &mut rng);
            let h = s.solve(&g, &upsilon(&g, &y, &p)).unwrap();
            assert!(rel(&h, &y) < 1e-7, "{}", rel(&h, &y));
        }
    }

    #[test]
    fn gradients_are_absorbed() {
        let (g, _, s) = setup();
        let grad = g.vector_from_fn(|x, _| x, |_, y| y);
        assert!(s.solve(&g, &grad).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn residual_and_boundary_conditions() {
        let (g, p, s) = setup();
        let proj = HelmholtzProjector::new(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..3 {
            let f = random_polynomial_vector(&g, &mut rng, 6);
            let h = s.solve(&g, &f).unwrap();
            let resid = &upsilon(&g, &h, &p) - &f;
            let pr = proj.project(&g, &resid).unwrap();
            let fnorm = g.l2_norm(&f);
            assert!(g.l2_norm(&pr) < 1e-7 * fnorm, "{}", g.l2_norm(&pr) / fnorm);
            let (a, b) = navier_residuals(&g, &h, &p);
            assert!(a < 1e-8 * fnorm && b < 1e-8 * fnorm.max(1.0), "{a} {b}");
            let energy = inner_v(&g, &h, &h, &p);
            let work = g.inner_vec(&f, &h);
            assert!((energy - work).abs() < 1e-8 * work.abs());
        }
    }

    #[test]
    fn linear_in_data() {
        let (g, _, s) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f1 = random_polynomial_vector(&g, &mut rng, 5);
        let f2 = random_polynomial_vector(&g, &mut rng, 5);
        let mut comb = f1.scale(2.0);
        comb.axpy(-0.5, &f2);
        let lhs = s.solve(&g, &comb).unwrap();
        let mut rhs = s.solve(&g, &f1).unwrap().scale(2.0);
        rhs.axpy(-0.5, &s.solve(&g, &f2).unwrap());
        assert!(rel(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn rejects_foreign_grid() {
        let (_, _, s) = setup();
        let other = build_grid(8, 4).unwrap();
        assert!(matches!(
            s.solve(&other, &other.zero_vector()),
            Err(Error::Shape { .. })
        ));
    }
}
