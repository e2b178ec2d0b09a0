//! Stream-function trial spaces satisfying the Navier-slip conditions.
//!
//! For each Fourier wavenumber `m` the raw radial functions are Zernike
//! polynomials `r^m P_a^{(m,0)}(2r² − 1)`, normalised to 1 at `r = 1`. Two of
//! them are spent to enforce `ψ = 0` and `Δψ = (2k − γ) ∂ψ/∂n` on the unit
//! circle; every remaining raw function is recombined with the first two so
//! that both constraints hold exactly. The velocity `∇^⊥ψ` then lies in `W`.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{DiskGrid, ScalarField, VectorField};

/// Angular factor of a trial function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Cos,
    Sin,
}

/// Jacobi polynomial `P_n^{(a, 0)}(x)`.
fn jacobi(n: usize, a: f64, x: f64) -> f64 {
    let mut p0 = 1.0;
    if n == 0 {
        return p0;
    }
    let mut p1 = (a + 1.0) + (a + 2.0) * (x - 1.0) / 2.0;
    for k in 2..=n {
        let k = k as f64;
        let s = 2.0 * k + a;
        let c1 = 2.0 * k * (k + a) * (s - 2.0);
        let c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a);
        let c3 = 2.0 * (k + a - 1.0) * (k - 1.0) * s;
        let p2 = (c2 * p1 - c3 * p0) / c1;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Zernike radial polynomial of wavenumber `m` and radial index `a`
/// (degree `m + 2a`), scaled to equal 1 at `r = 1`.
pub fn zernike_radial(m: usize, a: usize, r: f64) -> f64 {
    let sign = if a.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * r.powi(m as i32) * jacobi(a, m as f64, 1.0 - 2.0 * r * r)
}

/// One wavenumber's worth of recombined radial profiles.
#[derive(Clone, Debug)]
pub struct TrialBlock {
    pub m: usize,
    /// Radial profiles sampled on the grid's radial nodes.
    pub profiles: Vec<Vec<f64>>,
    /// Polynomial degree of each profile.
    pub degrees: Vec<usize>,
}

impl TrialBlock {
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Nodal stream function of profile `j` with the given angular factor.
    pub fn stream_function(&self, grid: &DiskGrid, j: usize, parity: Parity) -> ScalarField {
        let prof = &self.profiles[j];
        let nt = grid.n_theta();
        let m = self.m as f64;
        let ang: Vec<f64> = grid
            .thetas()
            .iter()
            .map(|t| match parity {
                Parity::Cos => (m * t).cos(),
                Parity::Sin => (m * t).sin(),
            })
            .collect();
        let mut v = Vec::with_capacity(grid.len());
        for p in prof {
            v.extend((0..nt).map(|k| p * ang[k]));
        }
        ScalarField::from_values(v)
    }
}

/// Trial space of stream functions of degree `≤ max_degree` and wavenumber
/// `≤ max_mode` satisfying the Navier-slip constraints for friction `gamma`.
#[derive(Clone, Debug)]
pub struct TrialSpace {
    pub gamma: f64,
    pub max_degree: usize,
    pub max_mode: usize,
    pub blocks: Vec<TrialBlock>,
}

impl TrialSpace {
    pub fn new(grid: &DiskGrid, gamma: f64, max_degree: usize, max_mode: usize) -> Result<Self> {
        if max_mode > grid.n_angular_modes() {
            return Err(Error::config(
                "max_mode",
                format!(
                    "wavenumber {max_mode} exceeds the grid's {} angular modes",
                    grid.n_angular_modes()
                ),
            ));
        }
        if max_degree + 1 > 2 * grid.n_radial() {
            return Err(Error::config(
                "max_degree",
                format!("degree {max_degree} is not resolvable on {} rings", grid.n_radial()),
            ));
        }
        let k = grid.curvature();
        let bnd = grid.boundary_ring();
        let mut blocks = Vec::new();
        for m in 0..=max_mode {
            if max_degree < m + 4 {
                break;
            }
            let n_raw = (max_degree - m) / 2 + 1;
            let (d1, d2) = grid.radial_mode_operators(m);
            let raw: Vec<Vec<f64>> = (0..n_raw)
                .map(|a| {
                    grid.radial_nodes()
                        .iter()
                        .map(|&r| zernike_radial(m, a, r))
                        .collect()
                })
                .collect();
            let constraint = |p: &[f64]| -> (f64, f64) {
                let dp: f64 = (0..p.len()).map(|l| d1[(bnd, l)] * p[l]).sum();
                let ddp: f64 = (0..p.len()).map(|l| d2[(bnd, l)] * p[l]).sum();
                let lap = ddp + dp - (m * m) as f64 * p[bnd];
                (p[bnd], lap - (2.0 * k - gamma) * dp)
            };
            let c0 = constraint(&raw[0]);
            let c1 = constraint(&raw[1]);
            let pivot = Matrix2::new(c0.0, c1.0, c0.1, c1.1);
            let lu = pivot.lu();
            if lu.determinant().abs() < 1e-12 {
                return Err(Error::Conditioning(format!(
                    "boundary constraints are degenerate for wavenumber {m} (gamma = {gamma})"
                )));
            }
            let mut profiles = Vec::new();
            let mut degrees = Vec::new();
            for (a, p) in raw.iter().enumerate().skip(2) {
                let c = constraint(p);
                let xy = lu
                    .solve(&Vector2::new(-c.0, -c.1))
                    .ok_or_else(|| Error::Conditioning("constraint pivot".into()))?;
                let prof: Vec<f64> = (0..p.len())
                    .map(|i| p[i] + xy[0] * raw[0][i] + xy[1] * raw[1][i])
                    .collect();
                profiles.push(prof);
                degrees.push(m + 2 * a);
            }
            blocks.push(TrialBlock {
                m,
                profiles,
                degrees,
            });
        }
        Ok(TrialSpace {
            gamma,
            max_degree,
            max_mode,
            blocks,
        })
    }

    /// The largest trial space the grid resolves through third derivatives:
    /// each Cartesian derivative shifts the angular mode by one, so modes above
    /// `M − 3` would pass the Nyquist mode on the way to `curl υ`.
    pub fn for_grid(grid: &DiskGrid, gamma: f64) -> Result<Self> {
        Self::new(grid, gamma, grid.n_radial(), grid.n_angular_modes().saturating_sub(3).max(1))
    }

    /// Total dimension counting both angular factors for `m ≥ 1`.
    pub fn dimension(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| if b.m == 0 { b.len() } else { 2 * b.len() })
            .sum()
    }

    /// Random stream function in the trial space with coefficients decaying in
    /// wavenumber and degree.
    pub fn random_stream_function<R: Rng + ?Sized>(&self, grid: &DiskGrid, rng: &mut R) -> ScalarField {
        let mut psi = grid.zeros();
        for block in &self.blocks {
            let parities: &[Parity] = if block.m == 0 {
                &[Parity::Cos]
            } else {
                &[Parity::Cos, Parity::Sin]
            };
            for &parity in parities {
                for j in 0..block.len() {
                    let z: f64 = rng.sample(StandardNormal);
                    let decay = 1.0 / (1.0 + (block.m + j) as f64).powi(2);
                    psi.axpy(z * decay, &block.stream_function(grid, j, parity));
                }
            }
        }
        psi
    }

    /// Random velocity `∇^⊥ψ` in the trial space.
    pub fn random_field<R: Rng + ?Sized>(&self, grid: &DiskGrid, rng: &mut R) -> VectorField {
        grid.grad_perp(&self.random_stream_function(grid, rng))
    }
}

/// Random smooth scalar polynomial of total degree `≤ degree` with no boundary
/// conditions imposed.
pub fn random_polynomial<R: Rng + ?Sized>(grid: &DiskGrid, rng: &mut R, degree: usize) -> ScalarField {
    let mut f = grid.zeros();
    let max_m = degree.min(grid.n_angular_modes());
    for m in 0..=max_m {
        for a in 0..=(degree - m) / 2 {
            let parities: &[Parity] = if m == 0 {
                &[Parity::Cos]
            } else {
                &[Parity::Cos, Parity::Sin]
            };
            for &parity in parities {
                let z: f64 = rng.sample(StandardNormal);
                let decay = 1.0 / (1.0 + (m + a) as f64).powi(2);
                let mf = m as f64;
                let g = grid.field_from_polar(|r, t| {
                    let ang = match parity {
                        Parity::Cos => (mf * t).cos(),
                        Parity::Sin => (mf * t).sin(),
                    };
                    zernike_radial(m, a, r) * ang
                });
                f.axpy(z * decay, &g);
            }
        }
    }
    f
}

/// Random smooth vector polynomial (unconstrained).
pub fn random_polynomial_vector<R: Rng + ?Sized>(
    grid: &DiskGrid,
    rng: &mut R,
    degree: usize,
) -> VectorField {
    let a = random_polynomial(grid, rng, degree);
    let b = random_polynomial(grid, rng, degree);
    VectorField::new(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zernike_matches_closed_forms() {
        // R_2^0 = 2r² − 1, R_4^0 = 6r⁴ − 6r² + 1, R_3^1 = 3r³ − 2r
        for &r in &[0.1, 0.5, 0.9, 1.0] {
            assert!((zernike_radial(0, 1, r) - (2.0 * r * r - 1.0)).abs() < 1e-14);
            assert!((zernike_radial(0, 2, r) - (6.0 * r.powi(4) - 6.0 * r * r + 1.0)).abs() < 1e-13);
            assert!((zernike_radial(1, 1, r) - (3.0 * r.powi(3) - 2.0 * r)).abs() < 1e-13);
        }
    }

    #[test]
    fn trial_functions_satisfy_navier_conditions() {
        let g = build_grid(16, 8).unwrap();
        let gamma = 0.7;
        let space = TrialSpace::new(&g, gamma, 12, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let y = space.random_field(&g, &mut rng);
            let (normal, tangent) = g.boundary_components(&y);
            let curl = g.curl(&y);
            let cb = g.boundary_values(&curl);
            for k in 0..g.n_theta() {
                assert!(normal[k].abs() < 1e-10);
                assert!((cb[k] - (2.0 - gamma) * tangent[k]).abs() < 1e-8 * (1.0 + cb[k].abs()));
            }
        }
    }

    #[test]
    fn dimension_counts_both_parities() {
        let g = build_grid(24, 12).unwrap();
        let space = TrialSpace::for_grid(&g, 1.0).unwrap();
        assert_eq!(space.max_degree, 24);
        assert_eq!(space.max_mode, 9);
        assert_eq!(space.dimension(), 159);
    }

    #[test]
    fn rejects_unresolvable_spaces() {
        let g = build_grid(8, 4).unwrap();
        assert!(TrialSpace::new(&g, 1.0, 10, 5).is_err());
        assert!(TrialSpace::new(&g, 1.0, 20, 4).is_err());
    }
}
