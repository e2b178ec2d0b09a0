//! Observed constants of the norm equivalences and Stokes regularity bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::DiskGrid;
use crate::nonlinear::{rm2_probe, Rm2Report};
use crate::spaces::{curl_upsilon, deformation_inner, sobolev_norm, upsilon, HelmholtzProjector, PhysicalParams};
use crate::stokes::StokesSolver;
use crate::trial::{random_polynomial_vector, TrialSpace};

/// Largest ratio over the sample for each bound; all should stay finite and
/// move by less than 2× when the grid is refined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub samples: usize,
    pub seed: u64,
    /// ‖y‖_H1 / (‖Dy‖₂ + ‖y‖₂)
    pub korn: f64,
    /// ‖υ(y) − Pυ(y)‖₂ / ‖y‖_H1
    pub sigma_psigma_l2: f64,
    /// ‖υ(y) − Pυ(y)‖_H1 / ‖y‖_H2
    pub sigma_psigma_h1: f64,
    /// ‖y‖_H2 / (‖Pυ(y)‖₂ + ‖y‖_H1)
    pub non_lin_h2: f64,
    /// ‖y‖_H3 / (‖curl υ(y)‖₂ + ‖y‖_H1)
    pub non_lin_h3: f64,
    /// ‖h‖_H2 / ‖f‖₂ for the modified Stokes solution h
    pub stokes_h2: f64,
    /// ‖h‖_H3 / ‖f‖_H1
    pub stokes_h3: f64,
    pub rm2: Rm2Report,
}

/// Radial degree and angular mode of the fixed probe trial space; independent
/// of the grid so refinement compares the same fields.
pub const PROBE_DEGREE: usize = 10;
pub const PROBE_MODE: usize = 5;
/// Degree of the random Stokes data.
pub const PROBE_DATA_DEGREE: usize = 6;

pub fn probe_space(grid: &DiskGrid, p: &PhysicalParams) -> Result<TrialSpace> {
    TrialSpace::new(grid, p.gamma, PROBE_DEGREE, PROBE_MODE)
}

pub fn observed_constants(grid: &DiskGrid, p: &PhysicalParams, samples: usize, seed: u64) -> Result<ProbeReport> {
    let space = probe_space(grid, p)?;
    let proj = HelmholtzProjector::new(grid)?;
    let stokes = StokesSolver::new(grid, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = ProbeReport {
        samples,
        seed,
        korn: 0.0,
        sigma_psigma_l2: 0.0,
        sigma_psigma_h1: 0.0,
        non_lin_h2: 0.0,
        non_lin_h3: 0.0,
        stokes_h2: 0.0,
        stokes_h3: 0.0,
        rm2: rm2_probe(samples, seed ^ 0x2, grid, &space, p),
    };
    for _ in 0..samples {
        let y = space.random_field(grid, &mut rng);
        let h: Vec<f64> = (0..=3).map(|k| sobolev_norm(grid, &y, k)).collect();
        if h[1] == 0.0 {
            continue;
        }
        let def = deformation_inner(grid, &y, &y).max(0.0).sqrt();
        r.korn = r.korn.max(h[1] / (def + h[0]));
        let u = upsilon(grid, &y, p);
        let pu = proj.project(grid, &u)?;
        let gap = &u - &pu;
        r.sigma_psigma_l2 = r.sigma_psigma_l2.max(grid.l2_norm(&gap) / h[1]);
        r.sigma_psigma_h1 = r.sigma_psigma_h1.max(sobolev_norm(grid, &gap, 1) / h[2]);
        r.non_lin_h2 = r.non_lin_h2.max(h[2] / (grid.l2_norm(&pu) + h[1]));
        let omega = curl_upsilon(grid, &y, p);
        r.non_lin_h3 = r.non_lin_h3.max(h[3] / (grid.l2_norm_scalar(&omega) + h[1]));

        let f = random_polynomial_vector(grid, &mut rng, PROBE_DATA_DEGREE);
        let sol = stokes.solve(grid, &f)?;
        r.stokes_h2 = r.stokes_h2.max(sobolev_norm(grid, &sol, 2) / grid.l2_norm(&f));
        r.stokes_h3 = r.stokes_h3.max(sobolev_norm(grid, &sol, 3) / sobolev_norm(grid, &f, 1));
    }
    Ok(r)
}

impl ProbeReport {
    pub fn ratios(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("korn", self.korn),
            ("sigma_psigma_l2", self.sigma_psigma_l2),
            ("sigma_psigma_h1", self.sigma_psigma_h1),
            ("non_lin_h2", self.non_lin_h2),
            ("non_lin_h3", self.non_lin_h3),
            ("stokes_h2", self.stokes_h2),
            ("stokes_h3", self.stokes_h3),
            ("rm2_y3_z1_phi3", self.rm2.ratio_y3_z1_phi3),
            ("rm2_y1_z3_phi3", self.rm2.ratio_y1_z3_phi3),
            ("rm2_y1sq_z3", self.rm2.ratio_y1sq_z3),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;

    #[test]
    fn ratios_finite_and_ordered() {
        let g = build_grid(16, 8).unwrap();
        let p = PhysicalParams::new(0.5, 1.0, 1.0).unwrap();
        let r = observed_constants(&g, &p, 8, 1).unwrap();
        for (name, v) in r.ratios() {
            assert!(v.is_finite() && v > 0.0, "{name} = {v}");
        }
        // ‖y‖_H1 ≥ ‖y‖₂ and Korn cannot beat the trivial lower bound 1/2.
        assert!(r.korn >= 0.5);
        assert_eq!(r, observed_constants(&g, &p, 8, 1).unwrap());
    }
}
