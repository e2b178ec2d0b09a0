//! The trilinear form `b` and the second-grade nonlinearity `curl υ(y) × z`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{DiskGrid, ScalarField, VectorField};
use crate::spaces::{curl_upsilon, sobolev_norm, PhysicalParams};
use crate::trial::TrialSpace;

/// `b(φ, z, y) = ∫ Σᵢⱼ φᵢ ∂ᵢzⱼ yⱼ`
pub fn trilinear_b(grid: &DiskGrid, phi: &VectorField, z: &VectorField, y: &VectorField) -> f64 {
    let adv = advect_vector(grid, phi, z);
    grid.inner_vec(&adv, y)
}

/// `(φ·∇) z`
pub fn advect_vector(grid: &DiskGrid, phi: &VectorField, z: &VectorField) -> VectorField {
    VectorField::new(advect_scalar(grid, phi, &z.x1), advect_scalar(grid, phi, &z.x2))
}

/// `(y·∇) w`
pub fn advect_scalar(grid: &DiskGrid, y: &VectorField, w: &ScalarField) -> ScalarField {
    let mut out = y.x1.mul(&grid.d_x1(w));
    out.axpy(1.0, &y.x2.mul(&grid.d_x2(w)));
    out
}

/// `ω × z = (−ω z₂, ω z₁)` for a scalar (out-of-plane) `ω`.
pub fn cross(omega: &ScalarField, z: &VectorField) -> VectorField {
    VectorField::new(-&omega.mul(&z.x2), omega.mul(&z.x1))
}

/// `curl υ(y) × z`
pub fn curl_cross(grid: &DiskGrid, y: &VectorField, z: &VectorField, p: &PhysicalParams) -> VectorField {
    cross(&curl_upsilon(grid, y, p), z)
}

/// `∫ ω (z₁φ₂ − z₂φ₁)` for a precomputed vorticity `ω`.
pub fn vorticity_pairing(grid: &DiskGrid, omega: &ScalarField, z: &VectorField, phi: &VectorField) -> f64 {
    let mut integrand = z.x1.mul(&phi.x2);
    integrand.axpy(-1.0, &z.x2.mul(&phi.x1));
    grid.inner(omega, &integrand)
}

/// `(curl υ(y) × z, φ)` by the pointwise vorticity formula.
pub fn curl_cross_pairing(
    grid: &DiskGrid,
    y: &VectorField,
    z: &VectorField,
    phi: &VectorField,
    p: &PhysicalParams,
) -> f64 {
    vorticity_pairing(grid, &curl_upsilon(grid, y, p), z, phi)
}

/// `b(φ, z, υ(y)) − b(z, φ, υ(y))`, the two-trilinear form of the same pairing.
pub fn curl_cross_pairing_trilinear(
    grid: &DiskGrid,
    y: &VectorField,
    z: &VectorField,
    phi: &VectorField,
    p: &PhysicalParams,
) -> f64 {
    let u = crate::spaces::upsilon(grid, y, p);
    trilinear_b(grid, phi, z, &u) - trilinear_b(grid, z, phi, &u)
}

/// Observed constants of the three trilinear estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rm2Report {
    pub samples: usize,
    pub seed: u64,
    /// max |(curl υ(y)×z, φ)| / (‖y‖_H3 ‖z‖_H1 ‖φ‖_H3)
    pub ratio_y3_z1_phi3: f64,
    /// max |(curl υ(y)×z, φ)| / (‖y‖_H1 ‖z‖_H3 ‖φ‖_H3)
    pub ratio_y1_z3_phi3: f64,
    /// max |(curl υ(y)×z, y)| / (‖y‖²_H1 ‖z‖_H3)
    pub ratio_y1sq_z3: f64,
}

/// Sample random trial triples and report the largest ratio of each estimate.
pub fn rm2_probe(samples: usize, seed: u64, grid: &DiskGrid, space: &TrialSpace, p: &PhysicalParams) -> Rm2Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Rm2Report {
        samples,
        seed,
        ratio_y3_z1_phi3: 0.0,
        ratio_y1_z3_phi3: 0.0,
        ratio_y1sq_z3: 0.0,
    };
    let mut done = 0;
    while done < samples {
        let y = space.random_field(grid, &mut rng);
        let z = space.random_field(grid, &mut rng);
        let phi = space.random_field(grid, &mut rng);
        let (y1, y3) = (sobolev_norm(grid, &y, 1), sobolev_norm(grid, &y, 3));
        let (z1, z3) = (sobolev_norm(grid, &z, 1), sobolev_norm(grid, &z, 3));
        let phi3 = sobolev_norm(grid, &phi, 3);
        if y1 == 0.0 || z1 == 0.0 || phi3 == 0.0 {
            continue;
        }
        let omega = curl_upsilon(grid, &y, p);
        let mixed = vorticity_pairing(grid, &omega, &z, &phi).abs();
        let diag = vorticity_pairing(grid, &omega, &z, &y).abs();
        report.ratio_y3_z1_phi3 = report.ratio_y3_z1_phi3.max(mixed / (y3 * z1 * phi3));
        report.ratio_y1_z3_phi3 = report.ratio_y1_z3_phi3.max(mixed / (y1 * z3 * phi3));
        report.ratio_y1sq_z3 = report.ratio_y1sq_z3.max(diag / (y1 * y1 * z3));
        done += 1;
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;
    use crate::trial::random_polynomial_vector;

    fn setup() -> (DiskGrid, PhysicalParams, TrialSpace) {
        let g = build_grid(16, 10).unwrap();
        let p = PhysicalParams::new(0.5, 0.8, 1.1).unwrap();
        let s = TrialSpace::new(&g, p.gamma, 8, 4).unwrap();
        (g, p, s)
    }

    #[test]
    fn trilinear_closed_form() {
        let (g, _, _) = setup();
        // φ = (−x₂, x₁), z = (x₂, 0), y = (0, x₁): Σ φᵢ ∂ᵢzⱼ yⱼ = φ₂ ∂₂z₁ y₁ = 0
        // since y₁ = 0; swap to y = (x₁, 0): φ₂ · 1 · x₁ = x₁², ∫ = π/4.
        let phi = g.vector_from_fn(|_, y| -y, |x, _| x);
        let z = g.vector_from_fn(|_, y| y, |_, _| 0.0);
        let y0 = g.vector_from_fn(|_, _| 0.0, |x, _| x);
        assert!(trilinear_b(&g, &phi, &z, &y0).abs() < 1e-14);
        let y1 = g.vector_from_fn(|x, _| x, |_, _| 0.0);
        assert!((trilinear_b(&g, &phi, &z, &y1) - std::f64::consts::PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_slots_vanish() {
        let (g, p, s) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = s.random_field(&g, &mut rng);
        let zero = g.zero_vector();
        assert_eq!(trilinear_b(&g, &zero, &y, &y), 0.0);
        assert_eq!(trilinear_b(&g, &y, &zero, &y), 0.0);
        assert_eq!(trilinear_b(&g, &y, &y, &zero), 0.0);
        assert_eq!(curl_cross_pairing(&g, &zero, &y, &y, &p), 0.0);
    }

    #[test]
    fn antisymmetry_and_dual_formula() {
        let (g, p, s) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let phi = s.random_field(&g, &mut rng);
            let y = s.random_field(&g, &mut rng);
            let free = random_polynomial_vector(&g, &mut rng, 5);
            let scale = g.l2_norm(&phi) * sobolev_norm(&g, &free, 1) * sobolev_norm(&g, &y, 1);
            let sum = trilinear_b(&g, &phi, &free, &y) + trilinear_b(&g, &phi, &y, &free);
            assert!(sum.abs() < 1e-8 * scale, "{sum} vs {scale}");
            let z = s.random_field(&g, &mut rng);
            let scale = sobolev_norm(&g, &y, 3) * sobolev_norm(&g, &z, 1) * sobolev_norm(&g, &phi, 1);
            let a = curl_cross_pairing(&g, &y, &z, &phi, &p);
            let b = curl_cross_pairing_trilinear(&g, &y, &z, &phi, &p);
            assert!((a - b).abs() < 1e-7 * scale, "{a} {b} {scale}");
            assert!(curl_cross_pairing(&g, &y, &z, &z, &p).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn curl_of_nonlinearity_is_advection() {
        let (g, p, s) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = s.random_field(&g, &mut rng);
        let omega = curl_upsilon(&g, &y, &p);
        let lhs = g.curl(&cross(&omega, &y));
        let rhs = advect_scalar(&g, &y, &omega);
        assert!((&lhs - &rhs).max_abs() < 1e-7 * rhs.max_abs());
        let e = g.inner(&rhs, &omega);
        assert!(e.abs() < 1e-8 * g.l2_norm_scalar(&rhs) * g.l2_norm_scalar(&omega));
    }

    #[test]
    fn rm2_ratios_are_finite() {
        let (g, p, s) = setup();
        let r = rm2_probe(10, 4, &g, &s, &p);
        for v in [r.ratio_y3_z1_phi3, r.ratio_y1_z3_phi3, r.ratio_y1sq_z3] {
            assert!(v.is_finite() && v >= 0.0);
        }
        assert_eq!(r, rm2_probe(10, 4, &g, &s, &p));
    }
}
