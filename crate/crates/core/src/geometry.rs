//! Polar spectral collocation of the unit disk.
//!
//! The radial direction uses the positive half of a Chebyshev–Lobatto grid on
//! `[-1, 1]` with an even number of points, so no node sits at the pole. A
//! function sampled at `(r, θ)` is continued to `-r` through `(r, θ + π)`, which
//! lets the full-diameter Chebyshev differentiation matrix act on half the
//! data. The angular direction is a periodic Fourier grid of `2M + 2` points.
//!
//! Fields are stored nodally, ring by ring (`index = i_r * n_theta + k`), with
//! radial nodes in increasing order; the outermost ring is the boundary `r = 1`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Which derivative [`DiskGrid::differentiate`] computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Derivative {
    DX1,
    DX2,
    Laplacian,
    Bilaplacian,
}

/// Integration region for [`DiskGrid::integrate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Domain,
    Boundary,
}

/// Real samples of a scalar function at the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(values: Vec<f64>) -> Self {
        ScalarField { values }
    }

    pub fn zeros(len: usize) -> Self {
        ScalarField {
            values: vec![0.0; len],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, a: f64) -> ScalarField {
        ScalarField::from_values(self.values.iter().map(|v| a * v).collect())
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        ScalarField::from_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        ScalarField::from_values(
            self.values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        ScalarField::from_values(
            self.values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scale(-1.0)
    }
}

impl Mul<&ScalarField> for f64 {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        rhs.scale(self)
    }
}

/// A planar vector field stored as Cartesian components on the polar grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub x1: ScalarField,
    pub x2: ScalarField,
}

impl VectorField {
    pub fn new(x1: ScalarField, x2: ScalarField) -> Self {
        VectorField { x1, x2 }
    }

    pub fn zeros(len: usize) -> Self {
        VectorField::new(ScalarField::zeros(len), ScalarField::zeros(len))
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.x1.max_abs().max(self.x2.max_abs())
    }

    pub fn scale(&self, a: f64) -> VectorField {
        VectorField::new(self.x1.scale(a), self.x2.scale(a))
    }

    pub fn axpy(&mut self, a: f64, other: &VectorField) {
        self.x1.axpy(a, &other.x1);
        self.x2.axpy(a, &other.x2);
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &VectorField) -> ScalarField {
        &self.x1.mul(&other.x1) + &self.x2.mul(&other.x2)
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        VectorField::new(&self.x1 + &rhs.x1, &self.x2 + &rhs.x2)
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        VectorField::new(&self.x1 - &rhs.x1, &self.x2 - &rhs.x2)
    }
}

impl Mul<&VectorField> for f64 {
    type Output = VectorField;
    fn mul(self, rhs: &VectorField) -> VectorField {
        rhs.scale(self)
    }
}

/// Polar collocation grid of the unit disk with quadrature and differentiation.
#[derive(Clone, Debug)]
pub struct DiskGrid {
    n_radial: usize,
    n_angular_modes: usize,
    n_theta: usize,
    radial_nodes: Vec<f64>,
    radial_weights: Vec<f64>,
    thetas: Vec<f64>,
    cos_t: Vec<f64>,
    sin_t: Vec<f64>,
    /// d/dr restricted to positive nodes acting on positive nodes (`same`)
    /// and on the mirrored negative nodes (`mirror`), both `n_radial²`, row-major.
    dr_same: Vec<f64>,
    dr_mirror: Vec<f64>,
    /// Same split for d²/dr².
    drr_same: Vec<f64>,
    drr_mirror: Vec<f64>,
    /// Periodic spectral d/dθ, `n_theta²`, row-major.
    dtheta: Vec<f64>,
}

/// Smallest admissible radial node count.
pub const MIN_RADIAL: usize = 4;

/// Chebyshev–Lobatto differentiation matrix on `n` ascending nodes of `[-1, 1]`.
fn chebyshev_matrix(nodes: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let weight = |q: usize| {
        let sign = if q.is_multiple_of(2) { 1.0 } else { -1.0 };
        if q == 0 || q == n - 1 {
            0.5 * sign
        } else {
            sign
        }
    };
    let mut d = DMatrix::zeros(n, n);
    for q in 0..n {
        let mut diag = 0.0;
        for p in 0..n {
            if p != q {
                let v = weight(p) / weight(q) / (nodes[q] - nodes[p]);
                d[(q, p)] = v;
                diag -= v;
            }
        }
        d[(q, q)] = diag;
    }
    d
}

/// `∫₀¹ T_{2a}(r) r dr`.
fn chebyshev_moment(a: usize) -> f64 {
    let n = (2 * a) as i64;
    let s = |k: i64| -> f64 {
        if k == 0 {
            0.0
        } else {
            let c = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            (1.0 - c) / k as f64
        }
    };
    0.25 * (s(n + 2) - s(n - 2))
}

impl DiskGrid {
    /// Build a grid with `n_radial` rings in `(0, 1]` and `2 * n_angular_modes + 2`
    /// angular nodes.
    pub fn new(n_radial: usize, n_angular_modes: usize) -> Result<Self> {
        if n_radial < MIN_RADIAL {
            return Err(Error::config(
                "n_radial",
                format!("must be at least {MIN_RADIAL}, got {n_radial}"),
            ));
        }
        if n_angular_modes < 1 {
            return Err(Error::config("n_angular_modes", "must be at least 1"));
        }
        let nr = n_radial;
        let n_full = 2 * nr;
        let full: Vec<f64> = (0..n_full)
            .map(|q| -(PI * q as f64 / (n_full - 1) as f64).cos())
            .collect();
        let radial_nodes: Vec<f64> = full[nr..].to_vec();

        let d = chebyshev_matrix(&full);
        let d2 = &d * &d;
        let split = |m: &DMatrix<f64>| {
            let mut same = vec![0.0; nr * nr];
            let mut mirror = vec![0.0; nr * nr];
            for i in 0..nr {
                for l in 0..nr {
                    same[i * nr + l] = m[(nr + i, nr + l)];
                    mirror[i * nr + l] = m[(nr + i, nr - 1 - l)];
                }
            }
            (same, mirror)
        };
        let (dr_same, dr_mirror) = split(&d);
        let (drr_same, drr_mirror) = split(&d2);

        // Interpolatory radial weights for ∫₀¹ g(r) r dr, exact on even
        // polynomials of degree ≤ 2 n_radial − 2.
        let mut vander = DMatrix::zeros(nr, nr);
        let mut moments = DVector::zeros(nr);
        for a in 0..nr {
            moments[a] = chebyshev_moment(a);
            for (i, &r) in radial_nodes.iter().enumerate() {
                vander[(a, i)] = (2.0 * a as f64 * r.acos()).cos();
            }
        }
        let radial_weights: Vec<f64> = vander
            .lu()
            .solve(&moments)
            .ok_or_else(|| Error::Conditioning("radial quadrature system is singular".into()))?
            .iter()
            .copied()
            .collect();

        let n_theta = 2 * n_angular_modes + 2;
        let h = 2.0 * PI / n_theta as f64;
        let thetas: Vec<f64> = (0..n_theta).map(|k| h * k as f64).collect();
        let cos_t = thetas.iter().map(|t| t.cos()).collect();
        let sin_t = thetas.iter().map(|t| t.sin()).collect();
        let mut dtheta = vec![0.0; n_theta * n_theta];
        for k in 0..n_theta {
            for q in 0..n_theta {
                if k != q {
                    let diff = k as i64 - q as i64;
                    let sign = if diff.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    dtheta[k * n_theta + q] = 0.5 * sign / (0.5 * diff as f64 * h).tan();
                }
            }
        }

        Ok(DiskGrid {
            n_radial,
            n_angular_modes,
            n_theta,
            radial_nodes,
            radial_weights,
            thetas,
            cos_t,
            sin_t,
            dr_same,
            dr_mirror,
            drr_same,
            drr_mirror,
            dtheta,
        })
    }

    pub fn n_radial(&self) -> usize {
        self.n_radial
    }

    pub fn n_angular_modes(&self) -> usize {
        self.n_angular_modes
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.n_radial * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn radial_nodes(&self) -> &[f64] {
        &self.radial_nodes
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// Boundary curvature; the unit circle has `k = 1`.
    pub fn curvature(&self) -> f64 {
        1.0
    }

    /// Ring index of the boundary `r = 1`.
    pub fn boundary_ring(&self) -> usize {
        self.n_radial - 1
    }

    #[inline]
    pub fn index(&self, ring: usize, k: usize) -> usize {
        ring * self.n_theta + k
    }

    /// Domain quadrature weights including the polar Jacobian.
    pub fn domain_weights(&self) -> Vec<f64> {
        let h = 2.0 * PI / self.n_theta as f64;
        let mut w = Vec::with_capacity(self.len());
        for &rw in &self.radial_weights {
            w.extend(std::iter::repeat_n(rw * h, self.n_theta));
        }
        w
    }

    /// Arc-length weights on the boundary ring.
    pub fn boundary_weights(&self) -> Vec<f64> {
        vec![2.0 * PI / self.n_theta as f64; self.n_theta]
    }

    pub fn radial_weights(&self) -> &[f64] {
        &self.radial_weights
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_t
    }

    pub fn sin_theta(&self) -> &[f64] {
        &self.sin_t
    }

    /// Sample `f(x1, x2)` at every node.
    pub fn field_from_fn(&self, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        self.field_from_polar(|r, t| f(r * t.cos(), r * t.sin()))
    }

    /// Sample `f(r, θ)` at every node.
    pub fn field_from_polar(&self, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let mut v = Vec::with_capacity(self.len());
        for &r in &self.radial_nodes {
            for &t in &self.thetas {
                v.push(f(r, t));
            }
        }
        ScalarField::from_values(v)
    }

    pub fn vector_from_fn(
        &self,
        f1: impl Fn(f64, f64) -> f64,
        f2: impl Fn(f64, f64) -> f64,
    ) -> VectorField {
        VectorField::new(self.field_from_fn(f1), self.field_from_fn(f2))
    }

    pub fn constant(&self, c: f64) -> ScalarField {
        ScalarField::from_values(vec![c; self.len()])
    }

    pub fn zeros(&self) -> ScalarField {
        ScalarField::zeros(self.len())
    }

    pub fn zero_vector(&self) -> VectorField {
        VectorField::zeros(self.len())
    }

    pub fn check(&self, f: &ScalarField) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::Shape {
                expected: self.len(),
                found: f.len(),
            });
        }
        Ok(())
    }

    fn apply_radial(&self, f: &[f64], same: &[f64], mirror: &[f64]) -> Vec<f64> {
        let nr = self.n_radial;
        let nt = self.n_theta;
        let half = nt / 2;
        let mut out = vec![0.0; self.len()];
        for k in 0..nt {
            let km = (k + half) % nt;
            for i in 0..nr {
                let mut acc = 0.0;
                for l in 0..nr {
                    acc += same[i * nr + l] * f[l * nt + k] + mirror[i * nr + l] * f[l * nt + km];
                }
                out[i * nt + k] = acc;
            }
        }
        out
    }

    /// ∂f/∂r at every node.
    pub fn d_r(&self, f: &ScalarField) -> ScalarField {
        ScalarField::from_values(self.apply_radial(&f.values, &self.dr_same, &self.dr_mirror))
    }

    /// ∂²f/∂r² at every node.
    pub fn d_rr(&self, f: &ScalarField) -> ScalarField {
        ScalarField::from_values(self.apply_radial(&f.values, &self.drr_same, &self.drr_mirror))
    }

    /// ∂f/∂θ at every node.
    pub fn d_theta(&self, f: &ScalarField) -> ScalarField {
        let nt = self.n_theta;
        let mut out = vec![0.0; self.len()];
        for i in 0..self.n_radial {
            let ring = &f.values[i * nt..(i + 1) * nt];
            for k in 0..nt {
                let row = &self.dtheta[k * nt..(k + 1) * nt];
                out[i * nt + k] = row.iter().zip(ring).map(|(a, b)| a * b).sum();
            }
        }
        ScalarField::from_values(out)
    }

    fn cartesian(&self, f: &ScalarField, first: bool) -> ScalarField {
        let fr = self.d_r(f);
        let ft = self.d_theta(f);
        let nt = self.n_theta;
        let mut out = vec![0.0; self.len()];
        for (i, &r) in self.radial_nodes.iter().enumerate() {
            for k in 0..nt {
                let idx = i * nt + k;
                let (c, s) = (self.cos_t[k], self.sin_t[k]);
                out[idx] = if first {
                    c * fr.values[idx] - s / r * ft.values[idx]
                } else {
                    s * fr.values[idx] + c / r * ft.values[idx]
                };
            }
        }
        ScalarField::from_values(out)
    }

    pub fn d_x1(&self, f: &ScalarField) -> ScalarField {
        self.cartesian(f, true)
    }

    pub fn d_x2(&self, f: &ScalarField) -> ScalarField {
        self.cartesian(f, false)
    }

    /// Laplacian composed from the Cartesian first-derivative operators.
    pub fn laplacian(&self, f: &ScalarField) -> ScalarField {
        let a = self.d_x1(&self.d_x1(f));
        let b = self.d_x2(&self.d_x2(f));
        &a + &b
    }

    pub fn differentiate(&self, f: &ScalarField, which: Derivative) -> Result<ScalarField> {
        self.check(f)?;
        Ok(match which {
            Derivative::DX1 => self.d_x1(f),
            Derivative::DX2 => self.d_x2(f),
            Derivative::Laplacian => self.laplacian(f),
            Derivative::Bilaplacian => self.laplacian(&self.laplacian(f)),
        })
    }

    pub fn gradient(&self, f: &ScalarField) -> VectorField {
        VectorField::new(self.d_x1(f), self.d_x2(f))
    }

    /// `(-∂f/∂x2, ∂f/∂x1)`: divergence-free, and tangent to Γ when `f = 0` there.
    pub fn grad_perp(&self, f: &ScalarField) -> VectorField {
        VectorField::new(-&self.d_x2(f), self.d_x1(f))
    }

    /// `∂y2/∂x1 − ∂y1/∂x2`
    pub fn curl(&self, y: &VectorField) -> ScalarField {
        &self.d_x1(&y.x2) - &self.d_x2(&y.x1)
    }

    pub fn divergence(&self, y: &VectorField) -> ScalarField {
        &self.d_x1(&y.x1) + &self.d_x2(&y.x2)
    }

    pub fn vector_laplacian(&self, y: &VectorField) -> VectorField {
        VectorField::new(self.laplacian(&y.x1), self.laplacian(&y.x2))
    }

    pub fn integrate(&self, f: &ScalarField, region: Region) -> f64 {
        match region {
            Region::Domain => {
                let h = 2.0 * PI / self.n_theta as f64;
                let nt = self.n_theta;
                let mut total = 0.0;
                for (i, &w) in self.radial_weights.iter().enumerate() {
                    let ring: f64 = f.values[i * nt..(i + 1) * nt].iter().sum();
                    total += w * ring;
                }
                total * h
            }
            Region::Boundary => {
                let h = 2.0 * PI / self.n_theta as f64;
                self.boundary_values(f).iter().sum::<f64>() * h
            }
        }
    }

    /// `∫_O f g`
    pub fn inner(&self, f: &ScalarField, g: &ScalarField) -> f64 {
        self.integrate(&f.mul(g), Region::Domain)
    }

    /// `∫_O y · z`
    pub fn inner_vec(&self, y: &VectorField, z: &VectorField) -> f64 {
        self.inner(&y.x1, &z.x1) + self.inner(&y.x2, &z.x2)
    }

    /// `‖y‖₂`
    pub fn l2_norm(&self, y: &VectorField) -> f64 {
        self.inner_vec(y, y).max(0.0).sqrt()
    }

    pub fn l2_norm_scalar(&self, f: &ScalarField) -> f64 {
        self.inner(f, f).max(0.0).sqrt()
    }

    /// `∫_Γ y · z`
    pub fn boundary_inner_vec(&self, y: &VectorField, z: &VectorField) -> f64 {
        self.integrate(&y.dot(z), Region::Boundary)
    }

    /// Values on the boundary ring, ordered by angle.
    pub fn boundary_values<'a>(&self, f: &'a ScalarField) -> &'a [f64] {
        let b = self.boundary_ring() * self.n_theta;
        &f.values[b..b + self.n_theta]
    }

    /// Normal and tangential components `(y·n, y·τ)` on Γ, with `τ = (−n₂, n₁)`.
    pub fn boundary_components(&self, y: &VectorField) -> (Vec<f64>, Vec<f64>) {
        let y1 = self.boundary_values(&y.x1);
        let y2 = self.boundary_values(&y.x2);
        let mut normal = Vec::with_capacity(self.n_theta);
        let mut tangent = Vec::with_capacity(self.n_theta);
        for k in 0..self.n_theta {
            let (c, s) = (self.cos_t[k], self.sin_t[k]);
            normal.push(c * y1[k] + s * y2[k]);
            tangent.push(-s * y1[k] + c * y2[k]);
        }
        (normal, tangent)
    }

    /// Ring-wise real Fourier coefficients, laid out per ring as
    /// `[a0, a1, b1, …, aM, bM, a_{M+1}]`.
    pub fn to_spectral(&self, f: &ScalarField) -> Vec<f64> {
        let nt = self.n_theta;
        let m_max = self.n_angular_modes;
        let mut out = vec![0.0; self.len()];
        for i in 0..self.n_radial {
            let ring = &f.values[i * nt..(i + 1) * nt];
            let coeffs = &mut out[i * nt..(i + 1) * nt];
            coeffs[0] = ring.iter().sum::<f64>() / nt as f64;
            for m in 1..=m_max {
                let (mut a, mut b) = (0.0, 0.0);
                for (k, v) in ring.iter().enumerate() {
                    let ang = self.thetas[(m * k) % nt];
                    a += v * ang.cos();
                    b += v * ang.sin();
                }
                coeffs[2 * m - 1] = 2.0 * a / nt as f64;
                coeffs[2 * m] = 2.0 * b / nt as f64;
            }
            coeffs[nt - 1] = ring
                .iter()
                .enumerate()
                .map(|(k, v)| if k % 2 == 0 { *v } else { -*v })
                .sum::<f64>()
                / nt as f64;
        }
        out
    }

    /// Inverse of [`DiskGrid::to_spectral`].
    pub fn from_spectral(&self, coeffs: &[f64]) -> ScalarField {
        let nt = self.n_theta;
        let m_max = self.n_angular_modes;
        let mut out = vec![0.0; self.len()];
        for i in 0..self.n_radial {
            let c = &coeffs[i * nt..(i + 1) * nt];
            for k in 0..nt {
                let mut v = c[0];
                for m in 1..=m_max {
                    let ang = self.thetas[(m * k) % nt];
                    v += c[2 * m - 1] * ang.cos() + c[2 * m] * ang.sin();
                }
                v += if k % 2 == 0 { c[nt - 1] } else { -c[nt - 1] };
                out[i * nt + k] = v;
            }
        }
        ScalarField::from_values(out)
    }

    /// Radial first- and second-derivative matrices (`n_radial²`) for a
    /// Fourier mode of wavenumber `m`, whose radial profile has parity `(−1)^m`.
    pub fn radial_mode_operators(&self, m: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let nr = self.n_radial;
        let p = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        let d1 = DMatrix::from_fn(nr, nr, |i, l| {
            self.dr_same[i * nr + l] + p * self.dr_mirror[i * nr + l]
        });
        let d2 = DMatrix::from_fn(nr, nr, |i, l| {
            self.drr_same[i * nr + l] + p * self.drr_mirror[i * nr + l]
        });
        (d1, d2)
    }

    /// Polar Laplacian restricted to Fourier mode `m` on the radial nodes.
    pub fn radial_laplacian(&self, m: usize) -> DMatrix<f64> {
        let (d1, d2) = self.radial_mode_operators(m);
        let nr = self.n_radial;
        DMatrix::from_fn(nr, nr, |i, l| {
            let r = self.radial_nodes[i];
            let mut v = d2[(i, l)] + d1[(i, l)] / r;
            if i == l {
                v -= (m * m) as f64 / (r * r);
            }
            v
        })
    }

    /// Number of `(wavenumber, cos/sin)` slots in the spectral layout.
    pub(crate) fn spectral_slots(&self) -> Vec<(usize, usize)> {
        // (wavenumber, slot index within a ring)
        let mut slots = vec![(0, 0)];
        for m in 1..=self.n_angular_modes {
            slots.push((m, 2 * m - 1));
            slots.push((m, 2 * m));
        }
        slots.push((self.n_angular_modes + 1, self.n_theta - 1));
        slots
    }

    /// Extract the radial profile stored at spectral `slot` across all rings.
    pub(crate) fn spectral_profile(&self, spec: &[f64], slot: usize) -> DVector<f64> {
        DVector::from_fn(self.n_radial, |i, _| spec[i * self.n_theta + slot])
    }

    pub(crate) fn set_spectral_profile(&self, spec: &mut [f64], slot: usize, v: &DVector<f64>) {
        for i in 0..self.n_radial {
            spec[i * self.n_theta + slot] = v[i];
        }
    }
}

/// Convenience constructor mirroring the grid builder.
pub fn build_grid(n_radial: usize, n_angular_modes: usize) -> Result<DiskGrid> {
    DiskGrid::new(n_radial, n_angular_modes)
}
