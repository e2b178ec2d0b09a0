//! V-orthonormal eigenbasis of `(y, e)_W̃ = λ (y, e)_V` on the Navier trial space.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{DiskGrid, ScalarField, VectorField};
use crate::spaces::{curl_upsilon, deformation, PhysicalParams};
use crate::trial::{Parity, TrialSpace};

/// Eigenvalues closer than this (relative) are ordered by mode labels.
const CLUSTER_GAP: f64 = 1e-9;

/// Which trial block and eigenvector a mode came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeLabel {
    /// Angular wavenumber.
    pub m: usize,
    pub parity: Parity,
    /// Position of the eigenvalue within its wavenumber block.
    pub radial_index: usize,
}

#[derive(Clone, Debug)]
pub struct GalerkinBasis {
    pub params: PhysicalParams,
    pub n_radial: usize,
    pub n_angular_modes: usize,
    pub eigenvalues: Vec<f64>,
    pub labels: Vec<ModeLabel>,
    pub streams: Vec<ScalarField>,
    pub modes: Vec<VectorField>,
    pub gram_v: DMatrix<f64>,
    pub gram_wtilde: DMatrix<f64>,
}

/// Pointwise data from which V and W̃ inner products are quadrature sums.
pub(crate) struct InnerData {
    y: VectorField,
    d: (ScalarField, ScalarField, ScalarField),
    w: ScalarField,
}

impl InnerData {
    pub(crate) fn new(grid: &DiskGrid, y: &VectorField, p: &PhysicalParams) -> Self {
        InnerData {
            y: y.clone(),
            d: deformation(grid, y),
            w: curl_upsilon(grid, y, p),
        }
    }

    pub(crate) fn v(&self, grid: &DiskGrid, o: &InnerData, p: &PhysicalParams) -> f64 {
        let dd = grid.inner(&self.d.0, &o.d.0)
            + 2.0 * grid.inner(&self.d.1, &o.d.1)
            + grid.inner(&self.d.2, &o.d.2);
        grid.inner_vec(&self.y, &o.y) + 2.0 * p.alpha * dd + p.alpha * p.gamma * grid.boundary_inner_vec(&self.y, &o.y)
    }

    pub(crate) fn wtilde(&self, grid: &DiskGrid, o: &InnerData, p: &PhysicalParams) -> f64 {
        grid.inner(&self.w, &o.w) + self.v(grid, o, p)
    }
}

struct Candidate {
    lambda: f64,
    label: ModeLabel,
    coeffs: Vec<f64>,
}

fn gram(grid: &DiskGrid, data: &[InnerData], p: &PhysicalParams, wtilde: bool) -> DMatrix<f64> {
    let n = data.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = if wtilde {
                data[i].wtilde(grid, &data[j], p)
            } else {
                data[i].v(grid, &data[j], p)
            };
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

fn order(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    (a.label.m, a.label.parity, a.label.radial_index).cmp(&(b.label.m, b.label.parity, b.label.radial_index))
}

impl GalerkinBasis {
    /// Build the first `n_modes` eigenmodes on the grid's Navier trial space.
    pub fn build(grid: &DiskGrid, params: &PhysicalParams, n_modes: usize) -> Result<Self> {
        params.validate("physics")?;
        let space = TrialSpace::for_grid(grid, params.gamma)?;
        if n_modes == 0 || n_modes > space.dimension() {
            return Err(Error::config(
                "basis.n_modes",
                format!(
                    "must be in 1..={} for this grid (trial dimension), got {n_modes}",
                    space.dimension()
                ),
            ));
        }

        let mut candidates = Vec::new();
        for block in &space.blocks {
            let streams: Vec<ScalarField> = (0..block.len())
                .map(|j| block.stream_function(grid, j, Parity::Cos))
                .collect();
            let data: Vec<InnerData> = streams
                .iter()
                .map(|s| InnerData::new(grid, &grid.grad_perp(s), params))
                .collect();
            let b = gram(grid, &data, params, false);
            let a = gram(grid, &data, params, true);
            let chol = b.cholesky().ok_or_else(|| {
                Error::Conditioning(format!(
                    "V Gram matrix of wavenumber {} is not positive definite",
                    block.m
                ))
            })?;
            let l = chol.l();
            let linv = l
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Conditioning("singular Cholesky factor".into()))?;
            let c = &linv * &a * linv.transpose();
            let c = (&c + c.transpose()) * 0.5;
            let eig = c.symmetric_eigen();
            let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
            idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
            for (rank, &k) in idx.iter().enumerate() {
                let w = eig.eigenvectors.column(k).into_owned();
                let mut x: DVector<f64> = linv.transpose() * w;
                let lead = x.iter().copied().fold(0.0_f64, |best, v| if v.abs() > best.abs() { v } else { best });
                if lead < 0.0 {
                    x = -x;
                }
                let parities: &[Parity] = if block.m == 0 { &[Parity::Cos] } else { &[Parity::Cos, Parity::Sin] };
                for &parity in parities {
                    candidates.push(Candidate {
                        lambda: eig.eigenvalues[k],
                        label: ModeLabel {
                            m: block.m,
                            parity,
                            radial_index: rank,
                        },
                        coeffs: x.iter().copied().collect(),
                    });
                }
            }
        }

        candidates.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then_with(|| order(a, b)));
        let mut start = 0;
        while start < candidates.len() {
            let base = candidates[start].lambda;
            let mut end = start + 1;
            while end < candidates.len() && (candidates[end].lambda - base).abs() <= CLUSTER_GAP * base.abs() {
                end += 1;
            }
            candidates[start..end].sort_by(order);
            start = end;
        }
        candidates.truncate(n_modes);

        let mut streams = Vec::with_capacity(n_modes);
        for cand in &candidates {
            let block = space
                .blocks
                .iter()
                .find(|b| b.m == cand.label.m)
                .expect("candidate block exists");
            let mut s = grid.zeros();
            for (j, &x) in cand.coeffs.iter().enumerate() {
                s.axpy(x, &block.stream_function(grid, j, cand.label.parity));
            }
            streams.push(s);
        }
        Self::from_streams(
            grid,
            params,
            candidates.iter().map(|c| c.lambda).collect(),
            candidates.iter().map(|c| c.label).collect(),
            streams,
        )
    }

    fn from_streams(
        grid: &DiskGrid,
        params: &PhysicalParams,
        eigenvalues: Vec<f64>,
        labels: Vec<ModeLabel>,
        streams: Vec<ScalarField>,
    ) -> Result<Self> {
        let modes: Vec<VectorField> = streams.iter().map(|s| grid.grad_perp(s)).collect();
        let data: Vec<InnerData> = modes.iter().map(|e| InnerData::new(grid, e, params)).collect();
        let gram_v = gram(grid, &data, params, false);
        let gram_wtilde = gram(grid, &data, params, true);
        Ok(GalerkinBasis {
            params: *params,
            n_radial: grid.n_radial(),
            n_angular_modes: grid.n_angular_modes(),
            eigenvalues,
            labels,
            streams,
            modes,
            gram_v,
            gram_wtilde,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// The first `n` modes as a basis of its own.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_modes() {
            return Err(Error::config(
                "n_modes",
                format!("cannot take {n} modes from a basis of {}", self.n_modes()),
            ));
        }
        Ok(GalerkinBasis {
            params: self.params,
            n_radial: self.n_radial,
            n_angular_modes: self.n_angular_modes,
            eigenvalues: self.eigenvalues[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            streams: self.streams[..n].to_vec(),
            modes: self.modes[..n].to_vec(),
            gram_v: self.gram_v.view((0, 0), (n, n)).into_owned(),
            gram_wtilde: self.gram_wtilde.view((0, 0), (n, n)).into_owned(),
        })
    }

    /// `cᵢ = (y, eᵢ)_V`
    pub fn project(&self, grid: &DiskGrid, y: &VectorField) -> Vec<f64> {
        let yd = InnerData::new(grid, y, &self.params);
        self.modes
            .iter()
            .map(|e| {
                let d = deformation(grid, e);
                let dd = grid.inner(&yd.d.0, &d.0) + 2.0 * grid.inner(&yd.d.1, &d.1) + grid.inner(&yd.d.2, &d.2);
                grid.inner_vec(y, e)
                    + 2.0 * self.params.alpha * dd
                    + self.params.alpha * self.params.gamma * grid.boundary_inner_vec(y, e)
            })
            .collect()
    }

    /// `Σ cᵢ eᵢ`
    pub fn reconstruct(&self, grid: &DiskGrid, c: &[f64]) -> Result<VectorField> {
        if c.len() != self.n_modes() {
            return Err(Error::Shape {
                expected: self.n_modes(),
                found: c.len(),
            });
        }
        let mut y = grid.zero_vector();
        for (ci, e) in c.iter().zip(&self.modes) {
            if *ci != 0.0 {
                y.axpy(*ci, e);
            }
        }
        Ok(y)
    }

    /// Stream function `Σ cᵢ ψᵢ` of the reconstructed field.
    pub fn reconstruct_stream(&self, grid: &DiskGrid, c: &[f64]) -> Result<ScalarField> {
        if c.len() != self.n_modes() {
            return Err(Error::Shape {
                expected: self.n_modes(),
                found: c.len(),
            });
        }
        let mut s = grid.zeros();
        for (ci, e) in c.iter().zip(&self.streams) {
            if *ci != 0.0 {
                s.axpy(*ci, e);
            }
        }
        Ok(s)
    }

    /// `ẽᵢ = eᵢ / √λᵢ`, orthonormal in W̃.
    pub fn wtilde_normalized(&self, i: usize) -> VectorField {
        self.modes[i].scale(1.0 / self.eigenvalues[i].sqrt())
    }

    pub fn key(&self) -> CacheKey {
        CacheKey {
            n_radial: self.n_radial,
            n_angular_modes: self.n_angular_modes,
            alpha: self.params.alpha,
            gamma: self.params.gamma,
            n_modes: self.n_modes(),
        }
    }
}

/// Identity of a cached basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    pub n_radial: usize,
    pub n_angular_modes: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub n_modes: usize,
}

impl CacheKey {
    fn stem(&self) -> String {
        format!(
            "basis_{}x{}_a{:016x}_g{:016x}_n{}",
            self.n_radial,
            self.n_angular_modes,
            self.alpha.to_bits(),
            self.gamma.to_bits(),
            self.n_modes
        )
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format: u32,
    key: CacheKey,
    nu: f64,
    labels: Vec<ModeLabel>,
    values: usize,
    sha256: String,
}

const CACHE_FORMAT: u32 = 1;

/// Paths `(data, sidecar)` of a cache entry.
pub fn cache_paths(dir: &Path, key: &CacheKey) -> (PathBuf, PathBuf) {
    let stem = key.stem();
    (dir.join(format!("{stem}.f64")), dir.join(format!("{stem}.json")))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write the basis as flat little-endian `f64` (eigenvalues, then each mode's
/// stream function) with a JSON sidecar carrying the key and a SHA-256.
pub fn save_cache(dir: &Path, basis: &GalerkinBasis) -> Result<()> {
    fs::create_dir_all(dir)?;
    let key = basis.key();
    let mut bytes = Vec::new();
    for v in basis
        .eigenvalues
        .iter()
        .chain(basis.streams.iter().flat_map(|s| s.values().iter()))
    {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let sidecar = Sidecar {
        format: CACHE_FORMAT,
        key,
        nu: basis.params.nu,
        labels: basis.labels.clone(),
        values: bytes.len() / 8,
        sha256: hex(&Sha256::digest(&bytes)),
    };
    let (data_path, meta_path) = cache_paths(dir, &key);
    fs::write(data_path, &bytes)?;
    fs::write(meta_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Load a cached basis; `Ok(None)` when no entry exists for the key.
pub fn load_cache(dir: &Path, grid: &DiskGrid, params: &PhysicalParams, n_modes: usize) -> Result<Option<GalerkinBasis>> {
    let key = CacheKey {
        n_radial: grid.n_radial(),
        n_angular_modes: grid.n_angular_modes(),
        alpha: params.alpha,
        gamma: params.gamma,
        n_modes,
    };
    let (data_path, meta_path) = cache_paths(dir, &key);
    if !data_path.exists() || !meta_path.exists() {
        return Ok(None);
    }
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| Error::Cache(format!("unreadable sidecar {}: {e}", meta_path.display())))?;
    if sidecar.format != CACHE_FORMAT || sidecar.key != key {
        return Err(Error::Cache(format!("sidecar {} does not match the requested key", meta_path.display())));
    }
    let bytes = fs::read(&data_path)?;
    if hex(&Sha256::digest(&bytes)) != sidecar.sha256 {
        return Err(Error::Cache(format!("checksum mismatch in {}", data_path.display())));
    }
    let expected = n_modes * (1 + grid.len());
    if bytes.len() != 8 * expected || sidecar.values != expected || sidecar.labels.len() != n_modes {
        return Err(Error::Cache(format!("{} has the wrong length", data_path.display())));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let eigenvalues = vals[..n_modes].to_vec();
    let streams = vals[n_modes..]
        .chunks_exact(grid.len())
        .map(|c| ScalarField::from_values(c.to_vec()))
        .collect();
    GalerkinBasis::from_streams(grid, params, eigenvalues, sidecar.labels, streams).map(Some)
}

/// Load from the cache when possible, otherwise build and store.
pub fn build_basis_cached(dir: Option<&Path>, grid: &DiskGrid, params: &PhysicalParams, n_modes: usize) -> Result<GalerkinBasis> {
    if let Some(dir) = dir {
        if let Some(b) = load_cache(dir, grid, params, n_modes)? {
            return Ok(b);
        }
        let b = GalerkinBasis::build(grid, params, n_modes)?;
        save_cache(dir, &b)?;
        return Ok(b);
    }
    GalerkinBasis::build(grid, params, n_modes)
}

pub fn build_basis(grid: &DiskGrid, params: &PhysicalParams, n_modes: usize) -> Result<GalerkinBasis> {
    GalerkinBasis::build(grid, params, n_modes)
}
