//! Manifold Gaussian-process map over facet centers.
//!
//! The prior covariance is the geodesic Matérn 3/2 gram matrix. New data is
//! folded in with the Kalman-form update, which for a prior map is
//! algebraically identical to batch GP regression ([`batch_posterior`]).

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{IppError, Result};
use crate::fmt::sig9;
use crate::mesh::GeodesicField;

/// Hyperparameters of the geodesic Matérn 3/2 kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Signal standard deviation, field units.
    pub sigma_f: f64,
    /// Length scale in meters.
    pub length_scale: f64,
    /// Diagonal variance added after PSD repair.
    pub jitter: f64,
}

impl KernelParams {
    /// Parameters with the default jitter of `1e-6·σ_f²`.
    pub fn new(sigma_f: f64, length_scale: f64) -> Self {
        Self {
            sigma_f,
            length_scale,
            jitter: 1e-6 * sigma_f * sigma_f,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_f > 0.0 && self.sigma_f.is_finite()) {
            return Err(IppError::param("sigma_f", "must be positive"));
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(IppError::param("length_scale", "must be positive"));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(IppError::param("jitter", "must be non-negative"));
        }
        Ok(())
    }
}

/// `σ_f²(1 + √3·d/l)·exp(−√3·d/l)`.
pub fn matern32_geodesic(d: f64, params: &KernelParams) -> f64 {
    let r = 3f64.sqrt() * d / params.length_scale;
    params.sigma_f * params.sigma_f * (1.0 + r) * (-r).exp()
}

/// Gaussian map posterior indexed by facet.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    mesh_id: String,
}

impl FieldMap {
    /// Wrap an explicit mean and covariance. The covariance must be square,
    /// match the mean, be symmetric to 1e-9 relative and have a non-negative
    /// diagonal.
    pub fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>, mesh_id: impl Into<String>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(IppError::Dimension {
                expected: n,
                got: cov.nrows(),
            });
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            if cov[(i, i)] < 0.0 {
                return Err(IppError::param("cov", format!("negative variance at {i}")));
            }
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-9 * scale {
                    return Err(IppError::param("cov", format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            mean,
            cov,
            mesh_id: mesh_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn mesh_id(&self) -> &str {
        &self.mesh_id
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.cov[(i, i)]
    }

    /// Same mean and mesh, different covariance (used by the prior ablation).
    pub fn with_cov(&self, cov: DMatrix<f64>) -> Result<Self> {
        Self::from_parts(self.mean.clone(), cov, self.mesh_id.clone())
    }

    /// CSV snapshot: `facet_index,mean,variance`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("facet_index,mean,variance\n");
        for i in 0..self.len() {
            let _ = writeln!(out, "{i},{},{}", sig9(self.mean[i]), sig9(self.cov[(i, i)]));
        }
        out
    }
}

/// Noisy direct observations of a subset of facets.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBatch {
    pub facet_indices: Vec<usize>,
    pub values: Vec<f64>,
    pub noise_vars: Vec<f64>,
}

impl ObservationBatch {
    pub fn new(facet_indices: Vec<usize>, values: Vec<f64>, noise_vars: Vec<f64>) -> Result<Self> {
        if values.len() != facet_indices.len() || noise_vars.len() != facet_indices.len() {
            return Err(IppError::Dimension {
                expected: facet_indices.len(),
                got: values.len().min(noise_vars.len()),
            });
        }
        if let Some(v) = noise_vars.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(IppError::param("noise_vars", format!("must be positive, got {v}")));
        }
        Ok(Self {
            facet_indices,
            values,
            noise_vars,
        })
    }

    pub fn len(&self) -> usize {
        self.facet_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facet_indices.is_empty()
    }

    fn check_range(&self, n: usize) -> Result<()> {
        match self.facet_indices.iter().find(|&&i| i >= n) {
            Some(&i) => Err(IppError::param("facet_indices", format!("index {i} out of range for {n} facets"))),
            None => Ok(()),
        }
    }
}

/// Kernel gram matrix over all facet pairs.
pub fn kernel_gram(geo: &GeodesicField, params: &KernelParams) -> DMatrix<f64> {
    let n = geo.len();
    DMatrix::from_fn(n, n, |i, j| matern32_geodesic(geo.get(i, j), params))
}

/// Clip negative eigenvalues of a symmetric matrix to zero. Returns the
/// repaired matrix and the smallest eigenvalue before clipping.
pub fn clip_to_psd(m: DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let eig = m.clone().symmetric_eigen();
    let min_eig = eig.eigenvalues.min();
    if min_eig >= 0.0 {
        return (m, min_eig);
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    let repaired = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    (symmetrize(repaired), min_eig)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Prior map: constant mean and the PSD-repaired gram matrix plus jitter.
pub fn init_map(geo: &GeodesicField, params: &KernelParams, prior_mean: f64, mesh_id: &str) -> Result<FieldMap> {
    params.validate()?;
    let n = geo.len();
    let (mut cov, min_eig) = clip_to_psd(kernel_gram(geo, params));
    if min_eig < 0.0 {
        log::debug!("kernel gram had min eigenvalue {min_eig:e}; clipped");
    }
    for i in 0..n {
        cov[(i, i)] += params.jitter;
    }
    let var = params.sigma_f * params.sigma_f;
    let mut shifted = cov.clone();
    for i in 0..n {
        shifted[(i, i)] += 0.01 * var;
    }
    if shifted.cholesky().is_none() || cov.iter().any(|v| !v.is_finite()) {
        return Err(IppError::PsdRepair { min_eig });
    }
    FieldMap::from_parts(DVector::from_element(n, prior_mean), cov, mesh_id)
}

/// Factor of the innovation covariance for a set of observed facets.
struct Innovation {
    /// `L⁻¹·H·P`, `m × n`.
    gain_rows: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

fn innovation(cov: &DMatrix<f64>, indices: &[usize], noise_vars: &[f64]) -> Result<Innovation> {
    let m = indices.len();
    let n = cov.nrows();
    let hp = DMatrix::from_fn(m, n, |r, c| cov[(indices[r], c)]);
    let s = DMatrix::from_fn(m, m, |r, c| {
        let v = cov[(indices[r], indices[c])];
        if r == c {
            v + noise_vars[r]
        } else {
            v
        }
    });
    let chol = s
        .cholesky()
        .ok_or_else(|| IppError::Singular("innovation matrix is not positive definite".into()))?;
    let gain_rows = chol.l().solve_lower_triangular(&hp).ok_or_else(|| {
        IppError::Singular("innovation factor is singular".into())
    })?;
    Ok(Innovation { gain_rows, chol })
}

/// Covariance-only Kalman update: `P − P·Hᵀ(HPHᵀ+R)⁻¹·H·P`, symmetrized.
pub fn update_covariance(cov: &DMatrix<f64>, indices: &[usize], noise_vars: &[f64]) -> Result<DMatrix<f64>> {
    if indices.is_empty() {
        return Ok(cov.clone());
    }
    let inn = innovation(cov, indices, noise_vars)?;
    let w = &inn.gain_rows;
    Ok(symmetrize(cov - w.transpose() * w))
}

/// Sequential Bayesian fusion of one observation batch.
pub fn fuse(map: &FieldMap, obs: &ObservationBatch) -> Result<FieldMap> {
    if obs.is_empty() {
        return Ok(map.clone());
    }
    obs.check_range(map.len())?;
    let inn = innovation(&map.cov, &obs.facet_indices, &obs.noise_vars)?;
    let residual = DVector::from_iterator(
        obs.len(),
        obs.facet_indices.iter().zip(&obs.values).map(|(&i, y)| y - map.mean[i]),
    );
    let whitened = inn
        .chol
        .l()
        .solve_lower_triangular(&residual)
        .ok_or_else(|| IppError::Singular("innovation factor is singular".into()))?;
    let w = &inn.gain_rows;
    Ok(FieldMap {
        mean: &map.mean + w.transpose() * whitened,
        cov: symmetrize(&map.cov - w.transpose() * w),
        mesh_id: map.mesh_id.clone(),
    })
}

/// Batch GP regression against a prior map, solved with LU instead of the
/// Cholesky path used by [`fuse`]. The prior covariance plays the role of
/// the kernel gram matrix; this is the verification oracle, not the
/// runtime path.
pub fn batch_posterior(prior: &FieldMap, obs: &ObservationBatch) -> Result<FieldMap> {
    if obs.is_empty() {
        return Err(IppError::param("obs", "batch regression needs at least one observation"));
    }
    obs.check_range(prior.len())?;
    let idx = &obs.facet_indices;
    let m = idx.len();
    let k_xx = DMatrix::from_fn(m, m, |r, c| prior.cov[(idx[r], idx[c])]) + DMatrix::from_diagonal(&DVector::from_column_slice(&obs.noise_vars));
    let k_sx = DMatrix::from_fn(prior.len(), m, |r, c| prior.cov[(r, idx[c])]);
    let resid = DVector::from_iterator(m, idx.iter().zip(&obs.values).map(|(&i, y)| y - prior.mean[i]));
    let lu = k_xx.lu();
    let alpha = lu
        .solve(&resid)
        .ok_or_else(|| IppError::Singular("regression system is singular".into()))?;
    let k_xs_solved = lu
        .solve(&k_sx.transpose())
        .ok_or_else(|| IppError::Singular("regression system is singular".into()))?;
    Ok(FieldMap {
        mean: &prior.mean + &k_sx * alpha,
        cov: symmetrize(&prior.cov - &k_sx * k_xs_solved),
        mesh_id: prior.mesh_id.clone(),
    })
}

pub fn trace_cov(map: &FieldMap) -> f64 {
    map.cov.trace()
}

/// Reduction in covariance trace from fusing a set of hypothetical
/// observations `(facet, noise variance)`, all at once. Repeated facets are
/// merged by adding precisions, which matches fusing them one by one.
pub fn trace_reduction(cov: &DMatrix<f64>, observations: &[(usize, f64)]) -> Result<f64> {
    if observations.is_empty() {
        return Ok(0.0);
    }
    let (indices, noise) = merge_observations(observations);
    let inn = innovation(cov, &indices, &noise)?;
    Ok(inn.gain_rows.norm_squared())
}

/// Collapse repeated facets into one observation whose precision is the sum
/// of the individual precisions. Output is sorted by facet index.
pub fn merge_observations(observations: &[(usize, f64)]) -> (Vec<usize>, Vec<f64>) {
    let mut sorted = observations.to_vec();
    sorted.sort_by_key(|o| o.0);
    let mut indices: Vec<usize> = Vec::with_capacity(sorted.len());
    let mut precision: Vec<f64> = Vec::with_capacity(sorted.len());
    for (f, r) in sorted {
        if indices.last() == Some(&f) {
            *precision.last_mut().expect("paired") += 1.0 / r;
        } else {
            indices.push(f);
            precision.push(1.0 / r);
        }
    }
    (indices, precision.into_iter().map(|p| 1.0 / p).collect())
}
