//! Pseudo-state transformation.
//!
//! Agents estimate `y = G x` with `G = sum_n H_n^T R_n^{-1} H_n`, the summed
//! information matrix. When `G` is singular the component of `x` in its null
//! space still drives `y` through the "null" terms below, which is why the
//! filter carries a state estimate alongside the pseudo-state estimate.

use nalgebra::{DMatrix, DVector};

use crate::block::BlockSparse;
use crate::error::{Error, Result};
use crate::linalg::{block_diag, numerical_rank, pinv, PINV_TOL};
use crate::model::ModelSpec;

#[derive(Debug, Clone)]
pub struct PseudoModel {
    /// Hash of the model this algebra was derived from.
    pub model_hash: String,
    /// `A`.
    pub dynamics: DMatrix<f64>,
    /// `V`.
    pub process_noise: DMatrix<f64>,
    /// Numerical rank of `G`.
    pub rank: usize,
    /// `G`.
    pub info: DMatrix<f64>,
    /// Moore-Penrose pseudo-inverse of `G`.
    pub info_pinv: DMatrix<f64>,
    /// Projector onto the null space of `G`: `I - G^+ G`.
    pub null_proj: DMatrix<f64>,
    /// `G A G^+`, dynamics of the pseudo-state.
    pub pseudo_dynamics: DMatrix<f64>,
    /// `G A (I - G^+ G)`, coupling of unobservable state into the pseudo-state.
    pub null_dynamics: DMatrix<f64>,
    /// Per agent `H_n^T R_n^{-1}`.
    pub obs_weight: Vec<DMatrix<f64>>,
    /// Per agent `H_n^T R_n^{-1} H_n`.
    pub local_info: Vec<DMatrix<f64>>,
    /// Per agent `H_n^T R_n^{-1} H_n G^+`.
    pub pseudo_obs: Vec<DMatrix<f64>>,
    /// Per agent `H_n^T R_n^{-1} H_n (I - G^+ G)`.
    pub null_obs: Vec<DMatrix<f64>>,
    /// Stacked observation maps, `blockdiag(H_n)`.
    pub obs_diag: DMatrix<f64>,
    pub local_info_diag: BlockSparse,
    pub pseudo_obs_diag: BlockSparse,
    pub null_obs_diag: BlockSparse,
}

impl PseudoModel {
    pub fn state_dim(&self) -> usize {
        self.info.nrows()
    }

    pub fn agents(&self) -> usize {
        self.local_info.len()
    }

    /// Whether `G` is invertible, in which case the null terms are exactly zero.
    pub fn full_rank(&self) -> bool {
        self.rank == self.state_dim()
    }
}

pub fn build_pseudo_model(spec: &ModelSpec) -> Result<PseudoModel> {
    spec.check_dimensions()?;
    let m = spec.state_dim();
    let mut obs_weight = Vec::with_capacity(spec.agents());
    for (n, (h, r)) in spec.obs_maps.iter().zip(&spec.obs_noise).enumerate() {
        obs_weight.push(weight(h, r).map_err(|e| match e {
            Error::Model(msg) => Error::Model(format!("agent {n}: {msg}")),
            other => other,
        })?);
    }
    let local_info: Vec<DMatrix<f64>> = obs_weight.iter().zip(&spec.obs_maps).map(|(w, h)| w * h).collect();
    let mut info = DMatrix::zeros(m, m);
    for h in &local_info {
        info += h;
    }
    let info = crate::linalg::symmetrize(&info);
    let info_pinv = crate::linalg::symmetrize(&pinv(&info, PINV_TOL));
    let rank = numerical_rank(&info, PINV_TOL);
    // With invertible G the projector is zero by definition; pin it so the
    // null terms vanish exactly instead of carrying rounding noise.
    let null_proj = if rank == m {
        DMatrix::zeros(m, m)
    } else {
        crate::linalg::symmetrize(&(DMatrix::identity(m, m) - &info_pinv * &info))
    };
    let a = &spec.dynamics;
    let pseudo_dynamics = &info * a * &info_pinv;
    let null_dynamics = &info * a * &null_proj;
    let pseudo_obs: Vec<_> = local_info.iter().map(|h| h * &info_pinv).collect();
    let null_obs: Vec<_> = local_info.iter().map(|h| h * &null_proj).collect();
    Ok(PseudoModel {
        model_hash: spec.hash(),
        dynamics: spec.dynamics.clone(),
        process_noise: spec.process_noise.clone(),
        rank,
        obs_diag: block_diag(&spec.obs_maps),
        local_info_diag: BlockSparse::block_diag(local_info.clone()),
        pseudo_obs_diag: BlockSparse::block_diag(pseudo_obs.clone()),
        null_obs_diag: BlockSparse::block_diag(null_obs.clone()),
        info,
        info_pinv,
        null_proj,
        pseudo_dynamics,
        null_dynamics,
        obs_weight,
        local_info,
        pseudo_obs,
        null_obs,
    })
}

/// `H^T R^{-1}` through a Cholesky factorization of `R`.
fn weight(h: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if r.shape() != (h.nrows(), h.nrows()) {
        return Err(Error::Dimension(format!(
            "noise covariance is {}x{} for {} observations",
            r.nrows(),
            r.ncols(),
            h.nrows()
        )));
    }
    if h.nrows() == 0 {
        return Ok(DMatrix::zeros(h.ncols(), 0));
    }
    let chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Model("observation-noise covariance is not invertible (positive-definite)".into()))?;
    // R^{-1} H, then transpose (R symmetric).
    Ok(chol.solve(h).transpose())
}

/// `H^T R^{-1} z`.
pub fn pseudo_observation(h: &DMatrix<f64>, r: &DMatrix<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
    if z.len() != h.nrows() {
        return Err(Error::Dimension(format!("observation has {} entries, map has {} rows", z.len(), h.nrows())));
    }
    Ok(weight(h, r)? * z)
}

/// `G x`.
pub fn pseudo_state(info: &DMatrix<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    if info.ncols() != x.len() {
        return Err(Error::Dimension(format!("state has {} entries, G is {}x{}", x.len(), info.nrows(), info.ncols())));
    }
    Ok(info * x)
}
