//! Stability of the error dynamics and a certified lower bound on the
//! tracking capacity (the largest `||A||_2` the network can track).
//!
//! The one-step error recursion splits as
//! `eps_{i+1|i} = F_pseudo eps_{i|i-1} + phi_pseudo` and
//! `e_{i+1|i} = F_state e_{i|i-1} + phi_state` with
//! `F_pseudo = (I ⊗ A_pseudo) W`, `F_state = (I ⊗ A) Q`; the forcing terms
//! collect everything else, including cross-coupling between the two errors.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::BlockSparse;
use crate::covgain::{CovarianceState, StepGains};
use crate::error::{Error, Result};
use crate::linalg::{add_ones_kron, pinv, spectral_norm, spectral_radius, sym_eigenvalues, PINV_TOL};
use crate::model::GraphSpectrum;
use crate::pseudo::PseudoModel;

/// Capacity reported when the contraction norm can be driven to (numerical) zero.
pub const CAPACITY_CAP: f64 = 1e12;

/// Contraction norms below this count as zero.
pub const ZERO_NORM: f64 = 1e-12;

/// Above this operator dimension the exact spectral norm is replaced by the
/// bound `sqrt(||W||_1 ||W||_inf)`, which keeps the capacity a lower bound.
pub const EXACT_NORM_MAX_DIM: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub step: usize,
    /// Spectral radius of the pseudo-state error transition.
    pub rho_pseudo: f64,
    /// Spectral radius of the state error transition.
    pub rho_state: f64,
    /// `||I - B_C - B_I D_pseudo||_2`.
    pub contraction_norm: f64,
    /// `||A_pseudo||_2 * contraction_norm`, an upper bound on `rho_pseudo`.
    pub norm_bound: f64,
    /// Spectral norm of the pseudo-state forcing covariance.
    pub pseudo_noise_norm: f64,
    /// Spectral norm of the state forcing covariance.
    pub state_noise_norm: f64,
}

impl StabilityReport {
    pub fn stable(&self) -> bool {
        self.rho_pseudo < 1.0 && self.rho_state < 1.0
    }
}

/// Error-transition operators of one step.
pub struct Transitions {
    /// `W = I - B_C - B_I D_pseudo`.
    pub contraction: BlockSparse,
    /// `Q = I - K (I ⊗ G)`.
    pub state_contraction: BlockSparse,
    pub f_pseudo: BlockSparse,
    pub f_state: BlockSparse,
}

pub fn transitions(gains: &StepGains, pm: &PseudoModel) -> Transitions {
    let nb = gains.agents.len();
    let m = pm.state_dim();
    let w = BlockSparse::identity(nb, m)
        .sub(&gains.consensus_operator())
        .sub(&gains.innovation_operator().mul(&pm.pseudo_obs_diag));
    let k = gains.state_gain_operator();
    let q = BlockSparse::identity(nb, m).sub(&k.mul(&BlockSparse::kron_identity(nb, &pm.info)));
    Transitions {
        f_pseudo: BlockSparse::kron_identity(nb, &pm.pseudo_dynamics).mul(&w),
        f_state: BlockSparse::kron_identity(nb, &pm.dynamics).mul(&q),
        contraction: w,
        state_contraction: q,
    }
}

/// Forcing covariances `(Phi_pseudo, Phi_state)` of step `cov.step`.
pub fn forcing_covariances(
    gains: &StepGains,
    pm: &PseudoModel,
    cov: &CovarianceState,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let filt = cov
        .filt
        .as_ref()
        .ok_or_else(|| Error::Sequencing(format!("step {}: forcing covariances need the filter stage", cov.step)))?;
    let nb = gains.agents.len();
    let t = transitions(gains, pm);
    let bi = gains.innovation_operator();
    let k = gains.state_gain_operator();
    let a_pseudo = BlockSparse::kron_identity(nb, &pm.pseudo_dynamics);
    let a_null = BlockSparse::kron_identity(nb, &pm.null_dynamics);
    let bi_null = bi.mul(&pm.null_obs_diag);

    // Coefficients of e, eps and the observation noise in phi_pseudo.
    let f1 = a_null
        .mul(&t.state_contraction.sub(&k.mul(&bi_null)))
        .sub(&a_pseudo.mul(&bi_null));
    let f2 = a_null.mul(&k).mul(&t.contraction);
    let f3 = a_pseudo.add(&a_null.mul(&k)).mul(&bi);

    let pred = &cov.pred;
    let cross = f2.dense_mul_t(&f1.mul_dense(&pred.pi));
    let mut phi_pseudo = f1.congruence(&pred.sigma)
        + f2.congruence(&pred.p)
        + f3.mul(&pm.local_info_diag).mul(&f3.transpose()).to_dense()
        + &cross
        + cross.transpose();
    add_ones_kron(&mut phi_pseudo, &(&pm.info * &pm.process_noise * &pm.info));

    let ak = BlockSparse::kron_identity(nb, &pm.dynamics).mul(&k);
    let mut phi_state = ak.congruence(&filt.p);
    add_ones_kron(&mut phi_state, &pm.process_noise);
    Ok((crate::linalg::symmetrize(&phi_pseudo), crate::linalg::symmetrize(&phi_state)))
}

/// Spectral radii of the error transitions and norms of the forcing terms.
pub fn stability_check(gains: &StepGains, pm: &PseudoModel, cov: &CovarianceState) -> Result<StabilityReport> {
    let t = transitions(gains, pm);
    let contraction_norm = spectral_norm(&t.contraction.to_dense());
    let (phi_pseudo, phi_state) = forcing_covariances(gains, pm, cov)?;
    Ok(StabilityReport {
        step: cov.step,
        rho_pseudo: spectral_radius(&t.f_pseudo.to_dense()),
        rho_state: spectral_radius(&t.f_state.to_dense()),
        contraction_norm,
        norm_bound: spectral_norm(&pm.pseudo_dynamics) * contraction_norm,
        pseudo_noise_norm: spectral_norm(&phi_pseudo),
        state_noise_norm: spectral_norm(&phi_state),
    })
}

/// `(spectral radius, spectral norm)`.
pub fn spectral_tools(m: &DMatrix<f64>) -> (f64, f64) {
    (spectral_radius(m), spectral_norm(m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    /// Best `lambda_min / (lambda_max * ||W||_2)` found; a lower bound on the capacity.
    pub c_lower: f64,
    /// `c_lower` hit the cap because the contraction norm reached zero.
    pub unbounded: bool,
    /// Smallest nonzero eigenvalue of `G`.
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Consensus scale: `B_C = beta (L ⊗ I)`.
    pub beta: f64,
    /// Innovation scale: `B_I = alpha blockdiag(pinv(H_pseudo_n))`.
    pub alpha: f64,
    pub achieved_norm: f64,
    /// Whether norms were exact spectral norms or the induced-norm bound.
    pub exact_norm: bool,
    pub evaluations: usize,
}

/// Lower bound on the tracking capacity over the gain family
/// `B_C = beta (L ⊗ I)`, `B_I = alpha blockdiag(pinv(H_pseudo_n))`.
///
/// A grid over `(alpha, beta)` that contains `alpha = 1` and
/// `beta = 1 / lambda_max(L)` is followed by a shrinking pattern search
/// around the incumbent until `budget` evaluations are spent.
pub fn capacity_lower_bound(pm: &PseudoModel, graph: &GraphSpectrum, budget: usize) -> Result<CapacityEstimate> {
    let ev = sym_eigenvalues(&pm.info);
    let lambda_max = ev.last().copied().unwrap_or(0.0);
    if lambda_max <= 0.0 {
        return Err(Error::Parameter("G is zero: nothing is observed".into()));
    }
    let lambda_min = ev
        .iter()
        .copied()
        .find(|&e| e > 1e-10 * lambda_max)
        .expect("lambda_max itself qualifies");
    let nb = pm.agents();
    let m = pm.state_dim();
    let exact = nb * m <= EXACT_NORM_MAX_DIM;
    let laplacian = {
        let mut op = BlockSparse::zeros(nb, m);
        let eye = DMatrix::identity(m, m);
        for i in 0..nb {
            for j in 0..nb {
                let v = graph.laplacian[(i, j)];
                if v != 0.0 {
                    op.set_block(i, j, &eye * v);
                }
            }
        }
        op
    };
    // pinv(H_pseudo_n) H_pseudo_n per agent.
    let projected = BlockSparse::block_diag(pm.pseudo_obs.iter().map(|h| pinv(h, PINV_TOL) * h).collect());
    let eye = BlockSparse::identity(nb, m);
    let norm_at = |alpha: f64, beta: f64| -> f64 {
        let w = eye.sub(&laplacian.scale(beta)).sub(&projected.scale(alpha));
        if exact {
            spectral_norm(&w.to_dense())
        } else {
            (w.norm_one() * w.norm_inf()).sqrt()
        }
    };

    let budget = budget.max(1);
    let lap_max = graph.eigenvalues.last().copied().unwrap_or(0.0);
    let beta_unit = if lap_max > 0.0 { 1.0 / lap_max } else { 0.0 };
    let half = (((budget as f64).sqrt() - 1.0) / 2.0).floor().max(0.0) as usize;
    let mut points = Vec::new();
    for a in 0..=2 * half {
        for b in 0..=2 * half {
            let frac = |k: usize| if half == 0 { 1.0 } else { k as f64 / half as f64 };
            points.push((frac(a), frac(b) * beta_unit));
        }
    }
    let mut evaluated: Vec<(f64, f64, f64)> =
        points.par_iter().map(|&(a, b)| (a, b, norm_at(a, b))).collect();
    let better = |x: &(f64, f64, f64), y: &(f64, f64, f64)| {
        // Smaller norm wins; ties go to the lexicographically smaller (alpha, beta).
        x.2 < y.2 || (x.2 == y.2 && (x.0, x.1) < (y.0, y.1))
    };
    let mut best = evaluated[0];
    for p in &evaluated {
        if better(p, &best) {
            best = *p;
        }
    }
    let mut step = (if half == 0 { 0.5 } else { 0.5 / half as f64 }, if half == 0 { 0.5 } else { 0.5 / half as f64 } * beta_unit);
    while evaluated.len() + 4 <= budget && best.2 >= ZERO_NORM && step.0 > 1e-9 {
        let cands = [
            (best.0 + step.0, best.1),
            ((best.0 - step.0).max(0.0), best.1),
            (best.0, best.1 + step.1),
            (best.0, (best.1 - step.1).max(0.0)),
        ];
        let scored: Vec<(f64, f64, f64)> = cands.par_iter().map(|&(a, b)| (a, b, norm_at(a, b))).collect();
        let mut improved = false;
        for p in &scored {
            if better(p, &best) && p.2 < best.2 {
                best = *p;
                improved = true;
            }
        }
        evaluated.extend(scored);
        if !improved {
            step = (step.0 / 2.0, step.1 / 2.0);
        }
    }

    let unbounded = best.2 < ZERO_NORM;
    let c_lower = if unbounded {
        CAPACITY_CAP
    } else {
        (lambda_min / (lambda_max * best.2)).min(CAPACITY_CAP)
    };
    Ok(CapacityEstimate {
        c_lower,
        unbounded,
        lambda_min,
        lambda_max,
        beta: best.1,
        alpha: best.0,
        achieved_norm: best.2,
        exact_norm: exact,
        evaluations: evaluated.len(),
    })
}
