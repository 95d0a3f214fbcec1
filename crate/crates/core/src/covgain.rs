//! Offline gain design.
//!
//! Propagates the six coupled error covariances of the distributed filter and,
//! at every step, picks the per-agent consensus, innovation and state gains
//! that minimize the mean-squared error given everything the agent can see.
//!
//! Notation for the stacked (all-agent) errors, each `MN x MN`:
//! * `P`: pseudo-state errors `eps = y_hat - y`,
//! * `Sigma`: state errors `e = x_hat - x`,
//! * `Pi = E[e eps^T]`, and `Gamma = E[e_pred eps_filt^T]`.
//!
//! The filter update of one step is
//! `eps_f = W eps - B_I D_null e + B_I w` with `W = I - B_C - B_I D_pseudo`
//! and `e_f = Q e + K eps_f` with `Q = I - K (I ⊗ G)`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::block::BlockSparse;
use crate::error::{Error, Result};
use crate::linalg::{add_ones_kron, block, ones_kron, solve_right_psd, symmetrize, SOLVE_CUTOFF};
use crate::model::{laplacian_spectrum, GraphSpectrum, ModelMeta, ModelSpec};
use crate::pseudo::{build_pseudo_model, PseudoModel};

/// One-step-ahead prediction error covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedCovariances {
    pub p: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub pi: DMatrix<f64>,
}

/// Filter error covariances, plus the cross term `Gamma` linking the
/// predicted state error to the filtered pseudo-state error.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredCovariances {
    pub gamma: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub pi: DMatrix<f64>,
}

/// Covariances at one time step. `filt` is filled once the step's gains exist.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    pub step: usize,
    pub pred: PredictedCovariances,
    pub filt: Option<FilteredCovariances>,
}

/// Covariances of the information an agent uses for its updates.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationCovariances {
    /// `M x (d+1)M` cross-covariance between the pseudo-state and the
    /// consensus+innovation vector.
    pub y_nu_til: DMatrix<f64>,
    /// `(d+1)M x (d+1)M`.
    pub nu_til: DMatrix<f64>,
    /// `M x M` cross-covariance between the state and the state innovation.
    pub x_nu: DMatrix<f64>,
    pub nu: DMatrix<f64>,
}

/// Gains of one agent at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentGains {
    pub neighbors: Vec<usize>,
    /// Consensus gain per neighbor, aligned with `neighbors`.
    pub consensus: Vec<DMatrix<f64>>,
    pub innovation: DMatrix<f64>,
    pub state_gain: DMatrix<f64>,
}

impl AgentGains {
    /// `[B_{n,l_1}, ..., B_{n,l_d}, B_{n,n}]`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let m = self.innovation.nrows();
        let d = self.neighbors.len();
        let mut out = DMatrix::zeros(m, (d + 1) * m);
        for (q, b) in self.consensus.iter().chain(std::iter::once(&self.innovation)).enumerate() {
            out.columns_mut(q * m, m).copy_from(b);
        }
        out
    }

    fn from_stacked(neighbors: Vec<usize>, stacked: &DMatrix<f64>, state_gain: DMatrix<f64>) -> Self {
        let m = stacked.nrows();
        let d = neighbors.len();
        AgentGains {
            consensus: (0..d).map(|q| stacked.columns(q * m, m).into_owned()).collect(),
            innovation: stacked.columns(d * m, m).into_owned(),
            neighbors,
            state_gain,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepGains {
    pub agents: Vec<AgentGains>,
    /// Eigen-directions discarded in the pseudo-inverse solves of this step.
    pub dropped_directions: usize,
}

impl StepGains {
    pub fn state_dim(&self) -> usize {
        self.agents.first().map_or(0, |a| a.innovation.nrows())
    }

    /// Network consensus gain: block `(n, l)` is `-B_{n,l}` and the diagonal
    /// block is the sum of the agent's neighbor gains, so agreement
    /// `1 ⊗ y` is annihilated.
    pub fn consensus_operator(&self) -> BlockSparse {
        let m = self.state_dim();
        let mut op = BlockSparse::zeros(self.agents.len(), m);
        for (n, ag) in self.agents.iter().enumerate() {
            let mut diag = DMatrix::zeros(m, m);
            for (&l, b) in ag.neighbors.iter().zip(&ag.consensus) {
                op.set_block(n, l, -b);
                diag += b;
            }
            op.set_block(n, n, diag);
        }
        op
    }

    pub fn innovation_operator(&self) -> BlockSparse {
        BlockSparse::block_diag(self.agents.iter().map(|a| a.innovation.clone()).collect())
    }

    pub fn state_gain_operator(&self) -> BlockSparse {
        BlockSparse::block_diag(self.agents.iter().map(|a| a.state_gain.clone()).collect())
    }
}

/// Per-step gains and the theoretical MSE they achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule {
    pub model_hash: String,
    pub state_dim: usize,
    pub steps: Vec<StepGains>,
    /// `trace(Sigma_{i+1|i})` over all agents.
    pub theory_pred_total: Vec<f64>,
    /// `trace(Sigma_{i+1|i}) / N`.
    pub theory_pred_per_agent: Vec<f64>,
    /// `trace(Sigma_{i|i}) / N`.
    pub theory_filt_per_agent: Vec<f64>,
    /// Provenance, stored as a JSON trailer in the binary file.
    pub meta: Option<ModelMeta>,
}

impl GainSchedule {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn agents(&self) -> usize {
        self.steps.first().map_or(0, |s| s.agents.len())
    }
}

/// Traces recorded while designing a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceTrace {
    pub step: usize,
    pub p_filt: f64,
    pub sigma_filt: f64,
    pub p_pred_next: f64,
    pub sigma_pred_next: f64,
}

/// Prediction covariances before the first observation: every agent starts
/// from the same prior, so all blocks are equal.
pub fn init_covariances(initial_cov: &DMatrix<f64>, info: &DMatrix<f64>, agents: usize) -> CovarianceState {
    CovarianceState {
        step: 0,
        pred: PredictedCovariances {
            p: ones_kron(agents, &(info * initial_cov * info)),
            sigma: ones_kron(agents, initial_cov),
            pi: ones_kron(agents, &(initial_cov * info)),
        },
        filt: None,
    }
}

/// Covariances of agent `n`'s consensus+innovation vector
/// `[y_l - y_n for l in neighbors; z_til - H_til y_n - H_null x_n]`.
pub fn consensus_innovation_covariances(
    pred: &PredictedCovariances,
    pm: &PseudoModel,
    graph: &GraphSpectrum,
    n: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = pm.state_dim();
    let nb = &graph.neighborhoods[n];
    let d = nb.len();
    let (ht, hc, hb) = (&pm.pseudo_obs[n], &pm.null_obs[n], &pm.local_info[n]);
    let p_nn = block(&pred.p, n, n, m);
    let pi_nn = block(&pred.pi, n, n, m);
    let sigma_nn = block(&pred.sigma, n, n, m);

    let mut y_nu = DMatrix::zeros(m, (d + 1) * m);
    let mut nu = DMatrix::zeros((d + 1) * m, (d + 1) * m);
    for (q, &lq) in nb.iter().enumerate() {
        y_nu.columns_mut(q * m, m).copy_from(&(&p_nn - block(&pred.p, n, lq, m)));
        let p_lq_n = block(&pred.p, lq, n, m);
        for (s, &ls) in nb.iter().enumerate().skip(q) {
            let b = &p_nn - block(&pred.p, n, ls, m) - &p_lq_n + block(&pred.p, lq, ls, m);
            nu.view_mut((q * m, s * m), (m, m)).copy_from(&b);
            if s != q {
                nu.view_mut((s * m, q * m), (m, m)).copy_from(&b.transpose());
            }
        }
        let cross = (&p_nn - &p_lq_n) * ht.transpose() + (&pi_nn - block(&pred.pi, n, lq, m)).transpose() * hc.transpose();
        nu.view_mut((q * m, d * m), (m, m)).copy_from(&cross);
        nu.view_mut((d * m, q * m), (m, m)).copy_from(&cross.transpose());
    }
    y_nu.columns_mut(d * m, m)
        .copy_from(&(&p_nn * ht.transpose() + pi_nn.transpose() * hc.transpose()));
    let h_pi_t = ht * pi_nn.transpose() * hc.transpose();
    let last = ht * &p_nn * ht.transpose() + &h_pi_t + h_pi_t.transpose() + hc * &sigma_nn * hc.transpose() + hb;
    nu.view_mut((d * m, d * m), (m, m)).copy_from(&symmetrize(&last));
    (y_nu, nu)
}

/// Covariances of agent `n`'s state innovation `y_f - G x_hat`. Needs the
/// filtered pseudo-state covariance and `Gamma` of the same step.
pub fn state_innovation_covariances(
    cov: &CovarianceState,
    pm: &PseudoModel,
    n: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let filt = cov
        .filt
        .as_ref()
        .ok_or_else(|| Error::Sequencing(format!("step {}: state innovation needs the filtered covariances", cov.step)))?;
    Ok(state_innovation_from(&cov.pred.sigma, &filt.gamma, &filt.p, pm, n))
}

fn state_innovation_from(
    sigma_pred: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    p_filt: &DMatrix<f64>,
    pm: &PseudoModel,
    n: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = pm.state_dim();
    let g = &pm.info;
    let sigma_nn = block(sigma_pred, n, n, m);
    let gamma_nn = block(gamma, n, n, m);
    let x_nu = &sigma_nn * g - &gamma_nn;
    let g_gamma = g * &gamma_nn;
    let nu = g * &sigma_nn * g - &g_gamma - g_gamma.transpose() + block(p_filt, n, n, m);
    (x_nu, symmetrize(&nu))
}

/// All four innovation covariances of agent `n`.
pub fn innovation_covariances(
    cov: &CovarianceState,
    pm: &PseudoModel,
    graph: &GraphSpectrum,
    n: usize,
) -> Result<InnovationCovariances> {
    let (x_nu, nu) = state_innovation_covariances(cov, pm, n)?;
    let (y_nu_til, nu_til) = consensus_innovation_covariances(&cov.pred, pm, graph, n);
    Ok(InnovationCovariances {
        y_nu_til,
        nu_til,
        x_nu,
        nu,
    })
}

/// Filtered pseudo-state covariance for given consensus and innovation gains.
/// Returns `(Gamma, P_{i|i})`.
pub fn filtered_pseudo_covariances(
    pred: &PredictedCovariances,
    pm: &PseudoModel,
    consensus: &BlockSparse,
    innovation: &BlockSparse,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let nb = consensus.num_blocks();
    let w = BlockSparse::identity(nb, pm.state_dim())
        .sub(consensus)
        .sub(&innovation.mul(&pm.pseudo_obs_diag));
    let noise = innovation
        .mul(&pm.local_info_diag)
        .mul(&innovation.transpose())
        .to_dense();
    let mut p = w.congruence(&pred.p) + noise;
    let gamma = if pm.full_rank() {
        w.dense_mul_t(&pred.pi)
    } else {
        let bi_null = innovation.mul(&pm.null_obs_diag);
        let gamma = w.dense_mul_t(&pred.pi) - bi_null.dense_mul_t(&pred.sigma);
        p -= bi_null.dense_mul_t(&w.mul_dense(&pred.pi.transpose()));
        p -= bi_null.mul_dense(&gamma);
        gamma
    };
    (gamma, symmetrize(&p))
}

/// Filtered state covariances for a given state gain. Returns `(Sigma_{i|i}, Pi_{i|i})`.
pub fn filtered_state_covariances(
    sigma_pred: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    p_filt: &DMatrix<f64>,
    pm: &PseudoModel,
    state_gain: &BlockSparse,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let nb = state_gain.num_blocks();
    let m = pm.state_dim();
    let q = BlockSparse::identity(nb, m).sub(&state_gain.mul(&BlockSparse::kron_identity(nb, &pm.info)));
    let q_gamma = q.mul_dense(gamma);
    let cross = state_gain.dense_mul_t(&q_gamma);
    let sigma = q.congruence(sigma_pred) + state_gain.congruence(p_filt) + &cross + cross.transpose();
    let pi = q_gamma + state_gain.mul_dense(p_filt);
    (symmetrize(&sigma), pi)
}

/// Designs step `i`'s gains from its prediction covariances and computes the
/// resulting filter covariances.
///
/// Order matters: the consensus/innovation gains come first, then `Gamma` and
/// `P_{i|i}` (which depend on them), then the state gains (which depend on
/// `Gamma` and `P_{i|i}`), then `Sigma_{i|i}` and `Pi_{i|i}`.
pub fn step_gains_and_filter_covariances(
    pred: &PredictedCovariances,
    pm: &PseudoModel,
    graph: &GraphSpectrum,
) -> (StepGains, FilteredCovariances) {
    let agents = pm.agents();

    let pseudo: Vec<(DMatrix<f64>, usize)> = (0..agents)
        .into_par_iter()
        .map(|n| {
            let (y_nu, nu) = consensus_innovation_covariances(pred, pm, graph, n);
            solve_right_psd(&y_nu, &nu, SOLVE_CUTOFF)
        })
        .collect();
    let mut dropped: usize = pseudo.iter().map(|(_, d)| d).sum();
    let mut gains = StepGains {
        agents: pseudo
            .iter()
            .enumerate()
            .map(|(n, (stacked, _))| {
                AgentGains::from_stacked(graph.neighborhoods[n].clone(), stacked, DMatrix::zeros(0, 0))
            })
            .collect(),
        dropped_directions: 0,
    };

    let (gamma, p_filt) = filtered_pseudo_covariances(pred, pm, &gains.consensus_operator(), &gains.innovation_operator());

    let state: Vec<(DMatrix<f64>, usize)> = (0..agents)
        .into_par_iter()
        .map(|n| {
            let (x_nu, nu) = state_innovation_from(&pred.sigma, &gamma, &p_filt, pm, n);
            solve_right_psd(&x_nu, &nu, SOLVE_CUTOFF)
        })
        .collect();
    for (ag, (k, d)) in gains.agents.iter_mut().zip(state) {
        ag.state_gain = k;
        dropped += d;
    }
    gains.dropped_directions = dropped;

    let (sigma, pi) = filtered_state_covariances(&pred.sigma, &gamma, &p_filt, pm, &gains.state_gain_operator());
    (
        gains,
        FilteredCovariances {
            gamma,
            p: p_filt,
            sigma,
            pi,
        },
    )
}

/// Propagates filter covariances to the next step's prediction covariances.
pub fn predict_covariance_update(filt: &FilteredCovariances, pm: &PseudoModel) -> PredictedCovariances {
    let nb = filt.p.nrows() / pm.state_dim();
    let g = &pm.info;
    let v = &pm.process_noise;
    let a = BlockSparse::kron_identity(nb, &pm.dynamics);
    let a_pseudo = BlockSparse::kron_identity(nb, &pm.pseudo_dynamics);

    let mut p = a_pseudo.congruence(&filt.p);
    let mut pi = a_pseudo.dense_mul_t(&a.mul_dense(&filt.pi));
    if !pm.full_rank() {
        let a_null = BlockSparse::kron_identity(nb, &pm.null_dynamics);
        let cross = a_pseudo.dense_mul_t(&a_null.mul_dense(&filt.pi));
        p += a_null.congruence(&filt.sigma) + &cross + cross.transpose();
        pi += a_null.dense_mul_t(&a.mul_dense(&filt.sigma));
    }
    add_ones_kron(&mut p, &(g * v * g));
    add_ones_kron(&mut pi, &(v * g));
    let mut sigma = a.congruence(&filt.sigma);
    add_ones_kron(&mut sigma, v);
    PredictedCovariances {
        p: symmetrize(&p),
        sigma: symmetrize(&sigma),
        pi,
    }
}

/// Step-by-step gain design exposing the full covariance state.
pub struct GainDesigner {
    pm: PseudoModel,
    graph: GraphSpectrum,
    state: CovarianceState,
}

impl GainDesigner {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        let pm = build_pseudo_model(spec)?;
        let graph = laplacian_spectrum(&spec.adjacency)?;
        Ok(Self::from_parts(spec, pm, graph))
    }

    pub fn from_parts(spec: &ModelSpec, pm: PseudoModel, graph: GraphSpectrum) -> Self {
        let state = init_covariances(&spec.initial_cov, &pm.info, spec.agents());
        GainDesigner { pm, graph, state }
    }

    pub fn pseudo_model(&self) -> &PseudoModel {
        &self.pm
    }

    pub fn graph(&self) -> &GraphSpectrum {
        &self.graph
    }

    /// Prediction covariances of the upcoming step.
    pub fn current(&self) -> &CovarianceState {
        &self.state
    }

    /// Designs the current step's gains. Returns them with the completed
    /// covariance state of this step and advances to the next prediction.
    pub fn advance(&mut self) -> (StepGains, CovarianceState) {
        let (gains, filt) = step_gains_and_filter_covariances(&self.state.pred, &self.pm, &self.graph);
        let next = predict_covariance_update(&filt, &self.pm);
        let done = CovarianceState {
            step: self.state.step,
            pred: std::mem::replace(&mut self.state.pred, next),
            filt: Some(filt),
        };
        self.state.step += 1;
        (gains, done)
    }
}

/// Runs the gain design for `horizon` steps.
pub fn precompute_schedule(spec: &ModelSpec, horizon: usize) -> Result<(GainSchedule, Vec<CovarianceTrace>)> {
    if horizon == 0 {
        return Err(Error::Parameter("horizon must be at least 1".into()));
    }
    let mut designer = GainDesigner::new(spec)?;
    let agents = spec.agents() as f64;
    let mut schedule = GainSchedule {
        model_hash: designer.pm.model_hash.clone(),
        state_dim: spec.state_dim(),
        steps: Vec::with_capacity(horizon),
        theory_pred_total: Vec::with_capacity(horizon),
        theory_pred_per_agent: Vec::with_capacity(horizon),
        theory_filt_per_agent: Vec::with_capacity(horizon),
        meta: Some(ModelMeta {
            version: crate::VERSION.into(),
            seed: spec.meta.as_ref().and_then(|m| m.seed),
            config_hash: spec.meta.as_ref().and_then(|m| m.config_hash.clone()),
        }),
    };
    let mut log = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let (gains, done) = designer.advance();
        let filt = done.filt.as_ref().expect("advance fills the filter stage");
        let next = &designer.current().pred;
        let entry = CovarianceTrace {
            step: done.step,
            p_filt: filt.p.trace(),
            sigma_filt: filt.sigma.trace(),
            p_pred_next: next.p.trace(),
            sigma_pred_next: next.sigma.trace(),
        };
        if !entry.sigma_pred_next.is_finite() {
            return Err(Error::Numerical(format!("covariance recursion diverged at step {}", done.step)));
        }
        schedule.theory_pred_total.push(entry.sigma_pred_next);
        schedule.theory_pred_per_agent.push(entry.sigma_pred_next / agents);
        schedule.theory_filt_per_agent.push(entry.sigma_filt / agents);
        schedule.steps.push(gains);
        log.push(entry);
    }
    Ok((schedule, log))
}

const SCHEDULE_MAGIC: &[u8; 8] = b"CIKFGSCH";
const SCHEDULE_VERSION: u32 = 1;

fn put_u64(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u64).to_le_bytes());
}

fn put_matrix(out: &mut Vec<u8>, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
}

fn put_series(out: &mut Vec<u8>, s: &[f64]) {
    for v in s {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("schedule file is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<usize> {
        let b: [u8; 8] = self.take(8)?.try_into().expect("8 bytes");
        usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Format("size field overflows".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        let b: [u8; 8] = self.take(8)?.try_into().expect("8 bytes");
        Ok(f64::from_le_bytes(b))
    }

    fn matrix(&mut self, r: usize, c: usize) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(r, c);
        for i in 0..r {
            for j in 0..c {
                m[(i, j)] = self.f64()?;
            }
        }
        Ok(m)
    }

    fn series(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

impl GainSchedule {
    /// Binary layout (little-endian): magic, version, model hash, sizes,
    /// neighbor lists, then per step and agent the row-major gain blocks,
    /// then the theory series and the pseudo-inverse diagnostics.
    pub fn to_bytes(&self) -> Vec<u8> {
        let m = self.state_dim;
        let mut out = Vec::new();
        out.extend_from_slice(SCHEDULE_MAGIC);
        out.extend_from_slice(&SCHEDULE_VERSION.to_le_bytes());
        put_u64(&mut out, self.model_hash.len());
        out.extend_from_slice(self.model_hash.as_bytes());
        put_u64(&mut out, m);
        put_u64(&mut out, self.agents());
        put_u64(&mut out, self.horizon());
        if let Some(first) = self.steps.first() {
            for ag in &first.agents {
                put_u64(&mut out, ag.neighbors.len());
                for &l in &ag.neighbors {
                    put_u64(&mut out, l);
                }
            }
        }
        for step in &self.steps {
            put_u64(&mut out, step.dropped_directions);
            for ag in &step.agents {
                for b in &ag.consensus {
                    put_matrix(&mut out, b);
                }
                put_matrix(&mut out, &ag.innovation);
                put_matrix(&mut out, &ag.state_gain);
            }
        }
        put_series(&mut out, &self.theory_pred_total);
        put_series(&mut out, &self.theory_pred_per_agent);
        put_series(&mut out, &self.theory_filt_per_agent);
        let meta = self
            .meta
            .as_ref()
            .map(|m| serde_json::to_vec(m).expect("metadata serializes"))
            .unwrap_or_default();
        put_u64(&mut out, meta.len());
        out.extend_from_slice(&meta);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != SCHEDULE_MAGIC {
            return Err(Error::Format("not a gain schedule file".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != SCHEDULE_VERSION {
            return Err(Error::Format(format!("unsupported schedule version {version}")));
        }
        let hash_len = r.u64()?;
        let model_hash = String::from_utf8(r.take(hash_len)?.to_vec())
            .map_err(|_| Error::Format("model hash is not UTF-8".into()))?;
        let m = r.u64()?;
        let agents = r.u64()?;
        let horizon = r.u64()?;
        let mut neighborhoods = Vec::with_capacity(agents.min(1 << 20));
        if horizon > 0 {
            for _ in 0..agents {
                let d = r.u64()?;
                let nb = (0..d).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
                if nb.iter().any(|&l| l >= agents) {
                    return Err(Error::Format("neighbor index out of range".into()));
                }
                neighborhoods.push(nb);
            }
        }
        let mut steps = Vec::with_capacity(horizon.min(1 << 20));
        for _ in 0..horizon {
            let dropped_directions = r.u64()?;
            let mut ags = Vec::with_capacity(agents);
            for nb in &neighborhoods {
                let consensus = (0..nb.len()).map(|_| r.matrix(m, m)).collect::<Result<Vec<_>>>()?;
                let innovation = r.matrix(m, m)?;
                let state_gain = r.matrix(m, m)?;
                ags.push(AgentGains {
                    neighbors: nb.clone(),
                    consensus,
                    innovation,
                    state_gain,
                });
            }
            steps.push(StepGains {
                agents: ags,
                dropped_directions,
            });
        }
        let schedule = GainSchedule {
            model_hash,
            state_dim: m,
            steps,
            theory_pred_total: r.series(horizon)?,
            theory_pred_per_agent: r.series(horizon)?,
            theory_filt_per_agent: r.series(horizon)?,
            meta: None,
        };
        let mut schedule = schedule;
        let meta_len = r.u64()?;
        if meta_len > 0 {
            schedule.meta = Some(serde_json::from_slice(r.take(meta_len)?)?);
        }
        if r.pos != buf.len() {
            return Err(Error::Format("trailing bytes after schedule".into()));
        }
        Ok(schedule)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }
}
