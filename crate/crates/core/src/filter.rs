//! Online filtering: ground-truth simulation, the per-agent distributed
//! filter and the centralized Kalman filter used as a benchmark.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::covgain::{AgentGains, GainSchedule};
use crate::error::{Error, Result};
use crate::linalg::psd_sqrt;
use crate::model::ModelSpec;
use crate::pseudo::PseudoModel;

/// Eigenvalue clipping tolerance of the sampling square roots.
pub const SAMPLING_TOL: f64 = 1e-12;

/// Estimates of every agent. `y_filt`/`x_filt` hold the filtered estimates
/// of step `step - 1` and are empty before the first update.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkEstimate {
    pub step: usize,
    pub y_pred: Vec<DVector<f64>>,
    pub x_pred: Vec<DVector<f64>>,
    pub y_filt: Vec<DVector<f64>>,
    pub x_filt: Vec<DVector<f64>>,
}

/// A sampled run of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `x_0 ..= x_T`.
    pub states: Vec<DVector<f64>>,
    /// `observations[i][n]` for `i < T`.
    pub observations: Vec<Vec<DVector<f64>>>,
    /// `v_i` for `i < T`.
    pub process_noise: Vec<DVector<f64>>,
    /// `obs_noise[i][n]` for `i < T`.
    pub obs_noise: Vec<Vec<DVector<f64>>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.observations.len()
    }
}

/// Draws trajectories with precomputed noise square roots.
#[derive(Debug, Clone)]
pub struct Simulator {
    spec: ModelSpec,
    initial_sqrt: DMatrix<f64>,
    process_sqrt: DMatrix<f64>,
    obs_sqrt: Vec<DMatrix<f64>>,
}

// Random streams within one run.
const STREAM_INITIAL: u64 = 0;
const STREAM_PROCESS: u64 = 1;
const STREAM_OBS_BASE: u64 = 2;

fn gaussian(rng: &mut ChaCha8Rng, sqrt: &DMatrix<f64>) -> DVector<f64> {
    let xi = DVector::from_fn(sqrt.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    sqrt * xi
}

impl Simulator {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        spec.check_dimensions()?;
        let named = |what: &'static str| move |e: Error| Error::Model(format!("{what}: {e}"));
        Ok(Simulator {
            initial_sqrt: psd_sqrt(&spec.initial_cov, SAMPLING_TOL).map_err(named("Sigma0"))?,
            process_sqrt: psd_sqrt(&spec.process_noise, SAMPLING_TOL).map_err(named("V"))?,
            obs_sqrt: spec
                .obs_noise
                .iter()
                .map(|r| psd_sqrt(r, SAMPLING_TOL).map_err(named("R_n")))
                .collect::<Result<_>>()?,
            spec: spec.clone(),
        })
    }

    /// Independent streams for `x_0`, the process noise and each agent's
    /// observation noise; the run is a pure function of `seed`.
    pub fn run(&self, horizon: usize, seed: u64) -> Trajectory {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        let spec = &self.spec;
        let mut rng_v = stream(STREAM_PROCESS);
        let mut rng_r: Vec<ChaCha8Rng> = (0..spec.agents() as u64).map(|n| stream(STREAM_OBS_BASE + n)).collect();

        let mut x = &spec.x0_mean + gaussian(&mut stream(STREAM_INITIAL), &self.initial_sqrt);
        let mut traj = Trajectory {
            states: Vec::with_capacity(horizon + 1),
            observations: Vec::with_capacity(horizon),
            process_noise: Vec::with_capacity(horizon),
            obs_noise: Vec::with_capacity(horizon),
        };
        for _ in 0..horizon {
            let r: Vec<DVector<f64>> = self.obs_sqrt.iter().zip(&mut rng_r).map(|(s, g)| gaussian(g, s)).collect();
            let z = spec.obs_maps.iter().zip(&r).map(|(h, r)| h * &x + r).collect();
            let v = gaussian(&mut rng_v, &self.process_sqrt);
            let next = &spec.dynamics * &x + &v;
            traj.states.push(std::mem::replace(&mut x, next));
            traj.observations.push(z);
            traj.process_noise.push(v);
            traj.obs_noise.push(r);
        }
        traj.states.push(x);
        traj
    }
}

pub fn simulate_truth(spec: &ModelSpec, horizon: usize, seed: u64) -> Result<Trajectory> {
    Ok(Simulator::new(spec)?.run(horizon, seed))
}

/// Every agent starts from the prior mean.
pub fn cikf_init(spec: &ModelSpec, pm: &PseudoModel) -> NetworkEstimate {
    let y0 = &pm.info * &spec.x0_mean;
    NetworkEstimate {
        step: 0,
        y_pred: vec![y0; spec.agents()],
        x_pred: vec![spec.x0_mean.clone(); spec.agents()],
        y_filt: Vec::new(),
        x_filt: Vec::new(),
    }
}

/// Output of one agent's update.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentUpdate {
    pub y_filt: DVector<f64>,
    pub x_filt: DVector<f64>,
    pub y_pred: DVector<f64>,
    pub x_pred: DVector<f64>,
}

/// One agent's filter and prediction using only its own estimates, the
/// pseudo-state predictions received from its neighbors (aligned with
/// `gains.neighbors`) and its own observation.
pub fn agent_update(
    pm: &PseudoModel,
    n: usize,
    gains: &AgentGains,
    y_pred: &DVector<f64>,
    x_pred: &DVector<f64>,
    neighbor_y: &[&DVector<f64>],
    z: &DVector<f64>,
) -> AgentUpdate {
    let z_til = &pm.obs_weight[n] * z;
    let innovation = z_til - &pm.pseudo_obs[n] * y_pred - &pm.null_obs[n] * x_pred;
    let mut y_filt = y_pred + &gains.innovation * innovation;
    for (b, yl) in gains.consensus.iter().zip(neighbor_y) {
        y_filt += b * (*yl - y_pred);
    }
    let x_filt = x_pred + &gains.state_gain * (&y_filt - &pm.info * x_pred);
    let y_next = &pm.pseudo_dynamics * &y_filt + &pm.null_dynamics * &x_filt;
    let x_next = &pm.dynamics * &x_filt;
    AgentUpdate {
        y_filt,
        x_filt,
        y_pred: y_next,
        x_pred: x_next,
    }
}

/// Advances all agents by one step. Each agent reads only its closed
/// neighborhood's predictions from `est`, which is not modified.
pub fn cikf_step(
    est: &NetworkEstimate,
    schedule: &GainSchedule,
    pm: &PseudoModel,
    observations: &[DVector<f64>],
) -> Result<NetworkEstimate> {
    if schedule.model_hash != pm.model_hash {
        return Err(Error::Config(format!(
            "gain schedule was designed for model {} but the filter runs model {}",
            short(&schedule.model_hash),
            short(&pm.model_hash)
        )));
    }
    let gains = schedule.steps.get(est.step).ok_or_else(|| {
        Error::Config(format!("gain schedule covers {} steps, step {} requested", schedule.horizon(), est.step))
    })?;
    let agents = pm.agents();
    if gains.agents.len() != agents || est.y_pred.len() != agents || observations.len() != agents {
        return Err(Error::Config(format!(
            "agent count mismatch: model {agents}, gains {}, estimates {}, observations {}",
            gains.agents.len(),
            est.y_pred.len(),
            observations.len()
        )));
    }
    let updates: Vec<AgentUpdate> = (0..agents)
        .into_par_iter()
        .map(|n| {
            let g = &gains.agents[n];
            let received: Vec<&DVector<f64>> = g.neighbors.iter().map(|&l| &est.y_pred[l]).collect();
            agent_update(pm, n, g, &est.y_pred[n], &est.x_pred[n], &received, &observations[n])
        })
        .collect();
    let mut next = NetworkEstimate {
        step: est.step + 1,
        y_pred: Vec::with_capacity(agents),
        x_pred: Vec::with_capacity(agents),
        y_filt: Vec::with_capacity(agents),
        x_filt: Vec::with_capacity(agents),
    };
    for u in updates {
        next.y_pred.push(u.y_pred);
        next.x_pred.push(u.x_pred);
        next.y_filt.push(u.y_filt);
        next.x_filt.push(u.x_filt);
    }
    Ok(next)
}

/// Runs the distributed filter over a whole trajectory. Element `i` of the
/// result holds the predictions for step `i` (and filtered estimates of `i - 1`).
pub fn cikf_run(
    spec: &ModelSpec,
    pm: &PseudoModel,
    schedule: &GainSchedule,
    traj: &Trajectory,
) -> Result<Vec<NetworkEstimate>> {
    let mut out = Vec::with_capacity(traj.horizon() + 1);
    out.push(cikf_init(spec, pm));
    for z in &traj.observations {
        let next = cikf_step(out.last().expect("non-empty"), schedule, pm, z)?;
        out.push(next);
    }
    Ok(out)
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

/// Data-independent part of the centralized filter: gains and covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct CkfDesign {
    /// Kalman gain per step, `M x sum(M_n)`.
    pub gains: Vec<DMatrix<f64>>,
    /// `trace(Sigma^c_{i|i})`.
    pub filt_trace: Vec<f64>,
    /// `trace(Sigma^c_{i+1|i})`.
    pub pred_trace: Vec<f64>,
    pub filt_cov: Vec<DMatrix<f64>>,
}

/// Centralized covariance recursion over the stacked observation model.
pub fn ckf_design(spec: &ModelSpec, horizon: usize) -> Result<CkfDesign> {
    spec.check_dimensions()?;
    let h = spec.stacked_obs_map();
    let r = spec.stacked_obs_noise();
    let m = spec.state_dim();
    let mut s = spec.initial_cov.clone();
    let mut out = CkfDesign {
        gains: Vec::with_capacity(horizon),
        filt_trace: Vec::with_capacity(horizon),
        pred_trace: Vec::with_capacity(horizon),
        filt_cov: Vec::with_capacity(horizon),
    };
    for i in 0..horizon {
        let hs = &h * &s;
        let innov = crate::linalg::symmetrize(&(&hs * h.transpose() + &r));
        let chol = innov
            .cholesky()
            .ok_or_else(|| Error::Numerical(format!("centralized innovation covariance is singular at step {i}")))?;
        // K = S H^T (H S H^T + R)^{-1}
        let k = chol.solve(&hs).transpose();
        let ikh = DMatrix::identity(m, m) - &k * &h;
        let sf = crate::linalg::symmetrize(&(&ikh * &s * ikh.transpose() + &k * &r * k.transpose()));
        s = crate::linalg::symmetrize(&(&spec.dynamics * &sf * spec.dynamics.transpose() + &spec.process_noise));
        out.gains.push(k);
        out.filt_trace.push(sf.trace());
        out.pred_trace.push(s.trace());
        out.filt_cov.push(sf);
    }
    Ok(out)
}

/// Centralized estimates along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CkfOutput {
    /// `x_hat_{i|i-1}` for `i = 0 ..= T`.
    pub x_pred: Vec<DVector<f64>>,
    /// `x_hat_{i|i}` for `i < T`.
    pub x_filt: Vec<DVector<f64>>,
    pub filt_trace: Vec<f64>,
    pub pred_trace: Vec<f64>,
}

pub fn ckf_estimates(spec: &ModelSpec, design: &CkfDesign, traj: &Trajectory) -> Result<CkfOutput> {
    if design.gains.len() < traj.horizon() {
        return Err(Error::Config(format!(
            "centralized design covers {} steps, trajectory has {}",
            design.gains.len(),
            traj.horizon()
        )));
    }
    let h = spec.stacked_obs_map();
    let mut x = spec.x0_mean.clone();
    let mut x_pred = vec![x.clone()];
    let mut x_filt = Vec::with_capacity(traj.horizon());
    for (k, z) in design.gains.iter().zip(&traj.observations) {
        let z = crate::linalg::stack(z);
        let xf = &x + k * (z - &h * &x);
        x = &spec.dynamics * &xf;
        x_filt.push(xf);
        x_pred.push(x.clone());
    }
    let t = traj.horizon();
    Ok(CkfOutput {
        x_pred,
        x_filt,
        filt_trace: design.filt_trace[..t].to_vec(),
        pred_trace: design.pred_trace[..t].to_vec(),
    })
}

pub fn ckf_run(spec: &ModelSpec, traj: &Trajectory) -> Result<CkfOutput> {
    let design = ckf_design(spec, traj.horizon())?;
    ckf_estimates(spec, &design, traj)
}

/// Long-format CSV of a trajectory and, optionally, the distributed
/// estimates: `step,agent,component,value,series`. Truth rows leave the
/// agent column empty.
pub fn trajectory_csv(traj: &Trajectory, estimates: Option<&[NetworkEstimate]>) -> String {
    let mut out = String::from("step,agent,component,value,series\n");
    for (i, x) in traj.states.iter().enumerate() {
        for (c, v) in x.iter().enumerate() {
            let _ = writeln!(out, "{i},,{c},{v:e},x");
        }
    }
    for (i, zs) in traj.observations.iter().enumerate() {
        for (n, z) in zs.iter().enumerate() {
            for (c, v) in z.iter().enumerate() {
                let _ = writeln!(out, "{i},{n},{c},{v:e},z");
            }
        }
    }
    for est in estimates.unwrap_or(&[]) {
        let series: [(&str, &Vec<DVector<f64>>, usize); 4] = [
            ("y_pred", &est.y_pred, est.step),
            ("x_pred", &est.x_pred, est.step),
            ("y_filt", &est.y_filt, est.step.wrapping_sub(1)),
            ("x_filt", &est.x_filt, est.step.wrapping_sub(1)),
        ];
        for (tag, vecs, step) in series {
            for (n, vec) in vecs.iter().enumerate() {
                for (c, v) in vec.iter().enumerate() {
                    let _ = writeln!(out, "{step},{n},{c},{v:e},{tag}");
                }
            }
        }
    }
    out
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, estimates: Option<&[NetworkEstimate]>) -> Result<()> {
    std::fs::write(path, trajectory_csv(traj, estimates)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covgain::precompute_schedule;
    use crate::model::{complete_graph, generate_paper_model, ModelParams};
    use crate::pseudo::build_pseudo_model;

    fn scalar_spec() -> ModelSpec {
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        ModelSpec {
            dynamics: one(0.9),
            process_noise: one(0.25),
            obs_maps: vec![one(1.0)],
            obs_noise: vec![one(1.0)],
            x0_mean: DVector::from_element(1, 0.3),
            initial_cov: one(1.0),
            adjacency: vec![vec![0]],
            meta: None,
        }
    }

    #[test]
    fn noiseless_trajectory_is_deterministic_orbit() {
        let mut spec = generate_paper_model(&ModelParams::desk(), 2).unwrap();
        let m = spec.state_dim();
        spec.process_noise = DMatrix::zeros(m, m);
        spec.initial_cov = DMatrix::zeros(m, m);
        for r in &mut spec.obs_noise {
            *r = DMatrix::zeros(2, 2);
        }
        let traj = simulate_truth(&spec, 5, 1).unwrap();
        let mut x = spec.x0_mean.clone();
        for i in 0..5 {
            assert_eq!(traj.states[i], x);
            for (n, h) in spec.obs_maps.iter().enumerate() {
                assert_eq!(traj.observations[i][n], h * &x);
            }
            x = &spec.dynamics * x;
        }
    }

    #[test]
    fn trajectories_follow_the_model_and_seed() {
        let spec = generate_paper_model(&ModelParams::desk(), 2).unwrap();
        let a = simulate_truth(&spec, 6, 10).unwrap();
        assert_eq!(a, simulate_truth(&spec, 6, 10).unwrap());
        assert_ne!(a.states[1], simulate_truth(&spec, 6, 11).unwrap().states[1]);
        for i in 0..6 {
            assert_eq!(a.states[i + 1], &spec.dynamics * &a.states[i] + &a.process_noise[i]);
            for n in 0..spec.agents() {
                assert_eq!(a.observations[i][n], &spec.obs_maps[n] * &a.states[i] + &a.obs_noise[i][n]);
            }
        }
    }

    #[test]
    fn indefinite_covariance_cannot_be_sampled() {
        let mut spec = scalar_spec();
        spec.process_noise[(0, 0)] = -1.0;
        assert!(matches!(simulate_truth(&spec, 2, 0), Err(Error::Model(_))));
    }

    #[test]
    fn initialization_uses_the_prior() {
        let spec = generate_paper_model(&ModelParams::desk(), 2).unwrap();
        let pm = build_pseudo_model(&spec).unwrap();
        let est = cikf_init(&spec, &pm);
        for n in 0..spec.agents() {
            assert_eq!(est.x_pred[n], spec.x0_mean);
            assert_eq!(est.y_pred[n], &pm.info * &spec.x0_mean);
        }
    }

    #[test]
    fn scalar_first_update() {
        let spec = scalar_spec();
        let pm = build_pseudo_model(&spec).unwrap();
        let (sched, _) = precompute_schedule(&spec, 1).unwrap();
        let est = cikf_init(&spec, &pm);
        let z = DVector::from_element(1, 1.7);
        let next = cikf_step(&est, &sched, &pm, &[z]).unwrap();
        let want = 0.3 + 0.5 * (1.7 - 0.3);
        assert!((next.x_filt[0][0] - want).abs() < 1e-12);
        assert!((next.x_pred[0][0] - 0.9 * want).abs() < 1e-12);
    }

    #[test]
    fn exact_estimates_stay_exact_without_noise() {
        let spec = generate_paper_model(&ModelParams::desk(), 6).unwrap();
        let pm = build_pseudo_model(&spec).unwrap();
        let (sched, _) = precompute_schedule(&spec, 3).unwrap();
        let x = DVector::from_fn(spec.state_dim(), |i, _| i as f64 * 0.1 - 0.4);
        let est = NetworkEstimate {
            step: 2,
            y_pred: vec![&pm.info * &x; spec.agents()],
            x_pred: vec![x.clone(); spec.agents()],
            y_filt: vec![],
            x_filt: vec![],
        };
        let z: Vec<_> = spec.obs_maps.iter().map(|h| h * &x).collect();
        let next = cikf_step(&est, &sched, &pm, &z).unwrap();
        let x_next = &spec.dynamics * &x;
        for n in 0..spec.agents() {
            assert!((&next.x_pred[n] - &x_next).amax() < 1e-10);
            assert!((&next.y_pred[n] - &pm.info * &x_next).amax() < 1e-9);
        }
    }

    #[test]
    fn identical_agents_on_complete_graph_agree() {
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 0.5]);
        let spec = ModelSpec {
            dynamics: DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 1.02]),
            process_noise: DMatrix::identity(2, 2),
            obs_maps: vec![h.clone(); 3],
            obs_noise: vec![DMatrix::identity(1, 1); 3],
            x0_mean: DVector::from_vec(vec![1.0, 2.0]),
            initial_cov: DMatrix::identity(2, 2),
            adjacency: complete_graph(3),
            meta: None,
        };
        let pm = build_pseudo_model(&spec).unwrap();
        let (sched, _) = precompute_schedule(&spec, 15).unwrap();
        let traj = simulate_truth(&spec, 15, 3).unwrap();
        // Identical sensors reading identical values.
        let mut est = cikf_init(&spec, &pm);
        for i in 0..15 {
            let z = vec![traj.observations[i][0].clone(); 3];
            est = cikf_step(&est, &sched, &pm, &z).unwrap();
            for n in 1..3 {
                assert!((&est.x_pred[n] - &est.x_pred[0]).amax() < 1e-10);
                assert!((&est.y_pred[n] - &est.y_pred[0]).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn updates_only_read_the_closed_neighborhood() {
        let spec = generate_paper_model(&ModelParams::desk(), 9).unwrap();
        let pm = build_pseudo_model(&spec).unwrap();
        let (sched, _) = precompute_schedule(&spec, 3).unwrap();
        let traj = simulate_truth(&spec, 3, 4).unwrap();
        let ests = cikf_run(&spec, &pm, &sched, &traj).unwrap();
        let est = &ests[2];
        let base = cikf_step(est, &sched, &pm, &traj.observations[2]).unwrap();
        let graph = crate::model::laplacian_spectrum(&spec.adjacency).unwrap();
        for n in 0..spec.agents() {
            for other in 0..spec.agents() {
                if other == n || graph.neighborhoods[n].contains(&other) {
                    continue;
                }
                let mut perturbed = est.clone();
                perturbed.y_pred[other] *= 3.0;
                perturbed.x_pred[other] *= -2.0;
                let mut obs = traj.observations[2].clone();
                obs[other] *= 7.0;
                let out = cikf_step(&perturbed, &sched, &pm, &obs).unwrap();
                assert_eq!(out.y_pred[n], base.y_pred[n]);
                assert_eq!(out.x_pred[n], base.x_pred[n]);
            }
        }
    }

    #[test]
    fn mismatched_schedule_is_rejected() {
        let spec = generate_paper_model(&ModelParams::desk(), 9).unwrap();
        let other = generate_paper_model(&ModelParams::desk(), 10).unwrap();
        let pm = build_pseudo_model(&spec).unwrap();
        let (sched, _) = precompute_schedule(&other, 2).unwrap();
        let traj = simulate_truth(&spec, 2, 4).unwrap();
        let err = cikf_run(&spec, &pm, &sched, &traj).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let (short, _) = precompute_schedule(&spec, 1).unwrap();
        assert!(matches!(cikf_run(&spec, &pm, &short, &traj), Err(Error::Config(_))));
    }

    #[test]
    fn centralized_scalar_and_limits() {
        let spec = scalar_spec();
        let d = ckf_design(&spec, 3).unwrap();
        assert!((d.filt_trace[0] - 0.5).abs() < 1e-15);
        assert!((d.pred_trace[0] - 0.655).abs() < 1e-15);
        let mut noisy = spec.clone();
        noisy.obs_noise[0][(0, 0)] = 1e6;
        noisy.process_noise[(0, 0)] = 0.0;
        let dn = ckf_design(&noisy, 1).unwrap();
        assert!(dn.filt_trace[0] >= d.filt_trace[0]);
        assert!((dn.filt_trace[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn single_full_observer_matches_centralized_pathwise() {
        let mut spec = generate_paper_model(&ModelParams { agents: 1, edges: 0, obs_per_agent: 4, state_dim: 4, a_norm: 0.95, ..ModelParams::desk() }, 1).unwrap();
        spec.obs_maps = vec![DMatrix::identity(4, 4)];
        let pm = build_pseudo_model(&spec).unwrap();
        let (sched, _) = precompute_schedule(&spec, 20).unwrap();
        let traj = simulate_truth(&spec, 20, 8).unwrap();
        let ests = cikf_run(&spec, &pm, &sched, &traj).unwrap();
        let ckf = ckf_run(&spec, &traj).unwrap();
        for i in 0..=20 {
            assert!((&ests[i].x_pred[0] - &ckf.x_pred[i]).amax() < 1e-8);
        }
    }

    #[test]
    fn csv_dump_has_long_format() {
        let spec = scalar_spec();
        let pm = build_pseudo_model(&spec).unwrap();
        let (sched, _) = precompute_schedule(&spec, 2).unwrap();
        let traj = simulate_truth(&spec, 2, 0).unwrap();
        let ests = cikf_run(&spec, &pm, &sched, &traj).unwrap();
        let csv = trajectory_csv(&traj, Some(&ests));
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("step,agent,component,value,series"));
        // 3 states + 2 observations + (3 + 3 predictions + 2 + 2 filtered)
        assert_eq!(lines.count(), 3 + 2 + 10);
        assert!(csv.contains(",x_filt\n"));
    }
}
