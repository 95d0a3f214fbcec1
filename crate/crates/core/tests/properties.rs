//! Property tests of model generation, the update forms, the error dynamics
//! and the stability bound.

use cikf::block::BlockSparse;
use cikf::capacity::transitions;
use cikf::covgain::{precompute_schedule, AgentGains, StepGains};
use cikf::filter::{agent_update, cikf_run, ckf_design, simulate_truth};
use cikf::linalg::{spectral_norm, spectral_radius};
use cikf::model::{adjacency_from_edges, generate_paper_model, laplacian_spectrum, ModelParams, ModelSpec};
use cikf::pseudo::build_pseudo_model;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_params(m: usize, n: usize, obs: usize, edges: usize) -> ModelParams {
    ModelParams {
        state_dim: m,
        agents: n,
        obs_per_agent: obs,
        edges,
        ..ModelParams::desk()
    }
}

fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-2.0..2.0))
}

fn random_gains(spec: &ModelSpec, rng: &mut ChaCha8Rng, scale: f64) -> StepGains {
    let m = spec.state_dim();
    let graph = laplacian_spectrum(&spec.adjacency).unwrap();
    let mut mat = || DMatrix::from_fn(m, m, |_, _| scale * rng.random_range(-1.0..1.0));
    StepGains {
        agents: graph
            .neighborhoods
            .iter()
            .map(|nb| AgentGains {
                neighbors: nb.clone(),
                consensus: nb.iter().map(|_| mat()).collect(),
                innovation: mat(),
                state_gain: mat(),
            })
            .collect(),
        dropped_directions: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_models_meet_targets_and_are_deterministic(
        seed in 0u64..10_000, m in 4usize..9, n in 2usize..6, obs in 1usize..3,
    ) {
        let max_edges = n * (n - 1) / 2;
        let edges = (n - 1).max(max_edges / 2);
        let params = small_params(m, n, obs, edges);
        let spec = generate_paper_model(&params, seed).unwrap();
        prop_assert!((spectral_norm(&spec.dynamics) - params.a_norm).abs() < 1e-9);
        for r in &spec.obs_noise {
            prop_assert!(r.clone().cholesky().is_some());
        }
        let graph = laplacian_spectrum(&spec.adjacency).unwrap();
        prop_assert!(graph.algebraic_connectivity() > 0.0);
        prop_assert_eq!(generate_paper_model(&params, seed).unwrap(), spec);
    }

    #[test]
    fn laplacian_rows_sum_to_zero(n in 1usize..9, picks in proptest::collection::vec((0usize..9, 0usize..9), 0..20)) {
        let edges: Vec<(usize, usize)> = picks.into_iter().filter(|(a, b)| a != b && *a < n && *b < n).collect();
        let g = laplacian_spectrum(&adjacency_from_edges(n, &edges)).unwrap();
        for i in 0..n {
            prop_assert_eq!(g.laplacian.row(i).sum(), 0.0);
        }
        prop_assert!(g.eigenvalues.iter().all(|&l| l > -1e-10));
    }

    /// The innovation-vector form `y + B_hat nu_tilde` equals the
    /// consensus-plus-innovations form for arbitrary inputs and gains.
    #[test]
    fn update_forms_agree(seed in 0u64..10_000) {
        let spec = generate_paper_model(&small_params(5, 4, 1, 4), seed).unwrap();
        let pm = build_pseudo_model(&spec).unwrap();
        let m = spec.state_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gains = random_gains(&spec, &mut rng, 0.5);
        let ys: Vec<_> = (0..spec.agents()).map(|_| random_vec(m, &mut rng)).collect();
        let xs: Vec<_> = (0..spec.agents()).map(|_| random_vec(m, &mut rng)).collect();
        for (n, ag) in gains.agents.iter().enumerate() {
            let z = random_vec(spec.obs_maps[n].nrows(), &mut rng);
            let nb: Vec<&DVector<f64>> = ag.neighbors.iter().map(|&l| &ys[l]).collect();
            let u = agent_update(&pm, n, ag, &ys[n], &xs[n], &nb, &z);
            let d = ag.neighbors.len();
            let mut nu = DVector::zeros((d + 1) * m);
            for (q, &l) in ag.neighbors.iter().enumerate() {
                nu.rows_mut(q * m, m).copy_from(&(&ys[l] - &ys[n]));
            }
            let resid = &pm.obs_weight[n] * &z - &pm.pseudo_obs[n] * &ys[n] - &pm.null_obs[n] * &pm.null_proj * &xs[n];
            nu.rows_mut(d * m, m).copy_from(&resid);
            let y_f = &ys[n] + ag.stacked() * nu;
            prop_assert!((&u.y_filt - &y_f).amax() < 1e-10 * (1.0 + y_f.amax()));
            let x_f = &xs[n] + &ag.state_gain * (&y_f - &pm.info * &xs[n]);
            prop_assert!((&u.x_filt - &x_f).amax() < 1e-10 * (1.0 + x_f.amax()));
        }
    }

    /// Stacked errors follow the linear error recursions exactly, for any gains.
    #[test]
    fn error_recursions_hold_for_any_gains(seed in 0u64..10_000) {
        let spec = generate_paper_model(&small_params(5, 3, 1, 2), seed).unwrap();
        let pm = build_pseudo_model(&spec).unwrap();
        let (m, n) = (spec.state_dim(), spec.agents());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let (mut schedule, _) = precompute_schedule(&spec, 3).unwrap();
        for step in schedule.steps.iter_mut() {
            *step = random_gains(&spec, &mut rng, 0.3);
        }
        let traj = simulate_truth(&spec, 3, seed).unwrap();
        let ests = cikf_run(&spec, &pm, &schedule, &traj).unwrap();
        let stack = |vs: &[DVector<f64>]| DVector::from_iterator(n * m, vs.iter().flat_map(|v| v.iter().copied()));
        let ones = |v: &DVector<f64>| DVector::from_fn(n * v.len(), |k, _| v[k % v.len()]);
        for i in 0..3 {
            let x = &traj.states[i];
            let g = &schedule.steps[i];
            let t = transitions(g, &pm);
            let eps = stack(&ests[i].y_pred) - ones(&(&pm.info * x));
            let e = stack(&ests[i].x_pred) - ones(x);
            let w = stack(&(0..n).map(|k| &pm.obs_weight[k] * &traj.obs_noise[i][k]).collect::<Vec<_>>());
            let bi = g.innovation_operator();
            let eps_f = t.contraction.mul_vec(&eps) - bi.mul(&pm.null_obs_diag).mul_vec(&e) + bi.mul_vec(&w);
            let e_f = t.state_contraction.mul_vec(&e) + g.state_gain_operator().mul_vec(&eps_f);
            let want_eps = stack(&ests[i + 1].y_filt) - ones(&(&pm.info * x));
            let want_e = stack(&ests[i + 1].x_filt) - ones(x);
            prop_assert!((&eps_f - &want_eps).amax() < 1e-9 * (1.0 + want_eps.amax()));
            prop_assert!((&e_f - &want_e).amax() < 1e-9 * (1.0 + want_e.amax()));
        }
    }

    /// Centralized prediction MSE never exceeds the distributed per-agent MSE.
    #[test]
    fn centralized_filter_is_never_worse(seed in 0u64..10_000) {
        let spec = generate_paper_model(&small_params(6, 4, 2, 4), seed).unwrap();
        let (schedule, _) = precompute_schedule(&spec, 20).unwrap();
        let ckf = ckf_design(&spec, 20).unwrap();
        for i in 0..20 {
            prop_assert!(ckf.pred_trace[i] <= schedule.theory_pred_per_agent[i] * (1.0 + 1e-9));
        }
    }

    /// `rho(F_pseudo) <= |I ⊗ A_pseudo|_2 |W|_2` for arbitrary gains.
    #[test]
    fn radius_is_bounded_by_norm_product(seed in 0u64..10_000, scale in 0.01f64..1.0) {
        let spec = generate_paper_model(&small_params(5, 4, 2, 4), seed).unwrap();
        let pm = build_pseudo_model(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = transitions(&random_gains(&spec, &mut rng, scale), &pm);
        let rho = spectral_radius(&t.f_pseudo.to_dense());
        let a = BlockSparse::kron_identity(spec.agents(), &pm.pseudo_dynamics).to_dense();
        let bound = spectral_norm(&a) * spectral_norm(&t.contraction.to_dense());
        prop_assert!(rho <= bound * (1.0 + 1e-9) + 1e-12);
    }
}

/// Innovations of the state update at distinct steps are uncorrelated.
#[test]
fn state_innovations_are_white() {
    let spec = generate_paper_model(&small_params(6, 4, 2, 4), 3).unwrap();
    let pm = build_pseudo_model(&spec).unwrap();
    let horizon = 6;
    let runs = 2000;
    let (schedule, _) = precompute_schedule(&spec, horizon).unwrap();
    let m = spec.state_dim();
    let agent = 1;
    let comps = [0usize, 3];
    // Cross products nu_i[a] nu_j[b] for i < j, accumulated over runs.
    let pairs: Vec<(usize, usize)> = (0..horizon).flat_map(|i| (i + 1..horizon).map(move |j| (i, j))).collect();
    let mut sum = vec![0.0; pairs.len() * comps.len() * comps.len()];
    let mut sum_sq = sum.clone();
    for run in 0..runs {
        let traj = simulate_truth(&spec, horizon, 50_000 + run).unwrap();
        let ests = cikf_run(&spec, &pm, &schedule, &traj).unwrap();
        let nu: Vec<DVector<f64>> = (0..horizon)
            .map(|i| &ests[i + 1].y_filt[agent] - &pm.info * &ests[i].x_pred[agent])
            .collect();
        assert_eq!(nu[0].len(), m);
        let mut k = 0;
        for &(i, j) in &pairs {
            for &a in &comps {
                for &b in &comps {
                    let p = nu[i][a] * nu[j][b];
                    sum[k] += p;
                    sum_sq[k] += p * p;
                    k += 1;
                }
            }
        }
    }
    let r = runs as f64;
    for (s, sq) in sum.iter().zip(&sum_sq) {
        let mean = s / r;
        let se = ((sq / r - mean * mean) / (r - 1.0)).sqrt();
        assert!(mean.abs() <= 4.0 * se, "cross-correlation {mean} exceeds 4 SE ({se})");
    }
}
