//! Dynamics, sensing and communication model.
//!
//! The field evolves as `x[i+1] = A x[i] + v[i]` and agent `n` observes
//! `z_n[i] = H_n x[i] + r_n[i]`. Agents exchange estimates over an
//! undirected graph given by its adjacency matrix.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{Complex, DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{block_diag, from_rows, spectral_norm, sym_eigenvalues, to_rows};

/// Eigenvalues of the Laplacian below this are treated as zero.
pub const CONNECTIVITY_TOL: f64 = 1e-9;

/// Relative singular-value cutoff of the detectability rank test.
pub const DETECTABILITY_TOL: f64 = 1e-8;

/// Maximum number of graph draws when searching for a connected graph.
pub const CONNECTIVITY_RESAMPLES: usize = 1000;

/// Provenance attached to generated or derived model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// The physical (dynamics), sensing and cyber (graph) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct ModelSpec {
    pub dynamics: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
    pub obs_maps: Vec<DMatrix<f64>>,
    pub obs_noise: Vec<DMatrix<f64>>,
    pub x0_mean: DVector<f64>,
    pub initial_cov: DMatrix<f64>,
    pub adjacency: Vec<Vec<u8>>,
    pub meta: Option<ModelMeta>,
}

/// On-disk layout: matrices as row-major nested arrays.
#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ModelFile {
    M: usize,
    N: usize,
    M_n: Vec<usize>,
    A: Vec<Vec<f64>>,
    V: Vec<Vec<f64>>,
    H_n: Vec<Vec<Vec<f64>>>,
    R_n: Vec<Vec<Vec<f64>>>,
    x0_mean: Vec<f64>,
    Sigma0: Vec<Vec<f64>>,
    adjacency: Vec<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<ModelMeta>,
}

impl From<ModelSpec> for ModelFile {
    fn from(s: ModelSpec) -> Self {
        ModelFile {
            M: s.state_dim(),
            N: s.agents(),
            M_n: s.obs_dims(),
            A: to_rows(&s.dynamics),
            V: to_rows(&s.process_noise),
            H_n: s.obs_maps.iter().map(to_rows).collect(),
            R_n: s.obs_noise.iter().map(to_rows).collect(),
            x0_mean: s.x0_mean.iter().copied().collect(),
            Sigma0: to_rows(&s.initial_cov),
            adjacency: s.adjacency,
            meta: s.meta,
        }
    }
}

impl TryFrom<ModelFile> for ModelSpec {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let parse_all = |ms: &[Vec<Vec<f64>>]| ms.iter().map(|m| from_rows(m)).collect::<Result<Vec<_>>>();
        let mut obs_maps = parse_all(&f.H_n)?;
        // A 0-row observation block has no column count in nested-array form.
        for h in &mut obs_maps {
            if h.nrows() == 0 {
                *h = DMatrix::zeros(0, f.M);
            }
        }
        let spec = ModelSpec {
            dynamics: from_rows(&f.A)?,
            process_noise: from_rows(&f.V)?,
            obs_maps,
            obs_noise: parse_all(&f.R_n)?,
            x0_mean: DVector::from_vec(f.x0_mean),
            initial_cov: from_rows(&f.Sigma0)?,
            adjacency: f.adjacency,
            meta: f.meta,
        };
        spec.check_dimensions()?;
        if spec.state_dim() != f.M || spec.agents() != f.N || spec.obs_dims() != f.M_n {
            return Err(Error::Dimension(format!(
                "declared sizes M={}, N={}, M_n={:?} disagree with the matrices",
                f.M, f.N, f.M_n
            )));
        }
        Ok(spec)
    }
}

impl ModelSpec {
    pub fn state_dim(&self) -> usize {
        self.dynamics.nrows()
    }

    pub fn agents(&self) -> usize {
        self.obs_maps.len()
    }

    pub fn obs_dims(&self) -> Vec<usize> {
        self.obs_maps.iter().map(|h| h.nrows()).collect()
    }

    /// All observation maps stacked vertically.
    pub fn stacked_obs_map(&self) -> DMatrix<f64> {
        let m = self.state_dim();
        let rows: usize = self.obs_maps.iter().map(|h| h.nrows()).sum();
        let mut out = DMatrix::zeros(rows, m);
        let mut r = 0;
        for h in &self.obs_maps {
            out.rows_mut(r, h.nrows()).copy_from(h);
            r += h.nrows();
        }
        out
    }

    /// Block-diagonal observation-noise covariance of the stacked observation.
    pub fn stacked_obs_noise(&self) -> DMatrix<f64> {
        block_diag(&self.obs_noise)
    }

    /// Structural consistency: shapes agree and the graph is simple and undirected.
    pub fn check_dimensions(&self) -> Result<()> {
        let m = self.state_dim();
        let n = self.agents();
        let dim = |what: &str, got: (usize, usize), want: (usize, usize)| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Dimension(format!("{what} is {}x{}, expected {}x{}", got.0, got.1, want.0, want.1)))
            }
        };
        if m == 0 {
            return Err(Error::Dimension("state dimension must be at least 1".into()));
        }
        if n == 0 {
            return Err(Error::Dimension("at least one agent is required".into()));
        }
        dim("A", self.dynamics.shape(), (m, m))?;
        dim("V", self.process_noise.shape(), (m, m))?;
        dim("Sigma0", self.initial_cov.shape(), (m, m))?;
        dim("x0_mean", (self.x0_mean.len(), 1), (m, 1))?;
        if self.obs_noise.len() != n {
            return Err(Error::Dimension(format!("{} observation maps but {} noise covariances", n, self.obs_noise.len())));
        }
        for (k, (h, r)) in self.obs_maps.iter().zip(&self.obs_noise).enumerate() {
            dim(&format!("H_{k}"), h.shape(), (h.nrows(), m))?;
            dim(&format!("R_{k}"), r.shape(), (h.nrows(), h.nrows()))?;
        }
        check_adjacency(&self.adjacency, Some(n))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a model file. Malformed text is a format error; well-formed
    /// text with inconsistent shapes is a dimension error.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        ModelSpec::try_from(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// SHA-256 of the canonical serialization, ignoring provenance metadata.
    pub fn hash(&self) -> String {
        let mut bare = self.clone();
        bare.meta = None;
        let bytes = serde_json::to_vec(&bare).expect("model serialization is infallible");
        hex::encode(Sha256::digest(bytes))
    }
}

fn check_adjacency(adj: &[Vec<u8>], expected: Option<usize>) -> Result<()> {
    let n = adj.len();
    if let Some(want) = expected {
        if n != want {
            return Err(Error::Dimension(format!("adjacency has {n} rows for {want} agents")));
        }
    }
    for (i, row) in adj.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Dimension(format!("adjacency row {i} has {} entries, expected {n}", row.len())));
        }
        if row[i] != 0 {
            return Err(Error::Dimension(format!("adjacency has a self-loop at {i}")));
        }
        for (j, &v) in row.iter().enumerate() {
            if v > 1 {
                return Err(Error::Dimension(format!("adjacency entry ({i},{j}) = {v} is not 0/1")));
            }
            if adj[j][i] != v {
                return Err(Error::Dimension(format!("adjacency is not symmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// Laplacian of the communication graph with its spectrum and neighborhoods.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpectrum {
    pub laplacian: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Neighbors of each agent, excluding itself, ascending.
    pub neighborhoods: Vec<Vec<usize>>,
    pub degrees: Vec<usize>,
}

impl GraphSpectrum {
    /// Algebraic connectivity (zero for a single agent).
    pub fn algebraic_connectivity(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(0.0)
    }

    pub fn agents(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_connected(&self) -> bool {
        self.agents() <= 1 || self.algebraic_connectivity() > CONNECTIVITY_TOL
    }
}

pub fn laplacian_spectrum(adjacency: &[Vec<u8>]) -> Result<GraphSpectrum> {
    check_adjacency(adjacency, None)?;
    let n = adjacency.len();
    let neighborhoods: Vec<Vec<usize>> = adjacency
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, &v)| v == 1).map(|(j, _)| j).collect())
        .collect();
    let degrees: Vec<usize> = neighborhoods.iter().map(|nb| nb.len()).collect();
    let laplacian = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            degrees[i] as f64
        } else {
            -(adjacency[i][j] as f64)
        }
    });
    let eigenvalues = sym_eigenvalues(&laplacian);
    Ok(GraphSpectrum {
        laplacian,
        eigenvalues,
        neighborhoods,
        degrees,
    })
}

/// Outcome of one modeling-assumption check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    /// Human-facing name, e.g. "Assumption 5 (connectivity)".
    pub assumption: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
    pub algebraic_connectivity: f64,
    /// Eigenvalues of `A` on or outside the unit circle, as `(re, im)`.
    pub unstable_modes: Vec<(f64, f64)>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks the modeling assumptions. Structural problems are errors; a failed
/// assumption is a report entry.
pub fn validate_model(spec: &ModelSpec) -> Result<ValidationReport> {
    spec.check_dimensions()?;
    let mut checks = Vec::new();

    let mut gauss = Vec::new();
    for (k, r) in spec.obs_noise.iter().enumerate() {
        if let Some(msg) = definiteness_problem(r, true) {
            gauss.push(format!("R_{k} {msg}"));
        }
    }
    if let Some(msg) = definiteness_problem(&spec.process_noise, false) {
        gauss.push(format!("V {msg}"));
    }
    if let Some(msg) = definiteness_problem(&spec.initial_cov, false) {
        gauss.push(format!("Sigma0 {msg}"));
    }
    checks.push(AssumptionCheck {
        assumption: "Assumption 1 (Gaussian model)".into(),
        passed: gauss.is_empty(),
        detail: if gauss.is_empty() {
            "R_n positive-definite; V, Sigma0 positive-semidefinite".into()
        } else {
            gauss.join("; ")
        },
    });

    let (detectable, unstable_modes, detail) = detectability(&spec.dynamics, &spec.stacked_obs_map());
    checks.push(AssumptionCheck {
        assumption: "Assumption 4 (global detectability)".into(),
        passed: detectable,
        detail,
    });

    let graph = laplacian_spectrum(&spec.adjacency)?;
    let lambda2 = graph.algebraic_connectivity();
    checks.push(AssumptionCheck {
        assumption: "Assumption 5 (connectivity)".into(),
        passed: graph.is_connected(),
        detail: format!("lambda_2(L) = {lambda2:.6e}"),
    });

    Ok(ValidationReport {
        checks,
        algebraic_connectivity: lambda2,
        unstable_modes,
    })
}

/// Returns a description of the problem if `m` is not symmetric and
/// positive-(semi)definite.
fn definiteness_problem(m: &DMatrix<f64>, strict: bool) -> Option<String> {
    let scale = m.iter().fold(1.0_f64, |a, x| a.max(x.abs()));
    let asym = crate::linalg::max_abs_diff(m, &m.transpose());
    if asym > 1e-12 * scale {
        return Some(format!("is not symmetric (asymmetry {asym:.3e})"));
    }
    if m.is_empty() {
        return None;
    }
    let min = sym_eigenvalues(m)[0];
    if strict && min <= 0.0 {
        Some(format!("is not positive-definite (min eigenvalue {min:.3e})"))
    } else if !strict && min < -1e-10 * scale {
        Some(format!("is not positive-semidefinite (min eigenvalue {min:.3e})"))
    } else {
        None
    }
}

/// Rank test on `[A - lambda I; H]` for every eigenvalue with modulus at least one.
fn detectability(a: &DMatrix<f64>, h: &DMatrix<f64>) -> (bool, Vec<(f64, f64)>, String) {
    let m = a.nrows();
    let eig = a.complex_eigenvalues();
    let unstable: Vec<Complex<f64>> = eig.iter().copied().filter(|z| z.norm() >= 1.0).collect();
    let mut failing = Vec::new();
    for &lam in &unstable {
        let rows = m + h.nrows();
        let pencil = DMatrix::from_fn(rows, m, |i, j| {
            if i < m {
                let d = if i == j { lam } else { Complex::new(0.0, 0.0) };
                Complex::new(a[(i, j)], 0.0) - d
            } else {
                Complex::new(h[(i - m, j)], 0.0)
            }
        });
        let sv = pencil.singular_values();
        let cutoff = DETECTABILITY_TOL * sv.max();
        let rank = sv.iter().filter(|&&s| s > cutoff).count();
        if rank < m {
            failing.push(format!("{:.6}{:+.6}i (rank {rank} < {m})", lam.re, lam.im));
        }
    }
    let modes = unstable.iter().map(|z| (z.re, z.im)).collect();
    let detail = if failing.is_empty() {
        format!("{} unstable mode(s), all observable", unstable.len())
    } else {
        format!("unobservable unstable mode(s): {}", failing.join(", "))
    };
    (failing.is_empty(), modes, detail)
}

/// Parameters of the benchmark model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub state_dim: usize,
    pub agents: usize,
    pub obs_per_agent: usize,
    pub a_norm: f64,
    pub v_norm: f64,
    pub r_norm: f64,
    pub sigma0_norm: f64,
    pub edges: usize,
    pub dyn_degree: usize,
}

impl ModelParams {
    /// 50 sites observed by 50 agents over a 138-edge graph.
    pub fn paper() -> Self {
        ModelParams {
            state_dim: 50,
            agents: 50,
            obs_per_agent: 2,
            a_norm: 1.05,
            v_norm: 4.0,
            r_norm: 8.0,
            sigma0_norm: 16.0,
            edges: 138,
            dyn_degree: 4,
        }
    }

    /// Small model with the same norm targets, for quick runs.
    pub fn desk() -> Self {
        ModelParams {
            state_dim: 10,
            agents: 10,
            edges: 25,
            ..Self::paper()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::Parameter(format!("unknown preset `{other}` (expected paper or desk)"))),
        }
    }

    fn check(&self) -> Result<()> {
        let (m, n) = (self.state_dim, self.agents);
        if m == 0 || n == 0 {
            return Err(Error::Parameter("state dimension and agent count must be positive".into()));
        }
        if self.obs_per_agent == 0 || self.obs_per_agent > m {
            return Err(Error::Parameter(format!("observations per agent must be in 1..={m}")));
        }
        let max_edges = n * (n - 1) / 2;
        if self.edges > max_edges {
            return Err(Error::Parameter(format!("{} edges exceed the {max_edges} possible on {n} agents", self.edges)));
        }
        if self.edges + 1 < n {
            return Err(Error::Parameter(format!("{} edges cannot connect {n} agents", self.edges)));
        }
        for (name, v) in [
            ("a_norm", self.a_norm),
            ("v_norm", self.v_norm),
            ("r_norm", self.r_norm),
            ("sigma0_norm", self.sigma0_norm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive and finite")));
            }
        }
        Ok(())
    }
}

// Independent random streams per model component.
const STREAM_DYNAMICS: u64 = 1;
const STREAM_SITES: u64 = 2;
const STREAM_PROCESS: u64 = 3;
const STREAM_OBS_NOISE: u64 = 4;
const STREAM_INITIAL: u64 = 5;
const STREAM_GRAPH: u64 = 6;
const STREAM_MEAN: u64 = 7;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draws a benchmark model; fully determined by `(params, seed)`.
pub fn generate_paper_model(params: &ModelParams, seed: u64) -> Result<ModelSpec> {
    params.check()?;
    let (m, n, mn) = (params.state_dim, params.agents, params.obs_per_agent);

    let dynamics = lattice_dynamics(m, params.dyn_degree, params.a_norm, &mut stream(seed, STREAM_DYNAMICS));
    let obs_maps = site_selection(m, n, mn, &mut stream(seed, STREAM_SITES));
    let process_noise = spd_from(m, params.v_norm, &mut stream(seed, STREAM_PROCESS));
    let mut rng_r = stream(seed, STREAM_OBS_NOISE);
    let obs_noise = (0..n).map(|_| spd_from(mn, params.r_norm, &mut rng_r)).collect();
    let initial_cov = spd_from(m, params.sigma0_norm, &mut stream(seed, STREAM_INITIAL));
    let adjacency = connected_random_graph(n, params.edges, &mut stream(seed, STREAM_GRAPH))?;
    let mut rng_mean = stream(seed, STREAM_MEAN);
    let x0_mean = DVector::from_fn(m, |_, _| rng_mean.sample(StandardNormal));

    Ok(ModelSpec {
        dynamics,
        process_noise,
        obs_maps,
        obs_noise,
        x0_mean,
        initial_cov,
        adjacency,
        meta: Some(ModelMeta {
            version: crate::VERSION.into(),
            seed: Some(seed),
            config_hash: None,
        }),
    })
}

/// Sparse dynamics on a randomly relabeled ring lattice: each site depends on
/// itself and its `degree` lattice neighbors (`degree / 2` on each side).
fn lattice_dynamics(m: usize, degree: usize, norm: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut label: Vec<usize> = (0..m).collect();
    label.shuffle(rng);
    let half = degree / 2;
    let mut pattern = BTreeSet::new();
    for i in 0..m {
        pattern.insert((label[i], label[i]));
        for k in 1..=half {
            let j = (i + k) % m;
            pattern.insert((label[i], label[j]));
            pattern.insert((label[j], label[i]));
        }
    }
    let mut a = DMatrix::zeros(m, m);
    for &(i, j) in &pattern {
        a[(i, j)] = rng.random_range(f64::EPSILON..1.0);
    }
    let s = spectral_norm(&a);
    a * (norm / s)
}

/// 0/1 observation maps with one selected site per row.
fn site_selection(m: usize, n: usize, per_agent: usize, rng: &mut ChaCha8Rng) -> Vec<DMatrix<f64>> {
    let mut maps = vec![DMatrix::zeros(per_agent, m); n];
    if n * per_agent >= m {
        // Round-robin over a random ordering covers every site as evenly as possible.
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(rng);
        for (agent, h) in maps.iter_mut().enumerate() {
            for row in 0..per_agent {
                h[(row, order[(agent * per_agent + row) % m])] = 1.0;
            }
        }
    } else {
        for h in &mut maps {
            for (row, site) in index::sample(rng, m, per_agent).into_iter().enumerate() {
                h[(row, site)] = 1.0;
            }
        }
    }
    maps
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix,
/// with signs fixed so the distribution is Haar.
fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn spd_from(dim: usize, norm: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let q = random_orthogonal(dim, rng);
    let mut eig: Vec<f64> = (0..dim).map(|_| rng.random_range(0.1..1.0)).collect();
    let top = eig.iter().cloned().fold(0.0, f64::max);
    for e in &mut eig {
        *e *= norm / top;
    }
    // Pin the largest eigenvalue exactly.
    let k = eig.iter().position(|&e| e == eig.iter().cloned().fold(0.0, f64::max)).unwrap_or(0);
    eig[k] = norm;
    let d = DMatrix::from_diagonal(&DVector::from_vec(eig));
    let s = &q * d * q.transpose();
    crate::linalg::symmetrize(&s)
}

/// Random symmetric positive-definite matrix with largest eigenvalue `norm`.
pub fn random_spd(dim: usize, norm: f64, seed: u64) -> Result<DMatrix<f64>> {
    if dim == 0 {
        return Err(Error::Parameter("dimension must be at least 1".into()));
    }
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Parameter("spectral norm must be positive and finite".into()));
    }
    Ok(spd_from(dim, norm, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Erdős–Rényi graph with exactly `edges` edges, redrawn until connected.
fn connected_random_graph(n: usize, edges: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<u8>>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    for _ in 0..CONNECTIVITY_RESAMPLES {
        let mut adj = vec![vec![0u8; n]; n];
        for k in index::sample(rng, pairs.len(), edges) {
            let (i, j) = pairs[k];
            adj[i][j] = 1;
            adj[j][i] = 1;
        }
        if is_connected(&adj) {
            return Ok(adj);
        }
    }
    Err(Error::Generation(format!(
        "no connected graph with {edges} edges on {n} agents after {CONNECTIVITY_RESAMPLES} draws"
    )))
}

fn is_connected(adj: &[Vec<u8>]) -> bool {
    let n = adj.len();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if adj[i][j] == 1 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Adjacency of an undirected graph from an edge list.
pub fn adjacency_from_edges(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<u8>> {
    let mut adj = vec![vec![0u8; n]; n];
    for &(i, j) in edges {
        if i != j {
            adj[i][j] = 1;
            adj[j][i] = 1;
        }
    }
    adj
}

pub fn path_graph(n: usize) -> Vec<Vec<u8>> {
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    adjacency_from_edges(n, &edges)
}

pub fn complete_graph(n: usize) -> Vec<Vec<u8>> {
    let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    adjacency_from_edges(n, &edges)
}
