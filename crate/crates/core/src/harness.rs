//! Monte-Carlo evaluation of the distributed filter against its theoretical
//! covariance recursion and against the centralized filter.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covgain::GainSchedule;
use crate::error::{Error, Result};
use crate::filter::{cikf_run, ckf_design, ckf_estimates, Simulator};
use crate::linalg::to_db;
use crate::model::ModelSpec;
use crate::pseudo::build_pseudo_model;

/// Runs are simulated in parallel in chunks of this size and folded in order.
const RUN_CHUNK: usize = 64;

/// Per-step MSE curves. Row `i` is the one-step prediction of `x_{i+1}`
/// from data up to step `i`. Empirical series are empty when `runs == 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub version: String,
    pub model_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub seed: u64,
    pub runs: usize,
    /// `trace(Sigma_{i+1|i})` over all agents.
    pub theory_cikf_total: Vec<f64>,
    /// The same divided by the number of agents.
    pub theory_cikf_per_agent: Vec<f64>,
    /// `trace(Sigma^c_{i+1|i})` of the centralized filter.
    pub theory_ckf: Vec<f64>,
    /// Squared prediction-error norm, averaged over runs and agents.
    pub emp_cikf: Vec<f64>,
    /// Squared prediction-error norm summed over agents, averaged over runs.
    pub emp_cikf_total: Vec<f64>,
    pub emp_ckf: Vec<f64>,
    pub theory_cikf_db: Vec<f64>,
    pub theory_ckf_db: Vec<f64>,
    pub emp_cikf_db: Vec<f64>,
    pub emp_ckf_db: Vec<f64>,
    /// Raw error moments, when requested.
    #[serde(skip)]
    pub moments: Option<ErrorMoments>,
}

impl MseReport {
    pub fn horizon(&self) -> usize {
        self.theory_cikf_total.len()
    }

    fn fill_db(&mut self) {
        let db = |v: &[f64]| v.iter().map(|&x| to_db(x)).collect();
        self.theory_cikf_db = db(&self.theory_cikf_per_agent);
        self.theory_ckf_db = db(&self.theory_ckf);
        self.emp_cikf_db = db(&self.emp_cikf);
        self.emp_ckf_db = db(&self.emp_ckf);
    }
}

/// Accumulated first and second moments of a random vector over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSums {
    pub count: usize,
    pub sum: DVector<f64>,
    /// Sum of outer products `v v^T`.
    pub outer: DMatrix<f64>,
    /// Entrywise sum of `(v v^T)^2`, for standard errors of `outer`.
    pub outer_sq: DMatrix<f64>,
}

impl MomentSums {
    pub fn new(dim: usize) -> Self {
        MomentSums {
            count: 0,
            sum: DVector::zeros(dim),
            outer: DMatrix::zeros(dim, dim),
            outer_sq: DMatrix::zeros(dim, dim),
        }
    }

    pub fn push(&mut self, v: &DVector<f64>) {
        self.count += 1;
        self.sum += v;
        let o = v * v.transpose();
        self.outer_sq += o.component_mul(&o);
        self.outer += o;
    }

    pub fn mean(&self) -> DVector<f64> {
        &self.sum / self.count as f64
    }

    /// Standard error of each mean component, from the sample variance.
    pub fn mean_std_error(&self) -> DVector<f64> {
        let r = self.count as f64;
        let mean = self.mean();
        DVector::from_fn(self.sum.len(), |i, _| {
            let var = (self.outer[(i, i)] - r * mean[i] * mean[i]) / (r - 1.0);
            (var.max(0.0) / r).sqrt()
        })
    }

    /// Uncentered second moment `E[v v^T]`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        &self.outer / self.count as f64
    }

    /// Standard error of each entry of the uncentered second moment.
    pub fn second_moment_std_error(&self) -> DMatrix<f64> {
        let r = self.count as f64;
        let m = self.second_moment();
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            let var = (self.outer_sq[(i, j)] - r * m[(i, j)] * m[(i, j)]) / (r - 1.0);
            (var.max(0.0) / r).sqrt()
        })
    }
}

/// Moments of the joint error `[e; eps]` (state errors of all agents, then
/// pseudo-state errors of all agents), estimate minus truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMoments {
    /// Element `i`: errors of the prediction of step `i + 1`.
    pub pred: Vec<MomentSums>,
    /// Element `i`: errors of the filtered estimate of step `i`.
    pub filt: Vec<MomentSums>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MonteCarloOptions {
    /// Accumulate raw error moments (memory grows with `(2MN)^2` per step).
    pub moments: bool,
}

struct RunOutput {
    cikf: Vec<f64>,
    ckf: Vec<f64>,
    pred: Vec<DVector<f64>>,
    filt: Vec<DVector<f64>>,
}

/// Simulates `runs` independent trajectories (run `k` uses seed
/// `base_seed + k`) and averages squared prediction errors. The result does
/// not depend on the number of threads.
pub fn run_montecarlo(
    spec: &ModelSpec,
    schedule: &GainSchedule,
    runs: usize,
    horizon: usize,
    base_seed: u64,
    options: MonteCarloOptions,
) -> Result<MseReport> {
    let pm = build_pseudo_model(spec)?;
    if schedule.model_hash != pm.model_hash {
        return Err(Error::Config("gain schedule does not belong to this model".into()));
    }
    if schedule.horizon() < horizon {
        return Err(Error::Config(format!(
            "gain schedule covers {} steps, {horizon} requested",
            schedule.horizon()
        )));
    }
    let agents = spec.agents();
    let m = spec.state_dim();
    let ckf = ckf_design(spec, horizon)?;
    let sim = Simulator::new(spec)?;

    let one_run = |k: usize| -> Result<RunOutput> {
        let traj = sim.run(horizon, base_seed.wrapping_add(k as u64));
        let ests = cikf_run(spec, &pm, schedule, &traj)?;
        let c = ckf_estimates(spec, &ckf, &traj)?;
        let mut out = RunOutput {
            cikf: Vec::with_capacity(horizon),
            ckf: Vec::with_capacity(horizon),
            pred: Vec::new(),
            filt: Vec::new(),
        };
        for i in 0..horizon {
            let x = &traj.states[i + 1];
            let est = &ests[i + 1];
            out.cikf.push(est.x_pred.iter().map(|xp| (xp - x).norm_squared()).sum());
            out.ckf.push((&c.x_pred[i + 1] - x).norm_squared());
            if options.moments {
                let joint = |xs: &[DVector<f64>], ys: &[DVector<f64>], truth: &DVector<f64>| {
                    let y = &pm.info * truth;
                    let mut v = DVector::zeros(2 * agents * m);
                    for n in 0..agents {
                        v.rows_mut(n * m, m).copy_from(&(&xs[n] - truth));
                        v.rows_mut((agents + n) * m, m).copy_from(&(&ys[n] - &y));
                    }
                    v
                };
                out.pred.push(joint(&est.x_pred, &est.y_pred, x));
                out.filt.push(joint(&est.x_filt, &est.y_filt, &traj.states[i]));
            }
        }
        Ok(out)
    };

    let mut sum_cikf = vec![0.0; horizon];
    let mut sum_ckf = vec![0.0; horizon];
    let mut moments = options.moments.then(|| ErrorMoments {
        pred: vec![MomentSums::new(2 * agents * m); horizon],
        filt: vec![MomentSums::new(2 * agents * m); horizon],
    });
    let mut start = 0;
    while start < runs {
        let end = (start + RUN_CHUNK).min(runs);
        let chunk: Vec<RunOutput> = (start..end).into_par_iter().map(one_run).collect::<Result<_>>()?;
        for out in chunk {
            for i in 0..horizon {
                sum_cikf[i] += out.cikf[i];
                sum_ckf[i] += out.ckf[i];
            }
            if let Some(mo) = moments.as_mut() {
                for i in 0..horizon {
                    mo.pred[i].push(&out.pred[i]);
                    mo.filt[i].push(&out.filt[i]);
                }
            }
        }
        start = end;
    }

    let (emp_cikf, emp_cikf_total, emp_ckf) = if runs == 0 {
        (Vec::new(), Vec::new(), Vec::new())
    } else {
        let r = runs as f64;
        (
            sum_cikf.iter().map(|s| s / r / agents as f64).collect(),
            sum_cikf.iter().map(|s| s / r).collect(),
            sum_ckf.iter().map(|s| s / r).collect(),
        )
    };
    let mut report = MseReport {
        version: crate::VERSION.into(),
        model_hash: pm.model_hash.clone(),
        config_hash: None,
        seed: base_seed,
        runs,
        theory_cikf_total: schedule.theory_pred_total[..horizon].to_vec(),
        theory_cikf_per_agent: schedule.theory_pred_per_agent[..horizon].to_vec(),
        theory_ckf: ckf.pred_trace.clone(),
        emp_cikf,
        emp_cikf_total,
        emp_ckf,
        theory_cikf_db: Vec::new(),
        theory_ckf_db: Vec::new(),
        emp_cikf_db: Vec::new(),
        emp_ckf_db: Vec::new(),
        moments,
    };
    report.fill_db();
    Ok(report)
}

/// Number of trailing steps averaged for steady-state values.
pub const STEADY_STATE_WINDOW: usize = 5;

/// Successive dB changes below this count as converged.
pub const CONVERGENCE_DB: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub theory_cikf_ss_db: f64,
    pub theory_ckf_ss_db: f64,
    /// Distributed minus centralized steady state.
    pub theory_gap_db: f64,
    pub emp_cikf_ss_db: Option<f64>,
    pub emp_ckf_ss_db: Option<f64>,
    pub emp_gap_db: Option<f64>,
    pub theory_cikf_convergence_step: Option<usize>,
    pub theory_ckf_convergence_step: Option<usize>,
    /// Horizon too short for a steady state, or a curve never settled.
    pub provisional: bool,
}

/// Mean of the last few values.
pub fn steady_state(series: &[f64]) -> f64 {
    let k = series.len().min(STEADY_STATE_WINDOW);
    if k == 0 {
        return f64::NAN;
    }
    series[series.len() - k..].iter().sum::<f64>() / k as f64
}

/// First step whose change from the previous step is below the threshold.
pub fn convergence_step(series_db: &[f64]) -> Option<usize> {
    (1..series_db.len()).find(|&i| (series_db[i] - series_db[i - 1]).abs() < CONVERGENCE_DB)
}

pub fn mse_compare(report: &MseReport) -> Result<ComparisonSummary> {
    if report.horizon() == 0 {
        return Err(Error::Parameter("report has no steps".into()));
    }
    let cikf_ss = steady_state(&report.theory_cikf_db);
    let ckf_ss = steady_state(&report.theory_ckf_db);
    let has_emp = !report.emp_cikf_db.is_empty();
    let emp_cikf_ss = has_emp.then(|| steady_state(&report.emp_cikf_db));
    let emp_ckf_ss = has_emp.then(|| steady_state(&report.emp_ckf_db));
    let conv_cikf = convergence_step(&report.theory_cikf_db);
    let conv_ckf = convergence_step(&report.theory_ckf_db);
    let settled = |c: Option<usize>| c.is_some_and(|s| s + STEADY_STATE_WINDOW <= report.horizon());
    Ok(ComparisonSummary {
        theory_cikf_ss_db: cikf_ss,
        theory_ckf_ss_db: ckf_ss,
        theory_gap_db: cikf_ss - ckf_ss,
        emp_gap_db: emp_cikf_ss.zip(emp_ckf_ss).map(|(a, b)| a - b),
        emp_cikf_ss_db: emp_cikf_ss,
        emp_ckf_ss_db: emp_ckf_ss,
        theory_cikf_convergence_step: conv_cikf,
        theory_ckf_convergence_step: conv_ckf,
        provisional: report.horizon() < 2 * STEADY_STATE_WINDOW || !settled(conv_cikf) || !settled(conv_ckf),
    })
}

pub const CSV_COLUMNS: [&str; 10] = [
    "step",
    "theory_cikf_total",
    "theory_cikf_per_agent",
    "theory_ckf",
    "emp_cikf",
    "emp_ckf",
    "theory_cikf_db",
    "theory_ckf_db",
    "emp_cikf_db",
    "emp_ckf_db",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::Parameter(format!("unknown format `{other}` (expected csv or json)"))),
        }
    }
}

/// CSV with `#`-prefixed provenance lines, then the header and one row per step.
pub fn report_csv(report: &MseReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# version={}", report.version);
    let _ = writeln!(out, "# model_hash={}", report.model_hash);
    if let Some(h) = &report.config_hash {
        let _ = writeln!(out, "# config_hash={h}");
    }
    let _ = writeln!(out, "# seed={}", report.seed);
    let _ = writeln!(out, "# runs={}", report.runs);
    let mut w = csv::Writer::from_writer(Vec::new());
    let cell = |v: &[f64], i: usize| v.get(i).map(|x| x.to_string()).unwrap_or_default();
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for i in 0..report.horizon() {
        w.write_record([
            i.to_string(),
            cell(&report.theory_cikf_total, i),
            cell(&report.theory_cikf_per_agent, i),
            cell(&report.theory_ckf, i),
            cell(&report.emp_cikf, i),
            cell(&report.emp_ckf, i),
            cell(&report.theory_cikf_db, i),
            cell(&report.theory_ckf_db, i),
            cell(&report.emp_cikf_db, i),
            cell(&report.emp_ckf_db, i),
        ])
        .expect("in-memory write");
    }
    out.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("ASCII output"));
    out
}

/// Parses a CSV written by [`report_csv`]. The per-agent-summed empirical
/// series is not part of the CSV and is left empty.
pub fn report_from_csv(text: &str) -> Result<MseReport> {
    let bad = |what: String| Error::Format(format!("report CSV: {what}"));
    let mut report = MseReport {
        version: String::new(),
        model_hash: String::new(),
        config_hash: None,
        seed: 0,
        runs: 0,
        theory_cikf_total: Vec::new(),
        theory_cikf_per_agent: Vec::new(),
        theory_ckf: Vec::new(),
        emp_cikf: Vec::new(),
        emp_cikf_total: Vec::new(),
        emp_ckf: Vec::new(),
        theory_cikf_db: Vec::new(),
        theory_ckf_db: Vec::new(),
        emp_cikf_db: Vec::new(),
        emp_ckf_db: Vec::new(),
        moments: None,
    };
    for meta in text.lines().filter_map(|l| l.strip_prefix('#')) {
        let (k, v) = meta.trim().split_once('=').ok_or_else(|| bad("malformed comment line".into()))?;
        match k {
            "version" => report.version = v.into(),
            "model_hash" => report.model_hash = v.into(),
            "config_hash" => report.config_hash = Some(v.into()),
            "seed" => report.seed = v.parse().map_err(|_| bad("seed".into()))?,
            "runs" => report.runs = v.parse().map_err(|_| bad("runs".into()))?,
            _ => {}
        }
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(CSV_COLUMNS) {
        return Err(bad("unexpected header".into()));
    }
    for row in rdr.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let targets: [&mut Vec<f64>; 9] = [
            &mut report.theory_cikf_total,
            &mut report.theory_cikf_per_agent,
            &mut report.theory_ckf,
            &mut report.emp_cikf,
            &mut report.emp_ckf,
            &mut report.theory_cikf_db,
            &mut report.theory_ckf_db,
            &mut report.emp_cikf_db,
            &mut report.emp_ckf_db,
        ];
        for (cell, target) in row.iter().skip(1).zip(targets) {
            if !cell.is_empty() {
                target.push(cell.parse().map_err(|_| bad(format!("bad number `{cell}`")))?);
            }
        }
    }
    Ok(report)
}

pub fn export_results(report: &MseReport, path: &Path, format: ExportFormat) -> Result<()> {
    let text = match format {
        ExportFormat::Csv => report_csv(report),
        ExportFormat::Json => serde_json::to_string_pretty(report)?,
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn import_results(path: &Path) -> Result<MseReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim_start().starts_with('{') {
        Ok(serde_json::from_str(&text)?)
    } else {
        report_from_csv(&text)
    }
}

/// Self-contained SVG line chart of the dB curves.
pub fn report_svg(report: &MseReport) -> String {
    let (w, h, pad) = (720.0, 440.0, 60.0);
    let series: Vec<(&str, &str, &[f64], bool)> = vec![
        ("CIKF theory", "#1f77b4", &report.theory_cikf_db, false),
        ("CKF theory", "#d62728", &report.theory_ckf_db, false),
        ("CIKF empirical", "#1f77b4", &report.emp_cikf_db, true),
        ("CKF empirical", "#d62728", &report.emp_ckf_db, true),
    ];
    let values: Vec<f64> = series.iter().flat_map(|s| s.2.iter().copied()).filter(|v| v.is_finite()).collect();
    let (mut lo, mut hi) = values.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    if values.is_empty() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        hi = lo + 1.0;
    }
    let steps = report.horizon().max(2) - 1;
    let px = |i: usize| pad + (w - 2.0 * pad) * i as f64 / steps as f64;
    let py = |v: f64| h - pad - (h - 2.0 * pad) * (v - lo) / (hi - lo);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">step</text>"#, w / 2.0, h - 20.0);
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" font-size="12" transform="rotate(-90 18 {})" text-anchor="middle">MSE (dB)</text>"#,
        h / 2.0,
        h / 2.0
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" font-size="10" text-anchor="end">{v:.2}</text>"#, pad - 6.0, py(v) + 3.0);
    }
    let _ = writeln!(out, r#"<text x="{pad}" y="{}" font-size="10" text-anchor="middle">0</text>"#, h - pad + 14.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">{steps}</text>"#, w - pad, h - pad + 14.0);
    for (k, (name, color, data, dashed)) in series.iter().enumerate() {
        if data.is_empty() {
            continue;
        }
        let pts: Vec<String> = data
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, &v)| format!("{:.2},{:.2}", px(i), py(v)))
            .collect();
        let dash = if *dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#, pts.join(" "));
        let ly = pad + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash}/><text x="{}" y="{}" font-size="11">{name}</text>"#,
            w - pad - 150.0,
            w - pad - 120.0,
            w - pad - 115.0,
            ly + 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(report: &MseReport, path: &Path) -> Result<()> {
    std::fs::write(path, report_svg(report)).map_err(|e| Error::io(path, e))
}
