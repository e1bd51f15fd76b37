//! Sketch-and-project iteration for consistent linear systems in a general
//! metric, with convergence logging and empirical rate estimation.

use std::io::Write;

use nalgebra::Cholesky;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, Vector};
use crate::matgen::LinearSystem;
use crate::rng;
use crate::sketch::{draw_sketch, Sketch, SketchFamily, SketchSpec};

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub sketch: SketchSpec,
    pub max_iters: usize,
    /// Stop once `‖x_t − x*‖_B / ‖x*‖_B` drops to this value.
    pub stop_tol: f64,
    /// Starting point; zero when absent.
    pub x0: Option<Vector>,
    /// Orthonormal columns `v_l` whose inner products `⟨x_t − x*, v_l⟩` are logged.
    pub record_eigencomponents: Option<DenseMatrix>,
}

impl SolverConfig {
    pub fn new(sketch: SketchSpec, max_iters: usize, stop_tol: f64) -> Self {
        Self { sketch, max_iters, stop_tol, x0: None, record_eigencomponents: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::InvalidArgument("stop_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub t: usize,
    pub dist: f64,
    pub rel_err: f64,
    /// Pseudoinverse fallback was used for the step that produced this iterate.
    pub fallback: bool,
    pub components: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterLog {
    pub run: u64,
    pub seed: u64,
    pub k: usize,
    pub family: SketchFamily,
    pub s: usize,
    pub records: Vec<IterRecord>,
}

impl IterLog {
    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.dist)
    }

    pub fn final_rel_err(&self) -> f64 {
        self.records.last().map(|r| r.rel_err).unwrap_or(f64::NAN)
    }

    pub fn write_csv_rows<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for r in &self.records {
            writeln!(w, "{},{},{:e},{:e},{}", self.run, r.t, r.dist, r.rel_err, u8::from(r.fallback))?;
        }
        Ok(())
    }
}

pub const ITERLOG_CSV_HEADER: &str = "run,t,dist,rel_err,fallback_flag";

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub empirical_rate: f64,
    pub tail_length: usize,
    pub runs: usize,
    /// Number of pooled per-iteration contractions.
    pub samples: usize,
    /// Standard error of the pooled mean.
    pub stderr: f64,
    /// Some run recorded fewer transitions than the requested tail.
    pub truncated: bool,
}

/// How pooled tail contractions are averaged; recorded in experiment output.
pub const RATE_POOLING: &str = "pooled-tail-equal-weight";

/// B-projection of `x` onto `{x : S A x = S b}`. Returns the new iterate and
/// whether the pseudoinverse fallback was needed.
pub fn project_step(x: &Vector, system: &LinearSystem, s: &Sketch) -> Result<(Vector, bool)> {
    let sa = s.apply(&system.a)?;
    let sb = s.apply_vec(&system.b)?;
    project_sketched(x, &sa, &sb, system.metric.as_ref())
}

/// Projection step from an already sketched pair `(SA, Sb)`.
pub fn project_sketched(
    x: &Vector,
    sa: &DenseMatrix,
    sb: &Vector,
    metric: Option<&DenseMatrix>,
) -> Result<(Vector, bool)> {
    let n = sa.ncols();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!("iterate has length {}, expected {n}", x.len())));
    }
    let residual = sa * x - sb;
    // columns of G = B⁻¹ (SA)ᵀ
    let g = match metric {
        Some(b) => {
            let chol = Cholesky::new(b.clone())
                .ok_or_else(|| Error::InvalidArgument("metric is not positive definite".into()))?;
            chol.solve(&sa.transpose())
        }
        None => sa.transpose(),
    };
    let w = sa * &g;
    let (z, fallback) = linalg::solve_psd(&w, &residual, n);
    Ok((x - g * z, fallback))
}

fn step_trial(run: u64, t: usize) -> u64 {
    rng::derive_seed(run, &[t as u64])
}

/// Runs sketch-and-project from `x0` (zero by default) with a fresh sketch per iteration.
pub fn solve(system: &LinearSystem, config: &SolverConfig, trial: u64) -> Result<(Vector, IterLog)> {
    config.validate()?;
    let m = system.rows();
    let n = system.cols();
    config.sketch.validate(m)?;
    let mut x = config.x0.clone().unwrap_or_else(|| Vector::zeros(n));
    let scale = system.metric_norm(&system.x_star);
    let rel = |d: f64| if scale > 0.0 { d / scale } else { d };
    let components = |x: &Vector| {
        config
            .record_eigencomponents
            .as_ref()
            .map(|v| v.tr_mul(&(x - &system.x_star)).iter().copied().collect::<Vec<f64>>())
    };
    let dist0 = system.metric_norm(&(&x - &system.x_star));
    let mut records = vec![IterRecord { t: 0, dist: dist0, rel_err: rel(dist0), fallback: false, components: components(&x) }];
    let mut t = 0;
    while t < config.max_iters && rel(records[t].dist) > config.stop_tol {
        t += 1;
        let s = draw_sketch(&config.sketch, m, step_trial(trial, t))?;
        let (next, fallback) = project_step(&x, system, &s)?;
        x = next;
        let dist = system.metric_norm(&(&x - &system.x_star));
        records.push(IterRecord { t, dist, rel_err: rel(dist), fallback, components: components(&x) });
    }
    let log = IterLog {
        run: trial,
        seed: config.sketch.seed,
        k: config.sketch.k,
        family: config.sketch.family,
        s: config.sketch.row_nnz(m),
        records,
    };
    Ok((x, log))
}

/// Runs `runs` independent solves, ordered by run index.
pub fn solve_runs(system: &LinearSystem, config: &SolverConfig, runs: usize) -> Result<Vec<IterLog>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|run| solve(system, config, run).map(|(_, log)| log))
        .collect()
}

/// Mean of `1 − ‖x_t − x*‖²/‖x_{t−1} − x*‖²` over the last `tail` recorded
/// transitions of every run, pooled with equal weight.
pub fn rate_from_logs(logs: &[IterLog], tail: usize) -> Result<RateReport> {
    if tail == 0 {
        return Err(Error::InvalidArgument("tail must be at least 1".into()));
    }
    let mut values = Vec::new();
    let mut truncated = false;
    for log in logs {
        let recorded = log.records.len();
        if recorded < 2 {
            return Err(Error::InsufficientIterations { run: log.run as usize, recorded });
        }
        let transitions = recorded - 1;
        if transitions < tail {
            truncated = true;
        }
        let start = recorded - transitions.min(tail);
        for t in start..recorded {
            let prev = log.records[t - 1].dist;
            if prev > 0.0 {
                let ratio = log.records[t].dist / prev;
                values.push(1.0 - ratio * ratio);
            }
        }
    }
    let (mean, stderr) = crate::stats::mean_stderr(&values);
    Ok(RateReport {
        empirical_rate: mean.clamp(0.0, 1.0),
        tail_length: tail,
        runs: logs.len(),
        samples: values.len(),
        stderr,
        truncated,
    })
}

pub fn estimate_rate(system: &LinearSystem, config: &SolverConfig, runs: usize, tail: usize) -> Result<RateReport> {
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    let logs = solve_runs(system, config, runs)?;
    rate_from_logs(&logs, tail)
}

/// Mean over runs and iterations of `⟨d_{t+1}, v_l⟩/⟨d_t, v_l⟩` for each column `v_l`,
/// using only iterations with `|⟨d_t, v_l⟩| > 1e-10`. Estimates `1 − λ_l(E[P])`.
pub fn eigencomponent_decay(
    system: &LinearSystem,
    config: &SolverConfig,
    basis: &DenseMatrix,
    runs: usize,
) -> Result<Vec<f64>> {
    let n = system.cols();
    if basis.nrows() != n {
        return Err(Error::DimensionMismatch(format!("basis has {} rows, expected {n}", basis.nrows())));
    }
    let mut cfg = config.clone();
    cfg.record_eigencomponents = Some(basis.clone());
    let logs = solve_runs(system, &cfg, runs)?;
    let cols = basis.ncols();
    let mut sums = vec![0.0; cols];
    let mut counts = vec![0usize; cols];
    for log in &logs {
        for pair in log.records.windows(2) {
            let prev = pair[0].components.as_ref().expect("components recorded");
            let next = pair[1].components.as_ref().expect("components recorded");
            for l in 0..cols {
                if prev[l].abs() > 1e-10 {
                    sums[l] += next[l] / prev[l];
                    counts[l] += 1;
                }
            }
        }
    }
    (0..cols)
        .map(|l| {
            if counts[l] == 0 {
                Err(Error::DegenerateComponent(l))
            } else {
                Ok(sums[l] / counts[l] as f64)
            }
        })
        .collect()
}

/// One-step contraction `‖x' − x*‖²/‖x − x*‖²` at a fixed point `x` over
/// `trials` independent sketches: returns (mean, standard error).
pub fn one_step_contraction(system: &LinearSystem, x: &Vector, spec: &SketchSpec, trials: usize) -> Result<(f64, f64)> {
    let m = system.rows();
    let d0 = system.metric_norm(&(x - &system.x_star));
    if d0 == 0.0 {
        return Err(Error::InvalidArgument("x equals the solution".into()));
    }
    let values: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let s = draw_sketch(spec, m, trial)?;
            let (next, _) = project_step(x, system, &s)?;
            let d = system.metric_norm(&(next - &system.x_star));
            Ok((d / d0) * (d / d0))
        })
        .collect::<Result<_>>()?;
    Ok(crate::stats::mean_stderr(&values))
}
