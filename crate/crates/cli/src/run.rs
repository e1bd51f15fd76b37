use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rand::Rng;
use sketchrate::linalg::{self, DenseMatrix, Vector};
use sketchrate::sketch::{self, Sampling};
use sketchrate::{matgen, newton, randsvd, rng, solver, spectral, LinearSystem, SketchFamily, SketchSpec};

use crate::config::{Experiment, ExperimentConfig};
use crate::table::{Metadata, ResultRow, ResultTable, RowKey};
use crate::CliError;

const MATRIX_STREAM: u64 = 1;
const SYSTEM_STREAM: u64 = 2;
const LABEL_STREAM: u64 = 3;
const SKETCH_STREAM: u64 = 10;

/// Tables produced by one experiment and the CSV files they were written to.
#[derive(Debug, Clone)]
pub struct Report {
    pub tables: Vec<ResultTable>,
    pub files: Vec<PathBuf>,
    pub metadata: Metadata,
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Cell {
    family: SketchFamily,
    k: usize,
    s: usize,
}

struct Input {
    name: String,
    a: DenseMatrix,
    labels: Option<Vec<f64>>,
}

pub fn metadata(config: &ExperimentConfig) -> Metadata {
    Metadata { config_hash: config.hash(), seed: config.master_seed, version: env!("CARGO_PKG_VERSION").to_string() }
}

/// Validates `config`, runs the experiment and writes one CSV per table into
/// the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report, CliError> {
    config.validate()?;
    let tables = compute_tables(config)?;
    let meta = metadata(config);
    let mut files = Vec::new();
    for t in &tables {
        let path = config.output.join(format!("{}.csv", t.name));
        let mut buf = Vec::new();
        t.write_csv(&mut buf, &meta)?;
        fs::write(&path, buf)?;
        files.push(path);
    }
    Ok(Report { tables, files, metadata: meta })
}

/// Runs the experiment without touching the file system, except for the
/// optional matrix cache.
pub fn compute_tables(config: &ExperimentConfig) -> Result<Vec<ResultTable>, CliError> {
    let input = load_input(config)?;
    let cells = grid(config, input.a.nrows())?;
    match config.experiment()? {
        Experiment::RateSweep => rate_sweep(config, &input, &cells).map(|t| vec![t]),
        Experiment::ConvergenceCurves => convergence_curves(config, &input, &cells).map(|t| vec![t]),
        Experiment::SurrogateCompare => surrogate_compare(config, &input, &cells).map(|t| vec![t]),
        Experiment::SparsitySweep => sparsity_sweep(config, &input, &cells).map(|t| vec![t]),
        Experiment::RandsvdErr => randsvd_err(config, &input, &cells).map(|t| vec![t]),
        Experiment::Eigendecay => eigendecay(config, &input, &cells).map(|t| vec![t]),
        Experiment::NewtonDemo => newton_demo(config, &input),
    }
}

fn load_input(config: &ExperimentConfig) -> Result<Input, CliError> {
    let mc = &config.matrix;
    let name = mc.name();
    if let Some(path) = &mc.dataset {
        if !path.is_file() {
            return Err(CliError::DatasetNotFound(path.clone()));
        }
        let (a, y) = matgen::parse_libsvm(path, None)?;
        let rows = mc.rows.min(a.nrows());
        let cols = mc.cols.min(a.ncols());
        return Ok(Input { name, a: matgen::leading_submatrix(&a, rows, cols), labels: Some(y[..rows].to_vec()) });
    }
    let seed = rng::derive_seed(config.master_seed, &[MATRIX_STREAM]);
    let cache = mc.cache.then(|| config.output.join(format!("matrix_{name}_{}x{}_{seed:016x}.csv", mc.rows, mc.cols)));
    if let Some(path) = cache.as_deref().filter(|p| p.is_file()) {
        let a = matgen::read_matrix_csv(fs::File::open(path)?)?;
        return Ok(Input { name, a, labels: None });
    }
    let a = if name == "identity" {
        DenseMatrix::identity(mc.rows, mc.cols)
    } else {
        matgen::named_matrix(&name, mc.rows, mc.cols, seed)?
    };
    if let Some(path) = cache {
        write_cache(&path, &a)?;
    }
    Ok(Input { name, a, labels: None })
}

fn write_cache(path: &Path, a: &DenseMatrix) -> Result<(), CliError> {
    let mut buf = Vec::new();
    matgen::write_matrix_csv(a, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn default_sparsity(n: usize, m: usize) -> usize {
    ((n as f64 * (n as f64).ln()).ceil() as usize).clamp(1, m)
}

fn grid(config: &ExperimentConfig, m: usize) -> Result<Vec<Cell>, CliError> {
    let n = config.matrix.cols;
    let mut cells = Vec::new();
    for family in config.families()? {
        for &k in &config.sketch.k {
            let sparsities = match family {
                SketchFamily::Less | SketchFamily::LessUniform if config.sketch.s.is_empty() => vec![default_sparsity(n, m)],
                SketchFamily::Less | SketchFamily::LessUniform => config.sketch.s.clone(),
                SketchFamily::RowSampling => vec![1],
                SketchFamily::Gaussian | SketchFamily::Rademacher => vec![m],
            };
            for s in sparsities {
                let cell = Cell { family, k, s };
                if !cells.contains(&cell) {
                    cells.push(cell);
                }
            }
        }
    }
    Ok(cells)
}

fn family_code(f: SketchFamily) -> u64 {
    SketchFamily::ALL.iter().position(|&g| g == f).expect("listed family") as u64
}

fn cell_seed(config: &ExperimentConfig, cell: &Cell) -> u64 {
    let base = config.sketch.seed.unwrap_or(config.master_seed);
    rng::derive_seed(base, &[SKETCH_STREAM, family_code(cell.family), cell.k as u64, cell.s as u64])
}

/// Sketch spec for a cell; LESS draws from the leverage distribution of `a`.
fn cell_spec(config: &ExperimentConfig, cell: &Cell, leverage: Option<&Sampling>) -> SketchSpec {
    let mut spec = SketchSpec::new(cell.family, cell.k, cell_seed(config, cell)).with_sparsity(cell.s);
    if cell.family == SketchFamily::Less {
        if let Some(p) = leverage {
            spec = spec.with_sampling(p.clone());
        }
    }
    spec
}

fn leverage_for(config: &ExperimentConfig, a: &DenseMatrix, cells: &[Cell]) -> Result<Option<Sampling>, CliError> {
    if cells.iter().any(|c| c.family == SketchFamily::Less) {
        Ok(Some(sketch::build_less_distribution(a, config.sketch.leverage_c)?.sampling()?))
    } else {
        Ok(None)
    }
}

fn system(config: &ExperimentConfig, a: &DenseMatrix) -> LinearSystem {
    matgen::make_system(a, rng::derive_seed(config.master_seed, &[SYSTEM_STREAM]))
}

fn key(input: &Input, cell: &Cell, index: usize) -> RowKey {
    RowKey { matrix: input.name.clone(), family: cell.family.to_string(), k: cell.k, s: cell.s, index }
}

/// Evaluates every cell in parallel and concatenates the rows in grid order.
fn per_cell<F>(cells: &[Cell], f: F) -> Result<Vec<ResultRow>, CliError>
where
    F: Fn(&Cell) -> Result<Vec<ResultRow>, CliError> + Sync + Send,
{
    let parts: Vec<Vec<ResultRow>> = cells.par_iter().map(f).collect::<Result<_, _>>()?;
    Ok(parts.into_iter().flatten().collect())
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn rate_sweep(config: &ExperimentConfig, input: &Input, cells: &[Cell]) -> Result<ResultTable, CliError> {
    let mut table = ResultTable::new(Experiment::RateSweep, &["rate", "rate_stderr", "s_min", "s_min_stderr", "truncated"]);
    let sys = system(config, &input.a);
    let leverage = leverage_for(config, &input.a, cells)?;
    table.rows = per_cell(cells, |cell| {
        let spec = cell_spec(config, cell, leverage.as_ref());
        let cfg = solver::SolverConfig::new(spec.clone(), config.max_iters, config.stop_tol);
        let rate = solver::estimate_rate(&sys, &cfg, config.runs, config.tail)?;
        let est = spectral::expected_projection(&input.a, &spec, config.trials)?;
        let values = vec![
            Some(rate.empirical_rate),
            Some(rate.stderr),
            Some(spectral::worst_case_rate(&est)),
            Some(est.lambda_min_stderr()),
            Some(rate.truncated as u8 as f64),
        ];
        Ok(vec![ResultRow { key: key(input, cell, 0), values, seed: spec.seed, trials: config.trials }])
    })?;
    Ok(table)
}

fn convergence_curves(config: &ExperimentConfig, input: &Input, cells: &[Cell]) -> Result<ResultTable, CliError> {
    let mut table = ResultTable::new(Experiment::ConvergenceCurves, &["rel_err_mean", "rel_err_min", "rel_err_max", "runs_active"]);
    let sys = system(config, &input.a);
    let leverage = leverage_for(config, &input.a, cells)?;
    table.rows = per_cell(cells, |cell| {
        let spec = cell_spec(config, cell, leverage.as_ref());
        let cfg = solver::SolverConfig::new(spec.clone(), config.max_iters, config.stop_tol);
        let logs = solver::solve_runs(&sys, &cfg, config.runs)?;
        let longest = logs.iter().map(|l| l.records.len()).max().unwrap_or(0);
        Ok((0..longest)
            .map(|t| {
                let vals: Vec<f64> = logs.iter().filter_map(|l| l.records.get(t)).map(|r| r.rel_err).collect();
                let (lo, hi) = min_max(vals.iter().copied());
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                ResultRow {
                    key: key(input, cell, t),
                    values: vec![Some(mean), Some(lo), Some(hi), Some(vals.len() as f64)],
                    seed: spec.seed,
                    trials: config.runs,
                }
            })
            .collect())
    })?;
    Ok(table)
}

fn surrogate_compare(config: &ExperimentConfig, input: &Input, cells: &[Cell]) -> Result<ResultTable, CliError> {
    let mut table = ResultTable::new(
        Experiment::SurrogateCompare,
        &["s_min", "s_min_stderr", "surrogate", "gap", "err_km1", "surrogate_implicit", "gap_implicit"],
    );
    let leverage = leverage_for(config, &input.a, cells)?;
    let sigma = linalg::singular_values(&input.a);
    let sigma_sq: Vec<f64> = sigma.iter().map(|s| s * s).collect();
    let smin_sq = sigma_sq[input.a.ncols().min(sigma_sq.len()) - 1];
    table.rows = per_cell(cells, |cell| {
        let spec = cell_spec(config, cell, leverage.as_ref());
        let cmp = spectral::surrogate_vs_empirical(&input.a, &spec, config.trials, config.err_trials)?;
        let implicit = spectral::gamma_implicit(&sigma_sq, cell.k)
            .ok()
            .map(|g| spectral::surrogate_rate(smin_sq, g, 0.0));
        let values = vec![
            Some(cmp.s_min),
            Some(cmp.s_min_stderr),
            Some(cmp.surrogate),
            Some(cmp.gap),
            Some(cmp.err_km1.mean),
            implicit,
            implicit.map(|v| (cmp.s_min - v).abs() / cmp.s_min),
        ];
        Ok(vec![ResultRow { key: key(input, cell, 0), values, seed: spec.seed, trials: config.trials }])
    })?;
    Ok(table)
}

fn sparsity_sweep(config: &ExperimentConfig, input: &Input, cells: &[Cell]) -> Result<ResultTable, CliError> {
    let mut table = ResultTable::new(Experiment::SparsitySweep, &["final_rel_err_mean", "final_rel_err_min", "final_rel_err_max"]);
    let sys = system(config, &input.a);
    let leverage = leverage_for(config, &input.a, cells)?;
    table.rows = per_cell(cells, |cell| {
        let spec = cell_spec(config, cell, leverage.as_ref());
        let cfg = solver::SolverConfig::new(spec.clone(), config.iterations, f64::MIN_POSITIVE);
        let logs = solver::solve_runs(&sys, &cfg, config.runs)?;
        let finals: Vec<f64> = logs.iter().map(|l| l.final_rel_err()).collect();
        let (lo, hi) = min_max(finals.iter().copied());
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        Ok(vec![ResultRow {
            key: key(input, cell, config.iterations),
            values: vec![Some(mean), Some(lo), Some(hi)],
            seed: spec.seed,
            trials: config.runs,
        }])
    })?;
    Ok(table)
}

fn randsvd_err(config: &ExperimentConfig, input: &Input, cells: &[Cell]) -> Result<ResultTable, CliError> {
    let mut table = ResultTable::new(Experiment::RandsvdErr, &["err_mean", "err_stderr", "best_rank", "bound", "bound_p"]);
    let leverage = leverage_for(config, &input.a, cells)?;
    let sigma = linalg::singular_values(&input.a);
    table.rows = per_cell(cells, |cell| {
        let spec = cell_spec(config, cell, leverage.as_ref());
        let err = randsvd::err_monte_carlo(&input.a, cell.k, &spec, config.err_trials)?;
        let bound = randsvd::err_upper_bound_min(&sigma, cell.k).ok();
        let values = vec![
            Some(err.mean),
            Some(err.stderr),
            Some(randsvd::best_rank_error(&sigma, cell.k)),
            bound.map(|b| b.0),
            bound.map(|b| b.1 as f64),
        ];
        Ok(vec![ResultRow { key: key(input, cell, 0), values, seed: spec.seed, trials: config.err_trials }])
    })?;
    Ok(table)
}

fn eigendecay(config: &ExperimentConfig, input: &Input, cells: &[Cell]) -> Result<ResultTable, CliError> {
    let mut table = ResultTable::new(Experiment::Eigendecay, &["eigenvalue", "predicted_decay", "empirical_decay"]);
    let sys = system(config, &input.a);
    let leverage = leverage_for(config, &input.a, cells)?;
    table.rows = per_cell(cells, |cell| {
        let spec = cell_spec(config, cell, leverage.as_ref());
        let est = spectral::expected_projection(&input.a, &spec, config.trials)?;
        let basis = &est.eigenvectors;
        // Start with equal weight on every eigen-direction and measure a single step.
        let mut cfg = solver::SolverConfig::new(spec.clone(), 1, f64::MIN_POSITIVE);
        cfg.x0 = Some(&sys.x_star + basis * Vector::repeat(basis.ncols(), 1.0));
        let decay = solver::eigencomponent_decay(&sys, &cfg, basis, config.runs)?;
        Ok(est
            .eigenvalues
            .iter()
            .zip(&decay)
            .enumerate()
            .map(|(l, (&lambda, &d))| ResultRow {
                key: key(input, cell, l),
                values: vec![Some(lambda), Some(1.0 - lambda), Some(d)],
                seed: spec.seed,
                trials: config.runs,
            })
            .collect())
    })?;
    Ok(table)
}

fn labels(config: &ExperimentConfig, input: &Input) -> Vector {
    let m = input.a.nrows();
    if let Some(y) = &input.labels {
        // LIBSVM files use {0, 1} or {−1, +1}; map both to ±1.
        return Vector::from_iterator(m, y.iter().map(|&v| if v > 0.0 { 1.0 } else { -1.0 }));
    }
    let n = input.a.ncols();
    let mut r = rng::stream(config.master_seed, &[LABEL_STREAM]);
    let w = Vector::from_iterator(n, (0..n).map(|_| r.random::<f64>() * 2.0 - 1.0));
    let scores = &input.a * w;
    Vector::from_iterator(m, scores.iter().map(|&z| {
        let p = 1.0 / (1.0 + (-z).exp());
        if r.random::<f64>() < p { 1.0 } else { -1.0 }
    }))
}

fn newton_demo(config: &ExperimentConfig, input: &Input) -> Result<Vec<ResultTable>, CliError> {
    let mut trace_table = ResultTable::new(Experiment::NewtonDemo, &["f_gap", "grad_norm", "eta", "line_search_failed"]);
    let mut cert_table = ResultTable::new(Experiment::NewtonDemo, &["rho_hat", "rho_stderr", "refined", "crude", "epsilon", "iterations", "monotone"]);
    cert_table.name = "newton_demo_certificate".into();
    let obj = newton::logistic_objective(input.a.clone(), labels(config, input), config.ridge)?;
    let n = input.a.ncols();
    let x0 = Vector::zeros(n);
    let (x_opt, f_star) = newton::newton_reference(&obj, &x0, 100, 1e-13)?;
    let h = newton::ConvexObjective::hessian(&obj, &x_opt);
    // The sketch acts on parameter space; a full-rank Hessian has uniform leverage.
    let cells = grid(config, n)?;
    let uniform = Sampling::uniform(n);
    let rows: Vec<(Vec<ResultRow>, ResultRow)> = cells
        .par_iter()
        .map(|cell| {
            let spec = cell_spec(config, cell, Some(&uniform));
            let (_, trace) = newton::rsn_solve(&obj, &x0, &spec, config.max_iters, 1e-12)?;
            let trace_rows = trace
                .records
                .iter()
                .map(|r| ResultRow {
                    key: key(input, cell, r.t),
                    values: vec![Some((r.f - f_star).max(0.0)), Some(r.grad_norm), Some(r.eta), Some(r.line_search_failed as u8 as f64)],
                    seed: spec.seed,
                    trials: 1,
                })
                .collect();
            let cert = newton::rho_certificate(&h, &spec, config.trials, config.err_trials)?;
            let cert_row = ResultRow {
                key: key(input, cell, 0),
                values: vec![
                    Some(cert.rho_hat),
                    Some(cert.rho_stderr),
                    Some(cert.refined),
                    Some(cert.crude),
                    Some(cert.epsilon),
                    Some(trace.iterations() as f64),
                    Some(trace.is_monotone() as u8 as f64),
                ],
                seed: spec.seed,
                trials: config.trials,
            };
            Ok((trace_rows, cert_row))
        })
        .collect::<Result<_, CliError>>()?;
    for (trace_rows, cert_row) in rows {
        trace_table.rows.extend(trace_rows);
        cert_table.rows.push(cert_row);
    }
    Ok(vec![trace_table, cert_table])
}
