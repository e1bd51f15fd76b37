//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::panic;
use std::path::Path;
use std::time::Instant;

use sketchrate::linalg::{self, DenseMatrix, Vector};
use sketchrate::sketch::{self, draw_sketch, Sampling, SketchFamily, SketchSpec};
use sketchrate::{matgen, newton, randsvd, rng, solver, spectral, stats};
use sketchrate_cli::{emit_plot_data, run_experiment, Experiment, ExperimentConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn desk(name: &str) -> DenseMatrix {
    matgen::named_matrix(name, 1000, 50, 1).unwrap()
}

fn symmetry_oracle() -> Outcome {
    let n = 100;
    let a = DenseMatrix::identity(n, n);
    let mut ok = true;
    let mut detail = Vec::new();
    for k in [5, 10, 20] {
        let spec = SketchSpec::gaussian(k, 100 + k as u64);
        let lam = spectral::worst_case_rate(&spectral::expected_projection(&a, &spec, 4000).unwrap());
        let err = randsvd::err_monte_carlo(&a, k, &spec, 50).unwrap();
        let expected = k as f64 / n as f64;
        let lam_ok = (lam - expected).abs() <= 0.02;
        let err_ok = (err.mean - (n - k) as f64).abs() <= 3.0 * err.stderr + 1e-9;
        ok &= lam_ok && err_ok;
        detail.push(format!("k={k}: lambda_min={lam:.4} (target {expected}), Err={:.6}", err.mean));
    }
    check(ok, detail.join("; "))
}

fn worst_case_identity() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for seed in 1..=3u64 {
        let a = matgen::gen_gaussian_unit_rows(200, 30, seed);
        let sys = matgen::make_system(&a, seed + 10);
        let spec = SketchSpec::gaussian(5, seed + 20);
        let est = spectral::expected_projection(&a, &spec.with_seed(seed + 30), 40000).unwrap();
        let v = est.eigenvectors.column(est.eigenvectors.ncols() - 1).into_owned();
        let x = &sys.x_star + &v;
        let (mean, se) = solver::one_step_contraction(&sys, &x, &spec, 2000).unwrap();
        let predicted = 1.0 - est.lambda_min();
        let tol = 3.0 * (se * se + est.lambda_min_stderr().powi(2)).sqrt();
        ok &= (mean - predicted).abs() <= tol;
        detail.push(format!("seed {seed}: contraction {mean:.4} vs {predicted:.4} (tol {tol:.4})"));
    }
    check(ok, detail.join("; "))
}

fn surrogate_tightness() -> Outcome {
    let a = desk("gaus");
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for k in (5..=25).step_by(5) {
        let cmp = spectral::surrogate_vs_empirical(&a, &SketchSpec::gaussian(k, 300 + k as u64), 1600, 50).unwrap();
        worst = worst.max(cmp.gap);
        detail.push(format!("k={k}: {:.4}/{:.4} gap {:.3}", cmp.s_min, cmp.surrogate, cmp.gap));
    }
    check(worst <= 0.10, format!("max gap {worst:.3}; {}", detail.join(", ")))
}

/// Rayleigh quotients of the Monte-Carlo `E[P]` in the right singular basis
/// against the surrogate eigenvalues, with `ε̂ = 5/√r`.
fn sandwich(a: &DenseMatrix, spec: &SketchSpec) -> (bool, String) {
    let k = spec.k;
    let sigma = linalg::singular_values(a);
    let r = spectral::stable_rank(&sigma);
    if r < 4.0 * k as f64 {
        return (false, format!("stable rank {r:.1} < 4k"));
    }
    let eps = 5.0 / r.sqrt();
    let err = randsvd::err_monte_carlo(a, k - 1, &spec.with_seed(spec.seed ^ 0xA5), 50).unwrap();
    let sur = spectral::surrogate_projection(a, k, spectral::GammaMode::MonteCarlo, Some(err.mean)).unwrap();
    let est = spectral::expected_projection(a, spec, 1600).unwrap();
    let lam = est.rayleigh_in_basis(&sur.basis);
    let mut worst: f64 = 0.0;
    for (l, p) in lam.iter().zip(&sur.eigenvalues) {
        worst = worst.max((l / p - 1.0).abs());
    }
    (worst <= eps, format!("k={k}: max |lambda/pbar - 1| = {worst:.3} <= eps {eps:.3}"))
}

fn subgaussian_sandwich() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for name in ["flat", "lin.01"] {
        let a = desk(name);
        for k in [5, 10] {
            let (pass, d) = sandwich(&a, &SketchSpec::new(SketchFamily::Rademacher, k, 400 + k as u64));
            ok &= pass;
            detail.push(format!("{name} {d}"));
        }
    }
    check(ok, detail.join("; "))
}

fn rate_scaling() -> Outcome {
    let ks = [5usize, 10, 15, 20, 25];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, min_slope) in [("flat", 0.9), ("lin.01", 0.9), ("poly1.5", 1.2)] {
        let a = desk(name);
        let sys = matgen::make_system(&a, 2);
        let rates: Vec<f64> = ks
            .iter()
            .map(|&k| {
                let cfg = solver::SolverConfig::new(SketchSpec::gaussian(k, 500 + k as u64), 100, 1e-12);
                solver::estimate_rate(&sys, &cfg, 20, 50).unwrap().empirical_rate
            })
            .collect();
        let x: Vec<f64> = ks.iter().map(|&k| (k as f64 / 5.0).ln()).collect();
        let y: Vec<f64> = rates.iter().map(|r| (r / rates[0]).ln()).collect();
        let slope = stats::slope(&x, &y);
        ok &= slope >= min_slope;
        detail.push(format!("{name}: slope {slope:.3} (min {min_slope})"));
    }
    check(ok, detail.join("; "))
}

fn err_bound() -> Outcome {
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for name in ["gaus", "flat", "lin.01", "lin.035", "poly1", "poly1.5", "step10"] {
        let a = desk(name);
        let sigma = linalg::singular_values(&a);
        for k in 6..=20 {
            let (bound, _) = randsvd::err_upper_bound_min(&sigma, k).unwrap();
            let err = randsvd::err_monte_carlo(&a, k, &SketchSpec::gaussian(k, 600 + k as u64), 50).unwrap();
            ok &= bound.is_finite() && bound > 0.0 && err.mean <= bound + 3.0 * err.stderr;
            worst = worst.max((err.mean - 3.0 * err.stderr) / bound);
        }
    }
    check(ok, format!("7 matrices, k = 6..20; max (Err - 3se)/bound = {worst:.3}"))
}

fn monotonicity() -> Outcome {
    let mut violations = 0usize;
    let mut calls = 0usize;
    let mut worst: f64 = 0.0;
    let problems = 1000u64;
    for p in 0..problems {
        let family = SketchFamily::ALL[(p % 5) as usize];
        let m = 10 + (rng::derive_seed(p, &[1]) % 30) as usize;
        let n = 2 + (rng::derive_seed(p, &[2]) % 8) as usize;
        let a = matgen::gen_gaussian_unit_rows(m, n, p);
        let mut sys = matgen::make_system(&a, p + 1);
        if p % 2 == 1 {
            let g = matgen::gen_gaussian_unit_rows(n + 2, n, p + 2);
            sys = sys.with_metric(g.transpose() * g + DenseMatrix::identity(n, n) * 0.01).unwrap();
        }
        let probs = sketch::leverage_scores(&a).unwrap();
        let total = probs.sum();
        let sampling = Sampling::new(probs.iter().map(|v| v / total).collect()).unwrap();
        let k = 1 + (p as usize % m.min(6));
        let spec = SketchSpec::new(family, k, p).with_sparsity(1 + p as usize % m).with_sampling(sampling);
        for t in 0..100u64 {
            let s = draw_sketch(&spec, m, t).unwrap();
            let x = matgen::gen_gaussian_unit_rows(1, n, p * 1000 + t).row(0).transpose() * 10.0;
            let (next, _) = solver::project_step(&x, &sys, &s).unwrap();
            let before = sys.metric_norm(&(&x - &sys.x_star));
            let after = sys.metric_norm(&(next - &sys.x_star));
            calls += 1;
            worst = worst.max(after / before);
            if after > before * (1.0 + 1e-10) {
                violations += 1;
            }
        }
    }
    check(violations == 0, format!("{calls} steps, {violations} violations, max ratio {worst:.12}"))
}

fn mean_final_error(sys: &sketchrate::LinearSystem, spec: SketchSpec) -> f64 {
    let cfg = solver::SolverConfig::new(spec, 30, f64::MIN_POSITIVE);
    let logs = solver::solve_runs(sys, &cfg, 30).unwrap();
    logs.iter().map(|l| l.final_rel_err()).sum::<f64>() / logs.len() as f64
}

fn sparsity_robustness() -> Outcome {
    let a = desk("gaus");
    let sys = matgen::make_system(&a, 2);
    let n = 50f64;
    let s = (n * n.ln()).ceil() as usize;
    let mut ok = true;
    let mut detail = Vec::new();
    for k in [10, 20] {
        let dense = mean_final_error(&sys, SketchSpec::gaussian(k, 800 + k as u64));
        let sparse = mean_final_error(&sys, SketchSpec::new(SketchFamily::LessUniform, k, 900 + k as u64).with_sparsity(s));
        let ratio = sparse / dense;
        ok &= (0.5..=2.0).contains(&ratio);
        detail.push(format!("k={k}: less_uniform(s={s}) {sparse:.3e} vs gaussian {dense:.3e}, ratio {ratio:.3}"));
    }
    check(ok, detail.join("; "))
}

fn less_sandwich() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for name in ["flat", "lin.01"] {
        let a = desk(name);
        let sigma = linalg::singular_values(&a);
        let kappa = sigma[0] / sigma[sigma.len() - 1];
        let n = a.ncols() as f64;
        let s = (n * (kappa * n).ln()).ceil() as usize;
        let sampling = sketch::build_less_distribution(&a, 1.0).unwrap().sampling().unwrap();
        for k in [5, 10] {
            let spec = SketchSpec::new(SketchFamily::Less, k, 1000 + k as u64).with_sparsity(s).with_sampling(sampling.clone());
            let (pass, d) = sandwich(&a, &spec);
            ok &= pass;
            detail.push(format!("{name} s={s} {d}"));
        }
    }
    check(ok, detail.join("; "))
}

fn newton_convergence() -> Outcome {
    let (m, n) = (500, 50);
    let x = matgen::gen_gaussian_unit_rows(m, n, 11) * (n as f64).sqrt();
    let w = matgen::gen_gaussian_unit_rows(1, n, 12).row(0).transpose();
    let scores = &x * w;
    let y = Vector::from_iterator(m, scores.iter().enumerate().map(|(i, &z)| {
        let flip = rng::derive_seed(13, &[i as u64]).is_multiple_of(10);
        if (z >= 0.0) != flip { 1.0 } else { -1.0 }
    }));
    let obj = newton::logistic_objective(x, y, 1e-2).unwrap();
    let x0 = Vector::zeros(n);
    let (x_star, f_star) = newton::newton_reference(&obj, &x0, 100, 1e-14).unwrap();
    let spec = SketchSpec::gaussian(10, 14);
    let (_, trace) = newton::rsn_solve(&obj, &x0, &spec, 500, 1e-12).unwrap();
    let reached = trace.records.iter().find(|r| r.f - f_star <= 1e-6).map(|r| r.t);
    let monotone = trace.is_monotone();
    let h = newton::ConvexObjective::hessian(&obj, &x_star);
    let cert = newton::rho_certificate(&h, &spec, 1600, 50).unwrap();
    let cert_ok = cert.crude <= cert.rho_hat + 3.0 * cert.rho_stderr;
    check(
        reached.is_some() && monotone && cert_ok,
        format!(
            "f - f* <= 1e-6 at t = {reached:?}, monotone {monotone}; crude {:.4} <= rho_hat {:.4} + 3*{:.4}",
            cert.crude, cert.rho_hat, cert.rho_stderr
        ),
    )
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "svg"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn reproducibility() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut compared = 0;
    for exp in Experiment::ALL {
        let mut outputs = Vec::new();
        for (run, threads) in [(0, 1), (1, 2)] {
            let mut cfg = ExperimentConfig { experiment: Some(exp), master_seed: 42, ..Default::default() };
            cfg.output = root.path().join(format!("{exp}-{run}"));
            cfg.runs = 4;
            cfg.trials = 40;
            cfg.err_trials = 5;
            cfg.tail = 5;
            cfg.max_iters = 20;
            cfg.iterations = 10;
            cfg.matrix.rows = 200;
            cfg.matrix.cols = 15;
            cfg.sketch.families = vec!["gaussian".into(), "less".into(), "less_uniform".into()];
            cfg.sketch.k = vec![4, 8];
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| -> Result<(), sketchrate_cli::CliError> {
                let report = run_experiment(&cfg)?;
                for t in &report.tables {
                    emit_plot_data(t, exp.as_str(), &cfg.output, &report.metadata, true)?;
                }
                Ok(())
            })
            .map_err(|e| format!("{exp}: {e}"))?;
            outputs.push(read_all(&cfg.output));
        }
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            return Err(format!("{exp}: outputs differ between runs"));
        }
        compared += outputs[0].len();
    }
    Ok(format!("{compared} CSV/SVG files byte-identical across two runs (1 and 2 threads)"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("symmetry oracle on the identity", symmetry_oracle),
        ("worst-case rate identity", worst_case_identity),
        ("surrogate tightness on gaus", surrogate_tightness),
        ("sub-gaussian surrogate sandwich", subgaussian_sandwich),
        ("rate-vs-k scaling", rate_scaling),
        ("randomized SVD error bound", err_bound),
        ("deterministic monotonicity", monotonicity),
        ("sparsity robustness", sparsity_robustness),
        ("LESS surrogate sandwich", less_sandwich),
        ("randomized subspace Newton", newton_convergence),
        ("reproducibility", reproducibility),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("{}", i + 1);
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {id:>2} PASS {name} ({secs:.1}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {id:>2} FAIL {name} ({secs:.1}s): {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
