//! Randomized Subspace Newton: each step solves a sketched Newton system in the
//! Hessian metric, with Armijo backtracking on the step size.

use std::io::Write;

use nalgebra::Cholesky;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, Vector};
use crate::randsvd;
use crate::sketch::{draw_sketch, Sketch, SketchFamily, SketchSpec};
use crate::spectral::{self, ProjectionEstimate};

pub trait ConvexObjective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn hessian(&self, x: &Vector) -> DenseMatrix;
}

/// `f(x) = ½ xᵀHx − cᵀx`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub h: DenseMatrix,
    pub c: Vector,
}

impl ConvexObjective for Quadratic {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.h * x)) - self.c.dot(x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        &self.h * x - &self.c
    }

    fn hessian(&self, _x: &Vector) -> DenseMatrix {
        self.h.clone()
    }
}

/// Ridge-regularized logistic loss `(1/N)Σ ln(1 + exp(−y_i x_iᵀw)) + (ridge/2)‖w‖²`.
#[derive(Debug, Clone)]
pub struct Logistic {
    pub x: DenseMatrix,
    pub y: Vector,
    pub ridge: f64,
}

pub fn logistic_objective(x: DenseMatrix, y: Vector, ridge: f64) -> Result<Logistic> {
    if !(ridge > 0.0) {
        return Err(Error::InvalidArgument(format!("ridge = {ridge} must be positive")));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} samples but {} labels", x.nrows(), y.len())));
    }
    Ok(Logistic { x, y, ridge })
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl ConvexObjective for Logistic {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn value(&self, w: &Vector) -> f64 {
        let margins = &self.x * w;
        let n = self.y.len() as f64;
        let loss: f64 = margins.iter().zip(self.y.iter()).map(|(m, y)| softplus(-y * m)).sum();
        loss / n + 0.5 * self.ridge * w.norm_squared()
    }

    fn gradient(&self, w: &Vector) -> Vector {
        let margins = &self.x * w;
        let n = self.y.len() as f64;
        let coef = Vector::from_iterator(
            self.y.len(),
            margins.iter().zip(self.y.iter()).map(|(m, y)| -y * sigmoid(-y * m) / n),
        );
        self.x.tr_mul(&coef) + w * self.ridge
    }

    fn hessian(&self, w: &Vector) -> DenseMatrix {
        let margins = &self.x * w;
        let n = self.y.len() as f64;
        let mut weighted = self.x.clone();
        for (i, m) in margins.iter().enumerate() {
            let s = sigmoid(*m);
            weighted.row_mut(i).scale_mut(s * (1.0 - s) / n);
        }
        let mut h = self.x.tr_mul(&weighted);
        for i in 0..h.nrows() {
            h[(i, i)] += self.ridge;
        }
        h
    }
}

/// `x − η·Sᵀ(SHSᵀ)†S∇f(x)`, the minimizer of `‖x' − x‖_H` under the sketched
/// Newton constraint. The flag reports the pseudoinverse fallback.
pub fn rsn_step<F: ConvexObjective + ?Sized>(obj: &F, x: &Vector, s: &Sketch, eta: f64) -> Result<(Vector, bool)> {
    let (dir, fallback) = rsn_direction(obj, x, s)?;
    Ok((x - dir * eta, fallback))
}

fn rsn_direction<F: ConvexObjective + ?Sized>(obj: &F, x: &Vector, s: &Sketch) -> Result<(Vector, bool)> {
    let g = obj.gradient(x);
    let h = obj.hessian(x);
    sketched_newton_direction(&g, &h, s)
}

fn sketched_newton_direction(g: &Vector, h: &DenseMatrix, s: &Sketch) -> Result<(Vector, bool)> {
    let sh = s.apply(h)?;
    let w = s.apply(&sh.transpose())?;
    let rhs = s.apply_vec(g)?;
    let (z, fallback) = linalg::solve_psd(&w, &rhs, h.nrows());
    Ok((s.transpose_apply_vec(&z)?, fallback))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonRecord {
    pub t: usize,
    pub f: f64,
    pub grad_norm: f64,
    /// Accepted step size; 0 when the line search failed.
    pub eta: f64,
    /// Trial index of the sketch used to leave this iterate.
    pub seed: u64,
    pub line_search_failed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NewtonTrace {
    pub records: Vec<NewtonRecord>,
}

impl NewtonTrace {
    pub const CSV_HEADER: &'static str = "t,f_gap,grad_norm,eta,seed";

    pub fn f_best(&self) -> f64 {
        self.records.iter().map(|r| r.f).fold(f64::INFINITY, f64::min)
    }

    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// `f(x_t)` never increases.
    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].f <= w[0].f)
    }

    /// CSV rows with `f_gap` measured against `f_star`, or against the best value seen.
    pub fn write_csv_rows<W: Write>(&self, w: &mut W, f_star: Option<f64>) -> std::io::Result<()> {
        let reference = f_star.unwrap_or_else(|| self.f_best());
        for r in &self.records {
            writeln!(w, "{},{:e},{:e},{:e},{}", r.t, r.f - reference, r.grad_norm, r.eta, r.seed)?;
        }
        Ok(())
    }
}

const ARMIJO_C: f64 = 1e-4;
const MAX_SHRINKS: usize = 50;

/// RSN with Armijo backtracking (start η = 1, halve, at most 50 shrinks).
/// Stops when `‖∇f‖ ≤ tol` or after `max_iters` sketches.
pub fn rsn_solve<F: ConvexObjective + ?Sized>(
    obj: &F,
    x0: &Vector,
    spec: &SketchSpec,
    max_iters: usize,
    tol: f64,
) -> Result<(Vector, NewtonTrace)> {
    let m = obj.dim();
    spec.validate(m)?;
    let mut x = x0.clone();
    let mut f = obj.value(&x);
    let mut g = obj.gradient(&x);
    let mut trace = NewtonTrace::default();
    trace.records.push(NewtonRecord { t: 0, f, grad_norm: g.norm(), eta: 0.0, seed: 0, line_search_failed: false });
    for t in 1..=max_iters {
        if g.norm() <= tol {
            break;
        }
        let trial = t as u64;
        let s = draw_sketch(spec, m, trial)?;
        let (dir, _) = sketched_newton_direction(&g, &obj.hessian(&x), &s)?;
        let slope = g.dot(&dir);
        let mut accepted = None;
        if slope > 0.0 {
            let mut eta = 1.0;
            for _ in 0..=MAX_SHRINKS {
                let cand = &x - &dir * eta;
                let fc = obj.value(&cand);
                if fc <= f - ARMIJO_C * eta * slope {
                    accepted = Some((cand, fc, eta));
                    break;
                }
                eta *= 0.5;
            }
        }
        let failed = accepted.is_none();
        let eta = match accepted {
            Some((cand, fc, eta)) => {
                x = cand;
                f = fc;
                g = obj.gradient(&x);
                eta
            }
            None => 0.0,
        };
        trace.records.push(NewtonRecord { t, f, grad_norm: g.norm(), eta, seed: trial, line_search_failed: failed });
    }
    Ok((x, trace))
}

/// Damped full Newton with the same line search, run to `tol` on the gradient norm.
pub fn newton_reference<F: ConvexObjective + ?Sized>(obj: &F, x0: &Vector, max_iters: usize, tol: f64) -> Result<(Vector, f64)> {
    let mut x = x0.clone();
    let mut f = obj.value(&x);
    for _ in 0..max_iters {
        let g = obj.gradient(&x);
        if g.norm() <= tol {
            break;
        }
        let h = obj.hessian(&x);
        let dir = Cholesky::new(h)
            .ok_or_else(|| Error::InvalidArgument("Hessian is not positive definite".into()))?
            .solve(&g);
        let slope = g.dot(&dir);
        let mut eta = 1.0;
        let mut moved = false;
        for _ in 0..=MAX_SHRINKS {
            let cand = &x - &dir * eta;
            let fc = obj.value(&cand);
            if fc <= f - ARMIJO_C * eta * slope {
                x = cand;
                f = fc;
                moved = true;
                break;
            }
            eta *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((x, f))
}

#[derive(Debug, Clone)]
pub struct RhoCertificate {
    /// `λ⁺_min` of the Monte-Carlo mean of `H^{1/2}Sᵀ(SHSᵀ)†SH^{1/2}` on the range of `H`.
    pub rho_hat: f64,
    pub rho_stderr: f64,
    /// `(1−ε)·kλ⁺_min(H)/Err(H^{1/2}, k−1)`.
    pub refined: f64,
    /// `kλ⁺_min(H)/tr(H)`.
    pub crude: f64,
    pub epsilon: f64,
    pub lambda_min_pos: f64,
    pub rank: usize,
    pub err_km1: f64,
}

/// Positive eigenpairs of a PSD matrix, dropping eigenvalues below `m·eps·λ_max`.
pub fn positive_eigen(h: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let m = h.nrows();
    let (vals, vecs) = linalg::symmetric_eigen_desc(h);
    let cut = m as f64 * f64::EPSILON * vals.first().copied().unwrap_or(0.0).max(0.0);
    let r = vals.iter().take_while(|&&v| v > cut).count();
    (vals[..r].to_vec(), vecs.columns(0, r).into_owned())
}

pub fn rho_certificate(h: &DenseMatrix, spec: &SketchSpec, trials: usize, err_trials: usize) -> Result<RhoCertificate> {
    let m = h.nrows();
    if trials < 2 {
        return Err(Error::InvalidArgument("rho_certificate needs at least 2 trials".into()));
    }
    let (vals, u) = positive_eigen(h);
    let n = vals.len();
    if n == 0 {
        return Err(Error::InvalidArgument("Hessian has no positive eigenvalues".into()));
    }
    let d_half = Vector::from_iterator(n, vals.iter().map(|v| v.sqrt()));
    let h_half = &u * DenseMatrix::from_diagonal(&d_half) * u.transpose();
    let nb = trials.min(20);
    let batches: Vec<(DenseMatrix, usize)> = (0..nb)
        .into_par_iter()
        .map(|b| {
            let (start, end) = (b * trials / nb, (b + 1) * trials / nb);
            let mut sum = DenseMatrix::zeros(n, n);
            for t in start..end {
                let s = draw_sketch(spec, m, t as u64)?;
                let p = linalg::row_projection(&s.apply(&h_half)?);
                sum += u.transpose() * p * &u;
            }
            Ok((sum, end - start))
        })
        .collect::<Result<_>>()?;
    let est = ProjectionEstimate::from_batches(batches);
    let k = spec.k;
    let lambda_min_pos = vals[n - 1];
    let trace: f64 = vals.iter().sum();
    let err = randsvd::err_monte_carlo(&h_half, k - 1, &spec.with_seed(spectral::err_seed(spec.seed)), err_trials)?;
    let epsilon = match spec.family {
        SketchFamily::Gaussian => spectral::gaussian_rate_bound(1.0, 1.0, k, n).epsilon,
        _ => 1.0 / (trace / vals[0]).sqrt() + k as f64 / n as f64,
    };
    Ok(RhoCertificate {
        rho_hat: est.lambda_min(),
        rho_stderr: est.lambda_min_stderr(),
        refined: (1.0 - epsilon) * k as f64 * lambda_min_pos / err.mean,
        crude: k as f64 * lambda_min_pos / trace,
        epsilon,
        lambda_min_pos,
        rank: n,
        err_km1: err.mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgen;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn spd(m: usize, seed: u64) -> DenseMatrix {
        let g = matgen::gen_gaussian_unit_rows(2 * m, m, seed);
        g.transpose() * g + DenseMatrix::identity(m, m) * 0.1
    }

    fn logistic_problem(samples: usize, features: usize, seed: u64) -> Logistic {
        let x = matgen::gen_gaussian_unit_rows(samples, features, seed);
        let mut r = rng::stream(seed, &[99]);
        let w_true = Vector::from_iterator(features, (0..features).map(|_| r.sample::<f64, _>(StandardNormal) * 3.0));
        let y = Vector::from_iterator(
            samples,
            (&x * &w_true).iter().map(|m| if *m + 0.3 * r.sample::<f64, _>(StandardNormal) >= 0.0 { 1.0 } else { -1.0 }),
        );
        logistic_objective(x, y, 1e-2).unwrap()
    }

    #[test]
    fn logistic_value_at_zero() {
        let obj = logistic_problem(30, 4, 1);
        assert!((obj.value(&Vector::zeros(4)) - 2f64.ln()).abs() < 1e-15);
        assert!(logistic_objective(DenseMatrix::zeros(2, 2), Vector::zeros(2), 0.0).is_err());
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let obj = logistic_problem(40, 5, 2);
        let w = Vector::from_vec(vec![0.3, -1.2, 0.7, 2.0, -0.4]);
        let g = obj.gradient(&w);
        let h = 1e-5;
        for i in 0..5 {
            let mut e = Vector::zeros(5);
            e[i] = h;
            let fd = (obj.value(&(&w + &e)) - obj.value(&(&w - &e))) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * g.norm(), "coordinate {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn logistic_hessian_is_bounded_below_by_ridge() {
        let obj = logistic_problem(40, 5, 3);
        let (vals, _) = linalg::symmetric_eigen_desc(&obj.hessian(&Vector::from_element(5, 0.5)));
        assert!(*vals.last().unwrap() >= 1e-2 - 1e-10);
    }

    #[test]
    fn full_sketch_is_exact_newton_on_quadratic() {
        let h = spd(6, 1);
        let c = Vector::from_fn(6, |i, _| i as f64 - 2.0);
        let q = Quadratic { h: h.clone(), c: c.clone() };
        let s = draw_sketch(&SketchSpec::gaussian(6, 4), 6, 0).unwrap();
        let (x, _) = rsn_step(&q, &Vector::zeros(6), &s, 1.0).unwrap();
        let x_opt = h.clone().cholesky().unwrap().solve(&c);
        assert!((x - x_opt).norm() < 1e-8);
    }

    #[test]
    fn stationary_point_is_fixed() {
        let h = spd(5, 2);
        let c = Vector::from_fn(5, |i, _| 1.0 + i as f64);
        let x_opt = h.clone().cholesky().unwrap().solve(&c);
        let q = Quadratic { h, c };
        let s = draw_sketch(&SketchSpec::gaussian(2, 4), 5, 0).unwrap();
        let (x, _) = rsn_step(&q, &x_opt, &s, 1.0).unwrap();
        assert!((x - x_opt).norm() < 1e-12);
    }

    #[test]
    fn identity_hessian_step_is_sketch_and_project() {
        let c = Vector::from_fn(7, |i, _| (i as f64).cos());
        let q = Quadratic { h: DenseMatrix::identity(7, 7), c: c.clone() };
        let sys = matgen::LinearSystem { a: DenseMatrix::identity(7, 7), b: c.clone(), x_star: c, metric: None };
        let x = Vector::from_fn(7, |i, _| i as f64 * 0.5);
        let s = draw_sketch(&SketchSpec::gaussian(3, 9), 7, 2).unwrap();
        let (x_rsn, _) = rsn_step(&q, &x, &s, 1.0).unwrap();
        let (x_sp, _) = crate::solver::project_step(&x, &sys, &s).unwrap();
        assert!((x_rsn - x_sp).norm() < 1e-10);
    }

    #[test]
    fn sketched_constraint_holds() {
        let obj = logistic_problem(50, 6, 4);
        let x = Vector::from_element(6, 0.2);
        let s = draw_sketch(&SketchSpec::gaussian(3, 1), 6, 0).unwrap();
        let eta = 0.7;
        let (x_new, _) = rsn_step(&obj, &x, &s, eta).unwrap();
        let h = obj.hessian(&x);
        let lhs = s.apply_vec(&(&h * (&x - &x_new))).unwrap();
        let rhs = s.apply_vec(&obj.gradient(&x)).unwrap() * eta;
        assert!((&lhs - &rhs).norm() <= 1e-8 * rhs.norm());
    }

    #[test]
    fn full_sketch_converges_in_two_iterations_on_quadratic() {
        let h = spd(8, 5);
        let c = Vector::from_fn(8, |i, _| i as f64);
        let q = Quadratic { h, c };
        let (_, trace) = rsn_solve(&q, &Vector::zeros(8), &SketchSpec::gaussian(8, 1), 50, 1e-9).unwrap();
        assert!(trace.iterations() <= 2);
    }

    #[test]
    fn trace_csv() {
        let trace = NewtonTrace {
            records: vec![
                NewtonRecord { t: 0, f: 2.0, grad_norm: 1.0, eta: 0.0, seed: 0, line_search_failed: false },
                NewtonRecord { t: 1, f: 1.5, grad_norm: 0.5, eta: 1.0, seed: 1, line_search_failed: false },
            ],
        };
        assert!(trace.is_monotone());
        let mut buf = Vec::new();
        trace.write_csv_rows(&mut buf, Some(1.0)).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0,1e0,1e0,0e0,0\n1,5e-1,5e-1,1e0,1\n");
    }

    #[test]
    fn rank_deficient_hessian_certificate() {
        let g = matgen::gen_gaussian_unit_rows(10, 4, 1);
        let h = &g * g.transpose(); // 10×10, rank 4
        let cert = rho_certificate(&h, &SketchSpec::gaussian(2, 3), 200, 20).unwrap();
        assert_eq!(cert.rank, 4);
        let (vals, _) = positive_eigen(&h);
        assert_eq!(cert.lambda_min_pos, vals[3]);
        assert!(cert.rho_hat > 0.0 && cert.rho_hat <= 1.0 + 1e-8);
    }
}
