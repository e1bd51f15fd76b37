//! Randomized SVD via a sketched row space, its Frobenius residual, Monte-Carlo
//! estimates of the expected residual `Err(A, k)` and analytic bounds.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::sketch::{draw_sketch, Sketch, SketchFamily, SketchSpec};
use crate::stats;

/// Default number of sketches averaged by [`err_monte_carlo`].
pub const DEFAULT_ERR_TRIALS: usize = 50;

#[derive(Debug, Clone)]
pub struct LowRankFactorization {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl LowRankFactorization {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

/// Rank-`≤k` factorization from a given sketch.
pub fn rand_svd_with(a: &DenseMatrix, s: &Sketch) -> Result<LowRankFactorization> {
    let sa = s.apply(a)?;
    let q = linalg::row_space_basis(&sa);
    if q.ncols() == 0 {
        return Err(Error::DegenerateSketch);
    }
    let aq = a * &q;
    let small = linalg::svd_sorted(&aq);
    Ok(LowRankFactorization { u: small.u, sigma: small.sigma, v: q * small.v })
}

/// Randomized SVD with the first sketch (trial 0) of `spec`.
pub fn rand_svd(a: &DenseMatrix, spec: &SketchSpec) -> Result<LowRankFactorization> {
    if spec.k > a.ncols() {
        return Err(Error::InvalidArgument(format!("k = {} exceeds n = {}", spec.k, a.ncols())));
    }
    let s = draw_sketch(spec, a.nrows(), 0)?;
    rand_svd_with(a, &s)
}

/// `‖A(I − (SA)†SA)‖_F²` for one sketch.
pub fn residual_error(a: &DenseMatrix, s: &Sketch) -> Result<f64> {
    let sa = s.apply(a)?;
    let q = linalg::row_space_basis(&sa);
    let aq = a * &q;
    Ok(linalg::frobenius_sq(&(a - aq * q.transpose())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub k: usize,
    pub family: SketchFamily,
    pub s: usize,
}

impl ErrEstimate {
    pub const CSV_HEADER: &'static str = "k,family,s,trials,mean,stderr";

    pub fn write_csv_row<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{},{},{},{},{:e},{:e}", self.k, self.family, self.s, self.trials, self.mean, self.stderr)
    }
}

/// Mean and standard error of the sketched residual over `trials` sketches with `k` rows.
/// `k = 0` returns `‖A‖_F²` exactly.
pub fn err_monte_carlo(a: &DenseMatrix, k: usize, family: &SketchSpec, trials: usize) -> Result<ErrEstimate> {
    let m = a.nrows();
    let s = family.row_nnz(m);
    if k == 0 {
        return Ok(ErrEstimate { mean: linalg::frobenius_sq(a), stderr: 0.0, trials, k, family: family.family, s });
    }
    if trials < 2 {
        return Err(Error::InvalidArgument("err_monte_carlo needs at least 2 trials".into()));
    }
    let spec = family.with_k(k);
    let values: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| residual_error(a, &draw_sketch(&spec, m, t)?))
        .collect::<Result<_>>()?;
    let (mean, stderr) = stats::mean_stderr(&values);
    Ok(ErrEstimate { mean, stderr, trials, k, family: family.family, s })
}

/// `(k−1)/(p−1)·Σ_{i ≥ k−p} σ_i²` for `2 ≤ p ≤ k−2` (indices 1-based).
pub fn err_upper_bound(sigma: &[f64], k: usize, p: usize) -> Result<f64> {
    if p < 2 || p + 2 > k {
        return Err(Error::InvalidP { p, max: k as i64 - 2 });
    }
    let start = k - p; // 1-based
    let tail: f64 = sigma.iter().skip(start - 1).map(|s| s * s).sum();
    Ok((k - 1) as f64 / (p - 1) as f64 * tail)
}

/// The smallest bound over all admissible `p`, with the minimizing `p`.
pub fn err_upper_bound_min(sigma: &[f64], k: usize) -> Result<(f64, usize)> {
    if k < 4 {
        return Err(Error::InvalidP { p: 2, max: k as i64 - 2 });
    }
    (2..=k - 2)
        .map(|p| err_upper_bound(sigma, k, p).map(|b| (b, p)))
        .try_fold((f64::INFINITY, 2), |best, cur| {
            let cur = cur?;
            Ok(if cur.0 < best.0 { cur } else { best })
        })
}

/// Rounds a real-valued `p` down to the nearest admissible integer in `[2, k−2]`.
/// The flag reports whether `p` had to be adjusted.
pub fn admissible_p(p: f64, k: usize) -> Result<(usize, bool)> {
    if k < 4 {
        return Err(Error::InvalidP { p: p.max(0.0) as usize, max: k as i64 - 2 });
    }
    let rounded = (p.floor().max(2.0) as usize).min(k - 2);
    Ok((rounded, rounded as f64 != p))
}

/// `Σ_{i>k} σ_i²`, the best rank-`k` Frobenius error.
pub fn best_rank_error(sigma: &[f64], k: usize) -> f64 {
    sigma.iter().skip(k).map(|s| s * s).sum()
}
