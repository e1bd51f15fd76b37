//! Expected sketched projection `E[P]`, its spectrum, the surrogate
//! `P̄ = γΣ(γΣ + I)⁻¹` and the closed-form lower bounds on the worst-case
//! sketch-and-project rate `λ_min(E[P])`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, Vector};
use crate::randsvd::{self, ErrEstimate};
use crate::rng;
use crate::sketch::{draw_sketch, SketchFamily, SketchSpec};

/// Default number of projections averaged for `E[P]`.
pub const DEFAULT_PROJECTION_TRIALS: usize = 1600;
const MAX_BATCHES: usize = 20;

/// Monte-Carlo mean of sketched projections, with per-batch means kept for
/// standard errors of quadratic forms.
#[derive(Debug, Clone)]
pub struct ProjectionEstimate {
    pub mean_p: DenseMatrix,
    pub trials: usize,
    /// Non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Columns match `eigenvalues`.
    pub eigenvectors: DenseMatrix,
    batch_means: Vec<DenseMatrix>,
}

impl ProjectionEstimate {
    pub fn from_batches(batch_sums: Vec<(DenseMatrix, usize)>) -> Self {
        let trials: usize = batch_sums.iter().map(|(_, c)| c).sum();
        let n = batch_sums[0].0.nrows();
        let mut total = DenseMatrix::zeros(n, n);
        for (sum, _) in &batch_sums {
            total += sum;
        }
        let mean = total / trials as f64;
        let mean_p = (&mean + mean.transpose()) * 0.5;
        let (eigenvalues, eigenvectors) = linalg::symmetric_eigen_desc(&mean_p);
        let batch_means = batch_sums.into_iter().map(|(s, c)| s / c as f64).collect();
        Self { mean_p, trials, eigenvalues, eigenvectors, batch_means }
    }

    pub fn lambda_min(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn quadratic_form(&self, v: &Vector) -> f64 {
        v.dot(&(&self.mean_p * v))
    }

    /// Standard error of `vᵀ mean_P v` from the batch means.
    pub fn quadratic_form_stderr(&self, v: &Vector) -> f64 {
        let values: Vec<f64> = self.batch_means.iter().map(|m| v.dot(&(m * v))).collect();
        let nb = values.len();
        if nb < 2 {
            return 0.0;
        }
        let mean = values.iter().sum::<f64>() / nb as f64;
        let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nb - 1) as f64;
        (var / nb as f64).sqrt()
    }

    /// Standard error of the smallest eigenvalue, evaluated at its eigenvector.
    pub fn lambda_min_stderr(&self) -> f64 {
        let n = self.eigenvectors.ncols();
        self.quadratic_form_stderr(&self.eigenvectors.column(n - 1).into_owned())
    }

    /// `v_lᵀ mean_P v_l` for every column of `basis`.
    pub fn rayleigh_in_basis(&self, basis: &DenseMatrix) -> Vec<f64> {
        basis.column_iter().map(|c| self.quadratic_form(&c.into_owned())).collect()
    }
}

/// `(SA)†(SA)` for the `trial`-th sketch.
pub fn sample_projection(a: &DenseMatrix, spec: &SketchSpec, trial: u64) -> Result<DenseMatrix> {
    let s = draw_sketch(spec, a.nrows(), trial)?;
    Ok(linalg::row_projection(&s.apply(a)?))
}

/// Averages sampled projections over `trials` sketches; the mean is symmetrized
/// before its eigen-decomposition.
pub fn expected_projection(a: &DenseMatrix, spec: &SketchSpec, trials: usize) -> Result<ProjectionEstimate> {
    if trials < 2 {
        return Err(Error::InvalidArgument("expected_projection needs at least 2 trials".into()));
    }
    let n = a.ncols();
    let nb = trials.min(MAX_BATCHES);
    let batches: Vec<(DenseMatrix, usize)> = (0..nb)
        .into_par_iter()
        .map(|b| {
            let start = b * trials / nb;
            let end = (b + 1) * trials / nb;
            let mut sum = DenseMatrix::zeros(n, n);
            for t in start..end {
                sum += sample_projection(a, spec, t as u64)?;
            }
            Ok((sum, end - start))
        })
        .collect::<Result<_>>()?;
    Ok(ProjectionEstimate::from_batches(batches))
}

/// `λ_min(mean_P)` clamped to `[0, 1]`.
pub fn worst_case_rate(estimate: &ProjectionEstimate) -> f64 {
    estimate.lambda_min().clamp(0.0, 1.0)
}

/// `f(γ) = Σ γσ_i²/(γσ_i² + 1)`.
pub fn effective_dimension(sigma_sq: &[f64], gamma: f64) -> f64 {
    sigma_sq.iter().map(|&s| gamma * s / (gamma * s + 1.0)).sum()
}

/// Solves `f(γ) = k` by geometric bracketing from `k/tr(Σ)` followed by bisection.
pub fn gamma_implicit(sigma_sq: &[f64], k: usize) -> Result<f64> {
    let smax = sigma_sq.iter().copied().fold(0.0, f64::max);
    let rank = sigma_sq.iter().filter(|&&s| s > smax * 1e-14 * sigma_sq.len() as f64).count();
    if k == 0 || k >= rank {
        return Err(Error::KOutOfRange { k, msg: format!("need 1 ≤ k < rank = {rank}") });
    }
    let target = k as f64;
    let trace: f64 = sigma_sq.iter().sum();
    let mut lo = target / trace;
    let mut hi = lo;
    while effective_dimension(sigma_sq, hi) < target {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::KOutOfRange { k, msg: "f(γ) saturates below k".into() });
        }
    }
    for _ in 0..2000 {
        if hi - lo <= 1e-13 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if effective_dimension(sigma_sq, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaMode {
    /// `γ = k / Err(A, k−1)` from a Monte-Carlo error estimate.
    MonteCarlo,
    /// `γ = f⁻¹(k)`.
    Implicit,
}

impl GammaMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GammaMode::MonteCarlo => "monte_carlo_gamma",
            GammaMode::Implicit => "implicit_gamma",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SurrogateSpec {
    pub gamma: f64,
    pub sigma_sq: Vec<f64>,
    pub mode: GammaMode,
    /// `1/√r` with `r` the stable rank; the unit-constant scale of the surrogate error.
    pub epsilon_report: f64,
}

#[derive(Debug, Clone)]
pub struct Surrogate {
    pub spec: SurrogateSpec,
    /// `γσ_i²/(γσ_i² + 1)`, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Right singular vectors of `A`, the shared eigenbasis.
    pub basis: DenseMatrix,
    pub matrix: DenseMatrix,
}

pub fn stable_rank(sigma: &[f64]) -> f64 {
    let top = sigma.iter().copied().fold(0.0, f64::max);
    sigma.iter().map(|s| s * s).sum::<f64>() / (top * top)
}

/// Surrogate eigenvalues for a spectrum and `γ`.
pub fn surrogate_eigenvalues(sigma_sq: &[f64], gamma: f64) -> Vec<f64> {
    sigma_sq.iter().map(|&s| gamma * s / (gamma * s + 1.0)).collect()
}

/// Picks `γ` for the requested mode; Monte-Carlo mode needs `Err(A, k−1)`.
pub fn surrogate_gamma(sigma_sq: &[f64], k: usize, mode: GammaMode, err_km1: Option<f64>) -> Result<f64> {
    if k == 0 {
        return Err(Error::KOutOfRange { k, msg: "k must be at least 1".into() });
    }
    match mode {
        GammaMode::Implicit => gamma_implicit(sigma_sq, k),
        GammaMode::MonteCarlo => {
            let err = err_km1.ok_or_else(|| Error::InvalidArgument("Monte-Carlo γ needs Err(A, k−1)".into()))?;
            if !(err > 0.0) {
                return Err(Error::InvalidArgument(format!("Err(A, k−1) = {err} must be positive")));
            }
            Ok(k as f64 / err)
        }
    }
}

/// `P̄ = V diag(γσ²/(γσ²+1)) Vᵀ` with `V` the right singular vectors of `A`.
pub fn surrogate_projection(a: &DenseMatrix, k: usize, mode: GammaMode, err_km1: Option<f64>) -> Result<Surrogate> {
    let svd = linalg::svd_sorted(a);
    let n = a.ncols();
    let mut sigma = svd.sigma.clone();
    sigma.resize(n, 0.0);
    let sigma_sq: Vec<f64> = sigma.iter().map(|s| s * s).collect();
    let gamma = surrogate_gamma(&sigma_sq, k, mode, err_km1)?;
    let basis = if svd.v.ncols() == n { svd.v } else { full_right_basis(a) };
    Ok(surrogate_with_basis(sigma_sq, gamma, mode, basis))
}

fn full_right_basis(a: &DenseMatrix) -> DenseMatrix {
    linalg::symmetric_eigen_desc(&(a.transpose() * a)).1
}

pub fn surrogate_with_basis(sigma_sq: Vec<f64>, gamma: f64, mode: GammaMode, basis: DenseMatrix) -> Surrogate {
    let eigenvalues = surrogate_eigenvalues(&sigma_sq, gamma);
    let d = Vector::from_vec(eigenvalues.clone());
    let matrix = &basis * DenseMatrix::from_diagonal(&d) * basis.transpose();
    let sigma: Vec<f64> = sigma_sq.iter().map(|s| s.sqrt()).collect();
    let epsilon_report = 1.0 / stable_rank(&sigma).sqrt();
    Surrogate { spec: SurrogateSpec { gamma, sigma_sq, mode, epsilon_report }, eigenvalues, basis, matrix }
}

/// `(1−ε)·γσ²_min/(γσ²_min + 1)`.
pub fn surrogate_rate(sigma_min_sq: f64, gamma: f64, epsilon: f64) -> f64 {
    let g = gamma * sigma_min_sq;
    (1.0 - epsilon) * g / (g + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBound {
    pub bound: f64,
    /// `4k/n + 8 ln(3n)/n`.
    pub epsilon: f64,
    /// Same expression with a base-10 logarithm.
    pub epsilon_log10: f64,
    pub vacuous: bool,
}

/// `(1−ε)·kσ²_min/Err(A, k−1)` with `ε = 4k/n + 8 ln(3n)/n`.
pub fn gaussian_rate_bound(sigma_min_sq: f64, err_km1: f64, k: usize, n: usize) -> GaussianBound {
    let (kf, nf) = (k as f64, n as f64);
    let epsilon = 4.0 * kf / nf + 8.0 * (3.0 * nf).ln() / nf;
    let epsilon_log10 = 4.0 * kf / nf + 8.0 * (3.0 * nf).log10() / nf;
    let bound = (1.0 - epsilon) * kf * sigma_min_sq / err_km1;
    GaussianBound { bound, epsilon, epsilon_log10, vacuous: epsilon >= 1.0 }
}

/// `C = ((√k + 2)/(√n − √k − 2))²`.
pub fn variant_constant(k: usize, n: usize) -> f64 {
    let (rk, rn) = ((k as f64).sqrt(), (n as f64).sqrt());
    ((rk + 2.0) / (rn - rk - 2.0)).powi(2)
}

/// `0.05/(1+C)·kσ²_min/Err(A, k−1)`, valid for `k < (√n − 2)²`.
pub fn gaussian_rate_variant(sigma_min_sq: f64, err_km1: f64, k: usize, n: usize) -> Result<f64> {
    let limit = ((n as f64).sqrt() - 2.0).powi(2);
    if n < 4 || k as f64 >= limit {
        return Err(Error::OutOfRange(format!("variant bound needs k < (√n − 2)² = {limit:.3}, got k = {k}")));
    }
    let c = variant_constant(k, n);
    Ok(0.05 / (1.0 + c) * k as f64 * sigma_min_sq / err_km1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayKind {
    General,
    /// `σ_i² ≲ i^(−β)`.
    Polynomial { beta: f64 },
    /// `σ_i² ≲ α^(−i)`.
    Exponential { alpha: f64 },
    /// Flat after index `r`.
    FlatTail { r: usize },
}

/// k-scaling lower bounds with the unspecified absolute constant exposed as `c_user`.
pub fn decay_rate_bound(kind: DecayKind, k: usize, sigma: &[f64], c_user: f64) -> Result<f64> {
    let n = sigma.len();
    if n == 0 || !(c_user > 0.0) {
        return Err(Error::InvalidArgument("need a non-empty spectrum and positive constant".into()));
    }
    let smin_sq = sigma[n - 1] * sigma[n - 1];
    let fro_sq: f64 = sigma.iter().map(|s| s * s).sum();
    let kf = k as f64;
    let value = match kind {
        DecayKind::General => kf * smin_sq / (c_user * fro_sq),
        DecayKind::Polynomial { beta } => {
            if 2 * k > n {
                return Err(Error::OutOfRange(format!("polynomial decay bound needs k ≤ n/2, got k = {k}")));
            }
            kf.powf(beta) * smin_sq / (c_user * fro_sq)
        }
        DecayKind::Exponential { alpha } => {
            if 2 * k > n {
                return Err(Error::OutOfRange(format!("exponential decay bound needs k ≤ n/2, got k = {k}")));
            }
            alpha.powf(kf) * smin_sq / (c_user * fro_sq)
        }
        DecayKind::FlatTail { r } => {
            if k < 2 * r {
                return Err(Error::OutOfRange(format!("flat-tail bound needs k ≥ 2r = {}", 2 * r)));
            }
            kf / (c_user * n as f64)
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

/// The stack of lower bounds for one `(A, k)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBoundSet {
    /// `kσ²_min/‖A‖_F²`.
    pub simple: f64,
    pub gaussian_thm: GaussianBound,
    /// Variant bound and its constant `C`, when `k` is in range.
    pub gaussian_variant: Option<(f64, f64)>,
    /// `γσ²_min/(γσ²_min + 1)` with `ε = 0`.
    pub surrogate: f64,
    pub decay: Option<(DecayKind, f64, f64)>,
}

pub fn rate_bounds(sigma: &[f64], err_km1: f64, k: usize, decay: Option<(DecayKind, f64)>) -> Result<RateBoundSet> {
    let n = sigma.len();
    let smin_sq = sigma[n - 1] * sigma[n - 1];
    let fro_sq: f64 = sigma.iter().map(|s| s * s).sum();
    let gamma = k as f64 / err_km1;
    let decay = match decay {
        Some((kind, c)) => Some((kind, c, decay_rate_bound(kind, k, sigma, c)?)),
        None => None,
    };
    Ok(RateBoundSet {
        simple: k as f64 * smin_sq / fro_sq,
        gaussian_thm: gaussian_rate_bound(smin_sq, err_km1, k, n),
        gaussian_variant: gaussian_rate_variant(smin_sq, err_km1, k, n).ok().map(|b| (b, variant_constant(k, n))),
        surrogate: surrogate_rate(smin_sq, gamma, 0.0),
        decay,
    })
}

/// `s_min = λ_min(E[P])` against the surrogate `kσ²_min/(kσ²_min + Err(A, k−1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateComparison {
    pub k: usize,
    pub family: SketchFamily,
    pub s: usize,
    pub s_min: f64,
    pub s_min_stderr: f64,
    pub surrogate: f64,
    /// `|s_min − surrogate| / s_min`.
    pub gap: f64,
    pub gamma_mode: GammaMode,
    pub trials: usize,
    pub err_km1: ErrEstimate,
}

impl SurrogateComparison {
    pub const CSV_HEADER: &'static str = "k,family,s,s_min,surrogate,gap,gamma_mode,trials";

    pub fn write_csv_row<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "{},{},{},{:e},{:e},{:e},{},{}",
            self.k,
            self.family,
            self.s,
            self.s_min,
            self.surrogate,
            self.gap,
            self.gamma_mode.as_str(),
            self.trials
        )
    }
}

/// Seed for the `Err(A, k−1)` sketches, independent of the projection sketches.
pub fn err_seed(seed: u64) -> u64 {
    rng::derive_seed(seed, &[0xE77])
}

pub fn surrogate_vs_empirical(
    a: &DenseMatrix,
    spec: &SketchSpec,
    trials: usize,
    err_trials: usize,
) -> Result<SurrogateComparison> {
    let k = spec.k;
    let est = expected_projection(a, spec, trials)?;
    let s_min = worst_case_rate(&est);
    let err = randsvd::err_monte_carlo(a, k - 1, &spec.with_seed(err_seed(spec.seed)), err_trials)?;
    let sigma = linalg::singular_values(a);
    let smin_sq = sigma[a.ncols() - 1].powi(2);
    let surrogate = surrogate_rate(smin_sq, k as f64 / err.mean, 0.0);
    Ok(SurrogateComparison {
        k,
        family: spec.family,
        s: spec.row_nnz(a.nrows()),
        s_min,
        s_min_stderr: est.lambda_min_stderr(),
        surrogate,
        gap: (s_min - surrogate).abs() / s_min,
        gamma_mode: GammaMode::MonteCarlo,
        trials,
        err_km1: err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgen;

    #[test]
    fn gamma_for_flat_spectrum() {
        let sigma_sq = vec![1.0; 40];
        for k in [1, 5, 20, 39] {
            let g = gamma_implicit(&sigma_sq, k).unwrap();
            let expected = k as f64 / (40 - k) as f64;
            assert!(((g - expected) / expected).abs() < 1e-11, "k={k}: {g} vs {expected}");
        }
        assert!(matches!(gamma_implicit(&sigma_sq, 40), Err(Error::KOutOfRange { .. })));
        assert!(matches!(gamma_implicit(&sigma_sq, 0), Err(Error::KOutOfRange { .. })));
    }

    #[test]
    fn gamma_root_contract() {
        let sigma_sq: Vec<f64> = (1..=50).map(|i| 46.24 * (i as f64).powf(-3.0)).collect();
        for k in [1, 3, 10, 30, 49] {
            let g = gamma_implicit(&sigma_sq, k).unwrap();
            assert!((effective_dimension(&sigma_sq, g) - k as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn surrogate_rate_arithmetic() {
        assert_eq!(surrogate_rate(1.0, 1.0, 0.0), 0.5);
        let (n, k) = (100usize, 10usize);
        let g = k as f64 / (n - k) as f64;
        assert!((surrogate_rate(1.0, g, 0.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn gaussian_epsilon() {
        let b = gaussian_rate_bound(1.0, 1.0, 50, 1000);
        assert!((b.epsilon - (0.2 + 8.0 * 3000f64.ln() / 1000.0)).abs() < 1e-15);
        assert!((b.epsilon - 0.2641).abs() < 1e-4);
        assert!(b.epsilon_log10 < 0.25 && b.epsilon > 0.25);
        assert!(gaussian_rate_bound(1.0, 1.0, 10, 20).vacuous);
    }

    #[test]
    fn gaussian_bound_recovers_kaczmarz_rate() {
        let (smin_sq, fro) = (0.3, 12.0);
        let target = smin_sq / fro;
        let gaps: Vec<f64> = [1_000usize, 100_000, 10_000_000]
            .iter()
            .map(|&n| (gaussian_rate_bound(smin_sq, fro, 1, n).bound - target).abs())
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        assert!(gaps[2] < 1e-4 * target);
    }

    #[test]
    fn variant_constant_values() {
        let c = variant_constant(50, 100);
        let rk = 50f64.sqrt();
        assert!((c - ((rk + 2.0) / (10.0 - rk - 2.0)).powi(2)).abs() < 1e-12);
        assert!((c - 95.36).abs() < 0.01);
        let v = gaussian_rate_variant(1.0, 1.0, 50, 100).unwrap();
        assert!((v - 50.0 * 0.05 / (1.0 + c)).abs() < 1e-15);
        for n in [100usize, 150, 400, 1000] {
            for k in 1..=n / 2 {
                if (k as f64) < ((n as f64).sqrt() - 2.0).powi(2) {
                    assert!(variant_constant(k, n) <= 100.0, "n={n} k={k}");
                }
            }
        }
        assert!(gaussian_rate_variant(1.0, 1.0, 64, 100).is_err());
        let small = gaussian_rate_variant(1.0, 1.0, 1, 1_000_000).unwrap();
        assert!((small - 0.05).abs() < 0.05 * 0.01);
    }

    #[test]
    fn decay_bounds() {
        let sigma: Vec<f64> = (1..=40).map(|i| 1.0 / i as f64).collect();
        let fro: f64 = sigma.iter().map(|s| s * s).sum();
        let smin_sq = sigma[39] * sigma[39];
        let g = decay_rate_bound(DecayKind::General, 1, &sigma, 1.0).unwrap();
        assert!((g - smin_sq / fro).abs() < 1e-15);
        let p2 = decay_rate_bound(DecayKind::Polynomial { beta: 2.0 }, 10, &sigma, 1.0).unwrap();
        let p1 = decay_rate_bound(DecayKind::Polynomial { beta: 1.0 }, 10, &sigma, 1.0).unwrap();
        assert!((p2 / p1 - 10.0).abs() < 1e-12);
        assert_eq!(decay_rate_bound(DecayKind::FlatTail { r: 3 }, 40, &sigma, 1.0).unwrap(), 1.0);
        assert!(decay_rate_bound(DecayKind::FlatTail { r: 30 }, 40, &sigma, 1.0).is_err());
        assert!(decay_rate_bound(DecayKind::Polynomial { beta: 2.0 }, 21, &sigma, 1.0).is_err());
        let e = decay_rate_bound(DecayKind::Exponential { alpha: 2.0 }, 20, &sigma, 1.0).unwrap();
        assert!(e <= 1.0);
    }

    #[test]
    fn surrogate_matrix_has_closed_form_spectrum() {
        let a = matgen::gen_spectral_matrix(&matgen::SpectralProfile::linear(0.05, 20), 60, 4).unwrap();
        let s = surrogate_projection(&a, 5, GammaMode::Implicit, None).unwrap();
        let (vals, _) = linalg::symmetric_eigen_desc(&s.matrix);
        for (g, e) in vals.iter().zip(&s.eigenvalues) {
            assert!((g - e).abs() < 1e-10);
        }
        assert!(s.eigenvalues.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn surrogate_limits() {
        let sigma_sq = vec![4.0, 1.0, 0.25];
        let big = surrogate_eigenvalues(&sigma_sq, 1e12);
        assert!(big.iter().all(|v| (v - 1.0).abs() < 1e-10));
        let tiny = surrogate_eigenvalues(&sigma_sq, 1e-9);
        for (v, s) in tiny.iter().zip(&sigma_sq) {
            assert!((v / (1e-9 * s) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn monte_carlo_gamma_requires_error() {
        assert!(surrogate_gamma(&[1.0, 1.0], 1, GammaMode::MonteCarlo, None).is_err());
        assert_eq!(surrogate_gamma(&[1.0, 1.0], 2, GammaMode::MonteCarlo, Some(4.0)).unwrap(), 0.5);
    }

    #[test]
    fn full_sketch_projection_is_identity() {
        let a = matgen::gen_gaussian_unit_rows(30, 6, 1);
        let est = expected_projection(&a, &SketchSpec::gaussian(8, 2), 10).unwrap();
        assert!((&est.mean_p - DenseMatrix::identity(6, 6)).amax() < 1e-8);
        assert!((worst_case_rate(&est) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sampled_projections_are_orthogonal_projections() {
        let a = matgen::gen_gaussian_unit_rows(40, 8, 1);
        for family in SketchFamily::ALL {
            let spec = SketchSpec::new(family, 3, 5)
                .with_sparsity(6)
                .with_sampling(crate::sketch::Sampling::uniform(40));
            for t in 0..5 {
                let p = sample_projection(&a, &spec, t).unwrap();
                assert!((&p * &p - &p).amax() < 1e-8);
                assert!((&p - p.transpose()).amax() < 1e-8);
                let sa = draw_sketch(&spec, 40, t).unwrap().apply(&a).unwrap();
                let rank = linalg::numerical_rank(&linalg::singular_values(&sa), 3, 8);
                assert!((p.trace() - rank as f64).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn projection_is_invariant_to_sketch_scaling() {
        let a = matgen::gen_gaussian_unit_rows(25, 5, 1);
        let s = draw_sketch(&SketchSpec::new(SketchFamily::LessUniform, 3, 2).with_sparsity(4), 25, 0).unwrap();
        let p = linalg::row_projection(&s.apply(&a).unwrap());
        for c in [-3.0, 1e-3, 250.0] {
            let pc = linalg::row_projection(&s.scaled(c).apply(&a).unwrap());
            assert!((&pc - &p).amax() < 1e-10);
        }
    }

    #[test]
    fn comparison_csv_row() {
        let c = SurrogateComparison {
            k: 5,
            family: SketchFamily::Gaussian,
            s: 100,
            s_min: 0.5,
            s_min_stderr: 0.0,
            surrogate: 0.25,
            gap: 0.5,
            gamma_mode: GammaMode::MonteCarlo,
            trials: 16,
            err_km1: ErrEstimate { mean: 1.0, stderr: 0.0, trials: 2, k: 4, family: SketchFamily::Gaussian, s: 100 },
        };
        let mut buf = Vec::new();
        c.write_csv_row(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "5,gaussian,100,5e-1,2.5e-1,5e-1,monte_carlo_gamma,16\n");
    }
}
