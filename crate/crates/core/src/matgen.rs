//! Test matrices with prescribed spectra, dataset parsing and linear systems
//! with known solutions.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{Cholesky, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, Vector};
use crate::rng;

pub const DEFAULT_SIGMA_MAX: f64 = 6.8;

/// Shape of a singular value profile.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    /// `σ_i = σ_max − slope·i`
    Linear { slope: f64 },
    /// `σ_i = σ_max·i^(−exponent)`
    Polynomial { exponent: f64 },
    /// `σ_i = σ_max·base^(−(i−1))`
    Exponential { base: f64 },
    /// Head profile for `i ≤ breakpoint`, tail profile afterwards.
    Step { breakpoint: usize, head: Box<SpectralProfile>, tail: Box<SpectralProfile> },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile {
    pub kind: ProfileKind,
    pub sigma_max: f64,
    pub count: usize,
}

impl SpectralProfile {
    pub fn linear(slope: f64, count: usize) -> Self {
        Self { kind: ProfileKind::Linear { slope }, sigma_max: DEFAULT_SIGMA_MAX, count }
    }

    pub fn polynomial(exponent: f64, count: usize) -> Self {
        Self { kind: ProfileKind::Polynomial { exponent }, sigma_max: DEFAULT_SIGMA_MAX, count }
    }

    pub fn exponential(base: f64, count: usize) -> Self {
        Self { kind: ProfileKind::Exponential { base }, sigma_max: DEFAULT_SIGMA_MAX, count }
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        let sigma_max = values.first().copied().unwrap_or(0.0);
        let count = values.len();
        Self { kind: ProfileKind::Explicit(values), sigma_max, count }
    }

    /// The singular values `σ_1 ≥ … ≥ σ_n > 0`.
    pub fn sigmas(&self) -> Result<Vec<f64>> {
        if self.count == 0 {
            return Err(Error::InvalidProfile("count must be positive".into()));
        }
        if !(self.sigma_max > 0.0) {
            return Err(Error::InvalidProfile(format!("sigma_max = {} must be positive", self.sigma_max)));
        }
        let values: Vec<f64> = match &self.kind {
            ProfileKind::Linear { slope } => {
                (1..=self.count).map(|i| self.sigma_max - slope * i as f64).collect()
            }
            ProfileKind::Polynomial { exponent } => {
                (1..=self.count).map(|i| self.sigma_max * (i as f64).powf(-exponent)).collect()
            }
            ProfileKind::Exponential { base } => {
                if !(*base >= 1.0) {
                    return Err(Error::InvalidProfile(format!("exponential base {base} must be ≥ 1")));
                }
                (0..self.count).map(|i| self.sigma_max * base.powi(-(i as i32))).collect()
            }
            ProfileKind::Step { .. } => return Ok(splice(self)?.0),
            ProfileKind::Explicit(v) => {
                if v.len() != self.count {
                    return Err(Error::InvalidProfile(format!(
                        "explicit profile has {} values but count is {}",
                        v.len(),
                        self.count
                    )));
                }
                v.clone()
            }
        };
        check_spectrum(&values)?;
        Ok(values)
    }
}

fn check_spectrum(values: &[f64]) -> Result<()> {
    if let Some((i, s)) = values.iter().enumerate().find(|(_, s)| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidProfile(format!("σ_{} = {s} is not positive", i + 1)));
    }
    if values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidProfile("singular values must be non-increasing".into()));
    }
    Ok(())
}

fn splice(profile: &SpectralProfile) -> Result<(Vec<f64>, bool)> {
    let ProfileKind::Step { breakpoint, head, tail } = &profile.kind else {
        unreachable!("splice called on non-step profile");
    };
    let n = profile.count;
    if *breakpoint < 1 || *breakpoint > n {
        return Err(Error::InvalidProfile(format!("breakpoint {breakpoint} outside [1, {n}]")));
    }
    let mut head = (**head).clone();
    head.count = n;
    let mut tail = (**tail).clone();
    tail.count = n;
    let h = head.sigmas()?;
    let t = tail.sigmas()?;
    let mut values: Vec<f64> = (0..n).map(|i| if i < *breakpoint { h[i] } else { t[i] }).collect();
    let non_monotone = values.windows(2).any(|w| w[1] > w[0]);
    if non_monotone {
        values.sort_by(|a, b| b.total_cmp(a));
    }
    Ok((values, non_monotone))
}

/// Splices `head` (indices `≤ break_r`) onto `tail` and returns the explicit
/// profile together with a flag set when the splice had to be re-sorted.
pub fn gen_step_profile(
    break_r: usize,
    head: &SpectralProfile,
    tail: &SpectralProfile,
) -> Result<(SpectralProfile, bool)> {
    let n = head.count.max(tail.count);
    let step = SpectralProfile {
        kind: ProfileKind::Step { breakpoint: break_r, head: Box::new(head.clone()), tail: Box::new(tail.clone()) },
        sigma_max: head.sigma_max,
        count: n,
    };
    let (values, resorted) = splice(&step)?;
    Ok((SpectralProfile::explicit(values), resorted))
}

/// Named matrix models: `gaus`, `flat`, `lin.<l>` (e.g. `lin.01`), `poly<l>`, `step<r>`.
pub fn named_profile(name: &str, n: usize) -> Result<Option<SpectralProfile>> {
    if name == "gaus" {
        return Ok(None);
    }
    if let Some(rest) = name.strip_prefix("lin") {
        let slope: f64 = rest.parse().map_err(|_| Error::InvalidProfile(format!("bad model name {name}")))?;
        return Ok(Some(SpectralProfile::linear(slope, n)));
    }
    if let Some(rest) = name.strip_prefix("poly") {
        let e: f64 = rest.parse().map_err(|_| Error::InvalidProfile(format!("bad model name {name}")))?;
        return Ok(Some(SpectralProfile::polynomial(e, n)));
    }
    if let Some(rest) = name.strip_prefix("step") {
        let r: usize = rest.parse().map_err(|_| Error::InvalidProfile(format!("bad model name {name}")))?;
        let (p, _) = gen_step_profile(r, &SpectralProfile::linear(0.01, n), &SpectralProfile::polynomial(1.0, n))?;
        return Ok(Some(p));
    }
    if name == "flat" {
        return Ok(Some(SpectralProfile::explicit(vec![1.0; n])));
    }
    Err(Error::InvalidProfile(format!("unknown matrix model `{name}`")))
}

/// Builds an m × n matrix for a named model.
pub fn named_matrix(name: &str, m: usize, n: usize, seed: u64) -> Result<DenseMatrix> {
    match named_profile(name, n)? {
        None => Ok(gen_gaussian_unit_rows(m, n, seed)),
        Some(p) => gen_spectral_matrix(&p, m, seed),
    }
}

fn gaussian_row_major(rows: usize, cols: usize, seed: u64, path: &[u64]) -> DenseMatrix {
    let mut rng = rng::stream(seed, path);
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DenseMatrix::from_row_slice(rows, cols, &data)
}

/// `A = U·diag(σ)·Vᵀ` with orthonormal factors obtained from seeded Gaussian matrices.
pub fn gen_spectral_matrix(profile: &SpectralProfile, m: usize, seed: u64) -> Result<DenseMatrix> {
    let sigma = profile.sigmas()?;
    let n = sigma.len();
    if m < n {
        return Err(Error::DimensionMismatch(format!("m = {m} < n = {n}")));
    }
    let u = linalg::orthonormalize_columns(&gaussian_row_major(m, n, seed, &[0]));
    let v = linalg::orthonormalize_columns(&gaussian_row_major(n, n, seed, &[1]));
    let mut us = u;
    for (j, s) in sigma.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    Ok(us * v.transpose())
}

/// I.i.d. standard normal entries, each row rescaled to unit norm.
pub fn gen_gaussian_unit_rows(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let mut a = gaussian_row_major(m, n, seed, &[2]);
    for mut row in a.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row.unscale_mut(norm);
        }
    }
    a
}

/// Reads an svmlight/LIBSVM file into a dense matrix and its labels.
pub fn parse_libsvm(path: impl AsRef<Path>, n_features: Option<usize>) -> Result<(DenseMatrix, Vec<f64>)> {
    let file = File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_libsvm_reader(file, n_features)
}

pub fn parse_libsvm_reader<R: Read>(reader: R, n_features: Option<usize>) -> Result<(DenseMatrix, Vec<f64>)> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label = parse_number(label_tok, lineno)?;
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| Error::Parse { line: lineno, msg: format!("expected idx:val, got `{tok}`") })?;
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::Parse { line: lineno, msg: format!("bad feature index `{idx}`") })?;
            let val = parse_number(val, lineno)?;
            if idx == 0 {
                return Err(Error::Index { line: lineno, msg: "feature indices are 1-based".into() });
            }
            if idx <= last {
                return Err(Error::Index { line: lineno, msg: format!("index {idx} not greater than {last}") });
            }
            if let Some(nf) = n_features {
                if idx > nf {
                    return Err(Error::Index { line: lineno, msg: format!("index {idx} exceeds n_features = {nf}") });
                }
            }
            last = idx;
            row.push((idx - 1, val));
        }
        max_index = max_index.max(last);
        labels.push(label);
        rows.push(row);
    }
    let cols = n_features.unwrap_or(max_index);
    let mut a = DenseMatrix::zeros(rows.len(), cols);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            a[(i, j)] = v;
        }
    }
    Ok((a, labels))
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("bad number `{tok}`") })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, msg: format!("non-finite value `{tok}`") });
    }
    Ok(v)
}

/// Leading `rows × cols` block in file order.
pub fn leading_submatrix(a: &DenseMatrix, rows: usize, cols: usize) -> DenseMatrix {
    a.view((0, 0), (rows.min(a.nrows()), cols.min(a.ncols()))).into_owned()
}

/// Writes `rows,cols` on the first line followed by one CSV line per row.
pub fn write_matrix_csv<W: Write>(a: &DenseMatrix, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{},{}", a.nrows(), a.ncols())?;
    for i in 0..a.nrows() {
        let line: Vec<String> = (0..a.ncols()).map(|j| format!("{:e}", a[(i, j)])).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(reader: R) -> Result<DenseMatrix> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines.next().ok_or_else(|| Error::Parse { line: 1, msg: "missing header".into() })??;
    let (r, c) = header
        .trim()
        .split_once(',')
        .ok_or_else(|| Error::Parse { line: 1, msg: "header must be `rows,cols`".into() })?;
    let rows: usize = r.trim().parse().map_err(|_| Error::Parse { line: 1, msg: "bad row count".into() })?;
    let cols: usize = c.trim().parse().map_err(|_| Error::Parse { line: 1, msg: "bad column count".into() })?;
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split(',') {
            data.push(parse_number(tok.trim(), i + 2)?);
        }
        if data.len() - before != cols {
            return Err(Error::Parse { line: i + 2, msg: format!("expected {cols} values") });
        }
    }
    if data.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!("expected {rows} rows, found {}", data.len() / cols.max(1))));
    }
    Ok(DenseMatrix::from_row_slice(rows, cols, &data))
}

/// A consistent system `A x = b` with its reference solution.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DenseMatrix,
    pub b: Vector,
    pub x_star: Vector,
    pub metric: Option<DenseMatrix>,
}

impl LinearSystem {
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    /// Attaches an SPD metric `B`, rejecting matrices whose symmetric
    /// factorization has a non-positive pivot.
    pub fn with_metric(mut self, metric: DenseMatrix) -> Result<Self> {
        let n = self.cols();
        if metric.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!("metric must be {n}×{n}")));
        }
        if (&metric - metric.transpose()).norm() > 1e-10 * metric.norm().max(1.0) {
            return Err(Error::InvalidArgument("metric is not symmetric".into()));
        }
        if Cholesky::new(metric.clone()).is_none() {
            return Err(Error::InvalidArgument("metric is not positive definite".into()));
        }
        self.metric = Some(metric);
        Ok(self)
    }

    /// `‖v‖_B`, or the Euclidean norm without a metric.
    pub fn metric_norm(&self, v: &Vector) -> f64 {
        match &self.metric {
            Some(b) => v.dot(&(b * v)).max(0.0).sqrt(),
            None => v.norm(),
        }
    }
}

/// Rank-deficiency cutoff `max(m,n)·σ_max·1e-12`.
pub fn rank_deficiency_cutoff(m: usize, n: usize, sigma_max: f64) -> f64 {
    m.max(n) as f64 * sigma_max * 1e-12
}

/// Draws a Gaussian reference point and builds `b`; for rank-deficient `A`
/// the reference solution is the least-norm least-squares solution.
pub fn make_system(a: &DenseMatrix, seed: u64) -> LinearSystem {
    let (m, n) = a.shape();
    let mut r = rng::stream(seed, &[3]);
    let x_seed = DVector::from_iterator(n, (0..n).map(|_| r.sample::<f64, _>(StandardNormal)));
    let sigma = linalg::singular_values(a);
    let smax = sigma.first().copied().unwrap_or(0.0);
    let cut = rank_deficiency_cutoff(m, n, smax);
    let full_rank = sigma.len() == n && sigma.iter().all(|&s| s > cut);
    let b = a * &x_seed;
    let x_star = if full_rank {
        x_seed
    } else {
        let svd = linalg::svd_sorted(a);
        let mut x = Vector::zeros(n);
        for (i, &s) in svd.sigma.iter().enumerate() {
            if s > cut {
                x += svd.v.column(i) * (svd.u.column(i).dot(&b) / s);
            }
        }
        x
    };
    LinearSystem { a: a.clone(), b, x_star, metric: None }
}
