//! Sketching distributions: dense Gaussian and Rademacher sketches, LESS
//! embeddings (leverage-score sparsified), uniformly sparsified LESS and
//! row sampling, plus leverage scores and randomized Hadamard preconditioning.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, Vector};
use crate::matgen::LinearSystem;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SketchFamily {
    Gaussian,
    Rademacher,
    Less,
    LessUniform,
    RowSampling,
}

impl SketchFamily {
    pub const ALL: [SketchFamily; 5] = [
        SketchFamily::Gaussian,
        SketchFamily::Rademacher,
        SketchFamily::Less,
        SketchFamily::LessUniform,
        SketchFamily::RowSampling,
    ];

    pub fn is_dense(self) -> bool {
        matches!(self, SketchFamily::Gaussian | SketchFamily::Rademacher)
    }

    /// Factor `c` with `c·E[s sᵀ] = I` for a single sketch row.
    pub fn isotropy_factor(self, k: usize) -> f64 {
        if self.is_dense() {
            1.0
        } else {
            k as f64
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SketchFamily::Gaussian => "gaussian",
            SketchFamily::Rademacher => "rademacher",
            SketchFamily::Less => "less",
            SketchFamily::LessUniform => "less_uniform",
            SketchFamily::RowSampling => "row_sampling",
        }
    }
}

impl fmt::Display for SketchFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SketchFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SketchFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidSketch(format!("unknown sketch family `{s}`")))
    }
}

/// A probability vector over the rows together with its cumulative sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampling {
    probs: Arc<[f64]>,
    cumulative: Arc<[f64]>,
}

impl Sampling {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidSketch("sampling probabilities must be non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSketch(format!("sampling probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { probs: probs.into(), cumulative: cumulative.into() })
    }

    pub fn uniform(m: usize) -> Self {
        let probs: Arc<[f64]> = vec![1.0 / m as f64; m].into();
        let cumulative = (1..=m).map(|i| i as f64 / m as f64).collect::<Vec<_>>().into();
        Self { probs, cumulative }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty sampling");
        let u: f64 = rng.random::<f64>() * total;
        let mut i = self.cumulative.partition_point(|&c| c <= u);
        // skip zero-probability rows that share the boundary
        while i < self.probs.len() && self.probs[i] == 0.0 {
            i += 1;
        }
        if i >= self.probs.len() {
            i = self.probs.iter().rposition(|&p| p > 0.0).expect("some positive probability");
        }
        i
    }
}

/// Description of a sketching distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchSpec {
    pub family: SketchFamily,
    /// Rows of `S`.
    pub k: usize,
    /// Non-zeros per row for the sparse families.
    pub s: usize,
    pub sampling: Option<Sampling>,
    pub seed: u64,
}

impl SketchSpec {
    pub fn new(family: SketchFamily, k: usize, seed: u64) -> Self {
        Self { family, k, s: 1, sampling: None, seed }
    }

    pub fn gaussian(k: usize, seed: u64) -> Self {
        Self::new(SketchFamily::Gaussian, k, seed)
    }

    pub fn with_sparsity(mut self, s: usize) -> Self {
        self.s = s;
        self
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = Some(sampling);
        self
    }

    pub fn with_k(&self, k: usize) -> Self {
        Self { k, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Effective non-zeros per row.
    pub fn row_nnz(&self, m: usize) -> usize {
        match self.family {
            SketchFamily::Gaussian | SketchFamily::Rademacher => m,
            SketchFamily::RowSampling => 1,
            SketchFamily::Less | SketchFamily::LessUniform => self.s,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidSketch("k must be at least 1".into()));
        }
        if self.k > m {
            return Err(Error::InvalidSketch(format!("k = {} exceeds m = {m}", self.k)));
        }
        if matches!(self.family, SketchFamily::Less | SketchFamily::LessUniform) && (self.s == 0 || self.s > m) {
            return Err(Error::InvalidSketch(format!("s = {} outside [1, {m}]", self.s)));
        }
        if self.family == SketchFamily::Less && self.sampling.is_none() {
            return Err(Error::MissingSamplingDistribution);
        }
        if let Some(p) = &self.sampling {
            if p.len() != m {
                return Err(Error::InvalidSketch(format!("sampling has length {}, expected {m}", p.len())));
            }
        }
        Ok(())
    }
}

/// Row-wise sparse sketch with merged duplicate indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSketch {
    pub m: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Number of sampled terms per row before duplicates were merged.
    pub terms_per_row: usize,
}

impl SparseSketch {
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Sparse product together with the number of scalar multiply-adds.
    pub fn apply_counted(&self, a: &DenseMatrix) -> Result<(DenseMatrix, usize)> {
        if a.nrows() != self.m {
            return Err(Error::DimensionMismatch(format!("sketch has {} columns, matrix has {} rows", self.m, a.nrows())));
        }
        let n = a.ncols();
        let mut out = DenseMatrix::zeros(self.rows.len(), n);
        let mut ops = 0usize;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                for c in 0..n {
                    out[(i, c)] += v * a[(j, c)];
                }
                ops += n;
            }
        }
        Ok((out, ops))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows.len(), self.m);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                d[(i, j)] += v;
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sketch {
    Dense(DenseMatrix),
    Sparse(SparseSketch),
}

impl Sketch {
    pub fn rows(&self) -> usize {
        match self {
            Sketch::Dense(d) => d.nrows(),
            Sketch::Sparse(s) => s.rows.len(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Sketch::Dense(d) => d.ncols(),
            Sketch::Sparse(s) => s.m,
        }
    }

    /// `S·A`.
    pub fn apply(&self, a: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Sketch::Dense(d) => {
                if d.ncols() != a.nrows() {
                    return Err(Error::DimensionMismatch(format!(
                        "sketch has {} columns, matrix has {} rows",
                        d.ncols(),
                        a.nrows()
                    )));
                }
                Ok(d * a)
            }
            Sketch::Sparse(s) => s.apply_counted(a).map(|(p, _)| p),
        }
    }

    /// `S·v`.
    pub fn apply_vec(&self, v: &Vector) -> Result<Vector> {
        if v.len() != self.cols() {
            return Err(Error::DimensionMismatch(format!("sketch has {} columns, vector has {}", self.cols(), v.len())));
        }
        Ok(match self {
            Sketch::Dense(d) => d * v,
            Sketch::Sparse(s) => Vector::from_iterator(
                s.rows.len(),
                s.rows.iter().map(|row| row.iter().map(|&(j, x)| x * v[j]).sum()),
            ),
        })
    }

    /// `Sᵀ·z`.
    pub fn transpose_apply_vec(&self, z: &Vector) -> Result<Vector> {
        if z.len() != self.rows() {
            return Err(Error::DimensionMismatch(format!("sketch has {} rows, vector has {}", self.rows(), z.len())));
        }
        Ok(match self {
            Sketch::Dense(d) => d.tr_mul(z),
            Sketch::Sparse(s) => {
                let mut out = Vector::zeros(s.m);
                for (i, row) in s.rows.iter().enumerate() {
                    for &(j, x) in row {
                        out[j] += x * z[i];
                    }
                }
                out
            }
        })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Sketch::Dense(d) => d.clone(),
            Sketch::Sparse(s) => s.to_dense(),
        }
    }

    pub fn scaled(&self, c: f64) -> Sketch {
        match self {
            Sketch::Dense(d) => Sketch::Dense(d * c),
            Sketch::Sparse(s) => Sketch::Sparse(SparseSketch {
                m: s.m,
                rows: s.rows.iter().map(|r| r.iter().map(|&(j, v)| (j, c * v)).collect()).collect(),
                terms_per_row: s.terms_per_row,
            }),
        }
    }
}

/// Free-function form of [`Sketch::apply`].
pub fn apply_sketch(s: &Sketch, a: &DenseMatrix) -> Result<DenseMatrix> {
    s.apply(a)
}

fn row_stream(spec: &SketchSpec, trial: u64, row: usize) -> ChaCha8Rng {
    rng::stream(spec.seed, &[trial, row as u64])
}

/// Pre-merge terms of one LESS row: `r/√(k·s·p_t)` at sampled index `t`.
pub(crate) fn less_row_terms(
    rng: &mut ChaCha8Rng,
    k: usize,
    s: usize,
    m: usize,
    sampling: Option<&Sampling>,
) -> Vec<(usize, f64)> {
    (0..s)
        .map(|_| {
            let (t, p) = match sampling {
                Some(sp) => {
                    let t = sp.sample(rng);
                    (t, sp.probs()[t])
                }
                None => (rng.random_range(0..m), 1.0 / m as f64),
            };
            let r: f64 = rng.sample(StandardNormal);
            (t, r / (k as f64 * s as f64 * p).sqrt())
        })
        .collect()
}

fn merge_terms(mut terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    terms.sort_by_key(|&(j, _)| j);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (j, v) in terms {
        match merged.last_mut() {
            Some((lj, lv)) if *lj == j => *lv += v,
            _ => merged.push((j, v)),
        }
    }
    merged
}

/// Draws the `trial`-th sketch of the distribution for ambient dimension `m`.
pub fn draw_sketch(spec: &SketchSpec, m: usize, trial: u64) -> Result<Sketch> {
    spec.validate(m)?;
    let k = spec.k;
    match spec.family {
        SketchFamily::Gaussian | SketchFamily::Rademacher => {
            let mut data = Vec::with_capacity(k * m);
            for i in 0..k {
                let mut r = row_stream(spec, trial, i);
                if spec.family == SketchFamily::Gaussian {
                    data.extend((0..m).map(|_| r.sample::<f64, _>(StandardNormal)));
                } else {
                    data.extend((0..m).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }));
                }
            }
            Ok(Sketch::Dense(DenseMatrix::from_row_slice(k, m, &data)))
        }
        SketchFamily::Less | SketchFamily::LessUniform | SketchFamily::RowSampling => {
            let s = spec.row_nnz(m);
            let sampling = match spec.family {
                SketchFamily::LessUniform => None,
                _ => spec.sampling.as_ref(),
            };
            let rows = (0..k)
                .map(|i| {
                    let mut r = row_stream(spec, trial, i);
                    merge_terms(less_row_terms(&mut r, k, s, m, sampling))
                })
                .collect();
            Ok(Sketch::Sparse(SparseSketch { m, rows, terms_per_row: s }))
        }
    }
}

/// Exact leverage scores `l_i = ‖row i of Q‖²` for an orthonormal basis `Q`
/// of the column span.
pub fn leverage_scores(a: &DenseMatrix) -> Result<Vector> {
    let (m, n) = a.shape();
    let (q, sigma) = linalg::column_space_basis(a);
    let smax = sigma.first().copied().unwrap_or(0.0);
    let cutoff = linalg::rank_cutoff(m, n, smax);
    if q.ncols() < n {
        let sigma_min = if sigma.len() < n { 0.0 } else { sigma[n - 1] };
        return Err(Error::RankDeficient { sigma_min, cutoff });
    }
    Ok(Vector::from_iterator(m, q.row_iter().map(|r| r.norm_squared())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeverageDistribution {
    pub scores: Vector,
    pub probs: Vector,
    /// Domination constant in `p_i ≥ l_i/(C·n)`.
    pub c: f64,
}

impl LeverageDistribution {
    pub fn sampling(&self) -> Result<Sampling> {
        Sampling::new(self.probs.iter().copied().collect())
    }
}

/// `p_i = l_i / n` from exact leverage scores.
pub fn build_less_distribution(a: &DenseMatrix, c: f64) -> Result<LeverageDistribution> {
    if !(c >= 1.0) {
        return Err(Error::InvalidArgument(format!("leverage constant C = {c} must be ≥ 1")));
    }
    let scores = leverage_scores(a)?;
    let total: f64 = scores.sum();
    let probs = &scores / total;
    Ok(LeverageDistribution { scores, probs, c })
}

/// In-place fast Walsh-Hadamard transform (unnormalized). Length must be a power of two.
pub fn fwht(x: &mut [f64]) {
    let n = x.len();
    assert!(n.is_power_of_two(), "FWHT length {n} is not a power of two");
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let (a, b) = (x[i], x[i + h]);
                x[i] = a + b;
                x[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Replaces `(A, b)` by `(H·D·A, H·D·b)` after zero-padding to a power of two rows.
pub fn hadamard_precondition(system: &LinearSystem, seed: u64) -> LinearSystem {
    let (m, n) = system.a.shape();
    let mp = m.next_power_of_two();
    let mut r = rng::stream(seed, &[5]);
    let signs: Vec<f64> = (0..m).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let scale = 1.0 / (mp as f64).sqrt();
    let transform = |col: &mut Vec<f64>| {
        fwht(col);
        col.iter_mut().for_each(|v| *v *= scale);
    };
    let mut a = DenseMatrix::zeros(mp, n);
    let mut buf = vec![0.0; mp];
    for j in 0..n {
        buf.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            buf[i] = signs[i] * system.a[(i, j)];
        }
        transform(&mut buf);
        a.column_mut(j).copy_from_slice(&buf);
    }
    buf.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..m {
        buf[i] = signs[i] * system.b[i];
    }
    transform(&mut buf);
    LinearSystem { a, b: Vector::from_vec(buf), x_star: system.x_star.clone(), metric: system.metric.clone() }
}
