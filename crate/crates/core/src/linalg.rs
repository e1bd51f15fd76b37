//! Dense linear-algebra helpers shared by the solver, the Randomized SVD and
//! the spectral estimators.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

pub type DenseMatrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative cutoff for treating a singular value as zero.
pub fn rank_cutoff(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Thin SVD with singular values sorted non-increasing.
pub struct SortedSvd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

pub fn svd_sorted(a: &DenseMatrix) -> SortedSvd {
    let (m, n) = a.shape();
    let r = m.min(n);
    if r == 0 {
        return SortedSvd { u: DenseMatrix::zeros(m, 0), sigma: vec![], v: DenseMatrix::zeros(n, 0) };
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DenseMatrix::from_fn(m, r, |i, j| u[(i, order[j])]);
    let v = DenseMatrix::from_fn(n, r, |i, j| v_t[(order[j], i)]);
    let out = SortedSvd { u, sigma, v };
    if recomposes(a, &out) {
        out
    } else {
        svd_augmented(a)
    }
}

// nalgebra's bidiagonal SVD occasionally returns a wrong factorization on
// exactly low-rank input, so every result is checked against A.
fn recomposes(a: &DenseMatrix, f: &SortedSvd) -> bool {
    let norm = a.norm();
    if !f.sigma.iter().all(|s| s.is_finite()) {
        return false;
    }
    let d = DVector::from_column_slice(&f.sigma);
    let back = &f.u * DenseMatrix::from_diagonal(&d) * f.v.transpose();
    let tol = 1e3 * f64::EPSILON * (a.nrows().max(a.ncols()) as f64) * norm.max(f64::MIN_POSITIVE);
    (back - a).norm() <= tol
}

// QR to a square factor, then the symmetric eigenproblem of [[0, R], [R^T, 0]],
// whose eigenpairs are (+-sigma, [u; +-v] / sqrt 2).
fn svd_augmented(a: &DenseMatrix) -> SortedSvd {
    let (m, n) = a.shape();
    if m < n {
        let t = svd_augmented(&a.transpose());
        return SortedSvd { u: t.v, sigma: t.sigma, v: t.u };
    }
    let qr = a.clone().qr();
    let q = qr.q();
    let rf = qr.r();
    let mut big = DenseMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, n), (n, n)).copy_from(&rf);
    big.view_mut((n, 0), (n, n)).copy_from(&rf.transpose());
    let (vals, vecs) = symmetric_eigen_desc(&big);
    let cut = rank_cutoff(2 * n, 2 * n, vals[0].max(0.0));
    let r = vals.iter().take(n).take_while(|&&s| s > cut).count();
    let mut ur = DenseMatrix::zeros(n, r);
    let mut v = DenseMatrix::zeros(n, r);
    for j in 0..r {
        let col = vecs.column(j);
        ur.set_column(j, &col.rows(0, n).normalize());
        v.set_column(j, &col.rows(n, n).normalize());
    }
    let sigma = (0..n).map(|j| if j < r { vals[j] } else { 0.0 }).collect();
    SortedSvd { u: q * complete_basis(&ur), sigma, v: complete_basis(&v) }
}

// Extends orthonormal columns to a square orthonormal basis.
fn complete_basis(q: &DenseMatrix) -> DenseMatrix {
    let n = q.nrows();
    let mut cols: Vec<Vector> = q.column_iter().map(|c| c.into_owned()).collect();
    for e in 0..n {
        if cols.len() == n {
            break;
        }
        let mut c = Vector::zeros(n);
        c[e] = 1.0;
        for _pass in 0..2 {
            for b in &cols {
                let proj = b.dot(&c);
                c.axpy(-proj, b, 1.0);
            }
        }
        let norm = c.norm();
        if norm > 0.5 {
            cols.push(c / norm);
        }
    }
    DenseMatrix::from_columns(&cols)
}

pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    svd_sorted(a).sigma
}

/// Numerical rank of a sorted spectrum under the default cutoff.
pub fn numerical_rank(sigma: &[f64], rows: usize, cols: usize) -> usize {
    let Some(&smax) = sigma.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    let cut = rank_cutoff(rows, cols, smax);
    sigma.iter().take_while(|&&s| s > cut).count()
}

/// Orthonormal basis (n × r) of the row span of `a` (k × n).
pub fn row_space_basis(a: &DenseMatrix) -> DenseMatrix {
    let (k, n) = a.shape();
    let svd = svd_sorted(a);
    let r = numerical_rank(&svd.sigma, k, n);
    svd.v.columns(0, r).into_owned()
}

/// Orthonormal basis (m × r) of the column span of `a`, with the full spectrum.
pub fn column_space_basis(a: &DenseMatrix) -> (DenseMatrix, Vec<f64>) {
    let (m, n) = a.shape();
    let svd = svd_sorted(a);
    let r = numerical_rank(&svd.sigma, m, n);
    (svd.u.columns(0, r).into_owned(), svd.sigma)
}

/// Orthogonal projection onto the row span of `a`.
pub fn row_projection(a: &DenseMatrix) -> DenseMatrix {
    let q = row_space_basis(a);
    &q * q.transpose()
}

/// Moore-Penrose pseudoinverse with the default singular value cutoff.
pub fn pseudo_inverse(a: &DenseMatrix) -> DenseMatrix {
    let (m, n) = a.shape();
    let svd = svd_sorted(a);
    let r = numerical_rank(&svd.sigma, m, n);
    let mut out = DenseMatrix::zeros(n, m);
    for i in 0..r {
        let vi = svd.v.column(i);
        let ui = svd.u.column(i);
        out += (vi * ui.transpose()) / svd.sigma[i];
    }
    out
}

/// Solves the symmetric PSD system `w z = rhs`.
///
/// A Cholesky factorization is tried first; if it fails or its smallest pivot
/// is below `k·eps·‖W‖`, the minimum-norm pseudoinverse solution is returned
/// with singular values cut at `max(k, n)·eps·σ_max`. The flag reports the
/// fallback.
pub fn solve_psd(w: &DenseMatrix, rhs: &Vector, n: usize) -> (Vector, bool) {
    let k = w.nrows();
    if k == 0 {
        return (Vector::zeros(0), false);
    }
    let wnorm = w.norm();
    if wnorm > 0.0 {
        if let Some(chol) = Cholesky::new(w.clone()) {
            let l = chol.l_dirty();
            let min_pivot = (0..k).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
            if min_pivot > k as f64 * f64::EPSILON * wnorm {
                return (chol.solve(rhs), false);
            }
        }
    }
    let svd = svd_sorted(w);
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    let cut = rank_cutoff(k, n, smax);
    let mut z = Vector::zeros(k);
    for (i, &s) in svd.sigma.iter().enumerate() {
        if s > cut && s > 0.0 {
            let coef = svd.u.column(i).dot(rhs) / s;
            z += svd.v.column(i) * coef;
        }
    }
    (z, true)
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues non-increasing.
pub fn symmetric_eigen_desc(m: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DenseMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Symmetric square root of a PSD matrix; negative roundoff eigenvalues are clipped.
pub fn psd_sqrt(h: &DenseMatrix) -> DenseMatrix {
    let (vals, vecs) = symmetric_eigen_desc(h);
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|&v| v.max(0.0).sqrt()));
    &vecs * DenseMatrix::from_diagonal(&d) * vecs.transpose()
}

pub fn frobenius_sq(a: &DenseMatrix) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Orthonormalizes the columns of `g` by modified Gram-Schmidt with one
/// reorthogonalization pass.
pub fn orthonormalize_columns(g: &DenseMatrix) -> DenseMatrix {
    let mut q = g.clone();
    let n = q.ncols();
    for j in 0..n {
        for _pass in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).into_owned();
                q.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = q.column(j).norm();
        assert!(norm > 0.0, "Gram-Schmidt breakdown at column {j}");
        q.column_mut(j).unscale_mut(norm);
    }
    q
}
