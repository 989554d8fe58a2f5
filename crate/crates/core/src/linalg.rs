//! Small dense linear algebra.
//!
//! Everything here works on matrices of order at most a few dozen, so the
//! routines favour clarity over blocking: pivoted LU for determinants and
//! solves, Householder tridiagonalization followed by implicit QL for the
//! symmetric eigenproblem, and Householder QR for least squares.

use crate::error::{Error, Result};

/// Relative pivot threshold below which a matrix is treated as singular.
pub const SINGULAR_PIVOT: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        let rows = cols.first().map_or(0, Vec::len);
        Self::from_fn(rows, cols.len(), |i, j| cols[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            axpy(*xi, self.row(i), &mut out);
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Symmetric matrix with full storage; every write is mirrored so the
/// stored entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: Matrix,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            inner: Matrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: Matrix::identity(n),
        }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    /// Uses only the lower triangle (`i >= j`) of `f`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Symmetrizes a square matrix as `(M + Mᵀ) / 2`.
    pub fn from_matrix(m: &Matrix) -> Self {
        assert!(m.is_square());
        Self::from_fn(m.rows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    /// `Σ w_j v_j v_jᵀ`
    pub fn weighted_outer_sum(vectors: &[Vec<f64>], weights: &[f64]) -> Self {
        assert_eq!(vectors.len(), weights.len());
        let n = vectors.first().map_or(0, Vec::len);
        let mut m = Self::zeros(n);
        for (v, w) in vectors.iter().zip(weights) {
            m.add_rank_one(*w, v);
        }
        m
    }

    pub fn order(&self) -> usize {
        self.inner.rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.inner[(i, j)] = v;
        self.inner[(j, i)] = v;
    }

    /// `self += alpha * v vᵀ`
    pub fn add_rank_one(&mut self, alpha: f64, v: &[f64]) {
        let n = self.order();
        for i in 0..n {
            for j in 0..=i {
                let x = self.get(i, j) + alpha * v[i] * v[j];
                self.set(i, j, x);
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.inner.data {
            *x *= s;
        }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix::from_fn(self.order(), |i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix::from_fn(self.order(), |i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.inner.mul_vec(x)
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    pub fn trace(&self) -> f64 {
        (0..self.order()).map(|i| self.get(i, i)).sum()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    /// Frobenius distance to the identity.
    pub fn identity_residual(&self) -> f64 {
        self.sub(&SymMatrix::identity(self.order())).frobenius_norm()
    }

    /// `Qᵀ self Q`
    pub fn congruence(&self, q: &Matrix) -> SymMatrix {
        let m = q.transpose().matmul(&self.inner).matmul(q);
        SymMatrix::from_matrix(&m)
    }

    pub fn eigen(&self) -> SymEigen {
        sym_eigen(self)
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    /// Fails with [`Error::SingularMatrix`] when a pivot falls below
    /// `SINGULAR_PIVOT · max|a_ij|`.
    pub fn new(a: &Matrix) -> Result<Self> {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let threshold = SINGULAR_PIVOT * a.max_abs();
        if n > 0 && a.max_abs() == 0.0 {
            return Err(Error::SingularMatrix);
        }
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, x| if x.1 > best.1 { x } else { best });
            if pmax <= threshold {
                return Err(Error::SingularMatrix);
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm, sign })
    }

    pub fn det(&self) -> f64 {
        (0..self.n).fold(self.sign, |acc, i| acc * self.lu[(i, i)])
    }

    /// `(log|det|, sign)`
    pub fn log_abs_det(&self) -> (f64, f64) {
        let mut sign = self.sign;
        let mut log = 0.0;
        for i in 0..self.n {
            let d = self.lu[(i, i)];
            sign *= d.signum();
            log += d.abs().ln();
        }
        (log, sign)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[(i, k)] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= self.lu[(i, k)] * x[k];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.n;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Determinant by pivoted LU; singular matrices give `0.0`.
pub fn det(a: &Matrix) -> f64 {
    match Lu::new(a) {
        Ok(lu) => lu.det(),
        Err(_) => 0.0,
    }
}

/// `det(A + u vᵀ) = det(A) (1 + ⟨A⁻¹u, v⟩)`
pub fn det_rank_one_update(a: &Matrix, u: &[f64], v: &[f64]) -> Result<f64> {
    let lu = Lu::new(a)?;
    let a_inv_u = lu.solve(u);
    Ok(lu.det() * (1.0 + dot(&a_inv_u, v)))
}

/// Cholesky factor `A = L Lᵀ` of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(a: &SymMatrix) -> Result<Self> {
        let n = a.order();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::SingularMatrix);
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[(i, k)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[(k, i)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        y
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.l.rows()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }
}

/// Least squares `min ‖A x − b‖₂` via Householder QR. Requires full column
/// rank (relative to [`SINGULAR_PIVOT`]).
pub fn lstsq(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (a.rows(), a.cols());
    assert_eq!(b.len(), m);
    if n > m {
        return Err(Error::SingularMatrix);
    }
    let mut r = a.clone();
    let mut y = b.to_vec();
    let scale = a.max_abs();
    for k in 0..n {
        let col_norm = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>().sqrt();
        if col_norm <= SINGULAR_PIVOT * scale || col_norm == 0.0 {
            return Err(Error::SingularMatrix);
        }
        let alpha = if r[(k, k)] > 0.0 { -col_norm } else { col_norm };
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2 > 0.0 {
            for j in k..n {
                let s = (k..m).map(|i| v[i - k] * r[(i, j)]).sum::<f64>() * 2.0 / vnorm2;
                for i in k..m {
                    r[(i, j)] -= s * v[i - k];
                }
            }
            let s = (k..m).map(|i| v[i - k] * y[i]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..m {
                y[i] -= s * v[i - k];
            }
        }
        if r[(k, k)].abs() <= SINGULAR_PIVOT * scale {
            return Err(Error::SingularMatrix);
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in i + 1..n {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    Ok(x)
}

/// Orthonormal basis (as vectors) of the orthogonal complement of `span(vs)`
/// in ℝⁿ; directions whose residual norm is below `tol` count as dependent.
pub fn orthonormal_complement(vs: &[Vec<f64>], n: usize, tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        if let Some(q) = gram_schmidt_step(&basis, v, tol) {
            basis.push(q);
        }
    }
    let span_dim = basis.len();
    for i in 0..n {
        if basis.len() == n {
            break;
        }
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        if let Some(q) = gram_schmidt_step(&basis, &e, 1e-8) {
            basis.push(q);
        }
    }
    basis.split_off(span_dim)
}

/// Residual of `v` after projecting out the orthonormal `basis`,
/// normalized; `None` when its norm is at most `tol`.
pub fn gram_schmidt_step(basis: &[Vec<f64>], v: &[f64], tol: f64) -> Option<Vec<f64>> {
    let mut r = v.to_vec();
    // two passes for numerical orthogonality
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, &r);
            axpy(-c, q, &mut r);
        }
    }
    let nr = norm(&r);
    (nr > tol).then(|| scaled(&r, 1.0 / nr))
}

/// Distance from `v` to the span of the orthonormal `basis`.
pub fn distance_to_span(basis: &[Vec<f64>], v: &[f64]) -> f64 {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, &r);
            axpy(-c, q, &mut r);
        }
    }
    norm(&r)
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending and
/// eigenvectors stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Coordinates of `x` in the eigenbasis.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.vectors.tr_mul_vec(x)
    }

    /// `V f(Λ) Vᵀ`
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        SymMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| self.vectors[(i, k)] * fv[k] * self.vectors[(j, k)])
                .sum()
        })
    }
}

/// Householder tridiagonalization followed by the implicit QL algorithm.
pub fn sym_eigen(a: &SymMatrix) -> SymEigen {
    let n = a.order();
    if n == 0 {
        return SymEigen {
            values: vec![],
            vectors: Matrix::zeros(0, 0),
        };
    }
    let mut v = a.as_matrix().clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    tridiagonal_ql(&mut v, &mut d, &mut e);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    SymEigen { values, vectors }
}

fn tridiagonalize(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn tridiagonal_ql(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 || iter > 60 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

/// Extreme eigenvalues of a symmetric matrix read as a two-sided bound
/// `λ_min I ⪯ A ⪯ λ_max I`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SandwichCertificate {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `λ_max / λ_min`
    pub gamma_achieved: f64,
    /// Whether `λ_min ≥ 1 − 1e−7`.
    pub dominates_identity: bool,
}

pub const DOMINATION_SLACK: f64 = 1e-7;

pub fn sandwich_gamma(a: &SymMatrix) -> SandwichCertificate {
    let eig = sym_eigen(a);
    let (lambda_min, lambda_max) = (eig.min(), eig.max());
    let gamma_achieved = if lambda_min > 0.0 {
        lambda_max / lambda_min
    } else {
        f64::INFINITY
    };
    SandwichCertificate {
        lambda_min,
        lambda_max,
        gamma_achieved,
        dominates_identity: lambda_min >= 1.0 - DOMINATION_SLACK,
    }
}
