use std::ops::{Add, Index, IndexMut, Mul, Sub};
use std::sync::atomic::{AtomicUsize, Ordering};

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

pub use faer::c64;

static MAX_AMBIENT_DIM: AtomicUsize = AtomicUsize::new(4096);

/// Largest square dimension any operation is allowed to allocate.
pub fn max_ambient_dim() -> usize {
    MAX_AMBIENT_DIM.load(Ordering::Relaxed)
}

pub fn set_max_ambient_dim(dim: usize) {
    MAX_AMBIENT_DIM.store(dim.max(1), Ordering::Relaxed);
}

pub(crate) fn check_dim(dim: usize, what: &str) -> Result<()> {
    let cap = max_ambient_dim();
    if dim > cap {
        return Err(Error::Resource(format!(
            "{what} needs dimension {dim}, above the configured maximum {cap}"
        )));
    }
    Ok(())
}

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };

/// Dense complex matrix. Storage is column-major; the logical entry order used
/// for import/export is row-major.
#[derive(Clone, Debug)]
pub struct ComplexMatrix {
    inner: Mat<c64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { inner: Mat::zeros(rows, cols) }
    }

    pub fn identity(n: usize) -> Self {
        Self { inner: Mat::identity(n, n) }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> c64) -> Self {
        Self { inner: Mat::from_fn(rows, cols, f) }
    }

    /// Validated constructor from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: &[c64]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape("matrix dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries given for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Shape("matrix entries must be finite".into()));
        }
        Ok(Self::from_fn(rows, cols, |i, j| data[i * cols + j]))
    }

    pub fn from_rows(rows: &[Vec<c64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let flat: Vec<c64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(r, c, &flat)
    }

    /// Convenience for real-valued literals, row-major.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        let z: Vec<c64> = data.iter().map(|&x| c64::new(x, 0.0)).collect();
        Self::from_row_major(rows, cols, &z)
    }

    pub fn from_diag(d: &[c64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = c64::new(x, 0.0);
        }
        m
    }

    /// Column matrix holding `v`.
    pub fn column_vector(v: &[c64]) -> Self {
        Self::from_fn(v.len(), 1, |i, _| v[i])
    }

    /// Matrix whose columns are the given vectors (all of equal length).
    pub fn from_columns(rows: usize, cols: &[Vec<c64>]) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.col_mut(j).copy_from_slice(c);
        }
        m
    }

    /// |v><w|
    pub fn outer(v: &[c64], w: &[c64]) -> Self {
        Self::from_fn(v.len(), w.len(), |i, j| v[i] * w[j].conj())
    }

    pub fn from_faer(inner: Mat<c64>) -> Self {
        Self { inner }
    }

    pub fn as_faer(&self) -> MatRef<'_, c64> {
        self.inner.as_ref()
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn col(&self, j: usize) -> &[c64] {
        self.inner.col_as_slice(j)
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [c64] {
        self.inner.col_as_slice_mut(j)
    }

    pub fn row_major(&self) -> Vec<c64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self[(i, j)]);
            }
        }
        out
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut m = Self::zeros(self.rows(), idx.len());
        for (k, &j) in idx.iter().enumerate() {
            m.col_mut(k).copy_from_slice(self.col(j));
        }
        m
    }

    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows(), other.rows());
        let mut m = Self::zeros(self.rows(), self.cols() + other.cols());
        for j in 0..self.cols() {
            m.col_mut(j).copy_from_slice(self.col(j));
        }
        for j in 0..other.cols() {
            m.col_mut(self.cols() + j).copy_from_slice(other.col(j));
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self { inner: self.inner.adjoint().to_owned() }
    }

    pub fn transpose(&self) -> Self {
        Self { inner: self.inner.transpose().to_owned() }
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, mut f: impl FnMut(c64) -> c64) -> Self {
        let mut out = self.clone();
        for j in 0..out.cols() {
            for z in out.col_mut(j) {
                *z = f(*z);
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_c(&self, s: c64) -> Self {
        self.map(|z| z * s)
    }

    /// self + s * other
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        assert_eq!((self.rows(), self.cols()), (other.rows(), other.cols()));
        let mut out = self.clone();
        for j in 0..out.cols() {
            let o = other.col(j);
            for (z, w) in out.col_mut(j).iter_mut().zip(o) {
                *z += w * s;
            }
        }
        out
    }

    pub fn trace(&self) -> c64 {
        (0..self.rows().min(self.cols())).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<c64> {
        (0..self.rows().min(self.cols())).map(|i| self[(i, i)]).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.cols() {
            s += self.col(j).iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        s.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..self.cols() {
            for z in self.col(j) {
                m = m.max(z.norm());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        (0..self.cols()).all(|j| self.col(j).iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// max |M_ij - conj(M_ji)|
    pub fn hermitian_defect(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows();
        let mut m: f64 = 0.0;
        for j in 0..n {
            for i in j..n {
                m = m.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        m
    }

    /// (M + M†)/2
    pub fn hermitian_part(&self) -> Self {
        let n = self.rows();
        Self::from_fn(n, n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn is_diagonal(&self) -> bool {
        for j in 0..self.cols() {
            for (i, z) in self.col(j).iter().enumerate() {
                if i != j && (z.re != 0.0 || z.im != 0.0) {
                    return false;
                }
            }
        }
        true
    }

    pub fn nnz(&self) -> usize {
        (0..self.cols())
            .map(|j| self.col(j).iter().filter(|z| z.re != 0.0 || z.im != 0.0).count())
            .sum()
    }

    /// Hilbert-Schmidt inner product Tr(A† B).
    pub fn hs_inner(&self, other: &Self) -> c64 {
        assert_eq!((self.rows(), self.cols()), (other.rows(), other.cols()));
        let mut s = ZERO;
        for j in 0..self.cols() {
            for (a, b) in self.col(j).iter().zip(other.col(j)) {
                s += a.conj() * b;
            }
        }
        s
    }

    /// Matrix product. Very sparse operands (diagonal, permutation, basis
    /// projectors) skip the dense kernel, which keeps classical models cheap.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols(), other.rows(), "matmul shape mismatch");
        let big = self.rows() * self.cols() >= 4096 || other.rows() * other.cols() >= 4096;
        if big {
            let na = self.nnz();
            let nb = other.nnz();
            let sparse_a = na * 8 <= self.rows() * self.cols();
            let sparse_b = nb * 8 <= other.rows() * other.cols();
            if sparse_a && (!sparse_b || na * other.cols() <= nb * self.rows()) {
                return sparse_left(self, other);
            }
            if sparse_b {
                return sparse_right(self, other);
            }
        }
        Self { inner: &self.inner * &other.inner }
    }

    /// A† B without forming A†.
    pub fn adjoint_matmul(&self, other: &Self) -> Self {
        if self.rows() * self.cols() >= 4096 && self.nnz() * 8 <= self.rows() * self.cols() {
            return self.adjoint().matmul(other);
        }
        Self { inner: self.inner.adjoint() * &other.inner }
    }

    /// A B† without forming B†.
    pub fn matmul_adjoint(&self, other: &Self) -> Self {
        if other.rows() * other.cols() >= 4096 && other.nnz() * 8 <= other.rows() * other.cols() {
            return self.matmul(&other.adjoint());
        }
        Self { inner: &self.inner * other.inner.adjoint() }
    }

    pub fn apply(&self, v: &[c64]) -> Vec<c64> {
        assert_eq!(self.cols(), v.len());
        let mut out = vec![ZERO; self.rows()];
        for (j, &x) in v.iter().enumerate() {
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.col(j)) {
                *o += a * x;
            }
        }
        out
    }
}

fn sparse_left(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut nz: Vec<(usize, usize, c64)> = Vec::new();
    for k in 0..a.cols() {
        for (i, z) in a.col(k).iter().enumerate() {
            if z.re != 0.0 || z.im != 0.0 {
                nz.push((i, k, *z));
            }
        }
    }
    let mut c = ComplexMatrix::zeros(a.rows(), b.cols());
    for j in 0..b.cols() {
        let bj = b.col(j).to_vec();
        let cj = c.col_mut(j);
        for &(i, k, z) in &nz {
            let w = bj[k];
            if w.re != 0.0 || w.im != 0.0 {
                cj[i] += z * w;
            }
        }
    }
    c
}

fn sparse_right(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut c = ComplexMatrix::zeros(a.rows(), b.cols());
    for j in 0..b.cols() {
        for (k, z) in b.col(j).iter().enumerate() {
            if z.re == 0.0 && z.im == 0.0 {
                continue;
            }
            let z = *z;
            let ak = a.col(k).to_vec();
            for (o, x) in c.col_mut(j).iter_mut().zip(&ak) {
                *o += x * z;
            }
        }
    }
    c
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = c64;
    fn index(&self, (i, j): (usize, usize)) -> &c64 {
        &self.inner[(i, j)]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut c64 {
        &mut self.inner[(i, j)]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.axpy(-1.0, rhs)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Kronecker product A⊗B, with A the more significant factor.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_dim(a.rows() * b.rows(), "tensor product")?;
    check_dim(a.cols() * b.cols(), "tensor product")?;
    Ok(kron(a, b))
}

pub(crate) fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows(), b.cols());
    let mut out = ComplexMatrix::zeros(a.rows() * br, a.cols() * bc);
    for ja in 0..a.cols() {
        for (ia, &x) in a.col(ja).iter().enumerate() {
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            for jb in 0..bc {
                let src = b.col(jb);
                let dst = &mut out.col_mut(ja * bc + jb)[ia * br..(ia + 1) * br];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = x * s;
                }
            }
        }
    }
    out
}

/// Kronecker product of two vectors.
pub fn kron_vec(a: &[c64], b: &[c64]) -> Vec<c64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

/// Row-major flattening: vec(|v><w|) = |v> ⊗ conj(|w>).
pub fn vec_map(x: &ComplexMatrix) -> Vec<c64> {
    x.row_major()
}

/// Inverse of [`vec_map`] for square matrices.
pub fn unvec(v: &[c64]) -> Result<ComplexMatrix> {
    let n = (v.len() as f64).sqrt().round() as usize;
    if n == 0 || n * n != v.len() {
        return Err(Error::Shape(format!("vector of length {} is not a square matrix", v.len())));
    }
    ComplexMatrix::from_row_major(n, n, v)
}

pub fn unvec_shape(v: &[c64], rows: usize, cols: usize) -> Result<ComplexMatrix> {
    ComplexMatrix::from_row_major(rows, cols, v)
}

pub fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[c64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvector storage. Diagonal inputs yield a permutation of the
/// standard basis, which is kept implicit to save memory at large dimension.
#[derive(Clone, Debug)]
pub enum Eigenvectors {
    Dense(ComplexMatrix),
    Permutation { dim: usize, perm: Vec<usize> },
}

impl Eigenvectors {
    pub fn dim(&self) -> usize {
        match self {
            Eigenvectors::Dense(v) => v.rows(),
            Eigenvectors::Permutation { dim, .. } => *dim,
        }
    }

    pub fn column(&self, j: usize) -> Vec<c64> {
        match self {
            Eigenvectors::Dense(v) => v.col(j).to_vec(),
            Eigenvectors::Permutation { dim, perm } => {
                let mut e = vec![ZERO; *dim];
                e[perm[j]] = ONE;
                e
            }
        }
    }

    pub fn select(&self, idx: &[usize]) -> ComplexMatrix {
        match self {
            Eigenvectors::Dense(v) => v.select_columns(idx),
            Eigenvectors::Permutation { dim, perm } => {
                let mut m = ComplexMatrix::zeros(*dim, idx.len());
                for (k, &j) in idx.iter().enumerate() {
                    m[(perm[j], k)] = ONE;
                }
                m
            }
        }
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let all: Vec<usize> = (0..self.dim()).collect();
        self.select(&all)
    }

    /// V diag(f) V†, skipping columns with f = 0.
    pub fn reconstruct(&self, f: &[f64]) -> ComplexMatrix {
        let idx: Vec<usize> = (0..f.len()).filter(|&j| f[j] != 0.0).collect();
        self.reconstruct_subset(&idx, &idx.iter().map(|&j| f[j]).collect::<Vec<_>>())
    }

    pub fn reconstruct_subset(&self, idx: &[usize], weights: &[f64]) -> ComplexMatrix {
        let n = self.dim();
        match self {
            Eigenvectors::Permutation { perm, .. } => {
                let mut m = ComplexMatrix::zeros(n, n);
                for (&j, &w) in idx.iter().zip(weights) {
                    m[(perm[j], perm[j])] += c64::new(w, 0.0);
                }
                m
            }
            Eigenvectors::Dense(v) => {
                if idx.is_empty() {
                    return ComplexMatrix::zeros(n, n);
                }
                let sel = v.select_columns(idx);
                let mut scaled = sel.clone();
                for (k, &w) in weights.iter().enumerate() {
                    for z in scaled.col_mut(k) {
                        *z *= w;
                    }
                }
                scaled.matmul_adjoint(&sel)
            }
        }
    }
}

/// Spectral decomposition with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Eigenvectors,
}

impl Eigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Indices of eigenvalues above `cutoff * max(λ_max, 0)`.
    pub fn support_indices(&self, cutoff: f64) -> Vec<usize> {
        let top = self.max();
        if top <= 0.0 {
            return Vec::new();
        }
        (0..self.dim()).filter(|&i| self.values[i] > cutoff * top).collect()
    }

    /// f applied to the spectrum.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let w: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        self.vectors.reconstruct(&w)
    }
}

/// Eigendecomposition of a matrix assumed Hermitian (only the lower triangle is read).
pub fn eigh(m: &ComplexMatrix) -> Result<Eigen> {
    assert!(m.is_square());
    let n = m.rows();
    if m.is_diagonal() {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re));
        let values = perm.iter().map(|&i| m[(i, i)].re).collect();
        return Ok(Eigen { values, vectors: Eigenvectors::Permutation { dim: n, perm } });
    }
    let e = m
        .as_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::NoConvergence { routine: "hermitian eigensolver", iterations: n })?;
    let values: Vec<f64> = e.S().column_vector().iter().map(|z| z.re).collect();
    let vectors = ComplexMatrix::from_faer(e.U().to_owned());
    Ok(Eigen { values, vectors: Eigenvectors::Dense(vectors) })
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(m: &ComplexMatrix) -> Result<Vec<f64>> {
    assert!(m.is_square());
    if m.is_diagonal() {
        let mut v: Vec<f64> = m.diagonal().iter().map(|z| z.re).collect();
        v.sort_by(f64::total_cmp);
        return Ok(v);
    }
    m.as_faer()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::NoConvergence { routine: "hermitian eigensolver", iterations: m.rows() })
}

pub fn lambda_max(m: &ComplexMatrix) -> Result<f64> {
    Ok(eigvalsh(m)?.last().copied().unwrap_or(0.0))
}

pub fn lambda_min(m: &ComplexMatrix) -> Result<f64> {
    Ok(eigvalsh(m)?.first().copied().unwrap_or(0.0))
}

pub struct Svd {
    pub u: ComplexMatrix,
    pub s: Vec<f64>,
    pub v: ComplexMatrix,
}

/// Thin SVD, singular values nonincreasing.
pub fn svd(m: &ComplexMatrix) -> Result<Svd> {
    let d = m
        .as_faer()
        .thin_svd()
        .map_err(|_| Error::NoConvergence { routine: "svd", iterations: m.rows().max(m.cols()) })?;
    Ok(Svd {
        u: ComplexMatrix::from_faer(d.U().to_owned()),
        s: d.S().column_vector().iter().map(|z| z.re).collect(),
        v: ComplexMatrix::from_faer(d.V().to_owned()),
    })
}

pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if m.is_diagonal() {
        let mut s: Vec<f64> = m.diagonal().iter().map(|z| z.norm()).collect();
        s.sort_by(|a, b| b.total_cmp(a));
        return Ok(s);
    }
    m.as_faer()
        .singular_values()
        .map_err(|_| Error::NoConvergence { routine: "svd", iterations: m.rows().max(m.cols()) })
}

/// ‖M‖₁, the sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> f64 {
    if m.is_square() && m.hermitian_defect() <= 1e-13 * m.max_abs().max(1.0) {
        if let Ok(ev) = eigvalsh(&m.hermitian_part()) {
            return ev.iter().map(|x| x.abs()).sum();
        }
    }
    singular_values(m).map(|s| s.iter().sum()).unwrap_or(f64::NAN)
}

/// ‖M‖_∞, the largest singular value.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    singular_values(m).map(|s| s.first().copied().unwrap_or(0.0)).unwrap_or(f64::NAN)
}

/// Orthonormal basis of the column span, dropping directions with singular
/// value below `tol` relative to the largest.
pub fn orthonormal_span(m: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    if m.cols() == 0 {
        return Ok(ComplexMatrix::zeros(m.rows(), 0));
    }
    let d = svd(m)?;
    let top = d.s.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..d.s.len()).filter(|&i| top > 0.0 && d.s[i] > tol * top).collect();
    Ok(d.u.select_columns(&keep))
}
