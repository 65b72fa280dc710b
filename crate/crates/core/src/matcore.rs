//! Dense real-matrix kernels: arithmetic, spectra, rank, minimal polynomials,
//! Kronecker products and Schur-stability tests.
//!
//! [`Matrix`] is a thin newtype over `nalgebra::DMatrix<f64>` that refuses
//! non-finite entries at construction. Every routine here is a pure function
//! of its inputs.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::linalg::{Schur, SVD};
use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative tolerance for rank decisions.
pub const RANK_TOL: f64 = 1e-9;

/// Default tolerance for the Krylov dependence test behind [`minimal_polynomial`].
pub const MINPOLY_TOL: f64 = 1e-9;

const SCHUR_MAX_ITER: usize = 100_000;

/// Dense real matrix with explicit dimensions and finite entries.
#[derive(Clone, PartialEq)]
pub struct Matrix(DMatrix<f64>);

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Matrix(DMatrix::identity(n, n))
    }

    /// Builds from row-major data, rejecting wrong lengths and non-finite values.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "Matrix::from_row_slice",
                format!("{} entries for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, data))
    }

    /// Builds from a list of rows. An empty list yields a 0x0 matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some((i, bad)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::dim(
                format!("Matrix::from_rows row {i}"),
                cols,
                bad.len(),
            ));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(rows.len(), cols, &data)
    }

    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let value = m[(i, j)];
                if !value.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j, value });
                }
            }
        }
        Ok(Matrix(m))
    }

    /// Column vector from a slice.
    pub fn column(values: &[f64]) -> Result<Self> {
        Self::from_row_slice(values.len(), 1, values)
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m.0[(i, i)] = v;
        }
        Self::from_dmatrix(m.0)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.0[(row, col)] = value;
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.to_rows().into_iter().flatten().collect()
    }

    /// Column-stacked vector (the `vec` operator).
    pub fn vec(&self) -> Vec<f64> {
        self.0.as_slice().to_vec()
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Matrix(self.0.transpose())
    }

    pub fn scale(&self, s: f64) -> Self {
        Matrix(&self.0 * s)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Integer power; `pow(0)` is the identity.
    pub fn pow(&self, k: u32) -> Self {
        assert!(self.is_square(), "pow of a non-square matrix");
        let mut out = Self::identity(self.rows());
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        Matrix((&self.0 + self.0.transpose()) * 0.5)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols(), v.len(), "matrix-vector dimension mismatch");
        let mut out = vec![0.0; self.rows()];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..self.cols()).map(|j| self.0[(i, j)] * v[j]).sum();
        }
        out
    }

    pub fn try_mul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols() != rhs.rows() {
            return Err(Error::dim(
                "matrix product",
                format!("{} rows on the right", self.cols()),
                rhs.rows(),
            ));
        }
        Ok(Matrix(&self.0 * &rhs.0))
    }

    pub fn inverse(&self) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::dim("inverse", "square matrix", format!("{:?}", self.shape())));
        }
        self.0
            .clone()
            .try_inverse()
            .map(Matrix)
            .ok_or_else(|| Error::numerical("inverse", "matrix is singular"))
    }

    /// Solves `self · X = rhs` by LU with partial pivoting.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        if !self.is_square() || self.rows() != rhs.rows() {
            return Err(Error::dim(
                "solve",
                format!("square lhs with {} rows", rhs.rows()),
                format!("{:?}", self.shape()),
            ));
        }
        self.0
            .clone()
            .lu()
            .solve(&rhs.0)
            .map(Matrix)
            .ok_or_else(|| Error::numerical("solve", "matrix is singular"))
    }

    /// Block assembly. Every block row must share a height and every block
    /// column a width; `None` entries are zero blocks sized from their
    /// neighbours.
    pub fn block(blocks: &[Vec<Option<&Matrix>>]) -> Result<Matrix> {
        let nbr = blocks.len();
        let nbc = blocks.first().map_or(0, Vec::len);
        let mut heights = vec![None; nbr];
        let mut widths = vec![None; nbc];
        for (bi, row) in blocks.iter().enumerate() {
            if row.len() != nbc {
                return Err(Error::dim(format!("block row {bi}"), nbc, row.len()));
            }
            for (bj, m) in row.iter().enumerate() {
                if let Some(m) = m {
                    for (slot, val, what) in [
                        (&mut heights[bi], m.rows(), "height"),
                        (&mut widths[bj], m.cols(), "width"),
                    ] {
                        match slot {
                            Some(v) if *v != val => {
                                return Err(Error::dim(
                                    format!("block ({bi}, {bj}) {what}"),
                                    *v,
                                    val,
                                ))
                            }
                            _ => *slot = Some(val),
                        }
                    }
                }
            }
        }
        let heights: Vec<usize> = heights.into_iter().map(|h| h.unwrap_or(0)).collect();
        let widths: Vec<usize> = widths.into_iter().map(|w| w.unwrap_or(0)).collect();
        let mut out = DMatrix::zeros(heights.iter().sum(), widths.iter().sum());
        let mut r0 = 0;
        for (bi, row) in blocks.iter().enumerate() {
            let mut c0 = 0;
            for (bj, m) in row.iter().enumerate() {
                if let Some(m) = m {
                    out.view_mut((r0, c0), m.shape()).copy_from(&m.0);
                }
                c0 += widths[bj];
            }
            r0 += heights[bi];
        }
        Ok(Matrix(out))
    }

    pub fn hstack(parts: &[&Matrix]) -> Result<Matrix> {
        Self::block(&[parts.iter().map(|m| Some(*m)).collect()])
    }

    pub fn vstack(parts: &[&Matrix]) -> Result<Matrix> {
        Self::block(&parts.iter().map(|m| vec![Some(*m)]).collect::<Vec<_>>())
    }

    /// Copy of the sub-block starting at `(row, col)` with the given shape.
    pub fn sub_block(&self, row: usize, col: usize, rows: usize, cols: usize) -> Matrix {
        Matrix(self.0.view((row, col), (rows, cols)).into_owned())
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix{:?}", self.to_rows())
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.to_rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols(), rhs.rows(), "matrix product dimension mismatch");
        Matrix(&self.0 * &rhs.0)
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum dimension mismatch");
        Matrix(&self.0 + &rhs.0)
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix difference dimension mismatch");
        Matrix(&self.0 - &rhs.0)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        Matrix(-&self.0)
    }
}

/// Eigenvalues of a real matrix as `(re, im)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrum {
    pub values: Vec<(f64, f64)>,
}

impl ComplexSpectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn moduli(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|&(re, im)| re.hypot(im))
    }

    pub fn spectral_radius(&self) -> f64 {
        self.moduli().fold(0.0, f64::max)
    }

    pub fn as_complex(&self) -> Vec<Complex<f64>> {
        self.values.iter().map(|&(re, im)| Complex::new(re, im)).collect()
    }

    /// Multiset comparison: greedy nearest matching within `tol`.
    pub fn matches(&self, other: &ComplexSpectrum, tol: f64) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let mut used = vec![false; other.len()];
        self.values.iter().all(|&(re, im)| {
            let best = other
                .values
                .iter()
                .enumerate()
                .filter(|(k, _)| !used[*k])
                .map(|(k, &(r2, i2))| (k, (re - r2).hypot(im - i2)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match best {
                Some((k, d)) if d <= tol => {
                    used[k] = true;
                    true
                }
                _ => false,
            }
        })
    }
}

/// All eigenvalues, sorted lexicographically by (real, imaginary).
pub fn eigenvalues(m: &Matrix) -> Result<ComplexSpectrum> {
    if !m.is_square() {
        return Err(Error::dim("eigenvalues", "square matrix", format!("{:?}", m.shape())));
    }
    if !m.all_finite() {
        return Err(Error::numerical("eigenvalues", "matrix has non-finite entries"));
    }
    if m.rows() == 0 {
        return Ok(ComplexSpectrum { values: Vec::new() });
    }
    let schur = Schur::try_new(m.0.clone(), f64::EPSILON, SCHUR_MAX_ITER).ok_or_else(|| {
        Error::numerical(
            "eigenvalues",
            format!("QR iteration did not converge for {}x{} matrix {:?}", m.rows(), m.cols(), m),
        )
    })?;
    let mut values: Vec<(f64, f64)> = schur
        .complex_eigenvalues()
        .iter()
        .map(|c| (c.re, c.im))
        .collect();
    values.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(ComplexSpectrum { values })
}

pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?.spectral_radius())
}

/// True iff the spectral radius is below `1 - margin`.
pub fn is_schur(m: &Matrix, margin: f64) -> Result<bool> {
    Ok(spectral_radius(m)? < 1.0 - margin)
}

pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Vec::new();
    }
    SVD::new(m.0.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect()
}

/// Number of singular values above `tol` times the largest one.
pub fn numeric_rank(m: &Matrix, tol: f64) -> usize {
    let sv = singular_values(m);
    let largest = sv.iter().copied().fold(0.0, f64::max);
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * largest).count()
}

/// Rank of the complex matrix `re + i·im`, computed through the real
/// embedding `[[re, -im], [im, re]]` whose rank is twice the complex rank.
pub fn complex_rank(re: &Matrix, im: &Matrix, tol: f64) -> usize {
    assert_eq!(re.shape(), im.shape(), "complex_rank parts differ in shape");
    let neg_im = -im;
    let embedded = Matrix::block(&[
        vec![Some(re), Some(&neg_im)],
        vec![Some(im), Some(re)],
    ])
    .expect("blocks share a shape");
    numeric_rank(&embedded, tol) / 2
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix(a.0.kronecker(&b.0))
}

/// `[b, ab, a²b, …, a^{n-1}b]`.
pub fn controllability_matrix(a: &Matrix, b: &Matrix) -> Matrix {
    assert!(a.is_square() && a.rows() == b.rows(), "controllability dimension mismatch");
    let n = a.rows();
    let mut blocks = Vec::with_capacity(n);
    let mut current = b.clone();
    for _ in 0..n {
        let next = a * &current;
        blocks.push(current);
        current = next;
    }
    let refs: Vec<&Matrix> = blocks.iter().collect();
    Matrix::hstack(&refs).expect("blocks share a height")
}

/// Monic polynomial `λ^d + c_{d-1}λ^{d-1} + … + c_0`, stored as `[c_0, …, c_{d-1}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonicPolynomial {
    coefficients: Vec<f64>,
}

impl MonicPolynomial {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::numerical("MonicPolynomial", "degree must be at least 1"));
        }
        if let Some(v) = coefficients.iter().find(|c| !c.is_finite()) {
            return Err(Error::numerical("MonicPolynomial", format!("non-finite coefficient {v}")));
        }
        Ok(MonicPolynomial { coefficients })
    }

    /// Product of `(λ - root)` factors over real roots.
    pub fn from_real_roots(roots: &[f64]) -> Result<Self> {
        let mut full = vec![1.0];
        for &root in roots {
            let mut next = vec![0.0; full.len() + 1];
            for (k, &c) in full.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= root * c;
            }
            full = next;
        }
        full.pop();
        Self::new(full)
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Evaluates `p(m)` by Horner's rule.
    pub fn eval_matrix(&self, m: &Matrix) -> Matrix {
        let n = m.rows();
        let mut acc = Matrix::identity(n);
        for &c in self.coefficients.iter().rev() {
            acc = &(&acc * m) + &Matrix::identity(n).scale(c);
        }
        acc
    }

    pub fn roots(&self) -> Result<ComplexSpectrum> {
        let (beta, _) = companion_pair(self)?;
        eigenvalues(&beta)
    }
}

impl fmt::Display for MonicPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "λ^{}", self.degree())?;
        for (k, &c) in self.coefficients.iter().enumerate().rev() {
            if c != 0.0 {
                let sign = if c < 0.0 { '-' } else { '+' };
                match k {
                    0 => write!(f, " {sign} {}", c.abs())?,
                    1 => write!(f, " {sign} {}λ", c.abs())?,
                    _ => write!(f, " {sign} {}λ^{k}", c.abs())?,
                }
            }
        }
        Ok(())
    }
}

/// Lowest-degree monic polynomial annihilating `m`, found as the first linear
/// dependence among the normalised Krylov vectors `vec(I), vec(m), vec(m²), …`.
pub fn minimal_polynomial(m: &Matrix, tol: f64) -> Result<MonicPolynomial> {
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::dim(
            "minimal_polynomial",
            "non-empty square matrix",
            format!("{:?}", m.shape()),
        ));
    }
    let n = m.rows();
    let mut powers = vec![Matrix::identity(n)];
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut norms: Vec<f64> = Vec::new();
    let push = |p: &Matrix, basis: &mut Vec<DVector<f64>>, norms: &mut Vec<f64>| {
        let v = DVector::from_column_slice(&p.vec());
        let nrm = v.norm();
        norms.push(nrm);
        basis.push(if nrm > 0.0 { v / nrm } else { v });
    };
    push(&powers[0], &mut basis, &mut norms);

    for d in 1..=n {
        let next = &powers[d - 1] * m;
        push(&next, &mut basis, &mut norms);
        powers.push(next);
        let target = &basis[d];
        let target_norm = norms[d];
        if target_norm == 0.0 {
            // m^d = 0
            return MonicPolynomial::new(vec![0.0; d]);
        }
        let krylov = DMatrix::from_columns(&basis[..d]);
        let svd = SVD::new(krylov.clone(), true, true);
        let coeffs = svd
            .solve(target, f64::EPSILON)
            .map_err(|e| Error::numerical("minimal_polynomial", e))?;
        let residual = (&krylov * &coeffs - target).norm();
        if residual <= tol {
            // m^d = Σ c_j' m^j  with c_j' = coeffs_j · ‖m^d‖ / ‖m^j‖
            let c: Vec<f64> = (0..d).map(|j| -coeffs[j] * target_norm / norms[j]).collect();
            return MonicPolynomial::new(c);
        }
    }
    Err(Error::numerical(
        "minimal_polynomial",
        format!("no Krylov dependence found up to degree {n}; tolerance {tol} too tight"),
    ))
}

/// Companion matrix `β` of `p` (ones on the superdiagonal, `-c` in the last
/// row) and the unit column `σ = e_d`. The pair is checked to be controllable.
pub fn companion_pair(p: &MonicPolynomial) -> Result<(Matrix, Matrix)> {
    let d = p.degree();
    let mut beta = Matrix::zeros(d, d);
    for i in 0..d - 1 {
        beta.set(i, i + 1, 1.0);
    }
    for (j, &c) in p.coefficients().iter().enumerate() {
        beta.set(d - 1, j, -c);
    }
    let mut sigma = Matrix::zeros(d, 1);
    sigma.set(d - 1, 0, 1.0);
    let rank = numeric_rank(&controllability_matrix(&beta, &sigma), RANK_TOL);
    if rank != d {
        return Err(Error::numerical(
            "companion_pair",
            format!("controllability matrix has rank {rank} < {d}"),
        ));
    }
    Ok((beta, sigma))
}

/// Characteristic polynomial via the Faddeev–LeVerrier recursion.
pub fn characteristic_polynomial(m: &Matrix) -> Result<MonicPolynomial> {
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::dim(
            "characteristic_polynomial",
            "non-empty square matrix",
            format!("{:?}", m.shape()),
        ));
    }
    let n = m.rows();
    let mut coeffs = vec![0.0; n];
    let mut mk = Matrix::zeros(n, n);
    let mut c_prev = 1.0;
    for k in 1..=n {
        mk = &(m * &mk) + &Matrix::identity(n).scale(c_prev);
        let am = m * &mk;
        let trace: f64 = (0..n).map(|i| am.get(i, i)).sum();
        let c = -trace / k as f64;
        coeffs[n - k] = c;
        c_prev = c;
    }
    MonicPolynomial::new(coeffs)
}
