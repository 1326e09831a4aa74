//! Dense complex matrices at mesh scale.
//!
//! Matrices here are small (tens to a few thousand rows) and dense, so a plain
//! row-major `Vec<Complex64>` is all the storage we need. Elimination routines
//! operate on pairs of rows in place, which is the access pattern of every
//! MZI-based algorithm in this crate.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frobenius deviation accepted when wrapping a matrix as a unitary or isometry.
pub const UNITARITY_TOLERANCE: f64 = 1e-9;

/// Relative threshold used by [`ComplexMatrix::zero_tolerance`].
pub const ZERO_RELATIVE: f64 = 1e-10;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixFile", into = "MatrixFile")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major data; fails on a length mismatch or a
    /// non-finite entry.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != cols) {
            return Err(Error::Dimension(format!(
                "row {r} has {} entries, expected {cols}",
                row.len()
            )));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn diagonal(entries: &[Complex64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    /// Permutation matrix sending basis vector `i` to `perm[i]`.
    pub fn permutation(perm: &[usize]) -> Self {
        let mut m = Self::zeros(perm.len(), perm.len());
        for (i, &j) in perm.iter().enumerate() {
            m[(j, i)] = ONE;
        }
        m
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

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [Complex64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Scale-invariant threshold below which an amplitude counts as zero:
    /// `1e-10 * ||A||_F / sqrt(rows * cols)`.
    pub fn zero_tolerance(&self) -> f64 {
        ZERO_RELATIVE * self.frobenius_norm() / ((self.rows * self.cols) as f64).sqrt()
    }

    /// `||A^dag A - I||_F`.
    pub fn isometry_deviation(&self) -> f64 {
        let gram = self.adjoint().matmul(self);
        gram.distance(&Self::identity(self.cols))
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == ZERO {
                    continue;
                }
                let src = rhs.row(k);
                let dst = out.row_mut(r);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// Left-multiplies rows `i` and `j` by the 2x2 matrix `g`:
    /// `(row_i, row_j) <- g * (row_i, row_j)`.
    pub fn rotate_rows(&mut self, i: usize, j: usize, g: &[[Complex64; 2]; 2]) {
        debug_assert_ne!(i, j);
        for c in 0..self.cols {
            let a = self[(i, c)];
            let b = self[(j, c)];
            self[(i, c)] = g[0][0] * a + g[0][1] * b;
            self[(j, c)] = g[1][0] * a + g[1][1] * b;
        }
    }

    /// Right-multiplies columns `i` and `j` by `g`:
    /// `(col_i, col_j) <- (col_i, col_j) * g`.
    pub fn rotate_cols(&mut self, i: usize, j: usize, g: &[[Complex64; 2]; 2]) {
        debug_assert_ne!(i, j);
        for r in 0..self.rows {
            let a = self[(r, i)];
            let b = self[(r, j)];
            self[(r, i)] = a * g[0][0] + b * g[1][0];
            self[(r, j)] = a * g[0][1] + b * g[1][1];
        }
    }

    pub fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(i * self.cols + c, j * self.cols + c);
        }
    }

    pub fn swap_cols(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for r in 0..self.rows {
            self.data.swap(r * self.cols + i, r * self.cols + j);
        }
    }

    /// Copy of the rows in `rows` and columns in `cols`.
    pub fn submatrix(&self, rows: &[usize], cols: std::ops::Range<usize>) -> Self {
        let mut out = Self::zeros(rows.len(), cols.len());
        for (ri, &r) in rows.iter().enumerate() {
            for (ci, c) in cols.clone().enumerate() {
                out[(ri, ci)] = self[(r, c)];
            }
        }
        out
    }

    /// First `n` columns.
    pub fn leading_columns(&self, n: usize) -> Self {
        let rows: Vec<usize> = (0..self.rows).collect();
        self.submatrix(&rows, 0..n)
    }

    /// Numerical rank by Gaussian elimination with complete pivoting.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let mut a = self.clone();
        let scale = a.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0;
        }
        let tol = rel_tol * scale;
        let mut rank = 0;
        let (rows, cols) = (a.rows, a.cols);
        while rank < rows.min(cols) {
            let mut best = (0.0, rank, rank);
            for r in rank..rows {
                for c in rank..cols {
                    let v = a[(r, c)].norm();
                    if v > best.0 {
                        best = (v, r, c);
                    }
                }
            }
            if best.0 <= tol {
                break;
            }
            a.swap_rows(rank, best.1);
            a.swap_cols(rank, best.2);
            let pivot = a[(rank, rank)];
            for r in rank + 1..rows {
                let f = a[(r, rank)] / pivot;
                if f == ZERO {
                    continue;
                }
                for c in rank..cols {
                    let v = a[(rank, c)];
                    a[(r, c)] -= f * v;
                }
            }
            rank += 1;
        }
        rank
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(r) {
                write!(f, "{:>9.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// On-disk matrix representation: `{"rows", "cols", "data": [[[re, im], ...], ...]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    rows: usize,
    cols: usize,
    data: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<MatrixFile> for ComplexMatrix {
    type Error = Error;

    fn try_from(file: MatrixFile) -> Result<Self> {
        if file.data.len() != file.rows {
            return Err(Error::Parse(format!(
                "\"data\" has {} rows, header says {}",
                file.data.len(),
                file.rows
            )));
        }
        let mut data = Vec::with_capacity(file.rows * file.cols);
        for (r, row) in file.data.iter().enumerate() {
            if row.len() != file.cols {
                return Err(Error::Parse(format!(
                    "ragged matrix: row {r} has {} entries, expected {}",
                    row.len(),
                    file.cols
                )));
            }
            data.extend(row.iter().map(|&[re, im]| Complex64::new(re, im)));
        }
        ComplexMatrix::from_vec(file.rows, file.cols, data)
    }
}

impl From<ComplexMatrix> for MatrixFile {
    fn from(m: ComplexMatrix) -> Self {
        let data = (0..m.rows)
            .map(|r| m.row(r).iter().map(|z| [z.re, z.im]).collect())
            .collect();
        Self {
            rows: m.rows,
            cols: m.cols,
            data,
        }
    }
}

/// Square matrix with `||U^dag U - I||_F <= 1e-9`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct UnitaryMatrix(ComplexMatrix);

impl UnitaryMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "unitary must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        let deviation = m.isometry_deviation();
        if deviation.is_nan() || deviation > UNITARITY_TOLERANCE {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self(m))
    }

    /// Wraps without checking. Callers guarantee unitarity by construction.
    pub(crate) fn new_unchecked(m: ComplexMatrix) -> Self {
        debug_assert!(m.is_square());
        Self(m)
    }

    pub fn identity(m: usize) -> Self {
        Self(ComplexMatrix::identity(m))
    }

    pub fn modes(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }
}

impl TryFrom<ComplexMatrix> for UnitaryMatrix {
    type Error = Error;

    fn try_from(m: ComplexMatrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<UnitaryMatrix> for ComplexMatrix {
    fn from(u: UnitaryMatrix) -> Self {
        u.0
    }
}

/// `m x n` matrix with orthonormal columns, `m >= n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct Isometry(ComplexMatrix);

impl Isometry {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.rows < m.cols {
            return Err(Error::Dimension(format!(
                "isometry needs rows >= cols, got {}x{}",
                m.rows, m.cols
            )));
        }
        let deviation = m.isometry_deviation();
        if deviation.is_nan() || deviation > UNITARITY_TOLERANCE {
            return Err(Error::NotIsometry { deviation });
        }
        Ok(Self(m))
    }

    /// `(I_n; 0)`.
    pub fn embedding(m: usize, n: usize) -> Result<Self> {
        if n > m || n == 0 {
            return Err(Error::Dimension(format!("cannot embed {n} columns in {m} modes")));
        }
        let mut v = ComplexMatrix::zeros(m, n);
        for i in 0..n {
            v[(i, i)] = ONE;
        }
        Ok(Self(v))
    }

    pub fn modes(&self) -> usize {
        self.0.rows
    }

    pub fn photons(&self) -> usize {
        self.0.cols
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    /// Completes the isometry to a unitary whose first `n` columns are exactly
    /// `self`. The complement is built by Gram-Schmidt over the standard basis,
    /// so `(I_n; 0)` completes to the identity.
    pub fn complete(&self) -> UnitaryMatrix {
        let (m, n) = (self.0.rows, self.0.cols);
        let mut basis: Vec<Vec<Complex64>> = (0..n).map(|c| self.0.column(c)).collect();
        // Any rejected e_j lies within 1/sqrt(2m) of the final span, so at most
        // m/2m < 1 dimension can be missed: the completion always succeeds.
        let threshold = (1.0 / (2.0 * m as f64)).sqrt();
        for j in 0..m {
            if basis.len() == m {
                break;
            }
            let mut e = vec![ZERO; m];
            e[j] = ONE;
            orthogonalize(&mut e, &basis);
            orthogonalize(&mut e, &basis);
            let norm = vec_norm(&e);
            if norm > threshold {
                e.iter_mut().for_each(|z| *z /= norm);
                basis.push(e);
            }
        }
        assert_eq!(basis.len(), m, "orthonormal completion lost a dimension");
        let mut u = ComplexMatrix::zeros(m, m);
        for (c, col) in basis.iter().enumerate() {
            for (r, &z) in col.iter().enumerate() {
                u[(r, c)] = z;
            }
        }
        UnitaryMatrix::new_unchecked(u)
    }
}

impl TryFrom<ComplexMatrix> for Isometry {
    type Error = Error;

    fn try_from(m: ComplexMatrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<Isometry> for ComplexMatrix {
    fn from(v: Isometry) -> Self {
        v.0
    }
}

impl From<UnitaryMatrix> for Isometry {
    fn from(u: UnitaryMatrix) -> Self {
        Isometry(u.0)
    }
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn orthogonalize(v: &mut [Complex64], basis: &[Vec<Complex64>]) {
    for b in basis {
        let proj: Complex64 = b.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
        for (z, x) in v.iter_mut().zip(b) {
            *z -= proj * x;
        }
    }
}

/// Orthonormalizes `n` Gaussian columns drawn column by column from `seed`.
/// Gram-Schmidt leaves `R` with a positive real diagonal, which is exactly the
/// phase correction that makes the resulting columns Haar distributed.
fn haar_columns(m: usize, n: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<Complex64> = (0..m)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            })
            .collect();
        let raw = vec_norm(&v);
        orthogonalize(&mut v, &cols);
        orthogonalize(&mut v, &cols);
        let norm = vec_norm(&v);
        // Probability-zero event; redraw instead of dividing by ~0.
        if norm <= 1e-8 * raw {
            continue;
        }
        v.iter_mut().for_each(|z| *z /= norm);
        cols.push(v);
    }
    let mut out = ComplexMatrix::zeros(m, n);
    for (c, col) in cols.iter().enumerate() {
        for (r, &z) in col.iter().enumerate() {
            out[(r, c)] = z;
        }
    }
    out
}

/// Haar-distributed unitary on `m` modes, deterministic per seed.
pub fn haar_random_unitary(m: usize, seed: u64) -> Result<UnitaryMatrix> {
    if m == 0 {
        return Err(Error::Dimension("mode count must be positive".into()));
    }
    Ok(UnitaryMatrix::new_unchecked(haar_columns(m, m, seed)))
}

/// First `n` columns of `haar_random_unitary(m, seed)`, computed without
/// materializing the remaining columns.
pub fn random_isometry(m: usize, n: usize, seed: u64) -> Result<Isometry> {
    if n == 0 || n > m {
        return Err(Error::Dimension(format!(
            "random isometry needs 1 <= n <= m, got m={m}, n={n}"
        )));
    }
    Ok(Isometry(haar_columns(m, n, seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_unitary() {
        let u = UnitaryMatrix::new(ComplexMatrix::identity(4)).unwrap();
        assert_eq!(u.modes(), 4);
    }

    #[test]
    fn rejects_non_unitary() {
        let mut m = ComplexMatrix::identity(3);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(matches!(UnitaryMatrix::new(m), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn rejects_non_finite() {
        let err = ComplexMatrix::from_vec(1, 2, vec![ONE, Complex64::new(f64::NAN, 0.0)]);
        assert_eq!(err, Err(Error::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn haar_single_mode_has_unit_modulus() {
        let u = haar_random_unitary(1, 17).unwrap();
        assert!((u.matrix()[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn haar_is_unitary_and_deterministic() {
        let a = haar_random_unitary(8, 0).unwrap();
        let b = haar_random_unitary(8, 0).unwrap();
        assert!(a.matrix().isometry_deviation() < 1e-12);
        assert_eq!(a, b);
        assert_ne!(a, haar_random_unitary(8, 1).unwrap());
    }

    #[test]
    fn isometry_is_prefix_of_unitary() {
        let u = haar_random_unitary(10, 5).unwrap();
        let v = random_isometry(10, 4, 5).unwrap();
        assert_eq!(v.matrix().rows(), 10);
        assert_eq!(v.matrix().cols(), 4);
        assert!(u.matrix().leading_columns(4).distance(v.matrix()) < 1e-15);
        assert!(v.matrix().isometry_deviation() < 1e-12);

        let full = random_isometry(4, 4, 3).unwrap();
        assert!(UnitaryMatrix::new(full.matrix().clone()).is_ok());

        let col = random_isometry(2, 1, 9).unwrap();
        assert!((col.matrix().frobenius_norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn isometry_rejects_too_many_columns() {
        assert!(matches!(random_isometry(3, 4, 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn haar_first_moment() {
        // E|U_00|^2 = 1/m; the variance of |U_00|^2 for m = 4 is
        // 1/(m(m+1)) - 1/m^2 = 1/80.
        let draws = 10_000;
        let mean = (0..draws)
            .map(|s| haar_random_unitary(4, s).unwrap().matrix()[(0, 0)].norm_sqr())
            .sum::<f64>()
            / draws as f64;
        let sigma = (1.0f64 / 80.0 / draws as f64).sqrt();
        assert!((mean - 0.25).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn completion_keeps_columns_and_embeds_identity() {
        let v = random_isometry(7, 3, 11).unwrap();
        let u = v.complete();
        assert!(u.matrix().isometry_deviation() < 1e-12);
        assert!(u.matrix().leading_columns(3).distance(v.matrix()) < 1e-15);

        let e = Isometry::embedding(5, 2).unwrap().complete();
        assert_eq!(e.matrix(), &ComplexMatrix::identity(5));
    }

    #[test]
    fn json_round_trip_and_ragged_rejection() {
        let u = haar_random_unitary(3, 2).unwrap();
        let text = serde_json::to_string(u.matrix()).unwrap();
        let back: ComplexMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(&back, u.matrix());

        let ragged = r#"{"rows":2,"cols":2,"data":[[[1,0],[0,0]],[[0,0]]]}"#;
        let err = serde_json::from_str::<ComplexMatrix>(ragged).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }

    #[test]
    fn rank_of_structured_matrices() {
        assert_eq!(ComplexMatrix::identity(4).rank(1e-9), 4);
        let mut m = ComplexMatrix::zeros(3, 3);
        m[(0, 0)] = ONE;
        m[(1, 0)] = ONE;
        assert_eq!(m.rank(1e-9), 1);
        assert_eq!(ComplexMatrix::zeros(2, 2).rank(1e-9), 0);
    }
}
