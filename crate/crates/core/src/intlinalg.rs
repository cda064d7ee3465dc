//! Exact integer linear algebra.
//!
//! Everything here works on arbitrary-precision integers. The Smith normal
//! form routine tracks both unimodular cofactors (and the inverse of the
//! column cofactor) so that lattice points can be moved between ambient and
//! reduced coordinates without ever leaving the integers.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Dense integer matrix stored in row-major order.
#[derive(Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<BigInt>) -> Self {
        assert_eq!(data.len(), rows * cols, "entries must equal rows * cols");
        Self { rows, cols, data }
    }

    /// Builds a matrix from machine-integer rows. Rows must be equally long.
    pub fn from_rows<T: Into<BigInt> + Copy>(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row.iter().map(|&x| x.into()));
        }
        Self { rows: r, cols: c, data }
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

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: BigInt) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j).clone();
            }
        }
        t
    }

    /// Exact matrix product. Panics on incompatible shapes.
    pub fn mul(&self, rhs: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, rhs.rows, "incompatible shapes for product");
        let mut out = IntMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.get(l, j);
                    if !b.is_zero() {
                        out.data[i * rhs.cols + j] += a * b;
                    }
                }
            }
        }
        out
    }

    /// Product with an integer vector.
    pub fn mul_vec(&self, x: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Product with a machine-integer vector, accumulated exactly.
    pub fn mul_vec_i64(&self, x: &[i64]) -> Vec<BigInt> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, &b)| a * BigInt::from(b)).sum())
            .collect()
    }

    /// Submatrix formed by the columns in `range`.
    pub fn columns(&self, range: std::ops::Range<usize>) -> IntMatrix {
        assert!(range.end <= self.cols);
        let mut out = IntMatrix::zeros(self.rows, range.len());
        for i in 0..self.rows {
            for (jj, j) in range.clone().enumerate() {
                out.data[i * out.cols + jj] = self.get(i, j).clone();
            }
        }
        out
    }

    /// Submatrix formed by the listed rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> IntMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        IntMatrix::from_vec(idx.len(), self.cols, data)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn is_identity(&self) -> bool {
        self.is_square() && *self == IntMatrix::identity(self.rows)
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self.get(i, j).is_zero()))
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> BigInt {
        assert!(self.is_square(), "determinant of a non-square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a: Vec<Vec<BigInt>> = (0..n).map(|i| self.row(i).to_vec()).collect();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[k][k].is_zero() {
                match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                    Some(i) => {
                        a.swap(i, k);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                    // Sylvester's identity guarantees exact division.
                    a[i][j] = v / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        sign * &a[n - 1][n - 1]
    }

    /// Rank by fraction-free elimination.
    pub fn rank(&self) -> usize {
        let mut a: Vec<Vec<BigInt>> = (0..self.rows).map(|i| self.row(i).to_vec()).collect();
        let mut rank = 0;
        let mut prev = BigInt::one();
        for col in 0..self.cols {
            if rank == self.rows {
                break;
            }
            let Some(p) = (rank..self.rows).find(|&i| !a[i][col].is_zero()) else {
                continue;
            };
            a.swap(rank, p);
            for i in rank + 1..self.rows {
                for j in col + 1..self.cols {
                    let v = &a[i][j] * &a[rank][col] - &a[i][col] * &a[rank][j];
                    a[i][j] = v / &prev;
                }
                a[i][col] = BigInt::zero();
            }
            prev = a[rank][col].clone();
            rank += 1;
        }
        rank
    }

    /// Copies the matrix into machine integers, failing on overflow.
    pub fn to_i64_rows(&self) -> Result<Vec<Vec<i64>>> {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .map(|x| x.to_i64().ok_or(Error::EntryOverflow))
                    .collect()
            })
            .collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[dst] += q * row[src]
    fn add_row_multiple(&mut self, dst: usize, src: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let v = &self.data[src * self.cols + j] * q;
            self.data[dst * self.cols + j] += v;
        }
    }

    /// col[dst] += q * col[src]
    fn add_col_multiple(&mut self, dst: usize, src: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for i in 0..self.rows {
            let v = &self.data[i * self.cols + src] * q;
            self.data[i * self.cols + dst] += v;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let v = -std::mem::take(&mut self.data[i * self.cols + j]);
            self.data[i * self.cols + j] = v;
        }
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "IntMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(ToString::to_string).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Smith normal form `u * a * v = d_mat` with unimodular `u`, `v`.
#[derive(Clone, Debug)]
pub struct SmithDecomposition {
    pub input: IntMatrix,
    pub u: IntMatrix,
    pub d_mat: IntMatrix,
    pub v: IntMatrix,
    pub v_inv: IntMatrix,
    pub rank: usize,
}

impl SmithDecomposition {
    /// Invariant factors `d_mat[l][l]` for `l < rank`.
    pub fn invariant_factors(&self) -> Vec<BigInt> {
        (0..self.rank).map(|l| self.d_mat.get(l, l).clone()).collect()
    }
}

/// Basis of the integer null space of a constraint matrix.
#[derive(Clone, Debug)]
pub struct LatticeBasis {
    pub basis: IntMatrix,
    pub ambient_dim: usize,
    pub lattice_dim: usize,
    pub gram_det: BigInt,
}

struct SmithWork {
    m: IntMatrix,
    u: IntMatrix,
    v: IntMatrix,
    v_inv: IntMatrix,
}

impl SmithWork {
    fn row_add(&mut self, dst: usize, src: usize, q: &BigInt) {
        self.m.add_row_multiple(dst, src, q);
        self.u.add_row_multiple(dst, src, q);
    }

    fn col_add(&mut self, dst: usize, src: usize, q: &BigInt) {
        self.m.add_col_multiple(dst, src, q);
        self.v.add_col_multiple(dst, src, q);
        // V^{-1} picks up the inverse elementary operation from the left.
        self.v_inv.add_row_multiple(src, dst, &-q);
    }

    fn row_swap(&mut self, a: usize, b: usize) {
        self.m.swap_rows(a, b);
        self.u.swap_rows(a, b);
    }

    fn col_swap(&mut self, a: usize, b: usize) {
        self.m.swap_cols(a, b);
        self.v.swap_cols(a, b);
        self.v_inv.swap_rows(a, b);
    }

    fn row_negate(&mut self, i: usize) {
        self.m.negate_row(i);
        self.u.negate_row(i);
    }

    /// Position of the smallest non-zero magnitude in the trailing block.
    fn min_pivot(&self, t: usize) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        for i in t..self.m.rows {
            for j in t..self.m.cols {
                let x = self.m.get(i, j);
                if x.is_zero() {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bi, bj)) => x.abs() < self.m.get(bi, bj).abs(),
                };
                if better {
                    best = Some((i, j));
                    if x.abs().is_one() {
                        return best;
                    }
                }
            }
        }
        best
    }

    fn non_divisible(&self, t: usize) -> Option<usize> {
        let p = self.m.get(t, t);
        for i in t + 1..self.m.rows {
            for j in t + 1..self.m.cols {
                if !self.m.get(i, j).is_multiple_of(p) {
                    return Some(i);
                }
            }
        }
        None
    }
}

/// Smith normal form of a full-row-rank integer matrix.
///
/// Pivots are chosen as the smallest non-zero magnitude in the remaining
/// block, so each pass strictly decreases the pivot until it divides its
/// row, its column and the rest of the block. The result satisfies
/// `u * a * v = d_mat` with `d_mat[0][0] | d_mat[1][1] | ...`.
pub fn smith_normal_form(a: &IntMatrix) -> Result<SmithDecomposition> {
    let (k, d) = (a.rows(), a.cols());
    let mut w = SmithWork {
        m: a.clone(),
        u: IntMatrix::identity(k),
        v: IntMatrix::identity(d),
        v_inv: IntMatrix::identity(d),
    };

    for t in 0..k {
        loop {
            let Some((pi, pj)) = w.min_pivot(t) else {
                return Err(Error::RankDeficient { expected: k, found: t });
            };
            w.row_swap(t, pi);
            w.col_swap(t, pj);

            let pivot = w.m.get(t, t).clone();
            let mut clean = true;
            for i in t + 1..k {
                let q = w.m.get(i, t) / &pivot;
                w.row_add(i, t, &-q);
                clean &= w.m.get(i, t).is_zero();
            }
            for j in t + 1..d {
                let q = w.m.get(t, j) / &pivot;
                w.col_add(j, t, &-q);
                clean &= w.m.get(t, j).is_zero();
            }
            if !clean {
                continue;
            }
            // Row and column t are clear. Enforce the divisibility chain by
            // folding an offending row into row t and reducing again.
            match w.non_divisible(t) {
                Some(i) => w.row_add(t, i, &BigInt::one()),
                None => break,
            }
        }
        if w.m.get(t, t).is_negative() {
            w.row_negate(t);
        }
    }

    Ok(SmithDecomposition {
        input: a.clone(),
        u: w.u,
        d_mat: w.m,
        v: w.v,
        v_inv: w.v_inv,
        rank: k,
    })
}

/// Columns of `v` past the rank, which span `{ y : a * y = 0 }` over the integers.
pub fn lattice_basis(snf: &SmithDecomposition) -> Result<LatticeBasis> {
    let d = snf.v.cols();
    let k = snf.rank;
    if k >= d {
        return Err(Error::EmptyLattice);
    }
    let basis = snf.v.columns(k..d);
    if !snf.input.mul(&basis).is_zero() {
        // Unreachable for a decomposition produced by smith_normal_form.
        return Err(Error::RankDeficient {
            expected: k,
            found: snf.input.rank(),
        });
    }
    let gram_det = gram_determinant(&basis);
    if gram_det.is_zero() {
        return Err(Error::RankDeficient {
            expected: d - k,
            found: basis.rank(),
        });
    }
    Ok(LatticeBasis {
        basis,
        ambient_dim: d,
        lattice_dim: d - k,
        gram_det,
    })
}

/// Exact inverse of a unimodular matrix.
pub fn unimodular_inverse(v: &IntMatrix) -> Result<IntMatrix> {
    if !v.is_square() {
        return Err(Error::DimensionMismatch {
            expected: v.rows(),
            found: v.cols(),
        });
    }
    let det = v.determinant();
    if !det.abs().is_one() {
        return Err(Error::NotUnimodular {
            det: det.abs().to_string(),
        });
    }
    let n = v.rows();
    let mut m = v.clone();
    let mut inv = IntMatrix::identity(n);
    for c in 0..n {
        // Euclid on column c below the diagonal until a single non-zero remains.
        loop {
            let mut best: Option<usize> = None;
            for i in c..n {
                if m.get(i, c).is_zero() {
                    continue;
                }
                if best.is_none_or(|b| m.get(i, c).abs() < m.get(b, c).abs()) {
                    best = Some(i);
                }
            }
            let p = best.expect("unimodular matrix has a pivot in every column");
            m.swap_rows(c, p);
            inv.swap_rows(c, p);
            let pivot = m.get(c, c).clone();
            let mut done = true;
            for i in c + 1..n {
                let q = -(m.get(i, c) / &pivot);
                m.add_row_multiple(i, c, &q);
                inv.add_row_multiple(i, c, &q);
                done &= m.get(i, c).is_zero();
            }
            if done {
                break;
            }
        }
        if m.get(c, c).is_negative() {
            m.negate_row(c);
            inv.negate_row(c);
        }
        debug_assert!(m.get(c, c).is_one());
    }
    // Back substitution; the diagonal is all ones.
    for c in (0..n).rev() {
        for i in 0..c {
            let q = -m.get(i, c).clone();
            m.add_row_multiple(i, c, &q);
            inv.add_row_multiple(i, c, &q);
        }
    }
    Ok(inv)
}

/// `det(basis^T * basis)`, exact.
pub fn gram_determinant(basis: &IntMatrix) -> BigInt {
    basis.transpose().mul(basis).determinant()
}
