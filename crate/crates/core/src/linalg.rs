//! Dense symmetric linear algebra: shifted Cholesky solves, symmetric
//! eigendecomposition and a Gauss-Jordan inverse used as a test oracle.
//!
//! Every factorization reports a nominal operation count so that cost
//! comparisons do not depend on the machine they run on.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Default cap on the order of matrices passed to [`eigh`].
pub const EIGH_CAP: usize = 5000;
/// Largest order accepted by [`brute_inverse`].
pub const BRUTE_INVERSE_CAP: usize = 200;

const EIGH_MAX_ITER: usize = 10_000;
const ROW_BLOCK: usize = 16;

/// Nominal Cholesky cost: `n^3 / 3`.
pub fn cholesky_flops(n: usize) -> u64 {
    let n = n as u64;
    n * n * n / 3
}

/// Nominal cost of one pair of triangular solves: `n^2`.
pub fn triangular_solve_flops(n: usize) -> u64 {
    let n = n as u64;
    n * n
}

/// Nominal symmetric eigensolver cost: `9 n^3`.
pub fn eigh_flops(n: usize) -> u64 {
    let n = n as u64;
    9 * n * n * n
}

/// The system `(shift * I + matrix) x = b` with a symmetric `matrix`.
#[derive(Clone, Debug)]
pub struct SpdSystem {
    matrix: Array2<f64>,
    shift: f64,
}

impl SpdSystem {
    pub fn new(matrix: Array2<f64>, shift: f64) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, found: c });
        }
        if !(shift.is_finite() && shift > 0.0) {
            return Err(Error::InvalidParameter(format!("shift must be positive, got {shift}")));
        }
        for i in 0..r {
            for j in 0..i {
                if matrix[[i, j]] != matrix[[j, i]] {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { matrix: matrix.as_standard_layout().into_owned(), shift })
    }

    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// Dense `shift * I + matrix`.
    pub fn shifted(&self) -> Array2<f64> {
        let mut a = self.matrix.clone();
        for i in 0..a.nrows() {
            a[[i, i]] += self.shift;
        }
        a
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Lower-triangular Cholesky factor of a shifted symmetric system.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    // row-major, only the lower triangle is meaningful
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors `shift * I + matrix`. No pivoting and no jitter: a
    /// non-positive pivot is reported with its index.
    pub fn factor(sys: &SpdSystem) -> Result<Self> {
        let n = sys.order();
        let a = sys.matrix.as_slice().expect("standard layout");
        let mut l = vec![0.0f64; n * n];
        let mut start = 0;
        while start < n {
            let end = (start + ROW_BLOCK).min(n);
            // contributions from rows finished in earlier blocks
            for j in 0..start {
                let (done, rest) = l.split_at_mut(start * n);
                let lj = &done[j * n..j * n + j];
                let ljj = done[j * n + j];
                for i in start..end {
                    let row = &mut rest[(i - start) * n..(i - start + 1) * n];
                    let s = a[i * n + j] - dot(&row[..j], lj);
                    row[j] = s / ljj;
                }
            }
            // triangle inside the block
            for i in start..end {
                for j in start..=i {
                    let (head, tail) = l.split_at_mut(i * n);
                    let li = &mut tail[..n];
                    let s = if j == i {
                        a[i * n + i] + sys.shift - dot(&li[..i], &li[..i])
                    } else {
                        a[i * n + j] - dot(&li[..j], &head[j * n..j * n + j])
                    };
                    if j == i {
                        if !(s > 0.0) || !s.is_finite() {
                            return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                        }
                        li[i] = s.sqrt();
                    } else {
                        li[j] = s / head[j * n + j];
                    }
                }
            }
            start = end;
        }
        Ok(Self { n, l })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn flops(&self) -> u64 {
        cholesky_flops(self.n)
    }

    /// Lower factor as a dense matrix.
    pub fn lower(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for j in 0..=i {
                m[[i, j]] = self.l[i * self.n + j];
            }
        }
        m
    }

    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b.len() });
        }
        let l = &self.l;
        let mut y = vec![0.0; n];
        for k in 0..n {
            let row = &l[k * n..k * n + k];
            y[k] = (b[k] - dot(row, &y[..k])) / l[k * n + k];
        }
        for j in (0..n).rev() {
            let xj = y[j] / l[j * n + j];
            y[j] = xj;
            let row = &l[j * n..j * n + j];
            for (yk, ljk) in y[..j].iter_mut().zip(row) {
                *yk -= ljk * xj;
            }
        }
        Ok(y)
    }

    /// Diagonal of `(L L^T)^{-1}`, i.e. squared column norms of `L^{-1}`.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let n = self.n;
        let l = &self.l;
        let mut out = vec![0.0; n];
        let mut start = 0;
        while start < n {
            let end = (start + ROW_BLOCK).min(n);
            let width = end - start;
            // y[c][k] holds column (start + c) of L^{-1}, entries k >= start + c
            let mut y = vec![0.0f64; width * n];
            for k in start..n {
                let lk = &l[k * n..k * n + k + 1];
                let lkk = lk[k];
                for c in 0..width {
                    let col = start + c;
                    if col > k {
                        break;
                    }
                    let yc = &mut y[c * n..(c + 1) * n];
                    yc[k] = if col == k {
                        1.0 / lkk
                    } else {
                        -dot(&lk[col..k], &yc[col..k]) / lkk
                    };
                }
            }
            for c in 0..width {
                let col = start + c;
                let yc = &y[c * n + col..(c + 1) * n];
                out[col] = dot(yc, yc);
            }
            start = end;
        }
        out
    }
}

/// Solution of a shifted SPD system together with its nominal cost.
#[derive(Clone, Debug)]
pub struct Solved<T> {
    pub x: T,
    pub flops: u64,
}

/// Solves `(shift * I + A) x = b`.
pub fn solve_spd(sys: &SpdSystem, b: &Array1<f64>) -> Result<Solved<Array1<f64>>> {
    let chol = Cholesky::factor(sys)?;
    let x = chol.solve(b.as_slice().expect("contiguous"))?;
    Ok(Solved { x: Array1::from(x), flops: chol.flops() + triangular_solve_flops(sys.order()) })
}

/// Solves `(shift * I + A) X = B` column by column with a single factorization.
pub fn solve_spd_many(sys: &SpdSystem, b: &Array2<f64>) -> Result<Solved<Array2<f64>>> {
    let n = sys.order();
    if b.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.nrows() });
    }
    let chol = Cholesky::factor(sys)?;
    let mut x = Array2::zeros(b.dim());
    for (j, col) in b.columns().into_iter().enumerate() {
        let sol = chol.solve(&col.to_vec())?;
        for (i, v) in sol.into_iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    let flops = chol.flops() + triangular_solve_flops(n) * b.ncols() as u64;
    Ok(Solved { x, flops })
}

/// Eigenvalues sorted descending with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
    pub flops: u64,
}

impl EigenDecomposition {
    /// `V diag(lambda) V^T`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
            col *= self.eigenvalues[j];
        }
        scaled.dot(&self.eigenvectors.t())
    }
}

pub fn eigh(a: &Array2<f64>) -> Result<EigenDecomposition> {
    eigh_with_cap(a, EIGH_CAP)
}

pub fn eigh_with_cap(a: &Array2<f64>, cap: usize) -> Result<EigenDecomposition> {
    let (n, c) = a.dim();
    if n != c {
        return Err(Error::DimensionMismatch { expected: n, found: c });
    }
    if n > cap {
        return Err(Error::TooLarge { n, cap });
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let std = a.as_standard_layout();
    let m = nalgebra::DMatrix::from_row_slice(n, n, std.as_slice().expect("standard layout"));
    let eig = m
        .try_symmetric_eigen(f64::EPSILON, EIGH_MAX_ITER)
        .ok_or(Error::EigenNoConvergence { iterations: EIGH_MAX_ITER })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            eigenvectors[[r, dst]] = eig.eigenvectors[(r, src)];
        }
    }
    Ok(EigenDecomposition { eigenvalues, eigenvectors, flops: eigh_flops(n) })
}

/// Gauss-Jordan inverse with partial pivoting. Test oracle only.
pub fn brute_inverse(a: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, c) = a.dim();
    if n != c {
        return Err(Error::DimensionMismatch { expected: n, found: c });
    }
    if n > BRUTE_INVERSE_CAP {
        return Err(Error::TooLarge { n, cap: BRUTE_INVERSE_CAP });
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-14 * scale;
    let mut w = a.to_owned();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, w[[r, col]].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax < tol {
            return Err(Error::Singular { pivot: col });
        }
        if piv != col {
            for k in 0..n {
                w.swap([piv, k], [col, k]);
                inv.swap([piv, k], [col, k]);
            }
        }
        let p = w[[col, col]];
        for k in 0..n {
            w[[col, k]] /= p;
            inv[[col, k]] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = w[[r, col]];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                w[[r, k]] -= f * w[[col, k]];
                inv[[r, k]] -= f * inv[[col, k]];
            }
        }
    }
    Ok(inv)
}
