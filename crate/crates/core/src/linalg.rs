//! Dense symmetric linear algebra: SPD factorization, solves, log-determinant
//! and a full symmetric eigensolver.
//!
//! Everything here is plain `f64` on row-major storage. Matrices are small
//! enough (N of a few hundred to a few thousand) that cache-friendly scalar
//! loops are adequate; the only BLAS-3 kernel, the Gram product `XXᵀ`, is
//! delegated to `matrixmultiply`.

use crate::error::{Error, Result};

/// Relative pivot tolerance of [`factorize_spd`], scaled by the largest
/// diagonal entry.
pub const PIVOT_TOL: f64 = 1e-12;

/// Implicit-shift sweeps allowed per unit of matrix order.
pub const SWEEPS_PER_ORDER: usize = 30;

/// A real symmetric matrix stored densely in row-major order.
///
/// Symmetry is exact: every constructor either checks it or mirrors one
/// triangle into the other.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn identity(order: usize) -> Self {
        Self::diagonal(&vec![1.0; order])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "matrix order must be at least 1");
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &v) in diag.iter().enumerate() {
            data[i * n + i] = v;
        }
        SymMatrix { order: n, data }
    }

    /// Builds the matrix from `f(i, j)` evaluated on the lower triangle `j <= i`.
    pub fn from_lower_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(order >= 1, "matrix order must be at least 1");
        let mut data = vec![0.0; order * order];
        for i in 0..order {
            for j in 0..=i {
                let v = f(i, j);
                data[i * order + j] = v;
                data[j * order + i] = v;
            }
        }
        SymMatrix { order, data }
    }

    /// Builds the matrix from explicit rows, rejecting anything that is not
    /// square and exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::domain("matrix order must be at least 1"));
        }
        for row in rows {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: row.len(),
                });
            }
        }
        for i in 0..n {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::domain(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        Ok(SymMatrix {
            order: n,
            data: rows.concat(),
        })
    }

    /// Wraps a full row-major buffer, mirroring the lower triangle upward.
    pub(crate) fn from_lower_buffer(order: usize, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), order * order);
        for i in 0..order {
            for j in 0..i {
                data[j * order + i] = data[i * order + j];
            }
        }
        SymMatrix { order, data }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.order..(i + 1) * self.order]
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.order);
        (0..self.order).map(|i| dot(self.row(i), v)).collect()
    }

    /// The quadratic form `vᵀ M v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        dot(&self.mul_vec(v), v)
    }
}

/// Lower-triangular Cholesky factor `L` with `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct SpdFactorization {
    order: usize,
    lower: Vec<f64>,
    logdet: f64,
}

impl SpdFactorization {
    pub fn order(&self) -> usize {
        self.order
    }

    /// `log det M`, the sum of `2 log L_ii`.
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// Entry `(i, j)` of the factor; zero above the diagonal.
    pub fn factor(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.lower[i * self.order + j]
        }
    }

    fn lrow(&self, i: usize) -> &[f64] {
        &self.lower[i * self.order..i * self.order + i + 1]
    }

    /// Solves `M y = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.order;
        if b.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: b.len(),
            });
        }
        // L z = b
        let mut y = b.to_vec();
        for i in 0..n {
            let row = self.lrow(i);
            let s = y[i] - dot(&row[..i], &y[..i]);
            y[i] = s / row[i];
        }
        // Lᵀ y = z, column sweep so that rows of L are read contiguously
        for i in (0..n).rev() {
            let row = self.lrow(i);
            y[i] /= row[i];
            let yi = y[i];
            for (yk, &l) in y[..i].iter_mut().zip(&row[..i]) {
                *yk -= l * yi;
            }
        }
        Ok(y)
    }
}

/// Cholesky factorization of a symmetric positive definite matrix.
///
/// Fails with [`Error::Singular`] at the first pivot that drops below
/// `PIVOT_TOL` times the largest diagonal entry.
pub fn factorize_spd(m: &SymMatrix) -> Result<SpdFactorization> {
    let n = m.order;
    let max_diag = (0..n).map(|i| m.get(i, i)).fold(0.0_f64, f64::max);
    let tol = PIVOT_TOL * max_diag;
    let mut lower = vec![0.0; n * n];
    let mut logdet = 0.0;
    for i in 0..n {
        let (done, rest) = lower.split_at_mut(i * n);
        let row_i = &mut rest[..n];
        for j in 0..i {
            let row_j = &done[j * n..j * n + j + 1];
            let s = m.get(i, j) - dot(&row_i[..j], &row_j[..j]);
            row_i[j] = s / row_j[j];
        }
        let s = m.get(i, i) - dot(&row_i[..i], &row_i[..i]);
        if !(s > tol) {
            return Err(Error::Singular { pivot: i, value: s });
        }
        let d = s.sqrt();
        row_i[i] = d;
        logdet += 2.0 * d.ln();
    }
    Ok(SpdFactorization {
        order: n,
        lower,
        logdet,
    })
}

/// Free-function form of [`SpdFactorization::solve`].
pub fn solve(f: &SpdFactorization, b: &[f64]) -> Result<Vec<f64>> {
    f.solve(b)
}

/// All eigenvalues of a symmetric matrix, ascending.
///
/// Householder reduction to tridiagonal form followed by implicit QL
/// iteration with Wilkinson-type shifts. The total number of shift sweeps is
/// capped at `SWEEPS_PER_ORDER * N`.
pub fn eigenvalues_sym(m: &SymMatrix) -> Result<Vec<f64>> {
    let n = m.order;
    let mut a = m.data.clone();
    let (mut d, mut e) = tridiagonalize(&mut a, n);
    tridiagonal_ql(&mut d, &mut e, SWEEPS_PER_ORDER * n)?;
    d.sort_by(|x, y| x.total_cmp(y));
    Ok(d)
}

/// Reduces `a` (row-major, order n) to tridiagonal form in place.
/// Returns the diagonal and the subdiagonal (`e[i]` couples `i-1` and `i`).
fn tridiagonalize(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        if l == 0 {
            e[i] = a[i * n + l];
            continue;
        }
        let scale: f64 = a[i * n..i * n + l + 1].iter().map(|v| v.abs()).sum();
        if scale == 0.0 {
            e[i] = a[i * n + l];
            continue;
        }
        let mut h = 0.0;
        for k in 0..=l {
            a[i * n + k] /= scale;
            h += a[i * n + k] * a[i * n + k];
        }
        let f = a[i * n + l];
        let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
        e[i] = scale * g;
        h -= f * g;
        a[i * n + l] = f - g;
        // p = A u / h, stored in e[0..=l]
        let mut f = 0.0;
        for j in 0..=l {
            let mut g = 0.0;
            for k in 0..=j {
                g += a[j * n + k] * a[i * n + k];
            }
            for k in j + 1..=l {
                g += a[k * n + j] * a[i * n + k];
            }
            e[j] = g / h;
            f += e[j] * a[i * n + j];
        }
        let hh = f / (h + h);
        for j in 0..=l {
            let f = a[i * n + j];
            let g = e[j] - hh * f;
            e[j] = g;
            for k in 0..=j {
                a[j * n + k] -= f * e[k] + g * a[i * n + k];
            }
        }
    }
    for (i, di) in d.iter_mut().enumerate() {
        *di = a[i * n + i];
    }
    e[0] = 0.0;
    (d, e)
}

/// Implicit QL on a symmetric tridiagonal matrix; eigenvalues land in `d`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], max_sweeps: usize) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut sweeps = 0usize;
    for l in 0..n {
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > max_sweeps {
                return Err(Error::Convergence { sweeps: max_sweeps });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators let the compiler vectorize without reassociating
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}
