//! Dimension-generic linear algebra for small n.
//!
//! Points and vectors are plain `[f64]` slices; [`Mat`] is a dense row-major
//! square matrix. The generalized cross product of `n - 1` vectors in `R^n`
//! is computed from signed minor determinants, so that for every `u`
//! `u . cross(w_1, ..., w_{n-1}) = det([u; w_1; ...; w_{n-1}])`.

use std::fmt;

use thiserror::Error;

/// A point of `R^n`.
pub type Point = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("expected {expected} vectors of dimension {dim}, got {got}")]
    WrongCount {
        expected: usize,
        dim: usize,
        got: usize,
    },
    #[error("vector {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("cross product needs n >= 3, got n = {0}")]
    DimensionTooSmall(usize),
    #[error("non-finite entry in vector {0}")]
    NonFinite(usize),
    #[error("function undefined at p {sign} h*e_{coord}")]
    PerturbationOutside { coord: usize, sign: char },
}

/// Dense square matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Mat {
    n: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from its rows. Panics if the rows do not form a square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "Mat::from_rows: ragged or non-square input");
            data.extend_from_slice(r);
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn mul_mat(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        Mat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn det(&self) -> f64 {
        det(self)
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.n).map(|i| self.row(i)))
            .finish()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Determinant by LU factorization with partial pivoting. Singular input
/// yields exactly 0.
pub fn det(m: &Mat) -> f64 {
    let n = m.dim();
    match n {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => lu_det(n, m.data.clone()),
    }
}

fn lu_det(n: usize, mut a: Vec<f64>) -> f64 {
    let mut det = 1.0;
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].abs();
        for i in k + 1..n {
            let v = a[i * n + k].abs();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            det = -det;
        }
        let d = a[k * n + k];
        det *= d;
        for i in k + 1..n {
            let f = a[i * n + k] / d;
            if f == 0.0 {
                continue;
            }
            for j in k + 1..n {
                a[i * n + j] -= f * a[k * n + j];
            }
        }
    }
    det
}

/// Generalized cross product of `n - 1` vectors in `R^n`, `n >= 3`.
///
/// Component `i` (zero-based) is `(-1)^i det(M_i)` where `M_i` drops column
/// `i` from the `(n-1) x n` matrix whose rows are the inputs.
pub fn cross<V: AsRef<[f64]>>(rows: &[V]) -> Result<Vec<f64>, GeoError> {
    let k = rows.len();
    let n = k + 1;
    if n < 3 {
        return Err(GeoError::DimensionTooSmall(n));
    }
    for (idx, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != n {
            return Err(GeoError::DimensionMismatch {
                index: idx,
                expected: n,
                got: r.len(),
            });
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(GeoError::NonFinite(idx));
        }
    }
    if n == 3 {
        let (a, b) = (rows[0].as_ref(), rows[1].as_ref());
        return Ok(vec![
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]);
    }
    let mut out = Vec::with_capacity(n);
    let mut minor = vec![0.0; k * k];
    for col in 0..n {
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            let mut c = 0;
            for (j, &v) in row.iter().enumerate() {
                if j != col {
                    minor[r * k + c] = v;
                    c += 1;
                }
            }
        }
        let d = if k == 2 {
            minor[0] * minor[3] - minor[1] * minor[2]
        } else {
            lu_det(k, minor.clone())
        };
        out.push(if col % 2 == 0 { d } else { -d });
    }
    Ok(out)
}

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Central-difference Jacobian. Column `j` is
/// `(f(p + h_j e_j) - f(p - h_j e_j)) / (2 h_j)` with `h_j = h max(1, |p_j|)`.
///
/// `f` returns `None` where it is undefined.
pub fn numeric_jacobian<F>(f: F, p: &[f64], h: f64) -> Result<Mat, GeoError>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = p.len();
    let mut jac = Mat::zeros(n);
    let mut q = p.to_vec();
    for j in 0..n {
        let hj = h * p[j].abs().max(1.0);
        q[j] = p[j] + hj;
        let fp = f(&q).ok_or(GeoError::PerturbationOutside {
            coord: j,
            sign: '+',
        })?;
        q[j] = p[j] - hj;
        let fm = f(&q).ok_or(GeoError::PerturbationOutside {
            coord: j,
            sign: '-',
        })?;
        q[j] = p[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * hj);
        }
    }
    Ok(jac)
}

/// Central-difference gradient of a scalar function.
pub fn numeric_gradient<F>(f: F, p: &[f64], h: f64) -> Result<Vec<f64>, GeoError>
where
    F: Fn(&[f64]) -> Option<f64>,
{
    let mut q = p.to_vec();
    let mut g = Vec::with_capacity(p.len());
    for j in 0..p.len() {
        let hj = h * p[j].abs().max(1.0);
        q[j] = p[j] + hj;
        let fp = f(&q).ok_or(GeoError::PerturbationOutside {
            coord: j,
            sign: '+',
        })?;
        q[j] = p[j] - hj;
        let fm = f(&q).ok_or(GeoError::PerturbationOutside {
            coord: j,
            sign: '-',
        })?;
        q[j] = p[j];
        g.push((fp - fm) / (2.0 * hj));
    }
    Ok(g)
}

/// Numerical rank of a set of row vectors by Gaussian elimination with a
/// relative pivot threshold.
pub fn rank(rows: &[Vec<f64>], rel_tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let ncol = rows[0].len();
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let scale = a.iter().map(|r| max_abs(r)).fold(0.0, f64::max).max(1e-300);
    let mut r = 0;
    for c in 0..ncol {
        if r == a.len() {
            break;
        }
        let (piv, best) = (r..a.len())
            .map(|i| (i, a[i][c].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= rel_tol * scale {
            continue;
        }
        a.swap(r, piv);
        for i in r + 1..a.len() {
            let f = a[i][c] / a[r][c];
            for j in c..ncol {
                a[i][j] -= f * a[r][j];
            }
        }
        r += 1;
    }
    r
}
