//! Small dense matrices (n ≤ 3), a CSR matrix with a fixed pattern, and a
//! Jacobi-preconditioned conjugate gradient solver.
//!
//! Small matrices are stored as `[f64; 9]` in row-major order with a fixed
//! row stride of 3; only the leading `n × n` block is meaningful.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub type Mat3 = [f64; 9];

#[inline]
pub fn at(m: &Mat3, i: usize, j: usize) -> f64 {
    m[i * 3 + j]
}

pub fn identity(n: usize) -> Mat3 {
    let mut m = [0.0; 9];
    for i in 0..n {
        m[i * 3 + i] = 1.0;
    }
    m
}

pub fn scale(m: &Mat3, t: f64) -> Mat3 {
    let mut r = *m;
    r.iter_mut().for_each(|x| *x *= t);
    r
}

pub fn transpose(m: &Mat3, n: usize) -> Mat3 {
    let mut r = [0.0; 9];
    for i in 0..n {
        for j in 0..n {
            r[j * 3 + i] = m[i * 3 + j];
        }
    }
    r
}

pub fn matmul(a: &Mat3, b: &Mat3, n: usize) -> Mat3 {
    let mut r = [0.0; 9];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[i * 3 + k] * b[k * 3 + j];
            }
            r[i * 3 + j] = s;
        }
    }
    r
}

pub fn matvec(a: &Mat3, x: &[f64], n: usize) -> [f64; 3] {
    let mut r = [0.0; 3];
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            s += a[i * 3 + j] * x[j];
        }
        r[i] = s;
    }
    r
}

/// `(a x, y)` for the leading `n × n` block.
pub fn bilinear(a: &Mat3, x: &[f64], y: &[f64], n: usize) -> f64 {
    let ax = matvec(a, x, n);
    (0..n).map(|i| ax[i] * y[i]).sum()
}

pub fn det(m: &Mat3, n: usize) -> f64 {
    match n {
        1 => m[0],
        2 => m[0] * m[4] - m[1] * m[3],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => unreachable!("dimension must be 1, 2 or 3"),
    }
}

/// Inverse by cofactors; `None` when the determinant vanishes.
pub fn inverse(m: &Mat3, n: usize) -> Option<Mat3> {
    let d = det(m, n);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut r = [0.0; 9];
    match n {
        1 => r[0] = 1.0 / m[0],
        2 => {
            r[0] = m[4] / d;
            r[1] = -m[1] / d;
            r[3] = -m[3] / d;
            r[4] = m[0] / d;
        }
        3 => {
            r[0] = (m[4] * m[8] - m[5] * m[7]) / d;
            r[1] = (m[2] * m[7] - m[1] * m[8]) / d;
            r[2] = (m[1] * m[5] - m[2] * m[4]) / d;
            r[3] = (m[5] * m[6] - m[3] * m[8]) / d;
            r[4] = (m[0] * m[8] - m[2] * m[6]) / d;
            r[5] = (m[2] * m[3] - m[0] * m[5]) / d;
            r[6] = (m[3] * m[7] - m[4] * m[6]) / d;
            r[7] = (m[1] * m[6] - m[0] * m[7]) / d;
            r[8] = (m[0] * m[4] - m[1] * m[3]) / d;
        }
        _ => unreachable!("dimension must be 1, 2 or 3"),
    }
    Some(r)
}

/// Largest absolute asymmetry `|m_ij − m_ji|`.
pub fn asymmetry(m: &Mat3, n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[i * 3 + j] - m[j * 3 + i]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &Mat3, n: usize) -> Mat3 {
    let mut r = *m;
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (m[i * 3 + j] + m[j * 3 + i]);
            r[i * 3 + j] = s;
            r[j * 3 + i] = s;
        }
    }
    r
}

/// Eigenvalues of a symmetric matrix in ascending order, closed form.
///
/// The 3 × 3 case uses the trigonometric solution of the characteristic
/// cubic. Entries beyond `n` are zero.
pub fn sym_eigenvalues(m: &Mat3, n: usize) -> [f64; 3] {
    match n {
        1 => [m[0], 0.0, 0.0],
        2 => {
            let (a, b, d) = (m[0], 0.5 * (m[1] + m[3]), m[4]);
            let mean = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            [mean - rad, mean + rad, 0.0]
        }
        3 => {
            let s = symmetrize(m, 3);
            let p1 = s[1] * s[1] + s[2] * s[2] + s[5] * s[5];
            let q = (s[0] + s[4] + s[8]) / 3.0;
            if p1 == 0.0 {
                let mut e = [s[0], s[4], s[8]];
                e.sort_by(|x, y| x.total_cmp(y));
                return e;
            }
            let p2 = (s[0] - q).powi(2) + (s[4] - q).powi(2) + (s[8] - q).powi(2) + 2.0 * p1;
            let p = (p2 / 6.0).sqrt();
            let mut bm = s;
            for i in 0..3 {
                bm[i * 3 + i] -= q;
            }
            let bm = scale(&bm, 1.0 / p);
            let r = (det(&bm, 3) / 2.0).clamp(-1.0, 1.0);
            let phi = r.acos() / 3.0;
            let e_max = q + 2.0 * p * phi.cos();
            let e_min = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
            let e_mid = 3.0 * q - e_max - e_min;
            [e_min, e_mid, e_max]
        }
        _ => unreachable!("dimension must be 1, 2 or 3"),
    }
}

/// Singular values of an `n × n` matrix in descending order.
pub fn singular_values(m: &Mat3, n: usize) -> [f64; 3] {
    let mtm = matmul(&transpose(m, n), m, n);
    let ev = sym_eigenvalues(&mtm, n);
    let mut s = [0.0; 3];
    for i in 0..n {
        s[i] = ev[n - 1 - i].max(0.0).sqrt();
    }
    s
}

/// Compensated (Neumaier) summation in input order.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    neumaier_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Square sparse matrix in compressed-row form.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn with_pattern(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Self {
        let nnz = col_idx.len();
        Self {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    /// Position of `(row, col)` in `values`, if stored.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[row], self.row_ptr[row + 1]);
        self.col_idx[lo..hi]
            .binary_search(&col)
            .ok()
            .map(|k| lo + k)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.position(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let mut s = 0.0;
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    s += self.values[k] * x[self.col_idx[k]];
                }
                s
            })
            .collect()
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `(A + shift·I) x = b` restricted to the `free` unknowns.
///
/// Entries of `b` and of the result outside `free` are treated as zero.
/// `A` must be symmetric positive semidefinite on the free block and the
/// shifted block positive definite.
pub fn pcg(
    a: &CsrMatrix,
    shift: f64,
    b: &[f64],
    free: &[bool],
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = a.n;
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut y = a.mul_vec(x);
        for i in 0..n {
            y[i] = if free[i] { y[i] + shift * x[i] } else { 0.0 };
        }
        y
    };
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let d = d + shift;
            if free[i] && d > 0.0 {
                1.0 / d
            } else {
                0.0
            }
        })
        .collect();

    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = (0..n).map(|i| if free[i] { b[i] } else { 0.0 }).collect();
    let b_norm = dot(&r, &r).sqrt();
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            solution: x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::LinearSolve(format!(
                "operator not positive definite (pᵀAp = {pap:e}) at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = dot(&r, &r).sqrt() / b_norm;
        if res <= rel_tol {
            return Ok(CgOutcome {
                solution: x,
                iterations: it,
                relative_residual: res,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = dot(&r, &r).sqrt() / b_norm;
    Err(Error::LinearSolve(format!(
        "conjugate gradient stalled at relative residual {res:.3e} after {max_iter} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_times_matrix_is_identity() {
        let m: Mat3 = [2.0, 1.0, 0.5, 0.3, 3.0, 0.1, -0.2, 0.4, 1.5];
        for n in 1..=3 {
            let inv = inverse(&m, n).unwrap();
            let prod = matmul(&m, &inv, n);
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((at(&prod, i, j) - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn closed_form_eigenvalues_match_trace_and_determinant() {
        let m: Mat3 = [4.0, 1.0, 0.5, 1.0, 3.0, -0.7, 0.5, -0.7, 2.0];
        let e = sym_eigenvalues(&m, 3);
        assert!(e[0] <= e[1] && e[1] <= e[2]);
        assert!((e.iter().sum::<f64>() - 9.0).abs() < 1e-12);
        assert!((e[0] * e[1] * e[2] - det(&m, 3)).abs() < 1e-11);
    }

    #[test]
    fn diagonal_three_by_three_is_sorted() {
        let m: Mat3 = [3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        assert_eq!(sym_eigenvalues(&m, 3), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn singular_values_of_diagonal() {
        let m: Mat3 = [-2.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0];
        let s = singular_values(&m, 2);
        assert!((s[0] - 2.0).abs() < 1e-15 && (s[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let s = neumaier_sum([1e16, 1.0, -1e16]);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn pcg_solves_tridiagonal_system() {
        // 1-D Laplacian with both ends pinned.
        let n: usize = 6;
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(1)..(i + 2).min(n) {
                cols.push(j);
            }
            row_ptr.push(cols.len());
        }
        let mut a = CsrMatrix::with_pattern(n, row_ptr, cols);
        for i in 0..n {
            for j in i.saturating_sub(1)..(i + 2).min(n) {
                let k = a.position(i, j).unwrap();
                a.values[k] = if i == j { 2.0 } else { -1.0 };
            }
        }
        let free: Vec<bool> = (0..n).map(|i| i != 0 && i != n - 1).collect();
        let b = vec![0.0, 1.0, 1.0, 1.0, 1.0, 0.0];
        let out = pcg(&a, 0.0, &b, &free, 1e-14, 100).unwrap();
        let ax = a.mul_vec(&out.solution);
        for i in 1..n - 1 {
            assert!((ax[i] - 1.0).abs() < 1e-12);
        }
        assert_eq!(out.solution[0], 0.0);
    }
}
