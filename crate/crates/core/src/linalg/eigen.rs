use super::Matrix;
use crate::error::{Error, Result};

/// Relative eigenvalue cutoff used when callers do not pick one.
pub const DEFAULT_PINV_TOL: f64 = 1e-10;

const MAX_ASYMMETRY: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix. Column `k` of `vectors`
/// belongs to `values[k]`. Values are in ascending order.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymmetricEigen {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.col(k)
    }
}

/// Cyclic Jacobi eigen-decomposition.
///
/// Only the symmetric part of `a` is meaningful; callers are expected to
/// check symmetry first.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::Dimension(format!("eigen of non-square {}x{} matrix", n, a.cols())));
    }
    let mut m = a.clone();
    let mut v = Matrix::identity(n);

    let frob_sq: f64 = m.as_slice().iter().map(|x| x * x).sum();
    let stop = (f64::EPSILON * f64::EPSILON) * frob_sq.max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                if t == 0.0 {
                    // |theta| overflowed: the entry is negligible next to the diagonal gap.
                    m.set(p, q, 0.0);
                    m.set(q, p, 0.0);
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
                m.set(p, p, app - t * apq);
                m.set(q, q, aqq + t * apq);
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m.get(x, x).total_cmp(&m.get(y, y)));
    let values = order.iter().map(|&k| m.get(k, k)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, dst, v.get(i, src));
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = m.rows();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = m.get(k, p);
        let akq = m.get(k, q);
        let new_p = c * akp - s * akq;
        let new_q = s * akp + c * akq;
        m.set(k, p, new_p);
        m.set(p, k, new_p);
        m.set(k, q, new_q);
        m.set(q, k, new_q);
    }
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

/// Moore-Penrose pseudo-inverse of a symmetric positive semidefinite
/// matrix. Eigenvalues below `tol * max|eigenvalue|` are treated as zero.
pub fn pseudo_inverse(g: &Matrix, tol: f64) -> Result<Matrix> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("pseudo-inverse tolerance must be > 0, got {tol}")));
    }
    if g.rows() != g.cols() {
        return Err(Error::Dimension(format!("pseudo-inverse of non-square {}x{}", g.rows(), g.cols())));
    }
    let asym = g.relative_asymmetry();
    if asym > MAX_ASYMMETRY {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = symmetric_eigen(g)?;
    let n = g.rows();
    let lmax = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = tol * lmax;
    let mut out = Matrix::zeros(n, n);
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam.abs() <= cutoff || lam == 0.0 {
            continue;
        }
        let vk = eig.vector(k);
        let inv = 1.0 / lam;
        for i in 0..n {
            let a = vk[i] * inv;
            if a == 0.0 {
                continue;
            }
            for j in i..n {
                out.set(i, j, out.get(i, j) + a * vk[j]);
            }
        }
    }
    out.symmetrize_upper();
    Ok(out)
}

/// Solves `a x = b` for symmetric positive definite `a` by Cholesky.
pub fn cholesky_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if n != a.cols() || b.len() != n {
        return Err(Error::Dimension(format!(
            "cholesky solve with {}x{} matrix and rhs of length {}",
            n,
            a.cols(),
            b.len()
        )));
    }
    let scale = a.diag().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = scale * 1e-13;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > floor) {
            return Err(Error::Singular(format!("non-positive pivot {d:.3e} at column {j}")));
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l.get(i, k) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l.get(k, i) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    Ok(y)
}
