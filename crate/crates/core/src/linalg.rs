//! Small dense linear algebra: a column-major matrix and a one-sided
//! (Hestenes) Jacobi SVD.

use serde::Serialize;

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n_rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.n_rows + i] = v;
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    fn two_columns_mut(&mut self, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
        debug_assert!(p < q);
        let n = self.n_rows;
        let (left, right) = self.data.split_at_mut(q * n);
        (&mut left[p * n..(p + 1) * n], &mut right[..n])
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Convergence controls for [`jacobi_svd`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobiParams {
    /// A column pair is rotated while `|a_p . a_q| > tol * |a_p| |a_q|`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for JacobiParams {
    fn default() -> Self {
        Self {
            tol: 1e-15,
            max_sweeps: 80,
        }
    }
}

/// Thin SVD `A = U diag(sigma) V^T` with singular values nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
    pub sweeps: usize,
    pub converged: bool,
}

impl Svd {
    /// `max |A - U diag(sigma) V^T|`.
    pub fn reconstruction_error(&self, a: &DenseMatrix) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..a.n_rows() {
            for j in 0..a.n_cols() {
                let mut s = 0.0;
                for k in 0..self.sigma.len() {
                    s += self.u.get(i, k) * self.sigma[k] * self.v.get(j, k);
                }
                worst = worst.max((a.get(i, j) - s).abs());
            }
        }
        worst
    }
}

/// One-sided Jacobi SVD. Orthogonalizes the columns of `a` by plane
/// rotations accumulated into `V`; column norms become the singular values.
///
/// Sequential and deterministic. Columns with zero norm get a zero `U`
/// column.
pub fn jacobi_svd(a: &DenseMatrix, params: JacobiParams) -> Svd {
    let m = a.n_cols();
    let mut work = a.clone();
    let mut v = DenseMatrix::identity(m);
    let mut sweeps = 0;
    let mut converged = m < 2;
    // Columns already at rounding-noise size are treated as zero.
    let frob2: f64 = a.data.iter().map(|x| x * x).sum();
    let floor = (64.0 * f64::EPSILON).powi(2) * frob2;
    while !converged && sweeps < params.max_sweeps {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let (cp, cq) = work.two_columns_mut(p, q);
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for (x, y) in cp.iter().zip(cq.iter()) {
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0
                    || alpha <= floor
                    || beta <= floor
                    || gamma.abs() <= params.tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(cp, cq, c, s);
                let (vp, vq) = v.two_columns_mut(p, q);
                rotate(vp, vq, c, s);
            }
        }
        converged = !rotated;
    }

    let norms: Vec<f64> = (0..m)
        .map(|j| work.column(j).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));

    let n = a.n_rows();
    let mut u = DenseMatrix::zeros(n, m);
    let mut v_sorted = DenseMatrix::zeros(m, m);
    let mut sigma = Vec::with_capacity(m);
    for (k, &j) in order.iter().enumerate() {
        let norm = norms[j];
        sigma.push(norm);
        if norm > 0.0 {
            for (dst, src) in u.column_mut(k).iter_mut().zip(work.column(j)) {
                *dst = src / norm;
            }
        }
        v_sorted.column_mut(k).copy_from_slice(v.column(j));
    }
    Svd {
        u,
        sigma,
        v: v_sorted,
        sweeps,
        converged,
    }
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_rows(rows: &[&[f64]]) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(rows.len(), rows[0].len());
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    #[test]
    fn diagonal_matrix() {
        let a = from_rows(&[&[1.0, 0.0], &[0.0, 3.0]]);
        let svd = jacobi_svd(&a, JacobiParams::default());
        assert_eq!(svd.sigma, vec![3.0, 1.0]);
        assert!(svd.reconstruction_error(&a) < 1e-15);
    }

    #[test]
    fn rank_one() {
        let a = from_rows(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0]]);
        let svd = jacobi_svd(&a, JacobiParams::default());
        assert!((svd.sigma[0] - 70f64.sqrt()).abs() < 1e-12);
        assert!(svd.sigma[1] < 1e-12);
        assert!(svd.reconstruction_error(&a) < 1e-12);
    }

    #[test]
    fn wide_matrix_orthogonal_v() {
        let a = from_rows(&[&[1.0, -2.0, 0.5, 3.0], &[0.0, 1.0, 4.0, -1.0]]);
        let svd = jacobi_svd(&a, JacobiParams::default());
        assert!(svd.converged);
        assert!(svd.reconstruction_error(&a) < 1e-12);
        for p in 0..4 {
            for q in 0..4 {
                let d: f64 = svd.v.column(p).iter().zip(svd.v.column(q)).map(|(x, y)| x * y).sum();
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12);
            }
        }
        assert!(svd.sigma[2] < 1e-12 && svd.sigma[3] < 1e-12);
    }
}
