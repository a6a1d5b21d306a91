//! Dense correspondence-analysis reference built directly on nalgebra.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Reference {
    pub s: DMatrix<f64>,
    pub r: Vec<f64>,
    #[allow(dead_code)]
    pub c: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Left singular vector of the largest singular value.
    pub u1: Vec<f64>,
}

pub fn reference(counts: &[Vec<u64>]) -> Reference {
    let (n, m) = (counts.len(), counts[0].len());
    let a = DMatrix::from_fn(n, m, |i, j| counts[i][j] as f64);
    let p = &a / a.sum();
    let r: Vec<f64> = (0..n).map(|i| p.row(i).sum()).collect();
    let c: Vec<f64> = (0..m).map(|j| p.column(j).sum()).collect();
    let s = DMatrix::from_fn(n, m, |i, j| (p[(i, j)] - r[i] * c[j]) / (r[i] * c[j]).sqrt());
    // Eigen-decompositions of the Gram matrices; nalgebra's bidiagonal SVD
    // can return inaccurate factors on these exactly rank-deficient inputs.
    let left = nalgebra::SymmetricEigen::new(&s * s.transpose());
    let right = nalgebra::SymmetricEigen::new(s.transpose() * &s);
    let top = left.eigenvalues.imax();
    let u1: Vec<f64> = left.eigenvectors.column(top).iter().copied().collect();
    let mut sigma: Vec<f64> = right.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    sigma.sort_by(|x, y| y.total_cmp(x));
    let gram = &s * s.transpose();
    let uv = DMatrix::from_column_slice(n, 1, &u1);
    let residual = (&gram * &uv - &uv * left.eigenvalues[top]).abs().max();
    assert!(residual < 1e-12, "reference eigenvector residual {residual}");
    Reference {
        s,
        r,
        c,
        sigma,
        u1,
    }
}

/// Random count matrix with every row and column nonzero, leading singular
/// value separated from the second.
pub fn random_counts(rng: &mut ChaCha8Rng, max_rows: usize, max_cols: usize) -> Vec<Vec<u64>> {
    loop {
        let n = rng.random_range(3..=max_rows);
        let m = rng.random_range(3..=max_cols.min(n));
        let density: f64 = rng.random_range(0.3..1.0);
        let mut a: Vec<Vec<u64>> = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| if rng.random_bool(density) { rng.random_range(1..10) } else { 0 })
                    .collect()
            })
            .collect();
        for (i, row) in a.iter_mut().enumerate() {
            row[i % m] += 1;
        }
        for j in 0..m {
            a[j % n][j] += 1;
        }
        let refr = reference(&a);
        if refr.sigma[0] - refr.sigma[1] > 1e-3 * refr.sigma[0] {
            return a;
        }
    }
}

#[allow(dead_code)]
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
