//! Dense symmetric positive definite helpers (row-major storage).

use alloc::vec::Vec;

/// Lower Cholesky factor of an SPD matrix.
pub(crate) struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factors the lower triangle of `a` in place. Returns `None` when a
    /// pivot is not strictly positive.
    pub(crate) fn factor(mut a: Vec<f64>, n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        for j in 0..n {
            let (head, below) = a.split_at_mut((j + 1) * n);
            let row_j = &mut head[j * n..];
            let d = row_j[j] - row_j[..j].iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) {
                return None;
            }
            let d = libm::sqrt(d);
            row_j[j] = d;
            let row_j = &row_j[..j];
            for row_i in below.chunks_exact_mut(n) {
                let s: f64 = row_i[..j].iter().zip(row_j).map(|(x, y)| x * y).sum();
                row_i[j] = (row_i[j] - s) / d;
            }
        }
        Some(Cholesky { n, lower: a })
    }

    pub(crate) fn diag(&self, i: usize) -> f64 {
        self.lower[i * self.n + i]
    }

    /// `(max L_ii / min L_ii)²`, a cheap lower bound on the 2-norm condition
    /// number of the factored matrix.
    pub(crate) fn condition_estimate(&self) -> f64 {
        let (lo, hi) = (0..self.n)
            .map(|i| self.diag(i))
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        let r = hi / lo;
        r * r
    }

    /// Solves `L Lᵀ x = b` in place.
    #[cfg(test)]
    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, x)| l * x).sum();
            b[i] = (b[i] - s) / self.lower[i * n + i];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| self.lower[k * n + i] * b[k]).sum();
            b[i] = (b[i] - s) / self.lower[i * n + i];
        }
    }

    /// `bᵀ (L Lᵀ)⁻¹ b`, via one forward substitution.
    pub(crate) fn inverse_quadratic_form(&self, b: &[f64]) -> f64 {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - s) / self.lower[i * n + i];
        }
        y.iter().map(|v| v * v).sum()
    }
}
