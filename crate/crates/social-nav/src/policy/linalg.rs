//! Dense row-major matrices sized for this crate's networks (tens of
//! thousands of parameters), plus the initializers the layers use.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Entries drawn i.i.d. uniform from `[-bound, bound]`.
    pub fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut impl Rng) -> Self {
        Matrix {
            rows,
            cols,
            data: (0..rows * cols)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect(),
        }
    }

    /// Orthogonal initialization scaled by `gain` (the rows or columns —
    /// whichever dimension is smaller — form an orthonormal set).
    pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut impl Rng) -> Self {
        // Gram-Schmidt on Gaussian draws; vectors live along the larger
        // dimension so orthogonality is achievable.
        let (n_vecs, dim, transpose) = if rows <= cols {
            (rows, cols, false)
        } else {
            (cols, rows, true)
        };
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n_vecs);
        while basis.len() < n_vecs {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            for b in &basis {
                let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for x in &mut v {
                    *x /= norm;
                }
                basis.push(v);
            }
        }
        let mut m = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let value = if transpose { basis[c][r] } else { basis[r][c] };
                m.data[r * cols + c] = gain * value;
            }
        }
        m
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `y = W x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .map(|(w, xi)| w * xi)
                    .sum::<f64>()
            })
            .collect()
    }

    /// `x = W^T y` (used to push gradients back through a layer).
    pub fn matvec_transpose(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += w * yr;
            }
        }
        out
    }

    /// `W += y x^T` (gradient accumulation).
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (w, &xi) in row.iter_mut().zip(x) {
                *w += yr * xi;
            }
        }
    }
}

/// `a += b` elementwise.
pub fn add_assign(a: &mut [f64], b: &[f64]) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Elementwise product into a fresh vector.
pub fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn matvec_agrees_with_hand_computation() {
        let m = Matrix {
            rows: 2,
            cols: 3,
            data: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        };
        assert_eq!(m.matvec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        assert_eq!(m.matvec_transpose(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn add_outer_matches_manual_product() {
        let mut m = Matrix::zeros(2, 2);
        m.add_outer(&[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(m.data, vec![3.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn orthogonal_rows_are_orthonormal_scaled_by_gain() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let gain = std::f64::consts::SQRT_2;
        let m = Matrix::orthogonal(4, 9, gain, &mut rng);
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = m.row(i).iter().zip(m.row(j)).map(|(a, b)| a * b).sum();
                let expected = if i == j { gain * gain } else { 0.0 };
                assert!((dot - expected).abs() < 1e-9, "rows {i},{j}: {dot}");
            }
        }
        // Tall case: columns orthonormal.
        let t = Matrix::orthogonal(9, 3, 1.0, &mut rng);
        for i in 0..3 {
            let mut dot = 0.0;
            for r in 0..9 {
                dot += t.data[r * 3 + i] * t.data[r * 3 + i];
            }
            assert!((dot - 1.0).abs() < 1e-9);
        }
    }
}
