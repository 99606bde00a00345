use serde::{Deserialize, Serialize};

/// Row-major matrix of `f64` values.
///
/// This is the only tensor shape the pipeline needs: node features,
/// layer activations, and weight matrices are all 2-D. `rows == 0`
/// is legal (a frame may have no points after preprocessing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Builds a tensor from row-major data. Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    /// Single-row tensor (1 x n).
    pub fn from_row(row: &[f64]) -> Self {
        Self { rows: 1, cols: row.len(), data: row.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn add_assign(&mut self, other: &Tensor2) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// self (n x k) * rhs (k x m) -> (n x m).
    pub fn matmul(&self, rhs: &Tensor2) -> Tensor2 {
        assert_eq!(self.cols, rhs.rows, "matmul inner dimension mismatch");
        let mut out = Tensor2::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let o_row = out.row_mut(i);
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = rhs.row(k);
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// self (n x k) * rhs^T where rhs is (m x k) -> (n x m).
    pub fn matmul_nt(&self, rhs: &Tensor2) -> Tensor2 {
        assert_eq!(self.cols, rhs.cols, "matmul_nt inner dimension mismatch");
        let mut out = Tensor2::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..rhs.rows {
                let b_row = rhs.row(j);
                let dot: f64 = a_row.iter().zip(b_row).map(|(a, b)| a * b).sum();
                out.set(i, j, dot);
            }
        }
        out
    }

    /// self^T * rhs where self is (k x n), rhs is (k x m) -> (n x m).
    pub fn matmul_tn(&self, rhs: &Tensor2) -> Tensor2 {
        assert_eq!(self.rows, rhs.rows, "matmul_tn inner dimension mismatch");
        let mut out = Tensor2::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = rhs.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let o_row = out.row_mut(i);
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Consistency check for tensors read from external sources (checkpoints).
    pub fn validate(&self) -> Result<(), String> {
        if self.data.len() != self.rows * self.cols {
            return Err(format!(
                "tensor data length {} does not match {}x{}",
                self.data.len(),
                self.rows,
                self.cols
            ));
        }
        if !self.all_finite() {
            return Err("tensor contains non-finite values".into());
        }
        Ok(())
    }
}

/// Largest absolute element-wise difference between two same-shaped tensors.
pub fn max_abs_diff(a: &Tensor2, b: &Tensor2) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff shape mismatch");
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_against_triple_loop() {
        let a = Tensor2::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Tensor2::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b);
        let mut expect = Tensor2::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += a.get(i, k) * b.get(k, j);
                }
                expect.set(i, j, s);
            }
        }
        assert_eq!(c, expect);
    }

    #[test]
    fn transposed_variants_agree_with_plain_matmul() {
        let a = Tensor2::from_vec(2, 3, vec![1.0, -2.0, 0.5, 3.0, 4.0, -1.0]);
        let b = Tensor2::from_vec(4, 3, vec![0.1, 0.2, 0.3, 1.0, -1.0, 2.0, 0.0, 0.5, 1.5, 2.0, 2.0, 2.0]);
        // a * b^T via explicit transpose
        let mut bt = Tensor2::zeros(3, 4);
        for i in 0..4 {
            for j in 0..3 {
                bt.set(j, i, b.get(i, j));
            }
        }
        assert!(max_abs_diff(&a.matmul_nt(&b), &a.matmul(&bt)) < 1e-15);

        let c = Tensor2::from_vec(2, 4, vec![1.0, 0.0, 2.0, -1.0, 0.5, 1.0, 0.0, 3.0]);
        // a^T * c via explicit transpose
        let mut at = Tensor2::zeros(3, 2);
        for i in 0..2 {
            for j in 0..3 {
                at.set(j, i, a.get(i, j));
            }
        }
        assert!(max_abs_diff(&a.matmul_tn(&c), &at.matmul(&c)) < 1e-15);
    }

    #[test]
    fn zero_row_tensors_are_legal() {
        let t = Tensor2::zeros(0, 5);
        assert_eq!(t.shape(), (0, 5));
        assert!(t.all_finite());
        let w = Tensor2::zeros(3, 5);
        let out = t.matmul_nt(&w);
        assert_eq!(out.shape(), (0, 3));
    }
}
