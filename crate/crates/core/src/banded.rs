//! Symmetric banded matrices and their Cholesky factorization.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("matrix is not positive definite (pivot {pivot} at row {row})")]
pub struct NotPositiveDefinite {
    pub row: usize,
    pub pivot: f64,
}

/// Symmetric matrix stored by its lower band.
///
/// Row `i` holds `A[i][i - bandwidth ..= i]`, left-padded with zeros near
/// the top.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricBanded {
    n: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl SymmetricBanded {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bandwidth,
            data: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r >= self.n || r - c > self.bandwidth {
            None
        } else {
            Some(r * (self.bandwidth + 1) + self.bandwidth - (r - c))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `value` to the symmetric pair (i, j)/(j, i).
    ///
    /// Panics if the entry is outside the band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside bandwidth {}", self.bandwidth));
        self.data[s] += value;
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside bandwidth {}", self.bandwidth));
        self.data[s] = value;
    }

    /// `self + scale * other`; both must share shape.
    pub fn scaled_add(&self, scale: f64, other: &Self) -> Self {
        assert_eq!((self.n, self.bandwidth), (other.n, other.bandwidth));
        Self {
            n: self.n,
            bandwidth: self.bandwidth,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + scale * b)
                .collect(),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bandwidth);
            for j in lo..i {
                let a = self.get(i, j);
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += self.get(i, i) * x[i];
        }
        y
    }

    /// Principal submatrix over rows/columns `range`.
    pub fn principal(&self, range: std::ops::Range<usize>) -> Self {
        let mut out = Self::zeros(range.len(), self.bandwidth);
        for (i, gi) in range.clone().enumerate() {
            for (j, gj) in range.clone().enumerate().take(i + 1) {
                if gi - gj <= self.bandwidth {
                    out.set(i, j, self.get(gi, gj));
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn cholesky(&self) -> Result<BandedCholesky, NotPositiveDefinite> {
        let w = self.bandwidth;
        let mut l = self.clone();
        for i in 0..self.n {
            let lo = i.saturating_sub(w);
            for j in lo..=i {
                let mut sum = l.get(i, j);
                let klo = lo.max(j.saturating_sub(w));
                for k in klo..j {
                    sum -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(NotPositiveDefinite { row: i, pivot: sum });
                    }
                    l.set(i, i, sum.sqrt());
                } else {
                    let d = l.get(j, j);
                    l.set(i, j, sum / d);
                }
            }
        }
        Ok(BandedCholesky { lower: l })
    }
}

/// Lower factor `L` with `A = L·Lᵀ`, same band storage as the input.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    lower: SymmetricBanded,
}

impl BandedCholesky {
    pub fn dim(&self) -> usize {
        self.lower.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let l = &self.lower;
        let (n, w) = (l.n, l.bandwidth);
        assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(w)..i {
                s -= l.get(i, k) * b[k];
            }
            b[i] = s / l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + w + 1).min(n) {
                s -= l.get(k, i) * b[k];
            }
            b[i] = s / l.get(i, i);
        }
    }
}
