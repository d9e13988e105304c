//! Direct dense and banded solvers used by the field sampler and the FE
//! solver. No pivoting anywhere: the FE tangent is kept narrow-banded by a
//! node permutation, and a vanishing pivot is reported as a numerical error
//! so the caller can cut the load step.

use ndarray::Array2;

use crate::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky_lower(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid("cholesky needs a square matrix"));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::Numerical(format!(
                        "cholesky pivot {s:.3e} at row {i} is not positive"
                    )));
                }
                l[[i, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// `L * z` for lower-triangular `L`.
pub fn lower_triangular_matvec(l: &Array2<f64>, z: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..=i {
            s += l[[i, j]] * z[j];
        }
        out[i] = s;
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Square band matrix: row `i` holds columns `i-hbw ..= i+hbw`.
/// Storage is `(n, 2*hbw+1)` with column `j` of the full matrix at band
/// offset `j - i + hbw`.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    hbw: usize,
    data: Array2<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, half_bandwidth: usize) -> Self {
        BandedMatrix {
            n,
            hbw: half_bandwidth,
            data: Array2::zeros((n, 2 * half_bandwidth + 1)),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.hbw
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        j + self.hbw - i
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i.abs_diff(j) <= self.hbw
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[[i, self.offset(i, j)]]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(self.in_band(i, j), "({i},{j}) outside band {}", self.hbw);
        let o = self.offset(i, j);
        self.data[[i, o]] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(self.in_band(i, j), "({i},{j}) outside band {}", self.hbw);
        let o = self.offset(i, j);
        self.data[[i, o]] += v;
    }

    /// Zero row `i` and column `i`, then put 1 on the diagonal. Symmetric
    /// elimination of a constrained unknown.
    pub fn eliminate_symmetric(&mut self, i: usize) {
        let lo = i.saturating_sub(self.hbw);
        let hi = (i + self.hbw).min(self.n - 1);
        for j in lo..=hi {
            let o = self.offset(i, j);
            self.data[[i, o]] = 0.0;
            let o = self.offset(j, i);
            self.data[[j, o]] = 0.0;
        }
        let o = self.offset(i, i);
        self.data[[i, o]] = 1.0;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.hbw);
            let hi = (i + self.hbw).min(self.n - 1);
            let mut s = 0.0;
            for j in lo..=hi {
                s += self.data[[i, self.offset(i, j)]] * x[j];
            }
            out[i] = s;
        }
        out
    }

    /// LU factorization without pivoting, in band storage. `L` is unit lower
    /// triangular; its strict lower part and `U` share the band array.
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let hbw = self.hbw;
        for k in 0..n {
            let pivot = self.data[[k, hbw]];
            if !pivot.is_finite() || pivot.abs() < f64::MIN_POSITIVE {
                return Err(Error::Numerical(format!(
                    "banded LU pivot {pivot:.3e} at row {k}"
                )));
            }
            let hi = (k + hbw).min(n - 1);
            for i in k + 1..=hi {
                let o_ik = self.offset(i, k);
                let l = self.data[[i, o_ik]] / pivot;
                self.data[[i, o_ik]] = l;
                if l != 0.0 {
                    for j in k + 1..=hi {
                        let u_kj = self.data[[k, self.offset(k, j)]];
                        if u_kj != 0.0 {
                            let o_ij = self.offset(i, j);
                            self.data[[i, o_ij]] -= l * u_kj;
                        }
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            hbw,
            data: self.data,
        })
    }
}

/// Packed LU factors from [`BandedMatrix::factor`].
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    hbw: usize,
    data: Array2<f64>,
}

impl BandedLu {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[[i, j + self.hbw - i]]
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let hbw = self.hbw;
        // forward: L y = b (unit diagonal)
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(hbw);
            let mut s = x[i];
            for j in lo..i {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s;
        }
        // backward: U x = y
        for i in (0..n).rev() {
            let hi = (i + hbw).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=hi {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
        x
    }

    /// Solves `A^T x = b` using the same factors: `A^T = U^T L^T`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let hbw = self.hbw;
        // forward: U^T z = b (U^T lower triangular, diagonal from U)
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(hbw);
            let mut s = x[i];
            for j in lo..i {
                s -= self.at(j, i) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
        // backward: L^T x = z (unit diagonal)
        for i in (0..n).rev() {
            let hi = (i + hbw).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=hi {
                s -= self.at(j, i) * x[j];
            }
            x[i] = s;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, hbw: usize, seed: u64) -> BandedMatrix {
        // diagonally dominant so the pivot-free factorization is stable
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = BandedMatrix::zeros(n, hbw);
        for i in 0..n {
            let lo = i.saturating_sub(hbw);
            let hi = (i + hbw).min(n - 1);
            let mut row_sum = 0.0;
            for j in lo..=hi {
                if j != i {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    m.set(i, j, v);
                    row_sum += v.abs();
                }
            }
            m.set(i, i, row_sum + 1.0 + rng.random_range(0.0..1.0));
        }
        m
    }

    #[test]
    fn banded_solve_inverts_matvec() {
        let m = random_banded(40, 5, 7);
        let x_true: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = m.matvec(&x_true);
        let lu = m.factor().unwrap();
        let x = lu.solve(&b);
        for (a, t) in x.iter().zip(&x_true) {
            assert!((a - t).abs() < 1e-10, "{a} vs {t}");
        }
    }

    #[test]
    fn transpose_solve_matches_dense_transpose() {
        let n = 25;
        let m = random_banded(n, 4, 11);
        // dense A^T matvec as the oracle
        let mut at = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                at[[j, i]] = m.get(i, j);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                b[i] += at[[i, j]] * x_true[j];
            }
        }
        let lu = m.factor().unwrap();
        let x = lu.solve_transpose(&b);
        for (a, t) in x.iter().zip(&x_true) {
            assert!((a - t).abs() < 1e-10, "{a} vs {t}");
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut m = BandedMatrix::zeros(3, 1);
        m.set(0, 0, 1.0);
        m.set(1, 1, 0.0); // structurally singular
        m.set(2, 2, 1.0);
        assert!(matches!(m.factor(), Err(Error::Numerical(_))));
    }

    #[test]
    fn eliminate_symmetric_pins_unknown() {
        let mut m = random_banded(10, 2, 3);
        m.eliminate_symmetric(4);
        let b: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let x = m.clone().factor().unwrap().solve(&b);
        assert!((x[4] - 4.0).abs() < 1e-12);
        for j in 0..10 {
            let expect = if j == 4 { 1.0 } else { 0.0 };
            assert_eq!(m.get(4, j), expect);
            assert_eq!(m.get(j, 4), expect);
        }
    }

    #[test]
    fn cholesky_reconstructs_spd_matrix() {
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
        let mut a = Array2::<f64>::zeros((n, n));
        // A = G G^T + n I is SPD
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += g[[i, k]] * g[[j, k]];
                }
                a[[i, j]] = s + if i == j { n as f64 } else { 0.0 };
            }
        }
        let l = cholesky_lower(&a).unwrap();
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += l[[i, k]] * l[[j, k]];
                }
                assert!((s - a[[i, j]]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite_matrix() {
        let a = ndarray::array![[1.0, 2.0], [2.0, 1.0]]; // eigenvalues 3, -1
        assert!(matches!(cholesky_lower(&a), Err(Error::Numerical(_))));
    }

    proptest! {
        #[test]
        fn banded_roundtrip(seed in 0u64..500, n in 2usize..30, hbw in 1usize..6) {
            let hbw = hbw.min(n - 1);
            let m = random_banded(n, hbw, seed);
            let x_true: Vec<f64> = (0..n).map(|i| ((i * 13 + 7) % 11) as f64 - 5.0).collect();
            let b = m.matvec(&x_true);
            let bt = {
                // A^T x via explicit loop over stored entries
                let mut bt = vec![0.0; n];
                for i in 0..n {
                    for j in 0..n {
                        bt[j] += m.get(i, j) * x_true[i];
                    }
                }
                bt
            };
            let lu = m.factor().unwrap();
            let x = lu.solve(&b);
            let xt = lu.solve_transpose(&bt);
            for i in 0..n {
                prop_assert!((x[i] - x_true[i]).abs() < 1e-8);
                prop_assert!((xt[i] - x_true[i]).abs() < 1e-8);
            }
        }
    }
}
