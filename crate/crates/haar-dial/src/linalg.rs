//! Dense complex matrices: product, adjoint, unitarity defect, Householder QR.
//!
//! Row-major `Complex64` storage, sized for mode counts up to a few hundred.
//! The QR factorization applies complex Householder reflections and skips a
//! column whose below-diagonal part is exactly zero, so already-triangular
//! input (the identity in particular) comes back unchanged with q = I.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonfmt;

/// Pivot magnitude below which QR reports a rank-deficient input.
const QR_PIVOT_MIN: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

/// On-disk form: entries are row-major [re, im] pairs.
#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    entries: Vec<(f64, f64)>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            entries: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Build from row-major entries. Rejects size mismatches and non-finite components.
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                entries.len()
            )));
        }
        for z in &entries {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::Domain("matrix entries must be finite".into()));
            }
        }
        Ok(ComplexMatrix { rows, cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                let row = k * other.cols;
                let dst = i * other.cols;
                for j in 0..other.cols {
                    out.entries[dst + j] += a * other.entries[row + j];
                }
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    /// Largest entry of |a a^dag - I|. Zero for exactly unitary input.
    pub fn unitarity_defect(&self) -> Result<f64> {
        if self.rows != self.cols {
            return Err(Error::Shape(format!(
                "unitarity defect needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.get(i, k) * self.get(j, k).conj();
                }
                if i == j {
                    acc -= Complex64::new(1.0, 0.0);
                }
                worst = worst.max(acc.norm());
            }
        }
        Ok(worst)
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "cannot compare {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut worst = 0.0f64;
        for (a, b) in self.entries.iter().zip(&other.entries) {
            worst = worst.max((a - b).norm());
        }
        Ok(worst)
    }

    /// Factor a = q r with q unitary and r upper triangular.
    ///
    /// A column whose below-diagonal part is exactly zero gets no reflection,
    /// so its sign convention is left alone. Diagonal pivots smaller than
    /// `QR_PIVOT_MIN` in magnitude report the input as rank deficient.
    pub fn householder_qr(&self) -> Result<(ComplexMatrix, ComplexMatrix)> {
        if self.rows != self.cols {
            return Err(Error::Shape(format!(
                "QR factorization needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut r = self.clone();
        let mut q = ComplexMatrix::identity(n);
        let mut v = vec![Complex64::new(0.0, 0.0); n];

        for j in 0..n {
            let below_zero = (j + 1..n).all(|k| r.get(k, j) == Complex64::new(0.0, 0.0));
            if !below_zero {
                let mut norm_sq = 0.0f64;
                for k in j..n {
                    norm_sq += r.get(k, j).norm_sqr();
                }
                let norm = norm_sq.sqrt();
                let x0 = r.get(j, j);
                // v = x + e^{i arg(x0)} |x| e_1 maximizes |v| and avoids cancellation.
                let shift = Complex64::from_polar(norm, x0.arg());
                for k in j..n {
                    v[k] = r.get(k, j);
                }
                v[j] += shift;
                let vnorm_sq: f64 = v[j..n].iter().map(|z| z.norm_sqr()).sum();
                if vnorm_sq > 0.0 {
                    let scale = 2.0 / vnorm_sq;
                    // r <- (I - scale v v^dag) r on the trailing block
                    for c in j..n {
                        let mut dot = Complex64::new(0.0, 0.0);
                        for k in j..n {
                            dot += v[k].conj() * r.get(k, c);
                        }
                        dot *= scale;
                        for k in j..n {
                            let val = r.get(k, c) - v[k] * dot;
                            r.set(k, c, val);
                        }
                    }
                    // q <- q (I - scale v v^dag), reflectors are Hermitian
                    for row in 0..n {
                        let mut dot = Complex64::new(0.0, 0.0);
                        for k in j..n {
                            dot += q.get(row, k) * v[k];
                        }
                        dot *= scale;
                        for k in j..n {
                            let val = q.get(row, k) - dot * v[k].conj();
                            q.set(row, k, val);
                        }
                    }
                }
            }
            if r.get(j, j).norm() < QR_PIVOT_MIN {
                return Err(Error::Degenerate(format!(
                    "rank-deficient input, pivot {} is numerically zero",
                    j
                )));
            }
        }
        // The reflections leave roundoff crumbs below the diagonal; r is
        // triangular by construction, so zero them exactly.
        for i in 1..n {
            for j in 0..i {
                r.set(i, j, Complex64::new(0.0, 0.0));
            }
        }
        Ok((q, r))
    }

    pub fn to_json(&self) -> String {
        let entries = self.entries.iter().map(|z| (z.re, z.im)).collect();
        jsonfmt::to_string(&MatrixJson {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    pub fn from_json(text: &str) -> Result<ComplexMatrix> {
        let raw: MatrixJson = serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("matrix json: {e}")))?;
        let entries = raw
            .entries
            .into_iter()
            .map(|(re, im)| Complex64::new(re, im))
            .collect();
        ComplexMatrix::from_entries(raw.rows, raw.cols, entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_rng(seed: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 * 2f64.powi(-53)
    }

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let entries = (0..n * n)
            .map(|_| Complex64::new(uniform(rng) - 0.5, uniform(rng) - 0.5))
            .collect();
        ComplexMatrix::from_entries(n, n, entries).unwrap()
    }

    /// Deliberately naive i-j-k product used as the oracle for `matmul`.
    fn naive_matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    #[test]
    fn matmul_matches_naive_oracle() {
        let mut rng = test_rng(11);
        for n in [2usize, 3, 4, 7] {
            let a = random_matrix(n, &mut rng);
            let b = random_matrix(n, &mut rng);
            let fast = a.matmul(&b).unwrap();
            let slow = naive_matmul(&a, &b);
            assert!(fast.max_abs_diff(&slow).unwrap() < 1e-13);
        }
    }

    #[test]
    fn matmul_identity_is_noop() {
        let mut rng = test_rng(12);
        let a = random_matrix(5, &mut rng);
        let i5 = ComplexMatrix::identity(5);
        assert_eq!(a.matmul(&i5).unwrap(), a);
        assert_eq!(i5.matmul(&a).unwrap(), a);
    }

    #[test]
    fn matmul_shape_mismatch_errors() {
        let a = ComplexMatrix::zeros(2, 3);
        let b = ComplexMatrix::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(Error::Shape(_))));
    }

    #[test]
    fn matmul_is_associative_within_tolerance() {
        let mut rng = test_rng(13);
        let a = random_matrix(6, &mut rng);
        let b = random_matrix(6, &mut rng);
        let c = random_matrix(6, &mut rng);
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        assert!(left.max_abs_diff(&right).unwrap() < 1e-12);
    }

    #[test]
    fn adjoint_is_involutive() {
        let mut rng = test_rng(14);
        let a = random_matrix(4, &mut rng);
        assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn beamsplitter_half_is_involutive() {
        // B(1/2) is the real symmetric Hadamard-like coupler; B^2 = I exactly
        // up to one rounding in the off-diagonal accumulation.
        let s = Complex64::new(0.5f64.sqrt(), 0.0);
        let b = ComplexMatrix::from_entries(2, 2, vec![s, s, s, -s]).unwrap();
        let sq = b.matmul(&b).unwrap();
        assert!(sq.max_abs_diff(&ComplexMatrix::identity(2)).unwrap() < 1e-15);
    }

    #[test]
    fn unitarity_defect_examples() {
        assert_eq!(
            ComplexMatrix::identity(4).unitarity_defect().unwrap(),
            0.0
        );
        let d = ComplexMatrix::from_entries(
            2,
            2,
            vec![
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        )
        .unwrap();
        assert_eq!(d.unitarity_defect().unwrap(), 3.0);
    }

    #[test]
    fn qr_of_identity_is_identity_pair() {
        let i6 = ComplexMatrix::identity(6);
        let (q, r) = i6.householder_qr().unwrap();
        assert_eq!(q, i6);
        assert_eq!(r, i6);
    }

    #[test]
    fn qr_reconstructs_and_factors_correctly() {
        let mut rng = test_rng(15);
        for n in [2usize, 3, 5, 8, 16] {
            let a = random_matrix(n, &mut rng);
            let (q, r) = a.householder_qr().unwrap();
            assert!(q.unitarity_defect().unwrap() < 1e-12, "q not unitary at n={n}");
            for i in 1..n {
                for j in 0..i {
                    assert_eq!(r.get(i, j), Complex64::new(0.0, 0.0));
                }
            }
            let qr = q.matmul(&r).unwrap();
            assert!(qr.max_abs_diff(&a).unwrap() < 1e-12, "q r != a at n={n}");
        }
    }

    #[test]
    fn qr_of_unitary_gives_unit_diagonal() {
        // For unitary input r must be diagonal with unit-magnitude entries.
        let mut rng = test_rng(16);
        let a = random_matrix(6, &mut rng);
        let (q, _) = a.householder_qr().unwrap();
        let (_, r) = q.householder_qr().unwrap();
        for i in 0..6 {
            for j in i + 1..6 {
                assert!(r.get(i, j).norm() < 1e-12);
            }
            assert!((r.get(i, i).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn qr_rejects_rank_deficient_input() {
        let z = ComplexMatrix::zeros(3, 3);
        assert!(matches!(z.householder_qr(), Err(Error::Degenerate(_))));
        let mut one_col = ComplexMatrix::zeros(3, 3);
        one_col.set(0, 0, Complex64::new(1.0, 0.0));
        one_col.set(1, 0, Complex64::new(2.0, 0.0));
        assert!(matches!(one_col.householder_qr(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn from_entries_rejects_bad_input() {
        assert!(matches!(
            ComplexMatrix::from_entries(2, 2, vec![Complex64::new(1.0, 0.0)]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            ComplexMatrix::from_entries(1, 1, vec![Complex64::new(f64::NAN, 0.0)]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let mut rng = test_rng(17);
        let a = random_matrix(3, &mut rng);
        let text = a.to_json();
        let back = ComplexMatrix::from_json(&text).unwrap();
        assert_eq!(a, back);
        assert_eq!(text, back.to_json());
    }
}
