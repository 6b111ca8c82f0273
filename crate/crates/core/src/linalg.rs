//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower Cholesky factor with its log-determinant.
#[derive(Debug, Clone)]
pub struct CholFactor {
    l: DMatrix<f64>,
    log_det: f64,
}

impl CholFactor {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Numerical(format!("Cholesky factorization failed ({n}x{n})")))?;
        let l = chol.unpack();
        let log_det = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::Numerical("non-finite log-determinant".into()));
        }
        Ok(Self { l, log_det })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `L^{-1} b` for a vector.
    pub fn whiten(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.l.solve_lower_triangular_mut(&mut x);
        x
    }

    /// `L^{-1} B` for a matrix.
    pub fn whiten_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        self.l.solve_lower_triangular_mut(&mut x);
        x
    }

    /// `A^{-1} b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = self.whiten(b);
        self.l.tr_solve_lower_triangular_mut(&mut x);
        x
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = self.whiten_mat(b);
        self.l.tr_solve_lower_triangular_mut(&mut x);
        x
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.solve_mat(&DMatrix::identity(self.dim(), self.dim()))
    }
}

/// Cholesky with escalating diagonal jitter `start, 10*start, ..., max`.
pub fn cholesky_jittered(m: &DMatrix<f64>, start: f64, max: f64) -> Result<(CholFactor, f64)> {
    if let Ok(c) = CholFactor::new(m.clone()) {
        return Ok((c, 0.0));
    }
    let mut jitter = start;
    while jitter <= max * (1.0 + 1e-12) {
        let mut j = m.clone();
        for i in 0..j.nrows() {
            j[(i, i)] += jitter;
        }
        if let Ok(c) = CholFactor::new(j) {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Numerical(format!("Cholesky failed even with jitter {max:e}")))
}

/// Symmetric positive square root via eigendecomposition; eigenvalues are
/// floored at `1e-12` before rooting.
pub fn sym_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(1e-12).sqrt());
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&roots) * q.transpose()
}

/// Compensated (Neumaier) summation; the result does not depend on how
/// intermediate rounding errors accumulate for well-scaled inputs.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Log-Cholesky encoding of a symmetric positive definite matrix: the lower
/// triangle of its Cholesky factor, row by row, with log-transformed diagonal.
pub fn log_cholesky_encode(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    let l = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("matrix is not positive definite".into()))?
        .unpack();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            out.push(if i == j { l[(i, i)].ln() } else { l[(i, j)] });
        }
    }
    Ok(out)
}

pub fn log_cholesky_decode(v: &[f64], n: usize) -> Result<DMatrix<f64>> {
    if v.len() != n * (n + 1) / 2 {
        return Err(Error::InvalidInput(format!("log-Cholesky vector of length {} for {n}x{n}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite log-Cholesky parameters".into()));
    }
    let mut l = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            l[(i, j)] = if i == j { v[k].exp() } else { v[k] };
            k += 1;
        }
    }
    Ok(&l * l.transpose())
}

/// Number of free parameters in an `n x n` log-Cholesky encoding.
pub fn log_cholesky_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn identity_encodes_to_zeros() {
        let v = log_cholesky_encode(&DMatrix::identity(3, 3)).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        assert_eq!(log_cholesky_decode(&v, 3).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn log_cholesky_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(1..5);
            let a = random_spd(&mut rng, n);
            let back = log_cholesky_decode(&log_cholesky_encode(&a).unwrap(), n).unwrap();
            assert!((&back - &a).abs().max() < 1e-10);
        }
    }

    #[test]
    fn decode_rejects_non_finite() {
        assert!(log_cholesky_decode(&[f64::NAN], 1).is_err());
        assert!(log_cholesky_decode(&[0.0, 0.0], 2).is_err());
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_spd(&mut rng, 4);
        let b = sym_sqrt(&a);
        assert!((&b * &b - &a).abs().max() < 1e-12);
        assert!((&b - b.transpose()).abs().max() < 1e-14);
    }

    #[test]
    fn chol_solves_and_log_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_spd(&mut rng, 5);
        let c = CholFactor::new(a.clone()).unwrap();
        let b = DVector::from_fn(5, |i, _| i as f64 - 2.0);
        assert!((&a * c.solve(&b) - &b).norm() < 1e-10);
        let det = a.clone().lu().determinant();
        assert!((c.log_det() - det.ln()).abs() < 1e-10);
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        let z = DMatrix::zeros(3, 3);
        let (_, j) = cholesky_jittered(&z, 1e-10, 1e-6).unwrap();
        assert!(j >= 1e-10);
        let neg = DMatrix::from_diagonal_element(2, 2, -1.0);
        assert!(cholesky_jittered(&neg, 1e-10, 1e-6).is_err());
    }

    #[test]
    fn compensated_sum_is_order_independent() {
        let vals: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 * 1e-3 + 1e8 * ((i % 2) as f64)).collect();
        let mut rev = vals.clone();
        rev.reverse();
        assert!((neumaier_sum(vals) - neumaier_sum(rev)).abs() < 1e-10);
    }
}
