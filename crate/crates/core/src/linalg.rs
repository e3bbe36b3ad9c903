//! Small dense complex matrices and the Hermitian eigensolver behind `exp(-iH)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::construction(format!(
                "matrix of shape {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::construction("matrix entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_rows(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, z) in diag.iter().enumerate() {
            m[(i, i)] = *z;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch in matmul");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "shape mismatch in matvec");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// `max |U†U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint().matmul(self).max_abs_diff(&Self::identity(self.cols))
    }

    /// Commutator `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigendecomposition `H = V diag(λ) V†` of a Hermitian matrix; eigenvectors
/// are the columns of `vectors`, eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Cyclic complex Jacobi eigensolver.
pub fn hermitian_eigen(h: &ComplexMatrix) -> Result<HermitianEigen> {
    if !h.is_square() {
        return Err(Error::construction("eigendecomposition needs a square matrix"));
    }
    let scale = h.frobenius_norm().max(1.0);
    if !h.is_hermitian(1e-12 * scale) {
        return Err(Error::construction("generator is not Hermitian"));
    }
    let n = h.rows;
    let mut a = h.clone();
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
    }
    let mut v = ComplexMatrix::identity(n);

    let off_norm = |a: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&a) <= JACOBI_TOL * scale;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / r; // e^{iφ}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = diag(1, e^{-iφ}) · [[c, s], [-s, c]]
                let g00 = C64::new(c, 0.0);
                let g01 = C64::new(s, 0.0);
                let g10 = -phase.conj() * s;
                let g11 = phase.conj() * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * g00 + akq * g10;
                    a[(k, q)] = akp * g01 + akq * g11;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = g00.conj() * apk + g10.conj() * aqk;
                    a[(q, k)] = g01.conj() * apk + g11.conj() * aqk;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * g00 + vkq * g10;
                    v[(k, q)] = vkp * g01 + vkq * g11;
                }
            }
        }
        sweeps += 1;
        converged = off_norm(&a) <= JACOBI_TOL * scale;
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues of a real symmetric matrix given row-major.
pub fn symmetric_eigenvalues(m: &[f64], n: usize) -> Result<Vec<f64>> {
    let cm = ComplexMatrix::from_real(n, n, m)?;
    Ok(hermitian_eigen(&cm)?.values)
}

/// `exp(-i H)` for Hermitian `H`, through its eigendecomposition.
pub fn expm_neg_i(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eigen(h)?;
    Ok(expm_neg_i_from(&eig))
}

pub fn expm_neg_i_from(eig: &HermitianEigen) -> ComplexMatrix {
    let phases: Vec<C64> = eig.values.iter().map(|&l| C64::new(0.0, -l).exp()).collect();
    let n = phases.len();
    let v = &eig.vectors;
    ComplexMatrix::from_fn(n, n, |i, j| (0..n).map(|k| v[(i, k)] * phases[k] * v[(j, k)].conj()).sum())
}

/// Directional derivative `d/dt exp(-i(H + t E))` at `t = 0`, through the
/// divided-difference formula in the eigenbasis of `H`.
pub fn expm_neg_i_derivative(eig: &HermitianEigen, e: &ComplexMatrix) -> ComplexMatrix {
    let n = eig.values.len();
    let v = &eig.vectors;
    let e_eig = v.adjoint().matmul(e).matmul(v);
    let f = |a: f64, b: f64| -> C64 {
        let ea = C64::new(0.0, -a).exp();
        if (a - b).abs() < 1e-9 {
            // -i e^{-i a}, corrected to first order in (b - a)
            let m = 0.5 * (a + b);
            C64::new(0.0, -1.0) * C64::new(0.0, -m).exp()
        } else {
            (ea - C64::new(0.0, -b).exp()) / (a - b)
        }
    };
    let mut inner = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            inner[(i, j)] = e_eig[(i, j)] * f(eig.values[i], eig.values[j]);
        }
    }
    v.matmul(&inner).matmul(&v.adjoint())
}

/// Hermitian inner product, antilinear in the first slot.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Canonical representative of a state up to global phase: the first
/// non-negligible amplitude is made real positive.
pub fn canonical_phase(v: &mut [C64]) {
    if let Some(z) = v.iter().copied().find(|z| z.norm() > 1e-150) {
        let rot = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= rot;
        }
    }
}

/// Equality of two states up to a global phase.
pub fn equal_up_to_phase(a: &[C64], b: &[C64], tol: f64) -> bool {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    canonical_phase(&mut a);
    canonical_phase(&mut b);
    a.iter().zip(&b).all(|(x, y)| (x - y).norm() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(rng.random_range(-2.0..2.0), 0.0);
            for j in (i + 1)..n {
                let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let u = expm_neg_i(&ComplexMatrix::zeros(3, 3)).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn exp_of_diagonal_qubit_generator() {
        let h = ComplexMatrix::from_real(
            2,
            2,
            &[std::f64::consts::FRAC_PI_2, 0.0, 0.0, -std::f64::consts::FRAC_PI_2],
        )
        .unwrap();
        let u = expm_neg_i(&h).unwrap();
        let expected = ComplexMatrix::diagonal(&[C64::new(0.0, -1.0), C64::new(0.0, 1.0)]);
        assert!(u.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn eigen_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=8 {
            let h = random_hermitian(n, &mut rng);
            let eig = hermitian_eigen(&h).unwrap();
            let d = ComplexMatrix::diagonal(
                &eig.values.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>(),
            );
            let back = eig.vectors.matmul(&d).matmul(&eig.vectors.adjoint());
            assert!(back.max_abs_diff(&h) < 1e-12, "n = {n}");
            assert!(eig.vectors.unitarity_defect() < 1e-12);
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn random_exponentials_are_unitary_and_invert() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.random_range(1..=16);
            let h = random_hermitian(n, &mut rng);
            let u = expm_neg_i(&h).unwrap();
            let u_inv = expm_neg_i(&h.scale(C64::new(-1.0, 0.0))).unwrap();
            assert!(u.unitarity_defect() <= 1e-10);
            assert!(u.matmul(&u_inv).max_abs_diff(&ComplexMatrix::identity(n)) <= 1e-10);
        }
    }

    #[test]
    fn exponential_matches_taylor_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_hermitian(4, &mut rng).scale(C64::new(0.3, 0.0));
        let mi = h.scale(C64::new(0.0, -1.0));
        let mut term = ComplexMatrix::identity(4);
        let mut sum = term.clone();
        for k in 1..40 {
            term = term.matmul(&mi).scale(C64::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
        }
        assert!(expm_neg_i(&h).unwrap().max_abs_diff(&sum) < 1e-13);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = random_hermitian(3, &mut rng);
        let e = random_hermitian(3, &mut rng);
        let eig = hermitian_eigen(&h).unwrap();
        let d = expm_neg_i_derivative(&eig, &e);
        let step = 1e-6;
        let plus = expm_neg_i(&h.add(&e.scale(C64::new(step, 0.0)))).unwrap();
        let minus = expm_neg_i(&h.sub(&e.scale(C64::new(step, 0.0)))).unwrap();
        let fd = plus.sub(&minus).scale(C64::new(0.5 / step, 0.0));
        assert!(d.max_abs_diff(&fd) < 1e-8);
    }

    #[test]
    fn degenerate_spectrum_derivative() {
        let h = ComplexMatrix::identity(2);
        let e = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let d = expm_neg_i_derivative(&hermitian_eigen(&h).unwrap(), &e);
        // commuting case: -i E e^{-iH}
        let expected = e.scale(C64::new(0.0, -1.0) * C64::new(0.0, -1.0).exp());
        assert!(d.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(expm_neg_i(&m), Err(Error::Construction(_))));
    }

    #[test]
    fn phase_canonicalisation() {
        let a = vec![C64::new(0.0, 0.6), C64::new(0.8, 0.0)];
        let rot = C64::from_polar(1.0, 1.234);
        let b: Vec<C64> = a.iter().map(|z| z * rot).collect();
        assert!(equal_up_to_phase(&a, &b, 1e-14));
        let mut c = a.clone();
        canonical_phase(&mut c);
        assert!(c[0].im.abs() < 1e-16 && c[0].re > 0.0);
        assert!(!equal_up_to_phase(&a, &[C64::new(0.6, 0.0), C64::new(0.0, 0.8)], 1e-6));
    }
}
