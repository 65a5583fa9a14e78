//! Dense numerical primitives shared by every model in the crate.
//!
//! Symmetric matrices are carried as [`SymMatrix`], a validated wrapper over a
//! `nalgebra` matrix. Factorizations are delegated to `nalgebra`; this module
//! adds the conventions the rest of the crate relies on: descending eigenvalue
//! order with a fixed eigenvector sign, a single jittered retry for
//! near-singular SPD solves, and a seeded random stream whose position can be
//! saved and restored.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Relative ridge added to the diagonal when a Cholesky factorization fails.
pub const JITTER_RELATIVE: f64 = 1e-10;

/// Eigenvalues below this fraction of the largest are treated as exact zeros.
pub const EIGEN_CLAMP_RELATIVE: f64 = 1e-12;

/// A square matrix that is exactly symmetric with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::ContractViolation(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::ContractViolation(format!(
                        "matrix is not symmetric at ({i}, {j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        Ok(SymMatrix(m))
    }

    /// Builds a symmetric matrix from a function evaluated on the upper triangle only.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    /// Mirrors the upper triangle of `m` onto the lower one.
    ///
    /// Products such as `Z Z'` are symmetric in exact arithmetic but blocked
    /// kernels may round the two triangles differently.
    pub fn symmetrize_upper(mut m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "symmetrize_upper needs a square matrix");
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                m[(i, j)] = m[(j, i)];
            }
        }
        SymMatrix(m)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn max_diagonal(&self) -> f64 {
        self.0.diagonal().max()
    }

    /// `a * self + b * other`, keeping exact symmetry.
    pub fn linear_combination(&self, a: f64, other: &SymMatrix, b: f64) -> SymMatrix {
        assert_eq!(self.order(), other.order());
        SymMatrix(&self.0 * a + &other.0 * b)
    }

    /// `scale * self + shift * I`.
    pub fn scaled_plus_diagonal(&self, scale: f64, shift: f64) -> SymMatrix {
        let mut m = &self.0 * scale;
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
        SymMatrix(m)
    }
}

/// Eigenvalues in non-increasing order with unit-norm eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenPair {
    /// Q diag(values) Q'.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.values[j];
        }
        &scaled * self.vectors.transpose()
    }

    /// Eigenvalues with tiny magnitudes (relative to the largest) set to zero.
    pub fn clamped_values(&self) -> DVector<f64> {
        let top = self.values.iter().cloned().fold(0.0_f64, f64::max);
        let floor = EIGEN_CLAMP_RELATIVE * top;
        self.values.map(|v| if v < floor { 0.0 } else { v })
    }
}

/// Symmetric eigendecomposition with descending eigenvalues.
///
/// Each eigenvector is oriented so its entry of largest absolute value is
/// positive; among tied magnitudes the lowest index wins.
pub fn sym_eigen(m: &SymMatrix) -> Result<EigenPair> {
    let n = m.order();
    if n == 0 {
        return Ok(EigenPair {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(m.matrix().clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        let norm = col.norm();
        let mut lead = 0;
        for i in 1..n {
            // strict comparison keeps the lowest index among ties
            if col[i].abs() > col[lead].abs() {
                lead = i;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, dst)] = sign * col[i] / norm;
        }
    }
    Ok(EigenPair { values, vectors })
}

/// Cholesky factor of an SPD matrix, possibly of a jittered copy.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    jittered: bool,
}

impl SpdFactor {
    /// Factors `a`; on failure retries once with `1e-10 * max(diag)` on the diagonal.
    /// `name` identifies the matrix in the singular-matrix error.
    pub fn new(a: &SymMatrix, name: &str) -> Result<Self> {
        if let Some(chol) = Cholesky::new(a.matrix().clone()) {
            return Ok(SpdFactor {
                chol,
                jittered: false,
            });
        }
        let ridge = JITTER_RELATIVE * a.max_diagonal();
        if ridge.is_nan() || ridge <= 0.0 {
            return Err(Error::Singular(name.to_string()));
        }
        let mut m = a.matrix().clone();
        for i in 0..m.nrows() {
            m[(i, i)] += ridge;
        }
        match Cholesky::new(m) {
            Some(chol) => {
                log::debug!("applied jitter {ridge:e} to `{name}`");
                Ok(SpdFactor {
                    chol,
                    jittered: true,
                })
            }
            None => Err(Error::Singular(name.to_string())),
        }
    }

    pub fn jittered(&self) -> bool {
        self.jittered
    }

    pub fn order(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// L⁻¹ b for the lower factor L (whitening).
    pub fn whiten(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a nonzero diagonal")
    }

    pub fn whiten_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a nonzero diagonal")
    }

    /// L z, used to draw from N(0, A).
    pub fn lower_mul(&self, z: &DVector<f64>) -> DVector<f64> {
        self.chol.l() * z
    }

    pub fn log_det(&self) -> f64 {
        self.chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| 2.0 * d.ln())
            .sum()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Solution of an SPD system together with whether jitter was needed.
#[derive(Debug, Clone)]
pub struct SpdSolution {
    pub x: DMatrix<f64>,
    pub jittered: bool,
}

/// Solves `A X = B` for symmetric positive (semi-)definite `A`.
pub fn spd_solve(a: &SymMatrix, b: &DMatrix<f64>, name: &str) -> Result<SpdSolution> {
    if b.nrows() != a.order() {
        return Err(Error::InvalidInput(format!(
            "right-hand side has {} rows, `{name}` has order {}",
            b.nrows(),
            a.order()
        )));
    }
    let f = SpdFactor::new(a, name)?;
    Ok(SpdSolution {
        x: f.solve(b),
        jittered: f.jittered(),
    })
}

/// Seeded, position-addressable random stream.
///
/// The position counts 32-bit words consumed from the underlying ChaCha20
/// generator, so `(seed, position)` fully describes the stream state.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha20Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream {
            seed,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// Restores a stream saved with [`RandomStream::seed`] and [`RandomStream::position`].
    pub fn resume(seed: u64, position: u128) -> Self {
        let mut s = RandomStream::new(seed);
        s.rng.set_word_pos(position);
        s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn next_gaussian(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform on the open interval (0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        self.rng.sample(Open01)
    }

    /// Gamma variate with unit scale.
    pub fn next_gamma(&mut self, shape: f64) -> f64 {
        Gamma::new(shape, 1.0)
            .expect("gamma shape must be positive and finite")
            .sample(&mut self.rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn gaussian_vector(&mut self, n: usize) -> DVector<f64> {
        DVector::from_iterator(n, (0..n).map(|_| self.next_gaussian()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ar1_3() -> SymMatrix {
        SymMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 1.0],
        ))
        .unwrap()
    }

    #[test]
    fn identity_eigen() {
        let e = sym_eigen(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 1.0, 1.0]);
        // any orthonormal basis is valid; reconstruction and orthogonality pin it
        assert_abs_diff_eq!(e.reconstruct(), DMatrix::identity(3, 3), epsilon = 1e-14);
        assert_abs_diff_eq!(
            e.vectors.transpose() * &e.vectors,
            DMatrix::identity(3, 3),
            epsilon = 1e-14
        );
    }

    #[test]
    fn ar1_eigenvalues_two_decimals() {
        let e = sym_eigen(&ar1_3()).unwrap();
        for (got, want) in e.values.iter().zip([1.84, 0.75, 0.41]) {
            assert!((got - want).abs() < 0.005, "{got} vs {want}");
        }
    }

    #[test]
    fn eigen_sign_convention() {
        let e = sym_eigen(&ar1_3()).unwrap();
        for col in e.vectors.column_iter() {
            let lead = col.iamax();
            assert!(col[lead] > 0.0);
            assert_abs_diff_eq!(col.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_asymmetric_and_nonfinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0000001, 1.0]);
        assert!(matches!(
            SymMatrix::new(m),
            Err(Error::ContractViolation(_))
        ));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert!(matches!(SymMatrix::new(m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn solve_identity_and_two_by_two() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 3.5, 0.0, 7.0, 1.25]);
        let s = spd_solve(&SymMatrix::identity(3), &b, "I").unwrap();
        assert_eq!(s.x, b);
        assert!(!s.jittered);

        let a = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let s = spd_solve(&a, &DMatrix::from_element(2, 1, 1.0), "A").unwrap();
        assert_abs_diff_eq!(s.x[(0, 0)], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.x[(1, 0)], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn compound_symmetry_plus_ridge_residual() {
        // gram of the three-site grouping design, plus 0.1 I
        let cs = SymMatrix::from_upper_fn(6, |i, j| if i / 2 == j / 2 { 1.0 } else { 0.0 });
        let a = cs.scaled_plus_diagonal(1.0, 0.1);
        let b = DMatrix::from_element(6, 1, 1.0);
        let x = spd_solve(&a, &b, "cs").unwrap().x;
        let resid = (a.matrix() * &x - &b).norm();
        assert!(resid < 1e-8);
    }

    #[test]
    fn duplicate_rows_need_jitter() {
        // rank-one PSD matrix: plain Cholesky fails, jitter rescues it
        let a = SymMatrix::from_upper_fn(3, |_, _| 1.0);
        let f = SpdFactor::new(&a, "dup").unwrap();
        assert!(f.jittered());
    }

    #[test]
    fn singular_after_jitter_names_matrix() {
        let a = SymMatrix::from_upper_fn(2, |i, j| if i == j { -1.0 } else { 0.0 });
        match spd_solve(&a, &DMatrix::zeros(2, 1), "R*") {
            Err(Error::Singular(name)) => assert_eq!(name, "R*"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stream_determinism_and_seed_sensitivity() {
        let mut a = RandomStream::new(42);
        let mut b = RandomStream::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_gaussian().to_bits(), b.next_gaussian().to_bits());
        }
        let mut c = RandomStream::new(43);
        assert_ne!(RandomStream::new(42).next_gaussian(), c.next_gaussian());
    }

    #[test]
    fn stream_moments() {
        let mut s = RandomStream::new(42);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| s.next_gaussian()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn stream_resume() {
        let mut s = RandomStream::new(7);
        for _ in 0..37 {
            s.next_gaussian();
        }
        s.next_gamma(2.5);
        let (seed, pos) = (s.seed(), s.position());
        let ahead: Vec<u64> = (0..20).map(|_| s.next_gaussian().to_bits()).collect();
        let mut r = RandomStream::resume(seed, pos);
        let again: Vec<u64> = (0..20).map(|_| r.next_gaussian().to_bits()).collect();
        assert_eq!(ahead, again);
    }
}
