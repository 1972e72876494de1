use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Density matrix of an n-level atom. Basis ordering is set by the model
/// that produced it (ground levels first).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn from_matrix(rho: DMatrix<Complex64>) -> Self {
        assert!(rho.is_square(), "density matrix must be square");
        Self { rho }
    }

    /// Pure basis state |level><level|.
    pub fn basis(dim: usize, level: usize) -> Self {
        let mut rho = DMatrix::zeros(dim, dim);
        rho[(level, level)] = Complex64::new(1.0, 0.0);
        Self { rho }
    }

    /// |psi><psi| for a normalized state vector.
    pub fn pure(psi: &DVector<Complex64>) -> Self {
        Self {
            rho: psi * psi.adjoint(),
        }
    }

    /// Column-major vectorization, matching the superoperator layout.
    pub(crate) fn from_vec(dim: usize, v: &DVector<Complex64>) -> Self {
        Self {
            rho: DMatrix::from_column_slice(dim, dim, v.as_slice()),
        }
    }

    pub(crate) fn to_vec(&self) -> DVector<Complex64> {
        DVector::from_column_slice(self.rho.as_slice())
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn population(&self, level: usize) -> f64 {
        self.rho[(level, level)].re
    }

    pub fn coherence(&self, row: usize, col: usize) -> Complex64 {
        self.rho[(row, col)]
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// max |rho - rho^dagger|.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Expectation value Tr(op * rho).
    pub fn expect(&self, op: &DMatrix<Complex64>) -> Complex64 {
        (op * &self.rho).trace()
    }
}
