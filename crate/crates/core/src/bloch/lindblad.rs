//! Lindblad master equation: superoperator assembly, null-space steady
//! state, and a fixed-step RK4 propagator with a step-halving check.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::DensityMatrix;
use crate::error::{Error, Result};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);
const HALF: Complex64 = Complex64::new(0.5, 0.0);

/// Condition estimates above this are reported as singular.
const MAX_CONDITION: f64 = 1e13;
/// Steps per fastest rate, i.e. step <= 1 / (50 * rate).
const STEPS_PER_RATE: f64 = 50.0;
/// Accepted max-abs deviation between a run and its half-step rerun.
const HALVING_TOL: f64 = 1e-10;
const MAX_HALVINGS: u32 = 8;

/// A collapse operator of the form sqrt(rate) * |ground><v| for some
/// vector v, i.e. every quantum jump resets the atom to one ground level.
#[derive(Debug, Clone)]
pub struct JumpOperator {
    pub op: DMatrix<Complex64>,
    pub reset_level: usize,
}

/// Hamiltonian (rotating frame, rad/us) plus collapse operators.
#[derive(Debug, Clone)]
pub struct LindbladSystem {
    hamiltonian: DMatrix<Complex64>,
    jumps: Vec<JumpOperator>,
}

impl LindbladSystem {
    pub fn new(hamiltonian: DMatrix<Complex64>, jumps: Vec<JumpOperator>) -> Self {
        let n = hamiltonian.nrows();
        assert!(hamiltonian.is_square());
        assert!(jumps.iter().all(|j| j.op.nrows() == n && j.op.ncols() == n));
        Self { hamiltonian, jumps }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &DMatrix<Complex64> {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[JumpOperator] {
        &self.jumps
    }

    /// Sum_c C_c^dagger C_c; its expectation is the photon emission rate.
    pub fn emission_operator(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        self.jumps
            .iter()
            .fold(DMatrix::zeros(n, n), |acc, j| acc + j.op.adjoint() * &j.op)
    }

    /// H - (i/2) Sum_c C_c^dagger C_c.
    pub fn effective_hamiltonian(&self) -> DMatrix<Complex64> {
        &self.hamiltonian - self.emission_operator() * (I * 0.5)
    }

    /// Photon emission rate (1/us) in state rho.
    pub fn emission_rate(&self, rho: &DensityMatrix) -> f64 {
        rho.expect(&self.emission_operator()).re
    }

    /// Superoperator acting on column-major vec(rho).
    pub fn superoperator(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let id = DMatrix::<Complex64>::identity(n, n);
        let h = &self.hamiltonian;
        let mut l = (id.kronecker(h) - h.transpose().kronecker(&id)) * (-I);
        for j in &self.jumps {
            let c = &j.op;
            let cdc = c.adjoint() * c;
            l += c.conjugate().kronecker(c);
            l -= id.kronecker(&cdc) * HALF;
            l -= cdc.transpose().kronecker(&id) * HALF;
        }
        l
    }

    /// Largest dynamical rate, used to bound the integration step.
    pub fn rate_scale(&self) -> f64 {
        let n = self.dim();
        let mut s = 0.0f64;
        for i in 0..n {
            for k in 0..n {
                let h = self.hamiltonian[(i, k)].norm();
                s = s.max(if i == k { h } else { 2.0 * h });
            }
        }
        let emission = self.emission_operator();
        let decay = emission.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        s.max(decay).max(f64::MIN_POSITIVE)
    }

    /// Stationary state: null vector of the superoperator, with the trace
    /// condition replacing the first (redundant) equation.
    pub fn steady_state(&self) -> Result<DensityMatrix> {
        let n = self.dim();
        let mut m = self.superoperator();
        for k in 0..n * n {
            m[(0, k)] = Complex64::new(0.0, 0.0);
        }
        for i in 0..n {
            m[(0, i * n + i)] = ONE;
        }
        let norm1 = one_norm(&m);
        let inv = m.clone().try_inverse().ok_or(Error::Singular {
            condition: f64::INFINITY,
        })?;
        let condition = norm1 * one_norm(&inv);
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(Error::Singular { condition });
        }
        let lu = m.lu();
        let mut rhs = DVector::zeros(n * n);
        rhs[0] = ONE;
        let x = lu.solve(&rhs).ok_or(Error::Singular { condition })?;
        Ok(DensityMatrix::from_vec(n, &x))
    }

    /// RK4 propagator for one step of length `h` (us).
    pub fn rk4_propagator(&self, h: f64) -> Propagator {
        Propagator::rk4(&self.superoperator(), self.dim(), h)
    }

    /// Integrates from `initial` (at t = 0) and returns the state at every
    /// time in `times` (us, ascending, starting at 0).
    pub fn evolve(&self, initial: &DensityMatrix, times: &[f64]) -> Result<Vec<DensityMatrix>> {
        if initial.dim() != self.dim() {
            return Err(Error::Data(format!(
                "initial state has dimension {}, system has {}",
                initial.dim(),
                self.dim()
            )));
        }
        if times.first().is_some_and(|&t| t != 0.0) || times.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::Data("time grid must ascend from 0".into()));
        }
        let superop = self.superoperator();
        let h_max = 1.0 / (STEPS_PER_RATE * self.rate_scale());
        let mut refine = 1usize;
        let mut coarse = integrate(&superop, self.dim(), initial, times, h_max, refine);
        let mut deviation = f64::INFINITY;
        for halvings in 1..=MAX_HALVINGS {
            refine *= 2;
            let fine = integrate(&superop, self.dim(), initial, times, h_max, refine);
            deviation = coarse
                .iter()
                .zip(&fine)
                .map(|(a, b)| max_abs_diff(a, b))
                .fold(0.0, f64::max);
            if deviation <= HALVING_TOL {
                return Ok(fine);
            }
            if halvings == MAX_HALVINGS {
                break;
            }
            coarse = fine;
        }
        Err(Error::Integration {
            deviation,
            halvings: MAX_HALVINGS,
            step: h_max / refine as f64,
        })
    }
}

/// Single-step RK4 map for the linear ODE d vec(rho)/dt = L vec(rho):
/// P = I + hL + (hL)^2/2 + (hL)^3/6 + (hL)^4/24, which is exactly the
/// classical four-stage RK4 update for an autonomous linear system.
#[derive(Debug, Clone)]
pub struct Propagator {
    dim: usize,
    step: f64,
    matrix: DMatrix<Complex64>,
}

impl Propagator {
    fn rk4(superop: &DMatrix<Complex64>, dim: usize, h: f64) -> Self {
        let a = superop * Complex64::new(h, 0.0);
        let id = DMatrix::<Complex64>::identity(a.nrows(), a.ncols());
        let a2 = &a * &a;
        let a3 = &a2 * &a;
        let a4 = &a3 * &a;
        let matrix = id + &a + a2 * HALF + a3 * Complex64::new(1.0 / 6.0, 0.0) + a4 * Complex64::new(1.0 / 24.0, 0.0);
        Self { dim, step: h, matrix }
    }

    pub fn step_length(&self) -> f64 {
        self.step
    }

    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        DensityMatrix::from_vec(self.dim, &(&self.matrix * rho.to_vec()))
    }

    pub(crate) fn apply_vec(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.matrix * v
    }
}

fn integrate(
    superop: &DMatrix<Complex64>,
    dim: usize,
    initial: &DensityMatrix,
    times: &[f64],
    h_max: f64,
    refine: usize,
) -> Vec<DensityMatrix> {
    let mut out = Vec::with_capacity(times.len());
    let mut state = initial.to_vec();
    let mut cached: Option<Propagator> = None;
    let mut t_prev = 0.0;
    for &t in times {
        let dt = t - t_prev;
        if dt > 0.0 {
            let n_steps = ((dt / h_max).ceil() as usize).max(1) * refine;
            let h = dt / n_steps as f64;
            let prop = match cached.take() {
                Some(p) if p.step.to_bits() == h.to_bits() => p,
                _ => Propagator::rk4(superop, dim, h),
            };
            for _ in 0..n_steps {
                state = prop.apply_vec(&state);
            }
            cached = Some(prop);
        }
        out.push(DensityMatrix::from_vec(dim, &state));
        t_prev = t;
    }
    out
}

fn max_abs_diff(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    a.matrix()
        .iter()
        .zip(b.matrix().iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}
