//! Levenberg-Marquardt with forward-difference Jacobians, plus a separable
//! front end that eliminates parameters entering the model linearly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_ITER: usize = 300;
const FTOL: f64 = 1e-15;
const XTOL: f64 = 1e-13;
const GTOL: f64 = 1e-15;
const FD_STEP: f64 = 1e-6;
const LAMBDA_MAX: f64 = 1e16;

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub x: Vec<f64>,
    /// Sum of squared residuals.
    pub ssr: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn ssr(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn fd_step(x: f64, scale: f64) -> f64 {
    FD_STEP * x.abs().max(scale)
}

/// Forward-difference Jacobian of `f` at `x`; `None` if any probe fails.
pub(crate) fn jacobian<F>(f: &F, x: &[f64], r0: &[f64], scales: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut j = DMatrix::zeros(r0.len(), x.len());
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        let h = fd_step(x[k], scales[k]);
        probe[k] = x[k] + h;
        let r = f(&probe)?;
        probe[k] = x[k];
        for i in 0..r0.len() {
            j[(i, k)] = (r[i] - r0[i]) / h;
        }
    }
    Some(j)
}

/// Minimizes ||f(x)||^2. `scales` sets the finite-difference step for
/// parameters near zero. Evaluation failures reject the trial step.
pub(crate) fn minimize<F>(f: F, x0: &[f64], scales: &[f64]) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = f(&x).ok_or_else(|| Error::DegenerateFit("model fails at the initial guess".into()))?;
    let mut cost = ssr(&r);
    if !cost.is_finite() {
        return Err(Error::DegenerateFit("non-finite residual at the initial guess".into()));
    }
    let mut lambda = 1e-3;
    let mut diag = vec![0.0f64; n];
    let mut iterations = 0;
    let mut converged = cost == 0.0;
    while !converged && iterations < MAX_ITER {
        iterations += 1;
        let Some(j) = jacobian(&f, &x, &r, scales) else {
            break;
        };
        let jt = j.transpose();
        let a = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);
        for k in 0..n {
            diag[k] = diag[k].max(a[(k, k)]).max(1e-300);
        }
        if g.amax() <= GTOL * cost.max(f64::MIN_POSITIVE).sqrt() * a.diagonal().amax().sqrt() {
            converged = true;
            break;
        }
        loop {
            let mut m = a.clone();
            for k in 0..n {
                m[(k, k)] += lambda * diag[k];
            }
            let step = m.cholesky().map(|c| c.solve(&(-&g)));
            let accepted = step.and_then(|dx| {
                let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + b).collect();
                let rt = f(&trial)?;
                let ct = ssr(&rt);
                (ct.is_finite() && ct < cost).then_some((trial, rt, ct, dx))
            });
            match accepted {
                Some((trial, rt, ct, dx)) => {
                    let drop = cost - ct;
                    let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    x = trial;
                    r = rt;
                    let old = cost;
                    cost = ct;
                    lambda = (lambda / 3.0).max(1e-12);
                    if cost == 0.0 || drop <= FTOL * old || dx.norm() <= XTOL * (xnorm + XTOL) {
                        converged = true;
                    }
                    break;
                }
                None => {
                    lambda *= 4.0;
                    if lambda > LAMBDA_MAX {
                        // no descent left at working precision
                        converged = true;
                        break;
                    }
                }
            }
        }
    }
    Ok(LmOutcome {
        x,
        ssr: cost,
        iterations,
        converged,
    })
}

/// Weighted linear least squares: coefficients of `cols` best matching `y`.
pub(crate) fn linear_coefficients(cols: &[Vec<f64>], y: &[f64], sqrt_w: &[f64]) -> Option<Vec<f64>> {
    let m = y.len();
    let p = cols.len();
    let a = DMatrix::from_fn(m, p, |i, k| cols[k][i] * sqrt_w[i]);
    let b = DVector::from_iterator(m, y.iter().zip(sqrt_w).map(|(v, s)| v * s));
    let c = a.svd(true, true).solve(&b, 1e-13).ok()?;
    c.iter().all(|v| v.is_finite()).then(|| c.iter().copied().collect())
}

/// Model `sum_k c_k col_k(x)` with nonlinear `x` and linear `c`.
pub(crate) struct Separable<'a, C>
where
    C: Fn(&[f64]) -> Option<Vec<Vec<f64>>>,
{
    pub y: &'a [f64],
    pub sqrt_w: Vec<f64>,
    pub columns: C,
}

#[derive(Debug, Clone)]
pub(crate) struct SeparableFit {
    pub nonlinear: Vec<f64>,
    pub linear: Vec<f64>,
    pub ssr: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Covariance of (nonlinear, linear) without any residual scaling.
    pub covariance: DMatrix<f64>,
}

impl<'a, C> Separable<'a, C>
where
    C: Fn(&[f64]) -> Option<Vec<Vec<f64>>>,
{
    fn reduced(&self, x: &[f64]) -> Option<Vec<f64>> {
        let cols = (self.columns)(x)?;
        let c = linear_coefficients(&cols, self.y, &self.sqrt_w)?;
        Some(self.residual(&cols, &c))
    }

    fn residual(&self, cols: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
        (0..self.y.len())
            .map(|i| {
                let model: f64 = cols.iter().zip(c).map(|(col, ck)| ck * col[i]).sum();
                self.sqrt_w[i] * (self.y[i] - model)
            })
            .collect()
    }

    /// Reduced cost at `x`, for coarse scans over starting points.
    pub fn cost(&self, x: &[f64]) -> f64 {
        self.reduced(x).map(|r| ssr(&r)).unwrap_or(f64::INFINITY)
    }

    /// Best of several local fits started from `starts`.
    pub fn fit(&self, starts: &[Vec<f64>], scales: &[f64]) -> Result<SeparableFit> {
        let mut best: Option<LmOutcome> = None;
        let mut last_err = None;
        for x0 in starts {
            match minimize(|x| self.reduced(x), x0, scales) {
                Ok(out) => {
                    if best.as_ref().is_none_or(|b| out.ssr < b.ssr) {
                        best = Some(out);
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        let out = best.ok_or_else(|| last_err.unwrap_or(Error::DegenerateFit("no starting point".into())))?;
        let cols = (self.columns)(&out.x)
            .ok_or_else(|| Error::DegenerateFit("model fails at the optimum".into()))?;
        let linear = linear_coefficients(&cols, self.y, &self.sqrt_w)
            .ok_or_else(|| Error::DegenerateFit("linear sub-problem is singular".into()))?;
        let covariance = self.covariance(&out.x, &linear, scales)?;
        Ok(SeparableFit {
            nonlinear: out.x,
            linear,
            ssr: out.ssr,
            iterations: out.iterations,
            converged: out.converged,
            covariance,
        })
    }

    /// (J^T J)^+ of the full weighted residual in all parameters.
    fn covariance(&self, x: &[f64], c: &[f64], scales: &[f64]) -> Result<DMatrix<f64>> {
        let fail = || Error::DegenerateFit("model fails near the optimum".into());
        let nx = x.len();
        let full = |p: &[f64]| -> Option<Vec<f64>> {
            let cols = (self.columns)(&p[..nx])?;
            Some(self.residual(&cols, &p[nx..]))
        };
        let mut p = x.to_vec();
        p.extend_from_slice(c);
        let mut all_scales = scales.to_vec();
        let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        all_scales.extend(std::iter::repeat_n(cmax, c.len()));
        let r0 = full(&p).ok_or_else(fail)?;
        let j = jacobian(&full, &p, &r0, &all_scales).ok_or_else(fail)?;
        let jtj = j.transpose() * &j;
        let eps = 1e-14 * jtj.amax().max(f64::MIN_POSITIVE);
        jtj.pseudo_inverse(eps)
            .map_err(|e| Error::DegenerateFit(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| Some(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
        let out = minimize(f, &[-1.2, 1.0], &[1.0, 1.0]).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-9 && (out.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn separable_exponential_closure() {
        let t: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| 5.0 * (-t / 7.0).exp() + 0.5).collect();
        let s = Separable {
            y: &y,
            sqrt_w: vec![1.0; t.len()],
            columns: |x: &[f64]| Some(vec![t.iter().map(|t| (-t / x[0]).exp()).collect(), vec![1.0; t.len()]]),
        };
        let fit = s.fit(&[vec![3.0]], &[1.0]).unwrap();
        assert!((fit.nonlinear[0] - 7.0).abs() < 1e-9);
        assert!((fit.linear[0] - 5.0).abs() < 1e-9 && (fit.linear[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn weighted_linear_solve() {
        let cols = vec![vec![1.0, 2.0, 3.0], vec![1.0, 1.0, 1.0]];
        let c = linear_coefficients(&cols, &[3.0, 5.0, 7.0], &[1.0, 2.0, 0.5]).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] - 1.0).abs() < 1e-12);
    }
}
