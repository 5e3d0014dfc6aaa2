//! Bounded nonlinear least squares via Levenberg-Marquardt with a
//! finite-difference jacobian.
//!
//! The damping schedule is the classic one: λ starts at 1e-3, divides by 10 on
//! an accepted step and multiplies by 10 on a rejected one. Bounds are applied
//! by projecting each candidate step back into the box. The engine is fully
//! deterministic: identical problems produce identical results.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid fit problem: {0}")]
    InvalidProblem(String),
    #[error("residual is non-finite at the initial point")]
    BadStart,
    #[error("jacobian has a non-finite entry in column {0}")]
    JacobianNonFinite(usize),
    #[error("damped normal equations could not be solved")]
    LinearSolve,
}

/// Termination status of an LM run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    /// One of the cost / gradient / step tolerances was met.
    Converged,
    /// Iteration budget exhausted.
    MaxIter,
    /// Damping grew without an acceptable step.
    Stalled,
}

/// A bounded least-squares problem: residual function, start point, box
/// bounds, and termination tolerances.
pub struct FitProblem<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    residual: F,
    initial: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    max_iterations: usize,
    /// Relative cost-decrease tolerance.
    cost_tol: f64,
    /// Max-abs gradient tolerance.
    grad_tol: f64,
    /// Step-norm tolerance.
    step_tol: f64,
    /// Relative finite-difference step for the jacobian.
    fd_step: f64,
}

impl<F> FitProblem<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    pub fn new(residual: F, initial: Vec<f64>) -> Self {
        let n = initial.len();
        FitProblem {
            residual,
            initial,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            max_iterations: 500,
            cost_tol: 1e-10,
            grad_tol: 1e-8,
            step_tol: 1e-10,
            fd_step: 1e-6,
        }
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_tolerances(mut self, cost_tol: f64, grad_tol: f64, step_tol: f64) -> Self {
        self.cost_tol = cost_tol;
        self.grad_tol = grad_tol;
        self.step_tol = step_tol;
        self
    }

    pub fn with_fd_step(mut self, fd_step: f64) -> Self {
        self.fd_step = fd_step;
        self
    }

    fn validate(&self) -> Result<(), FitError> {
        let n = self.initial.len();
        if n == 0 {
            return Err(FitError::InvalidProblem("no parameters".into()));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(FitError::InvalidProblem(
                "bounds length does not match parameter count".into(),
            ));
        }
        for i in 0..n {
            if self.lower[i] > self.upper[i] {
                return Err(FitError::InvalidProblem(format!(
                    "bounds for parameter {i} are not ordered"
                )));
            }
            if self.initial[i] < self.lower[i] || self.initial[i] > self.upper[i] {
                return Err(FitError::InvalidProblem(format!(
                    "initial parameter {i} lies outside its bounds"
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of a fit: best parameters, final cost ½‖r‖², a jacobian-based
/// one-sigma uncertainty proxy per parameter, and convergence metadata.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub cost: f64,
    pub uncertainties: Vec<f64>,
    pub iterations: usize,
    pub convergence: Convergence,
}

fn project(p: &mut [f64], lower: &[f64], upper: &[f64]) {
    for i in 0..p.len() {
        p[i] = p[i].clamp(lower[i], upper[i]);
    }
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Central-difference jacobian of `residual` at `params` with a per-parameter
/// relative step `step_scale`. When a probe point would leave the box given in
/// `bounds`, that column falls back to a one-sided difference.
pub fn finite_difference_jacobian<F>(
    residual: &F,
    params: &[f64],
    step_scale: f64,
    bounds: Option<(&[f64], &[f64])>,
) -> Result<DMatrix<f64>, FitError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let base = residual(params);
    let m = base.len();
    let n = params.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = params.to_vec();
    for j in 0..n {
        let h = step_scale * params[j].abs().max(1.0);
        let (lo, hi) = match bounds {
            Some((l, u)) => (l[j], u[j]),
            None => (f64::NEG_INFINITY, f64::INFINITY),
        };
        let up_ok = params[j] + h <= hi;
        let down_ok = params[j] - h >= lo;
        let col: Vec<f64> = if up_ok && down_ok {
            probe[j] = params[j] + h;
            let r_plus = residual(&probe);
            probe[j] = params[j] - h;
            let r_minus = residual(&probe);
            probe[j] = params[j];
            r_plus
                .iter()
                .zip(&r_minus)
                .map(|(p, m)| (p - m) / (2.0 * h))
                .collect()
        } else if up_ok {
            probe[j] = params[j] + h;
            let r_plus = residual(&probe);
            probe[j] = params[j];
            r_plus.iter().zip(&base).map(|(p, b)| (p - b) / h).collect()
        } else {
            probe[j] = params[j] - h;
            let r_minus = residual(&probe);
            probe[j] = params[j];
            base.iter().zip(&r_minus).map(|(b, m)| (b - m) / h).collect()
        };
        if col.iter().any(|v| !v.is_finite()) {
            return Err(FitError::JacobianNonFinite(j));
        }
        for i in 0..m {
            jac[(i, j)] = col[i];
        }
    }
    Ok(jac)
}

/// Runs bounded Levenberg-Marquardt on `problem`. Accepted steps never
/// increase the cost.
pub fn least_squares<F>(problem: FitProblem<F>) -> Result<FitResult, FitError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    problem.validate()?;
    let n = problem.initial.len();
    let residual = &problem.residual;

    let mut params = problem.initial.clone();
    let mut r = residual(&params);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(FitError::BadStart);
    }
    if r.len() < n {
        return Err(FitError::InvalidProblem(format!(
            "residual dimension {} below parameter dimension {n}",
            r.len()
        )));
    }
    let mut cost = cost_of(&r);

    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut convergence = Convergence::MaxIter;

    if cost == 0.0 {
        convergence = Convergence::Converged;
    } else {
        'outer: while iterations < problem.max_iterations {
            iterations += 1;
            let jac = finite_difference_jacobian(
                residual,
                &params,
                problem.fd_step,
                Some((&problem.lower, &problem.upper)),
            )?;
            let rv = DVector::from_column_slice(&r);
            let grad = jac.transpose() * &rv;
            if grad.amax() < problem.grad_tol {
                convergence = Convergence::Converged;
                break;
            }
            let jtj = jac.transpose() * &jac;

            // Inner damping loop: grow λ until a step reduces the cost.
            loop {
                let mut damped = jtj.clone();
                for i in 0..n {
                    damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
                }
                let step = damped
                    .clone()
                    .cholesky()
                    .map(|ch| ch.solve(&(-&grad)))
                    .or_else(|| damped.lu().solve(&(-&grad)))
                    .ok_or(FitError::LinearSolve)?;

                let mut candidate = params.clone();
                for i in 0..n {
                    candidate[i] += step[i];
                }
                project(&mut candidate, &problem.lower, &problem.upper);
                let r_new = residual(&candidate);
                let finite = r_new.iter().all(|v| v.is_finite());
                let cost_new = if finite { cost_of(&r_new) } else { f64::INFINITY };

                if cost_new < cost {
                    let decrease = (cost - cost_new) / cost.max(f64::MIN_POSITIVE);
                    let step_norm = params
                        .iter()
                        .zip(&candidate)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    let param_norm = params.iter().map(|v| v * v).sum::<f64>().sqrt();
                    params = candidate;
                    r = r_new;
                    cost = cost_new;
                    lambda = (lambda / 10.0).max(1e-14);
                    // A barely-decreasing step under heavy damping is a forced
                    // crawl, not optimality: only trust the cost and step
                    // tests once λ has relaxed back to its starting level.
                    if lambda <= 1e-3
                        && (decrease < problem.cost_tol
                            || step_norm < problem.step_tol * (1.0 + param_norm))
                    {
                        convergence = Convergence::Converged;
                        break 'outer;
                    }
                    break;
                }

                lambda *= 10.0;
                if lambda > 1e12 {
                    convergence = Convergence::Stalled;
                    break 'outer;
                }
            }
        }
    }

    let uncertainties = uncertainty_proxy(residual, &params, problem.fd_step, cost, n)
        .unwrap_or_else(|| vec![f64::NAN; n]);
    Ok(FitResult {
        params,
        cost,
        uncertainties,
        iterations,
        convergence,
    })
}

/// One-sigma parameter uncertainties from the final jacobian:
/// sqrt(diag[(JᵀJ)⁻¹] · 2·cost/(m − n)).
fn uncertainty_proxy<F>(
    residual: &F,
    params: &[f64],
    fd_step: f64,
    cost: f64,
    n: usize,
) -> Option<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let jac = finite_difference_jacobian(residual, params, fd_step, None).ok()?;
    let m = jac.nrows();
    let jtj = jac.transpose() * &jac;
    let inv = jtj.try_inverse()?;
    let dof = (m.saturating_sub(n)).max(1) as f64;
    let variance = 2.0 * cost / dof;
    Some(
        (0..n)
            .map(|i| (inv[(i, i)].max(0.0) * variance).sqrt())
            .collect(),
    )
}
