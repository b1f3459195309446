//! Box-constrained Levenberg-Marquardt on a dense residual vector.
//!
//! The damping update follows Nielsen's gain-ratio rule; steps are projected
//! onto the box and variables pinned at a bound with the gradient pushing
//! outward are frozen for that iteration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Why the solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Every free gradient component is orthogonal to the residual within tolerance.
    GradientTolerance,
    /// Step length fell below the relative step tolerance.
    StepTolerance,
    /// Relative decrease of the objective fell below the cost tolerance.
    CostTolerance,
    /// The residual vanished exactly.
    ZeroResidual,
    MaxIterations,
}

impl Termination {
    pub fn is_converged(self) -> bool {
        !matches!(self, Termination::MaxIterations)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SolverSettings {
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub cost_tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct SolverOutcome {
    pub x: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub gradient_norm: f64,
}

/// Residuals and Jacobian (rows = residuals) at `x`. Returns `None` when
/// the point cannot be evaluated.
pub(crate) trait Residuals {
    fn evaluate(&self, x: &[f64], jacobian: bool) -> Option<(DVector<f64>, Option<DMatrix<f64>>)>;
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Largest `|g_j| / (|J_j| |r|)` over free variables.
fn gradient_cosine(g: &DVector<f64>, jac: &DMatrix<f64>, r_norm: f64, free: &[bool]) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..g.len() {
        if !free[j] {
            continue;
        }
        let col = jac.column(j).norm();
        if col > 0.0 && r_norm > 0.0 {
            worst = worst.max(g[j].abs() / (col * r_norm));
        }
    }
    worst
}

pub(crate) fn minimize<P: Residuals>(
    problem: &P,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    settings: SolverSettings,
) -> Option<SolverOutcome> {
    let n = start.len();
    let mut x = start.to_vec();
    project(&mut x, lower, upper);
    let (mut r, jac) = problem.evaluate(&x, true)?;
    let mut jac = jac?;
    let mut cost = r.norm_squared();

    let mut scale = vec![0.0f64; n];
    // Damping is relative to the diagonal scaling below.
    let mut lambda = 1e-3;
    let mut nu = 2.0;
    let mut gradient_norm = f64::INFINITY;

    for iteration in 0..settings.max_iterations {
        if cost == 0.0 {
            return Some(SolverOutcome { x, cost, iterations: iteration, termination: Termination::ZeroResidual, gradient_norm: 0.0 });
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let free: Vec<bool> = (0..n)
            .map(|j| !((x[j] <= lower[j] && g[j] > 0.0) || (x[j] >= upper[j] && g[j] < 0.0)))
            .collect();
        gradient_norm = gradient_cosine(&g, &jac, cost.sqrt(), &free);
        if gradient_norm <= settings.gradient_tolerance {
            return Some(SolverOutcome { x, cost, iterations: iteration, termination: Termination::GradientTolerance, gradient_norm });
        }
        let max_diag = (0..n).map(|j| jtj[(j, j)]).fold(0.0, f64::max);
        for j in 0..n {
            scale[j] = scale[j].max(jtj[(j, j)]).max(1e-20 * max_diag).max(1e-300);
        }

        let idx: Vec<usize> = (0..n).filter(|&j| free[j]).collect();
        if idx.is_empty() {
            return Some(SolverOutcome { x, cost, iterations: iteration, termination: Termination::GradientTolerance, gradient_norm: 0.0 });
        }

        // Inner loop: raise damping until a step is accepted.
        loop {
            let m = idx.len();
            let mut a = DMatrix::<f64>::zeros(m, m);
            let mut b = DVector::<f64>::zeros(m);
            for (ai, &i) in idx.iter().enumerate() {
                b[ai] = -g[i];
                for (aj, &j) in idx.iter().enumerate() {
                    a[(ai, aj)] = jtj[(i, j)];
                }
                a[(ai, ai)] += lambda * scale[i];
            }
            let delta = match a.cholesky() {
                Some(chol) => chol.solve(&b),
                None => {
                    lambda *= nu;
                    nu *= 2.0;
                    if !lambda.is_finite() || lambda > 1e300 {
                        return Some(SolverOutcome { x, cost, iterations: iteration, termination: Termination::StepTolerance, gradient_norm });
                    }
                    continue;
                }
            };

            let mut trial = x.clone();
            for (ai, &i) in idx.iter().enumerate() {
                trial[i] += delta[ai];
            }
            project(&mut trial, lower, upper);
            let step = DVector::from_iterator(n, trial.iter().zip(&x).map(|(t, v)| t - v));
            // Norms in the Marquardt scaling so parameters of very different
            // magnitude are judged alike.
            let scaled_norm = |v: &mut dyn Iterator<Item = f64>| v.zip(&scale).map(|(a, d)| d * a * a).sum::<f64>().sqrt();
            let x_norm = scaled_norm(&mut x.iter().copied());
            let step_norm = scaled_norm(&mut step.iter().copied());
            if step_norm <= settings.step_tolerance * (x_norm + settings.step_tolerance) {
                return Some(SolverOutcome { x, cost, iterations: iteration + 1, termination: Termination::StepTolerance, gradient_norm });
            }

            // Linear model: |r + J s|^2 = cost + 2 g.s + s'J'Js
            let predicted = -(2.0 * g.dot(&step) + (&jtj * &step).dot(&step));
            let evaluated = problem.evaluate(&trial, false).map(|(r_new, _)| r_new);
            let accepted = match evaluated {
                Some(r_new) => {
                    let new_cost = r_new.norm_squared();
                    let actual = cost - new_cost;
                    if predicted > 0.0 && actual > 0.0 && new_cost.is_finite() {
                        let rho = actual / predicted;
                        lambda *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
                        nu = 2.0;
                        let old_cost = cost;
                        x = trial;
                        let (r_eval, jac_eval) = problem.evaluate(&x, true)?;
                        r = r_eval;
                        jac = jac_eval?;
                        cost = r.norm_squared();
                        if actual <= settings.cost_tolerance * old_cost && predicted <= settings.cost_tolerance * old_cost {
                            return Some(SolverOutcome { x, cost, iterations: iteration + 1, termination: Termination::CostTolerance, gradient_norm });
                        }
                        true
                    } else {
                        false
                    }
                }
                None => false,
            };
            if accepted {
                break;
            }
            lambda *= nu;
            nu *= 2.0;
            if !lambda.is_finite() || lambda > 1e300 {
                return Some(SolverOutcome { x, cost, iterations: iteration + 1, termination: Termination::StepTolerance, gradient_norm });
            }
        }
    }
    Some(SolverOutcome { x, cost, iterations: settings.max_iterations, termination: Termination::MaxIterations, gradient_norm })
}
