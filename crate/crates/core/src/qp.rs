//! Quadratic programming over the probability simplex.
//!
//! The descent direction of the worst-group objective comes from
//!
//! ```text
//!     minimize   1/2 λ' Q λ − c' λ
//!     subject to Σ λ_i = 1,  λ ≥ 0
//! ```
//!
//! with `Q = G G'` (a Gram matrix, hence positive semidefinite) and `c` the
//! per-group losses. The dimension equals the number of groups, independent
//! of the parameter count, so a dense primal active-set method is exact and
//! fast: the equality stays active throughout, bound constraints enter and
//! leave the working set one at a time, and each working set change re-solves
//! the reduced KKT system by dense LU. The reduced Hessian gets a `1e-12`
//! ridge because `Q` is rank-deficient whenever there are more groups than
//! parameters. Ties (equal blocking ratios, equal multipliers) resolve to the
//! smallest index so identical inputs yield identical iterates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::GroupJacobian;

/// Ridge added to the reduced Hessian before factorization.
const RIDGE: f64 = 1e-12;

/// Components with `λ_i` above this count as support when certifying
/// optimality.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Feasibility slack accepted by [`kkt_residual`] before declaring a point
/// infeasible.
const FEAS_TOL: f64 = 1e-9;

/// Active-set changes allowed per problem, as a multiple of the dimension.
const ITERATION_CAP_FACTOR: usize = 50;

/// Dual problem data: `Q` symmetric positive semidefinite, `c` arbitrary.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexQp {
    q: DMatrix<f64>,
    c: DVector<f64>,
}

impl SimplexQp {
    /// Validates symmetry (within `1e-12` relative) and finiteness.
    pub fn new(q: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        let n = c.len();
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: q.nrows().max(q.ncols()),
            });
        }
        if q.iter().any(|v| !v.is_finite()) || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "QP data contains non-finite entries".into(),
            ));
        }
        let scale = q.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                if (q[(i, j)] - q[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Numerical(format!(
                        "QP matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { q, c })
    }

    /// Builds the dual problem `Q = G G'`, `c = f` from a group Jacobian.
    pub fn from_jacobian(jac: &GroupJacobian) -> Self {
        let q = &jac.gradients * jac.gradients.transpose();
        Self {
            q,
            c: jac.losses.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// Objective `1/2 λ'Qλ − c'λ`.
    pub fn objective(&self, lambda: &DVector<f64>) -> f64 {
        0.5 * (&self.q * lambda).dot(lambda) - self.c.dot(lambda)
    }
}

/// Certified solution of the dual problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexQpSolution {
    /// Simplex weights.
    pub lambda: Vec<f64>,
    /// Objective value at `lambda`.
    pub objective: f64,
    /// First-order optimality certificate, see [`kkt_residual`].
    pub kkt_residual: f64,
    /// Active-set changes performed.
    pub iterations: usize,
}

/// Solves the simplex QP to first-order optimality within `delta`.
///
/// Starts at the vertex with the largest `c_i` (the group with the worst
/// loss) and performs primal active-set steps until every bound multiplier
/// is nonnegative. Deterministic for fixed input.
pub fn solve_simplex_qp(problem: &SimplexQp, delta: f64) -> Result<SimplexQpSolution> {
    if delta <= 0.0 {
        return Err(Error::Config(format!(
            "gap tolerance must be positive, got {delta}"
        )));
    }
    let n = problem.dim();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if n == 1 {
        let lambda = DVector::from_element(1, 1.0);
        let objective = problem.objective(&lambda);
        return Ok(SimplexQpSolution {
            lambda: vec![1.0],
            objective,
            kkt_residual: 0.0,
            iterations: 0,
        });
    }

    let q = &problem.q;
    let c = &problem.c;
    // Tolerances must track the data magnitude with no absolute floor:
    // near a minimax optimum both Q and c shrink toward zero and a fixed
    // tolerance would accept a one-group vertex instead of balancing the
    // tied groups.
    let scale = q
        .iter()
        .chain(c.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let multiplier_tol = 1e-12 * scale;

    // start at the vertex of the worst loss; smallest index wins ties
    let start = argmax_smallest_index(c.as_slice());
    let mut lambda = DVector::zeros(n);
    lambda[start] = 1.0;
    let mut free: Vec<usize> = vec![start];

    let cap = ITERATION_CAP_FACTOR * n;
    let mut iterations = 0;
    while iterations < cap {
        iterations += 1;

        let (target, mu) = solve_reduced_kkt(q, c, &free)?;
        let step: Vec<f64> = free
            .iter()
            .enumerate()
            .map(|(idx, &i)| target[idx] - lambda[i])
            .collect();
        let step_inf = step.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let lambda_inf = free.iter().fold(0.0_f64, |m, &i| m.max(lambda[i].abs()));

        if step_inf <= 1e-14 * lambda_inf.max(1.0) {
            // stationary on the working set; examine bound multipliers
            let grad = q * &lambda - c;
            let mut release: Option<(usize, f64)> = None;
            for i in 0..n {
                if free.contains(&i) {
                    continue;
                }
                let nu = grad[i] - mu;
                if nu < -multiplier_tol && release.is_none_or(|(_, best)| nu < best) {
                    release = Some((i, nu));
                }
            }
            match release {
                None => {
                    let kkt = kkt_residual_unchecked(problem, &lambda);
                    let solution = SimplexQpSolution {
                        lambda: lambda.as_slice().to_vec(),
                        objective: problem.objective(&lambda),
                        kkt_residual: kkt,
                        iterations,
                    };
                    if kkt > delta {
                        return Err(Error::QpConvergence {
                            best: Box::new(solution),
                        });
                    }
                    return Ok(solution);
                }
                Some((i, _)) => {
                    free.push(i);
                    free.sort_unstable();
                }
            }
        } else {
            // longest feasible move toward the working-set minimizer
            let mut alpha = 1.0;
            let mut blocker: Option<usize> = None;
            for (idx, &i) in free.iter().enumerate() {
                if step[idx] < 0.0 {
                    let ratio = -lambda[i] / step[idx];
                    if ratio < alpha {
                        alpha = ratio;
                        blocker = Some(i);
                    }
                }
            }
            let alpha = alpha.max(0.0);
            for (idx, &i) in free.iter().enumerate() {
                lambda[i] += alpha * step[idx];
                if lambda[i] < 0.0 {
                    lambda[i] = 0.0;
                }
            }
            if let Some(block) = blocker {
                lambda[block] = 0.0;
                free.retain(|&i| i != block);
            }
        }
    }

    let kkt = kkt_residual_unchecked(problem, &lambda);
    Err(Error::QpConvergence {
        best: Box::new(SimplexQpSolution {
            lambda: lambda.as_slice().to_vec(),
            objective: problem.objective(&lambda),
            kkt_residual: kkt,
            iterations,
        }),
    })
}

/// Solves the equality-constrained subproblem restricted to the free set:
/// `Q_FF x − μ 1 = c_F`, `1' x = 1`. Returns the free components and the
/// equality multiplier μ.
fn solve_reduced_kkt(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    free: &[usize],
) -> Result<(Vec<f64>, f64)> {
    let k = free.len();
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            kkt[(a, b)] = q[(i, j)];
        }
        kkt[(a, a)] += RIDGE;
        kkt[(a, k)] = -1.0;
        kkt[(k, a)] = 1.0;
        rhs[a] = c[i];
    }
    rhs[k] = 1.0;
    let solved = kkt
        .clone()
        .lu()
        .solve(&rhs)
        .or_else(|| kkt.full_piv_lu().solve(&rhs))
        .ok_or_else(|| Error::Numerical("singular reduced KKT system".into()))?;
    let x = solved.as_slice()[..k].to_vec();
    let mu = solved[k];
    if x.iter().any(|v| !v.is_finite()) || !mu.is_finite() {
        return Err(Error::Numerical(
            "reduced KKT solve produced non-finite values".into(),
        ));
    }
    Ok((x, mu))
}

fn argmax_smallest_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// First-order optimality certificate for a feasible `lambda`.
///
/// With `g = Qλ − c` and `ν = min_i g_i`, the residual is the largest of
/// `g_i − ν` over the support (`λ_i > 1e-12`) and the feasibility violations
/// `|Σλ − 1|` and `max(0, −min λ)`. Zero exactly at a KKT point.
pub fn kkt_residual(problem: &SimplexQp, lambda: &[f64]) -> Result<f64> {
    if lambda.len() != problem.dim() {
        return Err(Error::Dimension {
            expected: problem.dim(),
            got: lambda.len(),
        });
    }
    let sum: f64 = lambda.iter().sum();
    let min = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    if (sum - 1.0).abs() > FEAS_TOL || min < -FEAS_TOL {
        return Err(Error::Infeasible(format!(
            "lambda sums to {sum} with minimum {min}"
        )));
    }
    let v = DVector::from_column_slice(lambda);
    Ok(kkt_residual_unchecked(problem, &v))
}

fn kkt_residual_unchecked(problem: &SimplexQp, lambda: &DVector<f64>) -> f64 {
    let grad = &problem.q * lambda - &problem.c;
    let nu = grad.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut residual = 0.0_f64;
    for i in 0..lambda.len() {
        if lambda[i] > SUPPORT_TOL {
            residual = residual.max(grad[i] - nu);
        }
    }
    let sum: f64 = lambda.iter().sum();
    residual = residual.max((sum - 1.0).abs());
    let min = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    residual.max((-min).max(0.0))
}
