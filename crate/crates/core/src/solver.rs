//! The descent loop for the worst-group objective.
//!
//! Each iteration linearizes the per-group losses, solves the dual simplex QP
//! for weights λ, takes `d = −G'λ` as the search direction, and backtracks
//! with plain strict decrease of Φ. The loop stops when ‖d‖ drops below the
//! termination accuracy, when no backtracking step decreases Φ any more, or
//! at the iteration cap.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::{GroupedDataset, Prng};
use crate::error::{Error, Result};
use crate::loss::{jacobian, phi, GroupJacobian};
use crate::model::{Model, ParameterVector};
use crate::qp::{solve_simplex_qp, SimplexQp};

/// How the iteration is seeded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialParams {
    /// All-zero parameter vector.
    #[default]
    Zeros,
    /// A caller-supplied starting point.
    Explicit(Vec<f64>),
    /// Standard-normal entries drawn from the seeded generator.
    SeededRandom(u64),
}

/// Solver settings. The defaults are the reference settings used throughout
/// the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Termination accuracy: stop once ‖d‖ < xi.
    pub xi: f64,
    /// Gap tolerance handed to the dual QP.
    pub delta: f64,
    /// Step size factor: candidate steps are sigma^j.
    pub sigma: f64,
    /// Cap on accepted iterations.
    pub max_iterations: usize,
    /// Largest backtracking exponent j tried before declaring stagnation.
    pub max_backtracks: u32,
    /// Starting point.
    pub initial_params: InitialParams,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            xi: 1e-8,
            delta: 1e-7,
            sigma: 0.5,
            max_iterations: 500,
            max_backtracks: 60,
            initial_params: InitialParams::Zeros,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.xi.is_finite() || self.xi <= 0.0 {
            return Err(Error::Config(format!(
                "xi must be positive, got {}",
                self.xi
            )));
        }
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(Error::Config(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 || self.sigma >= 1.0 {
            return Err(Error::Config(format!(
                "sigma must lie in (0,1), got {}",
                self.sigma
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    fn starting_point(&self, n: usize) -> Result<ParameterVector> {
        match &self.initial_params {
            InitialParams::Zeros => Ok(ParameterVector::zeros(n)),
            InitialParams::Explicit(values) => {
                if values.len() != n {
                    return Err(Error::Dimension {
                        expected: n,
                        got: values.len(),
                    });
                }
                ParameterVector::new(values.clone())
            }
            InitialParams::SeededRandom(seed) => {
                let mut rng = Prng::seeded(*seed);
                ParameterVector::new((0..n).map(|_| rng.standard_normal()).collect())
            }
        }
    }
}

/// Search direction with its certificate.
#[derive(Debug, Clone)]
pub struct DescentDirection {
    /// `d = −G'λ`.
    pub direction: Vec<f64>,
    /// Dual weights over the groups.
    pub lambda: Vec<f64>,
    /// KKT residual reported by the QP.
    pub kkt_residual: f64,
    /// Active-set changes the QP needed.
    pub qp_iterations: usize,
}

/// Computes the dual-QP descent direction from a group Jacobian.
pub fn descent_direction(jac: &GroupJacobian, delta: f64) -> Result<DescentDirection> {
    let problem = SimplexQp::from_jacobian(jac);
    let solution = solve_simplex_qp(&problem, delta)?;
    let lambda = DVector::from_column_slice(&solution.lambda);
    let d = -(jac.gradients.transpose() * &lambda);
    Ok(DescentDirection {
        direction: d.as_slice().to_vec(),
        lambda: solution.lambda,
        kkt_residual: solution.kkt_residual,
        qp_iterations: solution.iterations,
    })
}

/// Accepted line-search step.
#[derive(Debug, Clone)]
pub struct LineSearchStep {
    /// Accepted step length `sigma^j`.
    pub alpha: f64,
    /// Updated parameters.
    pub params: ParameterVector,
    /// Objective at the updated parameters.
    pub phi: f64,
    /// The accepted exponent j (number of backtracks).
    pub backtracks: u32,
}

/// Finds the smallest `j` in `0..=max_backtracks` with
/// `Φ(u + sigma^j d) < Φ(u)` and returns the updated point.
///
/// Non-finite trial values count as "no decrease" so overflowing steps are
/// simply backtracked past. Fails with [`Error::LineSearchStagnation`] when
/// no exponent works.
pub fn backtracking_line_search<F>(
    mut phi_evaluator: F,
    params: &ParameterVector,
    direction: &[f64],
    sigma: f64,
    max_backtracks: u32,
) -> Result<LineSearchStep>
where
    F: FnMut(&ParameterVector) -> f64,
{
    let current = phi_evaluator(params);
    let mut alpha = 1.0;
    for j in 0..=max_backtracks {
        let trial = params.add_scaled(direction, alpha);
        let value = phi_evaluator(&trial);
        // NaN and +inf both fail this comparison, which is exactly the
        // rejection we want
        if value < current {
            return Ok(LineSearchStep {
                alpha,
                params: trial,
                phi: value,
                backtracks: j,
            });
        }
        alpha *= sigma;
    }
    Err(Error::LineSearchStagnation)
}

/// One accepted iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Iteration index, starting at 0.
    pub k: usize,
    /// Objective after the accepted step; strictly decreasing along the
    /// trajectory.
    pub phi: f64,
    /// ‖d_k‖ of the direction that produced the step.
    pub direction_norm: f64,
    /// Accepted step length `sigma^j`.
    pub step: f64,
    /// Dual weights at this iteration.
    pub lambda: Vec<f64>,
    /// Backtracking exponent j.
    pub backtracks: u32,
    /// Parameters after the step.
    pub params: ParameterVector,
}

/// Why the loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// ‖d‖ fell below the termination accuracy: certified stationary.
    ConvergedDirectionNorm,
    /// Iteration cap reached.
    MaxIterations,
    /// No backtracking step achieved strict decrease.
    LineSearchStagnation,
}

/// Full record of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub final_params: ParameterVector,
    pub status: SolveStatus,
    pub trajectory: Vec<IterationRecord>,
    /// Objective at the final parameters.
    pub final_phi: f64,
    /// Objective at the starting point, before any step.
    pub initial_phi: f64,
    /// Total Φ evaluations (initial evaluation plus every line-search trial).
    pub phi_evaluations: usize,
    /// Total Jacobian evaluations.
    pub jacobian_evaluations: usize,
    /// Total active-set changes across all QP solves.
    pub qp_iterations: usize,
}

impl SolveReport {
    /// Direction norm at the last recorded iteration, if any.
    pub fn last_direction_norm(&self) -> Option<f64> {
        self.trajectory.last().map(|r| r.direction_norm)
    }
}

/// Runs the descent loop until convergence, stagnation, or the iteration cap.
pub fn solve(
    model: &Model,
    dataset: &GroupedDataset,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    if dataset.dim() != model.input_dim() {
        return Err(Error::Dimension {
            expected: model.input_dim(),
            got: dataset.dim(),
        });
    }

    let mut params = config.starting_point(model.param_count())?;
    let mut phi_evaluations = 0usize;
    let mut jacobian_evaluations = 0usize;
    let mut qp_iterations = 0usize;

    let initial = phi(model, &params, dataset)?;
    phi_evaluations += 1;
    if !initial.value.is_finite() {
        return Err(Error::Numerical(format!(
            "objective is non-finite at the starting point ({})",
            initial.value
        )));
    }
    let initial_phi = initial.value;
    let mut current_phi = initial.value;

    let mut trajectory = Vec::new();
    let mut status = SolveStatus::MaxIterations;

    for k in 0..config.max_iterations {
        let jac = jacobian(model, &params, dataset)?;
        jacobian_evaluations += 1;
        let dir = descent_direction(&jac, config.delta)?;
        qp_iterations += dir.qp_iterations;
        let norm = dir.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < config.xi {
            status = SolveStatus::ConvergedDirectionNorm;
            break;
        }

        let mut trials = 0usize;
        let step = backtracking_line_search(
            |p| {
                trials += 1;
                phi(model, p, dataset).map(|v| v.value).unwrap_or(f64::NAN)
            },
            &params,
            &dir.direction,
            config.sigma,
            config.max_backtracks,
        );
        phi_evaluations += trials;
        match step {
            Ok(step) => {
                debug_assert!(step.phi < current_phi);
                current_phi = step.phi;
                params = step.params;
                trajectory.push(IterationRecord {
                    k,
                    phi: step.phi,
                    direction_norm: norm,
                    step: step.alpha,
                    lambda: dir.lambda,
                    backtracks: step.backtracks,
                    params: params.clone(),
                });
            }
            Err(Error::LineSearchStagnation) => {
                status = SolveStatus::LineSearchStagnation;
                break;
            }
            Err(other) => return Err(other),
        }
    }

    Ok(SolveReport {
        final_params: params,
        status,
        trajectory,
        final_phi: current_phi,
        initial_phi,
        phi_evaluations,
        jacobian_evaluations,
        qp_iterations,
    })
}

/// One-sided directional derivative of Φ at `params` along `direction`:
/// the maximum of ⟨∇f_j, d⟩ over the groups attaining the maximum.
///
/// The near-active window here is wider than the tie tolerance of
/// [`phi`]: a run that stops on ‖d‖ < ξ has resolved group ties only to
/// about ξ times the gradient scale, so the stationarity diagnostic must
/// include every group the dual weights could be supported on at that
/// resolution. With the window covering the dual support,
/// `directional_derivative ≥ −‖d‖` holds at any point the solver reports
/// as converged.
pub fn directional_derivative(
    model: &Model,
    dataset: &GroupedDataset,
    params: &ParameterVector,
    direction: &[f64],
) -> Result<f64> {
    if direction.len() != model.param_count() {
        return Err(Error::Dimension {
            expected: model.param_count(),
            got: direction.len(),
        });
    }
    let value = phi(model, params, dataset)?;
    let jac = jacobian(model, params, dataset)?;
    let max_row_norm = (0..jac.n_groups())
        .map(|j| jac.gradients.row(j).norm())
        .fold(0.0_f64, f64::max);
    let window =
        (crate::loss::ACTIVE_SET_REL_TOL * value.value.abs().max(1.0)).max(1e-7 * max_row_norm);
    let mut best = f64::NEG_INFINITY;
    for (j, &loss) in value.per_group.iter().enumerate() {
        if loss < value.value - window {
            continue;
        }
        let inner: f64 = direction
            .iter()
            .enumerate()
            .map(|(i, d)| jac.gradients[(j, i)] * d)
            .sum();
        best = best.max(inner);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{GroupedDataset, Sample};
    use nalgebra::{DMatrix, DVector};

    fn singleton(x: f64, y: f64) -> Vec<Sample> {
        vec![Sample::new(vec![x], y)]
    }

    #[test]
    fn single_group_direction_is_steepest_descent() {
        let jac = GroupJacobian {
            gradients: DMatrix::from_row_slice(1, 2, &[3.0, -4.0]),
            losses: DVector::from_vec(vec![2.0]),
        };
        let d = descent_direction(&jac, 1e-7).unwrap();
        assert_eq!(d.lambda, vec![1.0]);
        assert_eq!(d.direction, vec![-3.0, 4.0]);
    }

    #[test]
    fn opposing_gradients_cancel() {
        let jac = GroupJacobian {
            gradients: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, -2.0]),
            losses: DVector::from_vec(vec![0.7, 0.7]),
        };
        let d = descent_direction(&jac, 1e-7).unwrap();
        let norm: f64 = d.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-10);
    }

    #[test]
    fn direction_satisfies_model_decrease_bound() {
        // max_j (f_j + <G_j, d>) + 1/2 ||d||^2 <= max_j f_j  (the d = 0 value)
        let mut rng = crate::data::Prng::seeded(5);
        for _ in 0..50 {
            let n_groups = 1 + (rng.uniform_open01() * 5.0) as usize;
            let n_params = 1 + (rng.uniform_open01() * 3.0) as usize;
            let g = DMatrix::from_fn(n_groups, n_params, |_, _| rng.uniform_open01() * 4.0 - 2.0);
            let f = DVector::from_fn(n_groups, |_, _| rng.uniform_open01() * 2.0);
            let jac = GroupJacobian {
                gradients: g.clone(),
                losses: f.clone(),
            };
            let d = descent_direction(&jac, 1e-7).unwrap();
            let dv = DVector::from_column_slice(&d.direction);
            let linearized = (&g * &dv + &f).max();
            let model_value = linearized + 0.5 * dv.norm_squared();
            let phi0 = f.max();
            assert!(model_value <= phi0 + 1e-9, "{model_value} > {phi0}");
        }
    }

    #[test]
    fn line_search_backtracks_once_on_overshoot() {
        // phi(u) = u^2 from u = 1 with d = -2: full step overshoots to
        // phi(-1) = 1 (no decrease), half step lands exactly at the minimum
        let phi = |p: &ParameterVector| p[0] * p[0];
        let u = ParameterVector::new(vec![1.0]).unwrap();
        let step = backtracking_line_search(phi, &u, &[-2.0], 0.5, 60).unwrap();
        assert_eq!(step.alpha, 0.5);
        assert_eq!(step.backtracks, 1);
        assert_eq!(step.params.as_slice(), &[0.0]);
        assert_eq!(step.phi, 0.0);
    }

    #[test]
    fn line_search_accepts_full_step() {
        let phi = |p: &ParameterVector| p[0] * p[0];
        let u = ParameterVector::new(vec![1.0]).unwrap();
        let step = backtracking_line_search(phi, &u, &[-1.0], 0.5, 60).unwrap();
        assert_eq!(step.alpha, 1.0);
        assert_eq!(step.backtracks, 0);
        assert_eq!(step.phi, 0.0);
    }

    #[test]
    fn line_search_stagnates_on_ascent_direction() {
        let phi = |p: &ParameterVector| p[0] * p[0];
        let u = ParameterVector::new(vec![1.0]).unwrap();
        assert!(matches!(
            backtracking_line_search(phi, &u, &[1.0], 0.5, 60),
            Err(Error::LineSearchStagnation)
        ));
    }

    #[test]
    fn line_search_skips_past_non_finite_trials() {
        // blow up for large steps, quadratic near the origin
        let phi = |p: &ParameterVector| {
            let u = p[0];
            if u.abs() > 0.75 {
                f64::INFINITY
            } else {
                u * u
            }
        };
        let u = ParameterVector::new(vec![0.5]).unwrap();
        let step = backtracking_line_search(phi, &u, &[-4.0], 0.5, 60).unwrap();
        assert!(step.phi < 0.25);
        assert!(step.backtracks > 0);
    }

    #[test]
    fn solve_interpolates_points_on_a_line() {
        let ds = GroupedDataset::new(vec![
            singleton(0.0, 1.0),
            singleton(1.0, 3.0),
            singleton(2.0, 5.0),
        ])
        .unwrap();
        let model = Model::linear(1);
        let report = solve(&model, &ds, &SolverConfig::default()).unwrap();
        assert_eq!(report.status, SolveStatus::ConvergedDirectionNorm);
        assert!(report.final_phi <= 1e-12, "phi = {}", report.final_phi);
        assert!((report.final_params[0] - 2.0).abs() < 1e-6);
        assert!((report.final_params[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn solve_trajectory_decreases_strictly() {
        let ds = GroupedDataset::new(vec![
            singleton(0.1, 1.7),
            singleton(0.9, -0.3),
            singleton(-0.4, 0.8),
            singleton(1.5, 2.2),
        ])
        .unwrap();
        let model = Model::linear(1);
        let report = solve(&model, &ds, &SolverConfig::default()).unwrap();
        let mut last = report.initial_phi;
        for rec in &report.trajectory {
            assert!(rec.phi < last);
            assert!(rec.step > 0.0 && rec.step <= 1.0);
            last = rec.phi;
        }
        assert_eq!(report.final_phi, last);
    }

    #[test]
    fn solve_is_deterministic() {
        let ds = GroupedDataset::new(vec![
            singleton(0.3, 1.1),
            singleton(-0.8, 0.4),
            singleton(1.2, -0.9),
        ])
        .unwrap();
        let model = Model::linear(1);
        let a = solve(&model, &ds, &SolverConfig::default()).unwrap();
        let b = solve(&model, &ds, &SolverConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn solve_rejects_mismatched_dimensions() {
        let ds = GroupedDataset::new(vec![singleton(0.0, 1.0)]).unwrap();
        let model = Model::linear(3);
        assert!(matches!(
            solve(&model, &ds, &SolverConfig::default()),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn solve_validates_config() {
        let ds = GroupedDataset::new(vec![singleton(0.0, 1.0)]).unwrap();
        let model = Model::linear(1);
        let bad = SolverConfig {
            sigma: 1.5,
            ..SolverConfig::default()
        };
        assert!(matches!(solve(&model, &ds, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn directional_derivative_smooth_case() {
        // single group: phi is smooth, derivative is the plain inner product
        let ds = GroupedDataset::new(vec![singleton(1.0, 0.0)]).unwrap();
        let model = Model::linear(1);
        let p = ParameterVector::new(vec![1.0, 0.0]).unwrap();
        // f(u) = (w + b)^2 at (1,0): grad = (2, 2)
        let d = directional_derivative(&model, &ds, &p, &[1.0, 0.0]).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
        let d = directional_derivative(&model, &ds, &p, &[1.0, -1.0]).unwrap();
        assert!(
            d.abs() < 1e-12,
            "orthogonal direction should give 0, got {d}"
        );
    }

    #[test]
    fn directional_derivative_takes_max_over_active_set() {
        // two singleton groups with equal losses and opposite gradients:
        // f_1(u) = (u - 1)^2, f_2(u) = (u + 1)^2 at u = 0 via bias-only data
        let ds = GroupedDataset::new(vec![singleton(0.0, 1.0), singleton(0.0, -1.0)]).unwrap();
        let model = Model::linear(1);
        let p = ParameterVector::zeros(2);
        // gradients wrt bias are -2 and +2; along bias direction +1 the max is +2
        let d = directional_derivative(&model, &ds, &p, &[0.0, 1.0]).unwrap();
        assert!((d - 2.0).abs() < 1e-12);

        // limit-definition cross-check: (phi(u + t v) - phi(u)) / t for small t
        let v = [0.0, 1.0];
        let t = 1e-7;
        let trial = p.add_scaled(&v, t);
        let phi0 = phi(&model, &p, &ds).unwrap().value;
        let phi1 = phi(&model, &trial, &ds).unwrap().value;
        let limit = (phi1 - phi0) / t;
        assert!((limit - d).abs() < 1e-5, "limit {limit} vs analytic {d}");
    }
}
