//! The two built-in experiments: the 1517-sample linear benchmark and the
//! unbalanced synthetic classification study.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    classification_accuracy, find_monotone_rate, least_squares_fit, param_error_metrics,
};
use crate::data::{
    generate_example41, generate_synthetic_unbalanced, SyntheticConfig, EXAMPLE41_TRUE_PARAMS,
    PRNG_NAME,
};
use crate::error::Result;
use crate::loss::average_loss;
use crate::model::{Model, ParameterVector};
use crate::report::{CurveData, ExperimentReport, FitRecord, SeedInfo, TimingCounters};
use crate::solver::{solve, SolveReport, SolverConfig};

/// Number of points sampled for plot-ready line-fit curves.
const LINE_FIT_SAMPLES: usize = 100;

/// Default classification threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

fn solver_counters(report: &SolveReport) -> TimingCounters {
    let mut counters = TimingCounters::new();
    counters.insert("iterations".into(), report.trajectory.len() as u64);
    counters.insert("phi_evaluations".into(), report.phi_evaluations as u64);
    counters.insert(
        "jacobian_evaluations".into(),
        report.jacobian_evaluations as u64,
    );
    counters.insert("qp_iterations".into(), report.qp_iterations as u64);
    counters
}

/// Φ trajectory as a curve including the starting value at iteration 0, so a
/// run with `k` accepted iterations yields `k + 1` points.
fn phi_curve(report: &SolveReport) -> CurveData {
    let mut points = vec![(0u64, report.initial_phi)];
    points.extend(report.trajectory.iter().map(|r| ((r.k + 1) as u64, r.phi)));
    CurveData::iterations(points)
}

fn line_fit_curve(
    model: &Model,
    params: &ParameterVector,
    x_range: (f64, f64),
) -> Result<CurveData> {
    let (lo, hi) = x_range;
    let mut points = Vec::with_capacity(LINE_FIT_SAMPLES);
    for i in 0..LINE_FIT_SAMPLES {
        let t = i as f64 / (LINE_FIT_SAMPLES - 1) as f64;
        let x = lo + t * (hi - lo);
        points.push((x, model.predict(params, &[x])?));
    }
    Ok(CurveData::line_fit(points))
}

/// Runs the linear benchmark: pseudoinverse least squares and the worst-group
/// solver on the same 1517-sample dataset, with coefficient error metrics
/// against the generating line.
pub fn run_example41(solver_config: &SolverConfig) -> Result<ExperimentReport> {
    let dataset = generate_example41();
    let model = Model::linear(1);
    let truth = EXAMPLE41_TRUE_PARAMS;

    let lsq = least_squares_fit(&dataset)?;
    let (lsq_objective, _) = average_loss(&model, &lsq, &dataset)?;

    let minimax = solve(&model, &dataset, solver_config)?;

    let mut fits = BTreeMap::new();
    fits.insert(
        "minimax".to_string(),
        FitRecord {
            params: minimax.final_params.clone(),
            objective: minimax.final_phi,
        },
    );
    fits.insert(
        "least_squares".to_string(),
        FitRecord {
            params: lsq.clone(),
            objective: lsq_objective,
        },
    );

    let mut metrics = BTreeMap::new();
    let (mse, mae) = param_error_metrics(&truth, minimax.final_params.as_slice())?;
    metrics.insert("minimax_mse".into(), mse);
    metrics.insert("minimax_mae".into(), mae);
    let (mse, mae) = param_error_metrics(&truth, lsq.as_slice())?;
    metrics.insert("least_squares_mse".into(), mse);
    metrics.insert("least_squares_mae".into(), mae);

    let x_range = dataset.x_range(0);
    let mut curves = BTreeMap::new();
    curves.insert("minimax_phi".to_string(), phi_curve(&minimax));
    curves.insert(
        "minimax_direction_norm".to_string(),
        CurveData::iterations(
            minimax
                .trajectory
                .iter()
                .map(|r| ((r.k + 1) as u64, r.direction_norm))
                .collect(),
        ),
    );
    curves.insert(
        "minimax_step".to_string(),
        CurveData::iterations(
            minimax
                .trajectory
                .iter()
                .map(|r| ((r.k + 1) as u64, r.step))
                .collect(),
        ),
    );
    curves.insert(
        "minimax".to_string(),
        line_fit_curve(&model, &minimax.final_params, x_range)?,
    );
    curves.insert(
        "least_squares".to_string(),
        line_fit_curve(&model, &lsq, x_range)?,
    );

    let mut timings = BTreeMap::new();
    timings.insert("minimax".to_string(), solver_counters(&minimax));
    let mut lsq_counters = TimingCounters::new();
    lsq_counters.insert("svd_rows".into(), dataset.total_samples() as u64);
    lsq_counters.insert("svd_cols".into(), (dataset.dim() + 1) as u64);
    timings.insert("least_squares".to_string(), lsq_counters);

    let config = serde_json::json!({
        "experiment": "example41",
        "solver": solver_config,
        "true_params": truth,
        "dataset": {
            "name": "example41",
            "samples": dataset.total_samples(),
            "groups": dataset.n_groups(),
            "dim": dataset.dim(),
            "x_min": x_range.0,
            "x_max": x_range.1,
        },
        "solve_status": format!("{:?}", minimax.status),
    });

    Ok(ExperimentReport {
        config,
        fits,
        metrics,
        curves,
        timings,
        seed: None,
    })
}

/// Configuration of the unbalanced classification study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlExperimentConfig {
    pub generator: SyntheticConfig,
    /// Training iterations for both methods; also the length of every
    /// emitted curve.
    pub steps: usize,
    /// Solver settings; `max_iterations` is overridden by `steps`.
    pub solver: SolverConfig,
    /// Starting rate for the baseline's monotone halving search.
    pub baseline_initial_rate: f64,
    /// Held-out balanced test set size per class, generated with `seed + 1`.
    pub test_samples_per_class: usize,
}

impl Default for MlExperimentConfig {
    fn default() -> Self {
        Self {
            generator: SyntheticConfig::default(),
            steps: 100,
            solver: SolverConfig::default(),
            baseline_initial_rate: 1.0,
            test_samples_per_class: 1000,
        }
    }
}

/// Pads a per-iteration series to exactly `steps` entries by repeating the
/// final value, covering solver runs that terminate early.
fn pad_to_steps(mut values: Vec<f64>, steps: usize, fallback: f64) -> Vec<f64> {
    while values.len() < steps {
        let last = values.last().copied().unwrap_or(fallback);
        values.push(last);
    }
    values.truncate(steps);
    values
}

fn iteration_curve(values: &[f64]) -> CurveData {
    CurveData::iterations(
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| ((i + 1) as u64, v))
            .collect(),
    )
}

/// Trains a sigmoid unit with the worst-group solver and with pooled-loss
/// gradient descent on the same unbalanced synthetic data, and evaluates both
/// on a balanced held-out set.
pub fn run_unbalanced_ml(seed: u64, config: &MlExperimentConfig) -> Result<ExperimentReport> {
    let train = generate_synthetic_unbalanced(seed, &config.generator)?;
    let test_cfg = SyntheticConfig {
        dim: config.generator.dim,
        groups: 2,
        group_size: config.test_samples_per_class,
        positive_fraction: 0.5,
    };
    let test = generate_synthetic_unbalanced(seed + 1, &test_cfg)?;
    let model = Model::sigmoid_unit(config.generator.dim);

    // worst-group training
    let solver_config = SolverConfig {
        max_iterations: config.steps,
        ..config.solver.clone()
    };
    let minimax = solve(&model, &train, &solver_config)?;
    let accuracy_of = |params: &ParameterVector| -> Result<f64> {
        classification_accuracy(&model, params, &test, DEFAULT_THRESHOLD)
    };
    let mm_losses: Vec<f64> = minimax.trajectory.iter().map(|r| r.phi).collect();
    let mm_accuracy: Vec<f64> = minimax
        .trajectory
        .iter()
        .map(|r| accuracy_of(&r.params))
        .collect::<Result<_>>()?;
    let initial_accuracy = accuracy_of(&ParameterVector::zeros(model.param_count()))?;
    let mm_losses = pad_to_steps(mm_losses, config.steps, minimax.initial_phi);
    let mm_accuracy = pad_to_steps(mm_accuracy, config.steps, initial_accuracy);
    let mm_test_accuracy = accuracy_of(&minimax.final_params)?;

    // pooled-loss baseline
    let (rate, baseline) =
        find_monotone_rate(&model, &train, config.steps, config.baseline_initial_rate)?;
    let halvings = (config.baseline_initial_rate / rate).log2().round() as u64;
    let avg_accuracy: Vec<f64> = baseline
        .step_params
        .iter()
        .map(&accuracy_of)
        .collect::<Result<_>>()?;
    let avg_test_accuracy = accuracy_of(&baseline.params)?;
    let avg_final_loss = *baseline.losses.last().expect("steps >= 1");

    let mut fits = BTreeMap::new();
    fits.insert(
        "minimax".to_string(),
        FitRecord {
            params: minimax.final_params.clone(),
            objective: minimax.final_phi,
        },
    );
    fits.insert(
        "average_loss".to_string(),
        FitRecord {
            params: baseline.params.clone(),
            objective: avg_final_loss,
        },
    );

    let mut metrics = BTreeMap::new();
    metrics.insert("minimax_test_accuracy".into(), mm_test_accuracy);
    metrics.insert("average_loss_test_accuracy".into(), avg_test_accuracy);
    metrics.insert("baseline_learning_rate".into(), rate);

    let mut curves = BTreeMap::new();
    curves.insert("minimax_loss".to_string(), iteration_curve(&mm_losses));
    curves.insert(
        "minimax_accuracy".to_string(),
        iteration_curve(&mm_accuracy),
    );
    curves.insert(
        "average_loss_loss".to_string(),
        iteration_curve(&baseline.losses),
    );
    curves.insert(
        "average_loss_accuracy".to_string(),
        iteration_curve(&avg_accuracy),
    );

    let mut timings = BTreeMap::new();
    timings.insert("minimax".to_string(), solver_counters(&minimax));
    let mut avg_counters = TimingCounters::new();
    avg_counters.insert("steps".into(), config.steps as u64);
    avg_counters.insert("rate_halvings".into(), halvings);
    timings.insert("average_loss".to_string(), avg_counters);

    let report_config = serde_json::json!({
        "experiment": "unbalanced_ml",
        "generator": config.generator,
        "steps": config.steps,
        "solver": solver_config,
        "baseline_initial_rate": config.baseline_initial_rate,
        "test_samples_per_class": config.test_samples_per_class,
        "threshold": DEFAULT_THRESHOLD,
        "train_samples": train.total_samples(),
        "test_samples": test.total_samples(),
        "solve_status": format!("{:?}", minimax.status),
    });

    Ok(ExperimentReport {
        config: report_config,
        fits,
        metrics,
        curves,
        timings,
        seed: Some(SeedInfo {
            value: seed,
            prng: PRNG_NAME.to_string(),
        }),
    })
}

/// Worst-group loss curve of the trained solver in a report, if present.
pub fn minimax_loss_curve(report: &ExperimentReport) -> Option<&[(f64, f64)]> {
    report
        .curves
        .get("minimax_loss")
        .map(|c| c.points.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_ml_config() -> MlExperimentConfig {
        MlExperimentConfig {
            generator: SyntheticConfig {
                dim: 2,
                groups: 4,
                group_size: 25,
                positive_fraction: 0.1,
            },
            steps: 8,
            test_samples_per_class: 50,
            ..MlExperimentConfig::default()
        }
    }

    #[test]
    fn ml_curves_have_exactly_steps_entries() {
        let cfg = small_ml_config();
        let report = run_unbalanced_ml(3, &cfg).unwrap();
        for name in [
            "minimax_loss",
            "minimax_accuracy",
            "average_loss_loss",
            "average_loss_accuracy",
        ] {
            assert_eq!(report.curves[name].points.len(), cfg.steps, "curve {name}");
        }
    }

    #[test]
    fn ml_experiment_is_deterministic_in_seed() {
        let cfg = small_ml_config();
        let a = run_unbalanced_ml(5, &cfg).unwrap();
        let b = run_unbalanced_ml(5, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn example41_report_has_expected_sections() {
        let report = run_example41(&SolverConfig::default()).unwrap();
        assert!(report.fits.contains_key("minimax"));
        assert!(report.fits.contains_key("least_squares"));
        assert!(report.metrics.contains_key("minimax_mse"));
        assert!(report.metrics.contains_key("least_squares_mae"));
        assert_eq!(report.curves["minimax"].points.len(), 100);
        assert_eq!(report.curves["least_squares"].points.len(), 100);
        assert!(report.seed.is_none());
        // phi curve includes iteration 0
        let phi = &report.curves["minimax_phi"];
        assert_eq!(phi.points[0].0, 0.0);
        assert_eq!(
            phi.points.len() as u64,
            report.timings["minimax"]["iterations"] + 1
        );
    }
}
