//! Baseline fits and evaluation metrics: pseudoinverse least squares,
//! pooled-loss gradient descent, coefficient error metrics, and
//! classification accuracy.

use nalgebra::{DMatrix, DVector};

use crate::data::GroupedDataset;
use crate::error::{Error, Result};
use crate::loss::average_loss;
use crate::model::{Model, ParameterVector};

/// Stacked regression system: rows are `(x_i1 .. x_id, 1)`, targets are `y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub matrix: DMatrix<f64>,
    pub targets: DVector<f64>,
}

impl DesignMatrix {
    /// Pools every sample of the dataset, ignoring the grouping.
    pub fn from_dataset(dataset: &GroupedDataset) -> Self {
        let m = dataset.total_samples();
        let n = dataset.dim() + 1;
        let mut matrix = DMatrix::zeros(m, n);
        let mut targets = DVector::zeros(m);
        for (row, s) in dataset.iter_samples().enumerate() {
            for (col, v) in s.x.iter().enumerate() {
                matrix[(row, col)] = *v;
            }
            matrix[(row, n - 1)] = 1.0;
            targets[row] = s.y;
        }
        Self { matrix, targets }
    }
}

/// Minimal-norm least-squares coefficients via the singular value
/// decomposition, with singular values below `s_max * m * eps` treated as
/// zero. Stable even with the heavily duplicated rows the benchmark data has,
/// where the normal equations would be badly conditioned.
pub fn least_squares_fit(dataset: &GroupedDataset) -> Result<ParameterVector> {
    let design = DesignMatrix::from_dataset(dataset);
    let m = design.matrix.nrows();
    let svd = design.matrix.clone().svd(true, true);
    let u = svd.u.as_ref().expect("SVD computed with u");
    let v_t = svd.v_t.as_ref().expect("SVD computed with v_t");
    let s_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = s_max * m as f64 * f64::EPSILON;

    let n = v_t.ncols();
    let mut coeffs = DVector::zeros(n);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            let projection = u.column(i).dot(&design.targets) / s;
            coeffs += projection * v_t.row(i).transpose();
        }
    }
    ParameterVector::new(coeffs.as_slice().to_vec())
}

/// Result of a gradient-descent run on the pooled loss.
#[derive(Debug, Clone, PartialEq)]
pub struct GdRun {
    pub params: ParameterVector,
    /// Pooled loss after each step; exactly `steps` entries.
    pub losses: Vec<f64>,
    /// Parameters after each step, matching `losses`.
    pub step_params: Vec<ParameterVector>,
    pub initial_loss: f64,
}

/// Plain gradient descent on the pooled mean squared loss, recording the loss
/// after every step. Fails with the recorded curve attached if the loss turns
/// non-finite.
pub fn average_loss_descent(
    model: &Model,
    dataset: &GroupedDataset,
    steps: usize,
    learning_rate: f64,
) -> Result<GdRun> {
    if steps == 0 {
        return Err(Error::Config("steps must be at least 1".into()));
    }
    if !learning_rate.is_finite() || learning_rate <= 0.0 {
        return Err(Error::Config(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    let mut params = ParameterVector::zeros(model.param_count());
    let (initial_loss, mut grad) = average_loss(model, &params, dataset)?;
    let mut losses = Vec::with_capacity(steps);
    let mut step_params = Vec::with_capacity(steps);
    for step in 0..steps {
        let negated: Vec<f64> = grad.iter().map(|g| -g).collect();
        params = params.add_scaled(&negated, learning_rate);
        let (loss, g) = average_loss(model, &params, dataset)?;
        if !loss.is_finite() {
            return Err(Error::DivergedDescent { step, losses });
        }
        losses.push(loss);
        step_params.push(params.clone());
        grad = g;
    }
    Ok(GdRun {
        params,
        losses,
        step_params,
        initial_loss,
    })
}

/// Halves the learning rate, starting from `initial_rate`, until the recorded
/// loss curve is non-increasing (including the initial loss), and returns the
/// first rate that works together with its run.
pub fn find_monotone_rate(
    model: &Model,
    dataset: &GroupedDataset,
    steps: usize,
    initial_rate: f64,
) -> Result<(f64, GdRun)> {
    let mut rate = initial_rate;
    for _ in 0..60 {
        match average_loss_descent(model, dataset, steps, rate) {
            Ok(run) => {
                let mut monotone = run
                    .losses
                    .first()
                    .is_none_or(|first| *first <= run.initial_loss);
                monotone &= run.losses.windows(2).all(|w| w[1] <= w[0]);
                if monotone {
                    return Ok((rate, run));
                }
            }
            Err(Error::DivergedDescent { .. }) => {}
            Err(other) => return Err(other),
        }
        rate *= 0.5;
    }
    Err(Error::Numerical(
        "no learning rate produced a monotone loss curve".into(),
    ))
}

/// Mean squared and mean absolute error between coefficient vectors:
/// `(1/n) Σ (a_i − b_i)²` and `(1/n) Σ |a_i − b_i|`. For two parameters these
/// are the usual halved sums.
pub fn param_error_metrics(true_params: &[f64], est_params: &[f64]) -> Result<(f64, f64)> {
    if true_params.len() != est_params.len() {
        return Err(Error::Dimension {
            expected: true_params.len(),
            got: est_params.len(),
        });
    }
    let n = true_params.len() as f64;
    let mut mse = 0.0;
    let mut mae = 0.0;
    for (a, b) in true_params.iter().zip(est_params) {
        let d = a - b;
        mse += d * d;
        mae += d.abs();
    }
    Ok((mse / n, mae / n))
}

/// Fraction of samples classified correctly with `predict >= threshold`
/// mapping to class 1. Labels must be exactly 0 or 1.
pub fn classification_accuracy(
    model: &Model,
    params: &ParameterVector,
    dataset: &GroupedDataset,
    threshold: f64,
) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for (index, s) in dataset.iter_samples().enumerate() {
        if s.y != 0.0 && s.y != 1.0 {
            return Err(Error::Label { index, value: s.y });
        }
        let predicted = if model.predict(params, &s.x)? >= threshold {
            1.0
        } else {
            0.0
        };
        if predicted == s.y {
            correct += 1;
        }
        total += 1;
    }
    Ok(correct as f64 / total as f64)
}
