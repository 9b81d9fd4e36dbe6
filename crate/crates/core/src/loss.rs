//! Per-group mean squared losses, the worst-group objective, and gradients.
//!
//! For parameters `u`, group `j` contributes
//! `f_j(u) = (1/n_j) Σ_l (predict(x_jl) − y_jl)²`, and the solver objective is
//! `Φ(u) = max_j f_j(u)`. Accumulation follows sample order within a group
//! and group-index order across groups, so every evaluation is
//! bit-reproducible.

use nalgebra::{DMatrix, DVector};

use crate::data::GroupedDataset;
use crate::error::{Error, Result};
use crate::model::{Model, ParameterVector};

/// Per-group losses stacked with their gradients: row `j` of `gradients` is
/// `∇f_j(u)` and `losses[j]` is `f_j(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupJacobian {
    pub gradients: DMatrix<f64>,
    pub losses: DVector<f64>,
}

impl GroupJacobian {
    pub fn n_groups(&self) -> usize {
        self.gradients.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.gradients.ncols()
    }
}

/// Value of the worst-group objective together with the groups attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiValue {
    /// `Φ(u) = max_j f_j(u)`.
    pub value: f64,
    /// Indices of groups whose loss reaches the maximum within the tie
    /// tolerance `1e-10 * max(1, |Φ|)`. Exact equality is untenable in
    /// floating point.
    pub active_set: Vec<usize>,
    /// All per-group losses.
    pub per_group: Vec<f64>,
}

/// Relative tolerance deciding which groups count as active at the maximum.
pub const ACTIVE_SET_REL_TOL: f64 = 1e-10;

/// Mean squared loss of one group and its parameter gradient.
pub fn group_loss(
    model: &Model,
    params: &ParameterVector,
    group: &[crate::data::Sample],
) -> Result<(f64, Vec<f64>)> {
    if group.is_empty() {
        return Err(Error::EmptyGroup { index: 0 });
    }
    let n = model.param_count();
    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    for s in group {
        let r = model.predict(params, &s.x)? - s.y;
        value += r * r;
        let g = model.param_gradient(params, &s.x)?;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += r * gi;
        }
    }
    let inv = 1.0 / group.len() as f64;
    value *= inv;
    for gi in &mut grad {
        *gi *= 2.0 * inv;
    }
    Ok((value, grad))
}

fn group_loss_value(
    model: &Model,
    params: &ParameterVector,
    group: &[crate::data::Sample],
) -> Result<f64> {
    let mut value = 0.0;
    for s in group {
        let r = model.predict(params, &s.x)? - s.y;
        value += r * r;
    }
    Ok(value / group.len() as f64)
}

/// Worst-group objective. Cheaper than [`jacobian`] since no gradients are
/// formed; this is the line-search workhorse.
pub fn phi(model: &Model, params: &ParameterVector, dataset: &GroupedDataset) -> Result<PhiValue> {
    let mut per_group = Vec::with_capacity(dataset.n_groups());
    for group in dataset.groups() {
        per_group.push(group_loss_value(model, params, group)?);
    }
    let value = per_group.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = ACTIVE_SET_REL_TOL * value.abs().max(1.0);
    let active_set = per_group
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= value - tol)
        .map(|(j, _)| j)
        .collect();
    Ok(PhiValue {
        value,
        active_set,
        per_group,
    })
}

/// Stacks every group's loss gradient into the N x n matrix the descent
/// direction is computed from.
pub fn jacobian(
    model: &Model,
    params: &ParameterVector,
    dataset: &GroupedDataset,
) -> Result<GroupJacobian> {
    let n_groups = dataset.n_groups();
    let n_params = model.param_count();
    let mut gradients = DMatrix::zeros(n_groups, n_params);
    let mut losses = DVector::zeros(n_groups);
    for (j, group) in dataset.groups().iter().enumerate() {
        let (value, grad) = group_loss(model, params, group).map_err(|e| match e {
            Error::EmptyGroup { .. } => Error::EmptyGroup { index: j },
            other => other,
        })?;
        losses[j] = value;
        for (i, g) in grad.iter().enumerate() {
            gradients[(j, i)] = *g;
        }
    }
    Ok(GroupJacobian { gradients, losses })
}

/// Mean squared loss pooled over every sample, ignoring the grouping, with
/// its gradient. This is the "traditional" objective the baselines minimize.
pub fn average_loss(
    model: &Model,
    params: &ParameterVector,
    dataset: &GroupedDataset,
) -> Result<(f64, Vec<f64>)> {
    let m = dataset.total_samples();
    if m == 0 {
        return Err(Error::EmptyData);
    }
    let n = model.param_count();
    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    for s in dataset.iter_samples() {
        let r = model.predict(params, &s.x)? - s.y;
        value += r * r;
        let g = model.param_gradient(params, &s.x)?;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += r * gi;
        }
    }
    let inv = 1.0 / m as f64;
    value *= inv;
    for gi in &mut grad {
        *gi *= 2.0 * inv;
    }
    Ok((value, grad))
}

/// Central-difference gradient with a uniform step: component `i` is
/// `(f(u + h e_i) − f(u − h e_i)) / 2h`.
pub fn finite_difference_gradient<F>(f: F, params: &ParameterVector, h: f64) -> Vec<f64>
where
    F: Fn(&ParameterVector) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let base: Vec<f64> = params.as_slice().to_vec();
    let mut grad = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut up = base.clone();
        let mut dn = base.clone();
        up[i] += h;
        dn[i] -= h;
        let fu = f(&ParameterVector::from_raw(up));
        let fd = f(&ParameterVector::from_raw(dn));
        grad.push((fu - fd) / (2.0 * h));
    }
    grad
}

/// Central differences with the step scaled per coordinate as
/// `base_h * max(1, |u_i|)`, which keeps the step meaningful for large
/// parameters. This is the variant the gradient-integrity checks use.
pub fn finite_difference_gradient_scaled<F>(f: F, params: &ParameterVector, base_h: f64) -> Vec<f64>
where
    F: Fn(&ParameterVector) -> f64,
{
    assert!(base_h > 0.0, "finite-difference step must be positive");
    let base: Vec<f64> = params.as_slice().to_vec();
    let mut grad = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let h = base_h * base[i].abs().max(1.0);
        let mut up = base.clone();
        let mut dn = base.clone();
        up[i] += h;
        dn[i] -= h;
        let fu = f(&ParameterVector::from_raw(up));
        let fd = f(&ParameterVector::from_raw(dn));
        grad.push((fu - fd) / (2.0 * h));
    }
    grad
}
