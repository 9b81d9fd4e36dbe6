//! Prediction models with closed-form parameter gradients.
//!
//! Two model families are provided: an affine model `w·x + b` and a single
//! sigmoid unit `σ(w·x + b)`. Parameters are packed as `(w_1, …, w_d, b)`
//! with the bias last; every consumer of parameter vectors in this crate
//! relies on that order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat vector of model parameters, bias last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    /// Builds a parameter vector, rejecting non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "parameter vector contains non-finite entry {bad}"
            )));
        }
        Ok(Self(values))
    }

    /// Builds a parameter vector without the finiteness check. Used for
    /// transient line-search trial points, which may legitimately overflow
    /// and are then rejected by the strict-decrease test.
    pub fn from_raw(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `self + alpha * direction`, element-wise.
    ///
    /// Panics on length mismatch: a silently truncated update would corrupt
    /// the iteration.
    pub fn add_scaled(&self, direction: &[f64], alpha: f64) -> Self {
        assert_eq!(self.0.len(), direction.len());
        Self(
            self.0
                .iter()
                .zip(direction)
                .map(|(u, d)| u + alpha * d)
                .collect(),
        )
    }
}

impl std::ops::Index<usize> for ParameterVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<ParameterVector> for Vec<f64> {
    fn from(p: ParameterVector) -> Self {
        p.0
    }
}

/// Model family. Both kinds use `d + 1` parameters for input dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// `w·x + b`
    Linear { dim: usize },
    /// `σ(w·x + b)` with the logistic sigmoid σ.
    SigmoidUnit { dim: usize },
}

impl Model {
    pub fn linear(dim: usize) -> Self {
        Model::Linear { dim }
    }

    pub fn sigmoid_unit(dim: usize) -> Self {
        Model::SigmoidUnit { dim }
    }

    /// Input dimension `d`.
    pub fn input_dim(&self) -> usize {
        match *self {
            Model::Linear { dim } | Model::SigmoidUnit { dim } => dim,
        }
    }

    /// Number of parameters, `d + 1`.
    pub fn param_count(&self) -> usize {
        self.input_dim() + 1
    }

    fn check_dims(&self, params: &ParameterVector, x: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Model output at `x`.
    pub fn predict(&self, params: &ParameterVector, x: &[f64]) -> Result<f64> {
        self.check_dims(params, x)?;
        let z = affine(params.as_slice(), x);
        Ok(match self {
            Model::Linear { .. } => z,
            Model::SigmoidUnit { .. } => sigmoid(z),
        })
    }

    /// Gradient of `predict` with respect to the parameters, packed `(x, 1)`
    /// for the linear model and `σ'(z)·(x, 1)` for the sigmoid unit.
    pub fn param_gradient(&self, params: &ParameterVector, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(params, x)?;
        let mut grad = Vec::with_capacity(x.len() + 1);
        grad.extend_from_slice(x);
        grad.push(1.0);
        if let Model::SigmoidUnit { .. } = self {
            let s = sigmoid(affine(params.as_slice(), x));
            let ds = s * (1.0 - s);
            for g in &mut grad {
                *g *= ds;
            }
        }
        Ok(grad)
    }
}

fn affine(params: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut z = params[d]; // bias
    for i in 0..d {
        z += params[i] * x[i];
    }
    z
}

/// Logistic sigmoid, branch form so large |z| cannot overflow. Large negative
/// z occurs routinely during line search trials. The result is clamped to the
/// open unit interval: past |z| ≈ 37 the rounded value would otherwise hit
/// exactly 0 or 1.
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}
