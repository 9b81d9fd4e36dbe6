//! Worst-group regression: fit a differentiable model by minimizing the
//! maximum per-group mean squared loss instead of the pooled average.
//!
//! The solver linearizes the group losses at each iterate, obtains weights
//! over the groups from a dual quadratic program on the probability simplex
//! (whose dimension is the group count, not the parameter count), steps along
//! `d = −G'λ`, and backtracks until the objective strictly decreases. For
//! convex group losses a vanishing direction certifies a global minimum.
//!
//! The crate also ships the classical baselines the method is compared
//! against (pseudoinverse least squares and pooled-loss gradient descent),
//! grouped-dataset I/O and generators, and two reproducible experiments with
//! JSON/CSV report emission.
//!
//! ```
//! use maxmean::data::{GroupedDataset, Sample};
//! use maxmean::model::Model;
//! use maxmean::solver::{solve, SolverConfig};
//!
//! // two singleton groups: fit the line that balances both residuals
//! let dataset = GroupedDataset::new(vec![
//!     vec![Sample::new(vec![0.0], 1.0)],
//!     vec![Sample::new(vec![1.0], 3.0)],
//! ]).unwrap();
//! let report = solve(&Model::linear(1), &dataset, &SolverConfig::default()).unwrap();
//! assert!(report.final_phi < 1e-10);
//! ```

pub mod baselines;
pub mod data;
pub mod error;
pub mod experiments;
pub mod loss;
pub mod model;
pub mod qp;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
pub use model::{Model, ParameterVector};
