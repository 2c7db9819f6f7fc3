//! Stability, convergence and loss-geometry experiments for first-order methods
//! under Polyak-Łojasiewicz and quadratic-growth conditions.
//!
//! The crate is organised bottom-up:
//!
//! * [`problems`]: loss families, datasets, empirical risks.
//! * [`optim`]: GD, SGD, randomized coordinate descent and SVRG.
//! * [`geometry`]: sampled estimates of Lipschitz, smoothness, PL, QG and error-bound constants.
//! * [`linnet`]: deep linear networks and their landscape lemmas.
//! * [`rates`]: closed-form rate and iteration tables plus empirical rate fits.
//! * [`stability`]: empirical uniform and pointwise stability, bound calculators.
//! * [`counterexample`]: the one-dimensional quartic where GD is unstable and SGD is not.
//! * [`report`] and [`cli`]: reproducible CSV/JSON output and the command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod counterexample;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod linnet;
pub mod optim;
pub mod problems;
pub mod rates;
pub mod report;
pub mod rng;
pub mod stability;

pub use error::{Error, Result};
pub use problems::{ExampleZ, LabeledDataset, ParamVector, ProblemInstance};
