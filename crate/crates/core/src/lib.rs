//! Neural approximation of 0-1 knapsack solutions with Lagrangian dual
//! constraint enforcement.
//!
//! The crate covers the whole experimental pipeline:
//!
//! - [`instance`]: uniform uncorrelated instance generation with graded
//!   capacities, the JSON-lines dataset format, and the capacity ratio α.
//! - [`solver`]: an exact branch-and-bound solver (Dantzig bound) plus an
//!   exhaustive enumeration oracle.
//! - [`nn`]: a small dense network engine (batch norm, ReLU, BCE, Adam,
//!   global-norm clipping) with a rounding output whose backward pass uses a
//!   sigmoid-shaped surrogate gradient.
//! - [`ldf`]: the Lagrangian loss, subgradient multiplier updates and the
//!   training loop for the `fc`, `ldf` and `ldf_pretrained` regimes.
//! - [`eval`]: approximation ratio, μ-loss, violation and objective
//!   statistics broken down by capacity quintile.
//!
//! The `kpldf` binary wires these together; the `examples/` directory holds
//! one runnable program per capability.

pub mod error;
pub mod eval;
pub mod instance;
pub mod ldf;
pub mod nn;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use eval::{approximation_ratio, evaluate, select_model, EvalReport, SelectionCriterion};
pub use instance::{alpha, generate_dataset, read_dataset, write_dataset, Dataset, KnapsackInstance, Split};
pub use ldf::{train, train_with, MultiplierState, Regime, TrainConfig, TrainOutcome};
pub use nn::{ModelParams, Mode};
pub use solver::{brute_force, label_dataset, solve_exact, SolveResult};
