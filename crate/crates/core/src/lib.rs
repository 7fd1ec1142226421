//! prunekit: a data-pruning toolkit built around the decomposition of pruning
//! methods into a *representation* step and a *selection* step.
//!
//! The crate extracts per-instance representations from a logistic-regression
//! reference model (hidden states, training-dynamics trajectories, gradients),
//! runs six budgeted selection algorithms on top of any of them, and verifies
//! numerically why some representations separate instances better than others
//! (closed-form pairwise distances, Jacobian spectral norms, and the
//! peak/threshold behavior of the gradient discriminative power).

pub mod analysis;
pub mod config;
pub mod data;
pub mod error;
pub mod io;
pub mod matrix;
pub mod pipeline;
pub mod refmodel;
pub mod representations;
pub mod selectors;
pub mod synthgen;
pub mod theory;

pub use data::{
    Budget, Dataset, Label, RepKind, Representation, Selection, SelectionRepKind, ValidationSet,
};
pub use error::{Error, Result};
