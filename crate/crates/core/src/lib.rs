//! Joint input selection for data envelopment analysis (DEA).
//!
//! The crate scores decision making units with the output-oriented CCR and BCC
//! models and the additive model, selects inputs jointly across all units with a
//! constrained group-Lasso solved by ADMM, implements the ECM and
//! regression-based benchmark selectors, and ships a Monte Carlo harness that
//! compares the three on simulated Cobb-Douglas panels.

pub mod benchmarks;
pub mod datagen;
pub mod dea;
pub mod error;
pub mod group_lasso;
pub mod harness;
pub mod metrics;
pub mod numlin;
pub mod par;

pub use dea::{DataSet, EfficiencyResult, ModelKind, Rts};
pub use error::{Error, Result};
pub use group_lasso::{AdmmOptions, AdmmState, GlModel, GlProblem, SelectionResult};
