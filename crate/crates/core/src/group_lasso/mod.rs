//! Constrained group-Lasso input selection solved by ADMM.
//!
//! The multiplier weights of all `n` units are stacked into one problem and the
//! input weights are grouped by input row, so an input is either used by every
//! unit or by none. See [`GlProblem`] for the variable layout.

mod admm;
mod problem;

pub use admm::{
    admm_solve, block_soft_threshold, residuals, s_step, select_inputs, vbar_step, z_step,
    AdmmOptions, AdmmState, GramFactor,
};
pub use problem::{assemble_gl_problem, assemble_gl_problem_with, GlModel, GlProblem, Scaling};

use serde::{Deserialize, Serialize};

/// Which selector produced a [`SelectionResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Gl,
    Ecm,
    Rb,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gl, Method::Ecm, Method::Rb];

    pub fn label(self) -> &'static str {
        match self {
            Method::Gl => "GL",
            Method::Ecm => "ECM",
            Method::Rb => "RB",
        }
    }
}

/// A chosen set of input rows plus how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected input indices, ascending.
    pub selected: Vec<usize>,
    /// Per-input ℓ₂ norms of the weight group (GL only; empty otherwise).
    pub group_norms: Vec<f64>,
    pub lambda: Option<f64>,
    pub method: Method,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}
