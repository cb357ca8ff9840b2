//! Independent reference computations for testing `liesym`: truncated
//! Taylor arithmetic, exact jets of the benchmark solutions, a flow-based
//! prolongation, and the exact invariance nullspace.

pub mod analytic;
pub mod flow;
pub mod residual;
pub mod taylor;

pub use analytic::{analytic_jet, closed_form, observable_point};
pub use flow::{flow_prolongation_oracle, FlowParams};
pub use residual::{residual_nullspace_oracle, ResidualNullspace};
pub use taylor::{Taylor, TaylorSpace};
