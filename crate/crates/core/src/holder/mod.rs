//! Approximation of Hölder functions on low-dimensional sets.

pub mod approx;
pub mod monomial;
pub mod step;
pub mod target;

pub use approx::{
    build_approx, holder_approx, holder_approx_net, plan_approx, recommended_kind, resolution, taylor_coeffs,
    ApproxConfig, ApproxPlan, ApproxReport, GridPartition, Quantized, TaylorTable, APPROX_CONSTANT,
};
pub use monomial::{monomial_bound, monomial_chain, monomial_net, mult01_net, square_error, square_net};
pub use step::{grid_snap_net, snap_circuit, step_net, step_net_gap};
pub use target::{bump_target, builtin, finite_difference, HolderTarget, TargetDoc};
