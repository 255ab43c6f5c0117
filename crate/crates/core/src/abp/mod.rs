//! The ABP construction: Neumann solve, transport map over the normal
//! bundle, Jacobian bounds, ball coverage, volume bound and rigidity
//! diagnostics.

mod coverage;
mod diagnostics;
mod fields;
mod problem;
mod solve;
pub mod sparse;
mod transport;

pub use fields::{solve, solve_from, AbpSolution, SolveStats};
pub use problem::{AbpProblem, COMPATIBILITY_TOLERANCE};
pub use coverage::{coverage_oracle, coverage_sweep, CoverageReport, CoverageSample};
pub use diagnostics::{
    hessian_mesh_error, rigidity_diagnostics, volume_bound_check, RigidityDiagnostics, VolumeBound, MESH_ERROR_FLOOR,
};
pub use solve::{assemble, solve_constrained, Assembled, DofMap, LinearSolution, SolverOptions};
pub use transport::{
    fd_jacobian_determinant, fiber_matrix, jacobian_bound_check, jacobian_determinant, psd_tolerance, sample_v_points,
    transport_map, JacobianBound, JacobianSample, TransportPoint,
};
