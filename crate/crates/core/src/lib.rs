//! Numerical index theory for the Jacobi equation Y'' + R(t) Y = 0.
//!
//! The crate integrates the associated linear Hamiltonian flow on V x V
//! with symplecticity control, represents isotropic and Lagrangian
//! subspaces of Jacobi fields by frames of initial conditions, locates
//! focal points and interval indices, computes Maslov-Arnold indices with
//! an independent winding-number cross-check, performs the transversal
//! reduction with respect to an isotropic subspace (horizontal frames,
//! O'Neill operator, reduced curvature), and ships a verification harness
//! for the index theorems these constructions satisfy.

pub mod error;
pub mod family;
pub mod flow;
pub mod interval;
pub mod linalg;
pub mod maslov;
pub mod scenario;
pub mod schema;
pub mod subspace;
pub mod tol;
pub mod transversal;
pub mod verify;

pub use error::{Error, Result};
pub use family::{CurvatureFamily, ScalarSeries};
pub use flow::{
    hamiltonian_matrix, integrate, omega, symplectic_defect, FundamentalSolution,
    IntegrationOptions, PhaseVector,
};
pub use interval::Interval;
pub use maslov::{crossing_form, crossings, maslov_index, winding_index, CrossingReport, LagrangianCurve};
pub use scenario::{
    builtin, builtin_scenarios, constant_curvature, hopf_scenario, index_explosion_experiment,
    random_family, random_isotropic, random_lagrangian, random_lagrangian_containing, Scenario,
};
pub use schema::ScenarioFile;
pub use subspace::{
    cluster_index_bound_check, index, intersection_dimension, locate_focal_points, min_focal_gap,
    FocalEvent, IndexReport, JacobiSubspace, SubspaceClass,
};
pub use tol::Tolerances;
pub use transversal::{
    check_decomposition, horizontal_frame, oneill_operator, project_subspace, transversal_family,
    wtilde_basis, DecompositionCheck, TransversalOptions, TransversalSystem,
};
