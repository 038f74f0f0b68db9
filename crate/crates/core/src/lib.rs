//! Feasibility engine for the ordered-search semidefinite program S(k,N).
//!
//! [`builder`] encodes the signed-trace system, [`solver`] decides
//! feasibility with a primal-dual interior-point method on a sparse
//! `LDLᵀ` KKT factorization ([`sparse`]), and [`verifier`] re-checks a
//! certificate at the level of Laurent polynomials ([`laurent`]).
//!
//! ```
//! use osp_sdp::{build_instance, solve, verify, SolverConfig, Status};
//!
//! let inst = build_instance(2, 3).unwrap();
//! let out = solve(&inst, &SolverConfig::default()).unwrap();
//! assert_eq!(out.status, Status::Feasible);
//! assert!(verify(2, 3, &out.blocks, 1e-7).unwrap().passed);
//! ```

pub mod builder;
pub mod dense;
pub mod error;
pub mod laurent;
pub mod par;
pub mod solver;
pub mod sparse;
pub mod symmat;
pub mod verifier;

pub use builder::{build_instance, census, measured_census, CensusReport, SdpInstance, VarIndex};
pub use error::{Error, Result};
pub use laurent::LaurentPoly;
pub use solver::{
    rate, search_max_feasible_n, solve, solve_dense_reference, KktMode, SolutionFile, SolveOutcome,
    SolverConfig, Status,
};
pub use symmat::SymMatrix;
pub use verifier::{verify, VerifyReport};
