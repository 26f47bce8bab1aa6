//! Numerical solvers for mean-field backward SDEs with two mean reflections
//! `E[L(t, Y_t)] <= 0 <= E[R(t, Y_t)]`.
//!
//! The pipeline is a Picard iteration: freeze `(Y, P_Y)` in the generator,
//! solve the unconstrained mean-field BSDE by regression Monte Carlo, then
//! recover the deterministic reflection `K` from a Skorokhod problem in
//! reversed time on the mean of the solution.

pub mod brownian;
pub mod catalog;
pub mod error;
pub mod generator;
pub mod grid;
pub mod measure;
pub mod mfbsde;
pub mod reference;
pub mod reflected;
pub mod regression;
pub mod root;
pub mod skorokhod;

pub use brownian::{simulate_brownian, BrownianEnsemble};
pub use catalog::{preset, GeneratorKind, Levels, LossKind, ScenarioSpec, TerminalKind, PRESET_NAMES};
pub use error::{Error, Result};
pub use generator::{Driver, DriverArgs, GeneratorSpec, Modulus, Regularity, TerminalFunctional, ZeroDriver};
pub use grid::TimeGrid;
pub use measure::{d1_to_dirac0, wasserstein1_1d, EmpiricalMeasure};
pub use mfbsde::{solve_backward, solve_backward_with, solve_mfbsde, stability_gap, BackwardBasis, BackwardSolution, GapReport};
pub use root::root_solve_monotone;
pub use skorokhod::{
    check_continuity_bound, check_oscillation_bound, compute_phi_psi, solve_skorokhod, solve_skorokhod_pinned_start,
    BoundReport, ConstraintPair, InputPath, SamplingBox, SkorokhodInstance, SkorokhodSolution,
};
pub use reflected::{
    audit_solution, build_skorokhod_data, freeze_generator, picard_step, solve_reflected, solve_reflected_from,
    uniqueness_probe, AuditReport, ConstraintReport, Initializer, LossFieldPair, ReflectedSolution, Scenario,
    UniquenessReport,
};
