//! U-statistics of arbitrary order over stationary sequences.
//!
//! The crate computes exact and incomplete U-statistics, simulates ergodic
//! and non-ergodic stationary processes, evaluates the random limit
//! `I_m(S, h, omega)` given by the ergodic component of each path, and runs
//! replicated experiments that track the almost-sure and `L^p` errors.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod io;
pub mod kernel;
pub mod kernels;
pub mod limits;
pub mod numeric;
pub mod point;
pub mod processes;
pub mod rng;

pub use diagnostics::{
    convergence_experiment, dj_identity_check, indicator_convergence_experiment,
    tail_mass_diagnostic, ConvergenceReport, ExperimentConfig, Mode,
};
pub use engine::{
    d_jr, diagonal_sum, enumerate_increasing_tuples, incomplete_u_statistic, prefix_u_statistics,
    truncate_kernel, truncate_value, u_from_v_decomposition, u_statistic, v_statistic,
    weighted_average, IndexTuple, PrefixSeries, TruncationLevel,
};
pub use error::{Error, Result};
pub use kernel::{sgn, validate_kernel_symmetry, InputShape, Kernel, LimitHook, SignValue};
pub use kernels::{build_kernel, BoxRegion, DcovIndexing, KernelSpec};
pub use limits::{estimate_limit, lp_distance, mu_omega_for_path, Law, LimitEstimate, LimitMethod, RandomMeasureModel};
pub use point::{euclidean_distance, Point, SamplePath};
pub use processes::{simulate, MarginalLaw, ProcessSpec};
