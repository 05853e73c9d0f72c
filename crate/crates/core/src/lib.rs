//! Stochastic steepest-descent multi-objective optimization: common descent
//! directions, Euler-Maruyama particle dynamics, Pareto archives, DTLZ2 and
//! quadratic benchmarks, the averaged Hausdorff indicator, an NSGA-II
//! baseline and stability diagnostics for the underlying diffusion.

// `!(x > 0.0)` rejects NaN too; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod archive;
pub mod descent;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod nsga2;
pub mod problems;
pub mod rng;
pub mod ssw;
pub mod stability;

pub use archive::{dominates, ArchiveEntry, ParetoArchive};
pub use descent::{descent_direction, fd_jacobian, solve_min_norm, DescentDirection, Jacobian, SimplexWeights};
pub use dynamics::{deterministic_flow, em_step, project_box, StepParams, Trajectory};
pub use error::{Error, Result};
pub use experiment::{run_experiment, run_stability_report, ExperimentConfig, ExperimentSummary};
pub use metrics::{delta_p, median_iqr, IndicatorResult, MedianIqr};
pub use model::{BoxBounds, DecisionVector, EvaluationBudget, ObjectiveVector, Problem};
pub use nsga2::{run_nsga2, Nsga2Config};
pub use problems::{dtlz2_evaluate, dtlz2_reference_front, Dtlz2, ProblemConfig, QuadraticFamily};
pub use rng::RngStream;
pub use ssw::{run_ssw, RunResult, SswConfig};
