//! Sparse Elastic-Net models over itemset and subsequence pattern features.
//!
//! The feature space is every pattern up to a maximum length that occurs in
//! the training data. Fitting never enumerates it in full: a depth-first walk
//! of the pattern tree discards whole subtrees whose coefficients are certified
//! to be zero at the optimum, using duality-gap balls built from one or two
//! reference solutions. Paths over `(lambda, kappa)` and cross-validation
//! paths reuse neighbouring solutions as those references.
//!
//! ```
//! use spp_core::{fit, lambda_max, Dataset, Hyperparams, Loss, StructureKind, TaskKind};
//!
//! let data = Dataset::parse(
//!     "1.0 0 1\n-1.0 1 2\n0.5 0 2\n2.0 0 1 2\n",
//!     StructureKind::Itemset,
//!     TaskKind::Regression,
//! )
//! .unwrap();
//! let lmax = lambda_max(&data, Loss::Squared, 3);
//! let hp = Hyperparams { lambda: 0.3 * lmax, ..Default::default() };
//! let out = fit(&data, Loss::Squared, &hp, &[]).unwrap();
//! assert!(out.solution.gap < hp.epsilon);
//! ```

pub mod data;
pub mod error;
pub mod objective;
pub mod path;
pub mod screening;
pub mod solution;
pub mod solver;
pub mod synth;
pub mod tree;

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

pub use data::{load_dataset, Dataset, Hyperparams, Instance, Pattern, StructureKind, SupportColumn, TaskKind};
pub use error::{Error, Result};
pub use objective::{dual_scale, dual_value, duality_gap, make_reference, null_reference, primal_value, Loss, ScaledDual};
pub use path::{
    cv_path, lambda_max, make_grid, path_2d, path_2d_with, select_hyperparams, validation_metric, CvRecord, CvResult,
    FoldPlan, PathCell, PathGrid, PathResult, ReferenceMode,
};
pub use screening::{
    ball_intersection, find_max_abs_inner, multi_pruning_score, multi_screening_score, pruning_score, screening_score,
    spp_traverse, ActiveSet, BallIntersection, BallPair, Branch, ScreeningBall, ScreeningRule, TraversalStats,
};
pub use solution::{ReferenceSolution, SparseModel, Term};
pub use solver::{fit, FitOutput, FitReport, SolveState, TraceRecord};
pub use tree::{PatternNode, PatternTree};
