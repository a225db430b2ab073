//! Permutation tests for linear regressions whose errors are clustered along
//! two or more index dimensions.
//!
//! The tests are exact in finite samples whenever the error array is
//! invariant in distribution under the permutation group in use (for dyadic
//! data, independent permutations of rows and columns). The main entry points:
//!
//! - [`permgroup::build_two_way_group`] and [`dyadic::procedure1`] for fully
//!   observed dyadic arrays, with [`dyadic::PreparedTest::invert_ci`] for
//!   confidence intervals;
//! - [`missing::biclique_decompose`] and [`missing::procedure2`] for arrays
//!   with missing cells;
//! - [`multiway`] for three-way arrays, panels, replicated layouts and
//!   irregular designs;
//! - [`sim`] for the simulation designs used to check size and power.

pub mod blocks;
pub mod dyadic;
pub mod error;
pub mod linalg;
pub mod missing;
pub mod model;
pub mod multiway;
pub mod permgroup;
pub mod projector;
pub mod rng;
pub mod sim;

pub use dyadic::{procedure1, shifted_test, ConfidenceInterval, GridConfig, PreparedTest, TestReport};
pub use error::{Error, Result};
pub use missing::{biclique_decompose, procedure2, BicliqueCover, Mask, Solver};
pub use model::{DyadArray, Permutation, PermutationFamily, TwoWayPermutation};
pub use permgroup::{build_cyclic_family, build_two_way_group, default_num_perms};
pub use projector::{RankTol, ResidualProjector};
