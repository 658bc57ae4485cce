//! Semiring-weighted transition systems over trees of measurement labels.
//!
//! The crate represents labelled stochastic systems as weighted relational
//! presheaves over finite label trees, decides no-signalling, contextuality,
//! and strong contextuality of empirical models with exact rational
//! arithmetic, constructs hidden-variable models where they exist, and
//! model-checks a dynamic probabilistic modal logic over the same structures.
//!
//! Start with the runnable examples (`cargo run --example pr_box_pipeline`),
//! or with [`scenario::canonical_pr_box`] and friends:
//!
//! ```
//! use contextua::scenario::{canonical_pr_box, check_no_signalling, is_contextual};
//!
//! let pr = canonical_pr_box();
//! assert!(check_no_signalling(&pr).holds);
//! assert!(is_contextual(&pr).unwrap());
//! ```

pub mod error;
pub mod format;
pub mod logic;
pub mod presheaf;
pub mod random;
pub mod rel;
pub mod scenario;
pub mod semiring;
pub mod simplex;
pub mod tree;

pub use error::{Error, Result};
