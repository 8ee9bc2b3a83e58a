//! Certified robustness bounds for zeros of vector fields sampled on a grid.
//!
//! A field `f: X -> R^n` is given by its values on the vertices of a cube or
//! torus grid together with a simplexwise Lipschitz constant. The crate
//! approximates `f/|f|` on superlevel sets of `|f|` by a simplicial map to
//! the boundary of the cross-polytope and measures how long the primary and
//! secondary obstructions to extending that map survive. The survival
//! levels bracket the largest perturbation radius under which every
//! perturbed field still has a zero.
//!
//! ```
//! use robzero::{fields, obstruction::{robustness_report, Options}};
//!
//! let field = fields::gen_quadratic(2, 20).unwrap();
//! let report = robustness_report(&field, &Options::default()).unwrap();
//! assert!(report.lower_bound.is_some());
//! ```

pub mod domain;
pub mod error;
pub mod ez;
pub mod fields;
pub mod filtration;
pub mod obstruction;
pub mod par;
pub mod reduction;
pub mod ring;
pub mod robopt;

pub use error::{Error, Result};
