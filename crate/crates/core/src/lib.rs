//! Exact total variation between product distributions and the
//! homogenization inequality.
//!
//! - [`measure`]: finitely supported positive measures on ℝ, convolution and
//!   the T functional.
//! - [`tv`]: pmfs, exact product TV through the measure encoding, brute-force
//!   oracles, the multinomial reduction and the lift.
//! - [`score`]: score laws, the linearization and square-function quantities,
//!   and the explicit constant `C₀`.
//! - [`verify`]: seeded instance generation, per-instance inequality checks and
//!   the worst-ratio search.

pub mod error;
pub mod json;
pub mod measure;
pub mod score;
pub mod tv;
pub mod verify;

pub use error::{Error, Result};
pub use measure::{AdmissibilityReport, Atom, AtomicMeasure};
pub use tv::{LiftedPair, Pmf, ProductInstance};
