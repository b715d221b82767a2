//! Exact-arithmetic laboratory for the finite James spaces `J_K`.
//!
//! Everything that feeds a verdict is computed in exact rationals or in
//! ℚ(√2); floating point only steers heuristic searches whose results are
//! re-certified exactly.
//!
//! - [`james`]: James norms, cycles, dual functionals and chain stability.
//! - [`basis`]: bases of `J_K`, dual bases, moduli, unconditional-constant
//!   lower bounds.
//! - [`measure`]: the atomic measure space induced by a basis, the embeddings
//!   `π`, `π*` and the product matrix.
//! - [`metastability`]: stable-interval search, fluctuation harnesses and the
//!   limit-exchange conclusion search.
//! - [`hierarchy`]: budgeted fast-growing hierarchy evaluation.
//! - [`pipeline`]: the refutation report and the self-verification suite.

pub mod basis;
pub mod error;
pub mod hierarchy;
pub mod james;
pub mod measure;
pub mod metastability;
pub mod pipeline;
pub mod report;
pub mod scalar;

pub use error::{Error, Result};
pub use report::{Check, VerificationReport};
pub use scalar::{Rational, Root2Scalar};
