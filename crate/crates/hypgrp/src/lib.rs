//! Computational geometric group theory: free-group words, subgroup graphs,
//! substitutions, small-cancellation certification, ascending HNN extensions,
//! Cayley-ball probes, and distortion witnesses.

pub mod cayley;
pub mod distortion;
pub mod error;
pub mod families;
pub mod gog;
pub mod smallcanc;
pub mod stallings;
pub mod substitution;
pub mod word;

pub use error::{Error, Result};
