//! Exact finite-N disorder simulations by exhaustive search.

mod disorder;
mod experiments;
mod spins;

pub use disorder::*;
pub use experiments::*;
pub use spins::*;
