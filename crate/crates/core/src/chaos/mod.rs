//! Disorder chaos: the overlap fixed point and the two-system upper bound.

mod certificate;
mod coupled;
mod overlap;

pub use certificate::*;
pub use coupled::*;
pub use overlap::*;
