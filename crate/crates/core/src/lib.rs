pub mod chaos;
pub mod error;
pub mod flow;
pub mod gamma;
pub mod grid;
pub mod mixture;
pub mod optim;
pub mod parallel;
pub mod parisi_opt;
pub mod pde;
pub mod quadrature;
pub mod rng;
pub mod simulator;
pub mod special;

pub use error::{Error, Result};
pub use gamma::StepGamma;
pub use grid::SpatialGrid;
pub use mixture::MixtureSpec;
pub use parisi_opt::{minimize_parisi, parisi_functional, ParisiOptions, ParisiResult};
pub use pde::{solve_parisi_pde, PDESolution};
