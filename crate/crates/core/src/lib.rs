pub mod error;
pub mod flow;
pub mod model;
pub mod perturbation;
pub mod quad;
pub mod roots;
pub mod solver;
pub mod specfun;
pub mod wkb;
pub mod zero_energy;

pub use error::{Error, Result};
