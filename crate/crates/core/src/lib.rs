pub mod capacity;
pub mod checks;
pub mod cli;
pub mod error;
pub mod grid;
pub mod intrinsic;
pub mod linalg;
pub mod pform;
pub mod quasiregular;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
