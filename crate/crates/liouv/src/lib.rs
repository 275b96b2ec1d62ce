pub mod bea;
pub mod cli;
pub mod cost;
pub mod electronic;
pub mod error;
pub mod groundstate;
pub mod linalg;
pub mod liouvillian;
pub mod ops;
pub mod oracle;
pub mod phasespace;
pub mod qsvt;
pub mod thermo;

pub use error::{Error, Result};
