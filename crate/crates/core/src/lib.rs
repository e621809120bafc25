pub mod analysis;
pub mod dmrg;
pub mod error;
pub mod io;
pub mod linalg;
pub mod local_solver;
pub mod model;
pub mod mps;
pub mod observables;
pub mod oracle;
pub mod quench;
pub mod tebd;

pub use error::{Error, Result};
