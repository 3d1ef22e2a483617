pub mod cheeger;
pub mod cli;
pub mod dual;
pub mod error;
pub mod geodesic;
pub mod invariant;
pub mod jacobi;
pub mod krylov;
pub mod models;
pub mod quadrature;
pub mod surface;

pub use error::{Error, Result};
