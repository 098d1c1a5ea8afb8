pub mod chf;
pub mod error;

pub use error::{Error, Result};
pub mod cli;
pub mod hitting;
pub mod housing;
pub mod mc;
pub mod rates;
pub mod roots;
pub mod stopping;
