pub mod arith;
pub mod error;
pub mod forms;
pub mod genus;
pub mod json;
pub mod k0;
pub mod orders;

pub use error::{Error, Result};
