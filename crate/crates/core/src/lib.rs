pub mod error;
pub mod geometry;
pub mod gmrf;
pub mod inference;
pub mod io;
pub mod model;
pub mod spde;
pub mod study;

pub use error::{Error, Result};
