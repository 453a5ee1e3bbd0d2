mod error;
mod linalg;

pub mod basis;
pub mod cli;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod moments;
pub mod online;

pub use error::{Error, Result};
