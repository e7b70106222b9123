pub mod connection;
pub mod elliptic;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod metric;
pub mod representative;
pub mod zeros;

pub use error::{Error, Result};
