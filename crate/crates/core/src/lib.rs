pub mod bench;
pub mod error;
pub mod flow;
pub mod hamiltonians;
pub mod mls;
pub mod neural;
pub mod pipeline;
pub mod torus;

pub use error::{Error, Result};
