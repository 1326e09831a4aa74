pub mod analysis;
pub mod bruhat;
pub mod circuit;
pub mod compiler;
pub mod coupled;
pub mod error;
pub mod linalg;
pub mod mzi;
pub mod networks;
pub mod par;
pub mod synthesis;

pub use error::{Error, Result};
