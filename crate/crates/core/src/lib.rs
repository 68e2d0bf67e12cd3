pub mod claims;
pub mod config;
pub mod curvature;
pub mod error;
pub mod families;
pub mod fields;
pub mod holonomy;
pub mod jets;
pub mod killing;
pub mod walker;

pub use error::{Error, Result};
pub use jets::Jet;
