//! Convexifying defining functions of implicitly defined domains.

pub mod boundary;
pub mod convexify;
pub mod error;
pub mod expr;
pub mod field;
pub mod geometry;
pub mod jet;
pub mod linalg;
pub mod sampling;
pub mod spec;
pub mod verify;

pub use error::{Error, Result};
