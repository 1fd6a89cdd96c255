#![no_std]

extern crate alloc;

pub mod approximation;
pub mod cyclotomic;
pub mod error;
pub mod group;
pub mod linalg;
pub mod oracle;
pub mod parse;
pub mod ring;
pub mod sofic;
pub mod spectral;

pub use error::{Error, Result};
