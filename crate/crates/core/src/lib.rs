//! Truncated Fock spaces on a finite one-body basis.

pub mod config;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod localization;
pub mod onebody;
pub mod random;
pub mod run;
pub mod sequences;
pub mod solvers;
pub mod states;
pub mod verify;

pub use error::{Error, Result};
