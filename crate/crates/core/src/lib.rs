//! Numerical laboratory for extension operators on paraboloids over finite
//! fields of odd characteristic.

pub mod characters;
pub mod cli;
pub mod energy;
pub mod error;
pub mod finite_field;
pub mod fourier;
pub mod geometry;
pub mod norms_lab;
pub mod seeding;

pub use error::{Error, Result};
