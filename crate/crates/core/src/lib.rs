//! Traveling waves for the boundary reaction-diffusion equation
//! `Delta v + c v_x = 0` in the upper half-plane with flux `v_y = f(v)` on `y = 0`.

pub mod cli;
pub mod closed_forms;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod grid_solver;
mod linalg;
pub mod quadrature;
pub mod reaction;
pub mod special;
pub mod wave_finder;

pub use error::{Error, Result};
