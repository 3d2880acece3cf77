//! Periodic solutions of two-species delayed Lotka–Volterra systems.
//!
//! The pipeline runs from hypothesis checks on the interaction matrix,
//! through the spectral catalog of characteristic values, to a Fourier
//! collocation solver for the orbits and a degree certificate for the
//! λ-window they live in.

pub mod cli;
pub mod dde;
pub mod degree;
pub mod field;
pub mod model;
pub mod orbitfinder;
pub mod spectrum;
