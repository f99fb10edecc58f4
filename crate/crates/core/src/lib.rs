//! Substitute conservative systems for dissipative mechanics.
//!
//! Given a dissipative system and one initial condition, the crate integrates
//! the phase curve and restricts the nonconservative force to it. Each force
//! component then depends on its own coordinate alone and integrates to a
//! work potential. Subtracting those potentials from the energy gives a
//! conservative Hamiltonian whose flow shares the same phase curve. The `verification`
//! module turns the resulting claims into numeric audits.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod integrators;
pub mod interp;
pub mod model;
pub mod quadrature;
pub mod reconstruction;
pub mod verification;
