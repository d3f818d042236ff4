//! Bergman kernels of cusp-form spaces on hyperbolic surfaces, the heat-kernel
//! bound chain behind their sup-norm estimates, and the lattice and unit sums
//! that control the cusp contribution for Hilbert modular groups.

pub mod asymptotics;
pub mod bounds;
pub mod forms;
pub mod hyperbolic;
pub mod orbits;
pub mod quadfield;
pub mod quadrature;
