//! Numerical toolkit for two-dimensional irrotational water waves in the
//! surface-variable Hamiltonian formulation, together with diagnostics for virial-type
//! identities, trace inequalities and standing-wave expansions.

pub mod chebyshev;
pub mod diagnostics;
pub mod dtn;
pub mod dynamics;
pub mod float_repr;
pub mod inequality_lab;
pub mod spectral;
pub mod scenario;
pub mod standing_waves;
