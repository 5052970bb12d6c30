//! Explicit, exactly energy-conserving time integration for separable
//! Hamiltonian systems `H = ½ pᵀM⁻¹p + V(q)` with `V ≥ 0`.
//!
//! The crate provides a small linear-algebra kernel ([`linalg`]), the system
//! abstraction ([`hamiltonian`]), five time-stepping schemes
//! ([`integrators`]) and three model systems ([`models`]).
//!
//! ```
//! use ieqsim::integrators::{build_stepper, Scheme, SchemeConfig, Stepper};
//! use ieqsim::models::fpu::{fpu_build, fpu_initial, FpuParams};
//!
//! let params = FpuParams::default();
//! let sys = fpu_build(&params).unwrap();
//! let (q0, p0) = fpu_initial(&params, 100.0).unwrap();
//! let cfg = SchemeConfig::new(Scheme::Ieq, 1e-3);
//! let mut stepper = build_stepper(&sys, &cfg, &q0, &p0).unwrap();
//! let h0 = stepper.energy().unwrap();
//! for _ in 0..1000 {
//!     stepper.advance().unwrap();
//! }
//! let h = stepper.energy().unwrap();
//! assert!(((h - h0) / h0).abs() < 1e-12);
//! ```

pub mod error;
pub mod hamiltonian;
pub mod integrators;
pub mod linalg;
pub mod models;

pub use error::{Error, Result};
pub use hamiltonian::{HamiltonianSystem, Potential, StateVector};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/systems.md")]
    mod systems {}
    #[doc = include_str!("../../../book/src/quadratisation.md")]
    mod quadratisation {}
    #[doc = include_str!("../../../book/src/schemes.md")]
    mod schemes {}
    #[doc = include_str!("../../../book/src/starting.md")]
    mod starting {}
    #[doc = include_str!("../../../book/src/stability.md")]
    mod stability {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
}
