//! Loop-erased self-repelling walks on the Sierpinski gasket.
//!
//! The crate is organized bottom-up: exact lattice geometry
//! ([`gasket_geometry`]), lattice paths and their combinatorics
//! ([`path_space`]), the erasing-larger-loops-first operator
//! ([`loop_erasure`]), closed-form renormalization data
//! ([`renormalization`]), exact-rational verification oracles
//! ([`series_oracle`]), and Monte Carlo samplers and estimators for the
//! scaling limit ([`stochastics`]).

pub mod gasket_geometry;
pub mod scalar;
pub mod loop_erasure;
pub mod path_space;
pub mod renormalization;
pub mod series_oracle;
pub mod stochastics;
