//! Travelling waves of the one-dimensional defocusing nonlinear Schrödinger
//! equation `i∂_tΨ + ∂²_xΨ + Ψf(|Ψ|²) = 0` with `|Ψ| → r0` at infinity.

pub mod banded;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod invariants;
pub mod nonlinearity;
pub mod potential;
pub mod profile;
pub mod quad;
pub mod spectrum;

pub use error::{Error, Result};
pub use nonlinearity::{builtin, make_model, Kind, ModelSpec, NonlinearityModel};
pub use profile::{solve_profile, GridSpec, WaveProfile};
