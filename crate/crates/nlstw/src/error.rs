use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("no_wave: {0}")]
    NoWave(String),
    #[error("no kink: {0}")]
    NoKink(String),
    #[error("infinite energy: sonic wave with m = {0}")]
    InfiniteEnergy(usize),
    #[error("tail underflow: {0}")]
    TailUnderflow(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("spectrum: {0}")]
    Spectrum(String),
    #[error("dynamics: {0}")]
    Dynamics(String),
    #[error("vanishing field: {0}")]
    Vanishing(String),
    #[error("fit: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
