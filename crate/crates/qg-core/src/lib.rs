//! Pseudospectral tools for the 3D quasi-geostrophic system with Ekman
//! pumping on a doubly periodic slab `[0, 2π)² × [0, z_max]`.
//!
//! The crate evolves the coupled pair `(θ, ω) = (∂_νΨ, ΔΨ)`, reconstructs
//! the stream function through the harmonic/Neumann split `Ψ = Ψ₁ + Ψ₂`,
//! and provides numerical estimators for the functional inequalities that
//! govern the system (Besov/Hölder/BMO norms, truncation-energy
//! recurrences, Duhamel convolution bounds, Sobolev growth monitors).
//!
//! Core math is generic over the scalar type through [`scalar::Real`];
//! the type aliases at the crate root fix `f64`, which is what the solver
//! and the verification harness use.

pub mod bands;
pub mod calibration;
pub mod degiorgi;
pub mod duhamel;
pub mod dynamics;
pub mod field;
pub mod grid;
pub mod norms;
pub mod scalar;
pub mod slab;
pub mod snapshot;
pub mod spectral;

use thiserror::Error;

/// Errors surfaced by grid, transform and solver operations.
#[derive(Debug, Error)]
pub enum QgError {
    #[error("mean-mode singularity: {0}")]
    MeanModeSingularity(&'static str),
    #[error("height z = {z} outside the slab [0, {z_max}]")]
    HeightOutOfRange { z: f64, z_max: f64 },
    #[error("negative extension height z = {0}")]
    NegativeHeight(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),
    #[error("CFL violation: max|u|·dt/Δx = {0:.3} > 1, step rejected")]
    CflViolation(f64),
    #[error("time {t} outside the series span [{lo}, {hi}]")]
    TimeOutOfSpan { t: f64, lo: f64, hi: f64 },
    #[error("series does not cover the requested window: {0}")]
    WindowMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),
    #[error("snapshot format error: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QgError>;

/// Concrete `f64` aliases used throughout the solver and harness.
pub type TorusGrid2 = grid::TorusGrid2<f64>;
pub type SlabGrid3 = grid::SlabGrid3<f64>;
pub type BoundaryField = field::BoundaryField<f64>;
pub type SlabField = field::SlabField<f64>;
pub type DyadicBandSet = bands::DyadicBandSet<f64>;
