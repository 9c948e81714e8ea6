//! Dynamic contact of viscoelastic plates with a foundation that admits
//! limited interpenetration.
//!
//! Four plate models (Kirchhoff, von Kármán with optional rotational
//! inertia, Reissner–Mindlin, full von Kármán) are discretised by finite
//! differences on a rectangle and advanced by an energy-consistent implicit
//! midpoint scheme. Contact forces follow a barrier law that blows up at a
//! fixed penetration depth, or a capped regularisation of it.

pub mod contact_law;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod expr;
pub mod grid;
pub mod grid_ops;
pub mod io;
pub mod linalg;
pub mod memory;
pub mod mms;
pub mod models;
pub mod quadrature;
pub mod scenario;
pub mod vonkarman;

pub use error::{Error, Result};
