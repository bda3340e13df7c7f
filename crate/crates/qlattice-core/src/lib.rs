//! Simulation engine for entanglement-assisted quantum games on 2D lattices
//! of agents: the quantized K-player prisoner's dilemma and the cooperative
//! Parrondo game realized as a multi-walker quantum walk, driven by a lattice
//! capital-update loop with deterministic seeding.

pub mod config;
pub mod eisert;
pub mod emit;
pub mod error;
pub mod exec;
pub mod gamelib;
pub mod lattice;
pub mod linalg;
pub mod parrondo;

pub use error::{Error, Result};
