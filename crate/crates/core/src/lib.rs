//! Coupled multiphysics engine for charged rigid spheres in microfluidic
//! flow: a D3Q19 two-relaxation-time lattice Boltzmann fluid solver with
//! momentum-exchange particle coupling and lubrication correction, and a
//! finite-volume electric-potential solver backed by a cell-centered
//! Galerkin multigrid method, driven as one time loop.

pub mod error;
pub mod lattice;

pub mod boundaries;
pub mod particles;
pub mod units;
pub mod electrostatics;
pub mod engine;
pub mod grid;
pub mod lbm;
pub mod lubrication;
pub mod multigrid;

pub use error::{Result, SimError};
