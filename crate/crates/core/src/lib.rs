//! 2D3V electromagnetic particle-in-cell simulation.
//!
//! The simulation advances macro-particles and electromagnetic fields on a
//! staggered (Yee) grid in normalized units: time in 1/ωp, length in c/ωp,
//! momentum in m·c, and c = 1. Each time step runs four stages: interpolate
//! the fields at every particle, push the particle with the Boris scheme,
//! deposit its current with a charge-conserving split, and advance the fields
//! with a finite-difference time-domain update.
//!
//! The same kernels run under seven interchangeable execution backends, from
//! a purely sequential loop to fully asynchronous per-region tasks
//! synchronized only by data dependencies (see [`backends`]).

pub mod backends;
pub mod config;
pub mod diagnostics;
pub mod grid;
pub mod inject;
pub mod kernels;
pub mod laser;
pub mod particle;
pub mod regions;
pub mod rng;

pub use backends::{BackendKind, Layout, SimState};
pub use config::{FilterKind, FilterSpec, LaserSpec, SimConfig, SpeciesSpec};
pub use grid::{CurrentDensity, EMFields, VecGrid};
pub use particle::Particle;
