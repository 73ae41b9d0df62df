//! Consistent interacting particle systems on finite lattices.
//!
//! The crate builds generators for particle systems whose dynamics commute
//! with the annihilation operator (exclusion, inclusion and independent
//! walkers, plus absorbing, reservoir and thermalized variants), evaluates
//! them exactly on enumerated particle sectors, and checks consistency,
//! duality and steady-state correlation identities against closed forms
//! and Gillespie simulation.
//!
//! Module map:
//!
//! * [`lattice`], [`config`], [`sector`], [`operators`]: sites, occupation
//!   vectors, sector enumeration and the annihilation / creation operators.
//! * [`rates`]: consistent rate families, absorbing extensions, reservoirs,
//!   thermalization and the JSON model schema.
//! * [`exact`]: sparse generators, uniformization, absorption and
//!   stationary solves, defect checks.
//! * [`duality`]: product measures, duality kernels and steady-state
//!   correlation formulas.
//! * [`genfun`]: absorbed-count generating functions and their recursions.
//! * [`sim`]: seeded, replica-parallel Gillespie simulation.
//! * [`acceptance`]: the end-to-end acceptance criteria, shared by the CLI
//!   and the test suite.

pub mod acceptance;
pub mod config;
pub mod duality;
pub mod error;
pub mod exact;
pub mod genfun;
pub mod lattice;
pub mod operators;
pub mod par;
pub mod rates;
pub mod sector;
pub mod sim;
pub mod sparse;

pub use config::{binomial_f, combinations, phi, Configuration, CoordinateVector};
pub use error::{Error, Result};
pub use lattice::{Lattice, SiteKind};
pub use par::Exec;
pub use sector::Sector;
