//! Time-domain simulation of a long-span bridge under turbulent wind, stochastic
//! traffic, and both acting together.
//!
//! The crate is organised bottom-up:
//!
//! - [`bridge`]: modal deck model, shape interpolation and force projection
//! - [`fields`]: turbulent wind and road roughness random fields
//! - [`aero`]: quasi-steady buffeting forces
//! - [`vehicle`]: multi-body vehicle models and tyre contact
//! - [`traffic`]: arrivals, speed limits and car following
//! - [`solver`]: coupled bridge-vehicle time integration
//! - [`analysis`]: envelopes, spectra and scenario comparison
//! - [`campaign`]: realisation batches, seeding, output files

pub mod aero;
pub mod analysis;
pub mod bridge;
pub mod campaign;
pub mod config;
pub mod error;
pub mod fields;
pub mod history;
pub mod newmark;
pub mod oracle;
pub mod plot;
pub mod seeds;
pub mod solver;
pub mod traffic;
pub mod vehicle;

pub use bridge::{DeckSection, Dof, ModalBridge, Mode, ModeKind, SectionVector};
pub use error::{Error, Result};
pub use history::ResponseHistory;
pub use solver::{Scenario, WindCase};
