//! Correlated Gaussian random fields: turbulent wind along the deck and road
//! roughness along the wheel tracks.

mod roughness;
mod spectra;
pub mod synthesis;
pub(crate) mod table;
mod wind;

pub use roughness::{RoughnessSurface, Side, Track};
pub use spectra::{
    davenport_coherence, iso8608_psd, von_karman_psd, Component, IsoClass, RoughnessSpec, TurbulenceSpec,
    ISO_N0,
};
pub use wind::{Gust, WindField, WindOptions, DEFAULT_LINE_BUDGET};
