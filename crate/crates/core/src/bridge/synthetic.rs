//! Synthetic three-span suspension-bridge modal model.
//!
//! Stand-in for a calibrated finite-element model: sinusoidal shapes
//! `sin(n pi s / L_main)` over the main span, zero on the side spans, with
//! mode families anchored at a first vertical frequency of 0.100 Hz and a
//! first torsional frequency of 0.278 Hz. Modal masses are the grid
//! integrals of the squared shape times the section mass or inertia.

use std::f64::consts::PI;

use super::{trapezoid_weights, DeckSection, ModalBridge, Mode, ModeKind};

pub const MAIN_SPAN: f64 = 1624.0;
pub const SIDE_SPAN: f64 = 535.0;
pub const FIRST_VERTICAL_HZ: f64 = 0.100;
pub const FIRST_TORSIONAL_HZ: f64 = 0.278;
pub const FIRST_LATERAL_HZ: f64 = 0.052;

/// Number of modes per family (vertical, lateral, torsional).
pub const FAMILY_SIZES: [usize; 3] = [12, 10, 8];

const SIDE_SEGMENTS: usize = 40;
const MAIN_SEGMENTS: usize = 120;

/// Frequency of the `n`-th mode of a family; near-linear in `n` with a mild
/// stiffening so families ascend like a cable-supported girder.
fn family_frequency(first: f64, n: usize) -> f64 {
    first * n as f64 * (1.0 + 0.02 * (n as f64 - 1.0))
}

pub fn node_grid() -> Vec<f64> {
    let mut x = Vec::with_capacity(2 * SIDE_SEGMENTS + MAIN_SEGMENTS + 1);
    for i in 0..SIDE_SEGMENTS {
        x.push(SIDE_SPAN * i as f64 / SIDE_SEGMENTS as f64);
    }
    for i in 0..MAIN_SEGMENTS {
        x.push(SIDE_SPAN + MAIN_SPAN * i as f64 / MAIN_SEGMENTS as f64);
    }
    for i in 0..=SIDE_SEGMENTS {
        x.push(SIDE_SPAN + MAIN_SPAN + SIDE_SPAN * i as f64 / SIDE_SEGMENTS as f64);
    }
    x
}

pub fn section() -> DeckSection {
    DeckSection {
        width: 31.0,
        depth: 4.3,
        mass_per_length: 23_000.0,
        torsional_inertia_per_length: 2.5e6,
    }
}

/// Builds the 30-mode model.
pub fn greatbelt_like() -> ModalBridge {
    let nodes = node_grid();
    let section = section();
    let weights = trapezoid_weights(&nodes);
    let families = [
        (ModeKind::Vertical, FIRST_VERTICAL_HZ, FAMILY_SIZES[0], section.mass_per_length),
        (ModeKind::Lateral, FIRST_LATERAL_HZ, FAMILY_SIZES[1], section.mass_per_length),
        (
            ModeKind::Torsional,
            FIRST_TORSIONAL_HZ,
            FAMILY_SIZES[2],
            section.torsional_inertia_per_length,
        ),
    ];

    let mut modes = Vec::new();
    for (kind, first, count, density) in families {
        for n in 1..=count {
            let shape: Vec<f64> = nodes
                .iter()
                .map(|&x| {
                    let s = x - SIDE_SPAN;
                    if s <= 0.0 || s >= MAIN_SPAN {
                        0.0
                    } else {
                        (n as f64 * PI * s / MAIN_SPAN).sin()
                    }
                })
                .collect();
            let modal_mass = density * shape.iter().zip(&weights).map(|(p, w)| p * p * w).sum::<f64>();
            modes.push(Mode {
                index: 0,
                kind,
                frequency: family_frequency(first, n),
                damping_ratio: 0.005,
                shape,
                modal_mass,
            });
        }
    }
    modes.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    for (i, m) in modes.iter_mut().enumerate() {
        m.index = i + 1;
    }
    ModalBridge::new(section, nodes, MAIN_SPAN, [SIDE_SPAN, SIDE_SPAN], modes)
        .expect("synthetic model satisfies invariants")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_frequencies_and_mode_count() {
        let b = greatbelt_like();
        assert_eq!(b.mode_count(), 30);
        assert_eq!(b.nodes().len(), 201);
        let first = |k| b.modes().iter().find(|m| m.kind == k).unwrap().frequency;
        assert_eq!(first(ModeKind::Vertical), 0.100);
        assert_eq!(first(ModeKind::Torsional), 0.278);
        assert!(b.modes().iter().all(|m| m.damping_ratio == 0.005));
        assert!((b.total_length() - 2694.0).abs() < 1e-9);
        assert!((b.midspan() - 1347.0).abs() < 1e-9);
        assert!(b.nodes().iter().any(|&x| (x - 1347.0).abs() < 1e-9));
    }

    #[test]
    fn modal_mass_close_to_continuous_integral() {
        let b = greatbelt_like();
        let m1 = &b.modes()[b.modes().iter().position(|m| m.kind == ModeKind::Vertical).unwrap()];
        let exact = 23_000.0 * MAIN_SPAN / 2.0;
        assert!((m1.modal_mass - exact).abs() / exact < 1e-9);
    }
}
