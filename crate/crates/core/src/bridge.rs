//! Modal description of the bridge deck.
//!
//! The deck is a one-dimensional girder along the span coordinate `x`
//! (0 at the first abutment). Each mode moves one of three section degrees
//! of freedom: vertical deflection `h` (positive up), lateral sway `p`
//! (positive along-wind) or torsion `alpha` (positive nose-up, which lowers
//! the downstream edge). Mode shapes are sampled on a node grid and
//! interpolated linearly in between.
//!
//! Lateral offsets `e` on the deck are measured from the centreline,
//! positive towards the downstream edge, so a point at offset `e` moves
//! vertically by `h - e * alpha`.

mod format;
pub mod synthetic;

use std::path::Path;

use crate::error::{Error, Result};

pub use format::{parse_bridge, write_bridge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Vertical,
    Lateral,
    Torsional,
}

/// Section degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dof {
    H,
    P,
    Alpha,
}

impl ModeKind {
    pub fn dof(self) -> Dof {
        match self {
            ModeKind::Vertical => Dof::H,
            ModeKind::Lateral => Dof::P,
            ModeKind::Torsional => Dof::Alpha,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModeKind::Vertical => "vertical",
            ModeKind::Lateral => "lateral",
            ModeKind::Torsional => "torsional",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeckSection {
    /// Deck width B [m].
    pub width: f64,
    /// Deck depth H [m].
    pub depth: f64,
    /// [kg/m]
    pub mass_per_length: f64,
    /// [kg m^2/m]
    pub torsional_inertia_per_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    /// Identifier from the model file (1-based, unique).
    pub index: usize,
    pub kind: ModeKind,
    /// [Hz]
    pub frequency: f64,
    pub damping_ratio: f64,
    /// One value per grid node.
    pub shape: Vec<f64>,
    /// Generalised mass [kg] or [kg m^2] for torsional modes.
    pub modal_mass: f64,
}

impl Mode {
    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency
    }
}

/// Generalised force or displacement in section coordinates.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SectionVector {
    pub h: f64,
    pub p: f64,
    pub alpha: f64,
}

impl SectionVector {
    pub fn new(h: f64, p: f64, alpha: f64) -> Self {
        Self { h, p, alpha }
    }

    pub fn component(&self, dof: Dof) -> f64 {
        match dof {
            Dof::H => self.h,
            Dof::P => self.p,
            Dof::Alpha => self.alpha,
        }
    }
}

/// Diagonal modal matrices of the deck equations of motion.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalMatrices {
    pub mass: Vec<f64>,
    pub damping: Vec<f64>,
    pub stiffness: Vec<f64>,
}

/// Bracketing node and blend weight for a span position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub node: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalBridge {
    pub section: DeckSection,
    nodes: Vec<f64>,
    pub main_span: f64,
    pub side_spans: [f64; 2],
    modes: Vec<Mode>,
}

impl ModalBridge {
    pub fn new(
        section: DeckSection,
        nodes: Vec<f64>,
        main_span: f64,
        side_spans: [f64; 2],
        modes: Vec<Mode>,
    ) -> Result<Self> {
        let bridge = Self {
            section,
            nodes,
            main_span,
            side_spans,
            modes,
        };
        bridge.validate()?;
        Ok(bridge)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_bridge(&text, &path.display().to_string())
    }

    fn validate(&self) -> Result<()> {
        let s = &self.section;
        if !(s.width > 0.0) {
            return Err(Error::Invariant("deck width must be positive".into()));
        }
        if !(s.depth > 0.0) {
            return Err(Error::Invariant("deck depth must be positive".into()));
        }
        if !(s.mass_per_length > 0.0) {
            return Err(Error::Invariant("deck mass per length must be positive".into()));
        }
        if !(s.torsional_inertia_per_length > 0.0) {
            return Err(Error::Invariant(
                "deck torsional inertia per length must be positive".into(),
            ));
        }
        if !(self.main_span > 0.0) || self.side_spans.iter().any(|&l| !(l >= 0.0)) {
            return Err(Error::Invariant("span lengths must be positive".into()));
        }
        if self.nodes.len() < 2 {
            return Err(Error::Invariant("node grid needs at least two nodes".into()));
        }
        if self.nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invariant("node grid must be strictly increasing".into()));
        }
        let total = self.total_length();
        let tol = 1e-6 * total;
        if self.nodes[0].abs() > tol || (self.nodes[self.nodes.len() - 1] - total).abs() > tol {
            return Err(Error::Invariant(format!(
                "node grid [{}, {}] does not cover [0, {total}]",
                self.nodes[0],
                self.nodes[self.nodes.len() - 1]
            )));
        }
        if self.modes.is_empty() {
            return Err(Error::Invariant("no modes".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for m in &self.modes {
            if !seen.insert(m.index) {
                return Err(Error::Invariant(format!("duplicate mode index {}", m.index)));
            }
            if !(m.frequency > 0.0) {
                return Err(Error::Invariant(format!(
                    "mode {}: non-positive frequency {}",
                    m.index, m.frequency
                )));
            }
            if !(m.damping_ratio >= 0.0) {
                return Err(Error::Invariant(format!(
                    "mode {}: negative damping ratio {}",
                    m.index, m.damping_ratio
                )));
            }
            if !(m.modal_mass > 0.0) {
                return Err(Error::Invariant(format!(
                    "mode {}: non-positive modal mass {}",
                    m.index, m.modal_mass
                )));
            }
            if m.shape.len() != self.nodes.len() {
                return Err(Error::Invariant(format!(
                    "mode {}: {} shape values for {} nodes",
                    m.index,
                    m.shape.len(),
                    self.nodes.len()
                )));
            }
            if m.shape.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invariant(format!("mode {}: non-finite shape value", m.index)));
            }
        }
        if !self.modes.iter().any(|m| m.kind == ModeKind::Vertical) {
            return Err(Error::Invariant("at least one vertical mode is required".into()));
        }
        if !self.modes.iter().any(|m| m.kind == ModeKind::Torsional) {
            return Err(Error::Invariant("at least one torsional mode is required".into()));
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn total_length(&self) -> f64 {
        self.side_spans[0] + self.main_span + self.side_spans[1]
    }

    /// Span coordinate of the middle of the main span.
    pub fn midspan(&self) -> f64 {
        self.side_spans[0] + 0.5 * self.main_span
    }

    /// Finds the node interval containing `x`.
    pub fn locate(&self, x: f64) -> Result<GridPoint> {
        let n = self.nodes.len();
        let (lo, hi) = (self.nodes[0], self.nodes[n - 1]);
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfRange {
                what: "span position x",
                value: x,
                lo,
                hi,
            });
        }
        let upper = self.nodes.partition_point(|&v| v <= x).clamp(1, n - 1);
        let node = upper - 1;
        let weight = (x - self.nodes[node]) / (self.nodes[node + 1] - self.nodes[node]);
        Ok(GridPoint { node, weight })
    }

    #[inline]
    fn blend(shape: &[f64], gp: GridPoint) -> f64 {
        (1.0 - gp.weight) * shape[gp.node] + gp.weight * shape[gp.node + 1]
    }

    /// Mode shape of mode `mode` (position in [`Self::modes`]) at `x` for
    /// the requested section DOF. Zero when the DOF does not match the mode
    /// kind.
    pub fn shape_at(&self, mode: usize, x: f64, dof: Dof) -> Result<f64> {
        let m = self.modes.get(mode).ok_or(Error::Dimension {
            expected: self.modes.len(),
            got: mode,
        })?;
        let gp = self.locate(x)?;
        if m.kind.dof() != dof {
            return Ok(0.0);
        }
        Ok(Self::blend(&m.shape, gp))
    }

    /// Writes every mode's own-DOF shape value at `gp` into `out`.
    pub fn shapes_at(&self, gp: GridPoint, out: &mut [f64]) {
        for (o, m) in out.iter_mut().zip(&self.modes) {
            *o = Self::blend(&m.shape, gp);
        }
    }

    /// Span-wise slope of every mode shape in the interval of `gp`.
    pub fn slopes_at(&self, gp: GridPoint, out: &mut [f64]) {
        let dx = self.nodes[gp.node + 1] - self.nodes[gp.node];
        for (o, m) in out.iter_mut().zip(&self.modes) {
            *o = (m.shape[gp.node + 1] - m.shape[gp.node]) / dx;
        }
    }

    pub fn modal_matrices(&self) -> ModalMatrices {
        let n = self.modes.len();
        let mut mm = ModalMatrices {
            mass: Vec::with_capacity(n),
            damping: Vec::with_capacity(n),
            stiffness: Vec::with_capacity(n),
        };
        for m in &self.modes {
            let w = m.omega();
            mm.mass.push(m.modal_mass);
            mm.damping.push(2.0 * m.damping_ratio * m.modal_mass * w);
            mm.stiffness.push(m.modal_mass * w * w);
        }
        mm
    }

    /// Generalised force vector of a point load `force` (vertical force,
    /// lateral force, torsional moment) applied at `x`.
    pub fn project_point_force(&self, x: f64, force: SectionVector) -> Result<Vec<f64>> {
        let mut q = vec![0.0; self.modes.len()];
        self.add_point_force(x, force, 1.0, &mut q)?;
        Ok(q)
    }

    /// Accumulates `scale * force` at `x` into the generalised force vector.
    pub fn add_point_force(
        &self,
        x: f64,
        force: SectionVector,
        scale: f64,
        out: &mut [f64],
    ) -> Result<()> {
        if out.len() != self.modes.len() {
            return Err(Error::Dimension {
                expected: self.modes.len(),
                got: out.len(),
            });
        }
        let gp = self.locate(x)?;
        for (o, m) in out.iter_mut().zip(&self.modes) {
            *o += scale * Self::blend(&m.shape, gp) * force.component(m.kind.dof());
        }
        Ok(())
    }

    /// Section displacement at `x` for modal coordinates `q`.
    pub fn physical_response(&self, q: &[f64], x: f64) -> Result<SectionVector> {
        if q.len() != self.modes.len() {
            return Err(Error::Dimension {
                expected: self.modes.len(),
                got: q.len(),
            });
        }
        let gp = self.locate(x)?;
        Ok(self.response_at_grid_point(q, gp))
    }

    pub(crate) fn response_at_grid_point(&self, q: &[f64], gp: GridPoint) -> SectionVector {
        let mut r = SectionVector::default();
        for (qj, m) in q.iter().zip(&self.modes) {
            let v = Self::blend(&m.shape, gp) * qj;
            match m.kind {
                ModeKind::Vertical => r.h += v,
                ModeKind::Lateral => r.p += v,
                ModeKind::Torsional => r.alpha += v,
            }
        }
        r
    }

    /// Section displacement at node `i` (no interpolation).
    pub fn response_at_node(&self, q: &[f64], i: usize) -> SectionVector {
        let mut r = SectionVector::default();
        for (qj, m) in q.iter().zip(&self.modes) {
            let v = m.shape[i] * qj;
            match m.kind {
                ModeKind::Vertical => r.h += v,
                ModeKind::Lateral => r.p += v,
                ModeKind::Torsional => r.alpha += v,
            }
        }
        r
    }

    /// Trapezoid integration weights (tributary lengths) of the node grid.
    pub fn tributary_lengths(&self) -> Vec<f64> {
        trapezoid_weights(&self.nodes)
    }
}

pub(crate) fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let half = 0.5 * (x[i + 1] - x[i]);
        w[i] += half;
        w[i + 1] += half;
    }
    w
}
