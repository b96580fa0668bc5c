//! Quasi-steady buffeting forces on deck strips.
//!
//! Frames: `h` positive upward, `p` positive downwind, `alpha` positive
//! nose-up (leading edge up). The vertical relative velocity seen by the
//! section for force component `i` is
//!
//! ```text
//! v_i = w - h_dot + m_i B alpha_dot,      U_h = U + u - p_dot
//! phi_i = atan(v_i / U_h),  alpha_e,i = alpha_s + alpha + phi_i,  U_r,i^2 = v_i^2 + U_h^2
//! ```
//!
//! `h_dot` enters with a minus sign because `h` is measured upward; written
//! with a downward deck coordinate the expression is `w + h_dot_down + ...`.
//!
//! Wind-axis forces `F_D`, `F_L`, `F_M` are resolved into section axes with
//! the flow-rotation angle `phi_i`. By default the along-wind force is
//! `+F_D` and the vertical force `+F_L` at zero rotation:
//!
//! ```text
//! D = F_D cos(phi_D) - F_L sin(phi_D)
//! L = F_L cos(phi_L) + F_D sin(phi_L)
//! ```
//!
//! [`AeroConfig::equations_as_printed`] switches to
//! `D = F_L sin(phi_D) - F_D cos(phi_D)`, `L = F_L cos(phi_L) - F_D sin(phi_L)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bridge::{trapezoid_weights, Dof, ModalBridge, SectionVector};
use crate::error::{Error, Result};
use crate::fields::{Gust, WindField};

/// Static coefficient table, linear between rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AeroCoefficients {
    alpha: Vec<f64>,
    cd: Vec<f64>,
    cl: Vec<f64>,
    cm: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSample {
    pub cd: f64,
    pub cl: f64,
    pub cm: f64,
    /// Query fell outside the table and was clamped to the nearest end.
    pub clamped: bool,
}

impl AeroCoefficients {
    /// Rows of `(alpha [rad], C_D, C_L, C_M)`.
    pub fn new(rows: &[[f64; 4]]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Invariant("coefficient table needs at least two rows".into()));
        }
        if rows.windows(2).any(|w| !(w[1][0] > w[0][0])) {
            return Err(Error::Invariant("coefficient table angles must be strictly increasing".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("coefficient table contains non-finite values".into()));
        }
        let ten = 10f64.to_radians() * (1.0 - 1e-12);
        if rows[0][0] > -ten || rows[rows.len() - 1][0] < ten {
            return Err(Error::Invariant("coefficient table must cover at least -10..+10 degrees".into()));
        }
        Ok(Self {
            alpha: rows.iter().map(|r| r[0]).collect(),
            cd: rows.iter().map(|r| r[1]).collect(),
            cl: rows.iter().map(|r| r[2]).collect(),
            cm: rows.iter().map(|r| r[3]).collect(),
        })
    }

    /// Same coefficients at every angle.
    pub fn constant(cd: f64, cl: f64, cm: f64) -> Self {
        let a = 90f64.to_radians();
        Self::new(&[[-a, cd, cl, cm], [a, cd, cl, cm]]).expect("valid constant table")
    }

    /// Parses CSV text with columns `alpha_deg,CD,CL,CM`; `#` starts a comment.
    pub fn parse_csv(text: &str, file: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if !header_seen {
                let want = ["alpha_deg", "CD", "CL", "CM"];
                if cells != want {
                    return Err(Error::parse(file, i + 1, format!("expected header `{}`", want.join(","))));
                }
                header_seen = true;
                continue;
            }
            if cells.len() != 4 {
                return Err(Error::parse(file, i + 1, format!("expected 4 values, found {}", cells.len())));
            }
            let mut row = [0.0f64; 4];
            for (k, c) in cells.iter().enumerate() {
                row[k] = c
                    .parse()
                    .map_err(|_| Error::parse(file, i + 1, format!("cannot parse `{c}`")))?;
            }
            row[0] = row[0].to_radians();
            rows.push(row);
        }
        Self::new(&rows).map_err(|e| Error::parse(file, 0, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, &path.display().to_string())
    }

    pub fn range(&self) -> (f64, f64) {
        (self.alpha[0], self.alpha[self.alpha.len() - 1])
    }

    pub fn rows(&self) -> impl Iterator<Item = [f64; 4]> + '_ {
        (0..self.alpha.len()).map(|i| [self.alpha[i], self.cd[i], self.cl[i], self.cm[i]])
    }

    pub fn at(&self, alpha: f64) -> CoefficientSample {
        let (lo, hi) = self.range();
        let clamped = !(alpha >= lo && alpha <= hi);
        let a = alpha.clamp(lo, hi);
        let n = self.alpha.len();
        let i = self.alpha.partition_point(|&v| v <= a).clamp(1, n - 1) - 1;
        let w = (a - self.alpha[i]) / (self.alpha[i + 1] - self.alpha[i]);
        let lerp = |c: &[f64]| (1.0 - w) * c[i] + w * c[i + 1];
        CoefficientSample {
            cd: lerp(&self.cd),
            cl: lerp(&self.cl),
            cm: lerp(&self.cm),
            clamped,
        }
    }

    /// Largest absolute slope of any coefficient between rows [1/rad].
    pub fn max_slope(&self) -> f64 {
        self.alpha
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let da = w[1] - w[0];
                [&self.cd, &self.cl, &self.cm]
                    .iter()
                    .map(|c| ((c[i + 1] - c[i]) / da).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Index of a wind-axis force component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceComponent {
    Drag = 0,
    Lift = 1,
    Moment = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeroConfig {
    /// Static angle of attack [rad].
    pub static_angle: f64,
    /// Aerodynamic-centre factors `(m_D, m_L, m_M)`.
    pub aero_centre: [f64; 3],
    /// Air density [kg/m^3].
    pub density: f64,
    /// Deck width `B` [m].
    pub width: f64,
    pub equations_as_printed: bool,
}

impl Default for AeroConfig {
    fn default() -> Self {
        Self {
            static_angle: 0.0,
            aero_centre: [0.0, 0.25, 0.25],
            density: 1.25,
            width: 31.0,
            equations_as_printed: false,
        }
    }
}

impl AeroConfig {
    pub fn validate(&self) -> Result<()> {
        if self.aero_centre.iter().any(|m| !(m.abs() <= 1.0)) {
            return Err(Error::Invariant("aerodynamic-centre factors must satisfy |m_i| <= 1".into()));
        }
        if !(self.density > 0.0 && self.width > 0.0 && self.static_angle.is_finite()) {
            return Err(Error::Invariant("air density and deck width must be positive".into()));
        }
        Ok(())
    }
}

/// Section motion in the solver frame.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DeckMotion {
    pub h: f64,
    pub p: f64,
    pub alpha: f64,
    pub h_dot: f64,
    pub p_dot: f64,
    pub alpha_dot: f64,
}

impl DeckMotion {
    pub fn is_finite(&self) -> bool {
        [self.h, self.p, self.alpha, self.h_dot, self.p_dot, self.alpha_dot]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Instantaneous wind at a section.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WindSample {
    pub mean: f64,
    pub u: f64,
    /// Lateral turbulence, carried but unused by the force model.
    pub v: f64,
    pub w: f64,
}

impl WindSample {
    pub fn new(mean: f64, gust: Gust) -> Self {
        Self {
            mean,
            u: gust.u,
            v: gust.v,
            w: gust.w,
        }
    }
}

#[inline]
fn relative_velocity(m: &DeckMotion, w: &WindSample, cfg: &AeroConfig, i: ForceComponent) -> Result<(f64, f64)> {
    let horizontal = w.mean + w.u - m.p_dot;
    if !(horizontal > 0.0) {
        return Err(Error::QuasiSteadyValidity(horizontal));
    }
    let vertical = w.w - m.h_dot + cfg.aero_centre[i as usize] * cfg.width * m.alpha_dot;
    Ok((vertical, horizontal))
}

/// Flow-rotation angle `phi_i` [rad].
pub fn flow_angle(m: &DeckMotion, w: &WindSample, cfg: &AeroConfig, i: ForceComponent) -> Result<f64> {
    let (v, h) = relative_velocity(m, w, cfg, i)?;
    Ok((v / h).atan())
}

/// Effective angle of attack `alpha_e,i` [rad].
pub fn effective_angle(m: &DeckMotion, w: &WindSample, cfg: &AeroConfig, i: ForceComponent) -> Result<f64> {
    Ok(cfg.static_angle + m.alpha + flow_angle(m, w, cfg, i)?)
}

/// Resultant relative velocity `U_r,i` [m/s].
pub fn resultant_velocity(m: &DeckMotion, w: &WindSample, cfg: &AeroConfig, i: ForceComponent) -> f64 {
    let vertical = w.w - m.h_dot + cfg.aero_centre[i as usize] * cfg.width * m.alpha_dot;
    let horizontal = w.mean + w.u - m.p_dot;
    vertical.hypot(horizontal)
}

/// Section forces per unit length plus whether any coefficient lookup clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionForces {
    /// `h`: vertical force L [N/m], `p`: along-wind force D [N/m], `alpha`: moment M [N m/m].
    pub force: SectionVector,
    pub clamped: bool,
}

pub fn quasi_steady_forces(
    m: &DeckMotion,
    w: &WindSample,
    coeffs: &AeroCoefficients,
    cfg: &AeroConfig,
) -> Result<SectionForces> {
    let b = cfg.width;
    let mut phi = [0.0; 3];
    let mut f = [0.0; 3];
    let mut clamped = false;
    for (k, comp) in [ForceComponent::Drag, ForceComponent::Lift, ForceComponent::Moment]
        .into_iter()
        .enumerate()
    {
        let (v, h) = relative_velocity(m, w, cfg, comp)?;
        phi[k] = (v / h).atan();
        let q = 0.5 * cfg.density * (v * v + h * h);
        let c = coeffs.at(cfg.static_angle + m.alpha + phi[k]);
        clamped |= c.clamped;
        f[k] = match comp {
            ForceComponent::Drag => q * b * c.cd,
            ForceComponent::Lift => q * b * c.cl,
            ForceComponent::Moment => q * b * b * c.cm,
        };
    }
    let [fd, fl, fm] = f;
    let (sd, cd) = phi[0].sin_cos();
    let (sl, cl) = phi[1].sin_cos();
    let (drag, lift) = if cfg.equations_as_printed {
        (fl * sd - fd * cd, fl * cl - fd * sl)
    } else {
        (fd * cd - fl * sd, fl * cl + fd * sl)
    };
    Ok(SectionForces {
        force: SectionVector::new(lift, drag, fm),
        clamped,
    })
}

/// Strip-wise wind loading on the modal bridge at the field's stations.
#[derive(Debug, Clone)]
pub struct WindLoading<'a> {
    bridge: &'a ModalBridge,
    field: &'a WindField,
    coeffs: &'a AeroCoefficients,
    cfg: AeroConfig,
    tributary: Vec<f64>,
    /// Own-DOF shape of every mode at every station, `[station][mode]`.
    shapes: Vec<f64>,
    dofs: Vec<Dof>,
    gusts: Vec<Gust>,
    clamp_events: u64,
}

impl<'a> WindLoading<'a> {
    pub fn new(
        bridge: &'a ModalBridge,
        field: &'a WindField,
        coeffs: &'a AeroCoefficients,
        cfg: AeroConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = bridge.mode_count();
        let stations = field.stations();
        let mut shapes = vec![0.0; stations.len() * n];
        for (s, &x) in stations.iter().enumerate() {
            let gp = bridge.locate(x)?;
            bridge.shapes_at(gp, &mut shapes[s * n..(s + 1) * n]);
        }
        Ok(Self {
            bridge,
            field,
            coeffs,
            cfg,
            tributary: if stations.len() > 1 {
                trapezoid_weights(stations)
            } else {
                vec![1.0]
            },
            shapes,
            dofs: bridge.modes().iter().map(|m| m.kind.dof()).collect(),
            gusts: vec![Gust::default(); stations.len()],
            clamp_events: 0,
        })
    }

    pub fn config(&self) -> &AeroConfig {
        &self.cfg
    }

    pub fn field(&self) -> &WindField {
        self.field
    }

    /// Number of strip evaluations whose effective angle left the table.
    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }

    /// Generalised wind forces at time `t` for modal state `(q, q_dot)`.
    /// With `feedback` off the deck is treated as rigid and undeformed.
    pub fn modal_forces(
        &mut self,
        t: f64,
        q: &[f64],
        q_dot: &[f64],
        feedback: bool,
        mean_only: bool,
        out: &mut [f64],
    ) -> Result<()> {
        let n = self.dofs.len();
        if q.len() != n || q_dot.len() != n || out.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: q.len().min(q_dot.len()).min(out.len()),
            });
        }
        if mean_only {
            self.gusts.iter_mut().for_each(|g| *g = Gust::default());
        } else {
            self.field.snapshot(t, &mut self.gusts)?;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        let mean = self.field.mean_speed;
        for (s, gust) in self.gusts.iter().enumerate() {
            let phi = &self.shapes[s * n..(s + 1) * n];
            let mut motion = DeckMotion::default();
            if feedback {
                for j in 0..n {
                    let (d, v) = (phi[j] * q[j], phi[j] * q_dot[j]);
                    match self.dofs[j] {
                        Dof::H => {
                            motion.h += d;
                            motion.h_dot += v;
                        }
                        Dof::P => {
                            motion.p += d;
                            motion.p_dot += v;
                        }
                        Dof::Alpha => {
                            motion.alpha += d;
                            motion.alpha_dot += v;
                        }
                    }
                }
            }
            let f = quasi_steady_forces(&motion, &WindSample::new(mean, *gust), self.coeffs, &self.cfg)?;
            if f.clamped {
                self.clamp_events += 1;
            }
            let scale = self.tributary[s];
            for j in 0..n {
                out[j] += phi[j] * f.force.component(self.dofs[j]) * scale;
            }
        }
        Ok(())
    }

    pub fn bridge(&self) -> &ModalBridge {
        self.bridge
    }
}
