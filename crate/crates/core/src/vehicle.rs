//! Linear multi-body vehicle models and tyre contact.
//!
//! Each vehicle has one or two sprung bodies with heave `z`, pitch `theta`
//! (nose up) and roll `alpha`, and one unsprung mass per wheel. A point at
//! longitudinal offset `a` (forward positive) and lateral offset `y` on a
//! body moves vertically by `z + a theta - y alpha`. A second body is
//! pinned to the first: the pin transmits vertical force only, so the
//! trailer heave is eliminated and the trailer keeps its own pitch and roll.
//!
//! Generalised coordinates are ordered `[z0, theta0, alpha0, (theta1,
//! alpha1), wheels...]`, measured from static equilibrium on a flat rigid
//! road. The tyre force pushing the deck down at wheel `n` is
//!
//! ```text
//! F_n = P_n + k_tn (r_n - z_n) + c_tn (r_dot_n - z_dot_n)
//! ```
//!
//! with `P_n` the static wheel load and `r_n` the road elevation under the
//! wheel (deck plus roughness).

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::newmark::DenseIntegrator;

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleClass {
    Car,
    Van,
    Bus,
    Truck2,
    Truck3,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 5] = [Self::Car, Self::Van, Self::Bus, Self::Truck2, Self::Truck3];

    pub fn name(self) -> &'static str {
        match self {
            Self::Car => "car",
            Self::Van => "van",
            Self::Bus => "bus",
            Self::Truck2 => "truck2",
            Self::Truck3 => "truck3",
        }
    }
}

impl FromStr for VehicleClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Invariant(format!("unknown vehicle class `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Body {
    pub mass: f64,
    pub pitch_inertia: f64,
    pub roll_inertia: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxleSpec {
    pub body: usize,
    pub offset: f64,
    pub half_track: f64,
    pub suspension_stiffness: f64,
    pub suspension_damping: f64,
    pub unsprung_mass: f64,
    pub tyre_stiffness: f64,
    pub tyre_damping: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hitch {
    /// Pin offset from the CG of body 0 [m].
    pub front_offset: f64,
    /// Pin offset from the CG of body 1 [m].
    pub rear_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub length: f64,
    pub cg_from_front: f64,
    pub speed_cap_kmh: f64,
    pub body: Vec<Body>,
    pub axle: Vec<AxleSpec>,
    #[serde(default)]
    pub hitch: Option<Hitch>,
}

/// Nominal parameters per class.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    classes: BTreeMap<VehicleClass, ClassSpec>,
}

const BUILTIN_CATALOG: &str = include_str!("../../../data/vehicle_catalog.toml");

impl Catalog {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_CATALOG, "vehicle_catalog.toml").expect("shipped catalog is valid")
    }

    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let raw: BTreeMap<String, ClassSpec> = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(1);
            Error::parse(file, line, e.message())
        })?;
        let mut classes = BTreeMap::new();
        for (name, spec) in raw {
            let class = VehicleClass::from_str(&name)?;
            VehicleParams::nominal(class, &spec)
                .validate()
                .map_err(|e| Error::parse(file, 1, format!("[{name}]: {e}")))?;
            classes.insert(class, spec);
        }
        Ok(Self { classes })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn get(&self, class: VehicleClass) -> Result<&ClassSpec> {
        self.classes
            .get(&class)
            .ok_or_else(|| Error::Invariant(format!("class `{}` is not in the vehicle catalog", class.name())))
    }

    pub fn classes(&self) -> impl Iterator<Item = VehicleClass> + '_ {
        self.classes.keys().copied()
    }
}

/// One wheel with its suspension and tyre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wheel {
    pub body: usize,
    /// Longitudinal offset from the carrying body's CG, forward positive [m].
    pub offset: f64,
    /// Lateral offset in the vehicle frame [m]; positive to the driver's right.
    pub lateral: f64,
    pub suspension_stiffness: f64,
    pub suspension_damping: f64,
    pub mass: f64,
    pub tyre_stiffness: f64,
    pub tyre_damping: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    pub class: VehicleClass,
    pub length: f64,
    pub cg_from_front: f64,
    pub bodies: Vec<Body>,
    pub wheels: Vec<Wheel>,
    pub hitch: Option<Hitch>,
}

impl VehicleParams {
    pub fn nominal(class: VehicleClass, spec: &ClassSpec) -> Self {
        let wheels = spec
            .axle
            .iter()
            .flat_map(|a| {
                [-a.half_track, a.half_track].map(|y| Wheel {
                    body: a.body,
                    offset: a.offset,
                    lateral: y,
                    suspension_stiffness: a.suspension_stiffness,
                    suspension_damping: a.suspension_damping,
                    mass: a.unsprung_mass,
                    tyre_stiffness: a.tyre_stiffness,
                    tyre_damping: a.tyre_damping,
                })
            })
            .collect();
        Self {
            class,
            length: spec.length,
            cg_from_front: spec.cg_from_front,
            bodies: spec.body.clone(),
            wheels,
            hitch: spec.hitch,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        match (self.bodies.len(), self.hitch.is_some()) {
            (1, false) | (2, true) => {}
            (n, h) => bad.push(format!("{n} bodies with hitch = {h}; need 1 body or 2 bodies and a hitch")),
        }
        for (i, b) in self.bodies.iter().enumerate() {
            if !(b.mass > 0.0 && b.pitch_inertia > 0.0 && b.roll_inertia > 0.0) {
                bad.push(format!("body {i}: mass and inertias must be positive"));
            }
        }
        for (i, w) in self.wheels.iter().enumerate() {
            if w.body >= self.bodies.len() {
                bad.push(format!("wheel {i}: body index {} out of range", w.body));
            }
            if !(w.mass > 0.0 && w.suspension_stiffness > 0.0 && w.tyre_stiffness > 0.0) {
                bad.push(format!("wheel {i}: masses and stiffnesses must be positive"));
            }
            if !(w.suspension_damping >= 0.0 && w.tyre_damping >= 0.0) {
                bad.push(format!("wheel {i}: dampings must be non-negative"));
            }
        }
        let expected_min = if self.bodies.len() == 2 { 6 } else { 4 };
        if self.wheels.len() < expected_min {
            bad.push(format!("{} wheels; this class needs at least {expected_min}", self.wheels.len()));
        }
        if !(self.length > 0.0 && self.cg_from_front >= 0.0) {
            bad.push("length must be positive and cg_from_front non-negative".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum::<f64>() + self.wheels.iter().map(|w| w.mass).sum::<f64>()
    }

    pub fn weight(&self) -> f64 {
        self.total_mass() * GRAVITY
    }

    /// Longitudinal CG position of each body relative to body 0 [m].
    pub fn body_positions(&self) -> Vec<f64> {
        match self.hitch {
            Some(h) if self.bodies.len() == 2 => vec![0.0, h.front_offset - h.rear_offset],
            _ => vec![0.0; self.bodies.len()],
        }
    }

    /// Distance of every wheel behind the front bumper [m].
    pub fn wheel_setbacks(&self) -> Vec<f64> {
        let pos = self.body_positions();
        self.wheels
            .iter()
            .map(|w| self.cg_from_front - pos[w.body] - w.offset)
            .collect()
    }

    /// Collapses an articulated vehicle into one rigid body.
    pub fn rigidified(&self) -> Self {
        if self.bodies.len() < 2 {
            return self.clone();
        }
        let pos = self.body_positions();
        let mass: f64 = self.bodies.iter().map(|b| b.mass).sum();
        let cg = self.bodies.iter().zip(&pos).map(|(b, x)| b.mass * x).sum::<f64>() / mass;
        let pitch = self
            .bodies
            .iter()
            .zip(&pos)
            .map(|(b, x)| b.pitch_inertia + b.mass * (x - cg).powi(2))
            .sum();
        let roll = self.bodies.iter().map(|b| b.roll_inertia).sum();
        let wheels = self
            .wheels
            .iter()
            .map(|w| Wheel {
                body: 0,
                offset: w.offset + pos[w.body] - cg,
                ..*w
            })
            .collect();
        Self {
            class: self.class,
            length: self.length,
            cg_from_front: self.cg_from_front - cg,
            bodies: vec![Body {
                mass,
                pitch_inertia: pitch,
                roll_inertia: roll,
            }],
            wheels,
            hitch: None,
        }
    }
}

/// Relative standard deviations of the randomised masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Variability {
    pub unsprung_mass: f64,
    pub sprung_mass: f64,
}

impl Default for Variability {
    fn default() -> Self {
        Self {
            unsprung_mass: 0.05,
            sprung_mass: 0.0,
        }
    }
}

/// Uniform draw with mean `mean` and standard deviation `rel * mean`.
fn uniform_about<R: Rng + ?Sized>(mean: f64, rel: f64, rng: &mut R) -> f64 {
    if rel == 0.0 {
        return mean;
    }
    let half = 3f64.sqrt() * rel * mean;
    mean - half + 2.0 * half * rng.random::<f64>()
}

/// Draws one vehicle of `class`: every unsprung mass is uniform about its
/// nominal value; other parameters stay nominal unless `sprung_mass` is set.
pub fn sample_params<R: Rng + ?Sized>(
    class: VehicleClass,
    spec: &ClassSpec,
    variability: &Variability,
    rng: &mut R,
) -> VehicleParams {
    let mut p = VehicleParams::nominal(class, spec);
    for w in &mut p.wheels {
        w.mass = uniform_about(w.mass, variability.unsprung_mass, rng);
    }
    for b in &mut p.bodies {
        let scale = uniform_about(1.0, variability.sprung_mass, rng);
        b.mass *= scale;
        b.pitch_inertia *= scale;
        b.roll_inertia *= scale;
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleMatrices {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// Generalised index of every wheel DOF.
    pub wheel_dofs: Vec<usize>,
    /// Generalised gravity load [N].
    pub gravity: DVector<f64>,
}

impl VehicleMatrices {
    pub fn dofs(&self) -> usize {
        self.mass.nrows()
    }
}

/// Assembles `(M, C, K)` with tyres grounded on a rigid road.
pub fn vehicle_matrices(p: &VehicleParams) -> Result<VehicleMatrices> {
    p.validate()?;
    let nb = p.bodies.len();
    let nw = p.wheels.len();
    let full = 3 * nb + nw;
    // Generalised -> full coordinate map.
    let gen = full - (nb - 1);
    let mut t = DMatrix::<f64>::zeros(full, gen);
    t[(0, 0)] = 1.0;
    t[(1, 1)] = 1.0;
    t[(2, 2)] = 1.0;
    if let Some(h) = p.hitch.filter(|_| nb == 2) {
        // z1 = z0 + a0 theta0 - a1 theta1 keeps the pin points together.
        t[(3, 0)] = 1.0;
        t[(3, 1)] = h.front_offset;
        t[(3, 3)] = -h.rear_offset;
        t[(4, 3)] = 1.0;
        t[(5, 4)] = 1.0;
    }
    for n in 0..nw {
        t[(3 * nb + n, 3 * nb - (nb - 1) + n)] = 1.0;
    }

    let mut m = DMatrix::<f64>::zeros(full, full);
    let mut c = DMatrix::<f64>::zeros(full, full);
    let mut k = DMatrix::<f64>::zeros(full, full);
    let mut g = DVector::<f64>::zeros(full);
    for (b, body) in p.bodies.iter().enumerate() {
        m[(3 * b, 3 * b)] = body.mass;
        m[(3 * b + 1, 3 * b + 1)] = body.pitch_inertia;
        m[(3 * b + 2, 3 * b + 2)] = body.roll_inertia;
        g[3 * b] = -body.mass * GRAVITY;
    }
    for (n, w) in p.wheels.iter().enumerate() {
        let i = 3 * nb + n;
        m[(i, i)] = w.mass;
        g[i] = -w.mass * GRAVITY;
        // Suspension stretch = z_n - (z_b + a theta_b - y alpha_b).
        let mut s = DVector::<f64>::zeros(full);
        s[i] = 1.0;
        s[3 * w.body] = -1.0;
        s[3 * w.body + 1] = -w.offset;
        s[3 * w.body + 2] = w.lateral;
        let ss = &s * s.transpose();
        k += &ss * w.suspension_stiffness;
        c += &ss * w.suspension_damping;
        k[(i, i)] += w.tyre_stiffness;
        c[(i, i)] += w.tyre_damping;
    }
    let tt = t.transpose();
    let first_wheel = gen - nw;
    Ok(VehicleMatrices {
        mass: &tt * m * &t,
        damping: &tt * c * &t,
        stiffness: &tt * k * &t,
        wheel_dofs: (first_wheel..gen).collect(),
        gravity: &tt * g,
    })
}

/// Undamped natural frequencies [Hz], ascending.
pub fn natural_frequencies(m: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<Vec<f64>> {
    let l = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Invariant("mass matrix is not positive definite".into()))?
        .l();
    let li = l
        .try_inverse()
        .ok_or_else(|| Error::Invariant("singular mass factor".into()))?;
    let a = &li * k * li.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let mut f: Vec<f64> = a
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt() / (2.0 * std::f64::consts::PI))
        .collect();
    f.sort_by(f64::total_cmp);
    Ok(f)
}

/// Road elevation and its rate under one wheel.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RoadInput {
    pub r: f64,
    pub r_dot: f64,
}

/// Vehicle DOF state about static equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

impl VehicleState {
    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.v).chain(&self.a).all(|x| x.is_finite())
    }
}

/// A vehicle ready for time stepping at a fixed `dt`.
#[derive(Debug, Clone)]
pub struct Vehicle {
    pub params: VehicleParams,
    matrices: VehicleMatrices,
    integrator: DenseIntegrator,
    /// Static wheel loads `P_n` [N].
    static_loads: Vec<f64>,
    /// `K^-1` columns of the wheel DOFs, row-major `[dof][wheel]`.
    static_flex: Vec<f64>,
    setbacks: Vec<f64>,
    /// Allow tyre forces to drop to zero instead of pulling the deck up.
    pub unilateral: bool,
}

impl Vehicle {
    pub fn new(params: VehicleParams, dt: f64) -> Result<Self> {
        let matrices = vehicle_matrices(&params)?;
        let integrator = DenseIntegrator::new(&matrices.mass, &matrices.damping, &matrices.stiffness, dt)?;
        let kinv = matrices
            .stiffness
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Invariant("vehicle static system is singular".into()))?
            .inverse();
        let x_static = &kinv * &matrices.gravity;
        let static_loads = params
            .wheels
            .iter()
            .zip(&matrices.wheel_dofs)
            .map(|(w, &d)| -w.tyre_stiffness * x_static[d])
            .collect();
        let n = matrices.dofs();
        let nw = params.wheels.len();
        let mut static_flex = vec![0.0; n * nw];
        for i in 0..n {
            for (wi, &d) in matrices.wheel_dofs.iter().enumerate() {
                static_flex[i * nw + wi] = kinv[(i, d)];
            }
        }
        let setbacks = params.wheel_setbacks();
        Ok(Self {
            params,
            matrices,
            integrator,
            static_loads,
            static_flex,
            setbacks,
            unilateral: false,
        })
    }

    pub fn matrices(&self) -> &VehicleMatrices {
        &self.matrices
    }

    pub fn integrator(&self) -> &DenseIntegrator {
        &self.integrator
    }

    pub fn dofs(&self) -> usize {
        self.matrices.dofs()
    }

    pub fn wheel_count(&self) -> usize {
        self.params.wheels.len()
    }

    pub fn static_loads(&self) -> &[f64] {
        &self.static_loads
    }

    /// Distance of every wheel behind the front bumper [m].
    pub fn setbacks(&self) -> &[f64] {
        &self.setbacks
    }

    /// Generalised road forcing `k_t r + c_t r_dot` on the wheel DOFs.
    #[inline]
    fn road_force(&self, wheel: usize, road: RoadInput) -> f64 {
        let w = &self.params.wheels[wheel];
        w.tyre_stiffness * road.r + w.tyre_damping * road.r_dot
    }

    /// Quasi-static state following the road: `K x = f_road`.
    pub fn static_state(&self, road: &[RoadInput]) -> Result<VehicleState> {
        let n = self.dofs();
        let nw = self.wheel_count();
        let mut x = vec![0.0; n];
        let mut v = vec![0.0; n];
        for i in 0..n {
            for (w, rd) in road.iter().enumerate() {
                let f = &self.static_flex[i * nw + w];
                x[i] += f * self.params.wheels[w].tyre_stiffness * rd.r;
                v[i] += f * self.params.wheels[w].tyre_stiffness * rd.r_dot;
            }
        }
        let mut f = vec![0.0; n];
        for (w, rd) in road.iter().enumerate() {
            f[self.matrices.wheel_dofs[w]] = self.road_force(w, *rd);
        }
        let mut a = vec![0.0; n];
        self.integrator.acceleration(&x, &v, &f, &mut a)?;
        Ok(VehicleState { x, v, a })
    }

    /// End-of-step state for road input `road` at the end of the step,
    /// given the zero-input prediction `free` from [`Vehicle::predict`].
    pub fn advance(&self, state: &VehicleState, free: &[f64], road: &[RoadInput], out: &mut VehicleState) {
        let n = self.dofs();
        out.x.copy_from_slice(free);
        for (w, &d) in self.matrices.wheel_dofs.iter().enumerate() {
            let f = self.road_force(w, road[w]);
            if f != 0.0 {
                for i in 0..n {
                    out.x[i] += self.integrator.flexibility(i, d) * f;
                }
            }
        }
        let k = &self.integrator.k;
        for i in 0..n {
            let (v1, a1) = k.finish(state.x[i], state.v[i], state.a[i], out.x[i]);
            out.v[i] = v1;
            out.a[i] = a1;
        }
    }

    /// End-of-step displacement with zero road input.
    pub fn predict(&self, state: &VehicleState, free: &mut [f64]) {
        self.integrator.free_displacement(&state.x, &state.v, &state.a, free);
    }

    /// Downward tyre force on the deck at every wheel [N].
    pub fn contact_forces(&self, state: &VehicleState, road: &[RoadInput], out: &mut [f64]) -> usize {
        let mut separated = 0;
        for (w, &d) in self.matrices.wheel_dofs.iter().enumerate() {
            let wheel = &self.params.wheels[w];
            let f = self.static_loads[w]
                + wheel.tyre_stiffness * (road[w].r - state.x[d])
                + wheel.tyre_damping * (road[w].r_dot - state.v[d]);
            if f < 0.0 {
                separated += 1;
            }
            out[w] = if self.unilateral { f.max(0.0) } else { f };
        }
        separated
    }

    pub fn rest_state(&self) -> VehicleState {
        let n = self.dofs();
        VehicleState {
            x: vec![0.0; n],
            v: vec![0.0; n],
            a: vec![0.0; n],
        }
    }

    /// Generalised index of wheel `w`.
    pub fn wheel_dof(&self, w: usize) -> usize {
        self.matrices.wheel_dofs[w]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Complex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn car() -> VehicleParams {
        let cat = Catalog::builtin();
        VehicleParams::nominal(VehicleClass::Car, cat.get(VehicleClass::Car).unwrap())
    }

    #[test]
    fn catalog_has_every_class() {
        let cat = Catalog::builtin();
        assert_eq!(cat.classes().collect::<Vec<_>>(), VehicleClass::ALL.to_vec());
        let t3 = VehicleParams::nominal(VehicleClass::Truck3, cat.get(VehicleClass::Truck3).unwrap());
        assert_eq!(t3.wheels.len(), 6);
        assert_eq!(vehicle_matrices(&t3).unwrap().dofs(), 5 + 6);
    }

    #[test]
    fn catalog_errors_name_the_file() {
        let err = Catalog::parse("[car]\nlength = \"x\"\n", "cat.toml").unwrap_err();
        assert!(err.to_string().starts_with("cat.toml:"), "{err}");
        let err = Catalog::parse("[plane]\nlength = 1.0\n", "cat.toml").unwrap_err();
        assert!(err.to_string().contains("cat.toml"), "{err}");
    }

    #[test]
    fn matrices_are_symmetric_and_definite() {
        let cat = Catalog::builtin();
        for class in VehicleClass::ALL {
            let p = VehicleParams::nominal(class, cat.get(class).unwrap());
            let m = vehicle_matrices(&p).unwrap();
            for a in [&m.mass, &m.damping, &m.stiffness] {
                assert!((a - a.transpose()).amax() <= 1e-9 * a.amax());
            }
            assert!(m.mass.clone().cholesky().is_some());
            assert!(m.stiffness.clone().cholesky().is_some());
        }
    }

    #[test]
    fn symmetric_vehicle_decouples_roll() {
        let m = vehicle_matrices(&car()).unwrap();
        for j in [0, 1] {
            assert_eq!(m.stiffness[(2, j)], 0.0);
            assert_eq!(m.damping[(2, j)], 0.0);
        }
    }

    #[test]
    fn quarter_car_matches_closed_form() {
        let (ms, mu, ks, kt) = (400.0, 45.0, 22e3, 190e3);
        let p = VehicleParams {
            class: VehicleClass::Car,
            length: 1.0,
            cg_from_front: 0.5,
            bodies: vec![Body {
                mass: ms,
                pitch_inertia: 1.0,
                roll_inertia: 1.0,
            }],
            wheels: vec![
                Wheel {
                    body: 0,
                    offset: 0.0,
                    lateral: 0.0,
                    suspension_stiffness: ks,
                    suspension_damping: 0.0,
                    mass: mu,
                    tyre_stiffness: kt,
                    tyre_damping: 0.0,
                };
                4
            ],
            hitch: None,
        };
        // Four coincident wheels on the CG: heave couples to the common wheel mode only.
        let m = vehicle_matrices(&p).unwrap();
        let (ms4, ks4, kt4, mu4) = (ms, 4.0 * ks, 4.0 * kt, 4.0 * mu);
        let mm = DMatrix::from_row_slice(2, 2, &[ms4, 0.0, 0.0, mu4]);
        let kk = DMatrix::from_row_slice(2, 2, &[ks4, -ks4, -ks4, ks4 + kt4]);
        // Reduce the assembled model along z_v and the in-phase wheel motion.
        let n = m.dofs();
        let mut t = DMatrix::<f64>::zeros(n, 2);
        t[(0, 0)] = 1.0;
        for &d in &m.wheel_dofs {
            t[(d, 1)] = 1.0;
        }
        let mr = t.transpose() * &m.mass * &t;
        let kr = t.transpose() * &m.stiffness * &t;
        assert!((&mr - &mm).amax() < 1e-9 * mm.amax());
        assert!((&kr - &kk).amax() < 1e-9 * kk.amax());

        let f = natural_frequencies(&mr, &kr).unwrap();
        let (a, b, c) = (ms4 * mu4, -(ms4 * (ks4 + kt4) + mu4 * ks4), ks4 * kt4);
        let disc = (b * b - 4.0 * a * c).sqrt();
        let w2 = [(-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a)];
        for i in 0..2 {
            let exact = w2[i].sqrt() / (2.0 * PI);
            assert!((f[i] / exact - 1.0).abs() < 1e-9, "{} vs {exact}", f[i]);
        }
    }

    #[test]
    fn car_frequencies_are_plausible() {
        let m = vehicle_matrices(&car()).unwrap();
        let f = natural_frequencies(&m.mass, &m.stiffness).unwrap();
        assert!(f[0] >= 1.0 && f[0] <= 2.0, "{f:?}");
        let hop = f[f.len() - 1];
        assert!(hop >= 8.0 && hop <= 15.0, "{f:?}");
    }

    #[test]
    fn static_contact_forces_carry_the_weight() {
        let cat = Catalog::builtin();
        for class in VehicleClass::ALL {
            let p = VehicleParams::nominal(class, cat.get(class).unwrap());
            let weight = p.weight();
            let v = Vehicle::new(p, 0.01).unwrap();
            let total: f64 = v.static_loads().iter().sum();
            assert!((total / weight - 1.0).abs() < 1e-9, "{class:?}");
            assert!(v.static_loads().iter().all(|&f| f > 0.0));
            let road = vec![RoadInput::default(); v.wheel_count()];
            let mut f = vec![0.0; v.wheel_count()];
            v.contact_forces(&v.rest_state(), &road, &mut f);
            assert!((f.iter().sum::<f64>() / weight - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rigidified_truck_keeps_mass_and_load() {
        let cat = Catalog::builtin();
        let p = VehicleParams::nominal(VehicleClass::Truck3, cat.get(VehicleClass::Truck3).unwrap());
        let r = p.rigidified();
        assert_eq!(r.bodies.len(), 1);
        assert!((r.total_mass() - p.total_mass()).abs() < 1e-9);
        for (a, b) in p.wheel_setbacks().iter().zip(r.wheel_setbacks()) {
            assert!((a - b).abs() < 1e-12);
        }
        let v = Vehicle::new(r, 0.01).unwrap();
        assert!((v.static_loads().iter().sum::<f64>() / p.weight() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn roughness_step_under_one_wheel() {
        let v = Vehicle::new(car(), 0.01).unwrap();
        let mut road = vec![RoadInput::default(); 4];
        let mut f0 = vec![0.0; 4];
        v.contact_forces(&v.rest_state(), &road, &mut f0);
        road[2].r = 0.01;
        let mut f1 = vec![0.0; 4];
        v.contact_forces(&v.rest_state(), &road, &mut f1);
        let k = v.params.wheels[2].tyre_stiffness;
        assert!((f1[2] - f0[2] - k * 0.01).abs() < 1e-9);
        assert_eq!(f1[0], f0[0]);
    }

    #[test]
    fn undamped_energy_is_conserved() {
        let mut p = car();
        for w in &mut p.wheels {
            w.suspension_damping = 0.0;
            w.tyre_damping = 0.0;
        }
        let v = Vehicle::new(p, 0.005).unwrap();
        let mut s = v.rest_state();
        s.x[0] = 0.02;
        s.x[1] = 0.01;
        s.v[2] = 0.05;
        let n = v.dofs();
        v.integrator().acceleration(&s.x, &s.v, &vec![0.0; n], &mut s.a).unwrap();
        let e0 = v.integrator().energy(&s.x, &s.v);
        let road = vec![RoadInput::default(); 4];
        let mut free = vec![0.0; n];
        let mut next = s.clone();
        for _ in 0..2000 {
            v.predict(&s, &mut free);
            v.advance(&s, &free, &road, &mut next);
            std::mem::swap(&mut s, &mut next);
        }
        assert!((v.integrator().energy(&s.x, &s.v) / e0 - 1.0).abs() < 1e-10);
    }

    /// Steady-state complex wheel force for a unit harmonic road under every wheel.
    fn harmonic_force(v: &Vehicle, omega: f64, phases: &[f64], wheel: usize) -> f64 {
        let m = v.matrices();
        let n = m.dofs();
        let i = Complex::new(0.0, 1.0);
        let dyn_k = DMatrix::from_fn(n, n, |r, c| {
            Complex::new(m.stiffness[(r, c)] - omega * omega * m.mass[(r, c)], omega * m.damping[(r, c)])
        });
        let mut rhs = DVector::from_element(n, Complex::new(0.0, 0.0));
        let road: Vec<Complex<f64>> = phases.iter().map(|p| (i * *p).exp()).collect();
        for (w, &d) in m.wheel_dofs.iter().enumerate() {
            let wh = &v.params.wheels[w];
            rhs[d] = (Complex::new(wh.tyre_stiffness, omega * wh.tyre_damping)) * road[w];
        }
        let x = dyn_k.lu().solve(&rhs).unwrap();
        let wh = &v.params.wheels[wheel];
        let d = m.wheel_dofs[wheel];
        (Complex::new(wh.tyre_stiffness, omega * wh.tyre_damping) * (road[wheel] - x[d])).norm()
    }

    #[test]
    fn sinusoidal_road_matches_frequency_response() {
        let v = Vehicle::new(car(), 0.0005).unwrap();
        let (speed, wavelength, amp) = (20.0, 8.0, 0.005);
        let omega = 2.0 * PI * speed / wavelength;
        let setbacks = v.setbacks().to_vec();
        let phases: Vec<f64> = setbacks.iter().map(|s| -omega * s / speed).collect();
        let expected = amp * harmonic_force(&v, omega, &phases, 0);
        let road_at = |t: f64| -> Vec<RoadInput> {
            phases
                .iter()
                .map(|p| RoadInput {
                    r: amp * (omega * t + p).cos(),
                    r_dot: -amp * omega * (omega * t + p).sin(),
                })
                .collect()
        };
        let mut s = v.static_state(&road_at(0.0)).unwrap();
        let n = v.dofs();
        let mut free = vec![0.0; n];
        let mut next = s.clone();
        let dt = v.integrator().k.dt;
        let steps = (20.0 / dt) as usize;
        let (mut lo, mut hi) = (f64::MAX, f64::MIN);
        let mut f = vec![0.0; 4];
        for k in 1..=steps {
            let road = road_at(k as f64 * dt);
            v.predict(&s, &mut free);
            v.advance(&s, &free, &road, &mut next);
            std::mem::swap(&mut s, &mut next);
            if k * 4 > steps * 3 {
                v.contact_forces(&s, &road, &mut f);
                lo = lo.min(f[0]);
                hi = hi.max(f[0]);
            }
        }
        let got = 0.5 * (hi - lo);
        assert!((got / expected - 1.0).abs() < 0.01, "{got} vs {expected}");
    }

    #[test]
    fn linear_in_roughness_amplitude() {
        let v = Vehicle::new(car(), 0.01).unwrap();
        let run = |amp: f64| {
            let mut s = v.rest_state();
            let mut next = s.clone();
            let mut free = vec![0.0; v.dofs()];
            let mut f = vec![0.0; 4];
            let mut out = Vec::new();
            for k in 1..500 {
                let t = k as f64 * 0.01;
                let road: Vec<RoadInput> = (0..4)
                    .map(|w| RoadInput {
                        r: amp * (3.0 * t + w as f64).sin(),
                        r_dot: 3.0 * amp * (3.0 * t + w as f64).cos(),
                    })
                    .collect();
                v.predict(&s, &mut free);
                v.advance(&s, &free, &road, &mut next);
                std::mem::swap(&mut s, &mut next);
                v.contact_forces(&s, &road, &mut f);
                out.push(f.iter().zip(v.static_loads()).map(|(a, b)| a - b).collect::<Vec<_>>());
            }
            out
        };
        let (a, b) = (run(0.002), run(0.004));
        for (ra, rb) in a.iter().zip(&b) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((2.0 * x - y).abs() <= 1e-9 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_variability_is_nominal() {
        let cat = Catalog::builtin();
        let spec = cat.get(VehicleClass::Bus).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = sample_params(
            VehicleClass::Bus,
            spec,
            &Variability {
                unsprung_mass: 0.0,
                sprung_mass: 0.0,
            },
            &mut rng,
        );
        assert_eq!(p, VehicleParams::nominal(VehicleClass::Bus, spec));
    }

    #[test]
    fn unsprung_mass_spread_is_five_percent() {
        let cat = Catalog::builtin();
        let spec = cat.get(VehicleClass::Car).unwrap();
        let mean = spec.axle[0].unsprung_mass;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let var = Variability::default();
        let mut draws = Vec::with_capacity(100_000);
        while draws.len() < 100_000 {
            let p = sample_params(VehicleClass::Car, spec, &var, &mut rng);
            draws.extend(p.wheels.iter().map(|w| w.mass));
            assert_eq!(p.bodies, spec.body);
        }
        let n = draws.len() as f64;
        let mu = draws.iter().sum::<f64>() / n;
        let sd = (draws.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((0.048..=0.052).contains(&(sd / mean)), "{}", sd / mean);
        let half = 3f64.sqrt() * 0.05 * mean;
        assert!(draws.iter().all(|m| (m - mean).abs() <= half));
    }
}
