//! Coupled bridge-vehicle time integration.
//!
//! The deck modes and every vehicle on the deck are advanced with the
//! average-acceleration scheme. Within a step the wind forces, the deck
//! motion under each wheel and the tyre forces are made consistent by
//! fixed-point iteration on the generalised deck force.
//!
//! A wheel at deck coordinate `x` and lateral position `e` sees the road
//! elevation
//!
//! ```text
//! r = z_rough(x) + sum_j psi_j(x) q_j,          psi_j = phi_j (vertical), -e phi_j (torsional)
//! r_dot = v_x dz_rough/dx + sum_j psi_j q_dot_j + v_x sum_j psi_j'(x) q_j
//! ```
//!
//! and pushes the deck down with the tyre force `F_n`, i.e. the generalised
//! force `-F_n psi_j`.
//!
//! With `feedback` off the aerodynamic forces are evaluated on the rigid
//! undeformed deck and the wheels run on the roughness alone, which makes
//! the coupled system linear in its inputs.

use serde::{Deserialize, Serialize};

use crate::aero::{AeroCoefficients, AeroConfig, WindLoading};
use crate::bridge::{Dof, GridPoint, ModalBridge, SectionVector};
use crate::error::{Error, Result};
use crate::fields::{RoughnessSurface, Side, WindField};
use crate::history::ResponseHistory;
use crate::newmark::ModalIntegrator;
use crate::traffic::TrafficStream;
use crate::vehicle::{RoadInput, Vehicle, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Turbulent wind only.
    W,
    /// Traffic only.
    T,
    /// Wind and traffic acting together.
    WT,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::W, Scenario::T, Scenario::WT];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::W => "W",
            Scenario::T => "T",
            Scenario::WT => "WT",
        }
    }

    pub fn has_wind(self) -> bool {
        matches!(self, Scenario::W | Scenario::WT)
    }

    pub fn has_traffic(self) -> bool {
        matches!(self, Scenario::T | Scenario::WT)
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invariant(format!("unknown scenario `{s}` (expected W, T or WT)")))
    }
}

/// Wind band with its traffic speed limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum WindCase {
    One,
    Two,
    Three,
}

impl WindCase {
    pub const ALL: [WindCase; 3] = [WindCase::One, WindCase::Two, WindCase::Three];

    pub fn number(self) -> u8 {
        match self {
            WindCase::One => 1,
            WindCase::Two => 2,
            WindCase::Three => 3,
        }
    }

    pub fn index(self) -> usize {
        self.number() as usize - 1
    }

    /// Mean wind speed band [m/s].
    pub fn band(self) -> (f64, f64) {
        match self {
            WindCase::One => (10.0, 15.0),
            WindCase::Two => (15.0, 20.0),
            WindCase::Three => (20.0, 25.0),
        }
    }

    pub fn default_mean_speed(self) -> f64 {
        let (lo, hi) = self.band();
        0.5 * (lo + hi)
    }

    pub fn contains(self, u: f64) -> bool {
        let (lo, hi) = self.band();
        u >= lo && u <= hi
    }
}

impl TryFrom<u8> for WindCase {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(WindCase::One),
            2 => Ok(WindCase::Two),
            3 => Ok(WindCase::Three),
            _ => Err(format!("wind case must be 1, 2 or 3 (got {v})")),
        }
    }
}

impl From<WindCase> for u8 {
    fn from(c: WindCase) -> u8 {
        c.number()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub dt: f64,
    /// Discarded start-up interval [s].
    pub run_up: f64,
    /// Recorded interval after run-up [s].
    pub duration: f64,
    /// Record every `record_every`-th step.
    pub record_every: usize,
    /// Deck motion feeds back into wind forces and tyre kinematics.
    pub feedback: bool,
    /// Relative change of the generalised force that ends the interaction iteration.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Recording stations [m].
    pub stations: Vec<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dt: 0.02,
            run_up: 60.0,
            duration: 600.0,
            record_every: 5,
            feedback: true,
            tolerance: 1e-8,
            max_iterations: 30,
            stations: Vec::new(),
        }
    }
}

impl SolverOptions {
    pub fn run_up_steps(&self) -> usize {
        (self.run_up / self.dt).round() as usize
    }

    pub fn duration_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Final simulated time [s].
    pub fn t_end(&self) -> f64 {
        (self.run_up_steps() + self.duration_steps()) as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.dt > 0.0) {
            bad.push(format!("simulation.dt must be positive (got {})", self.dt));
        } else {
            for (name, v) in [("duration", self.duration), ("run_up", self.run_up)] {
                let steps = v / self.dt;
                if !(v >= 0.0) || (steps - steps.round()).abs() > 1e-6 {
                    bad.push(format!("simulation.{name} = {v} is not a non-negative multiple of dt"));
                }
            }
        }
        if !(self.duration > 0.0) {
            bad.push("simulation.duration must be positive".into());
        }
        if self.record_every == 0 {
            bad.push("simulation.record_every must be >= 1".into());
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            bad.push("simulation.tolerance and max_iterations must be positive".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }
}

/// Wind inputs for scenarios with wind.
#[derive(Debug, Clone, Copy)]
pub struct WindInput<'a> {
    pub field: &'a WindField,
    pub coefficients: &'a AeroCoefficients,
    pub aero: AeroConfig,
}

/// Traffic inputs for scenarios with traffic.
#[derive(Debug, Clone, Copy)]
pub struct TrafficInput<'a> {
    pub stream: &'a TrafficStream,
    pub roughness: &'a RoughnessSurface,
    /// Floor tyre forces at zero instead of letting wheels pull the deck.
    pub unilateral: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Inputs<'a> {
    pub bridge: &'a ModalBridge,
    pub wind: Option<WindInput<'a>>,
    pub traffic: Option<TrafficInput<'a>>,
}

struct ActiveVehicle {
    index: usize,
    model: Vehicle,
    state: VehicleState,
    next: VehicleState,
    free: Vec<f64>,
    /// Deck lateral position of each wheel [m].
    lateral: Vec<f64>,
    tracks: Vec<usize>,
    on_deck: Vec<bool>,
    /// `[wheel][mode]` vertical deck shape under the wheel.
    psi: Vec<f64>,
    /// `[wheel][mode]` shape slope times along-deck wheel velocity.
    dpsi: Vec<f64>,
    rough: Vec<RoadInput>,
    road: Vec<RoadInput>,
    forces: Vec<f64>,
}

/// Interaction diagnostics of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Diagnostics {
    pub steps: usize,
    pub max_iterations_used: usize,
    pub total_iterations: u64,
    pub aero_clamp_events: u64,
    /// Tyre-force evaluations that went negative.
    pub separations: u64,
    pub vehicles_activated: usize,
}

pub struct Simulation<'a> {
    inputs: Inputs<'a>,
    opts: SolverOptions,
    integrator: ModalIntegrator,
    wind: Option<WindLoading<'a>>,
    /// Generalised index, mode DOF.
    dofs: Vec<Dof>,
    q: Vec<f64>,
    qd: Vec<f64>,
    qa: Vec<f64>,
    step: usize,
    active: Vec<ActiveVehicle>,
    /// `(t_on, t_off, vehicle)` by window start, and the next one to consider.
    schedule: Vec<(f64, f64, usize)>,
    next_scheduled: usize,
    /// `(t_off, vehicle)` inside their window but not yet on the deck.
    pending: Vec<(f64, usize)>,
    record_points: Vec<GridPoint>,
    diagnostics: Diagnostics,
    // Scratch.
    force: Vec<f64>,
    force_prev: Vec<f64>,
    wind_force: Vec<f64>,
    vehicle_force: Vec<f64>,
    q1: Vec<f64>,
    qd1: Vec<f64>,
    shape_buf: Vec<f64>,
    slope_buf: Vec<f64>,
}

impl<'a> Simulation<'a> {
    pub fn new(inputs: Inputs<'a>, opts: SolverOptions) -> Result<Self> {
        opts.validate()?;
        let bridge = inputs.bridge;
        let n = bridge.mode_count();
        let wind = match inputs.wind {
            Some(w) => {
                if w.field.duration() + 1e-9 < opts.t_end() {
                    return Err(Error::Invariant(format!(
                        "wind field covers {} s but the run needs {} s",
                        w.field.duration(),
                        opts.t_end()
                    )));
                }
                Some(WindLoading::new(bridge, w.field, w.coefficients, w.aero)?)
            }
            None => None,
        };
        let mut schedule = Vec::new();
        if let Some(tr) = inputs.traffic {
            let stream = tr.stream;
            if stream.t_end() + 1e-9 < opts.t_end() {
                return Err(Error::Invariant(format!(
                    "traffic stream ends at {} s but the run needs {} s",
                    stream.t_end(),
                    opts.t_end()
                )));
            }
            if (stream.bridge_length - bridge.total_length()).abs() > 1e-6 {
                return Err(Error::Invariant("traffic stream and bridge lengths differ".into()));
            }
            for (lane, l) in stream.lanes.iter().enumerate() {
                for side in [Side::Left, Side::Right] {
                    if tr.roughness.track_index(lane, side).is_none() {
                        return Err(Error::Invariant(format!(
                            "roughness surface has no {side:?} track for lane {lane} (offset {})",
                            l.offset
                        )));
                    }
                }
            }
            for i in 0..stream.vehicles.len() {
                if let Some((t_on, t_off)) = stream.deck_window(i) {
                    schedule.push((t_on, t_off, i));
                }
            }
            schedule.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        }
        let record_points = opts
            .stations
            .iter()
            .map(|&x| bridge.locate(x))
            .collect::<Result<Vec<_>>>()?;
        let integrator = ModalIntegrator::new(&bridge.modal_matrices(), opts.dt);
        Ok(Self {
            inputs,
            integrator,
            wind,
            dofs: bridge.modes().iter().map(|m| m.kind.dof()).collect(),
            q: vec![0.0; n],
            qd: vec![0.0; n],
            qa: vec![0.0; n],
            step: 0,
            active: Vec::new(),
            schedule,
            next_scheduled: 0,
            pending: Vec::new(),
            record_points,
            diagnostics: Diagnostics::default(),
            force: vec![0.0; n],
            force_prev: vec![0.0; n],
            wind_force: vec![0.0; n],
            vehicle_force: vec![0.0; n],
            q1: vec![0.0; n],
            qd1: vec![0.0; n],
            shape_buf: vec![0.0; n],
            slope_buf: vec![0.0; n],
            opts,
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.opts.dt
    }

    pub fn modal_state(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.q, &self.qd, &self.qa)
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let mut d = self.diagnostics;
        d.aero_clamp_events = self.wind.as_ref().map_or(0, |w| w.clamp_events());
        d
    }

    /// Number of vehicles currently coupled to the deck.
    pub fn active_vehicles(&self) -> usize {
        self.active.len()
    }

    /// Sum of the current tyre forces on the deck [N].
    pub fn total_contact_force(&self) -> f64 {
        self.active
            .iter()
            .flat_map(|v| v.forces.iter().zip(&v.on_deck).filter(|(_, on)| **on).map(|(f, _)| *f))
            .sum()
    }

    /// Modal energy `sum 1/2 (m q_dot^2 + k q^2)`.
    pub fn modal_energy(&self) -> f64 {
        self.integrator.energy(&self.q, &self.qd)
    }

    /// Section response at the recording stations.
    pub fn station_response(&self) -> Vec<SectionVector> {
        self.record_points
            .iter()
            .map(|&gp| self.inputs.bridge.response_at_grid_point(&self.q, gp))
            .collect()
    }

    fn traffic(&self) -> Option<TrafficInput<'a>> {
        self.inputs.traffic
    }

    /// Brings vehicles whose deck window contains `t` into the active set
    /// and drops those that have left; returns the new entrants.
    fn update_active_set(&mut self, t: f64) -> Result<Vec<usize>> {
        let Some(tr) = self.traffic() else {
            return Ok(Vec::new());
        };
        let stream = tr.stream;
        let eps = 1e-9;
        self.active.retain(|a| {
            stream
                .position(a.index, t)
                .is_some_and(|(s, _)| stream.on_deck(a.index, s))
        });
        while self.next_scheduled < self.schedule.len() && self.schedule[self.next_scheduled].0 <= t + eps {
            let (_, t_off, i) = self.schedule[self.next_scheduled];
            self.pending.push((t_off, i));
            self.next_scheduled += 1;
        }
        self.pending.retain(|&(t_off, _)| t_off + eps >= t);
        let ready: Vec<usize> = self
            .pending
            .iter()
            .map(|&(_, i)| i)
            .filter(|&i| stream.position(i, t).is_some_and(|(s, _)| stream.on_deck(i, s)))
            .collect();
        self.pending.retain(|(_, i)| !ready.contains(i));
        let mut entered = Vec::new();
        for i in ready {
            let veh = &stream.vehicles[i];
            let mut model = Vehicle::new(veh.params.clone(), self.opts.dt)?;
            model.unilateral = tr.unilateral;
            let lane = stream.lanes[veh.lane];
            let dir = lane.direction.sign();
            let nw = model.wheel_count();
            let n = self.q.len();
            let mut lateral = Vec::with_capacity(nw);
            let mut tracks = Vec::with_capacity(nw);
            for w in &model.params.wheels {
                let y = dir * w.lateral;
                lateral.push(lane.offset + y);
                let side = if y > 0.0 { Side::Right } else { Side::Left };
                tracks.push(tr.roughness.track_index(veh.lane, side).expect("checked in new"));
            }
            let state = model.rest_state();
            let pos = self.active.partition_point(|a| a.index < i);
            self.active.insert(
                pos,
                ActiveVehicle {
                    index: i,
                    next: state.clone(),
                    state,
                    free: vec![0.0; model.dofs()],
                    lateral,
                    tracks,
                    on_deck: vec![false; nw],
                    psi: vec![0.0; nw * n],
                    dpsi: vec![0.0; nw * n],
                    rough: vec![RoadInput::default(); nw],
                    road: vec![RoadInput::default(); nw],
                    forces: vec![0.0; nw],
                    model,
                },
            );
            entered.push(i);
            self.diagnostics.vehicles_activated += 1;
        }
        Ok(entered)
    }

    /// Wheel positions, deck shapes and roughness at time `t`.
    fn update_kinematics(&mut self, t: f64) -> Result<()> {
        let Some(tr) = self.traffic() else { return Ok(()) };
        let stream = tr.stream;
        let bridge = self.inputs.bridge;
        let length = bridge.total_length();
        let n = self.q.len();
        for a in &mut self.active {
            let veh = &stream.vehicles[a.index];
            let dir = stream.lanes[veh.lane].direction.sign();
            let (s, speed) = stream
                .position(a.index, t)
                .ok_or_else(|| Error::Invariant(format!("vehicle {} has no trajectory at t = {t}", a.index)))?;
            let x_front = stream.deck_x(veh.lane, s);
            let vx = dir * speed;
            for (w, setback) in a.model.setbacks().iter().enumerate() {
                let x = x_front - dir * setback;
                let (r, slope) = tr.roughness.sample_with_slope(a.tracks[w], x)?;
                a.rough[w] = RoadInput { r, r_dot: slope * vx };
                let psi = &mut a.psi[w * n..(w + 1) * n];
                let dpsi = &mut a.dpsi[w * n..(w + 1) * n];
                if x >= 0.0 && x <= length {
                    a.on_deck[w] = true;
                    let gp = bridge.locate(x)?;
                    bridge.shapes_at(gp, &mut self.shape_buf);
                    bridge.slopes_at(gp, &mut self.slope_buf);
                    for j in 0..n {
                        let lever = match self.dofs[j] {
                            Dof::H => 1.0,
                            Dof::Alpha => -a.lateral[w],
                            Dof::P => 0.0,
                        };
                        psi[j] = lever * self.shape_buf[j];
                        dpsi[j] = lever * self.slope_buf[j] * vx;
                    }
                } else {
                    a.on_deck[w] = false;
                    psi.iter_mut().for_each(|p| *p = 0.0);
                    dpsi.iter_mut().for_each(|p| *p = 0.0);
                }
            }
        }
        Ok(())
    }

    /// Road input under every wheel for deck state `(q, qd)`.
    fn road_inputs(active: &mut [ActiveVehicle], q: &[f64], qd: &[f64], feedback: bool) {
        let n = q.len();
        for a in active.iter_mut() {
            for w in 0..a.road.len() {
                let mut road = a.rough[w];
                if feedback && a.on_deck[w] {
                    let psi = &a.psi[w * n..(w + 1) * n];
                    let dpsi = &a.dpsi[w * n..(w + 1) * n];
                    for j in 0..n {
                        road.r += psi[j] * q[j];
                        road.r_dot += psi[j] * qd[j] + dpsi[j] * q[j];
                    }
                }
                a.road[w] = road;
            }
        }
    }

    /// Adds `-F_n psi` of every on-deck wheel to `out` (vehicle order).
    fn accumulate_vehicle_forces(active: &[ActiveVehicle], n: usize, out: &mut [f64]) {
        for a in active {
            for (w, &f) in a.forces.iter().enumerate() {
                if a.on_deck[w] {
                    let psi = &a.psi[w * n..(w + 1) * n];
                    for j in 0..n {
                        out[j] -= f * psi[j];
                    }
                }
            }
        }
    }

    /// Puts entrants at quasi-static equilibrium on the current deck.
    fn settle_entrants(&mut self, entrants: &[usize]) -> Result<()> {
        if entrants.is_empty() {
            return Ok(());
        }
        let feedback = self.opts.feedback;
        let (q, qd) = (&self.q, &self.qd);
        let n = q.len();
        let mut separations = 0;
        for a in self.active.iter_mut().filter(|a| entrants.contains(&a.index)) {
            Self::road_inputs(std::slice::from_mut(a), q, qd, feedback);
            a.state = a.model.static_state(&a.road)?;
            separations += a.model.contact_forces(&a.state, &a.road, &mut a.forces);
        }
        self.diagnostics.separations += separations as u64;
        let _ = n;
        Ok(())
    }

    /// Static equilibrium under mean wind and parked traffic, then the
    /// consistent initial acceleration.
    pub fn initialise(&mut self) -> Result<()> {
        self.step = 0;
        let entrants = self.update_active_set(0.0)?;
        self.update_kinematics(0.0)?;
        let n = self.q.len();
        let feedback = self.opts.feedback;
        let stiffness = self.inputs.bridge.modal_matrices().stiffness;
        self.qd.iter_mut().for_each(|v| *v = 0.0);
        let mut converged = false;
        for _ in 0..200 {
            self.settle_entrants(&entrants)?;
            self.force.iter_mut().for_each(|f| *f = 0.0);
            if let Some(w) = self.wind.as_mut() {
                w.modal_forces(0.0, &self.q, &self.qd, feedback, true, &mut self.wind_force)?;
                self.force.copy_from_slice(&self.wind_force);
            }
            Self::accumulate_vehicle_forces(&self.active, n, &mut self.force);
            let mut change: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for j in 0..n {
                let q_new = self.force[j] / stiffness[j];
                change = change.max((q_new - self.q[j]).abs());
                scale = scale.max(q_new.abs());
                self.q[j] = q_new;
            }
            if !feedback || change <= 1e-12 * scale.max(1e-300) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                t: 0.0,
                iterations: 200,
                residual: f64::NAN,
            });
        }
        self.settle_entrants(&entrants)?;
        self.evaluate_forces(0.0, true)?;
        let (q, qd) = (self.q.clone(), self.qd.clone());
        self.integrator.acceleration(&q, &qd, &self.force, &mut self.qa);
        Ok(())
    }

    /// Total generalised force at `t` for the committed deck state, with
    /// the vehicles' current states.
    fn evaluate_forces(&mut self, t: f64, vehicles_fixed: bool) -> Result<()> {
        let n = self.q.len();
        let feedback = self.opts.feedback;
        self.force.iter_mut().for_each(|f| *f = 0.0);
        if let Some(w) = self.wind.as_mut() {
            w.modal_forces(t, &self.q, &self.qd, feedback, false, &mut self.wind_force)?;
            self.force.copy_from_slice(&self.wind_force);
        }
        if vehicles_fixed {
            Self::road_inputs(&mut self.active, &self.q, &self.qd, feedback);
            let mut separations = 0;
            for a in &mut self.active {
                separations += a.model.contact_forces(&a.state, &a.road, &mut a.forces);
            }
            self.diagnostics.separations += separations as u64;
        }
        Self::accumulate_vehicle_forces(&self.active, n, &mut self.force);
        Ok(())
    }

    /// Advances one step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.opts.dt;
        let t0 = self.time();
        let t1 = (self.step + 1) as f64 * dt;
        let n = self.q.len();
        let feedback = self.opts.feedback;

        // Entering vehicles join at the start of the step.
        let entrants = self.update_active_set(t0)?;
        if !entrants.is_empty() {
            self.update_kinematics(t0)?;
            self.settle_entrants(&entrants)?;
        }
        for a in &mut self.active {
            a.model.predict(&a.state, &mut a.free);
        }
        self.update_kinematics(t1)?;

        // Predictor: end-of-step deck state under the previous force.
        self.force_prev.copy_from_slice(&self.force);
        for j in 0..n {
            self.q1[j] = self.integrator.displacement(j, self.q[j], self.qd[j], self.qa[j], self.force[j]);
            self.qd1[j] = self.integrator.k.finish(self.q[j], self.qd[j], self.qa[j], self.q1[j]).0;
        }

        let mut iterations = 0;
        loop {
            iterations += 1;
            // Forces at t1 for the current deck estimate.
            self.wind_force.iter_mut().for_each(|f| *f = 0.0);
            if let Some(w) = self.wind.as_mut() {
                w.modal_forces(t1, &self.q1, &self.qd1, feedback, false, &mut self.wind_force)?;
            }
            self.vehicle_force.iter_mut().for_each(|f| *f = 0.0);
            Self::road_inputs(&mut self.active, &self.q1, &self.qd1, feedback);
            let mut separations = 0;
            for a in &mut self.active {
                a.model.advance(&a.state, &a.free, &a.road, &mut a.next);
                separations += a.model.contact_forces(&a.next, &a.road, &mut a.forces);
            }
            Self::accumulate_vehicle_forces(&self.active, n, &mut self.vehicle_force);

            let mut change: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for j in 0..n {
                let f = self.wind_force[j] + self.vehicle_force[j];
                change = change.max((f - self.force[j]).abs());
                scale = scale.max(f.abs());
                self.force[j] = f;
            }
            let residual = if scale > 0.0 { change / scale } else { 0.0 };
            for j in 0..n {
                self.q1[j] = self.integrator.displacement(j, self.q[j], self.qd[j], self.qa[j], self.force[j]);
                self.qd1[j] = self.integrator.k.finish(self.q[j], self.qd[j], self.qa[j], self.q1[j]).0;
            }
            if !feedback || residual <= self.opts.tolerance {
                self.diagnostics.separations += separations as u64;
                break;
            }
            if iterations >= self.opts.max_iterations {
                return Err(Error::NonConvergence {
                    t: t1,
                    iterations,
                    residual,
                });
            }
        }
        self.diagnostics.max_iterations_used = self.diagnostics.max_iterations_used.max(iterations);
        self.diagnostics.total_iterations += iterations as u64;
        self.diagnostics.steps += 1;

        for j in 0..n {
            let (v1, a1) = self.integrator.k.finish(self.q[j], self.qd[j], self.qa[j], self.q1[j]);
            self.q[j] = self.q1[j];
            self.qd[j] = v1;
            self.qa[j] = a1;
        }
        for a in &mut self.active {
            std::mem::swap(&mut a.state, &mut a.next);
        }
        self.step += 1;
        if !self.q.iter().chain(&self.qd).all(|v| v.is_finite())
            || !self.active.iter().all(|a| a.state.is_finite())
        {
            return Err(Error::NonFinite(t1));
        }
        Ok(())
    }

    /// Initialises, runs to the end and returns the recorded history.
    pub fn run(mut self) -> Result<(ResponseHistory, Diagnostics)> {
        self.initialise()?;
        let run_up = self.opts.run_up_steps();
        let total = run_up + self.opts.duration_steps();
        let every = self.opts.record_every;
        let mut history = ResponseHistory::new(
            every as f64 * self.opts.dt,
            run_up as f64 * self.opts.dt,
            self.opts.stations.clone(),
        );
        if run_up == 0 {
            history.push(&self.station_response())?;
        }
        while self.step < total {
            self.step()?;
            if self.step >= run_up && (self.step - run_up) % every == 0 && self.step < total {
                history.push(&self.station_response())?;
            }
        }
        history.meta.insert("feedback".into(), self.opts.feedback.to_string());
        history.meta.insert("dt".into(), format!("{:e}", self.opts.dt));
        let d = self.diagnostics();
        Ok((history, d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::synthetic::greatbelt_like;
    use crate::bridge::tests::sine_bridge;

    #[test]
    fn empty_run_stays_at_rest() {
        let bridge = sine_bridge(41, 400.0);
        let opts = SolverOptions {
            run_up: 1.0,
            duration: 5.0,
            record_every: 1,
            stations: vec![100.0, 200.0],
            ..Default::default()
        };
        let inputs = Inputs {
            bridge: &bridge,
            wind: None,
            traffic: None,
        };
        let (h, _) = Simulation::new(inputs, opts).unwrap().run().unwrap();
        assert_eq!(h.samples(), 250);
        assert_eq!(h.max_abs(), 0.0);
    }

    #[test]
    fn calm_zero_coefficient_wind_gives_zero_response() {
        let bridge = greatbelt_like();
        let field = WindField::calm(20.0, bridge.nodes(), 0.1, 20.0).unwrap();
        let coeffs = AeroCoefficients::constant(0.0, 0.0, 0.0);
        let opts = SolverOptions {
            run_up: 2.0,
            duration: 10.0,
            stations: vec![bridge.midspan()],
            ..Default::default()
        };
        let inputs = Inputs {
            bridge: &bridge,
            wind: Some(WindInput {
                field: &field,
                coefficients: &coeffs,
                aero: AeroConfig::default(),
            }),
            traffic: None,
        };
        let (h, _) = Simulation::new(inputs, opts).unwrap().run().unwrap();
        assert_eq!(h.max_abs(), 0.0);
    }

    #[test]
    fn case_bands_and_scenarios() {
        assert!(WindCase::One.contains(12.5) && !WindCase::One.contains(22.0));
        assert_eq!(WindCase::Three.default_mean_speed(), 22.5);
        assert_eq!("wt".parse::<Scenario>().unwrap(), Scenario::WT);
        assert!(WindCase::try_from(4).is_err());
    }

    #[test]
    fn options_reject_non_multiple_duration() {
        let opts = SolverOptions {
            duration: 10.013,
            ..Default::default()
        };
        assert!(opts.validate().is_err());
    }
}
