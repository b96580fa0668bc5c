//! Closed-form reference solutions and the quick self-check suite behind
//! the `oracle` command.

use std::f64::consts::PI;

use crate::bridge::{Dof, ModalBridge, ModalMatrices, ModeKind};
use crate::error::{Error, Result};
use crate::fields::RoughnessSurface;
use crate::newmark::ModalIntegrator;
use crate::solver::{Inputs, Simulation, SolverOptions, TrafficInput};
use crate::traffic::{Direction, Lane, TrafficStream};
use crate::vehicle::{natural_frequencies, vehicle_matrices, Catalog, RoadInput, Vehicle, VehicleClass, VehicleParams};

/// Steady-state amplitude of `m x'' + c x' + k x = f0 sin(w t)` with
/// `w / w_n = ratio`.
pub fn harmonic_amplitude(k: f64, zeta: f64, f0: f64, ratio: f64) -> f64 {
    f0 / k / ((1.0 - ratio * ratio).powi(2) + (2.0 * zeta * ratio).powi(2)).sqrt()
}

/// Damping ratio from successive positive peaks by the logarithmic decrement.
pub fn log_decrement_damping(peaks: &[f64]) -> Result<f64> {
    if peaks.len() < 2 || peaks.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::Analysis("log decrement needs two or more positive peaks".into()));
    }
    let delta = (peaks[0] / peaks[peaks.len() - 1]).ln() / (peaks.len() - 1) as f64;
    Ok(delta / (4.0 * PI * PI + delta * delta).sqrt())
}

/// Undamped quarter-car frequencies [Hz], ascending.
pub fn quarter_car_frequencies(ms: f64, mu: f64, ks: f64, kt: f64) -> [f64; 2] {
    let (a, b, c) = (ms * mu, -(ms * (ks + kt) + mu * ks), ks * kt);
    let disc = (b * b - 4.0 * a * c).sqrt();
    [(-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a)].map(|w2| w2.sqrt() / (2.0 * PI))
}

/// Modal solution for constant forces crossing a simply supported span at
/// constant speed: mode `n` has shape `sin(n pi s / L)`, modal mass
/// `m L / 2`, and the frequency and damping of the `n`-th vertical mode of
/// the bridge. Each mode responds as a damped oscillator to the
/// half-sine forcing while the load is on the span, then decays freely.
#[derive(Debug, Clone)]
pub struct MovingLoad {
    /// Deck coordinate of the left support [m].
    pub start: f64,
    pub span: f64,
    pub mass_per_length: f64,
    /// `(omega, zeta)` per vertical mode, mode `n` at index `n - 1`.
    pub modes: Vec<(f64, f64)>,
}

impl MovingLoad {
    pub fn for_bridge(bridge: &ModalBridge) -> Self {
        let mut modes: Vec<(f64, f64)> = bridge
            .modes()
            .iter()
            .filter(|m| m.kind == ModeKind::Vertical)
            .map(|m| (m.omega(), m.damping_ratio))
            .collect();
        modes.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            start: bridge.side_spans[0],
            span: bridge.main_span,
            mass_per_length: bridge.section.mass_per_length,
            modes,
        }
    }

    /// Modal displacement of mode `n` under a downward force `p` that
    /// enters the span at `t_in` moving at `speed`.
    fn modal(&self, n: usize, p: f64, speed: f64, t_in: f64, t: f64) -> f64 {
        let tau = t - t_in;
        if tau <= 0.0 {
            return 0.0;
        }
        let (w, z) = self.modes[n - 1];
        let wd = w * (1.0 - z * z).sqrt();
        let big_w = n as f64 * PI * speed / self.span;
        let f = -p / (0.5 * self.mass_per_length * self.span);
        let d = (w * w - big_w * big_w).powi(2) + (2.0 * z * w * big_w).powi(2);
        let a = f * (w * w - big_w * big_w) / d;
        let b = -f * 2.0 * z * w * big_w / d;
        let c1 = -b;
        let c2 = (z * w * c1 - a * big_w) / wd;
        let forced = |s: f64| {
            let e = (-z * w * s).exp();
            let q = a * (big_w * s).sin() + b * (big_w * s).cos() + e * (c1 * (wd * s).cos() + c2 * (wd * s).sin());
            let v = a * big_w * (big_w * s).cos() - b * big_w * (big_w * s).sin()
                + e * ((-z * w * c1 + wd * c2) * (wd * s).cos() + (-z * w * c2 - wd * c1) * (wd * s).sin());
            (q, v)
        };
        let t_cross = self.span / speed;
        if tau <= t_cross {
            return forced(tau).0;
        }
        let (q0, v0) = forced(t_cross);
        let s = tau - t_cross;
        (-z * w * s).exp() * (q0 * (wd * s).cos() + (v0 + z * w * q0) / wd * (wd * s).sin())
    }

    /// Vertical deflection at deck coordinate `x` and time `t` under the
    /// forces `(p, t_in)`, all moving at `speed`.
    pub fn deflection(&self, forces: &[(f64, f64)], speed: f64, x: f64, t: f64) -> f64 {
        let s = x - self.start;
        if s <= 0.0 || s >= self.span {
            return 0.0;
        }
        (1..=self.modes.len())
            .map(|n| {
                let phi = (n as f64 * PI * s / self.span).sin();
                phi * forces.iter().map(|&(p, t_in)| self.modal(n, p, speed, t_in, t)).sum::<f64>()
            })
            .sum()
    }
}

/// Simulated and closed-form midspan deflection of one vehicle crossing a
/// smooth deck at constant speed.
#[derive(Debug, Clone)]
pub struct CrossingComparison {
    pub time: Vec<f64>,
    pub simulated: Vec<f64>,
    pub reference: Vec<f64>,
}

impl CrossingComparison {
    pub fn peak_error(&self) -> f64 {
        let peak = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        peak(&self.simulated) / peak(&self.reference) - 1.0
    }
}

pub fn single_crossing(bridge: &ModalBridge, params: VehicleParams, speed: f64, dt: f64) -> Result<CrossingComparison> {
    let t_entry = 1.0;
    let length = bridge.total_length();
    let t_end = ((t_entry + (length + params.length) / speed + 20.0) / dt).ceil() * dt;
    let lane = Lane {
        direction: Direction::Forward,
        offset: 3.9,
    };
    let vehicle = Vehicle::new(params.clone(), dt)?;
    let forces: Vec<(f64, f64)> = vehicle
        .static_loads()
        .iter()
        .zip(vehicle.setbacks())
        .map(|(&p, &b)| (p, t_entry + (bridge.side_spans[0] + b) / speed))
        .collect();
    let stream = TrafficStream::single(params, lane, length, speed, t_entry, t_end, dt)?;
    let surface = RoughnessSurface::flat(-50.0, length + 100.0, &[lane.offset], 1.8);
    let mid = bridge.midspan();
    let opts = SolverOptions {
        dt,
        run_up: 0.0,
        duration: t_end,
        record_every: 1,
        feedback: true,
        stations: vec![mid],
        ..Default::default()
    };
    let sim = Simulation::new(
        Inputs {
            bridge,
            wind: None,
            traffic: Some(TrafficInput {
                stream: &stream,
                roughness: &surface,
                unilateral: false,
            }),
        },
        opts,
    )?;
    let (history, _) = sim.run()?;
    let oracle = MovingLoad::for_bridge(bridge);
    let time: Vec<f64> = (0..history.samples()).map(|k| history.time(k)).collect();
    let reference = time.iter().map(|&t| oracle.deflection(&forces, speed, mid, t)).collect();
    Ok(CrossingComparison {
        simulated: history.series(0, Dof::H),
        reference,
        time,
    })
}

/// Outcome of one self-check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Relative error or deviation measured.
    pub value: f64,
    pub limit: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value.abs() <= self.limit
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<44} |err| = {:.3e} (limit {:.1e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.value.abs(),
            self.limit
        )
    }
}

fn sdof(f_hz: f64, zeta: f64) -> ModalMatrices {
    let w = 2.0 * PI * f_hz;
    ModalMatrices {
        mass: vec![1.0],
        damping: vec![2.0 * zeta * w],
        stiffness: vec![w * w],
    }
}

fn resonance_check() -> f64 {
    let (f, zeta) = (0.1, 0.005);
    let dt = 1.0 / f / 200.0;
    let sys = ModalIntegrator::new(&sdof(f, zeta), dt);
    let w = 2.0 * PI * f;
    let (mut q, mut v, mut a) = ([0.0], [0.0], [0.0]);
    let steps = 1500 * 200;
    let mut peak: f64 = 0.0;
    for k in 1..=steps {
        sys.step(&mut q, &mut v, &mut a, &[(w * k as f64 * dt).sin()]);
        if k > steps - 1000 {
            peak = peak.max(q[0].abs());
        }
    }
    peak / harmonic_amplitude(w * w, zeta, 1.0, 1.0) - 1.0
}

fn decay_check() -> Result<f64> {
    let (f, zeta) = (0.1, 0.005);
    let dt = 1.0 / f / 200.0;
    let sys = ModalIntegrator::new(&sdof(f, zeta), dt);
    let (mut q, mut v, mut a) = ([1.0], [0.0], [0.0]);
    sys.acceleration(&q, &v, &[0.0], &mut a);
    let mut prev = (q[0], q[0]);
    let mut peaks = Vec::new();
    for _ in 0..40 * 200 {
        sys.step(&mut q, &mut v, &mut a, &[0.0]);
        if prev.1 > prev.0 && prev.1 >= q[0] && prev.1 > 0.0 {
            peaks.push(prev.1);
        }
        prev = (prev.1, q[0]);
    }
    Ok(log_decrement_damping(&peaks)? / zeta - 1.0)
}

fn quarter_car_check() -> Result<f64> {
    let (ms, mu, ks, kt) = (400.0, 45.0, 22e3, 190e3);
    let wheel = crate::vehicle::Wheel {
        body: 0,
        offset: 0.0,
        lateral: 0.0,
        suspension_stiffness: ks / 4.0,
        suspension_damping: 0.0,
        mass: mu / 4.0,
        tyre_stiffness: kt / 4.0,
        tyre_damping: 0.0,
    };
    let p = VehicleParams {
        class: VehicleClass::Car,
        length: 1.0,
        cg_from_front: 0.5,
        bodies: vec![crate::vehicle::Body {
            mass: ms,
            pitch_inertia: 1.0,
            roll_inertia: 1.0,
        }],
        wheels: vec![wheel; 4],
        hitch: None,
    };
    // Four coincident wheels under the CG: body heave and in-phase wheel
    // hop form the quarter car.
    let m = vehicle_matrices(&p)?;
    let mut t = nalgebra::DMatrix::<f64>::zeros(m.dofs(), 2);
    t[(0, 0)] = 1.0;
    for &d in &m.wheel_dofs {
        t[(d, 1)] = 1.0;
    }
    let mr = t.transpose() * &m.mass * &t;
    let kr = t.transpose() * &m.stiffness * &t;
    let f = natural_frequencies(&mr, &kr)?;
    let exact = quarter_car_frequencies(ms, mu, ks, kt);
    Ok((0..2).map(|i| f[i] / exact[i] - 1.0).fold(0.0, |a: f64, e| a.max(e.abs())))
}

fn static_contact_check(catalog: &Catalog) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for class in VehicleClass::ALL {
        let p = VehicleParams::nominal(class, catalog.get(class)?);
        let weight = p.weight();
        let v = Vehicle::new(p, 0.02)?;
        let road = vec![RoadInput::default(); v.wheel_count()];
        let state = v.static_state(&road)?;
        let mut out = vec![0.0; v.wheel_count()];
        v.contact_forces(&state, &road, &mut out);
        worst = worst.max((out.iter().sum::<f64>() / weight - 1.0).abs());
    }
    Ok(worst)
}

/// Runs the closed-form checks on the given bridge and catalog.
pub fn suite(bridge: &ModalBridge, catalog: &Catalog) -> Result<Vec<Check>> {
    let truck = VehicleParams::nominal(VehicleClass::Truck2, catalog.get(VehicleClass::Truck2)?);
    let crossing = single_crossing(bridge, truck, 20.0, 0.02)?;
    Ok(vec![
        Check {
            name: "SDOF resonant amplitude, dt = T/200",
            value: resonance_check(),
            limit: 5e-3,
        },
        Check {
            name: "free-decay log decrement recovers zeta",
            value: decay_check()?,
            limit: 2e-2,
        },
        Check {
            name: "quarter-car eigenfrequencies",
            value: quarter_car_check()?,
            limit: 1e-9,
        },
        Check {
            name: "static contact force equals weight",
            value: static_contact_check(catalog)?,
            limit: 1e-9,
        },
        Check {
            name: "moving-load midspan peak deflection",
            value: crossing.peak_error(),
            limit: 2e-2,
        },
    ])
}
