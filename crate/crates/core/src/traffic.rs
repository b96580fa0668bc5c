//! Stochastic traffic: Poisson arrivals per lane, class mix, speed limits
//! and single-lane car following.
//!
//! Longitudinal motion uses a Helly-type law
//!
//! ```text
//! a = min((v0 - v) / tau, c1 (v_lead - v) + c2 (gap - s0 - T v)),  clamped to [-b_max, a_max]
//! ```
//!
//! whose equilibrium gap behind a leader at speed `v` is `s0 + T v`. Entries
//! are delayed while the lane entrance is blocked, and a kinematic guard
//! keeps every gap at or above `s0`. There is no lane changing.
//!
//! Positions `s` are measured along the direction of travel from the
//! entry abutment to the front bumper.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::{sample_params, Catalog, VehicleClass, VehicleParams, Variability};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Towards increasing `x`.
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lane {
    pub direction: Direction,
    /// Lateral offset of the lane centre from the deck centreline [m].
    pub offset: f64,
}

pub fn default_lanes() -> Vec<Lane> {
    vec![
        Lane { direction: Direction::Forward, offset: 3.9 },
        Lane { direction: Direction::Forward, offset: 7.6 },
        Lane { direction: Direction::Backward, offset: -3.9 },
        Lane { direction: Direction::Backward, offset: -7.6 },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarFollowing {
    /// Desired-speed relaxation time `tau` [s].
    pub relaxation_time: f64,
    /// Speed-difference gain `c1` [1/s].
    pub speed_gain: f64,
    /// Gap gain `c2` [1/s^2].
    pub gap_gain: f64,
    /// Standstill gap `s0` [m].
    pub standstill_gap: f64,
    /// Time gap `T` [s].
    pub time_gap: f64,
    pub max_accel: f64,
    pub max_decel: f64,
}

impl Default for CarFollowing {
    fn default() -> Self {
        Self {
            relaxation_time: 5.0,
            speed_gain: 0.5,
            gap_gain: 0.1,
            standstill_gap: 2.0,
            time_gap: 1.3,
            max_accel: 1.5,
            max_decel: 4.0,
        }
    }
}

impl CarFollowing {
    /// Acceleration of a vehicle at speed `v` with desired speed `v0`,
    /// optionally following a leader `(gap, v_lead)`.
    pub fn acceleration(&self, v: f64, v0: f64, leader: Option<(f64, f64)>) -> f64 {
        let free = (v0 - v) / self.relaxation_time;
        let a = match leader {
            Some((gap, vl)) => {
                free.min(self.speed_gain * (vl - v) + self.gap_gain * (gap - self.standstill_gap - self.time_gap * v))
            }
            None => free,
        };
        a.clamp(-self.max_decel, self.max_accel)
    }

    pub fn equilibrium_gap(&self, v: f64) -> f64 {
        self.standstill_gap + self.time_gap * v
    }
}

pub fn default_composition() -> BTreeMap<VehicleClass, f64> {
    BTreeMap::from([
        (VehicleClass::Car, 0.72),
        (VehicleClass::Van, 0.12),
        (VehicleClass::Bus, 0.02),
        (VehicleClass::Truck2, 0.07),
        (VehicleClass::Truck3, 0.07),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Vehicles per day over all lanes.
    pub daily_volume: f64,
    pub composition: BTreeMap<VehicleClass, f64>,
    pub lanes: Vec<Lane>,
    /// Speed limit per wind case [km/h].
    pub speed_limits_kmh: [f64; 3],
    /// Desired-speed standard deviation as a fraction of the limit.
    pub speed_jitter: f64,
    /// Minimum time between entries in one lane [s].
    pub min_headway: f64,
    pub car_following: CarFollowing,
    pub variability: Variability,
    /// Model three-axle trucks as tractor plus pinned trailer.
    pub articulated: bool,
    /// Trajectory sampling interval [s].
    pub dt: f64,
    /// Traffic simulated before `t = 0` so the deck starts populated [s];
    /// `None` picks twice the crossing time at half the slowest limit.
    pub warm_up: Option<f64>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            daily_volume: 56_000.0,
            composition: default_composition(),
            lanes: default_lanes(),
            speed_limits_kmh: [110.0, 90.0, 70.0],
            speed_jitter: 0.05,
            min_headway: 1.0,
            car_following: CarFollowing::default(),
            variability: Variability::default(),
            articulated: true,
            dt: 0.1,
            warm_up: None,
        }
    }
}

impl TrafficConfig {
    /// Lists every violated invariant.
    pub fn violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if !(self.daily_volume >= 0.0) {
            bad.push(format!("traffic.daily_volume must be >= 0 (got {})", self.daily_volume));
        }
        let sum: f64 = self.composition.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            bad.push(format!("traffic.composition sums to {sum}, not 1"));
        }
        if self.composition.values().any(|p| !(*p >= 0.0)) {
            bad.push("traffic.composition has a negative share".into());
        }
        for dir in [Direction::Forward, Direction::Backward] {
            let n = self.lanes.iter().filter(|l| l.direction == dir).count();
            if n != 2 {
                bad.push(format!("traffic.lanes: {n} lanes travel {dir:?}; need 2 per direction"));
            }
        }
        if self.speed_limits_kmh.iter().any(|v| !(*v > 0.0)) {
            bad.push("traffic.speed_limits_kmh must be positive".into());
        }
        if !(self.speed_jitter >= 0.0 && self.min_headway >= 0.0 && self.dt > 0.0) {
            bad.push("traffic.speed_jitter and min_headway must be >= 0 and dt > 0".into());
        }
        let cf = &self.car_following;
        if [cf.relaxation_time, cf.speed_gain, cf.gap_gain, cf.max_accel, cf.max_decel]
            .iter()
            .any(|v| !(*v > 0.0))
            || !(cf.standstill_gap >= 0.0 && cf.time_gap >= 0.0)
        {
            bad.push("traffic.car_following gains, limits and gaps must be positive".into());
        }
        if let Some(w) = self.warm_up {
            if !(w >= 0.0) {
                bad.push("traffic.warm_up must be >= 0".into());
            }
        }
        bad
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self.violations();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    /// Poisson rate per lane [1/s].
    pub fn lane_rate(&self) -> f64 {
        if self.lanes.is_empty() {
            0.0
        } else {
            self.daily_volume / (86_400.0 * self.lanes.len() as f64)
        }
    }

    fn draw_class<R: Rng + ?Sized>(&self, rng: &mut R) -> VehicleClass {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = VehicleClass::Car;
        for (&c, &p) in &self.composition {
            if p > 0.0 {
                last = c;
            }
            acc += p;
            if u < acc {
                return c;
            }
        }
        last
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    /// Requested entry time [s].
    pub time: f64,
    pub lane: usize,
    pub class: VehicleClass,
}

/// Poisson arrivals per lane over `[t0, t1)`, sorted by lane then time.
pub fn generate_arrivals<R: Rng + ?Sized>(cfg: &TrafficConfig, t0: f64, t1: f64, rng: &mut R) -> Vec<Arrival> {
    let rate = cfg.lane_rate();
    let mut out = Vec::new();
    if rate <= 0.0 || !(t1 > t0) {
        return out;
    }
    let exp = Exp::new(rate).expect("positive rate");
    for lane in 0..cfg.lanes.len() {
        let mut t = t0;
        loop {
            t += exp.sample(rng);
            if t >= t1 {
                break;
            }
            out.push(Arrival {
                time: t,
                lane,
                class: cfg.draw_class(rng),
            });
        }
    }
    out
}

/// Desired speed [m/s]: class-capped limit plus Gaussian jitter, floored at half the limit.
pub fn assign_speed<R: Rng + ?Sized>(limit_kmh: f64, cap_kmh: f64, jitter: f64, rng: &mut R) -> f64 {
    let limit = limit_kmh / 3.6;
    let base = limit_kmh.min(cap_kmh) / 3.6;
    let z: f64 = if jitter > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
    (base + jitter * limit * z).max(0.5 * limit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleInstance {
    pub id: usize,
    pub class: VehicleClass,
    pub params: VehicleParams,
    pub lane: usize,
    pub requested_entry: f64,
    /// Time the front bumper crossed the entry abutment [s].
    pub entry_time: f64,
    pub desired_speed: f64,
    /// Trajectory sample index of `entry_time`.
    first_sample: usize,
    s: Vec<f64>,
    v: Vec<f64>,
}

impl VehicleInstance {
    pub fn length(&self) -> f64 {
        self.params.length
    }

    pub fn samples(&self) -> (&[f64], &[f64]) {
        (&self.s, &self.v)
    }

    /// Time of the last trajectory sample [s].
    fn last_sample(&self) -> usize {
        self.first_sample + self.s.len() - 1
    }
}

/// Position of an on-deck vehicle at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Load {
    /// Index into [`TrafficStream::vehicles`].
    pub vehicle: usize,
    /// Deck coordinate of the front bumper [m].
    pub x_front: f64,
    /// Travel speed [m/s].
    pub speed: f64,
    pub lane: usize,
    pub offset: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficStream {
    pub vehicles: Vec<VehicleInstance>,
    pub lanes: Vec<Lane>,
    pub bridge_length: f64,
    /// Time of trajectory sample 0 [s].
    pub t_start: f64,
    pub dt: f64,
    samples: usize,
    pub seed: u64,
    pub speed_limit_kmh: f64,
}

struct Active {
    vehicle: usize,
    s: f64,
    v: f64,
}

impl TrafficStream {
    /// Simulates traffic on a deck of length `bridge_length` from
    /// `-warm_up` to `t_end`.
    pub fn generate(
        cfg: &TrafficConfig,
        catalog: &Catalog,
        speed_limit_kmh: f64,
        bridge_length: f64,
        t_end: f64,
        traffic_seed: u64,
        params_seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let warm_up = cfg.warm_up.unwrap_or_else(|| {
            let slowest = cfg.speed_limits_kmh.iter().cloned().fold(f64::INFINITY, f64::min) / 3.6;
            (4.0 * bridge_length / slowest / cfg.dt).ceil() * cfg.dt
        });
        let warm_steps = (warm_up / cfg.dt).round() as usize;
        let t_start = -(warm_steps as f64) * cfg.dt;
        let samples = warm_steps + (t_end / cfg.dt).ceil() as usize + 1;

        let mut arrivals_rng = ChaCha8Rng::seed_from_u64(traffic_seed);
        arrivals_rng.set_stream(1);
        let mut speed_rng = ChaCha8Rng::seed_from_u64(traffic_seed);
        speed_rng.set_stream(2);
        let mut params_rng = ChaCha8Rng::seed_from_u64(params_seed);
        params_rng.set_stream(3);

        let t_last = t_start + (samples - 1) as f64 * cfg.dt;
        let arrivals = generate_arrivals(cfg, t_start, t_last, &mut arrivals_rng);
        let mut vehicles = Vec::with_capacity(arrivals.len());
        for (id, a) in arrivals.iter().enumerate() {
            let spec = catalog.get(a.class)?;
            let mut params = sample_params(a.class, spec, &cfg.variability, &mut params_rng);
            if !cfg.articulated {
                params = params.rigidified();
            }
            let desired_speed = assign_speed(speed_limit_kmh, spec.speed_cap_kmh, cfg.speed_jitter, &mut speed_rng);
            vehicles.push(VehicleInstance {
                id,
                class: a.class,
                params,
                lane: a.lane,
                requested_entry: a.time,
                entry_time: f64::NAN,
                desired_speed,
                first_sample: 0,
                s: Vec::new(),
                v: Vec::new(),
            });
        }

        let cf = cfg.car_following;
        let dt = cfg.dt;
        for lane in 0..cfg.lanes.len() {
            let mut waiting: VecDeque<usize> = vehicles
                .iter()
                .enumerate()
                .filter(|(_, v)| v.lane == lane)
                .map(|(i, _)| i)
                .collect();
            let mut active: Vec<Active> = Vec::new();
            let mut last_entry = f64::NEG_INFINITY;
            for k in 0..samples {
                let t = t_start + k as f64 * dt;
                if k > 0 {
                    // Leaders first, so followers see the updated leader.
                    let mut lead: Option<(f64, f64)> = None;
                    for a in active.iter_mut() {
                        let veh = &vehicles[a.vehicle];
                        let leader = lead.map(|(rear, vl)| (rear - a.s, vl));
                        let acc = cf.acceleration(a.v, veh.desired_speed, leader);
                        let mut v1 = (a.v + acc * dt).max(0.0);
                        let mut s1 = a.s + v1 * dt;
                        if let Some((rear, _)) = lead {
                            let limit = rear - cf.standstill_gap;
                            if s1 > limit {
                                s1 = limit.max(a.s);
                                v1 = (s1 - a.s) / dt;
                            }
                        }
                        a.s = s1;
                        a.v = v1;
                        lead = Some((s1 - veh.params.length, v1));
                    }
                }
                // Leaving vehicles: rear beyond the far abutment.
                while let Some(first) = active.first() {
                    if first.s - vehicles[first.vehicle].params.length >= bridge_length {
                        active.remove(0);
                    } else {
                        break;
                    }
                }
                // Entries, delayed while the entrance is blocked.
                while let Some(&next) = waiting.front() {
                    let veh = &vehicles[next];
                    if veh.requested_entry > t || t - last_entry < cfg.min_headway - 1e-9 {
                        break;
                    }
                    let v_enter = match active.last() {
                        Some(l) => {
                            let gap = l.s - vehicles[l.vehicle].params.length;
                            let v = veh.desired_speed.min(l.v.max(0.0));
                            if gap < cf.equilibrium_gap(v) {
                                break;
                            }
                            if gap >= cf.equilibrium_gap(veh.desired_speed) {
                                veh.desired_speed
                            } else {
                                v
                            }
                        }
                        None => veh.desired_speed,
                    };
                    waiting.pop_front();
                    last_entry = t;
                    let v = &mut vehicles[next];
                    v.entry_time = t;
                    v.first_sample = k;
                    active.push(Active {
                        vehicle: next,
                        s: 0.0,
                        v: v_enter,
                    });
                }
                for a in &active {
                    let v = &mut vehicles[a.vehicle];
                    v.s.push(a.s);
                    v.v.push(a.v);
                }
            }
        }
        // Vehicles still queued at the end never entered.
        vehicles.retain(|v| !v.s.is_empty());
        for (i, v) in vehicles.iter_mut().enumerate() {
            v.id = i;
        }
        Ok(Self {
            vehicles,
            lanes: cfg.lanes.clone(),
            bridge_length,
            t_start,
            dt,
            samples,
            seed: traffic_seed,
            speed_limit_kmh,
        })
    }

    /// One vehicle crossing at constant `speed`, its front bumper at the
    /// entry abutment at `t_entry`. Samples run from 0 to `t_end`.
    pub fn single(
        params: VehicleParams,
        lane: Lane,
        bridge_length: f64,
        speed: f64,
        t_entry: f64,
        t_end: f64,
        dt: f64,
    ) -> Result<Self> {
        if !(speed > 0.0 && dt > 0.0 && t_entry >= 0.0 && t_end > t_entry) {
            return Err(Error::Invariant(format!(
                "single crossing needs speed, dt > 0 and 0 <= t_entry < t_end (got v={speed}, dt={dt}, t_entry={t_entry}, t_end={t_end})"
            )));
        }
        params.validate()?;
        let samples = (t_end / dt).ceil() as usize + 1;
        let first_sample = (t_entry / dt).ceil() as usize;
        let mut s = Vec::new();
        for k in first_sample..samples {
            let pos = speed * (k as f64 * dt - t_entry);
            s.push(pos);
            if pos - params.length >= bridge_length {
                break;
            }
        }
        let v = vec![speed; s.len()];
        Ok(Self {
            vehicles: vec![VehicleInstance {
                id: 0,
                class: params.class,
                params,
                lane: 0,
                requested_entry: t_entry,
                entry_time: first_sample as f64 * dt,
                desired_speed: speed,
                first_sample,
                s,
                v,
            }],
            lanes: vec![lane],
            bridge_length,
            t_start: 0.0,
            dt,
            samples,
            seed: 0,
            speed_limit_kmh: speed * 3.6,
        })
    }

    /// Time of the last trajectory sample [s].
    pub fn t_end(&self) -> f64 {
        self.t_start + (self.samples - 1) as f64 * self.dt
    }

    /// Position and speed of vehicle `i` at `t`, if it has entered and
    /// not yet left the simulated road.
    pub fn state(&self, i: usize, t: f64) -> Option<(f64, f64)> {
        let veh = &self.vehicles[i];
        let u = (t - self.t_start) / self.dt;
        if !(u >= veh.first_sample as f64 - 1e-9 && u <= veh.last_sample() as f64 + 1e-9) {
            return None;
        }
        let k = (u.floor() as usize).clamp(veh.first_sample, veh.last_sample());
        let j = k - veh.first_sample;
        if j + 1 >= veh.s.len() {
            return Some((veh.s[j], veh.v[j]));
        }
        let w = (u - k as f64).clamp(0.0, 1.0);
        Some((
            veh.s[j] + w * (veh.s[j + 1] - veh.s[j]),
            veh.v[j] + w * (veh.v[j + 1] - veh.v[j]),
        ))
    }

    /// Like [`state`](Self::state), but continues at constant speed for one
    /// sample interval past the last sample, covering the instant the vehicle
    /// leaves the deck.
    pub fn position(&self, i: usize, t: f64) -> Option<(f64, f64)> {
        if let Some(sv) = self.state(i, t) {
            return Some(sv);
        }
        let veh = &self.vehicles[i];
        let t_last = self.t_start + veh.last_sample() as f64 * self.dt;
        if t > t_last && t <= t_last + self.dt + 1e-9 {
            let (s, v) = (veh.s[veh.s.len() - 1], veh.v[veh.v.len() - 1]);
            Some((s + v * (t - t_last), v))
        } else {
            None
        }
    }

    /// Interval `[t_on, t_off]` bracketing the times any axle of vehicle `i`
    /// is on the deck, widened by one sample interval on each side.
    pub fn deck_window(&self, i: usize) -> Option<(f64, f64)> {
        let veh = &self.vehicles[i];
        let on: Vec<usize> = (0..veh.s.len()).filter(|&j| self.on_deck(i, veh.s[j])).collect();
        let (first, last) = (*on.first()?, *on.last()?);
        let t = |j: usize| self.t_start + (veh.first_sample + j) as f64 * self.dt;
        Some((t(first) - self.dt, t(last) + self.dt))
    }

    /// Deck coordinate of the front bumper for travel position `s`.
    pub fn deck_x(&self, lane: usize, s: f64) -> f64 {
        match self.lanes[lane].direction {
            Direction::Forward => s,
            Direction::Backward => self.bridge_length - s,
        }
    }

    /// Whether any axle of vehicle `i` lies in `[0, L)` at travel position `s`.
    pub fn on_deck(&self, i: usize, s: f64) -> bool {
        let veh = &self.vehicles[i];
        veh.params.wheel_setbacks().iter().any(|&b| {
            let x = self.deck_x(veh.lane, s - b);
            x >= 0.0 && x < self.bridge_length
        })
    }

    /// Vehicles with an axle on the deck at `t`, in vehicle order.
    pub fn loads_at(&self, t: f64) -> Vec<Load> {
        let mut out = Vec::new();
        for (i, veh) in self.vehicles.iter().enumerate() {
            if let Some((s, v)) = self.state(i, t) {
                if self.on_deck(i, s) {
                    let lane = self.lanes[veh.lane];
                    out.push(Load {
                        vehicle: i,
                        x_front: self.deck_x(veh.lane, s),
                        speed: v,
                        lane: veh.lane,
                        offset: lane.offset,
                        direction: lane.direction,
                    });
                }
            }
        }
        out
    }

    /// Time-averaged number of vehicles on the deck over `[t0, t1]`.
    pub fn mean_occupancy(&self, t0: f64, t1: f64) -> f64 {
        let n = ((t1 - t0) / self.dt).floor() as usize;
        let total: usize = (0..=n).map(|k| self.loads_at(t0 + k as f64 * self.dt).len()).sum();
        total as f64 / (n + 1) as f64
    }

    /// Trajectory CSV `t, id, lane, x, v` for audit.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# t [s], vehicle id, lane index, front bumper deck coordinate x [m], speed v [m/s]")?;
        writeln!(out, "t,id,lane,x,v")?;
        for veh in &self.vehicles {
            for (j, (s, v)) in veh.s.iter().zip(&veh.v).enumerate() {
                let t = self.t_start + (veh.first_sample + j) as f64 * self.dt;
                writeln!(out, "{t:.3},{},{},{:.4},{:.4}", veh.id, veh.lane, self.deck_x(veh.lane, *s), v)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(cfg: &TrafficConfig, limit: f64, seed: u64) -> TrafficStream {
        TrafficStream::generate(cfg, &Catalog::builtin(), limit, 2694.0, 600.0, seed, seed ^ 0xabc).unwrap()
    }

    #[test]
    fn zero_volume_has_no_arrivals() {
        let cfg = TrafficConfig {
            daily_volume: 0.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(generate_arrivals(&cfg, 0.0, 600.0, &mut rng).is_empty());
        assert!(stream(&cfg, 110.0, 1).vehicles.is_empty());
    }

    #[test]
    fn single_class_composition() {
        let cfg = TrafficConfig {
            composition: BTreeMap::from([(VehicleClass::Car, 1.0)]),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = generate_arrivals(&cfg, 0.0, 3600.0, &mut rng);
        assert!(!a.is_empty());
        assert!(a.iter().all(|a| a.class == VehicleClass::Car));
    }

    #[test]
    fn composition_must_sum_to_one() {
        let mut cfg = TrafficConfig::default();
        cfg.composition.insert(VehicleClass::Car, 0.69);
        let v = cfg.violations();
        assert!(v.iter().any(|m| m.contains("composition sums to")), "{v:?}");
    }

    #[test]
    fn speeds_without_jitter_follow_the_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((assign_speed(110.0, 130.0, 0.0, &mut rng) - 30.5556).abs() < 1e-4);
        assert!((assign_speed(70.0, 80.0, 0.0, &mut rng) - 19.4444).abs() < 1e-4);
        assert!((assign_speed(70.0, 130.0, 0.0, &mut rng) - 19.4444).abs() < 1e-4);
        assert!((assign_speed(110.0, 80.0, 0.0, &mut rng) - 80.0 / 3.6).abs() < 1e-12);
    }

    #[test]
    fn speed_jitter_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let limit = 90.0 / 3.6;
        let d: Vec<f64> = (0..10_000).map(|_| assign_speed(90.0, 130.0, 0.05, &mut rng)).collect();
        let n = d.len() as f64;
        let mu = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((0.045..=0.055).contains(&(sd / limit)), "{}", sd / limit);
        assert!(d.iter().all(|&v| v >= 0.5 * limit));
    }

    #[test]
    fn follower_settles_at_equilibrium_gap() {
        let cf = CarFollowing::default();
        let dt = 0.1;
        let (mut sl, vl) = (200.0, 15.0);
        let (mut s, mut v) = (0.0, 30.0);
        let len = 4.5;
        let mut prev_err = f64::INFINITY;
        let mut sign_flips = 0;
        for k in 0..6000 {
            sl += vl * dt;
            let gap = sl - len - s;
            let a = cf.acceleration(v, 30.0, Some((gap, vl)));
            v = (v + a * dt).max(0.0);
            s += v * dt;
            assert!(sl - len - s > cf.standstill_gap);
            let err = gap - cf.equilibrium_gap(vl);
            if k > 100 && err.signum() != prev_err.signum() {
                sign_flips += 1;
            }
            prev_err = err;
        }
        assert!(prev_err.abs() < 1e-3, "{prev_err}");
        assert!(sign_flips <= 2);
    }

    #[test]
    fn lone_vehicle_cruises_at_desired_speed() {
        let cfg = TrafficConfig {
            daily_volume: 2.0,
            speed_jitter: 0.0,
            composition: BTreeMap::from([(VehicleClass::Car, 1.0)]),
            ..Default::default()
        };
        let s = TrafficStream::generate(&cfg, &Catalog::builtin(), 90.0, 2694.0, 600.0, 11, 12).unwrap();
        let v0 = 25.0;
        for veh in &s.vehicles {
            assert!(veh.v.iter().all(|v| (v - v0).abs() < 1e-12));
        }
    }

    #[test]
    fn no_overlap_and_monotone() {
        let s = stream(&TrafficConfig::default(), 70.0, 21);
        assert!(s.vehicles.len() > 100);
        for veh in &s.vehicles {
            assert!(veh.s.windows(2).all(|w| w[1] >= w[0]));
        }
        let cf = CarFollowing::default();
        let mut t = s.t_start;
        while t < s.t_end() {
            for lane in 0..4 {
                let mut pos: Vec<(f64, f64)> = (0..s.vehicles.len())
                    .filter(|&i| s.vehicles[i].lane == lane)
                    .filter_map(|i| s.state(i, t).map(|(x, _)| (x, s.vehicles[i].length())))
                    .collect();
                pos.sort_by(|a, b| b.0.total_cmp(&a.0));
                for w in pos.windows(2) {
                    assert!(w[0].0 - w[0].1 - w[1].0 >= cf.standstill_gap - 1e-9);
                }
            }
            t += 7.3;
        }
    }

    #[test]
    fn loads_match_full_scan_and_boundaries() {
        let s = stream(&TrafficConfig::default(), 90.0, 4);
        assert!(s.loads_at(s.t_start).is_empty());
        for t in [0.0, 100.0, 333.3, 599.9] {
            let loads = s.loads_at(t);
            let mut brute = 0;
            for (i, veh) in s.vehicles.iter().enumerate() {
                let Some((pos, _)) = s.state(i, t) else { continue };
                let on = veh.params.wheel_setbacks().iter().any(|b| {
                    let x = s.deck_x(veh.lane, pos - b);
                    (0.0..2694.0).contains(&x)
                });
                brute += on as usize;
            }
            assert_eq!(loads.len(), brute);
            assert!(!loads.is_empty());
        }
        let i = 0;
        let veh = &s.vehicles[i];
        let last_axle = veh.params.wheel_setbacks().iter().cloned().fold(f64::MIN, f64::max);
        assert!(!s.on_deck(i, 2694.0 + last_axle));
        assert!(s.on_deck(i, 2694.0 + last_axle - 1e-6));
    }

    #[test]
    fn deterministic() {
        let a = stream(&TrafficConfig::default(), 110.0, 9);
        let b = stream(&TrafficConfig::default(), 110.0, 9);
        assert_eq!(a, b);
        assert_ne!(a, stream(&TrafficConfig::default(), 110.0, 10));
    }

    #[test]
    fn every_vehicle_exits_given_time() {
        let cfg = TrafficConfig {
            warm_up: Some(0.0),
            daily_volume: 56_000.0,
            ..Default::default()
        };
        let horizon = 600.0;
        let s = TrafficStream::generate(&cfg, &Catalog::builtin(), 110.0, 2694.0, horizon, 2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        rng.set_stream(1);
        let generated = generate_arrivals(&cfg, 0.0, s.t_end(), &mut rng);
        let early: Vec<f64> = generated.iter().filter(|a| a.time < horizon - 60.0).map(|a| a.time).collect();
        for t in &early {
            assert_eq!(s.vehicles.iter().filter(|v| v.requested_entry == *t).count(), 1);
        }
        let exited = s
            .vehicles
            .iter()
            .filter(|v| v.requested_entry < horizon - 300.0)
            .all(|v| v.last_sample() < s.samples - 1);
        assert!(exited);
    }
}
