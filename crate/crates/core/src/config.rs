//! Simulation configuration file.
//!
//! A TOML document with the sections `[simulation]`, `[files]`, `[wind]`,
//! `[roughness]`, `[traffic]` and `[aero]`. Every key has a default, so an
//! empty file is a valid Case-3 configuration. Relative file paths are
//! resolved against the directory of the configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aero::{AeroCoefficients, AeroConfig};
use crate::bridge::{parse_bridge, ModalBridge};
use crate::error::{Error, Result};
use crate::fields::{IsoClass, RoughnessSpec, TurbulenceSpec};
use crate::solver::{Scenario, SolverOptions, WindCase};
use crate::traffic::TrafficConfig;
use crate::vehicle::Catalog;

pub const BUILTIN_BRIDGE: &str = include_str!("../../../data/greatbelt_like.bridge");
pub const BUILTIN_COEFFICIENTS: &str = include_str!("../../../data/box_girder_coefficients.csv");
pub const BUILTIN_CATALOG: &str = include_str!("../../../data/vehicle_catalog.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub scenarios: Vec<Scenario>,
    pub case: WindCase,
    /// Recorded duration after run-up [s].
    pub duration: f64,
    pub dt: f64,
    pub run_up: f64,
    pub record_every: usize,
    /// Recording stations [m]; empty means `station_count` equally spaced
    /// stations over the whole deck.
    pub stations: Vec<f64>,
    pub station_count: usize,
    pub feedback: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub realisations: usize,
    pub master_seed: u64,
    /// Tyres cannot pull on the deck.
    pub unilateral_contact: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            scenarios: Scenario::ALL.to_vec(),
            case: WindCase::Three,
            duration: o.duration,
            dt: o.dt,
            run_up: o.run_up,
            record_every: o.record_every,
            stations: Vec::new(),
            station_count: 41,
            feedback: o.feedback,
            tolerance: o.tolerance,
            max_iterations: o.max_iterations,
            realisations: 6,
            master_seed: 20_240_601,
            unilateral_contact: false,
        }
    }
}

/// Input files; `None` selects the built-in data set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilesSection {
    pub bridge: Option<PathBuf>,
    pub coefficients: Option<PathBuf>,
    pub vehicle_catalog: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindSection {
    /// Mean wind speed [m/s]; defaults to the middle of the case band.
    pub mean_speed: Option<f64>,
    pub intensity: [f64; 3],
    pub length_scale: [f64; 3],
    pub davenport_decay: [f64; 3],
    /// Sampling interval of the generated field [s].
    pub dt: f64,
}

impl Default for WindSection {
    fn default() -> Self {
        let t = TurbulenceSpec::default();
        Self {
            mean_speed: None,
            intensity: t.intensity,
            length_scale: t.length_scale,
            davenport_decay: t.davenport_decay,
            dt: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoughnessSection {
    /// Smooth deck when false.
    pub enabled: bool,
    pub iso_class: IsoClass,
    pub reference_psd: Option<f64>,
    pub waviness_exponent: f64,
    pub transverse_decay: f64,
    pub wavenumber_band: (f64, f64),
    /// Profile sample spacing [m].
    pub dx: f64,
    /// Lateral distance between the two wheel tracks of a lane [m].
    pub track_gap: f64,
    /// Profile extension beyond each abutment [m].
    pub approach: f64,
}

impl Default for RoughnessSection {
    fn default() -> Self {
        let r = RoughnessSpec::default();
        Self {
            enabled: true,
            iso_class: r.iso_class,
            reference_psd: r.reference_psd,
            waviness_exponent: r.waviness_exponent,
            transverse_decay: r.transverse_decay,
            wavenumber_band: r.wavenumber_band,
            dx: 0.1,
            track_gap: 1.8,
            approach: 30.0,
        }
    }
}

impl RoughnessSection {
    pub fn spec(&self) -> RoughnessSpec {
        RoughnessSpec {
            iso_class: self.iso_class,
            reference_psd: self.reference_psd,
            waviness_exponent: self.waviness_exponent,
            transverse_decay: self.transverse_decay,
            wavenumber_band: self.wavenumber_band,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub simulation: SimulationSection,
    pub files: FilesSection,
    pub wind: WindSection,
    pub roughness: RoughnessSection,
    pub traffic: TrafficConfig,
    pub aero: AeroConfig,
}

fn flatten(section: &str, r: Result<()>, out: &mut Vec<String>) {
    match r {
        Ok(()) => {}
        Err(Error::Config(list)) => out.extend(list.into_iter().map(|m| {
            if m.starts_with(section) {
                m
            } else {
                format!("{section}.{m}")
            }
        })),
        Err(e) => out.push(format!("{section}: {e}")),
    }
}

impl SimulationConfig {
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| 1 + text[..s.start.min(text.len())].matches('\n').count())
                .unwrap_or(0);
            Error::parse(file, line, e.message())
        })
    }

    /// Reads a file and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.files.bridge,
            &mut cfg.files.coefficients,
            &mut cfg.files.vehicle_catalog,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn mean_speed(&self) -> f64 {
        self.wind
            .mean_speed
            .unwrap_or_else(|| self.simulation.case.default_mean_speed())
    }

    pub fn speed_limit_kmh(&self) -> f64 {
        self.traffic.speed_limits_kmh[self.simulation.case.index()]
    }

    pub fn turbulence(&self) -> TurbulenceSpec {
        TurbulenceSpec {
            mean_speed: self.mean_speed(),
            intensity: self.wind.intensity,
            length_scale: self.wind.length_scale,
            davenport_decay: self.wind.davenport_decay,
            air_density: self.aero.density,
        }
    }

    /// Solver options; `stations` must already be resolved.
    pub fn solver_options(&self, stations: Vec<f64>) -> SolverOptions {
        let s = &self.simulation;
        SolverOptions {
            dt: s.dt,
            run_up: s.run_up,
            duration: s.duration,
            record_every: s.record_every,
            feedback: s.feedback,
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            stations,
        }
    }

    /// Every statically checkable invariant that does not hold.
    pub fn violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let s = &self.simulation;
        let u = self.mean_speed();
        if !s.case.contains(u) {
            let (lo, hi) = s.case.band();
            bad.push(format!(
                "case/wind-band mismatch: case {} requires U in [{lo}, {hi}] m/s, got {u}",
                s.case.number()
            ));
        }
        if s.scenarios.is_empty() {
            bad.push("simulation.scenarios is empty".into());
        }
        if s.realisations == 0 {
            bad.push("simulation.realisations must be >= 1".into());
        }
        if s.stations.is_empty() && s.station_count < 2 {
            bad.push("simulation.station_count must be >= 2".into());
        }
        if s.stations.windows(2).any(|w| !(w[1] > w[0])) {
            bad.push("simulation.stations must be strictly increasing".into());
        }
        flatten("simulation", self.solver_options(Vec::new()).validate(), &mut bad);
        flatten("wind", self.turbulence().validate(), &mut bad);
        if !(self.wind.dt > 0.0) {
            bad.push("wind.dt must be positive".into());
        } else if s.dt > 0.0 && self.wind.dt < s.dt {
            bad.push("wind.dt must not be smaller than simulation.dt".into());
        }
        if self.roughness.enabled {
            flatten("roughness", self.roughness.spec().validate(), &mut bad);
        }
        let r = &self.roughness;
        if !(r.dx > 0.0) || !(r.track_gap >= 0.0) || !(r.approach >= 0.0) {
            bad.push("roughness.dx must be positive, track_gap and approach >= 0".into());
        }
        bad.extend(self.traffic.violations());
        flatten("aero", self.aero.validate(), &mut bad);
        for (key, p) in [
            ("files.bridge", &self.files.bridge),
            ("files.coefficients", &self.files.coefficients),
            ("files.vehicle_catalog", &self.files.vehicle_catalog),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    bad.push(format!("{key}: {} does not exist", p.display()));
                }
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

    /// Effective configuration with all defaults filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// Validates, loads every referenced input and computes the hash.
    pub fn resolve(self) -> Result<Resolved> {
        self.validate()?;
        let read = |p: &Option<PathBuf>, builtin: &str| -> Result<(String, String)> {
            match p {
                Some(p) => Ok((
                    std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
                    p.display().to_string(),
                )),
                None => Ok((builtin.to_string(), "<builtin>".to_string())),
            }
        };
        let (bridge_text, bridge_name) = read(&self.files.bridge, BUILTIN_BRIDGE)?;
        let (coeff_text, coeff_name) = read(&self.files.coefficients, BUILTIN_COEFFICIENTS)?;
        let (cat_text, cat_name) = read(&self.files.vehicle_catalog, BUILTIN_CATALOG)?;
        let bridge = parse_bridge(&bridge_text, &bridge_name)?;
        let coefficients = AeroCoefficients::parse_csv(&coeff_text, &coeff_name)?;
        let catalog = Catalog::parse(&cat_text, &cat_name)?;

        let length = bridge.total_length();
        let stations = if self.simulation.stations.is_empty() {
            let n = self.simulation.station_count;
            (0..n).map(|i| length * i as f64 / (n - 1) as f64).collect()
        } else {
            self.simulation.stations.clone()
        };
        if let Some(x) = stations.iter().find(|&&x| !(0.0..=length).contains(&x)) {
            return Err(Error::Config(vec![format!(
                "simulation.stations: {x} outside the deck [0, {length}]"
            )]));
        }
        for lane in &self.traffic.lanes {
            if lane.offset.abs() > 0.5 * bridge.section.width {
                return Err(Error::Config(vec![format!(
                    "traffic.lanes: offset {} outside the deck width {}",
                    lane.offset, bridge.section.width
                )]));
            }
        }

        // The hash covers the effective configuration with file names
        // replaced by file contents, so moving inputs keeps the hash.
        let mut hashed = self.clone();
        hashed.files = FilesSection::default();
        let mut h = Sha256::new();
        for part in [hashed.to_toml().as_str(), &bridge_text, &coeff_text, &cat_text] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        let hash = hex::encode(h.finalize());
        Ok(Resolved {
            config: self,
            bridge,
            coefficients,
            catalog,
            stations,
            hash,
        })
    }
}

/// A validated configuration with its inputs loaded.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: SimulationConfig,
    pub bridge: ModalBridge,
    pub coefficients: AeroCoefficients,
    pub catalog: Catalog,
    pub stations: Vec<f64>,
    /// SHA-256 of the effective configuration and input file contents.
    pub hash: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_valid_case_three() {
        let cfg = SimulationConfig::parse("", "mem").unwrap();
        assert!(cfg.violations().is_empty(), "{:?}", cfg.violations());
        assert_eq!(cfg.mean_speed(), 22.5);
        assert_eq!(cfg.speed_limit_kmh(), 70.0);
    }

    #[test]
    fn case_band_mismatch_is_reported() {
        let cfg = SimulationConfig::parse("[simulation]\ncase = 1\n[wind]\nmean_speed = 22.0\n", "mem").unwrap();
        let v = cfg.violations();
        assert!(v.iter().any(|m| m.contains("case/wind-band mismatch")), "{v:?}");
    }

    #[test]
    fn composition_sum_is_reported() {
        let text = "[traffic.composition]\ncar = 0.7\nvan = 0.12\nbus = 0.02\ntruck2 = 0.06\ntruck3 = 0.07\n";
        let v = SimulationConfig::parse(text, "mem").unwrap().violations();
        assert!(v.iter().any(|m| m.contains("composition")), "{v:?}");
    }

    #[test]
    fn unknown_key_names_the_line() {
        let err = SimulationConfig::parse("[simulation]\ndt = 0.02\nbogus = 1\n", "case.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("case.toml:3:"), "{msg}");
    }

    #[test]
    fn effective_dump_round_trips() {
        let cfg = SimulationConfig::default();
        let back = SimulationConfig::parse(&cfg.to_toml(), "dump").unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn builtin_inputs_resolve_and_hash_is_stable() {
        let a = SimulationConfig::default().resolve().unwrap();
        let b = SimulationConfig::default().resolve().unwrap();
        assert_eq!(a.hash, b.hash);
        assert_eq!(a.stations.len(), 41);
        assert_eq!(a.bridge, crate::bridge::synthetic::greatbelt_like());
        let mut c = SimulationConfig::default();
        c.simulation.master_seed += 1;
        assert_ne!(c.resolve().unwrap().hash, a.hash);
    }

    #[test]
    fn missing_file_is_a_violation() {
        let mut cfg = SimulationConfig::default();
        cfg.files.bridge = Some("/nonexistent/x.bridge".into());
        assert!(cfg.violations().iter().any(|m| m.starts_with("files.bridge")));
    }

    #[test]
    fn builtin_section_is_torsionally_stable_over_all_bands() {
        // Quasi-steady moment through the pitch-rate term of the effective
        // angle: M = 1/2 rho U B^3 C_M' m_M alpha_dot, i.e. an aerodynamic
        // damping ratio -rho U B^3 C_M' m_M / (4 I omega) on every torsional mode.
        let res = SimulationConfig::default().resolve().unwrap();
        let aero = res.config.aero;
        let h = 1e-3;
        let slope = (res.coefficients.at(h).cm - res.coefficients.at(-h).cm) / (2.0 * h);
        let inertia = res.bridge.section.torsional_inertia_per_length;
        let u = WindCase::Three.band().1;
        for m in res.bridge.modes().iter().filter(|m| m.kind == crate::bridge::ModeKind::Torsional) {
            let aero_zeta = -aero.density * u * aero.width.powi(3) * slope * aero.aero_centre[2] / (4.0 * inertia * m.omega());
            assert!(m.damping_ratio + aero_zeta > 0.0, "mode {}: {} + {aero_zeta}", m.index, m.damping_ratio);
        }
    }
}
