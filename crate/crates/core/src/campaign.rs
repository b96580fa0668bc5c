//! Realisation batches: input generation per seed set, concurrent runs,
//! history files and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Resolved;
use crate::error::{Error, Result};
use crate::fields::{RoughnessSurface, WindField};
use crate::history::ResponseHistory;
use crate::seeds::RealisationSeeds;
use crate::solver::{Diagnostics, Inputs, Scenario, Simulation, TrafficInput, WindCase, WindInput};
use crate::traffic::TrafficStream;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const CONFIG_FILE: &str = "effective_config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Job {
    pub scenario: Scenario,
    pub realisation: usize,
}

impl Job {
    pub fn file_name(&self, case: WindCase) -> String {
        format!(
            "history_{}_case{}_r{:02}.csv",
            self.scenario.label(),
            case.number(),
            self.realisation
        )
    }
}

/// Scenario-major job list for a configuration.
pub fn jobs(res: &Resolved) -> Vec<Job> {
    let s = &res.config.simulation;
    s.scenarios
        .iter()
        .flat_map(|&scenario| (0..s.realisations).map(move |realisation| Job { scenario, realisation }))
        .collect()
}

/// Random inputs of one realisation.
pub struct RealisationInputs {
    pub seeds: RealisationSeeds,
    pub wind: Option<WindField>,
    pub traffic: Option<(TrafficStream, RoughnessSurface)>,
}

impl RealisationInputs {
    /// Generates the inputs `scenario` needs. Every scenario of one
    /// realisation draws from the same seeds, so W, T and WT see the same
    /// wind and the same traffic.
    pub fn generate(res: &Resolved, scenario: Scenario, realisation: usize) -> Result<Self> {
        let cfg = &res.config;
        let seeds = RealisationSeeds::derive(cfg.simulation.master_seed, realisation);
        let t_end = cfg.solver_options(Vec::new()).t_end();
        let bridge = &res.bridge;
        let wind = if scenario.has_wind() {
            let wdt = cfg.wind.dt;
            let duration = ((t_end / wdt).ceil() + 1.0) * wdt;
            Some(WindField::generate(&cfg.turbulence(), bridge.nodes(), wdt, duration, seeds.wind)?)
        } else {
            None
        };
        let traffic = if scenario.has_traffic() {
            let length = bridge.total_length();
            let stream = TrafficStream::generate(
                &cfg.traffic,
                &res.catalog,
                cfg.speed_limit_kmh(),
                length,
                t_end + cfg.traffic.dt,
                seeds.traffic,
                seeds.params,
            )?;
            let r = &cfg.roughness;
            let offsets: Vec<f64> = cfg.traffic.lanes.iter().map(|l| l.offset).collect();
            let surface = if r.enabled {
                RoughnessSurface::generate(
                    &r.spec(),
                    -r.approach,
                    length + 2.0 * r.approach,
                    r.dx,
                    &offsets,
                    r.track_gap,
                    seeds.roughness,
                )?
            } else {
                RoughnessSurface::flat(-r.approach, length + 2.0 * r.approach, &offsets, r.track_gap)
            };
            Some((stream, surface))
        } else {
            None
        };
        Ok(Self { seeds, wind, traffic })
    }
}

/// Runs one scenario of one realisation.
pub fn run_realisation(res: &Resolved, job: Job) -> Result<(ResponseHistory, Diagnostics)> {
    let cfg = &res.config;
    let inputs = RealisationInputs::generate(res, job.scenario, job.realisation)?;
    let sim_inputs = Inputs {
        bridge: &res.bridge,
        wind: inputs.wind.as_ref().map(|field| WindInput {
            field,
            coefficients: &res.coefficients,
            aero: cfg.aero,
        }),
        traffic: inputs.traffic.as_ref().map(|(stream, roughness)| TrafficInput {
            stream,
            roughness,
            unilateral: cfg.simulation.unilateral_contact,
        }),
    };
    let sim = Simulation::new(sim_inputs, cfg.solver_options(res.stations.clone()))?;
    let (mut history, diag) = sim.run()?;
    let s = inputs.seeds;
    let meta = [
        ("scenario", job.scenario.label().to_string()),
        ("case", cfg.simulation.case.number().to_string()),
        ("realisation", job.realisation.to_string()),
        ("config_hash", res.hash.clone()),
        ("mean_wind_speed", cfg.mean_speed().to_string()),
        ("speed_limit_kmh", cfg.speed_limit_kmh().to_string()),
        ("seed_wind", s.wind.to_string()),
        ("seed_roughness", s.roughness.to_string()),
        ("seed_traffic", s.traffic.to_string()),
        ("seed_params", s.params.to_string()),
        ("max_iterations_used", diag.max_iterations_used.to_string()),
        ("aero_clamp_events", diag.aero_clamp_events.to_string()),
        ("tyre_separations", diag.separations.to_string()),
        ("vehicles", diag.vehicles_activated.to_string()),
    ];
    for (k, v) in meta {
        history.meta.insert(k.into(), v);
    }
    Ok((history, diag))
}

/// Outcome of one job.
pub struct JobResult {
    pub job: Job,
    pub result: Result<(ResponseHistory, Diagnostics)>,
    pub seconds: f64,
}

/// Runs `jobs` on a pool of `threads` workers (0 = available parallelism).
/// Results come back in job order whatever the scheduling.
pub fn run_jobs(res: &Resolved, jobs: &[Job], threads: usize) -> Result<Vec<JobResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|&job| {
                let start = Instant::now();
                let result = run_realisation(res, job);
                JobResult {
                    job,
                    result,
                    seconds: start.elapsed().as_secs_f64(),
                }
            })
            .collect()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scenario: Scenario,
    pub realisation: usize,
    pub seeds: RealisationSeeds,
    /// Relative to the manifest directory.
    pub path: PathBuf,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub master_seed: u64,
    pub case: WindCase,
    pub mean_wind_speed: f64,
    pub speed_limit_kmh: f64,
    pub scenarios: Vec<Scenario>,
    pub realisations: usize,
    pub stations: Vec<f64>,
    pub config_file: PathBuf,
    pub timings_file: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Entries of one scenario in realisation order.
    pub fn scenario(&self, s: Scenario) -> Vec<&ManifestEntry> {
        let mut v: Vec<_> = self.entries.iter().filter(|e| e.scenario == s).collect();
        v.sort_by_key(|e| e.realisation);
        v
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub scenario: Scenario,
    pub realisation: usize,
    pub seconds: f64,
}

/// Runs the configured scenario x realisation matrix into `out_dir`.
///
/// Histories go to one CSV per job; the manifest is written last and only
/// lists jobs that succeeded. Wall-clock times are kept in a separate file
/// so the manifest itself is reproducible byte for byte.
pub fn run_campaign(res: &Resolved, out_dir: &Path, threads: usize) -> Result<RunManifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let cfg_path = out_dir.join(CONFIG_FILE);
    let mut effective = format!("# config_hash = {}\n", res.hash);
    effective.push_str(&res.config.to_toml());
    std::fs::write(&cfg_path, effective).map_err(|e| Error::io(&cfg_path, e))?;

    let case = res.config.simulation.case;
    let jobs = jobs(res);
    let results = run_jobs(res, &jobs, threads)?;
    let mut entries = Vec::new();
    let mut timings = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        timings.push(Timing {
            scenario: r.job.scenario,
            realisation: r.job.realisation,
            seconds: r.seconds,
        });
        match r.result {
            Ok((history, _)) => {
                let name = r.job.file_name(case);
                let path = out_dir.join(&name);
                std::fs::write(&path, history.to_csv_bytes()).map_err(|e| Error::io(&path, e))?;
                entries.push(ManifestEntry {
                    scenario: r.job.scenario,
                    realisation: r.job.realisation,
                    seeds: RealisationSeeds::derive(res.config.simulation.master_seed, r.job.realisation),
                    path: name.into(),
                    samples: history.samples(),
                });
            }
            Err(e) => failures.push(format!(
                "{} realisation {}: {e}",
                r.job.scenario.label(),
                r.job.realisation
            )),
        }
    }
    let timings_path = out_dir.join(TIMINGS_FILE);
    std::fs::write(
        &timings_path,
        serde_json::to_string_pretty(&timings).expect("timings serialise") + "\n",
    )
    .map_err(|e| Error::io(&timings_path, e))?;
    let cfg = &res.config;
    let manifest = RunManifest {
        config_hash: res.hash.clone(),
        master_seed: cfg.simulation.master_seed,
        case,
        mean_wind_speed: cfg.mean_speed(),
        speed_limit_kmh: cfg.speed_limit_kmh(),
        scenarios: cfg.simulation.scenarios.clone(),
        realisations: cfg.simulation.realisations,
        stations: res.stations.clone(),
        config_file: CONFIG_FILE.into(),
        timings_file: TIMINGS_FILE.into(),
        entries,
    };
    manifest.write(out_dir.join(MANIFEST_FILE))?;
    if failures.is_empty() {
        Ok(manifest)
    } else {
        Err(Error::Invariant(format!(
            "{} of {} realisations failed: {}",
            failures.len(),
            jobs.len(),
            failures.join("; ")
        )))
    }
}
