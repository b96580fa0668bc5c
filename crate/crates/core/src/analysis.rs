//! Post-processing: envelopes, spectra, scenario and case comparisons,
//! and the report files written by `analyze`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::bridge::Dof;
use crate::campaign::{RunManifest, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::history::ResponseHistory;
use crate::plot::{LineChart, Series};
use crate::solver::{Scenario, WindCase};

/// Pointwise min/max of `h` and `alpha` over time and realisations.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub stations: Vec<f64>,
    pub min_h: Vec<f64>,
    pub max_h: Vec<f64>,
    pub min_alpha: Vec<f64>,
    pub max_alpha: Vec<f64>,
    pub realisations: usize,
}

impl Envelope {
    pub fn empty(stations: &[f64]) -> Self {
        let n = stations.len();
        Self {
            stations: stations.to_vec(),
            min_h: vec![f64::INFINITY; n],
            max_h: vec![f64::NEG_INFINITY; n],
            min_alpha: vec![f64::INFINITY; n],
            max_alpha: vec![f64::NEG_INFINITY; n],
            realisations: 0,
        }
    }

    pub fn add(&mut self, h: &ResponseHistory) -> Result<()> {
        if h.stations != self.stations {
            return Err(Error::GridMismatch("envelope station sets differ".into()));
        }
        for k in 0..h.samples() {
            for s in 0..self.stations.len() {
                let v = h.value(k, s, Dof::H);
                self.min_h[s] = self.min_h[s].min(v);
                self.max_h[s] = self.max_h[s].max(v);
                let a = h.value(k, s, Dof::Alpha);
                self.min_alpha[s] = self.min_alpha[s].min(a);
                self.max_alpha[s] = self.max_alpha[s].max(a);
            }
        }
        self.realisations += 1;
        Ok(())
    }

    pub fn bounds(&self, dof: Dof) -> (&[f64], &[f64]) {
        match dof {
            Dof::H => (&self.min_h, &self.max_h),
            Dof::Alpha => (&self.min_alpha, &self.max_alpha),
            Dof::P => panic!("envelopes track h and alpha only"),
        }
    }

    /// Signed extreme at `station`: whichever bound has the larger magnitude.
    pub fn extreme(&self, station: usize, dof: Dof) -> f64 {
        let (lo, hi) = self.bounds(dof);
        if lo[station].abs() >= hi[station].abs() {
            lo[station]
        } else {
            hi[station]
        }
    }

    /// `max(|min|, |max|)` per station.
    pub fn magnitude(&self, dof: Dof) -> Vec<f64> {
        let (lo, hi) = self.bounds(dof);
        lo.iter().zip(hi).map(|(a, b)| a.abs().max(b.abs())).collect()
    }

    pub fn nearest_station(&self, x: f64) -> usize {
        (0..self.stations.len())
            .min_by(|&a, &b| (self.stations[a] - x).abs().total_cmp(&(self.stations[b] - x).abs()))
            .unwrap_or(0)
    }

    /// Fraction of the station range where the magnitude is at least
    /// `level` times its peak, with linear interpolation between stations.
    pub fn width_metric(&self, dof: Dof, level: f64) -> f64 {
        let m = self.magnitude(dof);
        let peak = m.iter().cloned().fold(0.0, f64::max);
        let x = &self.stations;
        let range = x[x.len() - 1] - x[0];
        if !(peak > 0.0) || !(range > 0.0) {
            return 0.0;
        }
        let thr = level * peak;
        let mut covered = 0.0;
        for i in 0..x.len() - 1 {
            let (a, b) = (m[i] - thr, m[i + 1] - thr);
            let dx = x[i + 1] - x[i];
            covered += if a >= 0.0 && b >= 0.0 {
                dx
            } else if a < 0.0 && b < 0.0 {
                0.0
            } else {
                // One end above: the part on its side of the crossing.
                dx * a.max(b) / (a - b).abs()
            };
        }
        covered / range
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W, title: &str) -> std::io::Result<()> {
        writeln!(out, "# {title}")?;
        writeln!(
            out,
            "# x: station [m]; min_h, max_h: vertical displacement bounds (up positive) [m]; min_alpha, max_alpha: torsion bounds (nose-up positive) [rad]"
        )?;
        writeln!(out, "# realisations={}", self.realisations)?;
        writeln!(out, "x,min_h,max_h,min_alpha,max_alpha")?;
        for i in 0..self.stations.len() {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e}",
                self.stations[i], self.min_h[i], self.max_h[i], self.min_alpha[i], self.max_alpha[i]
            )?;
        }
        Ok(())
    }
}

/// Min/max envelope of `histories`.
pub fn envelope(histories: &[&ResponseHistory]) -> Result<Envelope> {
    let first = histories
        .first()
        .ok_or_else(|| Error::Analysis("envelope of no histories".into()))?;
    let mut env = Envelope::empty(&first.stations);
    for h in histories {
        env.add(h)?;
    }
    Ok(env)
}

/// Envelope of the `q` and `1 - q` quantiles of all pooled samples per
/// station, a robust alternative to the min/max envelope.
pub fn percentile_envelope(histories: &[&ResponseHistory], q: f64) -> Result<Envelope> {
    if !(0.5..=1.0).contains(&q) {
        return Err(Error::Analysis(format!("percentile {q} outside [0.5, 1]")));
    }
    let first = histories
        .first()
        .ok_or_else(|| Error::Analysis("envelope of no histories".into()))?;
    let mut env = Envelope::empty(&first.stations);
    let quantile = |v: &mut Vec<f64>, p: f64| {
        v.sort_by(f64::total_cmp);
        let pos = p * (v.len() - 1) as f64;
        let i = pos.floor() as usize;
        let w = pos - i as f64;
        if i + 1 < v.len() {
            v[i] + w * (v[i + 1] - v[i])
        } else {
            v[i]
        }
    };
    for s in 0..env.stations.len() {
        for dof in [Dof::H, Dof::Alpha] {
            let mut v = Vec::new();
            for h in histories {
                h.check_aligned_stations(first)?;
                v.extend((0..h.samples()).map(|k| h.value(k, s, dof)));
            }
            if v.is_empty() {
                return Err(Error::Analysis("histories have no samples".into()));
            }
            let (lo, hi) = (quantile(&mut v, 1.0 - q), quantile(&mut v, q));
            match dof {
                Dof::H => (env.min_h[s], env.max_h[s]) = (lo, hi),
                _ => (env.min_alpha[s], env.max_alpha[s]) = (lo, hi),
            }
        }
    }
    env.realisations = histories.len();
    Ok(env)
}

impl ResponseHistory {
    fn check_aligned_stations(&self, other: &Self) -> Result<()> {
        if self.stations != other.stations {
            return Err(Error::GridMismatch("station sets differ".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    pub frequency: Vec<f64>,
    pub psd: Vec<f64>,
    pub segment_length: usize,
    pub segments: usize,
    pub df: f64,
    /// Variance of the mean-removed input.
    pub variance: f64,
}

impl SpectrumEstimate {
    /// `sum PSD df / variance`; 1 for an exact Parseval balance.
    pub fn parseval_ratio(&self) -> f64 {
        let total: f64 = self.psd.iter().sum::<f64>() * self.df;
        total / self.variance
    }

    /// Frequency of the largest PSD value at `f >= f_min`.
    pub fn peak_frequency(&self, f_min: f64) -> f64 {
        let mut best = (f64::NAN, f64::NEG_INFINITY);
        for (f, p) in self.frequency.iter().zip(&self.psd) {
            if *f >= f_min && *p > best.1 {
                best = (*f, *p);
            }
        }
        best.0
    }

    /// Bin index nearest to `f`.
    pub fn bin(&self, f: f64) -> usize {
        ((f / self.df).round() as usize).min(self.frequency.len() - 1)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W, title: &str, unit: &str) -> std::io::Result<()> {
        writeln!(out, "# {title}")?;
        writeln!(
            out,
            "# f: frequency [Hz]; psd: one-sided power spectral density [{unit}^2/Hz]; Welch, Hann window, 50% overlap, {} segments of {} samples",
            self.segments, self.segment_length
        )?;
        writeln!(out, "f,psd")?;
        for (f, p) in self.frequency.iter().zip(&self.psd) {
            writeln!(out, "{f:e},{p:e}")?;
        }
        Ok(())
    }
}

/// Segment layout shared by the auto- and cross-spectral estimators.
fn segments(n: usize, segment: usize) -> Result<Vec<usize>> {
    if segment < 4 || n < 2 * segment - segment / 2 {
        return Err(Error::Analysis(format!(
            "signal of {n} samples is too short for two {segment}-sample segments"
        )));
    }
    let step = segment / 2;
    Ok((0..=(n - segment) / step).map(|i| i * step).collect())
}

fn hann(segment: usize) -> Vec<f64> {
    // Periodic Hann, the usual choice for spectral estimation.
    (0..segment)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / segment as f64).cos())
        .collect()
}

/// Windowed, mean-removed segment spectra of `x`.
fn segment_spectra(x: &[f64], segment: usize, planner: &mut FftPlanner<f64>) -> Result<Vec<Vec<Complex64>>> {
    let starts = segments(x.len(), segment)?;
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let w = hann(segment);
    let fft = planner.plan_fft_forward(segment);
    Ok(starts
        .iter()
        .map(|&s| {
            let mut buf: Vec<Complex64> = (0..segment)
                .map(|i| Complex64::new((x[s + i] - mean) * w[i], 0.0))
                .collect();
            fft.process(&mut buf);
            buf.truncate(segment / 2 + 1);
            buf
        })
        .collect())
}

fn one_sided_scale(segment: usize, dt: f64) -> (Vec<f64>, f64) {
    let w = hann(segment);
    let u: f64 = w.iter().map(|v| v * v).sum();
    let base = dt / u;
    let half = segment / 2;
    let scale = (0..=half)
        .map(|k| if k == 0 || (segment % 2 == 0 && k == half) { base } else { 2.0 * base })
        .collect();
    (scale, 1.0 / (segment as f64 * dt))
}

/// Welch estimate of the one-sided PSD: mean removed, Hann window, 50 %
/// overlap, `segment` samples per segment.
pub fn welch_psd(x: &[f64], dt: f64, segment: usize) -> Result<SpectrumEstimate> {
    let mut planner = FftPlanner::new();
    let spectra = segment_spectra(x, segment, &mut planner)?;
    let (scale, df) = one_sided_scale(segment, dt);
    let m = spectra.len() as f64;
    let psd: Vec<f64> = (0..scale.len())
        .map(|k| scale[k] * spectra.iter().map(|s| s[k].norm_sqr()).sum::<f64>() / m)
        .collect();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let variance = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64;
    Ok(SpectrumEstimate {
        frequency: (0..scale.len()).map(|k| k as f64 * df).collect(),
        psd,
        segment_length: segment,
        segments: spectra.len(),
        df,
        variance,
    })
}

/// Default Welch segment: an eighth of the record, rounded down to even.
pub fn default_segment(samples: usize) -> usize {
    (samples / 8) & !1
}

/// Averaged auto- and cross-spectra of signal pairs, for coherence
/// estimates pooled over realisations.
#[derive(Debug, Clone)]
pub struct CrossSpectrum {
    pub segment_length: usize,
    pub df: f64,
    sxx: Vec<f64>,
    syy: Vec<f64>,
    sxy: Vec<Complex64>,
    count: usize,
    planner_len: usize,
}

impl CrossSpectrum {
    pub fn new(segment: usize, dt: f64) -> Self {
        let n = segment / 2 + 1;
        Self {
            segment_length: segment,
            df: 1.0 / (segment as f64 * dt),
            sxx: vec![0.0; n],
            syy: vec![0.0; n],
            sxy: vec![Complex64::new(0.0, 0.0); n],
            count: 0,
            planner_len: segment,
        }
    }

    pub fn add(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != y.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                got: y.len(),
            });
        }
        let mut planner = FftPlanner::new();
        let a = segment_spectra(x, self.planner_len, &mut planner)?;
        let b = segment_spectra(y, self.planner_len, &mut planner)?;
        for (sa, sb) in a.iter().zip(&b) {
            for k in 0..self.sxx.len() {
                self.sxx[k] += sa[k].norm_sqr();
                self.syy[k] += sb[k].norm_sqr();
                self.sxy[k] += sa[k] * sb[k].conj();
            }
            self.count += 1;
        }
        Ok(())
    }

    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * self.df
    }

    pub fn bins(&self) -> usize {
        self.sxx.len()
    }

    /// Magnitude-squared coherence at bin `k`.
    pub fn msc(&self, k: usize) -> f64 {
        self.sxy[k].norm_sqr() / (self.sxx[k] * self.syy[k])
    }

    /// Root coherence `|S_xy| / sqrt(S_xx S_yy)` at bin `k`.
    pub fn root_coherence(&self, k: usize) -> f64 {
        self.msc(k).sqrt()
    }

    /// Real part of the normalised cross-spectrum (co-coherence) at bin `k`.
    pub fn co_coherence(&self, k: usize) -> f64 {
        self.sxy[k].re / (self.sxx[k] * self.syy[k]).sqrt()
    }

    pub fn segments(&self) -> usize {
        self.count
    }
}

/// Per-station differences and summary of WT against W+T.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioComparison {
    pub case: Option<WindCase>,
    pub stations: Vec<f64>,
    /// Signed envelope extremes per scenario: W, T, W+T, WT.
    pub extreme_h: [Vec<f64>; 4],
    pub extreme_alpha: [Vec<f64>; 4],
    /// `|WT| - |W+T|` of the envelope magnitude per station.
    pub diff_h: Vec<f64>,
    pub diff_alpha: Vec<f64>,
    pub midspan: usize,
    /// Largest `|WT - (W+T)|` over all four envelope bounds.
    pub max_abs_difference: f64,
    /// Stations where `|WT| < |W+T|` (vertical).
    pub stations_wt_below: usize,
}

pub const SCENARIO_LABELS: [&str; 4] = ["W", "T", "W+T", "WT"];

pub fn compare_scenarios(
    w: &Envelope,
    t: &Envelope,
    w_plus_t: &Envelope,
    wt: &Envelope,
    midspan_x: f64,
    case: Option<WindCase>,
) -> Result<ScenarioComparison> {
    let envs = [w, t, w_plus_t, wt];
    if envs.iter().any(|e| e.stations != w.stations) {
        return Err(Error::GridMismatch("scenario envelopes have different stations".into()));
    }
    let n = w.stations.len();
    let ext = |dof| envs.map(|e| (0..n).map(|s| e.extreme(s, dof)).collect::<Vec<_>>());
    let extreme_h = ext(Dof::H);
    let extreme_alpha = ext(Dof::Alpha);
    let mag = |e: &Envelope, dof| e.magnitude(dof);
    let diff = |dof| {
        mag(wt, dof)
            .iter()
            .zip(mag(w_plus_t, dof))
            .map(|(a, b)| a - b)
            .collect::<Vec<f64>>()
    };
    let diff_h = diff(Dof::H);
    let diff_alpha = diff(Dof::Alpha);
    let mut max_abs_difference: f64 = 0.0;
    for (a, b) in [
        (&wt.min_h, &w_plus_t.min_h),
        (&wt.max_h, &w_plus_t.max_h),
        (&wt.min_alpha, &w_plus_t.min_alpha),
        (&wt.max_alpha, &w_plus_t.max_alpha),
    ] {
        for (x, y) in a.iter().zip(b) {
            max_abs_difference = max_abs_difference.max((x - y).abs());
        }
    }
    Ok(ScenarioComparison {
        case,
        stations: w.stations.clone(),
        stations_wt_below: diff_h.iter().filter(|d| **d < 0.0).count(),
        extreme_h,
        extreme_alpha,
        diff_h,
        diff_alpha,
        midspan: w.nearest_station(midspan_x),
        max_abs_difference,
    })
}

impl ScenarioComparison {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let case = self.case.map_or("?".into(), |c| c.number().to_string());
        writeln!(out, "# scenario comparison, case {case}: envelope extremes (signed bound of larger magnitude)")?;
        writeln!(
            out,
            "# x [m]; h_* vertical extremes [m]; alpha_* torsion extremes [rad]; W+T is the superposition of the W and T histories of each realisation; dh, dalpha = |WT| - |W+T|"
        )?;
        writeln!(
            out,
            "# midspan x={:e}; max|WT-(W+T)|={:e}; stations with |WT|<|W+T| (h): {} of {}",
            self.stations[self.midspan],
            self.max_abs_difference,
            self.stations_wt_below,
            self.stations.len()
        )?;
        let mut header = vec!["x".to_string()];
        for l in SCENARIO_LABELS {
            header.push(format!("h_{l}"));
        }
        for l in SCENARIO_LABELS {
            header.push(format!("alpha_{l}"));
        }
        header.push("dh".into());
        header.push("dalpha".into());
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.stations.len() {
            let mut row = vec![self.stations[i]];
            row.extend(self.extreme_h.iter().map(|v| v[i]));
            row.extend(self.extreme_alpha.iter().map(|v| v[i]));
            row.push(self.diff_h[i]);
            row.push(self.diff_alpha[i]);
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn chart(&self, envs: [&Envelope; 4]) -> LineChart {
        let case = self.case.map_or("?".into(), |c| c.number().to_string());
        let mut c = LineChart::new(
            format!("Vertical displacement envelopes, case {case}"),
            "x [m]",
            "h [m]",
        );
        for (label, e) in SCENARIO_LABELS.iter().zip(envs) {
            c.series.push(Series::new(format!("{label} max"), e.stations.clone(), e.max_h.clone()));
            c.series
                .push(Series::new(format!("{label} min"), e.stations.clone(), e.min_h.clone()).dashed());
        }
        c
    }
}

/// Per-case summary of WT envelopes.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRow {
    pub case: WindCase,
    pub realisations: usize,
    pub midspan_extreme_h: f64,
    pub midspan_extreme_alpha: f64,
    /// Span fraction where the vertical envelope magnitude is within 90 % of its peak.
    pub width_h: f64,
}

pub const WIDTH_LEVEL: f64 = 0.9;

pub fn case_study(envelopes: &BTreeMap<WindCase, Envelope>, midspan_x: f64) -> Result<Vec<CaseRow>> {
    if envelopes.is_empty() {
        return Err(Error::Analysis("case study needs at least one case".into()));
    }
    let counts: Vec<usize> = envelopes.values().map(|e| e.realisations).collect();
    if counts.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Analysis(format!("cases have unequal realisation counts {counts:?}")));
    }
    Ok(envelopes
        .iter()
        .map(|(&case, e)| {
            let m = e.nearest_station(midspan_x);
            CaseRow {
                case,
                realisations: e.realisations,
                midspan_extreme_h: e.extreme(m, Dof::H),
                midspan_extreme_alpha: e.extreme(m, Dof::Alpha),
                width_h: e.width_metric(Dof::H, WIDTH_LEVEL),
            }
        })
        .collect())
}

pub fn write_case_study<W: std::io::Write>(rows: &[CaseRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "# WT envelopes per wind case")?;
    writeln!(
        out,
        "# midspan_h [m] and midspan_alpha [rad]: signed midspan envelope extremes; width_h: span fraction with vertical envelope magnitude >= 90% of its peak"
    )?;
    writeln!(out, "case,realisations,midspan_h,midspan_alpha,width_h")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:e},{:e},{:e}",
            r.case.number(),
            r.realisations,
            r.midspan_extreme_h,
            r.midspan_extreme_alpha,
            r.width_h
        )?;
    }
    Ok(())
}

/// A manifest with its histories loaded.
pub struct LoadedRun {
    pub manifest: RunManifest,
    pub dir: PathBuf,
    pub histories: BTreeMap<Scenario, Vec<ResponseHistory>>,
}

/// Resolves a manifest argument that may name the file or its directory.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

/// Loads a manifest and all its histories; every missing file is listed
/// before failing.
pub fn load_run(path: &Path) -> Result<LoadedRun> {
    let path = manifest_path(path);
    let manifest = RunManifest::load(&path)?;
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    if manifest.entries.is_empty() {
        return Err(Error::Analysis(format!("{}: nothing to analyze (no histories)", path.display())));
    }
    let missing: Vec<String> = manifest
        .entries
        .iter()
        .map(|e| dir.join(&e.path))
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Analysis(format!(
            "{} missing history file(s): {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    let mut histories: BTreeMap<Scenario, Vec<ResponseHistory>> = BTreeMap::new();
    for &s in &manifest.scenarios {
        for e in manifest.scenario(s) {
            histories
                .entry(s)
                .or_default()
                .push(ResponseHistory::load(dir.join(&e.path))?);
        }
    }
    Ok(LoadedRun {
        manifest,
        dir,
        histories,
    })
}

/// Midspan of the loaded stations (the middle of the station range).
fn midspan_of(stations: &[f64]) -> f64 {
    0.5 * (stations[0] + stations[stations.len() - 1])
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

/// Writes envelopes, PSDs, the scenario comparison and (for several runs)
/// the case study into `out_dir`. Returns the written file names.
pub fn analyze(runs: &[LoadedRun], out_dir: &Path, midspan_x: Option<f64>) -> Result<Vec<String>> {
    if runs.is_empty() {
        return Err(Error::Analysis("nothing to analyze".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> Result<()> {
        write_file(&out_dir.join(&name), bytes)?;
        written.push(name);
        Ok(())
    };
    let mut case_envs = BTreeMap::new();
    for run in runs {
        let case = run.manifest.case;
        let stations = &run.manifest.stations;
        let mid_x = midspan_x.unwrap_or_else(|| midspan_of(stations));
        let mut envs: BTreeMap<&str, Envelope> = BTreeMap::new();
        for (s, hs) in &run.histories {
            let refs: Vec<&ResponseHistory> = hs.iter().collect();
            envs.insert(s.label(), envelope(&refs)?);
        }
        if let (Some(w), Some(t)) = (run.histories.get(&Scenario::W), run.histories.get(&Scenario::T)) {
            let sums = w
                .iter()
                .zip(t)
                .map(|(a, b)| a.superpose(b))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&ResponseHistory> = sums.iter().collect();
            envs.insert("W+T", envelope(&refs)?);
        }
        for (label, e) in &envs {
            let tag = label.replace('+', "plus");
            let title = format!("envelope, scenario {label}, case {}", case.number());
            put(
                format!("envelope_{tag}_{}.csv", case.number()),
                csv_bytes(|b| e.write_csv(b, &title)),
            )?;
            let chart = LineChart::new(&title, "x [m]", "h [m]")
                .with(Series::new("max h", e.stations.clone(), e.max_h.clone()))
                .with(Series::new("min h", e.stations.clone(), e.min_h.clone()).dashed());
            put(format!("envelope_{tag}_{}.svg", case.number()), chart.to_svg().into_bytes())?;
        }
        // PSD at midspan for each scenario, first realisation and ensemble mean.
        let m = run
            .histories
            .values()
            .next()
            .map(|h| h[0].nearest_station(mid_x))
            .unwrap_or(0);
        for (s, hs) in &run.histories {
            for (dof, name, unit) in [(Dof::H, "h", "m"), (Dof::Alpha, "alpha", "rad")] {
                let spec = ensemble_psd(hs, m, dof)?;
                let x = stations[m];
                let file = format!("psd_{}_{}_{name}_x{}.csv", s.label(), case.number(), x.round());
                let title = format!(
                    "midspan {name} PSD, scenario {}, case {}, x = {x} m, {} realisation(s)",
                    s.label(),
                    case.number(),
                    hs.len()
                );
                put(file.clone(), csv_bytes(|b| spec.write_csv(b, &title, unit)))?;
                let mut chart = LineChart::new(&title, "f [Hz]", format!("S [{unit}^2/Hz]"))
                    .with(Series::new(name, spec.frequency.clone(), spec.psd.clone()));
                chart.log_x = true;
                chart.log_y = true;
                put(file.replace(".csv", ".svg"), chart.to_svg().into_bytes())?;
            }
        }
        if let (Some(w), Some(t), Some(wpt), Some(wt)) =
            (envs.get("W"), envs.get("T"), envs.get("W+T"), envs.get("WT"))
        {
            let cmp = compare_scenarios(w, t, wpt, wt, mid_x, Some(case))?;
            put(format!("compare_{}.csv", case.number()), csv_bytes(|b| cmp.write_csv(b)))?;
            put(
                format!("compare_{}.svg", case.number()),
                cmp.chart([w, t, wpt, wt]).to_svg().into_bytes(),
            )?;
        }
        if let Some(wt) = envs.remove("WT") {
            if case_envs.insert(case, wt).is_some() {
                return Err(Error::Analysis(format!("case {} given twice", case.number())));
            }
        }
    }
    if case_envs.len() > 1 {
        let stations = &runs[0].manifest.stations;
        let mid_x = midspan_x.unwrap_or_else(|| midspan_of(stations));
        let rows = case_study(&case_envs, mid_x)?;
        put("case_study.csv".into(), csv_bytes(|b| write_case_study(&rows, b)))?;
        let mut chart = LineChart::new("WT envelopes per wind case", "x [m]", "h [m]");
        for (case, e) in &case_envs {
            chart
                .series
                .push(Series::new(format!("case {} max", case.number()), e.stations.clone(), e.max_h.clone()));
            chart.series.push(
                Series::new(format!("case {} min", case.number()), e.stations.clone(), e.min_h.clone()).dashed(),
            );
        }
        put("case_study.svg".into(), chart.to_svg().into_bytes())?;
    }
    let mut index = String::new();
    for w in &written {
        writeln!(index, "{w}").unwrap();
    }
    write_file(&out_dir.join("index.txt"), index)?;
    Ok(written)
}

/// Welch PSD averaged over realisations at one station.
pub fn ensemble_psd(histories: &[ResponseHistory], station: usize, dof: Dof) -> Result<SpectrumEstimate> {
    let first = histories
        .first()
        .ok_or_else(|| Error::Analysis("no histories".into()))?;
    let seg = default_segment(first.samples());
    let mut acc: Option<SpectrumEstimate> = None;
    for h in histories {
        let s = welch_psd(&h.series(station, dof), h.dt, seg)?;
        match &mut acc {
            None => acc = Some(s),
            Some(a) => {
                for (p, q) in a.psd.iter_mut().zip(&s.psd) {
                    *p += q;
                }
                a.segments += s.segments;
                a.variance += s.variance;
            }
        }
    }
    let mut a = acc.expect("at least one history");
    let n = histories.len() as f64;
    a.psd.iter_mut().for_each(|p| *p /= n);
    a.variance /= n;
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::SectionVector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn history(values: &[[f64; 2]], stations: usize) -> ResponseHistory {
        let mut h = ResponseHistory::new(0.1, 0.0, (0..stations).map(|i| i as f64 * 10.0).collect());
        for v in values {
            let row: Vec<SectionVector> = (0..stations)
                .map(|s| SectionVector::new(v[0] * (s + 1) as f64, 0.0, v[1]))
                .collect();
            h.push(&row).unwrap();
        }
        h
    }

    fn random_history(rng: &mut ChaCha8Rng, samples: usize, stations: usize) -> ResponseHistory {
        let mut h = ResponseHistory::new(0.1, 0.0, (0..stations).map(|i| i as f64).collect());
        for _ in 0..samples {
            let row: Vec<SectionVector> = (0..stations)
                .map(|_| SectionVector::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            h.push(&row).unwrap();
        }
        h
    }

    #[test]
    fn zero_history_gives_zero_envelope() {
        let h = history(&[[0.0, 0.0]; 5], 3);
        let e = envelope(&[&h]).unwrap();
        assert!(e.min_h.iter().chain(&e.max_h).all(|v| *v == 0.0));
    }

    #[test]
    fn two_values_give_their_bounds() {
        let h = history(&[[-1.0, 0.0], [2.0, 0.0]], 1);
        let e = envelope(&[&h]).unwrap();
        assert_eq!((e.min_h[0], e.max_h[0]), (-1.0, 2.0));
        assert_eq!(e.extreme(0, Dof::H), 2.0);
    }

    #[test]
    fn envelope_matches_full_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hs: Vec<ResponseHistory> = (0..6).map(|_| random_history(&mut rng, 50, 4)).collect();
        let refs: Vec<&ResponseHistory> = hs.iter().collect();
        let e = envelope(&refs).unwrap();
        for s in 0..4 {
            for dof in [Dof::H, Dof::Alpha] {
                let all: Vec<f64> = hs.iter().flat_map(|h| h.series(s, dof)).collect();
                let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let (a, b) = e.bounds(dof);
                assert_eq!((a[s], b[s]), (lo, hi));
            }
        }
    }

    #[test]
    fn mismatched_stations_are_rejected() {
        let a = history(&[[1.0, 0.0]], 2);
        let b = history(&[[1.0, 0.0]], 3);
        assert!(matches!(envelope(&[&a, &b]), Err(Error::GridMismatch(_))));
    }

    proptest! {
        #[test]
        fn envelope_grows_monotonically(seed in 0u64..1000, n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let hs: Vec<ResponseHistory> = (0..=n).map(|_| random_history(&mut rng, 20, 3)).collect();
            let refs: Vec<&ResponseHistory> = hs.iter().collect();
            let small = envelope(&refs[..n]).unwrap();
            let big = envelope(&refs).unwrap();
            for s in 0..3 {
                prop_assert!(big.min_h[s] <= small.min_h[s] && big.max_h[s] >= small.max_h[s]);
                prop_assert!(big.min_alpha[s] <= small.min_alpha[s] && big.max_alpha[s] >= small.max_alpha[s]);
                prop_assert!(big.min_h[s] <= big.max_h[s]);
            }
        }
    }

    #[test]
    fn percentile_envelope_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_history(&mut rng, 2000, 2);
        let full = envelope(&[&h]).unwrap();
        let p100 = percentile_envelope(&[&h], 1.0).unwrap();
        assert_eq!(p100, full);
        let p99 = percentile_envelope(&[&h], 0.99).unwrap();
        // Standard normal 99 % quantile is 2.326.
        assert!((p99.max_h[0] - 2.326).abs() < 0.25, "{}", p99.max_h[0]);
        assert!(p99.max_h[0] < full.max_h[0]);
    }

    #[test]
    fn width_metric_of_flat_and_peaked_shapes() {
        let mut e = Envelope::empty(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        e.min_h = vec![-1.0; 5];
        e.max_h = vec![0.0; 5];
        e.min_alpha = vec![0.0; 5];
        e.max_alpha = vec![0.0; 5];
        assert_eq!(e.width_metric(Dof::H, 0.9), 1.0);
        e.min_h = vec![0.0, 0.0, -1.0, 0.0, 0.0];
        // Above 0.9 within 0.1 of the peak on each side: 0.2 of 4 m.
        assert!((e.width_metric(Dof::H, 0.9) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn sinusoid_peaks_in_its_bin() {
        let dt = 0.1;
        let n = 6000;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * 0.1 * i as f64 * dt).sin()).collect();
        let s = welch_psd(&x, dt, default_segment(n)).unwrap();
        assert_eq!(s.bin(s.peak_frequency(0.0)), s.bin(0.1));
        assert!((s.parseval_ratio() - 1.0).abs() < 0.05, "{}", s.parseval_ratio());
    }

    #[test]
    fn white_noise_parseval_and_level() {
        // Monte-Carlo Parseval: sum PSD df equals the variance, and the
        // level matches the flat two-sided density sigma^2 dt doubled.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let dt = 0.05;
        let sigma = 1.7;
        let x: Vec<f64> = (0..48_000).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        let s = welch_psd(&x, dt, 1024).unwrap();
        assert!((s.parseval_ratio() - 1.0).abs() < 0.05, "{}", s.parseval_ratio());
        let integral: f64 = s.psd.iter().sum::<f64>() * s.df;
        assert!((integral / (sigma * sigma) - 1.0).abs() < 0.05);
        let mid: f64 = s.psd[100..400].iter().sum::<f64>() / 300.0;
        assert!((mid / (2.0 * sigma * sigma * dt) - 1.0).abs() < 0.05, "{mid}");
    }

    #[test]
    fn too_short_signal_is_an_error() {
        assert!(welch_psd(&[0.0; 10], 0.1, 8).is_err());
    }

    #[test]
    fn identical_signals_are_fully_coherent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..4096).map(|_| rng.sample(StandardNormal)).collect();
        let mut c = CrossSpectrum::new(256, 0.1);
        c.add(&x, &x).unwrap();
        for k in 1..c.bins() - 1 {
            assert!((c.msc(k) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_envelopes_compare_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_history(&mut rng, 30, 5);
        let e = envelope(&[&h]).unwrap();
        let c = compare_scenarios(&e, &e, &e, &e, 2.0, None).unwrap();
        assert_eq!(c.max_abs_difference, 0.0);
        assert!(c.diff_h.iter().chain(&c.diff_alpha).all(|d| *d == 0.0));
        assert_eq!(c.midspan, 2);
    }

    #[test]
    fn case_study_of_identical_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_history(&mut rng, 30, 5);
        let e = envelope(&[&h]).unwrap();
        let m = BTreeMap::from([(WindCase::One, e.clone()), (WindCase::Three, e)]);
        let rows = case_study(&m, 2.0).unwrap();
        assert_eq!(rows[0].midspan_extreme_h, rows[1].midspan_extreme_h);
        assert_eq!(rows[0].width_h, rows[1].width_h);
        assert!(case_study(&BTreeMap::new(), 0.0).is_err());
    }
}
