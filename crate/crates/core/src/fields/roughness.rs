//! Road roughness surface sampled along the wheel tracks of every lane.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::spectra::{iso8608_psd, RoughnessSpec};
use super::synthesis::{synthesise, Lines, Route};
use super::table::{read_table, write_table};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Track at `lane offset - gap / 2`.
    Left,
    /// Track at `lane offset + gap / 2`.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Track {
    pub lane: usize,
    pub side: Side,
    /// Lateral position [m].
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoughnessSurface {
    /// Coordinate of the first sample [m].
    pub x0: f64,
    pub dx: f64,
    samples: usize,
    tracks: Vec<Track>,
    /// One profile per track [m].
    profiles: Vec<Vec<f64>>,
    pub seed: u64,
}

impl RoughnessSurface {
    /// Generates a surface covering `[x0, x0 + length]` with two tracks per
    /// lane, `track_gap` apart, all drawn from one laterally coherent field.
    pub fn generate(
        spec: &RoughnessSpec,
        x0: f64,
        length: f64,
        dx: f64,
        lanes: &[f64],
        track_gap: f64,
        seed: u64,
    ) -> Result<Self> {
        Self::generate_with(spec, x0, length, dx, lanes, track_gap, seed, Route::Markov)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn generate_with(
        spec: &RoughnessSpec,
        x0: f64,
        length: f64,
        dx: f64,
        lanes: &[f64],
        track_gap: f64,
        seed: u64,
        route: Route,
    ) -> Result<Self> {
        spec.validate()?;
        if !(dx > 0.0 && length > dx) {
            return Err(Error::Invariant(format!("roughness length {length} and dx {dx} are inconsistent")));
        }
        let n_max = spec.wavenumber_band.1;
        if dx > 0.5 / n_max * (1.0 + 1e-12) {
            return Err(Error::Invariant(format!(
                "dx = {dx} m cannot resolve n_max = {n_max} cycles/m (needs dx <= {})",
                0.5 / n_max
            )));
        }
        if !(track_gap >= 0.0) || lanes.is_empty() {
            return Err(Error::Invariant("need at least one lane and a non-negative track gap".into()));
        }
        let samples = (length / dx).ceil() as usize + 1;
        let tracks: Vec<Track> = lanes
            .iter()
            .enumerate()
            .flat_map(|(lane, &e)| {
                [
                    Track { lane, side: Side::Left, y: e - 0.5 * track_gap },
                    Track { lane, side: Side::Right, y: e + 0.5 * track_gap },
                ]
            })
            .collect();
        let ys: Vec<f64> = tracks.iter().map(|t| t.y).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x524f);
        let lines = Lines {
            samples,
            spacing: dx,
            band: spec.wavenumber_band,
        };
        let decay = spec.transverse_decay;
        let profiles = synthesise(&ys, lines, |n| iso8608_psd(n, spec), |n| decay * n, route, &mut rng)?;
        Ok(Self {
            x0,
            dx,
            samples,
            tracks,
            profiles,
            seed,
        })
    }

    /// Perfectly smooth surface.
    pub fn flat(x0: f64, length: f64, lanes: &[f64], track_gap: f64) -> Self {
        let dx = length.max(1.0);
        let tracks: Vec<Track> = lanes
            .iter()
            .enumerate()
            .flat_map(|(lane, &e)| {
                [
                    Track { lane, side: Side::Left, y: e - 0.5 * track_gap },
                    Track { lane, side: Side::Right, y: e + 0.5 * track_gap },
                ]
            })
            .collect();
        Self {
            x0,
            dx,
            samples: 2,
            profiles: vec![vec![0.0; 2]; tracks.len()],
            tracks,
            seed: 0,
        }
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn profile(&self, track: usize) -> &[f64] {
        &self.profiles[track]
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn x_end(&self) -> f64 {
        self.x0 + (self.samples - 1) as f64 * self.dx
    }

    pub fn track_index(&self, lane: usize, side: Side) -> Option<usize> {
        self.tracks.iter().position(|t| t.lane == lane && t.side == side)
    }

    #[inline]
    fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let end = self.x_end();
        if !(x >= self.x0 && x <= end) {
            return Err(Error::OutOfRange {
                what: "roughness position x",
                value: x,
                lo: self.x0,
                hi: end,
            });
        }
        let s = (x - self.x0) / self.dx;
        let i = (s.floor() as usize).min(self.samples - 2);
        Ok((i, s - i as f64))
    }

    /// Elevation of `track` at `x`, linear between grid points.
    pub fn sample(&self, track: usize, x: f64) -> Result<f64> {
        let (i, w) = self.locate(x)?;
        let p = &self.profiles[track];
        Ok(p[i] + w * (p[i + 1] - p[i]))
    }

    /// Elevation and along-track slope of `track` at `x`.
    pub fn sample_with_slope(&self, track: usize, x: f64) -> Result<(f64, f64)> {
        let (i, w) = self.locate(x)?;
        let p = &self.profiles[track];
        let d = p[i + 1] - p[i];
        Ok((p[i] + w * d, d / self.dx))
    }

    /// CSV with an `x` column followed by one `lane<k>_<side>_<y>` column per track.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut header = vec!["x".to_string()];
        for t in &self.tracks {
            let side = match t.side {
                Side::Left => "left",
                Side::Right => "right",
            };
            header.push(format!("lane{}_{side}_{:e}", t.lane, t.y));
        }
        let comments = [
            "road roughness elevation [m]; x [m]; column suffix = lateral track position y [m]".to_string(),
            format!("dx={:e}", self.dx),
            format!("seed={}", self.seed),
        ];
        let rows = (0..self.samples).map(|i| {
            let mut row = Vec::with_capacity(1 + self.tracks.len());
            row.push(self.x0 + i as f64 * self.dx);
            row.extend(self.profiles.iter().map(|p| p[i]));
            row
        });
        write_table(out, &comments, &header, rows)
    }

    pub fn read_csv<R: std::io::BufRead>(input: R, name: &str) -> Result<Self> {
        let table = read_table(input, name)?;
        let dx: f64 = table
            .meta("dx")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(name, 1, "missing or bad `# dx=` comment"))?;
        let seed: u64 = table
            .meta("seed")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(name, 1, "missing or bad `# seed=` comment"))?;
        let tracks = table.header[1..]
            .iter()
            .map(|h| {
                let bad = || Error::parse(name, 1, format!("bad track column `{h}`"));
                let mut parts = h.splitn(3, '_');
                let lane = parts
                    .next()
                    .and_then(|l| l.strip_prefix("lane"))
                    .and_then(|l| l.parse().ok())
                    .ok_or_else(bad)?;
                let side = match parts.next() {
                    Some("left") => Side::Left,
                    Some("right") => Side::Right,
                    _ => return Err(bad()),
                };
                let y = parts.next().and_then(|y| y.parse().ok()).ok_or_else(bad)?;
                Ok(Track { lane, side, y })
            })
            .collect::<Result<Vec<_>>>()?;
        if table.rows.len() < 2 {
            return Err(Error::parse(name, 1, "need at least two rows"));
        }
        let profiles = (0..tracks.len())
            .map(|k| table.rows.iter().map(|r| r[1 + k]).collect())
            .collect();
        Ok(Self {
            x0: table.rows[0][0],
            dx,
            samples: table.rows.len(),
            tracks,
            profiles,
            seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_coherence_limit_gives_identical_tracks() {
        let spec = RoughnessSpec {
            transverse_decay: 0.0,
            ..Default::default()
        };
        let s = RoughnessSurface::generate(&spec, 0.0, 500.0, 0.25, &[3.9], 1.8, 8).unwrap();
        assert_eq!(s.profile(0), s.profile(1));
    }

    #[test]
    fn insufficient_resolution_is_rejected() {
        let spec = RoughnessSpec {
            wavenumber_band: (0.01, 4.0),
            ..Default::default()
        };
        let err = RoughnessSurface::generate(&spec, 0.0, 500.0, 0.25, &[0.0], 1.8, 1).unwrap_err();
        assert!(err.to_string().contains("cannot resolve"), "{err}");
    }

    #[test]
    fn zero_mean_and_sampling() {
        let s = RoughnessSurface::generate(&RoughnessSpec::default(), -20.0, 400.0, 0.5, &[3.9, 7.6], 1.8, 3)
            .unwrap();
        for k in 0..s.tracks().len() {
            let p = s.profile(k);
            let mean = p.iter().sum::<f64>() / p.len() as f64;
            assert!(mean.abs() < 1e-12);
        }
        assert_eq!(s.sample(0, -20.0).unwrap(), s.profile(0)[0]);
        assert_eq!(s.sample(2, -19.5).unwrap(), s.profile(2)[1]);
        let mid = s.sample(1, -19.75).unwrap();
        assert!((mid - 0.5 * (s.profile(1)[0] + s.profile(1)[1])).abs() < 1e-15);
        assert!(s.sample(0, -20.1).is_err());
        assert!(s.sample(0, s.x_end() + 0.1).is_err());
        assert_eq!(s.track_index(1, Side::Right), Some(3));
    }

    #[test]
    fn csv_round_trip() {
        let s = RoughnessSurface::generate(&RoughnessSpec::default(), -5.0, 40.0, 0.5, &[3.9, -3.9], 1.8, 9)
            .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = RoughnessSurface::read_csv(std::io::Cursor::new(buf), "mem").unwrap();
        assert_eq!(s, back);
    }
}
