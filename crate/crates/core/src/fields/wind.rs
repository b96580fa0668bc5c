//! Three-component turbulent wind along the deck.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::spectra::{von_karman_psd, Component, TurbulenceSpec};
use super::synthesis::{synthesise, Lines, Route};
use super::table::{read_table, write_table};
use crate::error::{Error, Result};

/// Default cap on stations x spectral lines per component.
pub const DEFAULT_LINE_BUDGET: usize = 50_000_000;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Gust {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindField {
    stations: Vec<f64>,
    dt: f64,
    samples: usize,
    pub mean_speed: f64,
    pub seed: u64,
    /// [component][station][time]
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct WindOptions {
    pub route: Route,
    pub line_budget: usize,
}

impl Default for WindOptions {
    fn default() -> Self {
        Self {
            route: Route::Markov,
            line_budget: DEFAULT_LINE_BUDGET,
        }
    }
}

fn sample_count(dt: f64, duration: f64) -> Result<usize> {
    if !(dt > 0.0) || !(duration > 0.0) {
        return Err(Error::Invariant(format!("dt ({dt}) and duration ({duration}) must be positive")));
    }
    let n = (duration / dt).round();
    if (n * dt - duration).abs() > 1e-9 * duration {
        return Err(Error::Invariant(format!("duration {duration} is not a multiple of dt {dt}")));
    }
    Ok(n as usize)
}

fn check_stations(stations: &[f64]) -> Result<()> {
    if stations.is_empty() || stations.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invariant("wind stations must be non-empty and strictly increasing".into()));
    }
    Ok(())
}

impl WindField {
    pub fn generate(spec: &TurbulenceSpec, stations: &[f64], dt: f64, duration: f64, seed: u64) -> Result<Self> {
        Self::generate_with(spec, stations, dt, duration, seed, WindOptions::default())
    }

    /// Spectral-representation synthesis over `[1/duration, Nyquist]`.
    /// Components are mutually independent; each uses its own RNG stream.
    pub fn generate_with(
        spec: &TurbulenceSpec,
        stations: &[f64],
        dt: f64,
        duration: f64,
        seed: u64,
        opts: WindOptions,
    ) -> Result<Self> {
        spec.validate()?;
        check_stations(stations)?;
        let samples = sample_count(dt, duration)?;
        let lines = Lines {
            samples,
            spacing: dt,
            band: (1.0 / duration, 0.5 / dt),
        };
        let demand = stations.len().saturating_mul(samples / 2);
        if demand > opts.line_budget {
            return Err(Error::Resource(format!(
                "wind field needs {} stations x {} lines = {demand}, budget is {}",
                stations.len(),
                samples / 2,
                opts.line_budget
            )));
        }
        let mut data = Vec::with_capacity(3 * stations.len() * samples);
        for c in Component::ALL {
            if spec.sigma(c) == 0.0 {
                data.extend(std::iter::repeat_n(0.0, stations.len() * samples));
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c.index() as u64 + 1);
            let decay = spec.davenport_decay[c.index()] / spec.mean_speed;
            let records = synthesise(
                stations,
                lines,
                |f| von_karman_psd(f, spec, c),
                |f| decay * f,
                opts.route,
                &mut rng,
            )?;
            for r in records {
                data.extend(r);
            }
        }
        Ok(Self {
            stations: stations.to_vec(),
            dt,
            samples,
            mean_speed: spec.mean_speed,
            seed,
            data,
        })
    }

    /// A field with no turbulence.
    pub fn calm(mean_speed: f64, stations: &[f64], dt: f64, duration: f64) -> Result<Self> {
        check_stations(stations)?;
        let samples = sample_count(dt, duration)?;
        Ok(Self {
            stations: stations.to_vec(),
            dt,
            samples,
            mean_speed,
            seed: 0,
            data: vec![0.0; 3 * stations.len() * samples],
        })
    }

    pub fn stations(&self) -> &[f64] {
        &self.stations
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn duration(&self) -> f64 {
        self.samples as f64 * self.dt
    }

    pub fn series(&self, c: Component, station: usize) -> &[f64] {
        let start = (c.index() * self.stations.len() + station) * self.samples;
        &self.data[start..start + self.samples]
    }

    fn time_index(&self, t: f64) -> Result<(usize, usize, f64)> {
        let d = self.duration();
        if !(t >= 0.0 && t <= d) {
            return Err(Error::OutOfRange {
                what: "wind time t",
                value: t,
                lo: 0.0,
                hi: d,
            });
        }
        let s = t / self.dt;
        let i = (s.floor() as usize).min(self.samples - 1);
        // The synthesised record is periodic, so the last interval wraps.
        Ok((i, (i + 1) % self.samples, s - i as f64))
    }

    /// Turbulence at station `station`, linear in time.
    pub fn at_station(&self, station: usize, t: f64) -> Result<Gust> {
        let (i0, i1, w) = self.time_index(t)?;
        Ok(self.at_station_index(station, i0, i1, w))
    }

    #[inline]
    fn at_station_index(&self, station: usize, i0: usize, i1: usize, w: f64) -> Gust {
        let lerp = |c: Component| {
            let s = self.series(c, station);
            s[i0] + w * (s[i1] - s[i0])
        };
        Gust {
            u: lerp(Component::U),
            v: lerp(Component::V),
            w: lerp(Component::W),
        }
    }

    /// Turbulence at all stations at time `t`, written into `out`.
    pub fn snapshot(&self, t: f64, out: &mut [Gust]) -> Result<()> {
        let (i0, i1, w) = self.time_index(t)?;
        for (s, o) in out.iter_mut().enumerate().take(self.stations.len()) {
            *o = self.at_station_index(s, i0, i1, w);
        }
        Ok(())
    }

    /// Turbulence at arbitrary `x`, linear in space and time.
    pub fn sample(&self, x: f64, t: f64) -> Result<Gust> {
        let (lo, hi) = (self.stations[0], self.stations[self.stations.len() - 1]);
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfRange {
                what: "wind station x",
                value: x,
                lo,
                hi,
            });
        }
        if self.stations.len() == 1 {
            return self.at_station(0, t);
        }
        let j = self.stations.partition_point(|&s| s <= x).clamp(1, self.stations.len() - 1) - 1;
        let a = (x - self.stations[j]) / (self.stations[j + 1] - self.stations[j]);
        let g0 = self.at_station(j, t)?;
        let g1 = self.at_station(j + 1, t)?;
        Ok(Gust {
            u: g0.u + a * (g1.u - g0.u),
            v: g0.v + a * (g1.v - g0.v),
            w: g0.w + a * (g1.w - g0.w),
        })
    }

    /// CSV with a `t` column followed by `u_<x>`, `v_<x>`, `w_<x>` columns.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut header = vec!["t".to_string()];
        for c in Component::ALL {
            for x in &self.stations {
                header.push(format!("{}_{x:e}", c.name()));
            }
        }
        let comments = [
            "turbulent wind fluctuations [m/s]; t [s]; column suffix = station x [m]".to_string(),
            format!("mean_speed={:e}", self.mean_speed),
            format!("dt={:e}", self.dt),
            format!("seed={}", self.seed),
        ];
        let ns = self.stations.len();
        let rows = (0..self.samples).map(|i| {
            let mut row = Vec::with_capacity(1 + 3 * ns);
            row.push(i as f64 * self.dt);
            for c in Component::ALL {
                for s in 0..ns {
                    row.push(self.series(c, s)[i]);
                }
            }
            row
        });
        write_table(out, &comments, &header, rows)
    }

    pub fn read_csv<R: std::io::BufRead>(input: R, name: &str) -> Result<Self> {
        let table = read_table(input, name)?;
        let meta = |key: &str| -> Result<String> {
            table
                .meta(key)
                .ok_or_else(|| Error::parse(name, 1, format!("missing `# {key}=` comment")))
        };
        let num = |key: &str| -> Result<f64> {
            meta(key)?
                .parse()
                .map_err(|_| Error::parse(name, 1, format!("bad `{key}` value")))
        };
        let ncols = table.header.len();
        if ncols < 4 || (ncols - 1) % 3 != 0 {
            return Err(Error::parse(name, 1, "expected t plus three columns per station"));
        }
        let ns = (ncols - 1) / 3;
        let stations = table.header[1..=ns]
            .iter()
            .map(|h| {
                h.strip_prefix("u_")
                    .and_then(|x| x.parse::<f64>().ok())
                    .ok_or_else(|| Error::parse(name, 1, format!("bad station column `{h}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let samples = table.rows.len();
        let mut data = vec![0.0; 3 * ns * samples];
        for (i, row) in table.rows.iter().enumerate() {
            for k in 0..3 * ns {
                data[k * samples + i] = row[1 + k];
            }
        }
        Ok(Self {
            stations,
            dt: num("dt")?,
            samples,
            mean_speed: num("mean_speed")?,
            seed: meta("seed")?
                .parse()
                .map_err(|_| Error::parse(name, 1, "bad `seed` value"))?,
            data,
        })
    }
}
