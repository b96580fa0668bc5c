//! Recorded deck response at a set of stations.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::bridge::{Dof, SectionVector};
use crate::error::{Error, Result};
use crate::fields::table::{read_table, write_table};

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseHistory {
    /// Record interval [s].
    pub dt: f64,
    /// Time of sample 0 [s], after run-up.
    pub t0: f64,
    pub stations: Vec<f64>,
    /// `[sample][station][h, p, alpha]`.
    data: Vec<f64>,
    /// Free-form provenance: scenario, case, seeds, config hash.
    pub meta: BTreeMap<String, String>,
}

impl ResponseHistory {
    pub fn new(dt: f64, t0: f64, stations: Vec<f64>) -> Self {
        Self {
            dt,
            t0,
            stations,
            data: Vec::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self {
            dt: other.dt,
            t0: other.t0,
            stations: other.stations.clone(),
            data: vec![0.0; other.data.len()],
            meta: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, sample: &[SectionVector]) -> Result<()> {
        if sample.len() != self.stations.len() {
            return Err(Error::Dimension {
                expected: self.stations.len(),
                got: sample.len(),
            });
        }
        self.data.extend(sample.iter().flat_map(|s| [s.h, s.p, s.alpha]));
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.data.len() / (3 * self.stations.len().max(1))
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    #[inline]
    pub fn value(&self, k: usize, station: usize, dof: Dof) -> f64 {
        let c = match dof {
            Dof::H => 0,
            Dof::P => 1,
            Dof::Alpha => 2,
        };
        self.data[(k * self.stations.len() + station) * 3 + c]
    }

    pub fn series(&self, station: usize, dof: Dof) -> Vec<f64> {
        (0..self.samples()).map(|k| self.value(k, station, dof)).collect()
    }

    /// Station index closest to `x`.
    pub fn nearest_station(&self, x: f64) -> usize {
        (0..self.stations.len())
            .min_by(|&a, &b| (self.stations[a] - x).abs().total_cmp(&(self.stations[b] - x).abs()))
            .unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_aligned(&self, other: &Self) -> Result<()> {
        if self.dt != other.dt || self.t0 != other.t0 {
            return Err(Error::GridMismatch(format!(
                "time grids differ: dt {} vs {}, t0 {} vs {}",
                self.dt, other.dt, self.t0, other.t0
            )));
        }
        if self.stations != other.stations {
            return Err(Error::GridMismatch("station sets differ".into()));
        }
        if self.data.len() != other.data.len() {
            return Err(Error::GridMismatch(format!(
                "sample counts differ: {} vs {}",
                self.samples(),
                other.samples()
            )));
        }
        Ok(())
    }

    /// Element-wise sum; the result is labelled `<a>+<b>`.
    pub fn superpose(&self, other: &Self) -> Result<Self> {
        self.check_aligned(other)?;
        let mut out = Self::zeros_like(self);
        for (o, (a, b)) in out.data.iter_mut().zip(self.data.iter().zip(&other.data)) {
            *o = a + b;
        }
        let label = |h: &Self| h.meta.get("scenario").cloned().unwrap_or_else(|| "?".into());
        out.meta.insert("scenario".into(), format!("{}+{}", label(self), label(other)));
        for key in ["case", "realisation"] {
            if let Some(v) = self.meta.get(key).filter(|v| other.meta.get(key) == Some(v)) {
                out.meta.insert(key.into(), v.clone());
            }
        }
        Ok(out)
    }

    /// Largest `|self - other|` over every station, DOF and time.
    pub fn max_abs_difference(&self, other: &Self) -> Result<f64> {
        self.check_aligned(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Largest `|self - other|` per DOF, each relative to the largest `|other|` of that DOF.
    pub fn max_relative_difference(&self, other: &Self) -> Result<[f64; 3]> {
        self.check_aligned(other)?;
        let mut diff = [0.0f64; 3];
        let mut peak = [0.0f64; 3];
        for (i, (a, b)) in self.data.iter().zip(&other.data).enumerate() {
            let c = i % 3;
            diff[c] = diff[c].max((a - b).abs());
            peak[c] = peak[c].max(b.abs());
        }
        Ok([0, 1, 2].map(|c| if peak[c] > 0.0 { diff[c] / peak[c] } else { diff[c] }))
    }

    /// CSV: `t`, then `h_<x>`, `p_<x>`, `alpha_<x>` per station.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut comments = vec![
            "deck response; t [s]; h vertical (up) [m]; p lateral (along-wind) [m]; alpha torsion (nose-up) [rad]"
                .to_string(),
            format!("dt={:e}", self.dt),
        ];
        comments.extend(self.meta.iter().map(|(k, v)| format!("{k}={v}")));
        let mut header = vec!["t".to_string()];
        for x in &self.stations {
            for name in ["h", "p", "alpha"] {
                header.push(format!("{name}_{x:e}"));
            }
        }
        let n = 3 * self.stations.len();
        let rows = (0..self.samples()).map(|k| {
            let mut row = Vec::with_capacity(n + 1);
            row.push(self.time(k));
            row.extend_from_slice(&self.data[k * n..(k + 1) * n]);
            row
        });
        write_table(out, &comments, &header, rows)
    }

    pub fn read_csv<R: BufRead>(input: R, name: &str) -> Result<Self> {
        let table = read_table(input, name)?;
        let dt: f64 = table
            .meta("dt")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(name, 1, "missing or bad `# dt=` comment"))?;
        let cols = &table.header[1..];
        if cols.len() % 3 != 0 {
            return Err(Error::parse(name, 1, "expected h/p/alpha column triplets"));
        }
        let mut stations = Vec::with_capacity(cols.len() / 3);
        for (i, tri) in cols.chunks(3).enumerate() {
            let x = ["h_", "p_", "alpha_"]
                .iter()
                .zip(tri)
                .map(|(p, c)| c.strip_prefix(p).and_then(|v| v.parse::<f64>().ok()))
                .collect::<Option<Vec<_>>>()
                .filter(|v| v[0] == v[1] && v[1] == v[2])
                .ok_or_else(|| Error::parse(name, 1, format!("bad column triplet {}", i + 1)))?;
            stations.push(x[0]);
        }
        let t0 = table.rows.first().map(|r| r[0]).unwrap_or(0.0);
        let mut meta = BTreeMap::new();
        for c in &table.comments[1..] {
            if let Some((k, v)) = c.split_once('=') {
                if k.trim() != "dt" {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
        }
        Ok(Self {
            dt,
            t0,
            stations,
            data: table.rows.iter().flat_map(|r| r[1..].iter().copied()).collect(),
            meta,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file), &path.display().to_string())
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, scale: f64) -> ResponseHistory {
        let mut h = ResponseHistory::new(0.1, 60.0, vec![0.0, 10.0]);
        for k in 0..n {
            let v = scale * k as f64;
            h.push(&[SectionVector::new(v, -v, 0.1 * v), SectionVector::new(2.0 * v, 0.0, -v)])
                .unwrap();
        }
        h.meta.insert("scenario".into(), "W".into());
        h
    }

    #[test]
    fn superpose_with_zero_is_identity() {
        let h = ramp(5, 1.5);
        let z = ResponseHistory::zeros_like(&h);
        let s = h.superpose(&z).unwrap();
        assert_eq!(s.max_abs_difference(&h).unwrap(), 0.0);
    }

    #[test]
    fn superpose_commutes() {
        let (a, b) = (ramp(7, 0.3), ramp(7, -1.1));
        let ab = a.superpose(&b).unwrap();
        let ba = b.superpose(&a).unwrap();
        assert_eq!(ab.max_abs_difference(&ba).unwrap(), 0.0);
    }

    #[test]
    fn misaligned_grids_are_rejected() {
        let a = ramp(5, 1.0);
        let mut b = ramp(6, 1.0);
        assert!(matches!(a.superpose(&b), Err(Error::GridMismatch(_))));
        b = ramp(5, 1.0);
        b.stations[1] = 11.0;
        assert!(matches!(a.superpose(&b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut h = ramp(9, 0.123456789);
        h.meta.insert("config_hash".into(), "abc".into());
        let bytes = h.to_csv_bytes();
        let back = ResponseHistory::read_csv(std::io::Cursor::new(bytes), "mem").unwrap();
        assert_eq!(back, h);
    }
}
